#pragma once

#include "fewshot/sim/simulator.hpp"
