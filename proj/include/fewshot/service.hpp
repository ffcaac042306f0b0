#pragma once

#include "fewshot/service/http.hpp"
#include "fewshot/service/service.hpp"
#include "fewshot/service/store.hpp"
