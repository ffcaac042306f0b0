#pragma once

#include "fewshot/grammar/enumerate.hpp"
#include "fewshot/grammar/interpreter.hpp"
#include "fewshot/grammar/json.hpp"
#include "fewshot/grammar/lexicon.hpp"
#include "fewshot/grammar/types.hpp"
