#pragma once

#include "fewshot/protocol/generate.hpp"
#include "fewshot/protocol/grading.hpp"
#include "fewshot/protocol/quiz.hpp"
#include "fewshot/protocol/session.hpp"
#include "fewshot/protocol/spec.hpp"
