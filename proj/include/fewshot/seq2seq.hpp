#pragma once

#include "fewshot/seq2seq/model.hpp"
#include "fewshot/seq2seq/network.hpp"
#include "fewshot/seq2seq/train.hpp"
