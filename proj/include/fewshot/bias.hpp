#pragma once

#include "fewshot/bias/classify.hpp"
#include "fewshot/bias/logistic.hpp"
#include "fewshot/bias/report.hpp"
#include "fewshot/bias/segmentation.hpp"
