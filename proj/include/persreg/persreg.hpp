#pragma once

#include "persreg/core_model.hpp"
#include "persreg/covariate_metric.hpp"
#include "persreg/covariates.hpp"
#include "persreg/error.hpp"
#include "persreg/objective.hpp"
#include "persreg/optimizer.hpp"
#include "persreg/population.hpp"
#include "persreg/predictor.hpp"
#include "persreg/simulator.hpp"
