#pragma once

#include "tdoa/errors.hpp"
#include "tdoa/harness.hpp"
#include "tdoa/identifiability.hpp"
#include "tdoa/likelihood.hpp"
#include "tdoa/linear_estimator.hpp"
#include "tdoa/model.hpp"
#include "tdoa/noise_variance.hpp"
#include "tdoa/pipeline.hpp"
#include "tdoa/rng.hpp"
#include "tdoa/serialization.hpp"
#include "tdoa/version.hpp"
