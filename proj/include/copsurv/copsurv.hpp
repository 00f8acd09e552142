#pragma once

// Umbrella header: parametric survival models with copula-dependent censoring.

#include "copsurv/copulas.hpp"
#include "copsurv/estimation.hpp"
#include "copsurv/io.hpp"
#include "copsurv/margins.hpp"
#include "copsurv/simulation.hpp"
#include "copsurv/survival_model.hpp"
#include "copsurv/version.hpp"
