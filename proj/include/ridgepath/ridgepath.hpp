#ifndef RIDGEPATH_RIDGEPATH_HPP
#define RIDGEPATH_RIDGEPATH_HPP

#include "ridgepath/error.hpp"
#include "ridgepath/core_spectral.hpp"
#include "ridgepath/estimators.hpp"
#include "ridgepath/risk_analysis.hpp"
#include "ridgepath/comparison.hpp"
#include "ridgepath/rng.hpp"
#include "ridgepath/experiments.hpp"
#include "ridgepath/ingest.hpp"
#include "ridgepath/verification.hpp"

#endif
