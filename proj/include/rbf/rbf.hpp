#pragma once

#include "rbf/analytics.hpp"
#include "rbf/backtest.hpp"
#include "rbf/core_model.hpp"
#include "rbf/error.hpp"
#include "rbf/factor_risk.hpp"
#include "rbf/io.hpp"
#include "rbf/risk_measures.hpp"
#include "rbf/solvers.hpp"
