#pragma once

#include "qpc/estimator.hpp"
#include "qpc/panel.hpp"

namespace qpc {

/// Regression system of the untransformed model. With y0 present the lag of
/// period 1 is y0 and all T periods are used; otherwise period 1 is dropped.
LinearSystem untransformed_system(const PanelData& data);

/// Pooled OLS of y_it on (y_i,t-1, x_it) without intercept, with an HC0
/// robust covariance.
EstimateResult estimate_ls(const PanelData& data);

/// Iterative principal components on the untransformed model: alternate
/// least squares given the factors and principal components given the
/// coefficients, starting from pooled OLS. opts.R counts R* only.
EstimateResult estimate_pc_bai(const PanelData& data, const EstimateOptions& opts);

}  // namespace qpc
