#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qpc/objective.hpp"
#include "qpc/panel.hpp"
#include "qpc/transform.hpp"

namespace qpc {

enum class CovarianceMode { None, PluginKronecker, PluginHomoskedastic };

struct EstimateOptions {
    /// Factors used in estimation. estimate_qpc counts the initial-condition
    /// factor (R = R* + 1); estimate_bn and estimate_pc_bai count R* only.
    Index R = 1;
    double alpha_lo = -0.99;
    double alpha_hi = 0.99;
    /// Half-width of the beta search box around the starting value.
    double beta_box = 10.0;
    int multistart = 8;
    int max_iter = 2000;
    double tol = 1e-10;
    /// Starting value; pooled least squares when empty.
    std::optional<Coefs> initial;
    BasisMethod basis = BasisMethod::SymmetricRoot;
    /// Replace exactly rank-1 covariates by their loading vector in the basis.
    bool detect_low_rank = false;
    double low_rank_tol = 1e-8;
    CovarianceMode covariance = CovarianceMode::PluginKronecker;
};

struct StartTrace {
    VectorXd start;
    VectorXd theta;
    double objective = 0.0;
    int iterations = 0;
    int polish_steps = 0;
    bool simplex_converged = false;
};

struct EstimateResult {
    std::string estimator;
    Coefs theta_hat;
    FactorStructure factors;
    double objective = 0.0;
    bool converged = false;
    int starts_agreeing = 0;
    std::vector<StartTrace> diagnostics;

    Index n = 0;        // cross-section size used for normalisation
    Index periods = 0;  // time columns of the estimated system
    Index R = 0;
    /// Idiosyncratic residual E(theta_hat) - Lambda F'.
    MatrixXd residual;
    /// Asymptotic covariance V; Var(theta_hat) is approximated by V / (n * periods).
    std::optional<MatrixXd> covariance;
    std::string covariance_note;
    /// Objective after each iteration (iterative estimators only).
    std::vector<double> objective_path;

    VectorXd standard_errors() const;
};

/// Transformed principal-components estimator.
EstimateResult estimate_qpc(const PanelData& data, const EstimateOptions& opts);
EstimateResult estimate_qpc(const TransformedPanel& tp, const EstimateOptions& opts);

/// Variant that adds the projected lagged outcome as a regressor and drops
/// the first period, so no initial-condition factor is needed.
EstimateResult estimate_bn(const PanelData& data, const EstimateOptions& opts);

struct SystemFit {
    VectorXd theta;
    double objective = 0.0;
    bool converged = false;
    int starts_agreeing = 0;
    std::vector<StartTrace> diagnostics;
};

/// Multistart minimisation of the profile objective of a linear system.
/// The first parameter is alpha and is bounded by the alpha interval; the
/// rest are boxed around the starting value.
SystemFit minimize_profile(const LinearSystem& sys, const EstimateOptions& opts);

/// Factors, residual, objective and (optionally) the sandwich covariance at
/// fit.theta. `instruments` are the matrices Z_kappa used in D and Omega.
EstimateResult result_from_fit(std::string name, const LinearSystem& sys, const SystemFit& fit,
                               Index R, const std::vector<MatrixXd>& instruments,
                               CovarianceMode mode);

}  // namespace qpc
