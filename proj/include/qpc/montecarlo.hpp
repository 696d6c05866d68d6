#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qpc/estimator.hpp"
#include "qpc/simulate.hpp"

namespace qpc {

struct McConfig {
    std::vector<std::pair<Index, Index>> grid;  // (n, T)
    int replications = 500;
    std::vector<std::string> estimators{"ls", "pc", "bn", "qpc"};
    std::map<std::string, Index> R{{"ls", 0}, {"pc", 2}, {"bn", 2}, {"qpc", 3}};
    double level = 0.95;
    DgpConfig dgp;
    int workers = 1;
    int multistart = 8;
    CovarianceMode covariance = CovarianceMode::PluginKronecker;
    /// Record the eigenvalue-ratio choice from the qpc residuals.
    bool eigr = true;
    std::string output;
    std::string format = "csv";

    void validate() const;
};

/// Flat "key = value" document; '#' starts a comment. Keys: grid, replications,
/// seed, estimators, R.<estimator>, level, workers, multistart, covariance,
/// eigr, output, format, dgp.alpha0, dgp.beta0, dgp.R_star, dgp.het_lo,
/// dgp.het_hi, dgp.burn_in, dgp.error_mode, dgp.noise_scale.
McConfig parse_mc_config(const std::string& text);
McConfig load_mc_config(const std::string& path);

struct RepOutcome {
    bool ok = false;
    VectorXd theta;
    bool has_interval = false;
    std::vector<bool> covered;
    std::string error;
};

struct CellDraws {
    Index n = 0;
    Index T = 0;
    VectorXd theta0;
    std::map<std::string, std::vector<RepOutcome>> draws;  // per estimator, by replication
    std::vector<Index> eigr_choice;                         // 0 when unavailable
};

/// Per-replication results for one (n, T) cell. Replication r uses DGP
/// stream r, so results do not depend on the worker count.
CellDraws simulate_cell(const McConfig& cfg, Index n, Index T);

struct McRow {
    std::string estimator;
    Index n = 0;
    Index T = 0;
    std::string coef;
    double bias = 0.0;
    double sd = 0.0;
    double coverage = 0.0;
    int successes = 0;
    int failures = 0;
    bool na = false;
};

struct FactorRow {
    Index n = 0;
    Index T = 0;
    /// Percentage of replications choosing r, for r = 1..T-1.
    std::vector<double> percent;
    int successes = 0;
};

struct McReport {
    std::vector<McRow> rows;
    std::vector<FactorRow> factors;
};

McReport summarize(const McConfig& cfg, const std::vector<CellDraws>& cells);
McReport run_monte_carlo(const McConfig& cfg);

std::vector<std::string> coefficient_names(Index K);

/// estimator,n,T,coef,bias,sd,coverage
std::string report_csv(const McReport& rep);
/// n,T,R_hat,percent
std::string factor_csv(const McReport& rep);
std::string report_markdown(const McReport& rep);

}  // namespace qpc
