#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "qpc/panel.hpp"
#include "qpc/transform.hpp"

namespace qpc {

enum class ErrorMode { HeteroskedasticDiagonal, Iid, Custom };

struct DgpConfig {
    Index n = 300;
    Index T = 6;
    Index R_star = 2;
    double alpha0 = 0.5;
    VectorXd beta0 = VectorXd::Ones(2);
    double het_lo = 0.5;
    double het_hi = 2.5;
    Index burn_in = 100;
    std::uint64_t seed = 1;
    ErrorMode error_mode = ErrorMode::HeteroskedasticDiagonal;
    /// Multiplies every error draw; 0 gives a noiseless panel.
    double noise_scale = 1.0;
    /// Full covariances for ErrorMode::Custom (n x n and T x T). Burn-in
    /// periods then use the average diagonal of custom_sigma_t.
    std::optional<MatrixXd> custom_sigma_n;
    std::optional<MatrixXd> custom_sigma_t;

    void validate() const;
};

struct SimTruth {
    MatrixXd Lambda;   // n x R*
    MatrixXd F;        // T x R*
    MatrixXd SigmaN;   // n x n, scaled by noise_scale^2
    MatrixXd SigmaT;   // T x T
    MatrixXd epsilon;  // n x T
    Coefs theta0;
    VectorXd y0;
};

struct SimDraw {
    PanelData data;
    SimTruth truth;
};

/// Independent 64-bit key for (seed, replication, stream).
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication, std::uint64_t stream);

/// Engine seeded from stream_key.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t replication, std::uint64_t stream);

/// Y S(alpha) = sum beta_k X_k + Lambda F' + alpha y0 e_1' + eps, with
/// X_1 = Lambda F' + eta, X_k standard normal for k >= 2, and y0 taken
/// from a burn-in path that shares Lambda.
SimDraw generate(const DgpConfig& cfg, std::uint64_t replication = 0);

/// True factor structure of the transformed model: F = (e_1, F*) and
/// loadings Q'(alpha y0, Lambda).
FactorStructure oracle_factors(const SimTruth& truth, const TransformBasis& basis);

}  // namespace qpc
