#pragma once

#include <optional>
#include <vector>

#include "qpc/estimator.hpp"
#include "qpc/panel.hpp"
#include "qpc/transform.hpp"

namespace qpc {

/// Z_1 = sum_k beta_k Xtil_k G(alpha), Z_{k+1} = Xtil_k, and the matrix whose
/// columns are vec(Z_kappa).
struct Instruments {
    std::vector<MatrixXd> Z;
    MatrixXd Zstacked;

    Index size() const { return static_cast<Index>(Z.size()); }
};

Instruments build_instruments(const TransformedPanel& tp, const Coefs& theta);
/// Stacks an arbitrary list of equally shaped instrument matrices.
Instruments make_instruments(std::vector<MatrixXd> Z);

/// D = (1/nT) [tr(Z_k M_F Z_l' M_Lambda)].
MatrixXd hessian_D(const Instruments& ins, const FactorStructure& fs, Index n, Index T);

enum class SigmaSource { Oracle, PluginKronecker, PluginHomoskedastic };

struct Sigmas {
    MatrixXd SigmaT;       // T x T
    MatrixXd SigmaNtilde;  // rows x rows, Q' Sigma_n Q
    SigmaSource source = SigmaSource::Oracle;
    /// Untransformed n x n cross-section covariance, oracle only.
    std::optional<MatrixXd> SigmaN;
    double upsilon3 = 0.0;
    double upsilon4 = 3.0;
};

/// Oracle Sigmas from the untransformed covariances and a basis.
Sigmas oracle_sigmas(const MatrixXd& SigmaN, const MatrixXd& SigmaT, const MatrixXd& Q,
                     double upsilon3 = 0.0, double upsilon4 = 3.0);

/// Degrees of freedom used by the homoskedastic plug-in.
double homoskedastic_df(Index K, Index R, Index T, Index rows);

/// Plug-in covariances from an idiosyncratic residual (rows x T).
/// Kronecker: SigmaT = T E'E / ||E||^2 (trace T), SigmaNtilde = E E' / T.
/// Homoskedastic: SigmaT = s2 I, SigmaNtilde = I, s2 = ||E||^2 / (T rows - df).
Sigmas estimate_sigmas(const MatrixXd& residual, SigmaSource mode, double df = 0.0);

/// Omega = (1/nT) [<M_L Z_k M_F, SigmaNtilde M_L Z_l M_F SigmaT>].
MatrixXd omega(const Instruments& ins, const FactorStructure& fs, const Sigmas& sig, Index n,
               Index T);

/// D^{-1} Omega D^{-1}. Throws NumericalError when D is singular
/// (condition number above 1e12).
MatrixXd fixed_T_covariance(const MatrixXd& D, const MatrixXd& Omega);

struct BiasTerms {
    VectorXd psi0;
    VectorXd psi1;
    VectorXd psi2;
    VectorXd psi3;

    VectorXd total() const { return psi0 + psi1 + psi2 + psi3; }
};

/// Large-T bias vectors evaluated at the true parameters and oracle Sigmas.
/// With dynamic = false the lag terms psi0 and psi1 vanish.
BiasTerms bias_psi(const Coefs& theta0, const FactorStructure& fs0, const Instruments& ins,
                   const Sigmas& sig, Index n, Index T, bool dynamic = true);

struct VarianceTerms {
    MatrixXd D;
    MatrixXd Upsilon1;
    MatrixXd Upsilon2;
    MatrixXd Xi;
    MatrixXd PhiBar;
    MatrixXd Delta;  // D + Upsilon1
};

/// Requires sig.SigmaN and the basis Q for the higher-moment terms.
VarianceTerms variance_terms(const Coefs& theta0, const FactorStructure& fs0,
                             const Instruments& ins, const Sigmas& sig, const MatrixXd& Q,
                             Index n, Index T, bool dynamic = true);

/// Delta^{-1} (Omega + Upsilon2 + Xi + PhiBar) Delta^{-1}.
MatrixXd theorem1_covariance(const VarianceTerms& vt, const MatrixXd& Omega);

/// Closed form of sum_{t=1}^{T-1} sum_{tau=1}^{t} alpha^(tau-1).
double nickell_sum(double alpha, Index T);

/// sqrt(T/n) K / (1 - alpha) (1 - (1 - alpha^T) / (T (1 - alpha))).
double nickell_bias(double alpha, Index T, Index n, Index K);

/// Same bias without the transformation: sqrt(n/T) / (1 - alpha) (...).
double nickell_bias_untransformed(double alpha, Index T, Index n);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Standard normal two-sided critical value; 1.959964 at level 0.95.
double normal_critical(double level);

/// theta_k +/- z sqrt(cov_kk / (n T)).
std::vector<Interval> confidence_intervals(const Coefs& theta, const MatrixXd& cov, Index n,
                                           Index T, double level = 0.95);
std::vector<Interval> confidence_intervals(const EstimateResult& res, double level = 0.95);

}  // namespace qpc
