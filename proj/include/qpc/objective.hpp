#pragma once

#include <vector>

#include "qpc/panel.hpp"
#include "qpc/transform.hpp"

namespace qpc {

/// Wmat = Ytil S(alpha) - sum_k beta_k Xtil_k.
MatrixXd composite_residual(const TransformedPanel& tp, const Coefs& theta);

/// (1/nT) times the sum of the T - R smallest eigenvalues of Wmat'Wmat,
/// with n the original cross-section size.
double profile_objective(const TransformedPanel& tp, const Coefs& theta, Index R);

/// (1/nT) ||Wmat - Lambda F'||_F^2.
double full_objective(const TransformedPanel& tp, const Coefs& theta, const FactorStructure& fs);

/// F = leading R unit-norm eigenvectors of Wmat'Wmat, Lambda = Wmat F.
FactorStructure extract_factors(const TransformedPanel& tp, const Coefs& theta, Index R);

/// Same computations for an arbitrary residual matrix.
double profile_from_residual(const MatrixXd& W, Index R, double nT);
FactorStructure factors_from_residual(const MatrixXd& W, Index R);

/// Residual that is linear in the parameter vector:
/// E(theta) = target - sum_j theta_j regressors[j].
/// For the transformed model, target = Ytil, regressors = (Ytil W, Xtil_1, ..., Xtil_K).
struct LinearSystem {
    MatrixXd target;
    std::vector<MatrixXd> regressors;
    Index n = 0;  // normalising cross-section size

    Index periods() const { return target.cols(); }
    Index params() const { return static_cast<Index>(regressors.size()); }
    double nT() const { return static_cast<double>(n) * static_cast<double>(periods()); }
    MatrixXd residual(const VectorXd& theta) const;
};

LinearSystem qpc_system(const TransformedPanel& tp);

/// Profile objective from precomputed T x T cross products, for repeated
/// evaluation inside the optimiser.
class ProfileEvaluator {
public:
    ProfileEvaluator(const LinearSystem& sys, Index R);

    double operator()(const VectorXd& theta) const;
    /// Residual Gram matrix E(theta)'E(theta).
    MatrixXd gram(const VectorXd& theta) const;

    /// One alternating least-squares step: factors from E(theta), then the
    /// least-squares theta of the defactored system.
    VectorXd als_step(const VectorXd& theta) const;

    /// Pooled least squares ignoring factors.
    VectorXd least_squares() const;

    Index R() const { return R_; }
    Index params() const { return p_; }
    /// ||target||^2 / nT, a yardstick for rounding slack.
    double scale() const { return AA_.trace() / nT_; }

private:
    Index R_;
    Index p_;
    Index T_;
    double nT_;
    MatrixXd AA_;                   // A'A
    std::vector<MatrixXd> AB_;      // A'B_j
    std::vector<MatrixXd> BB_;      // B_i'B_j, row-major over (i, j)
};

}  // namespace qpc
