#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "qpc/errors.hpp"

namespace qpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Balanced panel: outcomes Y (n x T), K covariates X_k (n x T) and an
/// optional vector of period-0 outcomes.
struct PanelData {
    MatrixXd Y;
    std::vector<MatrixXd> X;
    std::optional<VectorXd> y0;

    Index n() const { return Y.rows(); }
    Index T() const { return Y.cols(); }
    Index K() const { return static_cast<Index>(X.size()); }

    /// Throws DataError unless shapes agree, K >= 1, T >= 2, n >= T*K and
    /// every entry is finite.
    void validate() const;
};

/// theta = (alpha, beta')'.
struct Coefs {
    double alpha = 0.0;
    VectorXd beta;

    Coefs() = default;
    Coefs(double a, VectorXd b) : alpha(a), beta(std::move(b)) {}

    Index K() const { return beta.size(); }
    VectorXd stacked() const;
    static Coefs from_stacked(const VectorXd& theta);
};

/// Factors F (T x R) and loadings (rows x R). For the transformed model the
/// loadings are the TK x R matrix of transformed loadings.
struct FactorStructure {
    MatrixXd F;
    MatrixXd loadings;
    /// Set when the R-th and (R+1)-th eigenvalues tie, so the factor space
    /// is not uniquely determined.
    bool rotation_ambiguous = false;

    Index R() const { return F.cols(); }
    MatrixXd common_component() const;
};

/// T x T shift matrix W: ones directly above the main diagonal.
MatrixXd lag_operator(Index T);

/// S(alpha) = I_T - alpha W.
MatrixXd shift_matrix(double alpha, Index T);

/// G(alpha) = S(alpha)^{-1} W, built from powers of alpha. Entry (t, t+j)
/// equals alpha^(j-1).
MatrixXd lag_response_G(double alpha, Index T);

struct Projectors {
    MatrixXd P;
    MatrixXd M;
};

/// Moore-Penrose pseudoinverse with the relative cutoff
/// max(rows, cols) * eps * sigma_max.
MatrixXd pseudo_inverse(const MatrixXd& A);

/// P_A = A (A'A)^+ A' and M_A = I - P_A.
Projectors projectors(const MatrixXd& A);

/// Numerical rank under the same cutoff as pseudo_inverse.
Index numerical_rank(const MatrixXd& A);

/// Symmetric square root of a symmetric PSD matrix.
MatrixXd symmetric_sqrt(const MatrixXd& A);

}  // namespace qpc
