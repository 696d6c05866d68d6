#include "qpc/panel.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace qpc {

namespace {

void require_finite(const MatrixXd& m, const std::string& name) {
    if (!m.allFinite()) {
        throw DataError(name + " contains non-finite entries");
    }
}

}  // namespace

void PanelData::validate() const {
    const Index n_ = n();
    const Index T_ = T();
    if (X.empty()) {
        throw DataError("panel needs at least one covariate (K >= 1)");
    }
    if (T_ < 2) {
        throw DataError("panel needs at least two periods (T >= 2), got T = " +
                        std::to_string(T_));
    }
    for (std::size_t k = 0; k < X.size(); ++k) {
        if (X[k].rows() != n_ || X[k].cols() != T_) {
            throw DataError("covariate x" + std::to_string(k + 1) + " is " +
                            std::to_string(X[k].rows()) + "x" + std::to_string(X[k].cols()) +
                            ", expected " + std::to_string(n_) + "x" + std::to_string(T_));
        }
        require_finite(X[k], "covariate x" + std::to_string(k + 1));
    }
    if (n_ < T_ * K()) {
        throw DataError("cross-section too small: need n >= T*K (" + std::to_string(T_ * K()) +
                        "), got n = " + std::to_string(n_));
    }
    require_finite(Y, "outcome matrix");
    if (y0) {
        if (y0->size() != n_) {
            throw DataError("initial outcome vector has length " + std::to_string(y0->size()) +
                            ", expected " + std::to_string(n_));
        }
        require_finite(*y0, "initial outcome vector");
    }
}

VectorXd Coefs::stacked() const {
    VectorXd theta(beta.size() + 1);
    theta(0) = alpha;
    theta.tail(beta.size()) = beta;
    return theta;
}

Coefs Coefs::from_stacked(const VectorXd& theta) {
    if (theta.size() < 1) {
        throw std::invalid_argument("coefficient vector must contain alpha");
    }
    return Coefs(theta(0), theta.tail(theta.size() - 1));
}

MatrixXd FactorStructure::common_component() const {
    if (R() == 0) {
        return MatrixXd::Zero(loadings.rows(), F.rows());
    }
    return loadings * F.transpose();
}

MatrixXd lag_operator(Index T) {
    if (T < 1) {
        throw std::invalid_argument("shift matrix needs T >= 1");
    }
    MatrixXd W = MatrixXd::Zero(T, T);
    for (Index t = 0; t + 1 < T; ++t) {
        W(t, t + 1) = 1.0;
    }
    return W;
}

MatrixXd shift_matrix(double alpha, Index T) {
    if (T < 1) {
        throw std::invalid_argument("shift matrix needs T >= 1");
    }
    MatrixXd S = MatrixXd::Identity(T, T);
    for (Index t = 0; t + 1 < T; ++t) {
        S(t, t + 1) = -alpha;
    }
    return S;
}

MatrixXd lag_response_G(double alpha, Index T) {
    if (T < 1) {
        throw std::invalid_argument("lag response needs T >= 1");
    }
    // W nilpotent: S^{-1} W = W + alpha W^2 + ... + alpha^{T-2} W^{T-1}.
    MatrixXd G = MatrixXd::Zero(T, T);
    double power = 1.0;
    for (Index j = 1; j < T; ++j) {
        for (Index t = 0; t + j < T; ++t) {
            G(t, t + j) = power;
        }
        power *= alpha;
    }
    return G;
}

namespace {

double cutoff(const Eigen::JacobiSVD<MatrixXd>& svd, Index rows, Index cols) {
    const auto& s = svd.singularValues();
    if (s.size() == 0) {
        return 0.0;
    }
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() *
           s(0);
}

}  // namespace

MatrixXd pseudo_inverse(const MatrixXd& A) {
    if (A.size() == 0) {
        return MatrixXd::Zero(A.cols(), A.rows());
    }
    Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double tol = cutoff(svd, A.rows(), A.cols());
    VectorXd inv = VectorXd::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > tol && s(i) > 0.0) {
            inv(i) = 1.0 / s(i);
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Index numerical_rank(const MatrixXd& A) {
    if (A.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    const double tol = cutoff(svd, A.rows(), A.cols());
    Index r = 0;
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > tol && s(i) > 0.0) {
            ++r;
        }
    }
    return r;
}

Projectors projectors(const MatrixXd& A) {
    const Index m = A.rows();
    Projectors out;
    if (A.cols() == 0) {
        out.P = MatrixXd::Zero(m, m);
    } else {
        // P_A = U_r U_r' over the retained left singular vectors.
        Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU);
        const auto& s = svd.singularValues();
        const double tol = cutoff(svd, A.rows(), A.cols());
        Index r = 0;
        while (r < s.size() && s(r) > tol && s(r) > 0.0) {
            ++r;
        }
        const MatrixXd U = svd.matrixU().leftCols(r);
        out.P = U * U.transpose();
    }
    out.M = MatrixXd::Identity(m, m) - out.P;
    return out;
}

MatrixXd symmetric_sqrt(const MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace qpc
