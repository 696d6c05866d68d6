#include "qpc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qpc {

namespace {

constexpr double kTieTol = 1e-10;

void check_R(Index R, Index T) {
    if (R < 0 || R > T) {
        throw std::invalid_argument("factor count R = " + std::to_string(R) +
                                    " outside [0, T] with T = " + std::to_string(T));
    }
}

double smallest_sum(const MatrixXd& gram, Index R, double nT) {
    const Index T = gram.rows();
    check_R(R, T);
    if (R == T) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    // Ascending order: the T - R smallest come first.
    const double s = es.eigenvalues().head(T - R).sum();
    return std::max(s, 0.0) / nT;
}

}  // namespace

MatrixXd composite_residual(const TransformedPanel& tp, const Coefs& theta) {
    if (theta.K() != tp.K()) {
        throw std::invalid_argument("coefficient vector has " + std::to_string(theta.K()) +
                                    " slopes but the panel has K = " + std::to_string(tp.K()));
    }
    const Index T = tp.T();
    MatrixXd W = tp.Ytil;
    // Ytil S(alpha): column t+1 loses alpha times column t.
    W.rightCols(T - 1) -= theta.alpha * tp.Ytil.leftCols(T - 1);
    for (Index k = 0; k < tp.K(); ++k) {
        W -= theta.beta(k) * tp.Xtil[static_cast<std::size_t>(k)];
    }
    return W;
}

double profile_from_residual(const MatrixXd& W, Index R, double nT) {
    return smallest_sum(W.transpose() * W, R, nT);
}

FactorStructure factors_from_residual(const MatrixXd& W, Index R) {
    const Index T = W.cols();
    check_R(R, T);
    FactorStructure fs;
    if (R == 0) {
        fs.F.resize(T, 0);
        fs.loadings.resize(W.rows(), 0);
        return fs;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(W.transpose() * W);
    const VectorXd& ev = es.eigenvalues();
    fs.F.resize(T, R);
    for (Index r = 0; r < R; ++r) {
        VectorXd v = es.eigenvectors().col(T - 1 - r);
        const double scale = v.cwiseAbs().maxCoeff();
        for (Index t = 0; t < T; ++t) {
            if (std::abs(v(t)) > 1e-12 * scale) {
                if (v(t) < 0.0) {
                    v = -v;
                }
                break;
            }
        }
        fs.F.col(r) = v;
    }
    fs.loadings = W * fs.F;
    if (R < T) {
        const double top = std::max(std::abs(ev(T - 1)), 1.0);
        fs.rotation_ambiguous = std::abs(ev(T - R) - ev(T - R - 1)) <= kTieTol * top;
    }
    return fs;
}

double profile_objective(const TransformedPanel& tp, const Coefs& theta, Index R) {
    return profile_from_residual(composite_residual(tp, theta), R,
                                 static_cast<double>(tp.n) * static_cast<double>(tp.T()));
}

double full_objective(const TransformedPanel& tp, const Coefs& theta, const FactorStructure& fs) {
    const MatrixXd W = composite_residual(tp, theta);
    const double nT = static_cast<double>(tp.n) * static_cast<double>(tp.T());
    if (fs.R() == 0) {
        return W.squaredNorm() / nT;
    }
    if (fs.F.rows() != W.cols() || fs.loadings.rows() != W.rows() ||
        fs.loadings.cols() != fs.F.cols()) {
        throw std::invalid_argument("factor structure does not conform to the transformed panel");
    }
    return (W - fs.loadings * fs.F.transpose()).squaredNorm() / nT;
}

FactorStructure extract_factors(const TransformedPanel& tp, const Coefs& theta, Index R) {
    return factors_from_residual(composite_residual(tp, theta), R);
}

MatrixXd LinearSystem::residual(const VectorXd& theta) const {
    if (theta.size() != params()) {
        throw std::invalid_argument("parameter vector has the wrong length");
    }
    MatrixXd E = target;
    for (Index j = 0; j < params(); ++j) {
        E -= theta(j) * regressors[static_cast<std::size_t>(j)];
    }
    return E;
}

LinearSystem qpc_system(const TransformedPanel& tp) {
    LinearSystem sys;
    sys.n = tp.n;
    sys.target = tp.Ytil;
    MatrixXd lag = MatrixXd::Zero(tp.rows(), tp.T());
    lag.rightCols(tp.T() - 1) = tp.Ytil.leftCols(tp.T() - 1);
    sys.regressors.push_back(std::move(lag));
    for (const auto& X : tp.Xtil) {
        sys.regressors.push_back(X);
    }
    return sys;
}

ProfileEvaluator::ProfileEvaluator(const LinearSystem& sys, Index R)
    : R_(R), p_(sys.params()), T_(sys.periods()), nT_(sys.nT()) {
    check_R(R, T_);
    AA_ = sys.target.transpose() * sys.target;
    AB_.reserve(static_cast<std::size_t>(p_));
    BB_.resize(static_cast<std::size_t>(p_ * p_));
    for (Index i = 0; i < p_; ++i) {
        const MatrixXd& Bi = sys.regressors[static_cast<std::size_t>(i)];
        AB_.push_back(sys.target.transpose() * Bi);
        for (Index j = i; j < p_; ++j) {
            MatrixXd c = Bi.transpose() * sys.regressors[static_cast<std::size_t>(j)];
            BB_[static_cast<std::size_t>(j * p_ + i)] = c.transpose();
            BB_[static_cast<std::size_t>(i * p_ + j)] = std::move(c);
        }
    }
}

MatrixXd ProfileEvaluator::gram(const VectorXd& theta) const {
    MatrixXd g = AA_;
    for (Index i = 0; i < p_; ++i) {
        const auto& ab = AB_[static_cast<std::size_t>(i)];
        g -= theta(i) * (ab + ab.transpose());
        for (Index j = 0; j < p_; ++j) {
            g += (theta(i) * theta(j)) * BB_[static_cast<std::size_t>(i * p_ + j)];
        }
    }
    return 0.5 * (g + g.transpose());
}

double ProfileEvaluator::operator()(const VectorXd& theta) const {
    return smallest_sum(gram(theta), R_, nT_);
}

VectorXd ProfileEvaluator::als_step(const VectorXd& theta) const {
    MatrixXd M = MatrixXd::Identity(T_, T_);
    if (R_ > 0) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram(theta));
        const MatrixXd F = es.eigenvectors().rightCols(R_);
        M -= F * F.transpose();
    }
    // <B_i M, B_j M> = tr(B_i'B_j M), <B_i M, A M> = tr(B_i'A M).
    MatrixXd C(p_, p_);
    VectorXd r(p_);
    for (Index i = 0; i < p_; ++i) {
        r(i) = AB_[static_cast<std::size_t>(i)].cwiseProduct(M).sum();
        for (Index j = 0; j < p_; ++j) {
            C(i, j) = BB_[static_cast<std::size_t>(i * p_ + j)].transpose().cwiseProduct(M).sum();
        }
    }
    return C.ldlt().solve(r);
}

VectorXd ProfileEvaluator::least_squares() const {
    MatrixXd C(p_, p_);
    VectorXd r(p_);
    for (Index i = 0; i < p_; ++i) {
        r(i) = AB_[static_cast<std::size_t>(i)].trace();
        for (Index j = 0; j < p_; ++j) {
            C(i, j) = BB_[static_cast<std::size_t>(i * p_ + j)].trace();
        }
    }
    return C.ldlt().solve(r);
}

}  // namespace qpc
