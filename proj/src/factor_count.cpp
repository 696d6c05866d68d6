#include "qpc/factor_count.hpp"

#include <cmath>

#include "qpc/objective.hpp"

namespace qpc {

EigRReport eigenvalue_ratio_from_residual(const MatrixXd& W, Index n) {
    const Index T = W.cols();
    if (T < 2) {
        throw std::invalid_argument("eigenvalue ratio needs T >= 2");
    }
    if (n < 1) {
        throw std::invalid_argument("eigenvalue ratio needs n >= 1");
    }
    const double nd = static_cast<double>(n);
    const MatrixXd gram = W.transpose() * W / (nd * static_cast<double>(T));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);

    EigRReport rep;
    rep.mu_star = es.eigenvalues().reverse().cwiseMax(0.0).array() + 1.0 / nd;
    rep.ratios.resize(T - 1);
    for (Index r = 0; r + 1 < T; ++r) {
        rep.ratios(r) = rep.mu_star(r) / rep.mu_star(r + 1);
    }
    Index best = 0;
    for (Index r = 1; r < rep.ratios.size(); ++r) {
        if (rep.ratios(r) > rep.ratios(best)) {
            best = r;
        }
    }
    rep.R_hat = best + 1;
    rep.degenerate = (rep.ratios.maxCoeff() - rep.ratios.minCoeff()) <= 1e-12 * rep.ratios.maxCoeff();
    if (rep.degenerate) {
        rep.R_hat = 1;
    }
    return rep;
}

EigRReport eigenvalue_ratio(const TransformedPanel& tp, const Coefs& theta_hat, Index n) {
    return eigenvalue_ratio_from_residual(composite_residual(tp, theta_hat), n);
}

}  // namespace qpc
