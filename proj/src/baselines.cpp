#include "qpc/baselines.hpp"

#include <cmath>
#include <string>

#include "qpc/inference.hpp"

namespace qpc {

namespace {

constexpr double kPcTol = 1e-9;
constexpr int kPcMaxIter = 500;

}  // namespace

LinearSystem untransformed_system(const PanelData& data) {
    data.validate();
    const Index n = data.n();
    const Index T = data.T();
    LinearSystem sys;
    sys.n = n;
    if (data.y0) {
        sys.target = data.Y;
        MatrixXd lag(n, T);
        lag.col(0) = *data.y0;
        lag.rightCols(T - 1) = data.Y.leftCols(T - 1);
        sys.regressors.push_back(std::move(lag));
        for (const auto& X : data.X) {
            sys.regressors.push_back(X);
        }
    } else {
        sys.target = data.Y.rightCols(T - 1);
        sys.regressors.push_back(data.Y.leftCols(T - 1));
        for (const auto& X : data.X) {
            sys.regressors.push_back(X.rightCols(T - 1));
        }
    }
    return sys;
}

EstimateResult estimate_ls(const PanelData& data) {
    const LinearSystem sys = untransformed_system(data);
    const Index p = sys.params();
    const Index N = sys.target.size();
    MatrixXd Xm(N, p);
    for (Index j = 0; j < p; ++j) {
        Xm.col(j) = sys.regressors[static_cast<std::size_t>(j)].reshaped();
    }
    const VectorXd y = sys.target.reshaped();
    const MatrixXd XtX = Xm.transpose() * Xm;
    Eigen::LDLT<MatrixXd> ldlt(XtX);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff()) {
        throw NumericalError("pooled regressor Gram matrix is singular");
    }
    const VectorXd theta = ldlt.solve(Xm.transpose() * y);
    const VectorXd e = y - Xm * theta;

    SystemFit fit;
    fit.theta = theta;
    fit.converged = true;
    fit.starts_agreeing = 1;
    EstimateResult res = result_from_fit("ls", sys, fit, 0, {}, CovarianceMode::None);

    const MatrixXd bread = ldlt.solve(MatrixXd::Identity(p, p));
    const MatrixXd meat = Xm.transpose() * e.cwiseAbs2().asDiagonal() * Xm;
    const MatrixXd hc0 = bread * meat * bread;
    res.covariance = sys.nT() * 0.5 * (hc0 + hc0.transpose());
    return res;
}

EstimateResult estimate_pc_bai(const PanelData& data, const EstimateOptions& opts) {
    const LinearSystem sys = untransformed_system(data);
    if (opts.R < 0 || opts.R > std::min(sys.n, sys.periods())) {
        throw std::invalid_argument("factor count R = " + std::to_string(opts.R) +
                                    " outside [0, min(n, T)]");
    }
    const ProfileEvaluator ev(sys, opts.R);
    VectorXd theta = opts.initial ? opts.initial->stacked() : ev.least_squares();
    if (!theta.allFinite()) {
        throw NumericalError("pooled least squares start is not finite");
    }
    const VectorXd start = theta;
    double obj = ev(theta);
    std::vector<double> path{obj};
    bool converged = false;
    int it = 0;
    for (; it < kPcMaxIter; ++it) {
        const VectorXd next = ev.als_step(theta);
        if (!next.allFinite()) {
            break;
        }
        const double on = ev(next);
        theta = next;
        path.push_back(on);
        const double change = std::abs(obj - on);
        obj = on;
        if (change <= kPcTol * std::max(std::abs(obj), 1e-300)) {
            converged = true;
            break;
        }
    }

    SystemFit fit;
    fit.theta = theta;
    fit.objective = obj;
    fit.converged = converged;
    fit.starts_agreeing = 1;
    StartTrace tr;
    tr.start = start;
    tr.theta = theta;
    tr.objective = obj;
    tr.iterations = it;
    fit.diagnostics.push_back(tr);

    const CovarianceMode mode = opts.covariance == CovarianceMode::None
                                    ? CovarianceMode::None
                                    : CovarianceMode::PluginHomoskedastic;
    EstimateResult res = result_from_fit("pc", sys, fit, opts.R, sys.regressors, mode);
    res.objective_path = std::move(path);
    return res;
}

}  // namespace qpc
