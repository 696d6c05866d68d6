#include "qpc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qpc/inference.hpp"
#include "qpc/simplex.hpp"

namespace qpc {

namespace {

constexpr double kThetaAgree = 1e-6;
constexpr double kObjAgree = 1e-10;
constexpr int kPolishSteps = 500;

void check_options(const EstimateOptions& o, Index periods) {
    if (!(o.alpha_lo < o.alpha_hi) || o.alpha_lo <= -1.0 || o.alpha_hi >= 1.0) {
        throw std::invalid_argument("alpha bounds must form a nonempty interval inside (-1, 1)");
    }
    if (!(o.beta_box > 0.0)) {
        throw std::invalid_argument("beta_box must be positive");
    }
    if (o.multistart < 1 || o.max_iter < 1) {
        throw std::invalid_argument("multistart and max_iter must be at least 1");
    }
    if (o.R < 0 || o.R > periods) {
        throw std::invalid_argument("factor count R = " + std::to_string(o.R) +
                                    " outside [0, " + std::to_string(periods) + "]");
    }
}

// Additive recurrence in p dimensions built on the generalised golden ratio.
std::vector<VectorXd> lattice_offsets(Index p, int count) {
    double phi = 2.0;
    for (int i = 0; i < 64; ++i) {
        phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(p + 1));
    }
    VectorXd g(p);
    for (Index j = 0; j < p; ++j) {
        g(j) = std::pow(1.0 / phi, static_cast<double>(j + 1));
    }
    std::vector<VectorXd> out;
    for (int s = 1; s <= count; ++s) {
        VectorXd u(p);
        for (Index j = 0; j < p; ++j) {
            const double v = 0.5 + static_cast<double>(s) * g(j);
            u(j) = 2.0 * (v - std::floor(v)) - 1.0;
        }
        out.push_back(u);
    }
    return out;
}

StartTrace run_start(const ProfileEvaluator& ev, const VectorXd& x0, const Box& box,
                     const EstimateOptions& opts) {
    const Index p = x0.size();
    VectorXd step(p);
    step(0) = 0.1;
    for (Index j = 1; j < p; ++j) {
        step(j) = 0.1 * std::max(1.0, std::abs(x0(j)));
    }
    auto f = [&ev](const VectorXd& th) { return ev(th); };
    const SimplexResult sr = nelder_mead(f, x0, step, box, opts.max_iter, opts.tol, 1e-10);

    StartTrace tr;
    tr.start = x0;
    tr.iterations = sr.iterations;
    tr.simplex_converged = sr.converged;
    VectorXd theta = sr.x;
    double fval = sr.f;

    // Alternating least squares from the simplex solution; each step
    // minimises the full objective in one block, so it never goes uphill.
    const double slack = 1e-13 * std::max(ev.scale(), 1e-300);
    for (int i = 0; i < kPolishSteps; ++i) {
        const VectorXd cand = ev.als_step(theta);
        if (!cand.allFinite() || !box.contains(cand)) {
            break;
        }
        const double fc = ev(cand);
        if (fc > fval + slack) {
            break;
        }
        const double move = (cand - theta).cwiseAbs().maxCoeff();
        theta = cand;
        fval = std::min(fc, fval);
        tr.polish_steps = i + 1;
        if (move <= 1e-13 * std::max(1.0, theta.cwiseAbs().maxCoeff())) {
            break;
        }
    }
    tr.theta = theta;
    tr.objective = ev(theta);
    return tr;
}

}  // namespace

VectorXd EstimateResult::standard_errors() const {
    if (!covariance) {
        throw NumericalError("estimate carries no covariance matrix");
    }
    const double nT = static_cast<double>(n) * static_cast<double>(periods);
    return (covariance->diagonal().cwiseMax(0.0) / nT).cwiseSqrt();
}

SystemFit minimize_profile(const LinearSystem& sys, const EstimateOptions& opts) {
    check_options(opts, sys.periods());
    const Index p = sys.params();
    const ProfileEvaluator ev(sys, opts.R);

    VectorXd center;
    if (opts.initial) {
        center = opts.initial->stacked();
        if (center.size() != p) {
            throw std::invalid_argument("initial value has the wrong number of coefficients");
        }
    } else {
        center = ev.least_squares();
    }
    if (!center.allFinite()) {
        throw NumericalError("starting value is not finite; the regressors are collinear");
    }

    Box box;
    box.lo.resize(p);
    box.hi.resize(p);
    box.lo(0) = opts.alpha_lo;
    box.hi(0) = opts.alpha_hi;
    for (Index j = 1; j < p; ++j) {
        box.lo(j) = center(j) - opts.beta_box;
        box.hi(j) = center(j) + opts.beta_box;
    }
    VectorXd x0 = center;
    x0(0) = std::clamp(x0(0), opts.alpha_lo, opts.alpha_hi);

    VectorXd scale(p);
    scale(0) = 0.5;
    for (Index j = 1; j < p; ++j) {
        scale(j) = std::max(1.0, std::abs(center(j)));
    }

    SystemFit fit;
    fit.diagnostics.push_back(run_start(ev, x0, box, opts));
    for (const auto& u : lattice_offsets(p, opts.multistart - 1)) {
        VectorXd s = x0 + u.cwiseProduct(scale);
        for (Index j = 0; j < p; ++j) {
            s(j) = std::clamp(s(j), box.lo(j), box.hi(j));
        }
        fit.diagnostics.push_back(run_start(ev, s, box, opts));
    }

    std::vector<std::size_t> order(fit.diagnostics.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return fit.diagnostics[a].objective < fit.diagnostics[b].objective;
    });
    const StartTrace& best = fit.diagnostics[order.front()];
    fit.theta = best.theta;
    fit.objective = best.objective;

    const double otol = kObjAgree * std::max(1.0, std::abs(best.objective));
    auto agrees = [&](const StartTrace& t) {
        return (t.theta - best.theta).cwiseAbs().maxCoeff() <= kThetaAgree &&
               std::abs(t.objective - best.objective) <= otol;
    };
    fit.starts_agreeing = static_cast<int>(
        std::count_if(fit.diagnostics.begin(), fit.diagnostics.end(), agrees));
    if (order.size() == 1) {
        fit.converged = best.simplex_converged || best.polish_steps > 0;
    } else {
        fit.converged = agrees(fit.diagnostics[order[1]]);
    }
    return fit;
}

EstimateResult result_from_fit(std::string name, const LinearSystem& sys, const SystemFit& fit,
                               Index R, const std::vector<MatrixXd>& instruments,
                               CovarianceMode mode) {
    EstimateResult res;
    res.estimator = std::move(name);
    res.theta_hat = Coefs::from_stacked(fit.theta);
    res.converged = fit.converged;
    res.starts_agreeing = fit.starts_agreeing;
    res.diagnostics = fit.diagnostics;
    res.n = sys.n;
    res.periods = sys.periods();
    res.R = R;

    const MatrixXd E = sys.residual(fit.theta);
    res.factors = factors_from_residual(E, R);
    res.objective = profile_from_residual(E, R, sys.nT());
    res.residual = E - res.factors.common_component();

    if (mode == CovarianceMode::None) {
        return res;
    }
    try {
        const Instruments ins = make_instruments(instruments);
        const MatrixXd D = hessian_D(ins, res.factors, sys.n, sys.periods());
        Sigmas sig;
        if (mode == CovarianceMode::PluginKronecker) {
            sig = estimate_sigmas(res.residual, SigmaSource::PluginKronecker);
        } else {
            const double df =
                homoskedastic_df(sys.params() - 1, R, sys.periods(), sys.target.rows());
            sig = estimate_sigmas(res.residual, SigmaSource::PluginHomoskedastic, df);
        }
        res.covariance =
            fixed_T_covariance(D, omega(ins, res.factors, sig, sys.n, sys.periods()));
    } catch (const NumericalError& e) {
        res.covariance_note = e.what();
    }
    return res;
}

EstimateResult estimate_qpc(const TransformedPanel& tp, const EstimateOptions& opts) {
    const LinearSystem sys = qpc_system(tp);
    const SystemFit fit = minimize_profile(sys, opts);
    const Instruments ins = build_instruments(tp, Coefs::from_stacked(fit.theta));
    return result_from_fit("qpc", sys, fit, opts.R, ins.Z, opts.covariance);
}

EstimateResult estimate_qpc(const PanelData& data, const EstimateOptions& opts) {
    data.validate();
    const LowRankSpec spec = opts.detect_low_rank ? LowRankSpec::detect(data, opts.low_rank_tol)
                                                  : LowRankSpec::none(data.K());
    const TransformBasis basis = build_basis(data, spec, opts.basis);
    return estimate_qpc(transform_panel(data, basis), opts);
}

EstimateResult estimate_bn(const PanelData& data, const EstimateOptions& opts) {
    data.validate();
    const Index T = data.T();
    if (T < 3) {
        throw DataError("the lag-projection estimator needs T >= 3");
    }
    const Index Tc = T - 1;
    std::vector<MatrixXd> blocks;
    blocks.reserve(data.X.size());
    for (const auto& X : data.X) {
        blocks.push_back(X.rightCols(Tc));
    }
    LowRankSpec spec = LowRankSpec::none(data.K());
    if (opts.detect_low_rank) {
        for (const auto& b : blocks) {
            spec.factors.push_back(detect_low_rank(b, opts.low_rank_tol));
        }
        spec.factors.erase(spec.factors.begin(), spec.factors.begin() + data.K());
    }
    const TransformBasis basis = build_basis_from_blocks(blocks, spec, opts.basis);
    const MatrixXd Qt = basis.Q.transpose();

    LinearSystem sys;
    sys.n = data.n();
    sys.target = Qt * data.Y.rightCols(Tc);
    sys.regressors.push_back(Qt * data.Y.leftCols(Tc));
    for (const auto& b : blocks) {
        sys.regressors.push_back(Qt * b);
    }
    const SystemFit fit = minimize_profile(sys, opts);
    return result_from_fit("bn", sys, fit, opts.R, sys.regressors, opts.covariance);
}

}  // namespace qpc
