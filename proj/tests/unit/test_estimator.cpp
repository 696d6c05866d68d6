#include <doctest.h>

#include <random>

#include "../fixtures.hpp"
#include "qpc/estimator.hpp"
#include "qpc/simplex.hpp"
#include "qpc/simulate.hpp"

using namespace qpc;

TEST_CASE("simplex finds the minimum of a shifted quadratic inside a box") {
    const auto f = [](const VectorXd& x) {
        return (x(0) - 0.3) * (x(0) - 0.3) + 4.0 * (x(1) + 1.2) * (x(1) + 1.2);
    };
    Box box{VectorXd::Constant(2, -2.0), VectorXd::Constant(2, 2.0)};
    const SimplexResult r = nelder_mead(f, VectorXd::Zero(2), VectorXd::Constant(2, 0.5), box, 2000,
                                        1e-14, 1e-10);
    CHECK(r.converged);
    CHECK(r.x(0) == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(r.x(1) == doctest::Approx(-1.2).epsilon(1e-6));

    // minimum outside the box ends on the boundary
    Box tight{VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0)};
    const SimplexResult b = nelder_mead(f, VectorXd::Zero(2), VectorXd::Constant(2, 0.5), tight,
                                        2000, 1e-14, 1e-10);
    CHECK(tight.contains(b.x));
    CHECK(b.x(1) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("box reflection stays inside") {
    Box box{VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)};
    VectorXd x(1);
    x << 1.3;
    CHECK(box.reflect(x)(0) == doctest::Approx(0.7));
    x << -5.0;
    CHECK(box.contains(box.reflect(x)));
}

TEST_CASE("noiseless recovery") {
    DgpConfig cfg;
    cfg.n = 60;
    cfg.T = 6;
    cfg.noise_scale = 0.0;
    EstimateOptions opts;
    opts.R = 3;
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
        const SimDraw s = generate(cfg, rep);
        const EstimateResult r = estimate_qpc(s.data, opts);
        const VectorXd err = r.theta_hat.stacked() - s.truth.theta0.stacked();
        CHECK(err.cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(r.objective <= 1e-12);
        CHECK(r.converged);
    }
}

TEST_CASE("BN variant recovers the truth without the initial-condition factor") {
    DgpConfig cfg;
    cfg.n = 60;
    cfg.T = 6;
    cfg.noise_scale = 0.0;
    EstimateOptions opts;
    opts.R = 2;
    const SimDraw s = generate(cfg, 5);
    const EstimateResult r = estimate_bn(s.data, opts);
    CHECK(r.periods == 5);
    CHECK((r.theta_hat.stacked() - s.truth.theta0.stacked()).cwiseAbs().maxCoeff() <= 1e-6);

    PanelData two = fixtures::random_panel(30, 2, 2, 1);
    CHECK_THROWS_AS(estimate_bn(two, opts), DataError);
}

TEST_CASE("static model with no factors is pooled OLS on the transformed data") {
    std::mt19937_64 rng(31);
    PanelData d = fixtures::random_panel(50, 4, 2, 31);
    d.Y = 0.8 * d.X[0] - 0.4 * d.X[1] + 0.3 * fixtures::gaussian(50, 4, rng);
    EstimateOptions opts;
    opts.R = 0;
    const EstimateResult r = estimate_qpc(d, opts);

    const TransformedPanel tp = transform_panel(d);
    const Index N = tp.Ytil.size();
    MatrixXd Z(N, 3);
    MatrixXd lag = tp.Ytil * lag_operator(4);
    Z.col(0) = lag.reshaped();
    Z.col(1) = tp.Xtil[0].reshaped();
    Z.col(2) = tp.Xtil[1].reshaped();
    const VectorXd ols = Z.colPivHouseholderQr().solve(VectorXd(tp.Ytil.reshaped()));
    CHECK((r.theta_hat.stacked() - ols).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("result invariants") {
    DgpConfig cfg;
    cfg.n = 100;
    cfg.T = 6;
    const SimDraw s = generate(cfg, 7);
    EstimateOptions opts;
    opts.R = 3;
    const EstimateResult r = estimate_qpc(s.data, opts);
    const TransformedPanel tp = transform_panel(s.data);
    CHECK(std::abs(r.objective - profile_objective(tp, r.theta_hat, 3)) <= 1e-12 * std::max(1.0, r.objective));
    CHECK(r.theta_hat.alpha >= opts.alpha_lo);
    CHECK(r.theta_hat.alpha <= opts.alpha_hi);
    CHECK(r.objective <= profile_objective(tp, s.truth.theta0, 3) + 1e-12);
    CHECK(r.diagnostics.size() == static_cast<std::size_t>(opts.multistart));
    REQUIRE(r.covariance.has_value());
    CHECK(r.standard_errors().minCoeff() > 0.0);
    CHECK(r.residual.rows() == 12);
}

TEST_CASE("scale equivariance") {
    DgpConfig cfg;
    cfg.n = 80;
    cfg.T = 5;
    const SimDraw s = generate(cfg, 8);
    EstimateOptions opts;
    opts.R = 3;
    const EstimateResult a = estimate_qpc(s.data, opts);
    PanelData scaled = s.data;
    scaled.Y *= 3.0;
    *scaled.y0 *= 3.0;
    for (auto& X : scaled.X) {
        X *= 3.0;
    }
    const EstimateResult b = estimate_qpc(scaled, opts);
    CHECK((a.theta_hat.stacked() - b.theta_hat.stacked()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(b.objective == doctest::Approx(9.0 * a.objective).epsilon(1e-8));
}

TEST_CASE("both basis methods give the same estimate") {
    DgpConfig cfg;
    cfg.n = 80;
    cfg.T = 5;
    const SimDraw s = generate(cfg, 9);
    EstimateOptions opts;
    opts.R = 3;
    const EstimateResult a = estimate_qpc(s.data, opts);
    opts.basis = BasisMethod::QR;
    const EstimateResult b = estimate_qpc(s.data, opts);
    CHECK((a.theta_hat.stacked() - b.theta_hat.stacked()).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("option validation") {
    const PanelData d = fixtures::random_panel(30, 4, 2, 3);
    EstimateOptions opts;
    opts.R = 5;
    CHECK_THROWS_AS(estimate_qpc(d, opts), std::invalid_argument);
    opts.R = 1;
    opts.alpha_lo = 0.5;
    opts.alpha_hi = 0.2;
    CHECK_THROWS_AS(estimate_qpc(d, opts), std::invalid_argument);
    opts = EstimateOptions{};
    opts.initial = Coefs(0.1, VectorXd::Zero(3));
    CHECK_THROWS_AS(estimate_qpc(d, opts), std::invalid_argument);
}

TEST_CASE("rank-deficient covariates propagate the basis error") {
    PanelData d = fixtures::random_panel(30, 4, 2, 3);
    d.X[1] = 2.0 * d.X[0];
    EstimateOptions opts;
    CHECK_THROWS_AS(estimate_qpc(d, opts), RankDeficientError);
}

TEST_CASE("a rank-1 covariate is usable with low-rank detection") {
    DgpConfig cfg;
    cfg.n = 80;
    cfg.T = 5;
    cfg.noise_scale = 0.0;
    SimDraw s = generate(cfg, 10);
    // replace the second covariate by a time-dummy pattern and rebuild Y
    std::mt19937_64 rng(2);
    VectorXd w(5);
    w << 0, 1, 0, 1, 0;
    const VectorXd v = fixtures::gaussian(80, 1, rng).col(0);
    const MatrixXd X2 = v * w.transpose();
    const double b2 = s.truth.theta0.beta(1);
    MatrixXd Y = s.data.Y;
    // the dummy term propagates through the lag: Y S = ... + b2 X2
    const MatrixXd Sinv = shift_matrix(s.truth.theta0.alpha, 5).inverse();
    Y += b2 * (X2 - s.data.X[1]) * Sinv;
    s.data.X[1] = X2;
    s.data.Y = Y;
    EstimateOptions opts;
    opts.R = 3;
    CHECK_THROWS_AS(estimate_qpc(s.data, opts), RankDeficientError);
    opts.detect_low_rank = true;
    const EstimateResult r = estimate_qpc(s.data, opts);
    CHECK((r.theta_hat.stacked() - s.truth.theta0.stacked()).cwiseAbs().maxCoeff() < 1e-6);
}
