#include <doctest.h>

#include <cmath>
#include <random>

#include "../fixtures.hpp"
#include "qpc/estimator.hpp"
#include "qpc/inference.hpp"
#include "qpc/simulate.hpp"

using namespace qpc;

namespace {

struct Setup {
    TransformedPanel tp;
    Coefs theta;
    FactorStructure fs;
    Instruments ins;
    Index n = 0;
    Index T = 0;
};

Setup make_setup(std::uint64_t seed, Index n = 60, Index T = 5, Index R = 2) {
    Setup s;
    const PanelData d = fixtures::random_panel(n, T, 2, seed);
    s.tp = transform_panel(d);
    VectorXd b(2);
    b << 0.9, -0.6;
    s.theta = Coefs(0.4, b);
    s.fs = extract_factors(s.tp, s.theta, R);
    s.ins = build_instruments(s.tp, s.theta);
    s.n = n;
    s.T = T;
    return s;
}

MatrixXd diag_from(const VectorXd& v) {
    return v.asDiagonal();
}

}  // namespace

TEST_CASE("instruments") {
    Setup s = make_setup(41);
    CHECK(s.ins.size() == 3);
    const MatrixXd xb = 0.9 * s.tp.Xtil[0] - 0.6 * s.tp.Xtil[1];
    CHECK((s.ins.Z[0] - xb * lag_response_G(0.4, 5)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.ins.Z[2] == s.tp.Xtil[1]);

    const Instruments zero = build_instruments(s.tp, Coefs(0.4, VectorXd::Zero(2)));
    CHECK(zero.Z[0].cwiseAbs().maxCoeff() == 0.0);

    const Instruments a0 = build_instruments(s.tp, Coefs(0.0, s.theta.beta));
    CHECK((a0.Z[0] - xb * lag_operator(5)).cwiseAbs().maxCoeff() < 1e-12);

    MatrixXd z1(2, 2);
    z1 << 1, 2, 3, 4;
    MatrixXd z2(2, 2);
    z2 << 5, 6, 7, 8;
    const Instruments small = make_instruments({z1, z2});
    VectorXd c1(4);
    c1 << 1, 3, 2, 4;
    VectorXd c2(4);
    c2 << 5, 7, 6, 8;
    CHECK(small.Zstacked.col(0) == c1);
    CHECK(small.Zstacked.col(1) == c2);
    CHECK(small.Zstacked.col(0) == fixtures::vec(z1));
}

TEST_CASE("D: trace form equals the Kronecker form") {
    for (std::uint64_t seed : {42u, 43u, 44u}) {
        Setup s = make_setup(seed);
        const MatrixXd D = hessian_D(s.ins, s.fs, s.n, s.T);
        const MatrixXd MF = fixtures::annihilator(s.fs.F);
        const MatrixXd ML = fixtures::annihilator(s.fs.loadings);
        const MatrixXd Z = s.ins.Zstacked;
        const MatrixXd oracle = Z.transpose() * fixtures::kron(MF, ML) * Z / double(s.n * s.T);
        CHECK((D - oracle).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((D - D.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(fixtures::eigenvalues(D).minCoeff() > -1e-10);
    }
}

TEST_CASE("D without factors is the instrument Gram matrix") {
    Setup s = make_setup(45, 60, 5, 0);
    const MatrixXd D = hessian_D(s.ins, s.fs, s.n, s.T);
    const MatrixXd gram = s.ins.Zstacked.transpose() * s.ins.Zstacked / double(s.n * s.T);
    CHECK((D - gram).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Omega") {
    Setup s = make_setup(46);
    const Index rows = s.tp.rows();
    Sigmas id;
    id.SigmaT = MatrixXd::Identity(s.T, s.T);
    id.SigmaNtilde = MatrixXd::Identity(rows, rows);
    const MatrixXd D = hessian_D(s.ins, s.fs, s.n, s.T);
    CHECK((omega(s.ins, s.fs, id, s.n, s.T) - D).cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(1);
    const MatrixXd A = fixtures::gaussian(s.T, s.T, rng);
    const MatrixXd B = fixtures::gaussian(rows, rows, rng);
    Sigmas sig;
    sig.SigmaT = A * A.transpose() / s.T;
    sig.SigmaNtilde = B * B.transpose() / rows;
    const MatrixXd O = omega(s.ins, s.fs, sig, s.n, s.T);
    const MatrixXd M = fixtures::kron(fixtures::annihilator(s.fs.F), fixtures::annihilator(s.fs.loadings));
    const MatrixXd Z = s.ins.Zstacked;
    const MatrixXd oracle =
        Z.transpose() * M * fixtures::kron(sig.SigmaT, sig.SigmaNtilde) * M * Z / double(s.n * s.T);
    CHECK((O - oracle).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fixtures::eigenvalues(O).minCoeff() > -1e-10);
}

TEST_CASE("fixed-T covariance") {
    Setup s = make_setup(47);
    const MatrixXd D = hessian_D(s.ins, s.fs, s.n, s.T);
    CHECK((fixed_T_covariance(D, D) - D.inverse()).cwiseAbs().maxCoeff() < 1e-9);
    std::mt19937_64 rng(2);
    const MatrixXd A = fixtures::gaussian(3, 3, rng);
    const MatrixXd V = fixed_T_covariance(D, A * A.transpose());
    CHECK((V - V.transpose()).cwiseAbs().maxCoeff() == 0.0);

    MatrixXd singular = D;
    singular.row(2) = singular.row(1);
    singular.col(2) = singular.col(1);
    CHECK_THROWS_AS(fixed_T_covariance(singular, D), NumericalError);
}

TEST_CASE("plug-in covariances") {
    std::mt19937_64 rng(3);
    const MatrixXd E = fixtures::gaussian(12, 6, rng);
    const Sigmas k = estimate_sigmas(E, SigmaSource::PluginKronecker);
    CHECK(k.SigmaT.trace() == doctest::Approx(6.0).epsilon(1e-13));
    CHECK(fixtures::kron(k.SigmaT, k.SigmaNtilde).trace() == doctest::Approx(E.squaredNorm()).epsilon(1e-12));

    const double df = homoskedastic_df(2, 3, 6, 12);
    CHECK(df == 3.0 + 3.0 * 18.0);
    const Sigmas h1 = estimate_sigmas(E, SigmaSource::PluginHomoskedastic, 10.0);
    const Sigmas h2 = estimate_sigmas(2.5 * E, SigmaSource::PluginHomoskedastic, 10.0);
    CHECK(h2.SigmaT(0, 0) == doctest::Approx(6.25 * h1.SigmaT(0, 0)));
    CHECK(h1.SigmaT(0, 0) == doctest::Approx(E.squaredNorm() / (72.0 - 10.0)));

    CHECK_THROWS_AS(estimate_sigmas(MatrixXd::Zero(4, 3), SigmaSource::PluginKronecker), NumericalError);
    CHECK_THROWS_AS(estimate_sigmas(E, SigmaSource::PluginHomoskedastic, 100.0), NumericalError);
}

TEST_CASE("Kronecker plug-in tracks the projected time covariance") {
    // The residual is defactored, so the estimable target is M_F Sigma_T M_F.
    DgpConfig cfg;
    cfg.n = 300;
    cfg.T = 6;
    double corr_sum = 0.0;
    const int reps = 10;
    for (int r = 0; r < reps; ++r) {
        const SimDraw s = generate(cfg, static_cast<std::uint64_t>(r));
        EstimateOptions opts;
        opts.R = 3;
        opts.multistart = 4;
        const EstimateResult res = estimate_qpc(s.data, opts);
        const Sigmas k = estimate_sigmas(res.residual, SigmaSource::PluginKronecker);
        const MatrixXd MF = fixtures::annihilator(res.factors.F);
        const VectorXd target = (MF * s.truth.SigmaT * MF).diagonal();
        const VectorXd a = k.SigmaT.diagonal().array() - k.SigmaT.diagonal().mean();
        const VectorXd b = target.array() - target.mean();
        corr_sum += a.dot(b) / (a.norm() * b.norm());
    }
    CHECK(corr_sum / reps > 0.8);
}

TEST_CASE("bias terms") {
    Setup s = make_setup(48);
    const Index rows = s.tp.rows();
    std::mt19937_64 rng(4);

    // diagonal Sigma_T: psi0 vanishes exactly
    VectorXd dt(s.T);
    for (Index t = 0; t < s.T; ++t) {
        dt(t) = fixtures::uniform(0.5, 2.5, rng);
    }
    const MatrixXd B = fixtures::gaussian(rows, rows, rng);
    Sigmas sig;
    sig.SigmaT = diag_from(dt);
    sig.SigmaNtilde = B * B.transpose() / rows;
    CHECK(bias_psi(s.theta, s.fs, s.ins, sig, s.n, s.T).psi0.cwiseAbs().maxCoeff() == 0.0);

    // upper triangular Sigma_T also gives zero
    Sigmas upper = sig;
    upper.SigmaT = fixtures::gaussian(s.T, s.T, rng).triangularView<Eigen::Upper>();
    CHECK(bias_psi(s.theta, s.fs, s.ins, upper, s.n, s.T).psi0.cwiseAbs().maxCoeff() == 0.0);

    // i.i.d. errors: psi2 = psi3 = 0
    Sigmas iid;
    iid.SigmaT = 1.7 * MatrixXd::Identity(s.T, s.T);
    iid.SigmaNtilde = 1.7 * MatrixXd::Identity(rows, rows);
    const BiasTerms b = bias_psi(s.theta, s.fs, s.ins, iid, s.n, s.T);
    CHECK(b.psi2.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(b.psi3.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(b.psi0.tail(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.psi1.tail(2).cwiseAbs().maxCoeff() == 0.0);

    // static model has no lag bias
    const BiasTerms st = bias_psi(s.theta, s.fs, s.ins, sig, s.n, s.T, false);
    CHECK(st.psi0.cwiseAbs().maxCoeff() == 0.0);
    CHECK(st.psi1.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trace(G Sigma_T) is the lower-triangle double sum") {
    std::mt19937_64 rng(5);
    for (Index T : {3, 6, 9}) {
        const double a = fixtures::uniform(-0.9, 0.9, rng);
        const MatrixXd A = fixtures::gaussian(T, T, rng);
        const MatrixXd S = A * A.transpose();
        double sum = 0.0;
        for (Index t = 1; t <= T - 1; ++t) {
            for (Index tau = 1; tau <= t; ++tau) {
                sum += std::pow(a, double(tau - 1)) * S(t, t - tau);  // 0-based (t+1, t+1-tau)
            }
        }
        CHECK((lag_response_G(a, T) * S).trace() == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("individual effects reproduce the Nickell closed form") {
    const Index n = 90;
    const Index T = 6;
    const Index K = 2;
    const Index rows = T * K;
    FactorStructure fs;
    fs.F = MatrixXd::Ones(T, 1);
    std::mt19937_64 rng(6);
    fs.loadings = fixtures::gaussian(rows, 1, rng);
    for (double a : {-0.5, 0.0, 0.3, 0.8}) {
        const Instruments ins = make_instruments(
            {fixtures::gaussian(rows, T, rng), fixtures::gaussian(rows, T, rng),
             fixtures::gaussian(rows, T, rng)});
        Sigmas sig;
        sig.SigmaT = MatrixXd::Identity(T, T);
        sig.SigmaNtilde = MatrixXd::Identity(rows, rows);
        const BiasTerms b = bias_psi(Coefs(a, VectorXd::Ones(K)), fs, ins, sig, n, T);
        CHECK(b.psi1(0) == doctest::Approx(nickell_bias(a, T, n, K)).epsilon(1e-10));
    }
}

TEST_CASE("variance terms") {
    Setup s = make_setup(49);
    const Index rows = s.tp.rows();
    std::mt19937_64 rng(7);
    VectorXd dt(s.T);
    for (Index t = 0; t < s.T; ++t) {
        dt(t) = fixtures::uniform(0.5, 2.5, rng);
    }
    VectorXd dn(s.n);
    for (Index i = 0; i < s.n; ++i) {
        dn(i) = fixtures::uniform(0.5, 2.5, rng);
    }
    const MatrixXd Q = s.tp.basis.Q;
    const Sigmas sig = oracle_sigmas(diag_from(dn), diag_from(dt), Q);
    CHECK((sig.SigmaNtilde - Q.transpose() * diag_from(dn) * Q).cwiseAbs().maxCoeff() < 1e-12);

    const VarianceTerms vt = variance_terms(s.theta, s.fs, s.ins, sig, Q, s.n, s.T);
    CHECK(vt.Xi.cwiseAbs().maxCoeff() == 0.0);
    CHECK(vt.PhiBar.cwiseAbs().maxCoeff() == 0.0);
    CHECK((vt.Delta - vt.D - vt.Upsilon1).cwiseAbs().maxCoeff() < 1e-15);
    MatrixXd off = vt.Upsilon1;
    off(0, 0) = 0.0;
    CHECK(off.cwiseAbs().maxCoeff() == 0.0);

    // diagonal Sigma_T: the exact trace form
    const MatrixXd G = lag_response_G(s.theta.alpha, s.T);
    const MatrixXd S = diag_from(dt);
    const MatrixXd& Sn = sig.SigmaNtilde;
    const double nT = double(s.n * s.T);
    const double exact = (Sn * Sn).trace() * (G * S * G.transpose() * S).trace() / nT;
    CHECK(vt.Upsilon2(0, 0) == doctest::Approx(exact).epsilon(1e-10));

    // scalar Sigma_T: the compact form 2 tr(Sn Sn) tr(G S S G') / (2 nT)
    const Sigmas scalar = oracle_sigmas(diag_from(dn), 1.3 * MatrixXd::Identity(s.T, s.T), Q);
    const VarianceTerms vs = variance_terms(s.theta, s.fs, s.ins, scalar, Q, s.n, s.T);
    const MatrixXd S2 = scalar.SigmaT;
    const double compact = 2.0 * (scalar.SigmaNtilde * scalar.SigmaNtilde).trace() *
                           (G * S2 * S2 * G.transpose()).trace() / (2.0 * nT);
    CHECK(vs.Upsilon2(0, 0) == doctest::Approx(compact).epsilon(1e-10));

    // diag(S^1/2 G S^1/2) vanishes for diagonal S, so the higher-moment
    // terms need serial correlation
    const Sigmas diag_skew = oracle_sigmas(diag_from(dn), diag_from(dt), Q, 0.8, 4.5);
    const VarianceTerms vd = variance_terms(s.theta, s.fs, s.ins, diag_skew, Q, s.n, s.T);
    CHECK(vd.Xi.cwiseAbs().maxCoeff() == 0.0);
    MatrixXd ar(s.T, s.T);
    for (Index i = 0; i < s.T; ++i) {
        for (Index j = 0; j < s.T; ++j) {
            ar(i, j) = std::pow(0.5, std::abs(double(i - j)));
        }
    }
    const Sigmas skew = oracle_sigmas(diag_from(dn), ar, Q, 0.8, 4.5);
    const VarianceTerms vk = variance_terms(s.theta, s.fs, s.ins, skew, Q, s.n, s.T);
    CHECK(vk.Xi(0, 0) > 0.0);
    CHECK(vk.PhiBar.cwiseAbs().maxCoeff() > 0.0);
    CHECK((vk.PhiBar - vk.PhiBar.transpose()).cwiseAbs().maxCoeff() < 1e-14);

    // static model: all four matrices vanish
    const VarianceTerms none = variance_terms(s.theta, s.fs, s.ins, skew, Q, s.n, s.T, false);
    CHECK(none.Upsilon1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(none.Upsilon2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(none.Xi.cwiseAbs().maxCoeff() == 0.0);
    CHECK(none.PhiBar.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Gaussian identity covariances collapse to Delta inverse") {
    Setup s = make_setup(50);
    const Index rows = s.tp.rows();
    const MatrixXd Q = s.tp.basis.Q;
    const Sigmas sig =
        oracle_sigmas(MatrixXd::Identity(s.n, s.n), MatrixXd::Identity(s.T, s.T), Q);
    CHECK((sig.SigmaNtilde - MatrixXd::Identity(rows, rows)).cwiseAbs().maxCoeff() < 1e-12);
    const VarianceTerms vt = variance_terms(s.theta, s.fs, s.ins, sig, Q, s.n, s.T);
    const MatrixXd O = omega(s.ins, s.fs, sig, s.n, s.T);
    const MatrixXd V = theorem1_covariance(vt, O);
    CHECK((V - vt.Delta.inverse()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Nickell closed form") {
    for (int i = 0; i < 50; ++i) {
        const double a = -0.98 + 1.96 * i / 49.0;
        for (Index T = 2; T <= 12; ++T) {
            double dbl = 0.0;
            for (Index t = 1; t <= T - 1; ++t) {
                for (Index tau = 1; tau <= t; ++tau) {
                    dbl += std::pow(a, double(tau - 1));
                }
            }
            CHECK(std::abs(nickell_sum(a, T) - dbl) <= 1e-12 * std::max(1.0, dbl));
        }
    }
    CHECK(nickell_sum(0.0, 7) == doctest::Approx(6.0));
    CHECK(nickell_bias(0.0, 6, 100, 2) == doctest::Approx(std::sqrt(6.0 / 100.0) * 2.0 * (1.0 - 1.0 / 6.0)));
    CHECK(nickell_bias(0.5, 6, 100, 0) == 0.0);
    const double a = 0.6;
    const double T = 8.0;
    const double untrans =
        std::sqrt(50.0 / T) / (1.0 - a) * (1.0 - (1.0 - std::pow(a, T)) / (T * (1.0 - a)));
    CHECK(nickell_bias_untransformed(a, 8, 50) == doctest::Approx(untrans).epsilon(1e-13));
    CHECK_THROWS_AS(nickell_sum(1.0, 5), std::domain_error);
}

TEST_CASE("confidence intervals") {
    CHECK(normal_critical(0.95) == 1.959964);
    CHECK(normal_critical(0.90) == doctest::Approx(1.6448536).epsilon(1e-7));
    VectorXd b(1);
    b << 2.0;
    const Coefs th(0.5, b);
    const auto zero = confidence_intervals(th, MatrixXd::Zero(2, 2), 10, 5);
    CHECK(zero[0].lo == 0.5);
    CHECK(zero[0].hi == 0.5);
    MatrixXd cov = MatrixXd::Identity(2, 2);
    cov(1, 1) = 50.0;
    const auto iv = confidence_intervals(th, cov, 10, 5);
    CHECK(iv[1].hi - iv[1].lo == doctest::Approx(2.0 * 1.959964));
    cov(0, 0) = -1.0;
    CHECK_THROWS_AS(confidence_intervals(th, cov, 10, 5), NumericalError);
}
