#include "qpc/simulate.hpp"

#include <cmath>
#include <string>

namespace qpc {

namespace {

enum Stream : std::uint64_t {
    kLoadings = 1,
    kFactors = 2,
    kCovariates = 3,
    kErrors = 4,
    kVariances = 5,
    kBurnIn = 6,
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

MatrixXd normal_matrix(std::mt19937_64& eng, Index rows, Index cols) {
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = z(eng);
        }
    }
    return m;
}

VectorXd uniform_vector(std::mt19937_64& eng, Index size, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    VectorXd v(size);
    for (Index i = 0; i < size; ++i) {
        v(i) = u(eng);
    }
    return v;
}

}  // namespace

void DgpConfig::validate() const {
    if (n < 1 || T < 2) {
        throw std::invalid_argument("DGP needs n >= 1 and T >= 2");
    }
    if (R_star < 0) {
        throw std::invalid_argument("R_star must be nonnegative");
    }
    if (!(std::abs(alpha0) < 1.0)) {
        throw std::invalid_argument("DGP needs |alpha0| < 1");
    }
    if (beta0.size() < 1) {
        throw std::invalid_argument("DGP needs at least one covariate");
    }
    if (!(het_lo > 0.0) || het_hi < het_lo) {
        throw std::invalid_argument("heteroskedasticity range must satisfy 0 < lo <= hi");
    }
    if (noise_scale < 0.0) {
        throw std::invalid_argument("noise_scale must be nonnegative");
    }
    if (error_mode == ErrorMode::Custom) {
        if (!custom_sigma_n || !custom_sigma_t || custom_sigma_n->rows() != n ||
            custom_sigma_n->cols() != n || custom_sigma_t->rows() != T ||
            custom_sigma_t->cols() != T) {
            throw std::invalid_argument("custom error mode needs n x n and T x T covariances");
        }
    }
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(seed) + replication) + stream);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t replication, std::uint64_t stream) {
    return std::mt19937_64(stream_key(seed, replication, stream));
}

SimDraw generate(const DgpConfig& cfg, std::uint64_t replication) {
    cfg.validate();
    const Index n = cfg.n;
    const Index T = cfg.T;
    const Index R = cfg.R_star;
    const Index K = cfg.beta0.size();
    const double a = cfg.alpha0;
    const double s2 = cfg.noise_scale * cfg.noise_scale;

    auto eng_l = make_engine(cfg.seed, replication, kLoadings);
    auto eng_f = make_engine(cfg.seed, replication, kFactors);
    auto eng_x = make_engine(cfg.seed, replication, kCovariates);
    auto eng_e = make_engine(cfg.seed, replication, kErrors);
    auto eng_v = make_engine(cfg.seed, replication, kVariances);
    auto eng_b = make_engine(cfg.seed, replication, kBurnIn);

    SimDraw out;
    SimTruth& tr = out.truth;
    tr.theta0 = Coefs(a, cfg.beta0);
    tr.Lambda = normal_matrix(eng_l, n, R);
    tr.F = normal_matrix(eng_f, T, R);

    // Error scales: sd_n (n) and sd_t (T) for the diagonal modes.
    VectorXd var_n;
    VectorXd var_t;
    VectorXd var_burn;
    switch (cfg.error_mode) {
        case ErrorMode::HeteroskedasticDiagonal:
            var_n = uniform_vector(eng_v, n, cfg.het_lo, cfg.het_hi);
            var_t = uniform_vector(eng_v, T, cfg.het_lo, cfg.het_hi);
            var_burn = uniform_vector(eng_v, cfg.burn_in, cfg.het_lo, cfg.het_hi);
            break;
        case ErrorMode::Iid:
            var_n = VectorXd::Ones(n);
            var_t = VectorXd::Ones(T);
            var_burn = VectorXd::Ones(cfg.burn_in);
            break;
        case ErrorMode::Custom:
            var_burn = VectorXd::Constant(cfg.burn_in, cfg.custom_sigma_t->diagonal().mean());
            break;
    }

    MatrixXd U = normal_matrix(eng_e, n, T);
    if (cfg.error_mode == ErrorMode::Custom) {
        tr.SigmaN = s2 * *cfg.custom_sigma_n;
        tr.SigmaT = *cfg.custom_sigma_t;
        tr.epsilon = cfg.noise_scale * symmetric_sqrt(*cfg.custom_sigma_n) * U *
                     symmetric_sqrt(*cfg.custom_sigma_t);
        var_n = cfg.custom_sigma_n->diagonal();
    } else {
        tr.SigmaN = MatrixXd::Zero(n, n);
        tr.SigmaN.diagonal() = s2 * var_n;
        tr.SigmaT = var_t.asDiagonal();
        tr.epsilon = cfg.noise_scale * (var_n.cwiseSqrt().asDiagonal() * U *
                                        var_t.cwiseSqrt().asDiagonal());
    }

    PanelData& d = out.data;
    d.X.resize(static_cast<std::size_t>(K));
    d.X[0] = normal_matrix(eng_x, n, T);
    if (R > 0) {
        d.X[0] += tr.Lambda * tr.F.transpose();
    }
    for (Index k = 1; k < K; ++k) {
        d.X[static_cast<std::size_t>(k)] = normal_matrix(eng_x, n, T);
    }

    // Burn-in path from zero with the same loadings and fresh everything else.
    VectorXd y = VectorXd::Zero(n);
    const VectorXd sd_n = var_n.cwiseSqrt();
    for (Index b = 0; b < cfg.burn_in; ++b) {
        VectorXd next = a * y;
        const VectorXd f = normal_matrix(eng_b, R, 1);
        const VectorXd eta = normal_matrix(eng_b, n, 1);
        VectorXd x1 = eta;
        if (R > 0) {
            x1 += tr.Lambda * f;
            next += tr.Lambda * f;
        }
        next += cfg.beta0(0) * x1;
        for (Index k = 1; k < K; ++k) {
            next += cfg.beta0(k) * normal_matrix(eng_b, n, 1);
        }
        const VectorXd u = normal_matrix(eng_b, n, 1);
        next += cfg.noise_scale * std::sqrt(var_burn(b)) * sd_n.cwiseProduct(u);
        y = next;
    }
    tr.y0 = y;
    d.y0 = y;

    d.Y.resize(n, T);
    VectorXd prev = y;
    for (Index t = 0; t < T; ++t) {
        VectorXd yt = a * prev + tr.epsilon.col(t);
        for (Index k = 0; k < K; ++k) {
            yt += cfg.beta0(k) * d.X[static_cast<std::size_t>(k)].col(t);
        }
        if (R > 0) {
            yt += tr.Lambda * tr.F.row(t).transpose();
        }
        d.Y.col(t) = yt;
        prev = yt;
    }
    return out;
}

FactorStructure oracle_factors(const SimTruth& truth, const TransformBasis& basis) {
    const Index T = truth.F.rows();
    const Index R = truth.F.cols();
    FactorStructure fs;
    fs.F = MatrixXd::Zero(T, R + 1);
    fs.F(0, 0) = 1.0;
    fs.F.rightCols(R) = truth.F;
    MatrixXd L(truth.Lambda.rows(), R + 1);
    L.col(0) = truth.theta0.alpha * truth.y0;
    L.rightCols(R) = truth.Lambda;
    fs.loadings = basis.Q.transpose() * L;
    return fs;
}

}  // namespace qpc
