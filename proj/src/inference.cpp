#include "qpc/inference.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <string>

namespace qpc {

namespace {

std::vector<MatrixXd> defactor(const Instruments& ins, const FactorStructure& fs) {
    if (ins.Z.empty()) {
        throw std::invalid_argument("instrument list is empty");
    }
    const Index rows = ins.Z.front().rows();
    const Index T = ins.Z.front().cols();
    const MatrixXd ML = fs.R() == 0 ? MatrixXd::Identity(rows, rows) : projectors(fs.loadings).M;
    const MatrixXd MF = fs.R() == 0 ? MatrixXd::Identity(T, T) : projectors(fs.F).M;
    std::vector<MatrixXd> out;
    out.reserve(ins.Z.size());
    for (const auto& Z : ins.Z) {
        out.push_back(ML * Z * MF);
    }
    return out;
}

double nT_of(Index n, Index T) {
    return static_cast<double>(n) * static_cast<double>(T);
}

bool is_diagonal(const MatrixXd& A) {
    MatrixXd off = A;
    off.diagonal().setZero();
    return off.cwiseAbs().maxCoeff() == 0.0;
}

MatrixXd psd_sqrt(const MatrixXd& A) {
    if (is_diagonal(A)) {
        MatrixXd out = MatrixXd::Zero(A.rows(), A.cols());
        out.diagonal() = A.diagonal().cwiseMax(0.0).cwiseSqrt();
        return out;
    }
    return symmetric_sqrt(A);
}

// (F (F'F)^{-1} (L'L)^{-1} L'), a T x rows matrix.
MatrixXd factor_loading_map(const FactorStructure& fs) {
    const MatrixXd FtF = fs.F.transpose() * fs.F;
    const MatrixXd LtL = fs.loadings.transpose() * fs.loadings;
    return fs.F * FtF.inverse() * LtL.inverse() * fs.loadings.transpose();
}

}  // namespace

Instruments make_instruments(std::vector<MatrixXd> Z) {
    Instruments ins;
    ins.Z = std::move(Z);
    if (ins.Z.empty()) {
        return ins;
    }
    const Index rows = ins.Z.front().rows();
    const Index T = ins.Z.front().cols();
    ins.Zstacked.resize(rows * T, ins.size());
    for (Index k = 0; k < ins.size(); ++k) {
        const MatrixXd& z = ins.Z[static_cast<std::size_t>(k)];
        if (z.rows() != rows || z.cols() != T) {
            throw std::invalid_argument("instrument matrices must share dimensions");
        }
        ins.Zstacked.col(k) = z.reshaped();
    }
    return ins;
}

Instruments build_instruments(const TransformedPanel& tp, const Coefs& theta) {
    if (theta.K() != tp.K()) {
        throw std::invalid_argument("coefficient vector does not match the number of covariates");
    }
    const MatrixXd G = lag_response_G(theta.alpha, tp.T());
    MatrixXd xb = MatrixXd::Zero(tp.rows(), tp.T());
    for (Index k = 0; k < tp.K(); ++k) {
        xb += theta.beta(k) * tp.Xtil[static_cast<std::size_t>(k)];
    }
    std::vector<MatrixXd> Z;
    Z.push_back(xb * G);
    for (const auto& X : tp.Xtil) {
        Z.push_back(X);
    }
    return make_instruments(std::move(Z));
}

MatrixXd hessian_D(const Instruments& ins, const FactorStructure& fs, Index n, Index T) {
    const auto Zd = defactor(ins, fs);
    const Index p = ins.size();
    MatrixXd D(p, p);
    for (Index a = 0; a < p; ++a) {
        for (Index b = a; b < p; ++b) {
            D(a, b) = D(b, a) = Zd[static_cast<std::size_t>(a)]
                                    .cwiseProduct(Zd[static_cast<std::size_t>(b)])
                                    .sum() /
                                nT_of(n, T);
        }
    }
    return D;
}

Sigmas oracle_sigmas(const MatrixXd& SigmaN, const MatrixXd& SigmaT, const MatrixXd& Q,
                     double upsilon3, double upsilon4) {
    Sigmas s;
    s.source = SigmaSource::Oracle;
    s.SigmaT = SigmaT;
    if (is_diagonal(SigmaN)) {
        s.SigmaNtilde = Q.transpose() * SigmaN.diagonal().asDiagonal() * Q;
    } else {
        s.SigmaNtilde = Q.transpose() * SigmaN * Q;
    }
    s.SigmaN = SigmaN;
    s.upsilon3 = upsilon3;
    s.upsilon4 = upsilon4;
    return s;
}

double homoskedastic_df(Index K, Index R, Index T, Index rows) {
    return static_cast<double>(K + 1) + static_cast<double>(R) * static_cast<double>(T + rows);
}

Sigmas estimate_sigmas(const MatrixXd& residual, SigmaSource mode, double df) {
    const double ss = residual.squaredNorm();
    if (!(ss > 0.0) || !std::isfinite(ss)) {
        throw NumericalError("residual is zero or non-finite; variance is degenerate");
    }
    const Index T = residual.cols();
    const Index rows = residual.rows();
    Sigmas s;
    s.source = mode;
    switch (mode) {
        case SigmaSource::PluginKronecker:
            s.SigmaT = static_cast<double>(T) * (residual.transpose() * residual) / ss;
            s.SigmaNtilde = residual * residual.transpose() / static_cast<double>(T);
            break;
        case SigmaSource::PluginHomoskedastic: {
            const double dof = static_cast<double>(T) * static_cast<double>(rows) - df;
            if (!(dof > 0.0)) {
                throw NumericalError("no residual degrees of freedom left for the variance");
            }
            s.SigmaT = (ss / dof) * MatrixXd::Identity(T, T);
            s.SigmaNtilde = MatrixXd::Identity(rows, rows);
            break;
        }
        case SigmaSource::Oracle:
            throw std::invalid_argument("oracle covariances cannot be estimated from a residual");
    }
    return s;
}

MatrixXd omega(const Instruments& ins, const FactorStructure& fs, const Sigmas& sig, Index n,
               Index T) {
    const auto Zd = defactor(ins, fs);
    const Index p = ins.size();
    std::vector<MatrixXd> SZ;
    SZ.reserve(Zd.size());
    for (const auto& z : Zd) {
        SZ.push_back(sig.SigmaNtilde * z * sig.SigmaT);
    }
    MatrixXd O(p, p);
    for (Index a = 0; a < p; ++a) {
        for (Index b = 0; b < p; ++b) {
            O(a, b) = Zd[static_cast<std::size_t>(a)].cwiseProduct(SZ[static_cast<std::size_t>(b)]).sum() /
                      nT_of(n, T);
        }
    }
    return 0.5 * (O + O.transpose());
}

MatrixXd fixed_T_covariance(const MatrixXd& D, const MatrixXd& Omega) {
    Eigen::JacobiSVD<MatrixXd> svd(D);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || !(s(s.size() - 1) > 0.0) || s(0) / s(s.size() - 1) > 1e12) {
        throw NumericalError(
            "D is singular: the defactored instruments are collinear, so the coefficients are "
            "not identified");
    }
    const MatrixXd Dinv = D.inverse();
    const MatrixXd V = Dinv * Omega * Dinv;
    return 0.5 * (V + V.transpose());
}

BiasTerms bias_psi(const Coefs& theta0, const FactorStructure& fs0, const Instruments& ins,
                   const Sigmas& sig, Index n, Index T, bool dynamic) {
    const Index p = ins.size();
    const double scale = 1.0 / std::sqrt(nT_of(n, T));
    BiasTerms b;
    b.psi0 = VectorXd::Zero(p);
    b.psi1 = VectorXd::Zero(p);
    b.psi2 = VectorXd::Zero(p);
    b.psi3 = VectorXd::Zero(p);

    const Index rows = sig.SigmaNtilde.rows();
    const Projectors PL = fs0.R() == 0 ? Projectors{MatrixXd::Zero(rows, rows),
                                                    MatrixXd::Identity(rows, rows)}
                                       : projectors(fs0.loadings);
    const Projectors PF =
        fs0.R() == 0 ? Projectors{MatrixXd::Zero(T, T), MatrixXd::Identity(T, T)} : projectors(fs0.F);
    const double trSn = sig.SigmaNtilde.trace();

    if (dynamic) {
        const MatrixXd G = lag_response_G(theta0.alpha, T);
        const double trGS = (G * sig.SigmaT).trace();
        b.psi0(0) = scale * (PL.M * sig.SigmaNtilde).trace() * trGS;
        b.psi1(0) = scale * trSn *
                    ((sig.SigmaT * PF.M * G * PF.P).trace() + (PF.P * sig.SigmaT * G).trace());
    }
    if (fs0.R() > 0) {
        const MatrixXd H = factor_loading_map(fs0);
        const double trST = sig.SigmaT.trace();
        for (Index k = 0; k < p; ++k) {
            const MatrixXd& Z = ins.Z[static_cast<std::size_t>(k)];
            b.psi2(k) = scale * trST * (sig.SigmaNtilde * PL.M * Z * H).trace();
            b.psi3(k) = scale * trSn * (sig.SigmaT * H * Z * PF.M).trace();
        }
    }
    return b;
}

VarianceTerms variance_terms(const Coefs& theta0, const FactorStructure& fs0,
                             const Instruments& ins, const Sigmas& sig, const MatrixXd& Q,
                             Index n, Index T, bool dynamic) {
    const Index p = ins.size();
    const double nT = nT_of(n, T);
    VarianceTerms v;
    v.D = hessian_D(ins, fs0, n, T);
    v.Upsilon1 = MatrixXd::Zero(p, p);
    v.Upsilon2 = MatrixXd::Zero(p, p);
    v.Xi = MatrixXd::Zero(p, p);
    v.PhiBar = MatrixXd::Zero(p, p);
    if (dynamic) {
        const MatrixXd G = lag_response_G(theta0.alpha, T);
        const MatrixXd& S = sig.SigmaT;
        const MatrixXd& Sn = sig.SigmaNtilde;
        v.Upsilon1(0, 0) = Sn.trace() * (G * S * G.transpose()).trace() / nT;
        v.Upsilon2(0, 0) = 0.5 * (Sn * Sn).trace() *
                           ((G * S * G * S).trace() + 2.0 * (G * S * G.transpose() * S).trace() +
                            (G.transpose() * S * G.transpose() * S).trace()) /
                           nT;

        const bool higher = sig.upsilon4 != 3.0 || sig.upsilon3 != 0.0;
        if (higher) {
            if (!sig.SigmaN) {
                throw std::invalid_argument(
                    "higher-moment variance terms need the untransformed cross-section covariance");
            }
            const MatrixXd ST_half = psd_sqrt(S);
            const MatrixXd SN_half = psd_sqrt(*sig.SigmaN);
            const VectorXd a = (ST_half * G * ST_half).diagonal();
            // diag(SN^{1/2} Q Q' SN^{1/2}) without forming the n x n projector.
            const MatrixXd SQ = SN_half * Q;
            const VectorXd b = SQ.rowwise().squaredNorm();
            v.Xi(0, 0) = (sig.upsilon4 - 3.0) * a.squaredNorm() * b.squaredNorm() / nT;

            if (sig.upsilon3 != 0.0) {
                const Index rows = Q.cols();
                const MatrixXd ML = fs0.R() == 0 ? MatrixXd::Identity(rows, rows)
                                                 : projectors(fs0.loadings).M;
                const MatrixXd MF =
                    fs0.R() == 0 ? MatrixXd::Identity(T, T) : projectors(fs0.F).M;
                MatrixXd Phi = MatrixXd::Zero(p, p);
                for (Index k = 0; k < p; ++k) {
                    const MatrixXd inner = SQ * (ML * ins.Z[static_cast<std::size_t>(k)] * MF * ST_half);
                    Phi(k, 0) = b.dot(inner * a);
                }
                v.PhiBar = sig.upsilon3 * (Phi + Phi.transpose()) / nT;
            }
        }
    }
    v.Delta = v.D + v.Upsilon1;
    return v;
}

MatrixXd theorem1_covariance(const VarianceTerms& vt, const MatrixXd& Omega) {
    Eigen::FullPivLU<MatrixXd> lu(vt.Delta);
    if (!lu.isInvertible()) {
        throw NumericalError("Delta is singular");
    }
    const MatrixXd Di = lu.inverse();
    const MatrixXd V = Di * (Omega + vt.Upsilon2 + vt.Xi + vt.PhiBar) * Di;
    return 0.5 * (V + V.transpose());
}

double nickell_sum(double alpha, Index T) {
    if (!std::isfinite(alpha) || alpha == 1.0) {
        throw std::domain_error("closed form requires alpha != 1");
    }
    if (T < 1) {
        throw std::invalid_argument("nickell_sum needs T >= 1");
    }
    const double Td = static_cast<double>(T);
    return Td / (1.0 - alpha) * (1.0 - (1.0 - std::pow(alpha, Td)) / (Td * (1.0 - alpha)));
}

double nickell_bias(double alpha, Index T, Index n, Index K) {
    if (n < 1) {
        throw std::invalid_argument("nickell_bias needs n >= 1");
    }
    const double Td = static_cast<double>(T);
    // sqrt(T/n) K / (1-a) (1 - ...) = K sum / sqrt(nT).
    return static_cast<double>(K) * nickell_sum(alpha, T) / std::sqrt(static_cast<double>(n) * Td);
}

double nickell_bias_untransformed(double alpha, Index T, Index n) {
    const double Td = static_cast<double>(T);
    return std::sqrt(static_cast<double>(n) / Td) * nickell_sum(alpha, T) / Td;
}

double normal_critical(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    }
    if (level == 0.95) {
        return 1.959964;
    }
    const boost::math::normal_distribution<double> z;
    return boost::math::quantile(z, 0.5 + 0.5 * level);
}

std::vector<Interval> confidence_intervals(const Coefs& theta, const MatrixXd& cov, Index n,
                                           Index T, double level) {
    const VectorXd th = theta.stacked();
    if (cov.rows() != th.size() || cov.cols() != th.size()) {
        throw std::invalid_argument("covariance does not match the coefficient vector");
    }
    const double z = normal_critical(level);
    std::vector<Interval> out;
    for (Index k = 0; k < th.size(); ++k) {
        if (cov(k, k) < 0.0) {
            throw NumericalError("covariance has a negative diagonal entry at coefficient " +
                                 std::to_string(k));
        }
        const double half = z * std::sqrt(cov(k, k) / nT_of(n, T));
        out.push_back({th(k) - half, th(k) + half});
    }
    return out;
}

std::vector<Interval> confidence_intervals(const EstimateResult& res, double level) {
    if (!res.covariance) {
        throw NumericalError("estimate carries no covariance matrix");
    }
    return confidence_intervals(res.theta_hat, *res.covariance, res.n, res.periods, level);
}

}  // namespace qpc
