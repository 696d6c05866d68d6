#include "qpc/transform.hpp"

#include <cmath>
#include <string>

namespace qpc {

namespace {

constexpr double kEigenFloor = 1e-12;

struct Design {
    MatrixXd D;
    std::vector<BasisBlock> blocks;
};

Design stack_design(const std::vector<MatrixXd>& covariates, const LowRankSpec& spec) {
    const Index n = covariates.front().rows();
    Index cols = 0;
    for (std::size_t k = 0; k < covariates.size(); ++k) {
        cols += spec.flagged(static_cast<Index>(k)) ? 1 : covariates[k].cols();
    }
    Design d;
    d.D.resize(n, cols);
    Index c = 0;
    for (std::size_t k = 0; k < covariates.size(); ++k) {
        BasisBlock b;
        b.covariate = static_cast<Index>(k);
        b.first_column = c;
        if (spec.flagged(b.covariate)) {
            b.low_rank = true;
            b.columns = 1;
            d.D.col(c) = spec.factors[k]->v;
        } else {
            b.columns = covariates[k].cols();
            d.D.middleCols(c, b.columns) = covariates[k];
        }
        c += b.columns;
        d.blocks.push_back(b);
    }
    return d;
}

bool gram_singular(const MatrixXd& gram) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double top = ev(ev.size() - 1);
    return !(top > 0.0) || ev(0) <= kEigenFloor * top;
}

[[noreturn]] void throw_rank_error(const Design& d) {
    // Locate the first block whose inclusion makes the design singular.
    for (const auto& b : d.blocks) {
        const Index upto = b.first_column + b.columns;
        const MatrixXd sub = d.D.leftCols(upto);
        if (gram_singular(sub.transpose() * sub)) {
            throw RankDeficientError(
                "stacked covariate design is rank deficient at covariate x" +
                    std::to_string(b.covariate + 1) +
                    (b.low_rank ? " (low-rank loading vector)" : "") +
                    "; the transformation needs full column rank",
                static_cast<long>(b.covariate));
        }
    }
    throw RankDeficientError("stacked covariate design is rank deficient", -1);
}

}  // namespace

std::string to_string(BasisMethod m) {
    return m == BasisMethod::QR ? "qr" : "symmetric-root";
}

LowRankSpec LowRankSpec::none(Index K) {
    LowRankSpec s;
    s.factors.resize(static_cast<std::size_t>(K));
    return s;
}

LowRankSpec LowRankSpec::detect(const PanelData& data, double tol) {
    LowRankSpec s;
    for (const auto& Xk : data.X) {
        s.factors.push_back(detect_low_rank(Xk, tol));
    }
    return s;
}

bool LowRankSpec::flagged(Index k) const {
    return k < static_cast<Index>(factors.size()) && factors[static_cast<std::size_t>(k)].has_value();
}

std::optional<RankOneFactor> detect_low_rank(const MatrixXd& Xk, double tol) {
    if (Xk.size() == 0 || Xk.cwiseAbs().maxCoeff() == 0.0) {
        throw DataError("covariate is identically zero (degenerate covariate)");
    }
    Eigen::JacobiSVD<MatrixXd> svd(Xk, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s.size() > 1 && s(1) / s(0) > tol) {
        return std::nullopt;
    }
    RankOneFactor f;
    f.w = svd.matrixV().col(0);
    f.v = s(0) * svd.matrixU().col(0);
    // First nonzero entry of w positive.
    for (Index t = 0; t < f.w.size(); ++t) {
        if (f.w(t) != 0.0) {
            if (f.w(t) < 0.0) {
                f.w = -f.w;
                f.v = -f.v;
            }
            break;
        }
    }
    return f;
}

TransformBasis build_basis_from_blocks(const std::vector<MatrixXd>& blocks,
                                       const LowRankSpec& spec, BasisMethod method) {
    if (blocks.empty()) {
        throw DataError("basis construction needs at least one covariate");
    }
    const Design d = stack_design(blocks, spec);
    if (d.D.cols() > d.D.rows()) {
        throw RankDeficientError("stacked design has more columns (" +
                                     std::to_string(d.D.cols()) + ") than rows (" +
                                     std::to_string(d.D.rows()) + ")",
                                 -1);
    }
    const MatrixXd gram = d.D.transpose() * d.D;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
    const VectorXd& ev = es.eigenvalues();
    const double top = ev(ev.size() - 1);
    if (!(top > 0.0) || ev(0) <= kEigenFloor * top) {
        throw_rank_error(d);
    }

    TransformBasis basis;
    basis.method = method;
    basis.column_map = d.blocks;
    if (method == BasisMethod::SymmetricRoot) {
        const VectorXd inv_root = ev.cwiseSqrt().cwiseInverse();
        basis.Q = d.D * (es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose());
    } else {
        Eigen::HouseholderQR<MatrixXd> qr(d.D);
        basis.Q = qr.householderQ() * MatrixXd::Identity(d.D.rows(), d.D.cols());
    }
    return basis;
}

TransformBasis build_basis(const PanelData& data, const LowRankSpec& spec, BasisMethod method) {
    data.validate();
    return build_basis_from_blocks(data.X, spec, method);
}

TransformedPanel transform_panel(const PanelData& data, const TransformBasis& basis) {
    if (basis.Q.rows() != data.n()) {
        throw DataError("basis has " + std::to_string(basis.Q.rows()) +
                        " rows but the panel has n = " + std::to_string(data.n()));
    }
    TransformedPanel tp;
    tp.n = data.n();
    tp.basis = basis;
    tp.Ytil = basis.Q.transpose() * data.Y;
    tp.Xtil.reserve(data.X.size());
    for (const auto& Xk : data.X) {
        if (Xk.rows() != data.n() || Xk.cols() != data.T()) {
            throw DataError("covariate dimensions do not match the outcome matrix");
        }
        tp.Xtil.push_back(basis.Q.transpose() * Xk);
    }
    return tp;
}

TransformedPanel transform_panel(const PanelData& data, BasisMethod method) {
    return transform_panel(data, build_basis(data, LowRankSpec::none(data.K()), method));
}

}  // namespace qpc
