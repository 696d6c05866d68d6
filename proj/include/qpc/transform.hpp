#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qpc/panel.hpp"

namespace qpc {

enum class BasisMethod { SymmetricRoot, QR };

std::string to_string(BasisMethod m);

/// Which columns of the stacked design came from which covariate.
struct BasisBlock {
    Index covariate = 0;   // 0-based covariate index
    bool low_rank = false; // block is the single loading vector v of a rank-1 covariate
    Index first_column = 0;
    Index columns = 0;
};

/// Orthonormal basis Q (n x m) of the column space of the stacked design
/// (X_1, ..., X_K), with m = TK when no covariate is low rank.
struct TransformBasis {
    MatrixXd Q;
    BasisMethod method = BasisMethod::SymmetricRoot;
    std::vector<BasisBlock> column_map;

    Index dim() const { return Q.cols(); }
};

struct RankOneFactor {
    VectorXd v;  // n
    VectorXd w;  // T
};

/// Per-covariate rank-1 decompositions. An empty entry marks a full-rank
/// covariate; an empty `factors` vector means none are low rank.
struct LowRankSpec {
    std::vector<std::optional<RankOneFactor>> factors;

    static LowRankSpec none(Index K);
    /// Runs detect_low_rank on every covariate.
    static LowRankSpec detect(const PanelData& data, double tol = 1e-8);

    bool flagged(Index k) const;
};

/// Returns the leading singular pair (v = sigma_1 u_1, w = v_1) when
/// sigma_2 / sigma_1 <= tol, so that Xk ~= v w'. Throws DataError for an
/// all-zero matrix.
std::optional<RankOneFactor> detect_low_rank(const MatrixXd& Xk, double tol = 1e-8);

/// Builds Q from the stacked design with flagged covariates replaced by
/// their v vectors. Throws RankDeficientError naming the first covariate
/// whose block makes the design rank deficient.
TransformBasis build_basis(const PanelData& data, const LowRankSpec& spec,
                           BasisMethod method = BasisMethod::SymmetricRoot);

/// Same construction for an arbitrary list of n x T_b covariate blocks.
TransformBasis build_basis_from_blocks(const std::vector<MatrixXd>& blocks,
                                       const LowRankSpec& spec,
                                       BasisMethod method = BasisMethod::SymmetricRoot);

/// Q'Y and Q'X_k.
struct TransformedPanel {
    MatrixXd Ytil;
    std::vector<MatrixXd> Xtil;
    Index n = 0;
    TransformBasis basis;

    Index T() const { return Ytil.cols(); }
    Index K() const { return static_cast<Index>(Xtil.size()); }
    Index rows() const { return Ytil.rows(); }
};

TransformedPanel transform_panel(const PanelData& data, const TransformBasis& basis);

/// Convenience: detect nothing, build the default basis, transform.
TransformedPanel transform_panel(const PanelData& data,
                                 BasisMethod method = BasisMethod::SymmetricRoot);

}  // namespace qpc
