#pragma once

#include "qpc/panel.hpp"
#include "qpc/transform.hpp"

namespace qpc {

struct EigRReport {
    VectorXd mu_star;  // descending, T entries
    VectorXd ratios;   // mu*_r / mu*_{r+1}, r = 1..T-1
    Index R_hat = 1;
    /// All ratios equal: no factor structure to detect.
    bool degenerate = false;
};

/// Eigenvalues of (1/nT) W'W + (1/n) I_T and the argmax of their
/// consecutive ratios; ties go to the smaller r.
EigRReport eigenvalue_ratio_from_residual(const MatrixXd& W, Index n);

/// Same, with W the composite residual of the transformed model at theta_hat.
EigRReport eigenvalue_ratio(const TransformedPanel& tp, const Coefs& theta_hat, Index n);

}  // namespace qpc
