#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "qpc/panel.hpp"

namespace fixtures {

using qpc::Index;
using qpc::MatrixXd;
using qpc::VectorXd;

inline MatrixXd gaussian(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    MatrixXd out(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            out(i, j) = z(rng);
        }
    }
    return out;
}

inline double uniform(double lo, double hi, std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random panel with K Gaussian covariates, outcomes and an initial value.
inline qpc::PanelData random_panel(Index n, Index T, Index K, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    qpc::PanelData d;
    for (Index k = 0; k < K; ++k) {
        d.X.push_back(gaussian(n, T, rng));
    }
    d.Y = gaussian(n, T, rng);
    d.y0 = gaussian(n, 1, rng).col(0);
    return d;
}

// Dynamic panel without factors or noise:
// y_t = alpha y_{t-1} + sum_k beta_k x_kt, seeded by y0.
inline qpc::PanelData noiseless_dynamic(Index n, Index T, double alpha, const VectorXd& beta,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    qpc::PanelData d;
    for (Index k = 0; k < beta.size(); ++k) {
        d.X.push_back(gaussian(n, T, rng));
    }
    d.y0 = gaussian(n, 1, rng).col(0);
    d.Y.resize(n, T);
    VectorXd prev = *d.y0;
    for (Index t = 0; t < T; ++t) {
        VectorXd y = alpha * prev;
        for (Index k = 0; k < beta.size(); ++k) {
            y += beta(k) * d.X[static_cast<std::size_t>(k)].col(t);
        }
        d.Y.col(t) = y;
        prev = y;
    }
    return d;
}

inline MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
    MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i) {
        for (Index j = 0; j < A.cols(); ++j) {
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        }
    }
    return out;
}

// Column-major vec by explicit loops.
inline VectorXd vec(const MatrixXd& A) {
    VectorXd v(A.size());
    Index p = 0;
    for (Index j = 0; j < A.cols(); ++j) {
        for (Index i = 0; i < A.rows(); ++i) {
            v(p++) = A(i, j);
        }
    }
    return v;
}

// I - A (A'A)^{-1} A' for full column rank A, via a normal-equation solve.
inline MatrixXd annihilator(const MatrixXd& A) {
    const MatrixXd AtA = A.transpose() * A;
    return MatrixXd::Identity(A.rows(), A.rows()) - A * AtA.ldlt().solve(A.transpose());
}

// Sorted ascending eigenvalues from a self-adjoint solver.
inline VectorXd eigenvalues(const MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

}  // namespace fixtures
