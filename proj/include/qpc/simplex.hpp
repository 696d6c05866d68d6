#pragma once

#include <functional>

#include "qpc/panel.hpp"

namespace qpc {

struct Box {
    VectorXd lo;
    VectorXd hi;

    bool contains(const VectorXd& x) const;
    /// Mirror coordinates that leave the box back inside it, then clamp.
    VectorXd reflect(VectorXd x) const;
};

struct SimplexResult {
    VectorXd x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Nelder-Mead on a box. Stops when the spread of objective values falls to
/// ftol relative to the best value, or when every vertex is within xtol of
/// the best vertex.
SimplexResult nelder_mead(const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
                          const VectorXd& step, const Box& box, int max_iter, double ftol,
                          double xtol);

}  // namespace qpc
