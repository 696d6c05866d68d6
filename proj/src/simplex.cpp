#include "qpc/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qpc {

bool Box::contains(const VectorXd& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

VectorXd Box::reflect(VectorXd x) const {
    for (Index i = 0; i < x.size(); ++i) {
        if (x(i) > hi(i)) {
            x(i) = hi(i) - (x(i) - hi(i));
        } else if (x(i) < lo(i)) {
            x(i) = lo(i) + (lo(i) - x(i));
        }
        x(i) = std::clamp(x(i), lo(i), hi(i));
    }
    return x;
}

SimplexResult nelder_mead(const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
                          const VectorXd& step, const Box& box, int max_iter, double ftol,
                          double xtol) {
    const Index p = x0.size();
    std::vector<VectorXd> xs(static_cast<std::size_t>(p + 1));
    std::vector<double> fs(static_cast<std::size_t>(p + 1));
    xs[0] = box.reflect(x0);
    for (Index i = 0; i < p; ++i) {
        VectorXd v = xs[0];
        v(i) += step(i);
        if (v(i) > box.hi(i)) {
            v(i) = xs[0](i) - step(i);
        }
        xs[static_cast<std::size_t>(i + 1)] = box.reflect(v);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        fs[i] = f(xs[i]);
    }

    std::vector<std::size_t> order(xs.size());
    SimplexResult res;
    int it = 0;
    for (; it < max_iter; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];

        const double spread = fs[worst] - fs[best];
        double diam = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            diam = std::max(diam, (xs[i] - xs[best]).cwiseAbs().maxCoeff());
        }
        if (spread <= ftol * std::abs(fs[best]) || diam <= xtol) {
            res.converged = true;
            break;
        }

        VectorXd centroid = VectorXd::Zero(p);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i != worst) {
                centroid += xs[i];
            }
        }
        centroid /= static_cast<double>(p);

        const VectorXd xr = box.reflect(centroid + (centroid - xs[worst]));
        const double fr = f(xr);
        if (fr < fs[best]) {
            const VectorXd xe = box.reflect(centroid + 2.0 * (centroid - xs[worst]));
            const double fe = f(xe);
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
            continue;
        }
        if (fr < fs[second]) {
            xs[worst] = xr;
            fs[worst] = fr;
            continue;
        }
        const bool outside = fr < fs[worst];
        const VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                    : VectorXd(centroid + 0.5 * (xs[worst] - centroid));
        const double fc = f(xc);
        if (fc < (outside ? fr : fs[worst])) {
            xs[worst] = xc;
            fs[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i != best) {
                xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
                fs[i] = f(xs[i]);
            }
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    res.x = xs[best];
    res.f = fs[best];
    res.iterations = it;
    return res;
}

}  // namespace qpc
