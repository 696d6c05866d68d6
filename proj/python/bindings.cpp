#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "qpc/baselines.hpp"
#include "qpc/csv_io.hpp"
#include "qpc/estimator.hpp"
#include "qpc/factor_count.hpp"
#include "qpc/inference.hpp"
#include "qpc/montecarlo.hpp"
#include "qpc/simulate.hpp"

namespace py = pybind11;
using namespace qpc;

namespace {

PanelData make_panel(const MatrixXd& Y, const std::vector<MatrixXd>& X,
                     const std::optional<VectorXd>& y0) {
    PanelData d;
    d.Y = Y;
    d.X = X;
    d.y0 = y0;
    d.validate();
    return d;
}

CovarianceMode covariance_mode(const std::string& s) {
    if (s == "kronecker") {
        return CovarianceMode::PluginKronecker;
    }
    if (s == "homoskedastic") {
        return CovarianceMode::PluginHomoskedastic;
    }
    if (s == "none") {
        return CovarianceMode::None;
    }
    throw std::invalid_argument("covariance must be kronecker, homoskedastic or none");
}

BasisMethod basis_method(const std::string& s) {
    if (s == "symmetric-root") {
        return BasisMethod::SymmetricRoot;
    }
    if (s == "qr") {
        return BasisMethod::QR;
    }
    throw std::invalid_argument("basis must be symmetric-root or qr");
}

EstimateResult estimate(const MatrixXd& Y, const std::vector<MatrixXd>& X,
                        const std::optional<VectorXd>& y0, const std::string& estimator,
                        std::optional<Index> R, int multistart, const std::string& covariance,
                        const std::string& basis, bool detect_low_rank) {
    const PanelData d = make_panel(Y, X, y0);
    EstimateOptions opts;
    opts.multistart = multistart;
    opts.covariance = covariance_mode(covariance);
    opts.basis = basis_method(basis);
    opts.detect_low_rank = detect_low_rank;
    if (estimator == "qpc") {
        opts.R = R.value_or(3);
        return estimate_qpc(d, opts);
    }
    if (estimator == "bn") {
        opts.R = R.value_or(2);
        return estimate_bn(d, opts);
    }
    if (estimator == "pc") {
        opts.R = R.value_or(2);
        return estimate_pc_bai(d, opts);
    }
    if (estimator == "ls") {
        return estimate_ls(d);
    }
    throw std::invalid_argument("estimator must be qpc, bn, pc or ls");
}

py::dict simulate(Index n, Index T, std::uint64_t seed, std::uint64_t replication, double alpha0,
                  const VectorXd& beta0, Index R_star, double noise_scale,
                  const std::string& error_mode) {
    DgpConfig cfg;
    cfg.n = n;
    cfg.T = T;
    cfg.seed = seed;
    cfg.alpha0 = alpha0;
    cfg.beta0 = beta0;
    cfg.R_star = R_star;
    cfg.noise_scale = noise_scale;
    if (error_mode == "iid") {
        cfg.error_mode = ErrorMode::Iid;
    } else if (error_mode != "heteroskedastic") {
        throw std::invalid_argument("error_mode must be heteroskedastic or iid");
    }
    const SimDraw s = generate(cfg, replication);
    py::dict out;
    out["Y"] = s.data.Y;
    out["X"] = s.data.X;
    out["y0"] = *s.data.y0;
    out["Lambda"] = s.truth.Lambda;
    out["F"] = s.truth.F;
    out["epsilon"] = s.truth.epsilon;
    out["sigma_n"] = VectorXd(s.truth.SigmaN.diagonal());
    out["sigma_t"] = VectorXd(s.truth.SigmaT.diagonal());
    out["theta0"] = s.truth.theta0.stacked();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Transformed principal-components estimation for dynamic panels";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<EstimateResult>(m, "EstimateResult")
        .def_readonly("estimator", &EstimateResult::estimator)
        .def_property_readonly("theta", [](const EstimateResult& r) { return r.theta_hat.stacked(); })
        .def_property_readonly("alpha", [](const EstimateResult& r) { return r.theta_hat.alpha; })
        .def_property_readonly("beta", [](const EstimateResult& r) { return r.theta_hat.beta; })
        .def_readonly("objective", &EstimateResult::objective)
        .def_readonly("converged", &EstimateResult::converged)
        .def_readonly("starts_agreeing", &EstimateResult::starts_agreeing)
        .def_readonly("n", &EstimateResult::n)
        .def_readonly("periods", &EstimateResult::periods)
        .def_readonly("R", &EstimateResult::R)
        .def_readonly("residual", &EstimateResult::residual)
        .def_readonly("covariance", &EstimateResult::covariance)
        .def_readonly("covariance_note", &EstimateResult::covariance_note)
        .def_readonly("objective_path", &EstimateResult::objective_path)
        .def_property_readonly("factors", [](const EstimateResult& r) { return r.factors.F; })
        .def_property_readonly("loadings", [](const EstimateResult& r) { return r.factors.loadings; })
        .def_property_readonly("rotation_ambiguous",
                               [](const EstimateResult& r) { return r.factors.rotation_ambiguous; })
        .def("standard_errors", &EstimateResult::standard_errors)
        .def(
            "confidence_intervals",
            [](const EstimateResult& r, double level) {
                std::vector<std::pair<double, double>> out;
                for (const auto& iv : confidence_intervals(r, level)) {
                    out.emplace_back(iv.lo, iv.hi);
                }
                return out;
            },
            py::arg("level") = 0.95)
        .def("__repr__", [](const EstimateResult& r) {
            return "<EstimateResult " + r.estimator + " alpha=" + format_double(r.theta_hat.alpha) +
                   " converged=" + (r.converged ? "True" : "False") + ">";
        });

    m.def("estimate", &estimate, py::arg("Y"), py::arg("X"), py::arg("y0") = py::none(),
          py::arg("estimator") = "qpc", py::arg("R") = py::none(), py::arg("multistart") = 8,
          py::arg("covariance") = "kronecker", py::arg("basis") = "symmetric-root",
          py::arg("detect_low_rank") = false,
          "Estimate (alpha, beta). For qpc, R counts the initial-condition factor (default 3).");

    m.def("simulate", &simulate, py::arg("n") = 300, py::arg("T") = 6, py::arg("seed") = 1,
          py::arg("replication") = 0, py::arg("alpha0") = 0.5,
          py::arg("beta0") = VectorXd::Ones(2), py::arg("R_star") = 2,
          py::arg("noise_scale") = 1.0, py::arg("error_mode") = "heteroskedastic");

    m.def(
        "eigenvalue_ratio",
        [](const MatrixXd& Y, const std::vector<MatrixXd>& X, const std::optional<VectorXd>& y0,
           const VectorXd& theta) {
            const PanelData d = make_panel(Y, X, y0);
            const EigRReport r = eigenvalue_ratio(transform_panel(d), Coefs::from_stacked(theta), d.n());
            py::dict out;
            out["R_hat"] = r.R_hat;
            out["mu_star"] = r.mu_star;
            out["ratios"] = r.ratios;
            out["degenerate"] = r.degenerate;
            return out;
        },
        py::arg("Y"), py::arg("X"), py::arg("y0") = py::none(), py::arg("theta"));

    m.def("nickell_bias", &nickell_bias, py::arg("alpha"), py::arg("T"), py::arg("n"), py::arg("K"));

    m.def(
        "read_long_csv",
        [](const std::string& path) {
            const PanelData d = read_long_csv(path);
            return py::make_tuple(d.Y, d.X, d.y0);
        },
        py::arg("path"));

    m.def(
        "monte_carlo",
        [](const std::string& config_text, std::optional<int> replications) {
            McConfig cfg = parse_mc_config(config_text);
            if (replications) {
                cfg.replications = *replications;
            }
            McReport rep;
            {
                py::gil_scoped_release release;
                rep = run_monte_carlo(cfg);
            }
            return py::make_tuple(report_csv(rep), factor_csv(rep));
        },
        py::arg("config"), py::arg("replications") = py::none(),
        "Run an experiment from config text; returns (results csv, factor-count csv).");
}
