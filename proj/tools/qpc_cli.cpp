#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "qpc/baselines.hpp"
#include "qpc/csv_io.hpp"
#include "qpc/estimator.hpp"
#include "qpc/factor_count.hpp"
#include "qpc/inference.hpp"
#include "qpc/montecarlo.hpp"
#include "qpc/simulate.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f) {
        throw qpc::DataError("cannot write '" + path + "'");
    }
    f << text;
}

std::string sibling(const std::string& path, const std::string& suffix) {
    const auto dot = path.rfind('.');
    const auto slash = path.rfind('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return path + suffix;
    }
    return path.substr(0, dot) + suffix + path.substr(dot);
}

struct McArgs {
    std::string config;
    int reps = 0;
    long seed = -1;
    std::string out;
    std::string format;
    int workers = 0;
};

int run_mc(const McArgs& a) {
    qpc::McConfig cfg = qpc::load_mc_config(a.config);
    if (a.reps > 0) {
        cfg.replications = a.reps;
    }
    if (a.seed >= 0) {
        cfg.dgp.seed = static_cast<std::uint64_t>(a.seed);
    }
    if (!a.out.empty()) {
        cfg.output = a.out;
    }
    if (!a.format.empty()) {
        cfg.format = a.format;
    }
    if (a.workers > 0) {
        cfg.workers = a.workers;
    }
    const qpc::McReport rep = qpc::run_monte_carlo(cfg);
    int failures = 0;
    for (const auto& r : rep.rows) {
        failures += r.coef == "alpha" ? r.failures : 0;
    }
    if (cfg.format == "markdown") {
        write_text(cfg.output, qpc::report_markdown(rep));
    } else {
        write_text(cfg.output, qpc::report_csv(rep));
        if (!rep.factors.empty()) {
            if (cfg.output.empty() || cfg.output == "-") {
                std::cout << "\n" << qpc::factor_csv(rep);
            } else {
                write_text(sibling(cfg.output, "_eigr"), qpc::factor_csv(rep));
            }
        }
    }
    if (failures > 0) {
        std::cerr << "note: " << failures
                  << " estimator runs did not converge and were excluded\n";
    }
    return kOk;
}

struct FitArgs {
    std::string data;
    std::string format = "long";
    std::string estimator = "qpc";
    long factors = -1;
    bool eigr = false;
    std::string covariance = "kronecker";
    std::string basis = "symmetric-root";
    int multistart = 8;
    double level = 0.95;
    bool low_rank = false;
};

int run_fit(const FitArgs& a) {
    const qpc::PanelData data =
        a.format == "wide" ? qpc::read_wide_dir(a.data) : qpc::read_long_csv(a.data);
    data.validate();

    qpc::EstimateOptions opts;
    opts.multistart = a.multistart;
    opts.basis = a.basis == "qr" ? qpc::BasisMethod::QR : qpc::BasisMethod::SymmetricRoot;
    opts.covariance = a.covariance == "homoskedastic" ? qpc::CovarianceMode::PluginHomoskedastic
                      : a.covariance == "none"        ? qpc::CovarianceMode::None
                                                      : qpc::CovarianceMode::PluginKronecker;
    opts.detect_low_rank = a.low_rank;
    if (a.factors >= 0) {
        opts.R = a.factors;
    } else {
        opts.R = a.estimator == "qpc" ? 3 : a.estimator == "ls" ? 0 : 2;
    }

    qpc::EstimateResult res;
    if (a.estimator == "qpc") {
        res = qpc::estimate_qpc(data, opts);
    } else if (a.estimator == "bn") {
        res = qpc::estimate_bn(data, opts);
    } else if (a.estimator == "pc") {
        res = qpc::estimate_pc_bai(data, opts);
    } else {
        res = qpc::estimate_ls(data);
    }

    std::cout << "estimator: " << res.estimator << "\n";
    std::cout << "n: " << data.n() << "  T: " << data.T() << "  K: " << data.K()
              << "  periods used: " << res.periods << "  R: " << res.R << "\n";
    std::cout << "objective: " << qpc::format_double(res.objective) << "\n";
    std::cout << "converged: " << (res.converged ? "yes" : "no")
              << "  starts agreeing: " << res.starts_agreeing << "/"
              << std::max<std::size_t>(1, res.diagnostics.size()) << "\n";
    if (res.factors.rotation_ambiguous) {
        std::cout << "warning: tied eigenvalues at the factor boundary; factors not unique\n";
    }
    const auto names = qpc::coefficient_names(data.K());
    const qpc::VectorXd th = res.theta_hat.stacked();
    std::vector<qpc::Interval> ci;
    qpc::VectorXd se;
    if (res.covariance) {
        se = res.standard_errors();
        ci = qpc::confidence_intervals(res, a.level);
    } else if (!res.covariance_note.empty()) {
        std::cout << "covariance unavailable: " << res.covariance_note << "\n";
    }
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-8s %14s %12s %12s %12s\n", "coef", "estimate", "se", "ci_lo",
                  "ci_hi");
    std::cout << buf;
    for (qpc::Index k = 0; k < th.size(); ++k) {
        if (res.covariance) {
            const auto& iv = ci[static_cast<std::size_t>(k)];
            std::snprintf(buf, sizeof buf, "%-8s %14.8f %12.6f %12.6f %12.6f\n",
                          names[static_cast<std::size_t>(k)].c_str(), th(k), se(k), iv.lo, iv.hi);
        } else {
            std::snprintf(buf, sizeof buf, "%-8s %14.8f %12s %12s %12s\n",
                          names[static_cast<std::size_t>(k)].c_str(), th(k), "NA", "NA", "NA");
        }
        std::cout << buf;
    }
    std::cout << "theta (exact):";
    for (qpc::Index k = 0; k < th.size(); ++k) {
        std::cout << " " << qpc::format_double(th(k));
    }
    std::cout << "\n";

    if (a.eigr) {
        const auto tp = qpc::transform_panel(data, opts.basis);
        const auto rep = qpc::eigenvalue_ratio(tp, res.theta_hat, data.n());
        std::cout << "eigenvalue ratio: R_hat = " << rep.R_hat
                  << (rep.degenerate ? " (degenerate: all ratios equal)" : "") << "\n";
        for (qpc::Index r = 0; r < rep.ratios.size(); ++r) {
            std::snprintf(buf, sizeof buf, "  r=%-3ld mu*=%.6g  ratio=%.6g\n",
                          static_cast<long>(r + 1), rep.mu_star(r), rep.ratios(r));
            std::cout << buf;
        }
    }
    return res.converged ? kOk : kNumerical;
}

struct SimArgs {
    long n = 300;
    long T = 6;
    long seed = 1;
    long replication = 0;
    double alpha0 = 0.5;
    std::string out;
    std::string format = "long";
    double noise = 1.0;
};

int run_simulate(const SimArgs& a) {
    qpc::DgpConfig cfg;
    cfg.n = a.n;
    cfg.T = a.T;
    cfg.seed = static_cast<std::uint64_t>(a.seed);
    cfg.alpha0 = a.alpha0;
    cfg.noise_scale = a.noise;
    const auto draw = qpc::generate(cfg, static_cast<std::uint64_t>(a.replication));
    if (a.format == "wide") {
        qpc::write_wide_dir(draw.data, a.out);
    } else {
        qpc::write_long_csv(draw.data, a.out);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transformed principal-components estimation for dynamic panels with interactive effects"};
    app.require_subcommand(1);

    McArgs mc;
    auto* mc_cmd = app.add_subcommand("mc", "Run a Monte Carlo experiment");
    mc_cmd->add_option("--config", mc.config, "key = value config file")->required()->check(CLI::ExistingFile);
    mc_cmd->add_option("--reps", mc.reps, "Replications per cell");
    mc_cmd->add_option("--seed", mc.seed, "Master seed");
    mc_cmd->add_option("--out", mc.out, "Output path ('-' for stdout)");
    mc_cmd->add_option("--format", mc.format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));
    mc_cmd->add_option("--workers", mc.workers, "Worker threads")->check(CLI::PositiveNumber);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Estimate a model from CSV data");
    fit_cmd->add_option("--data", fit.data, "Long CSV file or wide-format directory")->required();
    fit_cmd->add_option("--format", fit.format, "long or wide")->check(CLI::IsMember({"long", "wide"}));
    fit_cmd->add_option("--estimator", fit.estimator, "qpc, bn, pc or ls")
        ->check(CLI::IsMember({"qpc", "bn", "pc", "ls"}));
    fit_cmd->add_option("--factors", fit.factors,
                        "Factors in estimation (qpc counts the initial-condition factor)");
    fit_cmd->add_flag("--eigr", fit.eigr, "Report the eigenvalue-ratio factor count");
    fit_cmd->add_option("--covariance", fit.covariance, "kronecker, homoskedastic or none")
        ->check(CLI::IsMember({"kronecker", "homoskedastic", "none"}));
    fit_cmd->add_option("--basis", fit.basis, "symmetric-root or qr")
        ->check(CLI::IsMember({"symmetric-root", "qr"}));
    fit_cmd->add_option("--multistart", fit.multistart, "Optimizer starts")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--level", fit.level, "Confidence level")->check(CLI::Range(0.5, 0.9999));
    fit_cmd->add_flag("--low-rank", fit.low_rank, "Detect rank-1 covariates");

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Write one simulated panel to CSV");
    sim_cmd->add_option("--n", sim.n, "Cross-section size");
    sim_cmd->add_option("--T", sim.T, "Periods");
    sim_cmd->add_option("--seed", sim.seed, "Seed");
    sim_cmd->add_option("--replication", sim.replication, "Replication index");
    sim_cmd->add_option("--alpha", sim.alpha0, "True autoregressive coefficient");
    sim_cmd->add_option("--noise", sim.noise, "Error scale");
    sim_cmd->add_option("--out", sim.out, "Output file (long) or directory (wide)")->required();
    sim_cmd->add_option("--format", sim.format, "long or wide")->check(CLI::IsMember({"long", "wide"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*mc_cmd) {
            return run_mc(mc);
        }
        if (*fit_cmd) {
            return run_fit(fit);
        }
        return run_simulate(sim);
    } catch (const qpc::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const qpc::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
}
