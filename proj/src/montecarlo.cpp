#include "qpc/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "qpc/baselines.hpp"
#include "qpc/factor_count.hpp"
#include "qpc/inference.hpp"
#include "qpc/transform.hpp"

namespace qpc {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': '" + v + "' is not a number");
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': '" + v + "' is not an integer");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw DataError("config key '" + key + "': '" + v + "' is not a boolean");
}

bool known_estimator(const std::string& e) {
    return e == "ls" || e == "pc" || e == "bn" || e == "qpc";
}

std::string fixed(double v, int digits) {
    if (!std::isfinite(v)) {
        return "NA";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s(buf);
    // Avoid "-0.000000".
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') {
        s.erase(0, 1);
    }
    return s;
}

RepOutcome run_estimator(const std::string& name, const McConfig& cfg, const PanelData& data,
                         const TransformedPanel& tp, const VectorXd& theta0,
                         Index* eigr_choice) {
    RepOutcome out;
    try {
        EstimateOptions opts;
        opts.R = cfg.R.at(name);
        opts.multistart = cfg.multistart;
        opts.covariance = cfg.covariance;
        EstimateResult res;
        if (name == "ls") {
            res = estimate_ls(data);
        } else if (name == "pc") {
            res = estimate_pc_bai(data, opts);
        } else if (name == "bn") {
            res = estimate_bn(data, opts);
        } else {
            res = estimate_qpc(tp, opts);
            if (eigr_choice != nullptr && res.converged) {
                *eigr_choice = eigenvalue_ratio(tp, res.theta_hat, data.n()).R_hat;
            }
        }
        out.theta = res.theta_hat.stacked();
        out.ok = res.converged && out.theta.allFinite();
        if (!out.ok) {
            out.error = "not converged";
        }
        if (res.covariance) {
            const auto ci = confidence_intervals(res, cfg.level);
            out.has_interval = true;
            for (Index k = 0; k < theta0.size(); ++k) {
                const auto& iv = ci[static_cast<std::size_t>(k)];
                out.covered.push_back(iv.lo <= theta0(k) && theta0(k) <= iv.hi);
            }
        }
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

}  // namespace

void McConfig::validate() const {
    if (grid.empty()) {
        throw DataError("Monte Carlo grid is empty");
    }
    if (replications < 1) {
        throw DataError("replications must be at least 1");
    }
    if (estimators.empty()) {
        throw DataError("no estimators selected");
    }
    for (const auto& e : estimators) {
        if (!known_estimator(e)) {
            throw DataError("unknown estimator '" + e + "'");
        }
        if (R.find(e) == R.end()) {
            throw DataError("no factor count given for estimator '" + e + "'");
        }
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw DataError("coverage level must lie in (0, 1)");
    }
    if (workers < 1 || multistart < 1) {
        throw DataError("workers and multistart must be at least 1");
    }
    if (format != "csv" && format != "markdown") {
        throw DataError("format must be csv or markdown");
    }
    for (const auto& [n, T] : grid) {
        if (n < 1 || T < 3) {
            throw DataError("grid cells need n >= 1 and T >= 3");
        }
    }
}

McConfig parse_mc_config(const std::string& text) {
    McConfig cfg;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "grid") {
            cfg.grid.clear();
            for (const auto& cell : split_list(val)) {
                const auto x = cell.find('x');
                if (x == std::string::npos) {
                    throw DataError("config line " + std::to_string(lineno) +
                                    ": grid cell '" + cell + "' should look like 300x6");
                }
                cfg.grid.emplace_back(to_long(key, trim(cell.substr(0, x))),
                                      to_long(key, trim(cell.substr(x + 1))));
            }
        } else if (key == "replications") {
            cfg.replications = static_cast<int>(to_long(key, val));
        } else if (key == "seed") {
            cfg.dgp.seed = static_cast<std::uint64_t>(to_long(key, val));
        } else if (key == "estimators") {
            cfg.estimators = split_list(val);
        } else if (key.rfind("R.", 0) == 0) {
            cfg.R[key.substr(2)] = to_long(key, val);
        } else if (key == "level") {
            cfg.level = to_double(key, val);
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(to_long(key, val));
        } else if (key == "multistart") {
            cfg.multistart = static_cast<int>(to_long(key, val));
        } else if (key == "covariance") {
            if (val == "kronecker") {
                cfg.covariance = CovarianceMode::PluginKronecker;
            } else if (val == "homoskedastic") {
                cfg.covariance = CovarianceMode::PluginHomoskedastic;
            } else {
                throw DataError("covariance must be kronecker or homoskedastic");
            }
        } else if (key == "eigr") {
            cfg.eigr = to_bool(key, val);
        } else if (key == "output") {
            cfg.output = val;
        } else if (key == "format") {
            cfg.format = val;
        } else if (key == "dgp.alpha0") {
            cfg.dgp.alpha0 = to_double(key, val);
        } else if (key == "dgp.beta0") {
            const auto items = split_list(val);
            cfg.dgp.beta0.resize(static_cast<Index>(items.size()));
            for (std::size_t i = 0; i < items.size(); ++i) {
                cfg.dgp.beta0(static_cast<Index>(i)) = to_double(key, items[i]);
            }
        } else if (key == "dgp.R_star") {
            cfg.dgp.R_star = to_long(key, val);
        } else if (key == "dgp.het_lo") {
            cfg.dgp.het_lo = to_double(key, val);
        } else if (key == "dgp.het_hi") {
            cfg.dgp.het_hi = to_double(key, val);
        } else if (key == "dgp.burn_in") {
            cfg.dgp.burn_in = to_long(key, val);
        } else if (key == "dgp.noise_scale") {
            cfg.dgp.noise_scale = to_double(key, val);
        } else if (key == "dgp.error_mode") {
            if (val == "heteroskedastic") {
                cfg.dgp.error_mode = ErrorMode::HeteroskedasticDiagonal;
            } else if (val == "iid") {
                cfg.dgp.error_mode = ErrorMode::Iid;
            } else {
                throw DataError("dgp.error_mode must be heteroskedastic or iid");
            }
        } else {
            throw DataError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                            "'");
        }
    }
    return cfg;
}

McConfig load_mc_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_mc_config(ss.str());
}

std::vector<std::string> coefficient_names(Index K) {
    std::vector<std::string> out{"alpha"};
    for (Index k = 1; k <= K; ++k) {
        out.push_back("beta" + std::to_string(k));
    }
    return out;
}

CellDraws simulate_cell(const McConfig& cfg, Index n, Index T) {
    cfg.validate();
    DgpConfig dgp = cfg.dgp;
    dgp.n = n;
    dgp.T = T;
    dgp.validate();

    CellDraws cell;
    cell.n = n;
    cell.T = T;
    cell.theta0 = Coefs(dgp.alpha0, dgp.beta0).stacked();
    const auto reps = static_cast<std::size_t>(cfg.replications);
    for (const auto& e : cfg.estimators) {
        cell.draws[e].resize(reps);
    }
    cell.eigr_choice.assign(reps, 0);

    const bool want_eigr =
        cfg.eigr && std::find(cfg.estimators.begin(), cfg.estimators.end(), "qpc") != cfg.estimators.end();

    auto one = [&](std::size_t r) {
        const SimDraw draw = generate(dgp, r);
        TransformedPanel tp;
        bool tp_ok = true;
        std::string tp_error;
        try {
            tp = transform_panel(draw.data, BasisMethod::SymmetricRoot);
        } catch (const std::exception& e) {
            tp_ok = false;
            tp_error = e.what();
        }
        for (const auto& e : cfg.estimators) {
            if (e == "qpc" && !tp_ok) {
                cell.draws.at(e)[r].error = tp_error;
                continue;
            }
            cell.draws.at(e)[r] = run_estimator(e, cfg, draw.data, tp, cell.theta0,
                                             want_eigr ? &cell.eigr_choice[r] : nullptr);
        }
    };

    const int workers = std::max(1, std::min<int>(cfg.workers, cfg.replications));
    if (workers == 1) {
        for (std::size_t r = 0; r < reps; ++r) {
            one(r);
        }
        return cell;
    }
    // Each slot is written by exactly one worker; the map itself is not
    // modified once sized.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t r = next++; r < reps; r = next++) {
                one(r);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    return cell;
}

McReport summarize(const McConfig& cfg, const std::vector<CellDraws>& cells) {
    McReport rep;
    for (const auto& cell : cells) {
        const auto names = coefficient_names(cell.theta0.size() - 1);
        for (const auto& e : cfg.estimators) {
            const auto& draws = cell.draws.at(e);
            for (Index k = 0; k < cell.theta0.size(); ++k) {
                McRow row;
                row.estimator = e;
                row.n = cell.n;
                row.T = cell.T;
                row.coef = names[static_cast<std::size_t>(k)];
                double sum = 0.0;
                int covered = 0;
                int with_ci = 0;
                for (const auto& d : draws) {
                    if (!d.ok) {
                        ++row.failures;
                        continue;
                    }
                    ++row.successes;
                    sum += d.theta(k) - cell.theta0(k);
                    if (d.has_interval) {
                        ++with_ci;
                        covered += d.covered[static_cast<std::size_t>(k)] ? 1 : 0;
                    }
                }
                if (row.successes == 0) {
                    row.na = true;
                    row.bias = row.sd = row.coverage = std::nan("");
                    rep.rows.push_back(row);
                    continue;
                }
                row.bias = sum / row.successes;
                double ss = 0.0;
                for (const auto& d : draws) {
                    if (d.ok) {
                        const double dev = d.theta(k) - cell.theta0(k) - row.bias;
                        ss += dev * dev;
                    }
                }
                row.sd = row.successes > 1 ? std::sqrt(ss / (row.successes - 1)) : 0.0;
                row.coverage = with_ci > 0 ? 100.0 * covered / with_ci : std::nan("");
                rep.rows.push_back(row);
            }
        }
        const bool has_eigr = cfg.eigr && cell.draws.count("qpc") > 0;
        if (has_eigr) {
            FactorRow fr;
            fr.n = cell.n;
            fr.T = cell.T;
            fr.percent.assign(static_cast<std::size_t>(cell.T - 1), 0.0);
            for (const Index c : cell.eigr_choice) {
                if (c >= 1) {
                    ++fr.successes;
                    fr.percent[static_cast<std::size_t>(c - 1)] += 1.0;
                }
            }
            for (auto& p : fr.percent) {
                p = fr.successes > 0 ? 100.0 * p / fr.successes : 0.0;
            }
            rep.factors.push_back(fr);
        }
    }
    return rep;
}

McReport run_monte_carlo(const McConfig& cfg) {
    cfg.validate();
    std::vector<CellDraws> cells;
    for (const auto& [n, T] : cfg.grid) {
        cells.push_back(simulate_cell(cfg, n, T));
    }
    return summarize(cfg, cells);
}

std::string report_csv(const McReport& rep) {
    std::string out = "estimator,n,T,coef,bias,sd,coverage\n";
    for (const auto& r : rep.rows) {
        out += r.estimator + "," + std::to_string(r.n) + "," + std::to_string(r.T) + "," + r.coef +
               "," + (r.na ? "NA" : fixed(r.bias, 6)) + "," + (r.na ? "NA" : fixed(r.sd, 6)) +
               "," + (r.na ? "NA" : fixed(r.coverage, 2)) + "\n";
    }
    return out;
}

std::string factor_csv(const McReport& rep) {
    std::string out = "n,T,R_hat,percent\n";
    for (const auto& f : rep.factors) {
        for (std::size_t r = 0; r < f.percent.size(); ++r) {
            out += std::to_string(f.n) + "," + std::to_string(f.T) + "," + std::to_string(r + 1) +
                   "," + fixed(f.percent[r], 2) + "\n";
        }
    }
    return out;
}

std::string report_markdown(const McReport& rep) {
    std::string out = "## Bias (SD) and coverage\n\n";
    out += "| estimator | n | T | coef | bias | sd | coverage % | ok | failed |\n";
    out += "|---|---:|---:|---|---:|---:|---:|---:|---:|\n";
    for (const auto& r : rep.rows) {
        out += "| " + r.estimator + " | " + std::to_string(r.n) + " | " + std::to_string(r.T) +
               " | " + r.coef + " | " + (r.na ? "NA" : fixed(r.bias, 3)) + " | " +
               (r.na ? "NA" : fixed(r.sd, 3)) + " | " + (r.na ? "NA" : fixed(r.coverage, 2)) +
               " | " + std::to_string(r.successes) + " | " + std::to_string(r.failures) + " |\n";
    }
    if (!rep.factors.empty()) {
        out += "\n## Number of factors chosen (eigenvalue ratio, qpc residuals) %\n\n";
        Index maxr = 0;
        for (const auto& f : rep.factors) {
            maxr = std::max<Index>(maxr, static_cast<Index>(f.percent.size()));
        }
        out += "| n | T |";
        std::string sep = "|---:|---:|";
        for (Index r = 1; r <= maxr; ++r) {
            out += " R=" + std::to_string(r) + " |";
            sep += "---:|";
        }
        out += "\n" + sep + "\n";
        for (const auto& f : rep.factors) {
            out += "| " + std::to_string(f.n) + " | " + std::to_string(f.T) + " |";
            for (Index r = 0; r < maxr; ++r) {
                out += " " +
                       (r < static_cast<Index>(f.percent.size())
                            ? fixed(f.percent[static_cast<std::size_t>(r)], 2)
                            : std::string("")) +
                       " |";
            }
            out += "\n";
        }
    }
    return out;
}

}  // namespace qpc
