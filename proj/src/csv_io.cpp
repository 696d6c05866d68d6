#include "qpc/csv_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

namespace qpc {

namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("cannot open '" + path + "'");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        lines.push_back(line);
    }
    // UTF-8 byte-order mark.
    if (!lines.empty() && lines.front().rfind("\xEF\xBB\xBF", 0) == 0) {
        lines.front().erase(0, 3);
    }
    return lines;
}

bool blank(std::string_view s) {
    return trim(s).empty();
}

long parse_long(std::string_view text, const std::string& where) {
    long v = 0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw DataError(where + ": '" + std::string(text) + "' is not an integer");
    }
    return v;
}

std::string where(const std::string& path, std::size_t line) {
    return path + " line " + std::to_string(line);
}

void open_out(std::ofstream& f, const std::string& path) {
    f.open(path);
    if (!f) {
        throw DataError("cannot write '" + path + "'");
    }
}

struct WideMatrix {
    std::vector<std::string> ids;
    MatrixXd values;
};

WideMatrix read_wide_matrix(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) {
        throw DataError(path + " is empty");
    }
    const auto header = split(lines.front());
    if (header.size() < 2 || header.front() != "id") {
        throw DataError(where(path, 1) + ": header must be id,1,...,T");
    }
    const Index T = static_cast<Index>(header.size()) - 1;
    for (Index t = 1; t <= T; ++t) {
        if (parse_long(header[static_cast<std::size_t>(t)], where(path, 1)) != t) {
            throw DataError(where(path, 1) + ": period columns must be 1,...,T in order");
        }
    }
    WideMatrix m;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (blank(lines[i])) {
            continue;
        }
        const auto f = split(lines[i]);
        if (static_cast<Index>(f.size()) != T + 1) {
            throw DataError(where(path, i + 1) + ": expected " + std::to_string(T + 1) +
                            " fields, got " + std::to_string(f.size()));
        }
        m.ids.emplace_back(f[0]);
        std::vector<double> r;
        for (Index t = 1; t <= T; ++t) {
            r.push_back(parse_double(f[static_cast<std::size_t>(t)], where(path, i + 1)));
        }
        rows.push_back(std::move(r));
    }
    m.values.resize(static_cast<Index>(rows.size()), T);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Index t = 0; t < T; ++t) {
            m.values(static_cast<Index>(i), t) = rows[i][static_cast<std::size_t>(t)];
        }
    }
    return m;
}

// Reorders m's rows to follow `ids`.
MatrixXd align(const WideMatrix& m, const std::vector<std::string>& ids, const std::string& path) {
    std::unordered_map<std::string, Index> pos;
    for (std::size_t i = 0; i < m.ids.size(); ++i) {
        if (!pos.emplace(m.ids[i], static_cast<Index>(i)).second) {
            throw DataError(path + ": duplicate id '" + m.ids[i] + "'");
        }
    }
    if (m.ids.size() != ids.size()) {
        throw DataError(path + ": has " + std::to_string(m.ids.size()) + " units, y.csv has " +
                        std::to_string(ids.size()));
    }
    MatrixXd out(m.values.rows(), m.values.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = pos.find(ids[i]);
        if (it == pos.end()) {
            throw DataError(path + ": missing id '" + ids[i] + "'");
        }
        out.row(static_cast<Index>(i)) = m.values.row(it->second);
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& where) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != end) {
        throw DataError(where + ": '" + std::string(text) + "' is not a number");
    }
    return v;
}

PanelData read_long_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) {
        throw DataError(path + " is empty");
    }
    const auto header = split(lines.front());
    if (header.size() < 4 || header[0] != "id" || header[1] != "t" || header[2] != "y") {
        throw DataError(where(path, 1) + ": header must be id,t,y,x1,...,xK");
    }
    const std::size_t K = header.size() - 3;
    for (std::size_t k = 0; k < K; ++k) {
        if (header[3 + k] != "x" + std::to_string(k + 1)) {
            throw DataError(where(path, 1) + ": expected column x" + std::to_string(k + 1) +
                            ", found '" + std::string(header[3 + k]) + "'");
        }
    }

    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> unit;
    std::map<std::pair<std::size_t, long>, std::vector<double>> cells;
    std::map<std::size_t, double> initial;
    std::set<long> periods;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (blank(lines[i])) {
            continue;
        }
        const std::string w = where(path, i + 1);
        const auto f = split(lines[i]);
        if (f.size() != header.size()) {
            throw DataError(w + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(f.size()));
        }
        const std::string id(f[0]);
        if (id.empty()) {
            throw DataError(w + ": empty id");
        }
        const auto [it, fresh] = unit.emplace(id, ids.size());
        if (fresh) {
            ids.push_back(id);
        }
        const long t = parse_long(f[1], w);
        if (t < 0) {
            throw DataError(w + ": negative period " + std::to_string(t));
        }
        const double y = parse_double(f[2], w);
        if (t == 0) {
            if (!initial.emplace(it->second, y).second) {
                throw DataError(w + ": duplicate initial value for id '" + id + "'");
            }
            continue;
        }
        std::vector<double> row{y};
        for (std::size_t k = 0; k < K; ++k) {
            row.push_back(parse_double(f[3 + k], w));
        }
        if (!cells.emplace(std::make_pair(it->second, t), std::move(row)).second) {
            throw DataError(w + ": duplicate row for (" + id + ", " + std::to_string(t) + ")");
        }
        periods.insert(t);
    }
    if (ids.empty() || periods.empty()) {
        throw DataError(path + ": no observations");
    }
    const std::vector<long> ts(periods.begin(), periods.end());
    for (std::size_t j = 1; j < ts.size(); ++j) {
        if (ts[j] != ts[j - 1] + 1) {
            throw DataError(path + ": periods are not consecutive (gap after t = " +
                            std::to_string(ts[j - 1]) + ")");
        }
    }

    const Index n = static_cast<Index>(ids.size());
    const Index T = static_cast<Index>(ts.size());
    PanelData d;
    d.Y.resize(n, T);
    d.X.assign(K, MatrixXd(n, T));
    std::string missing;
    int n_missing = 0;
    for (Index i = 0; i < n; ++i) {
        for (Index t = 0; t < T; ++t) {
            const auto it = cells.find({static_cast<std::size_t>(i), ts[static_cast<std::size_t>(t)]});
            if (it == cells.end()) {
                if (n_missing < 20) {
                    missing += " (" + ids[static_cast<std::size_t>(i)] + ", " +
                               std::to_string(ts[static_cast<std::size_t>(t)]) + ")";
                }
                ++n_missing;
                continue;
            }
            d.Y(i, t) = it->second[0];
            for (std::size_t k = 0; k < K; ++k) {
                d.X[k](i, t) = it->second[k + 1];
            }
        }
    }
    if (n_missing > 0) {
        throw DataError(path + ": unbalanced panel, " + std::to_string(n_missing) +
                        " missing (id, t) cells:" + missing + (n_missing > 20 ? " ..." : ""));
    }
    if (!initial.empty()) {
        if (static_cast<Index>(initial.size()) != n) {
            std::string which;
            for (Index i = 0; i < n && which.size() < 200; ++i) {
                if (initial.count(static_cast<std::size_t>(i)) == 0) {
                    which += " " + ids[static_cast<std::size_t>(i)];
                }
            }
            throw DataError(path + ": initial (t = 0) value missing for ids:" + which);
        }
        VectorXd y0(n);
        for (const auto& [i, v] : initial) {
            y0(static_cast<Index>(i)) = v;
        }
        d.y0 = y0;
    }
    return d;
}

void write_long_csv(const PanelData& data, const std::string& path) {
    std::ofstream f;
    open_out(f, path);
    const Index K = data.K();
    f << "id,t,y";
    for (Index k = 1; k <= K; ++k) {
        f << ",x" << k;
    }
    f << "\n";
    for (Index i = 0; i < data.n(); ++i) {
        if (data.y0) {
            f << (i + 1) << ",0," << format_double((*data.y0)(i));
            for (Index k = 0; k < K; ++k) {
                f << ",";
            }
            f << "\n";
        }
        for (Index t = 0; t < data.T(); ++t) {
            f << (i + 1) << "," << (t + 1) << "," << format_double(data.Y(i, t));
            for (Index k = 0; k < K; ++k) {
                f << "," << format_double(data.X[static_cast<std::size_t>(k)](i, t));
            }
            f << "\n";
        }
    }
    if (!f) {
        throw DataError("failed writing '" + path + "'");
    }
}

PanelData read_wide_dir(const std::string& dir) {
    const fs::path base(dir);
    if (!fs::is_directory(base)) {
        throw DataError("'" + dir + "' is not a directory");
    }
    const std::string ypath = (base / "y.csv").string();
    const WideMatrix y = read_wide_matrix(ypath);
    PanelData d;
    d.Y = y.values;
    for (int k = 1;; ++k) {
        const fs::path xp = base / ("x" + std::to_string(k) + ".csv");
        if (!fs::exists(xp)) {
            break;
        }
        const WideMatrix x = read_wide_matrix(xp.string());
        if (x.values.cols() != d.Y.cols()) {
            throw DataError(xp.string() + ": has " + std::to_string(x.values.cols()) +
                            " periods, y.csv has " + std::to_string(d.Y.cols()));
        }
        d.X.push_back(align(x, y.ids, xp.string()));
    }
    if (d.X.empty()) {
        throw DataError(dir + ": no covariate files (x1.csv, ...)");
    }
    const fs::path y0p = base / "y0.csv";
    if (fs::exists(y0p)) {
        const auto lines = read_lines(y0p.string());
        if (lines.empty() || split(lines.front()).size() != 2 || split(lines.front())[0] != "id") {
            throw DataError(where(y0p.string(), 1) + ": header must be id,y0");
        }
        WideMatrix m;
        std::vector<double> vals;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (blank(lines[i])) {
                continue;
            }
            const auto f = split(lines[i]);
            if (f.size() != 2) {
                throw DataError(where(y0p.string(), i + 1) + ": expected 2 fields");
            }
            m.ids.emplace_back(f[0]);
            vals.push_back(parse_double(f[1], where(y0p.string(), i + 1)));
        }
        m.values = Eigen::Map<const MatrixXd>(vals.data(), static_cast<Index>(vals.size()), 1);
        d.y0 = align(m, y.ids, y0p.string()).col(0);
    }
    return d;
}

void write_wide_dir(const PanelData& data, const std::string& dir) {
    const fs::path base(dir);
    fs::create_directories(base);
    auto write_matrix = [&](const MatrixXd& m, const fs::path& p) {
        std::ofstream f;
        open_out(f, p.string());
        f << "id";
        for (Index t = 1; t <= m.cols(); ++t) {
            f << "," << t;
        }
        f << "\n";
        for (Index i = 0; i < m.rows(); ++i) {
            f << (i + 1);
            for (Index t = 0; t < m.cols(); ++t) {
                f << "," << format_double(m(i, t));
            }
            f << "\n";
        }
    };
    write_matrix(data.Y, base / "y.csv");
    for (Index k = 0; k < data.K(); ++k) {
        write_matrix(data.X[static_cast<std::size_t>(k)], base / ("x" + std::to_string(k + 1) + ".csv"));
    }
    const fs::path y0p = base / "y0.csv";
    if (data.y0) {
        std::ofstream f;
        open_out(f, y0p.string());
        f << "id,y0\n";
        for (Index i = 0; i < data.n(); ++i) {
            f << (i + 1) << "," << format_double((*data.y0)(i)) << "\n";
        }
    } else if (fs::exists(y0p)) {
        fs::remove(y0p);
    }
}

}  // namespace qpc
