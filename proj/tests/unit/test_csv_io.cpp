#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "../fixtures.hpp"
#include "qpc/csv_io.hpp"
#include "qpc/estimator.hpp"
#include "qpc/simulate.hpp"

using namespace qpc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "qpc_csv_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::string error_of(const std::string& path) {
    try {
        read_long_csv(path);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("shortest round-trip formatting") {
    for (double v : {0.1, -1.0 / 3.0, 1e-300, 123456.789, 0.0, 2.5e17}) {
        CHECK(parse_double(format_double(v), "x") == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK_THROWS_AS(parse_double("1.5x", "here"), DataError);
    CHECK_THROWS_AS(parse_double("", "here"), DataError);
    CHECK(parse_double(" +2.5 ", "x") == 2.5);
}

TEST_CASE("long format round trip reproduces the estimate bit for bit") {
    DgpConfig cfg;
    cfg.n = 60;
    cfg.T = 5;
    const SimDraw s = generate(cfg, 3);
    const fs::path p = scratch("roundtrip.csv");
    write_long_csv(s.data, p.string());
    const PanelData back = read_long_csv(p.string());
    CHECK(back.Y == s.data.Y);
    CHECK(back.X[1] == s.data.X[1]);
    REQUIRE(back.y0.has_value());
    CHECK(*back.y0 == *s.data.y0);

    EstimateOptions opts;
    opts.R = 3;
    const EstimateResult a = estimate_qpc(s.data, opts);
    const EstimateResult b = estimate_qpc(back, opts);
    CHECK(a.theta_hat.stacked() == b.theta_hat.stacked());
}

TEST_CASE("wide and long inputs give identical estimates") {
    DgpConfig cfg;
    cfg.n = 60;
    cfg.T = 5;
    const SimDraw s = generate(cfg, 4);
    const fs::path dir = scratch("wide");
    fs::remove_all(dir);
    write_wide_dir(s.data, dir.string());
    const fs::path lp = scratch("long4.csv");
    write_long_csv(s.data, lp.string());
    const PanelData w = read_wide_dir(dir.string());
    const PanelData l = read_long_csv(lp.string());
    CHECK(w.Y == l.Y);
    EstimateOptions opts;
    opts.R = 3;
    CHECK(estimate_qpc(w, opts).theta_hat.stacked() == estimate_qpc(l, opts).theta_hat.stacked());
}

TEST_CASE("long rows may come in any order") {
    const fs::path p = scratch("shuffled.csv");
    write_file(p,
               "id,t,y,x1\n"
               "b,2,4,40\n"
               "a,1,1,10\n"
               "b,1,3,30\n"
               "a,2,2,20\n");
    const PanelData d = read_long_csv(p.string());
    CHECK(d.n() == 2);
    CHECK(d.T() == 2);
    CHECK(d.Y(0, 0) == 3.0);  // unit b appears first
    CHECK(d.Y(0, 1) == 4.0);
    CHECK(d.Y(1, 1) == 2.0);
    CHECK(d.X[0](0, 1) == 40.0);
    CHECK_FALSE(d.y0.has_value());
}

TEST_CASE("long format errors") {
    const fs::path bad = scratch("bad.csv");
    write_file(bad, "id,t,y,x1\n1,1,0.5,1\n1,2,oops,2\n");
    const std::string msg = error_of(bad.string());
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);

    const fs::path unbalanced = scratch("unbalanced.csv");
    write_file(unbalanced, "id,t,y,x1\n1,1,0.5,1\n1,2,1,2\n2,1,3,3\n");
    const std::string um = error_of(unbalanced.string());
    CHECK(um.find("unbalanced") != std::string::npos);
    CHECK(um.find("(2, 2)") != std::string::npos);

    const fs::path dup = scratch("dup.csv");
    write_file(dup, "id,t,y,x1\n1,1,0.5,1\n1,1,1,2\n");
    CHECK(error_of(dup.string()).find("duplicate") != std::string::npos);

    const fs::path header = scratch("header.csv");
    write_file(header, "id,time,y,x1\n1,1,0.5,1\n");
    CHECK(error_of(header.string()).find("header") != std::string::npos);

    const fs::path fields = scratch("fields.csv");
    write_file(fields, "id,t,y,x1\n1,1,0.5\n");
    CHECK(error_of(fields.string()).find("line 2") != std::string::npos);

    CHECK(error_of(scratch("does_not_exist.csv").string()).find("cannot open") != std::string::npos);
}

TEST_CASE("wide format errors") {
    const fs::path dir = scratch("wide_bad");
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file(dir / "y.csv", "id,1,2\na,1,2\nb,3,4\n");
    CHECK_THROWS_AS(read_wide_dir(dir.string()), DataError);  // no covariates
    write_file(dir / "x1.csv", "id,1,2\na,1,2\nc,3,4\n");
    try {
        read_wide_dir(dir.string());
        FAIL("expected an id mismatch");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
    write_file(dir / "x1.csv", "id,2,1\na,1,2\nb,3,4\n");
    CHECK_THROWS_AS(read_wide_dir(dir.string()), DataError);
}
