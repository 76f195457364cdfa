#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ipde/config.hpp"
#include "ipde/expr.hpp"
#include "ipde/report.hpp"
#include "ipde/tasks.hpp"

using namespace ipde;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// timestamp is the one nondeterministic key: blank it before comparing
std::string strip_timestamp(std::string text) {
    auto pos = text.find("\"timestamp\"");
    if (pos == std::string::npos) return text;
    auto end = text.find('\n', pos);
    return text.replace(pos, end - pos, "\"timestamp\": X");
}

const char* kPoissonCfg = R"(
[domain]
dim = 1
lo = -1
hi = 1

[grid]
nodes = 65

[ellipticity]
lambda = 1
Lambda = 1

[problem]
g = 0

[pair 1 1]
a11 = 1
f = -2

[task]
kind = solve
driver = policy
exact = 1 - x1^2
error_bound = 1e-8
)";

}  // namespace

TEST_CASE("expression grammar: documented examples") {
    CHECK(Expr::parse("1 - x1^2").eval(Vec{0.5}) == doctest::Approx(0.75));
    CHECK(Expr::parse("exp(-abs(x))").eval(Vec{0.0}) == doctest::Approx(1.0));
    CHECK(Expr::parse("min(1, |x|)").eval(Vec{3.0, 4.0}) == doctest::Approx(1.0));
    CHECK(Expr::parse("|x|").eval(Vec{3.0, 4.0}) == doctest::Approx(5.0));
    CHECK(Expr::parse("piecewise(x1, 1, 2)").eval(Vec{-0.5}) == 2.0);
    CHECK(Expr::parse("piecewise(x1, 1, 2)").eval(Vec{0.5}) == 1.0);
    CHECK(Expr::parse("2^3^1").eval(Vec{0.0}) == doctest::Approx(8.0));
    CHECK(Expr::parse("max(1, 2, 3)").eval(Vec{0.0}) == 3.0);
    CHECK(Expr::parse("0.5 + 0.5*min(1,|z|)").eval2(Vec{0.0}, Vec{0.25}) ==
          doctest::Approx(0.625));
}

TEST_CASE("expression parse errors carry a position") {
    try {
        Expr::parse("1 + foo(2)");
        FAIL("expected a parse error");
    } catch (const ExprParseError& e) {
        CHECK(e.position == 4);
    }
    CHECK_THROWS_AS(Expr::parse("1 +"), ExprParseError);
    CHECK_THROWS_AS(Expr::parse("(1"), ExprParseError);
    CHECK_THROWS_AS(Expr::parse("min(1)"), ExprParseError);
    // NaN at evaluation is an error
    CHECK_THROWS_AS(Expr::parse("sqrt(0-1)").eval(Vec{0.0}), std::domain_error);
    // bare x outside d = 1
    CHECK_THROWS_AS(Expr::parse("x").eval(Vec{1.0, 2.0}), std::domain_error);
}

TEST_CASE("config validation names the offending field") {
    std::string bad = R"(
[domain]
dim = 1
lo = -1
hi = 1
[grid]
nodes = 33
[ellipticity]
lambda = 2
Lambda = 1
[task]
kind = solve
)";
    try {
        load_config_text(bad, "bad.cfg");
        FAIL("expected validation failure");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("Lambda") != std::string::npos);
    }
}

TEST_CASE("config parser: sections, maps, line numbers") {
    std::string text = R"(
kernel = { family = fractional, sigma = 1.0 }
quadrature = { shells = 4, nodes_per_shell = 8, tail_tol = 1e-8 }
[domain]
dim = 1
lo = -2
hi = 2
[grid]
nodes = 129
[task]
kind = selftest
)";
    ExperimentConfig cfg = load_config_text(text, "t.cfg");
    CHECK(cfg.kernel.family() == KernelFamily::Fractional);
    CHECK(cfg.quad.shells_per_octave == 4);
    CHECK(cfg.quad.tail_tol == 1e-8);
    CHECK(cfg.task == "selftest");

    CHECK_THROWS_AS(load_config_text("[domain\n", "u.cfg"), ConfigError);
    try {
        load_config_text("[domain]\nnonsense line\n", "v.cfg");
        FAIL("expected parse failure");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line-precise
    }
}

TEST_CASE("solve task: manufactured poisson passes and reports are schema-valid") {
    ExperimentConfig cfg = load_config_text(kPoissonCfg, "poisson.cfg");
    std::string out = "cli_test_out_a";
    TaskResult res = run_task(cfg, out, 1, 1);
    CHECK(res.exit_code == 0);
    CHECK(res.report["pass"].get<bool>());
    CHECK(res.report["results"]["sup_error"].get<double>() <= 1e-8);

    std::string err;
    CHECK(validate_schema(res.report, builtin_report_schema(), &err));
    json from_disk = json::parse(read_file(out + "/report.json"));
    CHECK(validate_schema(from_disk, builtin_report_schema(), &err));
    std::filesystem::remove_all(out);
}

TEST_CASE("determinism: identical config + seed gives identical bytes") {
    ExperimentConfig cfg = load_config_text(kPoissonCfg, "poisson.cfg");
    run_task(cfg, "cli_det_a", 1, 42);
    run_task(cfg, "cli_det_b", 1, 42);
    CHECK(strip_timestamp(read_file("cli_det_a/report.json")) ==
          strip_timestamp(read_file("cli_det_b/report.json")));
    CHECK(read_file("cli_det_a/solution.csv") == read_file("cli_det_b/solution.csv"));
    std::filesystem::remove_all("cli_det_a");
    std::filesystem::remove_all("cli_det_b");
}

TEST_CASE("verify-barrier task: zero-kernel config passes") {
    std::string text = R"(
kernel = { family = zero }
[domain]
dim = 1
lo = -4
hi = 4
[grid]
nodes = 65
[ellipticity]
lambda = 1
Lambda = 1
[task]
kind = verify-barrier
barrier = special
samples = 64
)";
    ExperimentConfig cfg = load_config_text(text, "vb.cfg");
    TaskResult res = run_task(cfg, "cli_test_out_b", 1, 7);
    CHECK(res.exit_code == 0);
    CHECK(res.report["results"]["eta"].get<double>() <= 4.0);
    CHECK(std::filesystem::exists("cli_test_out_b/series.csv"));
    std::filesystem::remove_all("cli_test_out_b");
}

TEST_CASE("envelope task runs end to end") {
    std::string text = R"(
[domain]
dim = 1
lo = -1
hi = 1
[grid]
nodes = 65
[problem]
u = abs(x1) - x1^2
[task]
kind = envelope
)";
    ExperimentConfig cfg = load_config_text(text, "env.cfg");
    TaskResult res = run_task(cfg, "cli_test_out_c", 1, 1);
    CHECK(res.exit_code == 0);
    CHECK(std::filesystem::exists("cli_test_out_c/envelope.csv"));
    CHECK(std::filesystem::exists("cli_test_out_c/contact.csv"));
    std::filesystem::remove_all("cli_test_out_c");
}

TEST_CASE("selftest task passes") {
    std::string text = R"(
[domain]
dim = 1
lo = -1
hi = 1
[grid]
nodes = 9
[task]
kind = selftest
)";
    ExperimentConfig cfg = load_config_text(text, "st.cfg");
    TaskResult res = run_task(cfg, "cli_test_out_d", 1, 1);
    CHECK(res.exit_code == 0);
    std::filesystem::remove_all("cli_test_out_d");
}

TEST_CASE("grid binary serialization fields match the written header") {
    Lattice g(BoxDomain(Vec{-1.0}, Vec{1.0}), {17});
    GridFunction u = GridFunction::sample(g, [](const Vec& x) { return x[0]; });
    write_binary(u, "cli_hdr_test.bin");
    std::ifstream in("cli_hdr_test.bin", std::ios::binary);
    std::uint32_t magic = 0, dim = 0, n = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&n), 4);
    CHECK(dim == 1);
    CHECK(n == 17);
    std::remove("cli_hdr_test.bin");
}
