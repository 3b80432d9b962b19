#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sturm_heat/cli.hpp"

using namespace sturm_heat;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sturm_heat_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    args.insert(args.begin(), "sturm-heat");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST(Expression, ArithmeticAndPrecedence) {
    EXPECT_DOUBLE_EQ(expr::parse("1 + 2*3")->eval(0, 0), 7.0);
    EXPECT_DOUBLE_EQ(expr::parse("2^3^2")->eval(0, 0), 512.0);
    EXPECT_DOUBLE_EQ(expr::parse("-2^2")->eval(0, 0), -4.0);
    EXPECT_DOUBLE_EQ(expr::parse("(1 - x)*x")->eval(0.25, 0), 0.1875);
    EXPECT_DOUBLE_EQ(expr::parse("exp(-t)*sin(pi*x)")->eval(0.5, 1.0), std::exp(-1.0));
    EXPECT_DOUBLE_EQ(expr::parse("1e-3 + .5")->eval(0, 0), 0.501);
    EXPECT_DOUBLE_EQ(expr::parse("step(x - 0.5)")->eval(0.5, 0), 1.0);
    EXPECT_DOUBLE_EQ(expr::parse("sqrt(abs(-4))")->eval(0, 0), 2.0);
}

TEST(Expression, Errors) {
    for (const char* bad : {"", "1 +", "sin x", "foo(x)", "(1", "1 2", "delta(x)", "dL2(delta(0.5))", "2 $ 3"}) {
        EXPECT_THROW(parse_spec(bad), ConfigError) << bad;
    }
    EXPECT_THROW(parse_spec("t*x"), ConfigError);
    EXPECT_THROW(parse_spec("x", 't'), ConfigError);
    EXPECT_THROW(parse_spec("sin(x)*delta(0.5)"), ConfigError);
    EXPECT_THROW(parse_source("delta(0.5)"), ConfigError);
}

TEST(Spec, SmoothDeltaAndSums) {
    const auto s = parse_spec("sin(pi*x)");
    EXPECT_TRUE(std::holds_alternative<SmoothData>(s.kind));
    EXPECT_NEAR(s.evaluate(0.5), 1.0, 1e-15);
    EXPECT_EQ(s.text, "sin(pi*x)");

    const auto d = parse_spec("delta(0.5)");
    ASSERT_TRUE(d.is_delta());
    EXPECT_EQ(std::get<DeltaAt>(d.kind).location, 0.5);
    EXPECT_EQ(std::get<DeltaAt>(d.kind).mass, 1.0);

    const auto sum = parse_spec("0.3 - 2*delta(0.25, 1.5) + x");
    const auto* parts = std::get_if<SumOf>(&sum.kind);
    ASSERT_NE(parts, nullptr);
    ASSERT_EQ(parts->terms.size(), 2u);
    EXPECT_NEAR(parts->terms[0].evaluate(0.5), 0.8, 1e-15);
    EXPECT_EQ(std::get<DeltaAt>(parts->terms[1].kind).mass, -3.0);
    EXPECT_TRUE(sum.has_delta());

    const auto a = parse_spec("1 + delta(0.5)", 't');
    EXPECT_TRUE(a.has_delta());
}

TEST(Spec, DerivativeAndStep) {
    const auto dv = parse_spec("dL2(x^2)");
    ASSERT_TRUE(std::holds_alternative<DerivativeOfL2>(dv.kind));
    EXPECT_NEAR(dv.evaluate(0.3), 0.6, 1e-8);

    const auto st = parse_spec("5*step(x - 0.5)");
    const auto* b = std::get_if<BoundedFunction>(&st.kind);
    ASSERT_NE(b, nullptr);
    ASSERT_EQ(b->breakpoints.size(), 1u);
    EXPECT_NEAR(b->breakpoints[0], 0.5, 1e-15);
    EXPECT_THROW(parse_spec("step(x^2 - 0.25)"), ConfigError);

    const auto at = parse_spec("1 + step(t - 0.25)", 't');
    ASSERT_TRUE(std::holds_alternative<BoundedFunction>(at.kind));
    EXPECT_NEAR(std::get<BoundedFunction>(at.kind).breakpoints[0], 0.25, 1e-15);
}

TEST(Config, MinimalGetsDefaults) {
    const auto c = parse_config(R"J({"problem": {"q": "delta(0.5)", "u0": "sin(pi*x)", "a": "1"}, "experiment": "solve"})J");
    EXPECT_EQ(c.experiment, "solve");
    EXPECT_EQ(c.problem.q, "delta(0.5)");
    EXPECT_EQ(c.numerics.spatial_points, 2001u);
    EXPECT_EQ(c.numerics.n_max, 40);
    EXPECT_EQ(c.regularization.epsilon_net, dyadic_net(3, 10));
    ASSERT_EQ(c.regularization.kernels.size(), 1u);
    EXPECT_EQ(c.regularization.kernels[0].kernel, "bump");
    EXPECT_EQ(c.stem(), "solve");
}

TEST(Config, RangeAndArityGuards) {
    try {
        parse_config(R"J({"numerics": {"spatial_points": 10}})J");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("spatial_points"), std::string::npos);
    }
    try {
        parse_config(R"J({"experiment": "uniqueness"})J");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_STREQ(e.what(), "uniqueness requires two regularization choices");
    }
    EXPECT_NO_THROW(parse_config(R"J({"experiment": "uniqueness", "regularization": {"self_test": true}})J"));
    EXPECT_NO_THROW(
        parse_config(R"J({"experiment": "uniqueness", "regularization": {"kernels": ["bump", "truncated_gaussian"]}})J"));
    EXPECT_THROW(parse_config(R"J({"regularization": {"kernels": ["box"]}})J"), ConfigError);
    EXPECT_THROW(parse_config(R"J({"experiment": "existence", "regularization": {"epsilon_net": [0.1, 0.2, 0.05, 0.01]}})J"),
                 ConfigError);
    EXPECT_THROW(parse_config(R"J({"experiment": "consistency", "problem": {"q": "delta(0.5)"}})J"), ConfigError);
    EXPECT_THROW(parse_config(R"J({"experiment": "fly"})J"), ConfigError);
    EXPECT_THROW(parse_config(R"J({"problem": {"T": -1}})J"), ConfigError);
    EXPECT_THROW(parse_config(R"J({"problem": {"u0": "dL2(x)"}})J"), ConfigError);
    EXPECT_THROW(parse_config(R"J({"numerics": {"spatial_points": "many"}})J"), ConfigError);
    EXPECT_THROW(parse_config("{not json"), ConfigError);
    EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
}

TEST(Config, UnknownKeysListed) {
    try {
        parse_config(R"J({"problem": {"q": "0", "qq": "1", "zeta": 2}})J");
        FAIL();
    } catch (const ConfigError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("qq"), std::string::npos);
        EXPECT_NE(m.find("zeta"), std::string::npos);
    }
}

TEST(Config, DeltaLocationErrorNamesInterval) {
    try {
        parse_config(R"J({"problem": {"q": "delta(1.2)"}})J");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("(0, 1)"), std::string::npos) << e.what();
    }
    try {
        parse_config(R"J({"problem": {"a": "1 + delta(3)", "T": 2}})J");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("(0, 2)"), std::string::npos) << e.what();
    }
}

TEST(Config, RoundTrip) {
    const char* docs[] = {
        R"J({})J",
        R"J({"experiment": "estimates", "problem": {"q": "0.3", "u0": "x*(1-x)", "u0_second_norm": 2, "f": "cos(2*t)*x"}})J",
        R"J({"experiment": "uniqueness", "regularization": {"kernels": [{"kernel": "bump"},
            {"kernel": "truncated_gaussian", "sigma": 0.4, "label": "g"}], "epsilon_net": {"first": 2, "last": 6}},
            "output": {"format": "csv", "name": "u1"}, "numerics": {"threads": 3}})J",
    };
    for (const char* d : docs) {
        const RunConfig c = parse_config(d);
        const RunConfig back = parse_config(serialize(c));
        EXPECT_TRUE(back == c) << d;
        EXPECT_EQ(serialize(back), serialize(c));
    }
}

TEST(Run, SolveClassicalCase) {
    const fs::path dir = scratch("solve");
    RunConfig c = parse_config(R"J({"problem": {"q": "0", "u0": "sin(pi*x)"}, "solve": {"times": [0, 0.1]}})J");
    c.output.directory = dir.string();
    const RunResult r = run(c);
    EXPECT_EQ(r.exit_code, kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / "solve.json"));
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_NEAR(j["result"]["eigenvalues"][0].get<double>(), pi * pi, 1e-6);
    EXPECT_NEAR(j["result"]["snapshots"][1]["l2_norm"].get<double>(), std::exp(-pi * pi / 10) / std::sqrt(2.0), 1e-6);
    for (const auto& rc : j["result"]["residual_checks"]) EXPECT_TRUE(rc["pass"].get<bool>());

    std::ifstream eig(dir / "solve_eigenvalues.csv");
    std::string header, first;
    std::getline(eig, header);
    std::getline(eig, first);
    EXPECT_EQ(header, "n,lambda");
    EXPECT_NEAR(std::stod(first.substr(2)), 9.8696, 1e-4);

    const std::string field = slurp(dir / "solve_field.csv");
    EXPECT_EQ(field.rfind("t,x,u\n", 0), 0u);
    EXPECT_EQ(std::count(field.begin(), field.end(), '\n'), 1 + 2 * 101);
    EXPECT_EQ(field.find('\r'), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "solve.meta.json"));
    EXPECT_FALSE(fs::exists(dir / "solve.json.tmp"));
}

TEST(Run, ReportsAreByteIdentical) {
    const std::string doc = R"J({"experiment": "estimates", "problem": {"q": "delta(0.5)", "u0": "x*(1-x)"},
                                "numerics": {"spatial_points": 501, "time_points": 201, "n_max": 20}})J";
    std::string first;
    for (int threads : {1, 3}) {
        const fs::path dir = scratch("determinism_" + std::to_string(threads));
        RunConfig c = parse_config(doc);
        c.output.directory = dir.string();
        c.numerics.threads = threads;
        ASSERT_EQ(run(c).exit_code, kExitOk);
        const std::string text = slurp(dir / "estimates.json");
        if (first.empty()) {
            first = text;
        } else {
            EXPECT_EQ(text, first);
        }
    }
    const auto j = nlohmann::json::parse(first);
    EXPECT_GE(j["result"]["estimates"].size(), 14u);
    EXPECT_FALSE(j.contains("started_utc"));
}

TEST(Run, ConsistencyCsvDecreasing) {
    const fs::path dir = scratch("consistency");
    RunConfig c = parse_config(R"J({"experiment": "consistency", "problem": {"q": "0.3"},
                                   "numerics": {"time_points": 201}, "regularization": {"epsilon_net": [0.25, 0.125, 0.0625]},
                                   "output": {"format": "csv"}})J");
    c.output.directory = dir.string();
    const RunResult r = run(c);
    EXPECT_EQ(r.exit_code, kExitOk) << r.summary;
    EXPECT_FALSE(fs::exists(dir / "consistency.json"));
    std::ifstream in(dir / "consistency.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("kind,label,epsilon,", 0), 0u);
    std::vector<double> e;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string col; std::getline(ss, col, ',');) cols.push_back(col);
        e.push_back(std::stod(cols.at(6)));
    }
    ASSERT_EQ(e.size(), 3u);
    EXPECT_GT(e[0], e[1]);
    EXPECT_GT(e[1], e[2]);
}

TEST(Run, VerdictFailureExitCode) {
    // a net spanning less than a decade cannot show anything
    const fs::path dir = scratch("verdict");
    RunConfig c = parse_config(R"J({"experiment": "existence", "problem": {"q": "delta(0.5)"},
                                   "numerics": {"time_points": 201}, "regularization": {"epsilon_net": [0.2, 0.15, 0.1, 0.05]}})J");
    c.output.directory = dir.string();
    const RunResult r = run(c);
    EXPECT_EQ(r.exit_code, kExitVerdict);
    const auto j = nlohmann::json::parse(slurp(dir / "existence.json"));
    EXPECT_EQ(j["status"], "verdict_failure");
    EXPECT_NE(j["result"]["experiment_report"]["verdict"].get<std::string>().find("inconclusive"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("cli");
    std::string out, err;
    EXPECT_EQ(cli({(dir / "missing.json").string()}, &out, &err), kExitConfig);
    EXPECT_NE(err.find("cannot read"), std::string::npos);

    const auto bad = write_config(dir, R"J({"numerics": {"spatial_points": 10}})J");
    EXPECT_EQ(cli({bad.string()}, &out, &err), kExitConfig);
    EXPECT_NE(err.find("spatial_points"), std::string::npos);

    const auto good = write_config(dir, R"J({"problem": {"q": "delta(0.5)"}, "numerics": {"spatial_points": 1001}})J");
    EXPECT_EQ(cli({good.string(), "--output", (dir / "out").string(), "--threads", "2"}, &out, &err), kExitOk);
    EXPECT_EQ(out.rfind("solve: 40 modes", 0), 0u);
    EXPECT_TRUE(fs::exists(dir / "out" / "solve.json"));

    EXPECT_EQ(cli({good.string(), "--threads", "0"}, &out, &err), kExitConfig);
    EXPECT_EQ(cli({}, &out, &err), kExitConfig);
    EXPECT_EQ(cli({"--help"}, &out, &err), kExitOk);
}

TEST(Config, SampleConfigsParseAndRoundTrip) {
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(SAMPLE_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        ++count;
        const RunConfig c = parse_config(slurp(entry.path()));
        EXPECT_EQ(c.stem(), entry.path().stem().string());
        EXPECT_TRUE(parse_config(serialize(c)) == c) << entry.path();
    }
    EXPECT_GE(count, 5u);
}
