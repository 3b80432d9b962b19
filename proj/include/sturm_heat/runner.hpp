#ifndef STURM_HEAT_RUNNER_HPP
#define STURM_HEAT_RUNNER_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sturm_heat/config.hpp"
#include "sturm_heat/estimates.hpp"
#include "sturm_heat/heat_spectral.hpp"
#include "sturm_heat/vws_experiments.hpp"

namespace sturm_heat {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitVerdict = 4 };

struct RunResult {
    int exit_code = kExitOk;
    std::string summary;  // one line
    nlohmann::json report;
    std::vector<std::string> files;  // written artifacts
};

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace detail {

using nlohmann::json;

/// JSON has no infinities: non-finite values become strings.
inline json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline std::string csv_number(double v) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(17) << v;
    return s.str();
}

inline std::string csv_text(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline bool is_function(const DistributionSpec& s) {
    if (std::holds_alternative<SmoothData>(s.kind) || std::holds_alternative<BoundedFunction>(s.kind)) return true;
    if (const auto* sum = std::get_if<SumOf>(&s.kind)) {
        return std::all_of(sum->terms.begin(), sum->terms.end(), [](const auto& t) { return is_function(t); });
    }
    return false;
}

inline ProblemSpec problem_spec(const RunConfig& c) {
    ProblemSpec p;
    p.q = parse_spec(c.problem.q, 'x');
    p.a = parse_spec(c.problem.a, 't');
    p.u0 = parse_spec(c.problem.u0, 'x');
    p.f = parse_source(c.problem.f);
    p.T = c.problem.T;
    p.a_floor = c.problem.a_floor;
    return p;
}

inline NumericsOptions numerics_options(const RunConfig& c) {
    NumericsOptions o;
    o.spatial_points = c.numerics.spatial_points;
    o.time_points = c.numerics.time_points;
    o.n_max = c.numerics.n_max;
    o.kernel_modes = c.numerics.kernel_modes;
    o.max_points = c.numerics.max_points;
    o.threads = c.numerics.threads;
    return o;
}

inline RegularizationChoice choice_of(const RunConfig& c, std::size_t i) {
    const KernelChoice& k = c.regularization.kernels.at(i);
    RegularizationChoice r;
    r.mollifier = k.mollifier();
    r.epsilon_net = c.regularization.epsilon_net;
    r.label = k.label.empty() ? k.kernel : k.label;
    return r;
}

/// Function-valued data are sampled; distributions are mollified at the configured epsilon.
inline RegularizedProblem prepare(const ProblemSpec& p, const RunConfig& c, Diagnostics& diag) {
    const Grid g = Grid::unit(c.numerics.spatial_points);
    const Mollifier kernel = c.regularization.kernels.front().mollifier();
    const double eps = c.regularization.epsilon;
    const NumericsOptions opt = numerics_options(c);
    RegularizedProblem r = regularize_problem(p, kernel, eps, g, opt, &diag);
    auto eval = [](const DistributionSpec& s) { return [&s](double x) { return s.evaluate(x); }; };
    if (is_function(p.q)) r.potential = potential_from_samples(SampledFunction::sample(g, eval(p.q)));
    if (is_function(p.u0)) r.u0 = SampledFunction::sample(g, eval(p.u0));
    if (is_function(p.a)) {
        r.time_coeff = accumulate(SampledFunction::sample(Grid(0.0, p.T, opt.time_points), eval(p.a)), p.a_floor);
    }
    return r;
}

inline json warnings_json(const Diagnostics& d) {
    json w = json::array();
    for (const auto& s : d.warnings) w.push_back(s);
    return w;
}

inline json record_json(const EpsilonRecord& r) {
    json j = {{"epsilon", r.epsilon},
              {"grid_points", r.grid_points},
              {"sup_u", number(r.sup_u)},
              {"sup_ut", number(r.sup_ut)},
              {"difference", number(r.difference)},
              {"mass_term", number(r.mass_term)},
              {"q_sup", number(r.q_sup)},
              {"a_prime_sup", number(r.a_prime_sup)}};
    if (!r.ok()) j["failure"] = r.failure;
    return j;
}

inline json net_json(const std::optional<ModerateNet>& n) {
    if (!n) return nullptr;
    return {{"N", n->N},
            {"C", number(n->C)},
            {"slope", number(n->slope)},
            {"residual", number(n->residual)},
            {"identically_small", n->identically_small},
            {"short_span", n->short_span}};
}

inline json experiment_json(const ExperimentReport& r) {
    json recs = json::array();
    for (const auto& rec : r.records) recs.push_back(record_json(rec));
    json j = {{"kind", r.kind}, {"label", r.label}, {"records", recs}, {"pass", r.pass},
              {"verdict", r.verdict}, {"slope", number(r.slope)}, {"notes", r.notes}};
    if (r.kind == "existence") {
        j["u_net"] = net_json(r.u_net);
        j["ut_net"] = net_json(r.ut_net);
    }
    if (r.negligibility) {
        json orders = json::array();
        for (const auto& o : r.negligibility->orders) {
            orders.push_back({{"order", o.order},
                              {"pass", o.pass},
                              {"constant", number(o.constant)},
                              {"log_residual", number(o.log_residual)}});
        }
        j["negligibility"] = {{"orders", orders},
                              {"slope", number(r.negligibility->slope)},
                              {"identically_zero", r.negligibility->identically_zero}};
    }
    return j;
}

inline std::string experiment_csv(const ExperimentReport& r) {
    std::ostringstream s;
    s << "kind,label,epsilon,grid_points,sup_u,sup_ut,difference,mass_term,q_sup,a_prime_sup,failure\n";
    for (const auto& rec : r.records) {
        s << r.kind << ',' << csv_text(r.label) << ',' << csv_number(rec.epsilon) << ',' << rec.grid_points << ','
          << csv_number(rec.sup_u) << ',' << csv_number(rec.sup_ut) << ',' << csv_number(rec.difference) << ','
          << csv_number(rec.mass_term) << ',' << csv_number(rec.q_sup) << ',' << csv_number(rec.a_prime_sup) << ','
          << csv_text(rec.failure) << '\n';
    }
    return s.str();
}

struct Artifacts {
    json report;
    std::vector<std::pair<std::string, std::string>> csv;  // (suffix, content)
    int exit_code = kExitOk;
    std::string summary;
};

inline Artifacts run_solve(const RunConfig& c, const ProblemSpec& p) {
    Diagnostics diag;
    const RegularizedProblem r = prepare(p, c, diag);
    const SpectralSolution sol = assemble(r.potential, r.time_coeff, r.u0, c.numerics.n_max, p.f, c.numerics.threads);
    Artifacts out;

    json eig = json::array();
    std::ostringstream eig_csv;
    eig_csv << "n,lambda\n";
    for (std::size_t n = 0; n < sol.modes(); ++n) {
        eig.push_back((*sol.pairs)[n].lambda);
        eig_csv << n + 1 << ',' << csv_number((*sol.pairs)[n].lambda) << '\n';
    }

    const Grid xg = Grid::unit(c.solve.x_points);
    std::ostringstream field;
    field << "t,x,u\n";
    json snapshots = json::array();
    for (double t : c.solve.times) {
        const SampledFunction u = evolve(sol, t);
        snapshots.push_back({{"t", t}, {"l2_norm", number(l2_norm(u))}, {"sup_norm", number(sup_norm(u))}});
        for (std::size_t i = 0; i < xg.size(); ++i) {
            field << csv_number(t) << ',' << csv_number(xg[i]) << ','
                  << csv_number(interpolate_linear(u.grid, u.values, xg[i])) << '\n';
        }
    }

    json residuals = json::array();
    bool residual_ok = true;
    if (!sol.has_source()) {
        const int K = c.numerics.residual_times;
        for (int k = 0; k < K; ++k) {
            const ResidualCheck rc = pde_residual(sol, p.T * (k + 0.5) / K);
            residual_ok = residual_ok && rc.pass;
            residuals.push_back(
                {{"t", rc.t}, {"residual", number(rc.residual)}, {"bound", number(rc.bound)}, {"pass", rc.pass}});
        }
    }
    out.report = {{"eigenvalues", eig},
                  {"projection_tail", number(sol.tail)},
                  {"snapshots", snapshots},
                  {"residual_checks", residuals},
                  {"a_floor_added", r.floor_added},
                  {"warnings", warnings_json(diag)}};
    out.csv = {{"_field.csv", field.str()}, {"_eigenvalues.csv", eig_csv.str()}};
    out.exit_code = residual_ok ? kExitOk : kExitVerdict;
    std::ostringstream s;
    s << "solve: " << sol.modes() << " modes, lambda_1 = " << std::setprecision(10) << (*sol.pairs)[0].lambda
      << (sol.has_source() ? "" : residual_ok ? ", residual checks pass" : ", residual check FAILED");
    out.summary = s.str();
    return out;
}

inline Artifacts run_estimates(const RunConfig& c, const ProblemSpec& p) {
    Diagnostics diag;
    const RegularizedProblem r = prepare(p, c, diag);
    const SpectralSolution sol = assemble(r.potential, r.time_coeff, r.u0, c.numerics.n_max, p.f, c.numerics.threads);
    const auto reports = verify_all(sol, r.u0, c.problem.u0_second_norm, c.problem.q + " | " + c.problem.u0);
    Artifacts out;
    json arr = json::array();
    std::ostringstream csv;
    csv << "id,lhs,rhs,ratio,t_at_max,skipped,note\n";
    double worst = 0.0;
    bool ok = true;
    for (const auto& e : reports) {
        arr.push_back({{"id", e.id},
                       {"lhs", number(e.lhs)},
                       {"rhs", number(e.rhs)},
                       {"ratio", number(e.ratio)},
                       {"t_at_max", e.t_at_max},
                       {"inputs_digest", e.inputs_digest},
                       {"skipped", e.skipped},
                       {"note", e.note}});
        csv << e.id << ',' << csv_number(e.lhs) << ',' << csv_number(e.rhs) << ',' << csv_number(e.ratio) << ','
            << csv_number(e.t_at_max) << ',' << (e.skipped ? 1 : 0) << ',' << csv_text(e.note) << '\n';
        if (!e.skipped) {
            ok = ok && std::isfinite(e.ratio) && e.ratio <= 100.0;
            worst = std::max(worst, e.ratio);
        }
    }
    out.report = {{"estimates", arr}, {"warnings", warnings_json(diag)}};
    out.csv = {{".csv", csv.str()}};
    out.exit_code = ok ? kExitOk : kExitVerdict;
    std::ostringstream s;
    s << "estimates: " << reports.size() << " reports, max ratio " << std::setprecision(6) << worst
      << (ok ? "" : " (ratio above 100 or not finite)");
    out.summary = s.str();
    return out;
}

inline Artifacts run_sweep(const RunConfig& c, const ProblemSpec& p) {
    const NumericsOptions opt = numerics_options(c);
    ExperimentReport rep;
    if (c.experiment == "existence") {
        rep = run_existence(p, choice_of(c, 0), opt);
    } else if (c.experiment == "consistency") {
        rep = run_consistency(p, choice_of(c, 0), opt);
    } else if (c.regularization.self_test) {
        const auto a = choice_of(c, 0);
        rep = run_uniqueness(p, a, a, opt, [](double e, double x) {
            return e * e * e * std::sin(std::numbers::pi * x);
        });
        rep.label += " (eps^3 self-test)";
    } else {
        rep = run_uniqueness(p, choice_of(c, 0), choice_of(c, 1), opt);
    }
    Artifacts out;
    out.report = {{"experiment_report", experiment_json(rep)}};
    out.csv = {{".csv", experiment_csv(rep)}};
    const bool failed = std::any_of(rep.records.begin(), rep.records.end(), [](const auto& r) { return !r.ok(); });
    out.exit_code = failed ? kExitSolver : rep.pass ? kExitOk : kExitVerdict;
    out.summary = c.experiment + " [" + rep.label + "]: " + rep.verdict;
    return out;
}

}  // namespace detail

struct RunOptions {
    bool write_sidecar = true;  // timestamps and runtime go to <stem>.meta.json
};

/// Runs one configured experiment and writes its artifacts into config.output.directory.
inline RunResult run(const RunConfig& config, const RunOptions& options = {}) {
    using detail::json;
    const auto started = std::chrono::system_clock::now();
    const auto clock0 = std::chrono::steady_clock::now();
    RunResult result;
    detail::Artifacts art;
    json echo = to_json(config);
    // execution settings stay out of the payload so reports compare byte for byte
    echo["numerics"].erase("threads");
    echo["output"].erase("directory");
    json payload = {{"schema_version", 1}, {"experiment", config.experiment}, {"config", echo}};
    try {
        const ProblemSpec p = detail::problem_spec(config);
        if (config.experiment == "solve") {
            art = detail::run_solve(config, p);
        } else if (config.experiment == "estimates") {
            art = detail::run_estimates(config, p);
        } else {
            art = detail::run_sweep(config, p);
        }
        payload["status"] = art.exit_code == kExitOk ? "ok" : art.exit_code == kExitSolver ? "solver_failure" : "verdict_failure";
        payload["summary"] = art.summary;
        payload["result"] = art.report;
    } catch (const ConfigError&) {
        throw;
    } catch (const SolverError& e) {
        art.exit_code = kExitSolver;
        art.summary = config.experiment + ": solver failure: " + e.what();
        payload["status"] = "solver_failure";
        payload["summary"] = art.summary;
        payload["error"] = e.what();
    }
    // the config is already validated, so anything else is a bug and propagates
    result.exit_code = art.exit_code;
    result.summary = art.summary;
    result.report = payload;

    namespace fs = std::filesystem;
    const fs::path dir = config.output.directory;
    fs::create_directories(dir);
    const std::string stem = config.stem();
    if (config.output.format != "csv") {
        write_atomic(dir / (stem + ".json"), payload.dump(2) + "\n");
        result.files.push_back((dir / (stem + ".json")).string());
    }
    if (config.output.format != "json") {
        for (const auto& [suffix, content] : art.csv) {
            write_atomic(dir / (stem + suffix), content);
            result.files.push_back((dir / (stem + suffix)).string());
        }
    }
    if (options.write_sidecar) {
        const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
        const std::time_t tt = std::chrono::system_clock::to_time_t(started);
        std::ostringstream ts;
        ts << std::put_time(std::gmtime(&tt), "%Y-%m-%dT%H:%M:%SZ");
        const json meta = {{"started_utc", ts.str()}, {"runtime_seconds", secs}, {"threads", config.numerics.threads}};
        write_atomic(dir / (stem + ".meta.json"), meta.dump(2) + "\n");
        result.files.push_back((dir / (stem + ".meta.json")).string());
    }
    return result;
}

}  // namespace sturm_heat

#endif
