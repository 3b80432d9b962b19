#ifndef STURM_HEAT_CONFIG_HPP
#define STURM_HEAT_CONFIG_HPP

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sturm_heat/errors.hpp"
#include "sturm_heat/expression.hpp"
#include "sturm_heat/regularization.hpp"
#include "sturm_heat/vws_experiments.hpp"

namespace sturm_heat {

struct KernelChoice {
    std::string kernel = "bump";  // bump | truncated_gaussian
    double sigma = 0.5;
    std::string label;            // defaults to the kernel name

    bool operator==(const KernelChoice&) const = default;

    Mollifier mollifier() const {
        return kernel == "bump" ? Mollifier::bump() : Mollifier::truncated_gaussian(sigma);
    }
};

struct ProblemConfig {
    std::string q = "0";
    std::string a = "1";
    std::string u0 = "sin(pi*x)";
    std::string f;  // empty: no source
    double T = 1.0;
    double a_floor = 1.0;
    std::optional<double> u0_second_norm;

    bool operator==(const ProblemConfig&) const = default;
};

struct NumericsConfig {
    std::size_t spatial_points = 2001;
    std::size_t time_points = 2001;
    int n_max = 40;
    double kernel_modes = 2.0;
    std::size_t max_points = 100001;
    int residual_times = 5;
    int threads = 1;

    bool operator==(const NumericsConfig&) const = default;
};

struct RegularizationConfig {
    double epsilon = 0.05;  // solve and estimates
    std::vector<double> epsilon_net = dyadic_net(3, 10);
    std::vector<KernelChoice> kernels{KernelChoice{}};
    bool self_test = false;  // uniqueness: compare kernel 1 with itself plus an eps^3 perturbation

    bool operator==(const RegularizationConfig&) const = default;
};

struct SolveConfig {
    std::vector<double> times{0.0, 0.1, 0.25, 0.5, 1.0};
    std::size_t x_points = 101;

    bool operator==(const SolveConfig&) const = default;
};

struct OutputConfig {
    std::string directory = ".";
    std::string format = "both";  // json | csv | both
    std::string name;             // file stem, defaults to the experiment

    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    std::string experiment = "solve";  // solve | estimates | existence | uniqueness | consistency
    ProblemConfig problem;
    NumericsConfig numerics;
    RegularizationConfig regularization;
    SolveConfig solve;
    OutputConfig output;

    bool operator==(const RunConfig&) const = default;

    std::string stem() const { return output.name.empty() ? experiment : output.name; }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) unknown.push_back(key);
    }
    if (unknown.empty()) return;
    std::string msg = "unknown key" + std::string(unknown.size() > 1 ? "s" : "") + " in " + where + ":";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
}

inline const json& section(const json& root, const char* name) {
    static const json empty = json::object();
    if (!root.contains(name)) return empty;
    const json& s = root.at(name);
    if (!s.is_object()) throw ConfigError(std::string("'") + name + "' must be an object");
    return s;
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

inline void require_range(double v, double lo, double hi, const std::string& what) {
    if (!(v >= lo && v <= hi)) {
        std::ostringstream msg;
        msg << what << " = " << v << " outside [" << lo << ", " << hi << "]";
        throw ConfigError(msg.str());
    }
}

}  // namespace detail

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"solve", "estimates", "existence", "uniqueness", "consistency"};
    return names;
}

/// Checks ranges, kernel names, arities and that every expression parses to an admissible spec.
inline void validate(const RunConfig& c) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
        throw ConfigError("unknown experiment '" + c.experiment + "'");
    }
    const auto& n = c.numerics;
    detail::require_range(static_cast<double>(n.spatial_points), 101, 100001, "numerics.spatial_points");
    detail::require_range(static_cast<double>(n.time_points), 2, 1000001, "numerics.time_points");
    detail::require_range(n.n_max, 1, static_cast<double>(n.spatial_points) / 4, "numerics.n_max");
    detail::require_range(n.kernel_modes, 0, 10, "numerics.kernel_modes");
    detail::require_range(static_cast<double>(n.max_points), static_cast<double>(n.spatial_points), 1000001,
                          "numerics.max_points");
    detail::require_range(n.residual_times, 1, 1000, "numerics.residual_times");
    detail::require_range(n.threads, 1, 1024, "numerics.threads");

    const auto& p = c.problem;
    if (!(p.T > 0.0) || !std::isfinite(p.T)) throw ConfigError("problem.T must be positive");
    if (!(p.a_floor > 0.0)) throw ConfigError("problem.a_floor must be positive");
    if (p.u0_second_norm && !(*p.u0_second_norm >= 0.0)) throw ConfigError("problem.u0_second_norm must be >= 0");
    validate_spec(parse_spec(p.q, 'x'), 0.0, 1.0);
    const DistributionSpec u0 = parse_spec(p.u0, 'x');
    validate_spec(u0, 0.0, 1.0);
    const std::function<bool(const DistributionSpec&)> has_dl2 = [&](const DistributionSpec& d) {
        if (std::holds_alternative<DerivativeOfL2>(d.kind)) return true;
        const auto* sum = std::get_if<SumOf>(&d.kind);
        return sum && std::any_of(sum->terms.begin(), sum->terms.end(), has_dl2);
    };
    if (has_dl2(u0)) throw ConfigError("problem.u0 may not contain dL2(...)");
    validate_spec(parse_spec(p.a, 't'), 0.0, p.T);
    parse_source(p.f);

    const auto& r = c.regularization;
    detail::require_range(r.epsilon, 1e-6, 1.0, "regularization.epsilon");
    if (r.epsilon < 1.0 / static_cast<double>(n.spatial_points - 1)) {
        throw ConfigError("regularization.epsilon is below the grid spacing; raise numerics.spatial_points");
    }
    if (r.kernels.empty()) throw ConfigError("regularization.kernels must not be empty");
    for (const auto& k : r.kernels) {
        if (k.kernel != "bump" && k.kernel != "truncated_gaussian") {
            throw ConfigError("unknown kernel '" + k.kernel + "' (bump or truncated_gaussian)");
        }
        if (!(k.sigma > 0.0)) throw ConfigError("kernel sigma must be positive");
    }
    const bool sweep = c.experiment == "existence" || c.experiment == "uniqueness" || c.experiment == "consistency";
    if (sweep) {
        RegularizationChoice probe;
        probe.epsilon_net = r.epsilon_net;
        probe.label = "regularization.epsilon_net";
        probe.validate(c.experiment == "consistency" ? 1 : 4);
    }
    if (c.experiment == "uniqueness") {
        if (r.self_test ? r.kernels.size() > 2 : r.kernels.size() != 2) {
            throw ConfigError("uniqueness requires two regularization choices");
        }
    } else if (r.self_test) {
        throw ConfigError("regularization.self_test applies to uniqueness only");
    }
    if (c.experiment == "consistency") {
        for (const auto& [text, var] : {std::pair{&p.q, 'x'}, std::pair{&p.a, 't'}, std::pair{&p.u0, 'x'}}) {
            if (parse_spec(*text, var).has_delta()) {
                throw ConfigError("consistency needs function-valued q, a and u0, got '" + *text + "'");
            }
        }
    }

    for (double t : c.solve.times) {
        if (!(t >= 0.0 && t <= p.T)) throw ConfigError("solve.times must lie in [0, T]");
    }
    detail::require_range(static_cast<double>(c.solve.x_points), 2, static_cast<double>(n.spatial_points),
                          "solve.x_points");
    if (c.output.format != "json" && c.output.format != "csv" && c.output.format != "both") {
        throw ConfigError("output.format must be json, csv or both");
    }
    if (c.output.name.find('/') != std::string::npos) throw ConfigError("output.name must be a plain file stem");
}

/// Parses a JSON configuration document, fills defaults and validates.
inline RunConfig parse_config(const std::string& text) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown(root, {"experiment", "problem", "numerics", "regularization", "solve", "output"}, "config");

    RunConfig c;
    detail::read(root, "experiment", c.experiment, "config");

    const json& p = detail::section(root, "problem");
    detail::reject_unknown(p, {"q", "a", "u0", "f", "T", "a_floor", "u0_second_norm"}, "problem");
    detail::read(p, "q", c.problem.q, "problem");
    detail::read(p, "a", c.problem.a, "problem");
    detail::read(p, "u0", c.problem.u0, "problem");
    detail::read(p, "f", c.problem.f, "problem");
    detail::read(p, "T", c.problem.T, "problem");
    detail::read(p, "a_floor", c.problem.a_floor, "problem");
    if (p.contains("u0_second_norm") && !p.at("u0_second_norm").is_null()) {
        double v = 0.0;
        detail::read(p, "u0_second_norm", v, "problem");
        c.problem.u0_second_norm = v;
    }

    const json& n = detail::section(root, "numerics");
    detail::reject_unknown(n, {"spatial_points", "time_points", "n_max", "kernel_modes", "max_points", "residual_times",
                               "threads"},
                           "numerics");
    detail::read(n, "spatial_points", c.numerics.spatial_points, "numerics");
    detail::read(n, "time_points", c.numerics.time_points, "numerics");
    detail::read(n, "n_max", c.numerics.n_max, "numerics");
    detail::read(n, "kernel_modes", c.numerics.kernel_modes, "numerics");
    detail::read(n, "max_points", c.numerics.max_points, "numerics");
    detail::read(n, "residual_times", c.numerics.residual_times, "numerics");
    detail::read(n, "threads", c.numerics.threads, "numerics");

    const json& r = detail::section(root, "regularization");
    detail::reject_unknown(r, {"epsilon", "epsilon_net", "kernels", "self_test"}, "regularization");
    detail::read(r, "epsilon", c.regularization.epsilon, "regularization");
    detail::read(r, "self_test", c.regularization.self_test, "regularization");
    if (r.contains("epsilon_net")) {
        const json& net = r.at("epsilon_net");
        if (net.is_object()) {
            detail::reject_unknown(net, {"first", "last"}, "regularization.epsilon_net");
            int first = 3, last = 10;
            detail::read(net, "first", first, "regularization.epsilon_net");
            detail::read(net, "last", last, "regularization.epsilon_net");
            if (first > last || first < 0 || last > 40) throw ConfigError("epsilon_net needs 0 <= first <= last <= 40");
            c.regularization.epsilon_net = dyadic_net(first, last);
        } else {
            detail::read(r, "epsilon_net", c.regularization.epsilon_net, "regularization");
        }
    }
    if (r.contains("kernels")) {
        const json& ks = r.at("kernels");
        if (!ks.is_array()) throw ConfigError("regularization.kernels must be an array");
        c.regularization.kernels.clear();
        for (const auto& k : ks) {
            KernelChoice choice;
            if (k.is_string()) {
                choice.kernel = k.get<std::string>();
            } else if (k.is_object()) {
                detail::reject_unknown(k, {"kernel", "sigma", "label"}, "regularization.kernels[]");
                detail::read(k, "kernel", choice.kernel, "regularization.kernels[]");
                detail::read(k, "sigma", choice.sigma, "regularization.kernels[]");
                detail::read(k, "label", choice.label, "regularization.kernels[]");
            } else {
                throw ConfigError("regularization.kernels entries must be names or objects");
            }
            c.regularization.kernels.push_back(choice);
        }
    }

    const json& s = detail::section(root, "solve");
    detail::reject_unknown(s, {"times", "x_points"}, "solve");
    detail::read(s, "times", c.solve.times, "solve");
    detail::read(s, "x_points", c.solve.x_points, "solve");

    const json& o = detail::section(root, "output");
    detail::reject_unknown(o, {"directory", "format", "name"}, "output");
    detail::read(o, "directory", c.output.directory, "output");
    detail::read(o, "format", c.output.format, "output");
    detail::read(o, "name", c.output.name, "output");

    validate(c);
    return c;
}

/// Full JSON form with every default written out.
inline nlohmann::json to_json(const RunConfig& c) {
    using detail::json;
    json kernels = json::array();
    for (const auto& k : c.regularization.kernels) {
        kernels.push_back({{"kernel", k.kernel}, {"sigma", k.sigma}, {"label", k.label}});
    }
    json problem = {{"q", c.problem.q}, {"a", c.problem.a},          {"u0", c.problem.u0},
                    {"f", c.problem.f}, {"T", c.problem.T},          {"a_floor", c.problem.a_floor},
                    {"u0_second_norm", nullptr}};
    if (c.problem.u0_second_norm) problem["u0_second_norm"] = *c.problem.u0_second_norm;
    return {
        {"experiment", c.experiment},
        {"problem", problem},
        {"numerics",
         {{"spatial_points", c.numerics.spatial_points},
          {"time_points", c.numerics.time_points},
          {"n_max", c.numerics.n_max},
          {"kernel_modes", c.numerics.kernel_modes},
          {"max_points", c.numerics.max_points},
          {"residual_times", c.numerics.residual_times},
          {"threads", c.numerics.threads}}},
        {"regularization",
         {{"epsilon", c.regularization.epsilon},
          {"epsilon_net", c.regularization.epsilon_net},
          {"kernels", kernels},
          {"self_test", c.regularization.self_test}}},
        {"solve", {{"times", c.solve.times}, {"x_points", c.solve.x_points}}},
        {"output", {{"directory", c.output.directory}, {"format", c.output.format}, {"name", c.output.name}}},
    };
}

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace sturm_heat

#endif
