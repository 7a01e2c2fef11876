#pragma once

// Config-driven experiment runner. One JSON document describes the manifold,
// the family, the submanifolds, the experiment and its sampling budget; the
// runner produces a summary JSON (identical bytes for identical config and
// seed, apart from the wall-time field) plus optional CSV artifacts.

#include <chrono>
#include <functional>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>

#include "kinlab/family_models.hpp"
#include "kinlab/kinematic.hpp"
#include "kinlab/serialize.hpp"
#include "kinlab/submanifold.hpp"
#include "kinlab/verify.hpp"

namespace kinlab {

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_path, const std::string& message)
        : std::runtime_error(field_path + ": " + message), field(std::move(field_path)) {}
};

struct RunOutput {
    int exit_code = 0;
    json summary;
    std::map<std::string, std::string> files;  // filename -> contents
};

namespace cfg {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(path + "." + key, "missing required field");
    return j.at(key);
}

inline double require_positive(const json& j, const std::string& key, const std::string& path,
                               double fallback = std::numeric_limits<double>::quiet_NaN()) {
    double v = fallback;
    if (j.contains(key)) {
        if (!j.at(key).is_number()) throw ConfigError(path + "." + key, "must be a number");
        v = j.at(key).get<double>();
    }
    if (std::isnan(v)) throw ConfigError(path + "." + key, "missing required field");
    if (!(v > 0.0)) throw ConfigError(path + "." + key, "must be positive");
    return v;
}

template <int N>
Vec<N> vector_field(const json& j, const std::string& key, const std::string& path) {
    const json& arr = require(j, key, path);
    if (!arr.is_array() || arr.size() != N)
        throw ConfigError(path + "." + key, "must be an array of " + std::to_string(N) + " numbers");
    Vec<N> v;
    for (int i = 0; i < N; ++i) v[i] = arr.at(i).get<double>();
    return v;
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// Submanifold specs from config.

template <int N>
DiscreteSubmanifold<N> submanifold_from_json(const json& spec, const std::string& path) {
    std::string type = spec.value("type", "geodesic");
    if (type == "geodesic") {
        GeodesicSegmentSpec<N> g;
        g.start = TorusPoint<N>(cfg::vector_field<N>(spec, "start", path));
        g.direction = cfg::vector_field<N>(spec, "direction", path);
        if (g.direction.norm() == 0.0) throw ConfigError(path + ".direction", "must be nonzero");
        g.length = cfg::require_positive(spec, "length", path);
        int res = spec.value("resolution", std::max(2, int(std::ceil(g.length / 0.15))));
        if (res < 2) throw ConfigError(path + ".resolution", "must be >= 2");
        return discretize(g, res);
    }
    if (type == "patch") {
        if constexpr (N == 3) {
            PlanePatchSpec<3> p;
            p.origin = TorusPoint<3>(cfg::vector_field<3>(spec, "origin", path));
            p.span_u = cfg::vector_field<3>(spec, "span_u", path);
            p.span_v = cfg::vector_field<3>(spec, "span_v", path);
            p.len_u = cfg::require_positive(spec, "len_u", path);
            p.len_v = cfg::require_positive(spec, "len_v", path);
            int ru = spec.value("resolution_u", std::max(2, int(std::ceil(p.len_u / 0.2))));
            int rv = spec.value("resolution_v", std::max(2, int(std::ceil(p.len_v / 0.2))));
            return discretize(p, ru, rv);
        }
        throw ConfigError(path + ".type", "patch submanifolds require manifold t3");
    }
    throw ConfigError(path + ".type", "unknown submanifold type '" + type + "'");
}

template <int N>
DiscreteSubmanifold<N> named_submanifold(const json& config, const std::string& name) {
    const json& subs = cfg::require(config, "submanifolds", "config");
    if (!subs.contains(name))
        throw ConfigError("config.submanifolds." + name, "referenced submanifold not defined");
    return submanifold_from_json<N>(subs.at(name), "config.submanifolds." + name);
}

// ---------------------------------------------------------------------------
// Family resolution.

template <int N>
FamilySpec<N> family_from_json(json& family_json) {
    int per_axis = family_json.value("charts_per_axis", default_grid_per_axis(N));
    double scale = family_json.value("chart_scale", default_chart_scale(N));
    if (per_axis < 2) throw ConfigError("config.family.charts_per_axis", "must be >= 2");
    if (!(scale > 0.0) || !(4.0 * scale < 0.5))
        throw ConfigError("config.family.chart_scale", "must satisfy 0 < 4*scale < 1/2");
    double radius = -1.0;
    if (family_json.contains("radius") && family_json.at("radius").is_number()) {
        radius = family_json.at("radius").get<double>();
        if (!(radius > 0.0)) throw ConfigError("config.family.radius", "must be positive");
    } else if (family_json.contains("radius") && family_json.at("radius") != "auto") {
        throw ConfigError("config.family.radius", "must be a positive number or \"auto\"");
    }
    double flow_step = family_json.value("flow_step", 1e-2);
    double fd_step = family_json.value("fd_step", 1e-5);
    FamilySpec<N> spec;
    try {
        spec = make_grid_family<N>(per_axis, scale, radius, flow_step, fd_step);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config.family", e.what());
    }
    // resolve into the config so summaries are self-describing
    family_json = to_json(spec, per_axis, scale);
    return spec;
}

// ---------------------------------------------------------------------------
// Normalization: fill defaults, resolve "auto" values, normalize shapes.

inline json normalize_config(json config) {
    if (!config.is_object()) throw ConfigError("config", "top level must be a JSON object");
    std::string manifold = cfg::require(config, "manifold", "config").get<std::string>();
    if (manifold != "t2" && manifold != "t3")
        throw ConfigError("config.manifold", "must be \"t2\" or \"t3\"");

    if (!config.contains("experiment")) throw ConfigError("config.experiment", "missing");
    if (config.at("experiment").is_string())
        config["experiment"] = json{{"name", config.at("experiment").get<std::string>()}};
    if (!config.at("experiment").contains("name"))
        throw ConfigError("config.experiment.name", "missing experiment name");

    json& sampling = config["sampling"];
    if (!sampling.is_object()) sampling = json::object();
    if (!sampling.contains("num_samples")) sampling["num_samples"] = 10000;
    if (!sampling.contains("seed")) sampling["seed"] = 1;
    if (!sampling.at("num_samples").is_number_integer() ||
        sampling.at("num_samples").get<std::int64_t>() < 1)
        throw ConfigError("config.sampling.num_samples", "must be a positive integer");

    json& output = config["output"];
    if (!output.is_object()) output = json::object();
    if (!output.contains("dir")) output["dir"] = ".";
    if (!output.contains("csv")) output["csv"] = false;

    if (!config.contains("family")) config["family"] = json{{"kind", "constructed"}};
    if (!config.at("family").contains("kind")) config["family"]["kind"] = "constructed";
    std::string kind = config.at("family").at("kind").get<std::string>();
    if (kind != "constructed" && kind != "translation")
        throw ConfigError("config.family.kind", "must be \"constructed\" or \"translation\"");
    if (kind == "translation" && manifold != "t2")
        throw ConfigError("config.family.kind", "the translation family lives on t2");
    if (!config.contains("submanifolds")) config["submanifolds"] = json::object();
    return config;
}

// ---------------------------------------------------------------------------
// Experiment implementations.

namespace detail {

inline std::string csv_samples(const SampleLog& log) {
    std::ostringstream os;
    os << "sample,count,degenerate\n";
    for (std::size_t i = 0; i < log.counts.size(); ++i)
        os << i << "," << log.counts[i] << "," << int(log.degenerate[i]) << "\n";
    return os.str();
}

inline std::string csv_convergence(const SampleLog& log, double log_scale) {
    std::ostringstream os;
    os.precision(17);
    os << "samples,estimate\n";
    double sum = 0.0;
    std::size_t next = 1;
    for (std::size_t i = 0; i < log.counts.size(); ++i) {
        sum += log.counts[i];
        if (i + 1 == next || i + 1 == log.counts.size()) {
            double mean = sum / double(i + 1);
            os << (i + 1) << "," << (mean == 0.0 ? 0.0 : std::exp(log_scale + std::log(mean)))
               << "\n";
            next *= 2;
        }
    }
    return os.str();
}

template <int N, class Family>
json run_total_integral(const json& config, const Family& family, RunOutput& out, int threads) {
    auto v = named_submanifold<N>(config, config.at("experiment").value("V", "V"));
    auto w = named_submanifold<N>(config, config.at("experiment").value("W", "W"));
    std::int64_t m = config.at("sampling").at("num_samples").get<std::int64_t>();
    std::uint64_t seed = config.at("sampling").at("seed").get<std::uint64_t>();
    bool csv = config.at("output").at("csv").get<bool>();
    SampleLog log;
    EstimateReport rep =
        mc_total_intersections<N>(family, v, w, m, seed, threads, csv ? &log : nullptr);
    if (csv) {
        out.files["samples.csv"] = csv_samples(log);
        out.files["convergence.csv"] = csv_convergence(log, rep.log_scale);
    }
    json res = to_json(rep);
    res["vol_v"] = v.total_volume;
    res["vol_w"] = w.total_volume;
    return res;
}

inline json run_translation_example(const json& config, RunOutput& out, int threads) {
    const json& subs = cfg::require(config, "submanifolds", "config");
    std::string iname = config.at("experiment").value("I", "I");
    std::string jname = config.at("experiment").value("J", "J");
    for (const auto& nm : {iname, jname}) {
        if (!subs.contains(nm))
            throw ConfigError("config.submanifolds." + nm, "referenced submanifold not defined");
        if (subs.at(nm).value("type", "geodesic") != "geodesic")
            throw ConfigError("config.submanifolds." + nm,
                              "translation-example expects geodesic segments");
    }
    auto i_mesh = named_submanifold<2>(config, iname);
    auto j_mesh = named_submanifold<2>(config, jname);
    Vec<2> di = cfg::vector_field<2>(subs.at(iname), "direction", "config.submanifolds." + iname);
    Vec<2> dj = cfg::vector_field<2>(subs.at(jname), "direction", "config.submanifolds." + jname);
    double theta = std::atan2(dj[1], dj[0]) - std::atan2(di[1], di[0]);

    std::int64_t m = config.at("sampling").at("num_samples").get<std::int64_t>();
    std::uint64_t seed = config.at("sampling").at("seed").get<std::uint64_t>();
    bool csv = config.at("output").at("csv").get<bool>();
    SampleLog log;
    EstimateReport rep = mc_total_intersections<2>(TranslationFamily{}, i_mesh, j_mesh, m, seed,
                                                   threads, csv ? &log : nullptr);
    if (csv) {
        out.files["samples.csv"] = csv_samples(log);
        out.files["convergence.csv"] = csv_convergence(log, rep.log_scale);
    }
    double oracle = translation_family_oracle(theta, i_mesh.total_volume, j_mesh.total_volume);
    json res;
    res["report"] = to_json(rep);
    res["theta"] = theta;
    res["oracle"] = oracle;
    res["absolute_error"] = std::abs(rep.estimate - oracle);
    return res;
}

template <int N, class Family>
json run_fiber_integral(const json& config, const Family& family, RunOutput& out, int threads) {
    const json& exp = config.at("experiment");
    int k = exp.value("k", 1);
    if (k < 0 || k > N) throw ConfigError("config.experiment.k", "must lie in [0, n]");
    double epsilon = exp.value("epsilon", 0.02);
    if (!(epsilon > 0.0) || epsilon >= 0.5)
        throw ConfigError("config.experiment.epsilon", "must lie in (0, 1/2)");
    int pairs = exp.value("pairs", 1);
    std::string integrand_name = exp.value("integrand", "eta");
    FiberIntegrand integrand = FiberIntegrand::Eta;
    if (integrand_name == "sin-angle") integrand = FiberIntegrand::SinAngle;
    else if (integrand_name == "one") integrand = FiberIntegrand::One;
    else if (integrand_name != "eta")
        throw ConfigError("config.experiment.integrand", "must be eta | sin-angle | one");

    std::int64_t m = config.at("sampling").at("num_samples").get<std::int64_t>();
    std::uint64_t seed = config.at("sampling").at("seed").get<std::uint64_t>();
    json results = json::array();
    std::ostringstream csv;
    csv.precision(17);
    csv << "pair,epsilon,estimate,std_error,acceptance_rate\n";
    for (int p = 0; p < pairs; ++p) {
        Philox rng(substream(seed, 0xF1BE00 + p), 0);
        auto sp = random_plane<N>(rng, random_point<N>(rng), k);
        auto sq = random_plane<N>(rng, random_point<N>(rng), N - k);
        EstimateReport full =
            fiber_integral_estimate<N>(family, sp, sq, epsilon, m, substream(seed, 2 * p), threads,
                                       integrand);
        EstimateReport half =
            fiber_integral_estimate<N>(family, sp, sq, epsilon / 2.0, m,
                                       substream(seed, 2 * p + 1), threads, integrand);
        double gap = std::abs(full.estimate - half.estimate);
        double sigma = 3.0 * std::hypot(full.std_error, half.std_error);
        results.push_back(json{{"pair", p},
                               {"estimate", to_json(full)},
                               {"estimate_half_eps", to_json(half)},
                               {"halving_consistent", gap <= std::max(sigma, 1e-12)}});
        for (const auto& [eps, rep] : {std::pair{epsilon, full}, {epsilon / 2.0, half}})
            csv << p << "," << eps << "," << rep.estimate << "," << rep.std_error << ","
                << rep.acceptance_rate << "\n";
    }
    if (config.at("output").at("csv").get<bool>()) out.files["fiber.csv"] = csv.str();
    return json{{"pairs", results}};
}

template <int N, class Family>
json run_empirical_c(const json& config, const Family& family, RunOutput& out, int threads) {
    const json& exp = config.at("experiment");
    std::vector<std::pair<DiscreteSubmanifold<N>, DiscreteSubmanifold<N>>> pairs;
    std::vector<double> volume_products;
    std::uint64_t seed = config.at("sampling").at("seed").get<std::uint64_t>();

    if (exp.contains("pairs")) {
        for (const auto& pr : exp.at("pairs")) {
            if (!pr.is_array() || pr.size() != 2)
                throw ConfigError("config.experiment.pairs", "each entry must be [V, W] names");
            pairs.emplace_back(named_submanifold<N>(config, pr.at(0).get<std::string>()),
                               named_submanifold<N>(config, pr.at(1).get<std::string>()));
        }
    } else if constexpr (N == 2) {
        int num_pairs = exp.value("num_pairs", 50);
        double min_len = exp.value("min_length", 0.35);
        double max_len = exp.value("max_length", 1.4);
        if (num_pairs < 2) throw ConfigError("config.experiment.num_pairs", "must be >= 2");
        if (!(min_len > 0.0) || !(max_len > min_len))
            throw ConfigError("config.experiment.min_length", "need 0 < min_length < max_length");
        Philox rng(substream(seed, 0xCE0123), 0);
        for (int p = 0; p < num_pairs; ++p) {
            auto seg = [&](double len) {
                GeodesicSegmentSpec<2> s;
                s.start = random_point<2>(rng);
                double ang = 2.0 * M_PI * rng.next_double();
                s.direction = Vec<2>(std::cos(ang), std::sin(ang));
                s.length = len;
                return discretize(s, std::max(2, int(std::ceil(len / 0.15))));
            };
            double li = min_len + (max_len - min_len) * rng.next_double();
            double lj = min_len + (max_len - min_len) * rng.next_double();
            pairs.emplace_back(seg(li), seg(lj));
        }
    } else {
        throw ConfigError("config.experiment.pairs",
                          "generated geodesic pairs are only available on t2");
    }
    for (auto& pr : pairs)
        volume_products.push_back(pr.first.total_volume * pr.second.total_volume);

    std::int64_t m = config.at("sampling").at("num_samples").get<std::int64_t>();
    RatioReport report = empirical_C<N>(family, pairs, m, seed, threads);

    if (config.at("output").at("csv").get<bool>()) {
        std::ostringstream os;
        os.precision(17);
        os << "pair_id,ratio,estimate,std_error,volume_product\n";
        for (const auto& e : report.ratios)
            os << e.pair_id << "," << e.ratio << "," << e.estimate << "," << e.std_error << ","
               << volume_products[e.pair_id] << "\n";
        out.files["ratios.csv"] = os.str();
    }
    json res = to_json(report);
    res["volume_products"] = volume_products;
    return res;
}

template <int N>
json run_verify(const json& config, const FamilySpec<N>& spec, RunOutput& out, int threads) {
    (void)threads;
    const json& exp = config.at("experiment");
    int trials = exp.value("trials", 200);
    int identity_trials = exp.value("identity_trials", 1000);
    std::uint64_t seed = config.at("sampling").at("seed").get<std::uint64_t>();

    std::vector<SuiteReport> suites;
    suites.push_back(suite_evaluation_submersion(spec, trials, seed));
    suites.push_back(suite_plane_transitivity(spec, std::min(trials, 100), seed));
    suites.push_back(suite_solution_tangent_constraint(spec, std::min(trials, 50), seed));
    suites.push_back(suite_graph_projection_identity(identity_trials, seed));
    suites.push_back(suite_density_ratio_agreement(spec, std::min(trials, 200), seed));

    bool all_passed = true;
    json arr = json::array();
    for (const auto& s : suites) {
        all_passed = all_passed && s.passed();
        arr.push_back(to_json(s));
    }
    if (!all_passed) out.exit_code = 3;
    return json{{"suites", arr}, {"passed", all_passed}};
}

template <int N>
void run_typed(json& config, RunOutput& out, int threads) {
    std::string name = config.at("experiment").at("name").get<std::string>();
    std::string kind = config.at("family").at("kind").get<std::string>();

    if (name == "translation-example") {
        if constexpr (N == 2) {
            config["family"] = json{{"kind", "translation"}};
            out.summary["results"] = run_translation_example(config, out, threads);
            return;
        } else {
            throw ConfigError("config.experiment.name", "translation-example requires t2");
        }
    }

    if (kind == "translation") {
        if constexpr (N == 2) {
            TranslationFamily family;
            if (name == "total-integral")
                out.summary["results"] = run_total_integral<2>(config, family, out, threads);
            else if (name == "fiber-integral")
                out.summary["results"] = run_fiber_integral<2>(config, family, out, threads);
            else if (name == "empirical-C")
                out.summary["results"] = run_empirical_c<2>(config, family, out, threads);
            else
                throw ConfigError("config.experiment.name",
                                  "unknown experiment '" + name + "' for the translation family");
            return;
        }
        throw ConfigError("config.family.kind", "the translation family lives on t2");
    }

    FamilySpec<N> spec = family_from_json<N>(config["family"]);
    ConstructedFamily<N> family(spec);
    if (name == "total-integral")
        out.summary["results"] = run_total_integral<N>(config, family, out, threads);
    else if (name == "fiber-integral")
        out.summary["results"] = run_fiber_integral<N>(config, family, out, threads);
    else if (name == "empirical-C")
        out.summary["results"] = run_empirical_c<N>(config, family, out, threads);
    else if (name == "verify")
        out.summary["results"] = run_verify<N>(config, spec, out, threads);
    else
        throw ConfigError("config.experiment.name", "unknown experiment '" + name + "'");
}

}  // namespace detail

// Runs one experiment. Validation problems raise ConfigError (exit 1);
// estimator failures raise other exceptions (exit 2); suite failures set
// exit code 3 in the returned output.
inline RunOutput run_experiment(json config, int threads = 0) {
    auto start = std::chrono::steady_clock::now();
    RunOutput out;
    config = normalize_config(std::move(config));
    std::string manifold = config.at("manifold").get<std::string>();

    out.summary["experiment"] = config.at("experiment").at("name");
    if (manifold == "t2")
        detail::run_typed<2>(config, out, threads);
    else
        detail::run_typed<3>(config, out, threads);

    out.summary["config"] = config;
    std::string hash = fnv1a_hex(config.dump());
    out.summary["config_hash"] = hash;
    // stamp the hash into every report nested in the results
    std::function<void(json&)> stamp = [&](json& node) {
        if (node.is_object()) {
            if (node.contains("config_hash") && node.at("config_hash") == "")
                node["config_hash"] = hash;
            for (auto& [key, value] : node.items()) stamp(value);
        } else if (node.is_array()) {
            for (auto& value : node) stamp(value);
        }
    };
    stamp(out.summary["results"]);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
    out.summary["wall_time_ms"] = ms;
    out.files["summary.json"] = out.summary.dump(2) + "\n";
    return out;
}

}  // namespace kinlab
