#pragma once

// JSON conversions for reports and family specifications, plus the content
// hash embedded in run summaries.

#include <cstdint>
#include <json.hpp>
#include <string>

#include "kinlab/family.hpp"
#include "kinlab/kinematic.hpp"
#include "kinlab/verify.hpp"

namespace kinlab {

using nlohmann::json;

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline json to_json(const EstimateReport& r) {
    return json{{"estimate", r.estimate},
                {"std_error", r.std_error},
                {"num_samples", r.num_samples},
                {"seed", r.seed},
                {"degenerate_fraction", r.degenerate_fraction},
                {"config_hash", r.config_hash},
                {"unreliable", r.unreliable},
                {"mean_raw", r.mean_raw},
                {"log_scale", r.log_scale},
                {"acceptance_rate", r.acceptance_rate}};
}

inline json to_json(const RatioReport& r) {
    json ratios = json::array();
    for (const auto& e : r.ratios)
        ratios.push_back(json{{"pair_id", e.pair_id},
                              {"ratio", e.ratio},
                              {"estimate", e.estimate},
                              {"std_error", e.std_error},
                              {"failed", e.failed},
                              {"error", e.error}});
    return json{{"c_emp", r.c_emp}, {"ratios", ratios}};
}

inline json to_json(const SuiteReport& r) {
    return json{{"claim", r.claim},
                {"trials", r.trials},
                {"failures", r.failures},
                {"worst_error", r.worst_error},
                {"notes", r.notes},
                {"passed", r.passed()}};
}

template <int N>
json to_json(const FamilySpec<N>& spec, int charts_per_axis, double chart_scale) {
    return json{{"kind", "constructed"},
                {"charts_per_axis", charts_per_axis},
                {"chart_scale", chart_scale},
                {"radius", spec.radius},
                {"flow_step", spec.flow_step},
                {"fd_step", spec.fd_step},
                {"cech_diameter", spec.atlas.cech_diameter},
                {"chart_count", spec.atlas.chart_count()},
                {"num_blocks", spec.num_blocks()},
                {"param_dim", spec.param_dim()}};
}

}  // namespace kinlab
