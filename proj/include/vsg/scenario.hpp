#ifndef VSG_SCENARIO_HPP
#define VSG_SCENARIO_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsg/errors.hpp"
#include "vsg/game.hpp"
#include "vsg/rng.hpp"

namespace vsg {

inline constexpr const char* kToolVersion = "0.1.0";

struct GaussianSpec {
    double mean = 0.0;
    double stddev = 0.0;
};

struct ClampRange {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    double apply(double x) const { return std::clamp(x, lo, hi); }
};

// Randomized instance recipe. Commissions follow the integrity:
// c = (p - commission_offset) * commission_slope + noise, clamped.
struct ScenarioSpec {
    int n_users = 1;
    int n_validators = 1;
    GaussianSpec integrity;
    GaussianSpec evidence_quality;
    GaussianSpec accuracy;
    GaussianSpec error;
    GaussianSpec budget;
    double profit = 30.0;
    double commission_offset = 0.5;
    double commission_slope = 1.0 / 3.0;
    double commission_noise_std = 0.01;
    ClampRange integrity_clamp{0.5, 1.0};
    ClampRange evidence_quality_clamp{0.5, 1.0};
    ClampRange accuracy_clamp{0.5, 1.0};
    ClampRange error_clamp{0.0, 1.0};
    // Budgets have no stated clamp; the floor of 1 guarantees every user can
    // afford a token at any commission in the sampled range.
    ClampRange budget_clamp{1.0, std::numeric_limits<double>::infinity()};
    ClampRange commission_clamp{0.0, std::numeric_limits<double>::infinity()};

    void validate() const {
        if (n_users < 1 || n_validators < 1) {
            throw std::invalid_argument("participant counts must be >= 1");
        }
        for (const GaussianSpec* s :
             {&integrity, &evidence_quality, &accuracy, &error, &budget}) {
            if (!(s->stddev >= 0.0)) {
                throw std::invalid_argument("standard deviations must be non-negative");
            }
        }
        if (!(commission_noise_std >= 0.0)) {
            throw std::invalid_argument("commission noise std must be non-negative");
        }
        if (!(profit > 0.0)) throw std::invalid_argument("profit must be positive");
    }

    // 10 validators, 200 users, r = 30, Gaussian attributes as in the
    // simulated market experiments.
    static ScenarioSpec default_paper() {
        ScenarioSpec s;
        s.n_users = 200;
        s.n_validators = 10;
        s.integrity = {0.7, 0.1};
        s.evidence_quality = {0.8, 0.1};
        s.accuracy = {0.6, 0.1};
        s.error = {0.5, 0.1};
        s.budget = {70.0, 15.0};
        s.profit = 30.0;
        return s;
    }
};

/// Draws one instance; saturating clamps, never resampling.
inline VsgInstance sample_instance(const ScenarioSpec& spec, Rng& rng) {
    spec.validate();
    VsgInstance g;
    g.profit = spec.profit;
    g.validators.reserve(static_cast<std::size_t>(spec.n_validators));
    for (int j = 0; j < spec.n_validators; ++j) {
        ValidatorParams v;
        v.id = j;
        v.integrity = spec.integrity_clamp.apply(
            rng.normal(spec.integrity.mean, spec.integrity.stddev));
        v.evidence_quality = spec.evidence_quality_clamp.apply(
            rng.normal(spec.evidence_quality.mean, spec.evidence_quality.stddev));
        const double noise = rng.normal(0.0, spec.commission_noise_std);
        v.commission = spec.commission_clamp.apply(
            (v.integrity - spec.commission_offset) * spec.commission_slope + noise);
        g.validators.push_back(v);
    }
    g.users.reserve(static_cast<std::size_t>(spec.n_users));
    for (int i = 0; i < spec.n_users; ++i) {
        UserParams u;
        u.id = i;
        u.accuracy = spec.accuracy_clamp.apply(
            rng.normal(spec.accuracy.mean, spec.accuracy.stddev));
        u.error = spec.error_clamp.apply(rng.normal(spec.error.mean, spec.error.stddev));
        u.budget = spec.budget_clamp.apply(rng.normal(spec.budget.mean, spec.budget.stddev));
        g.users.push_back(u);
    }
    g.validate();
    return g;
}

namespace detail {

inline void require_keys(const nlohmann::json& obj,
                         const std::vector<std::string>& keys,
                         const std::string& where) {
    if (!obj.is_object()) throw SchemaError(where + ": expected an object");
    for (const std::string& k : keys) {
        if (!obj.contains(k)) throw SchemaError(where + ": missing field '" + k + "'");
    }
    for (const auto& [k, v] : obj.items()) {
        (void)v;
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
            throw SchemaError(where + ": unknown field '" + k + "'");
        }
    }
}

inline double number_field(const nlohmann::json& obj, const std::string& key,
                           const std::string& where) {
    const nlohmann::json& v = obj.at(key);
    if (!v.is_number()) throw SchemaError(where + "." + key + ": expected a number");
    return v.get<double>();
}

}  // namespace detail

struct InstanceMeta {
    std::string generator = "vsg-sim";
    std::string version = kToolVersion;
    std::uint64_t seed = 0;
    std::string spec_name = "custom";
    std::string clamp_mode = "saturate";
    std::string notes;
};

inline void save_instance(const VsgInstance& g, const std::filesystem::path& path,
                          const InstanceMeta& meta = {}) {
    g.validate();
    nlohmann::json doc;
    doc["meta"] = {
        {"generator", meta.generator}, {"version", meta.version},
        {"seed", meta.seed},           {"spec", meta.spec_name},
        {"clamp_mode", meta.clamp_mode}, {"notes", meta.notes},
    };
    doc["users"] = nlohmann::json::array();
    for (const UserParams& u : g.users) {
        doc["users"].push_back({{"id", u.id},
                                {"accuracy", u.accuracy},
                                {"error", u.error},
                                {"budget", u.budget}});
    }
    doc["validators"] = nlohmann::json::array();
    for (const ValidatorParams& v : g.validators) {
        doc["validators"].push_back({{"id", v.id},
                                     {"integrity", v.integrity},
                                     {"evidence_quality", v.evidence_quality},
                                     {"commission", v.commission}});
    }
    doc["profit"] = g.profit;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Strict load: unknown fields anywhere outside `meta` are rejected, and every
/// domain invariant is re-validated with a field-level message.
inline VsgInstance load_instance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    detail::require_keys(doc, {"meta", "users", "validators", "profit"}, "instance");
    if (!doc["meta"].is_object()) throw SchemaError("instance.meta: expected an object");
    VsgInstance g;
    g.profit = detail::number_field(doc, "profit", "instance");
    if (!(g.profit > 0.0)) throw SchemaError("instance.profit: must be positive");
    if (!doc["users"].is_array()) throw SchemaError("instance.users: expected an array");
    for (std::size_t i = 0; i < doc["users"].size(); ++i) {
        const nlohmann::json& ju = doc["users"][i];
        const std::string where = "users[" + std::to_string(i) + "]";
        detail::require_keys(ju, {"id", "accuracy", "error", "budget"}, where);
        UserParams u;
        u.id = ju.at("id").get<int>();
        u.accuracy = detail::number_field(ju, "accuracy", where);
        u.error = detail::number_field(ju, "error", where);
        u.budget = detail::number_field(ju, "budget", where);
        if (!(u.accuracy >= 0.0 && u.accuracy <= 1.0)) {
            throw SchemaError(where + ".accuracy: must lie in [0,1]");
        }
        if (!(u.error >= 0.0 && u.error <= 1.0)) {
            throw SchemaError(where + ".error: must lie in [0,1]");
        }
        if (!(u.budget > 0.0)) throw SchemaError(where + ".budget: must be positive");
        g.users.push_back(u);
    }
    if (!doc["validators"].is_array()) {
        throw SchemaError("instance.validators: expected an array");
    }
    for (std::size_t j = 0; j < doc["validators"].size(); ++j) {
        const nlohmann::json& jv = doc["validators"][j];
        const std::string where = "validators[" + std::to_string(j) + "]";
        detail::require_keys(jv, {"id", "integrity", "evidence_quality", "commission"},
                             where);
        ValidatorParams v;
        v.id = jv.at("id").get<int>();
        v.integrity = detail::number_field(jv, "integrity", where);
        v.evidence_quality = detail::number_field(jv, "evidence_quality", where);
        v.commission = detail::number_field(jv, "commission", where);
        if (!(v.integrity >= 0.0 && v.integrity <= 1.0)) {
            throw SchemaError(where + ".integrity: must lie in [0,1]");
        }
        if (!(v.evidence_quality >= 0.0 && v.evidence_quality <= 1.0)) {
            throw SchemaError(where + ".evidence_quality: must lie in [0,1]");
        }
        if (!(v.commission >= 0.0)) {
            throw SchemaError(where + ".commission: must be non-negative");
        }
        g.validators.push_back(v);
    }
    g.validate();
    return g;
}

inline void save_profile(const StrategyProfile& profile,
                         const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["strategies"] = nlohmann::json::array();
    for (const Strategy& s : profile.strategies) {
        nlohmann::json js;
        js["validator"] = s.is_abstain() ? nlohmann::json(nullptr)
                                         : nlohmann::json(*s.delegation);
        js["tokens"] = s.tokens;
        doc["strategies"].push_back(js);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

inline StrategyProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    detail::require_keys(doc, {"strategies"}, "profile");
    if (!doc["strategies"].is_array()) {
        throw SchemaError("profile.strategies: expected an array");
    }
    StrategyProfile profile;
    for (std::size_t i = 0; i < doc["strategies"].size(); ++i) {
        const nlohmann::json& js = doc["strategies"][i];
        const std::string where = "strategies[" + std::to_string(i) + "]";
        detail::require_keys(js, {"validator", "tokens"}, where);
        const double tokens = detail::number_field(js, "tokens", where);
        if (js["validator"].is_null()) {
            if (tokens != 0.0) {
                throw SchemaError(where + ": abstaining entry must have zero tokens");
            }
            profile.strategies.push_back(Strategy::abstain());
        } else {
            if (!js["validator"].is_number_integer()) {
                throw SchemaError(where + ".validator: expected an integer or null");
            }
            if (!(tokens > 0.0)) {
                throw SchemaError(where + ".tokens: must be positive when delegating");
            }
            profile.strategies.push_back(
                Strategy::delegate_to(js["validator"].get<int>(), tokens));
        }
    }
    return profile;
}

}  // namespace vsg

#endif
