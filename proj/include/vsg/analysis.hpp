#ifndef VSG_ANALYSIS_HPP
#define VSG_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "vsg/dynamics.hpp"
#include "vsg/game.hpp"
#include "vsg/trust.hpp"

namespace vsg {

// Market statistics for one (instance, profile) pair.
struct RunSummary {
    std::vector<double> validator_tokens;  // received tokens per validator
    double delegation_rate = 0.0;          // fraction of users with tokens > 0
    std::vector<double> token_usage;       // per-user tokens / budget
    double mean_token_usage = 0.0;
    double hhi = 0.0;  // sum of squared token shares; 0 with hhi_defined=false if no tokens
    bool hhi_defined = false;
    std::vector<double> top_shares;  // token shares sorted descending
    std::vector<double> integrity;
    std::vector<double> evidence;  // marginal Pr(e_j = 1)
    std::vector<double> commission;
};

inline RunSummary summarize(const VsgInstance& g, const StrategyProfile& profile) {
    profile.validate(g);
    RunSummary s;
    s.validator_tokens.assign(g.validators.size(), 0.0);
    int delegators = 0;
    double usage_sum = 0.0;
    s.token_usage.reserve(g.users.size());
    for (std::size_t i = 0; i < profile.strategies.size(); ++i) {
        const Strategy& st = profile.strategies[i];
        if (!st.is_abstain()) {
            s.validator_tokens[static_cast<std::size_t>(*st.delegation)] += st.tokens;
            ++delegators;
        }
        const double usage = st.tokens / g.users[i].budget;
        s.token_usage.push_back(usage);
        usage_sum += usage;
    }
    s.delegation_rate = static_cast<double>(delegators) / static_cast<double>(g.users.size());
    s.mean_token_usage = usage_sum / static_cast<double>(g.users.size());

    const double total = std::accumulate(s.validator_tokens.begin(),
                                         s.validator_tokens.end(), 0.0);
    if (total > 0.0) {
        s.hhi_defined = true;
        for (const double tokens : s.validator_tokens) {
            const double share = tokens / total;
            s.hhi += share * share;
            s.top_shares.push_back(share);
        }
        std::sort(s.top_shares.begin(), s.top_shares.end(), std::greater<double>());
    } else {
        s.top_shares.assign(g.validators.size(), 0.0);
    }

    for (const ValidatorParams& v : g.validators) {
        s.integrity.push_back(v.integrity);
        s.evidence.push_back(evidence_prob(v.integrity, v.evidence_quality));
        s.commission.push_back(v.commission);
    }
    return s;
}

struct AggregateSummary {
    int count = 0;
    std::vector<double> validator_tokens_mean;
    std::vector<double> validator_tokens_std;
    double delegation_rate_mean = 0.0, delegation_rate_std = 0.0;
    double token_usage_mean = 0.0, token_usage_std = 0.0;
    double hhi_mean = 0.0, hhi_std = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (const double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / n)};
}

}  // namespace detail

/// Element-wise means and (population) standard deviations over runs.
inline AggregateSummary aggregate(const std::vector<RunSummary>& summaries) {
    if (summaries.empty()) throw std::invalid_argument("nothing to aggregate");
    const std::size_t m = summaries.front().validator_tokens.size();
    for (const RunSummary& s : summaries) {
        if (s.validator_tokens.size() != m) {
            throw std::invalid_argument("summaries have mismatched validator counts");
        }
    }
    AggregateSummary agg;
    agg.count = static_cast<int>(summaries.size());
    agg.validator_tokens_mean.resize(m);
    agg.validator_tokens_std.resize(m);
    std::vector<double> column(summaries.size());
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < summaries.size(); ++k) {
            column[k] = summaries[k].validator_tokens[j];
        }
        std::tie(agg.validator_tokens_mean[j], agg.validator_tokens_std[j]) =
            detail::mean_std(column);
    }
    std::vector<double> rates, usages, hhis;
    for (const RunSummary& s : summaries) {
        rates.push_back(s.delegation_rate);
        usages.push_back(s.mean_token_usage);
        hhis.push_back(s.hhi);
    }
    std::tie(agg.delegation_rate_mean, agg.delegation_rate_std) = detail::mean_std(rates);
    std::tie(agg.token_usage_mean, agg.token_usage_std) = detail::mean_std(usages);
    std::tie(agg.hhi_mean, agg.hhi_std) = detail::mean_std(hhis);
    return agg;
}

/// Trust of a homogeneous delegator group as a function of group size.
inline std::vector<std::pair<long, double>> trust_curve(double p, double q, double qbar,
                                                        long k_max) {
    if (k_max < 0) throw std::invalid_argument("k_max must be non-negative");
    std::vector<std::pair<long, double>> series;
    series.reserve(static_cast<std::size_t>(k_max) + 1);
    for (long k = 0; k <= k_max; ++k) series.emplace_back(k, trust_hupe(k, q, qbar, p));
    return series;
}

// ---------------------------------------------------------------------------
// CSV export. %.17g keeps doubles round-trippable and output byte-stable.

namespace detail {

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace detail

inline void write_validators_csv(const std::filesystem::path& path,
                                 const VsgInstance& g, const RunSummary& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "validator,received_tokens,token_share,integrity,evidence_prob,commission\n";
    const double total = std::accumulate(s.validator_tokens.begin(),
                                         s.validator_tokens.end(), 0.0);
    for (std::size_t j = 0; j < s.validator_tokens.size(); ++j) {
        const double share = total > 0.0 ? s.validator_tokens[j] / total : 0.0;
        out << g.validators[j].id << ',' << detail::fmt(s.validator_tokens[j]) << ','
            << detail::fmt(share) << ',' << detail::fmt(s.integrity[j]) << ','
            << detail::fmt(s.evidence[j]) << ',' << detail::fmt(s.commission[j]) << '\n';
    }
}

inline void write_users_csv(const std::filesystem::path& path, const VsgInstance& g,
                            const StrategyProfile& profile, const RunSummary& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "user,validator,tokens,budget,token_usage\n";
    for (std::size_t i = 0; i < profile.strategies.size(); ++i) {
        const Strategy& st = profile.strategies[i];
        out << g.users[i].id << ',';
        if (st.is_abstain()) {
            out << "abstain";
        } else {
            out << *st.delegation;
        }
        out << ',' << detail::fmt(st.tokens) << ',' << detail::fmt(g.users[i].budget)
            << ',' << detail::fmt(s.token_usage[i]) << '\n';
    }
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const Trajectory& trajectory) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "round,user,validator,tokens,utility\n";
    for (std::size_t r = 0; r < trajectory.rounds.size(); ++r) {
        const RoundRecord& rec = trajectory.rounds[r];
        for (std::size_t i = 0; i < rec.profile.strategies.size(); ++i) {
            const Strategy& st = rec.profile.strategies[i];
            out << r + 1 << ',' << i << ',';
            if (st.is_abstain()) {
                out << "abstain";
            } else {
                out << *st.delegation;
            }
            out << ',' << detail::fmt(st.tokens) << ',' << detail::fmt(rec.utilities[i])
                << '\n';
        }
    }
}

}  // namespace vsg

#endif
