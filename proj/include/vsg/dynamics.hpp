#ifndef VSG_DYNAMICS_HPP
#define VSG_DYNAMICS_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vsg/game.hpp"
#include "vsg/rng.hpp"

namespace vsg {

enum class ConvergenceMode {
    relative,  // |du| <= ratio * max(|u_prev|, 1)
    absolute,  // |du| <= ratio
};

struct GbrdConfig {
    double epsilon = 1.0;            // probability of sampling from the best set
    int round_limit = 1;
    double convergence_ratio = 0.01;
    ConvergenceMode mode = ConvergenceMode::relative;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
            throw std::invalid_argument("epsilon must lie in [0,1]");
        }
        if (round_limit < 1) throw std::invalid_argument("round_limit must be >= 1");
        if (!(convergence_ratio >= 0.0)) {
            throw std::invalid_argument("convergence_ratio must be non-negative");
        }
    }
};

struct RoundRecord {
    StrategyProfile profile;        // snapshot after the round
    std::vector<double> utilities;  // per-user utilities under that snapshot
    std::vector<int> order;         // user visit order this round
};

enum class Termination { converged, round_limit };

struct Trajectory {
    std::vector<RoundRecord> rounds;
    Termination terminated_by = Termination::round_limit;
};

struct GbrdResult {
    StrategyProfile final_profile;
    Trajectory trajectory;
};

namespace detail {
// Domain separation constants for the independent random streams.
constexpr std::uint64_t kInitStream = 0x696e6974ULL;  // initial profile
constexpr std::uint64_t kPermStream = 0x7065726dULL;  // visit order
constexpr std::uint64_t kPickStream = 0x7069636bULL;  // strategy sampling
}  // namespace detail

/// Random starting point: each user gets a uniform validator and a uniform
/// integer token count within budget; a zero draw means abstention.
inline StrategyProfile init_profile(const VsgInstance& g, Rng& rng) {
    g.validate();
    StrategyProfile profile;
    profile.strategies.reserve(g.users.size());
    for (const UserParams& user : g.users) {
        const int j = static_cast<int>(
            rng.uniform_below(static_cast<std::uint64_t>(g.num_validators())));
        const long tmax = max_tokens(user.budget, g.validators[j].commission);
        const long t = static_cast<long>(
            rng.uniform_below(static_cast<std::uint64_t>(tmax) + 1));
        profile.strategies.push_back(
            t == 0 ? Strategy::abstain() : Strategy::delegate_to(j, static_cast<double>(t)));
    }
    return profile;
}

namespace detail {

inline bool utility_converged(double prev, double next, const GbrdConfig& cfg) {
    const double delta = std::abs(next - prev);
    if (cfg.mode == ConvergenceMode::absolute) return delta <= cfg.convergence_ratio;
    return delta <= cfg.convergence_ratio * std::max(std::abs(prev), 1.0);
}

}  // namespace detail

/// Sequential noisy best-response rounds. Each round visits users in a fresh
/// random order; each user re-optimizes against the current evolving profile,
/// sampling from the best set with probability epsilon and from the strictly
/// improving set otherwise (falling back to the best set when it is empty).
inline GbrdResult run_gbrd(const VsgInstance& g, const GbrdConfig& cfg) {
    g.validate();
    cfg.validate();

    Rng init_rng(cfg.seed, detail::kInitStream);
    Rng perm_rng(cfg.seed, detail::kPermStream);
    Rng pick_rng(cfg.seed, detail::kPickStream);

    const int n = g.num_users();
    GroupTrustCache cache(g, init_profile(g, init_rng));

    std::vector<double> prev_utils(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) prev_utils[static_cast<std::size_t>(i)] = cache.utility(i);

    GbrdResult result;
    result.trajectory.terminated_by = Termination::round_limit;

    for (int round = 0; round < cfg.round_limit; ++round) {
        const std::vector<int> order = perm_rng.permutation(n);
        for (const int i : order) {
            const BestResponse br = best_response_sets(cache, i);
            const bool greedy = pick_rng.uniform() < cfg.epsilon;
            const std::vector<Strategy>& pool =
                (greedy || br.better.empty()) ? br.best : br.better;
            const Strategy& pick = pool[pick_rng.uniform_below(pool.size())];
            cache.apply(i, pick);
        }

        RoundRecord record;
        record.profile = cache.profile();
        record.order = order;
        record.utilities.resize(static_cast<std::size_t>(n));
        bool converged = true;
        for (int i = 0; i < n; ++i) {
            const double u = cache.utility(i);
            record.utilities[static_cast<std::size_t>(i)] = u;
            if (!detail::utility_converged(prev_utils[static_cast<std::size_t>(i)], u, cfg)) {
                converged = false;
            }
        }
        prev_utils = record.utilities;
        result.trajectory.rounds.push_back(std::move(record));
        if (converged) {
            result.trajectory.terminated_by = Termination::converged;
            break;
        }
    }

    result.final_profile = cache.profile();
    return result;
}

}  // namespace vsg

#endif
