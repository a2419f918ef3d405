#ifndef VSG_GAME_HPP
#define VSG_GAME_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vsg/errors.hpp"
#include "vsg/trust.hpp"

namespace vsg {

struct ValidatorParams {
    int id = 0;
    double integrity = 0.0;         // prior probability of staying in the market
    double evidence_quality = 0.0;  // probability the public signal is truthful
    double commission = 0.0;        // fee rate; delegating t costs t*(1+commission)

    void validate() const {
        detail::check_prob(integrity, "integrity");
        detail::check_prob(evidence_quality, "evidence_quality");
        if (!(commission >= 0.0)) {
            throw std::invalid_argument("commission must be non-negative");
        }
    }
};

struct UserParams {
    int id = 0;
    double accuracy = 0.0;  // Pr(delegate | evidence positive), shared across validators
    double error = 0.0;     // Pr(delegate | evidence negative)
    double budget = 0.0;    // tokens available

    void validate() const {
        detail::check_prob(accuracy, "accuracy");
        detail::check_prob(error, "error");
        if (!(budget > 0.0)) {
            throw std::invalid_argument("budget must be positive");
        }
    }
};

// A complete game: participants plus the profit r shared per validated block.
struct VsgInstance {
    std::vector<UserParams> users;
    std::vector<ValidatorParams> validators;
    double profit = 0.0;

    int num_users() const { return static_cast<int>(users.size()); }
    int num_validators() const { return static_cast<int>(validators.size()); }

    void validate() const {
        if (users.empty()) throw std::invalid_argument("instance needs at least one user");
        if (validators.empty()) {
            throw std::invalid_argument("instance needs at least one validator");
        }
        if (!(profit > 0.0)) throw std::invalid_argument("profit must be positive");
        for (const UserParams& u : users) u.validate();
        for (const ValidatorParams& v : validators) v.validate();
    }
};

// One user's choice. Abstention is a distinct state so that tokens == 0
// exactly when the user does not delegate.
struct Strategy {
    std::optional<int> delegation;  // validator index, or empty for abstain
    double tokens = 0.0;

    static Strategy abstain() { return {}; }

    static Strategy delegate_to(int validator, double tokens) {
        if (!(tokens > 0.0)) {
            throw std::invalid_argument("delegation requires a positive token amount");
        }
        return Strategy{validator, tokens};
    }

    bool is_abstain() const { return !delegation.has_value(); }

    bool operator==(const Strategy&) const = default;
};

struct StrategyProfile {
    std::vector<Strategy> strategies;

    void validate(const VsgInstance& g) const {
        if (strategies.size() != g.users.size()) {
            throw std::invalid_argument("profile length does not match user count");
        }
        for (std::size_t i = 0; i < strategies.size(); ++i) {
            const Strategy& s = strategies[i];
            if (s.is_abstain()) {
                if (s.tokens != 0.0) {
                    throw std::invalid_argument("abstaining user must hold zero tokens");
                }
                continue;
            }
            const int j = *s.delegation;
            if (j < 0 || j >= g.num_validators()) {
                throw std::invalid_argument("delegation index out of range");
            }
            if (!(s.tokens > 0.0)) {
                throw std::invalid_argument("delegating user must hold positive tokens");
            }
            if (s.tokens * (1.0 + g.validators[j].commission) > g.users[i].budget) {
                throw std::invalid_argument("strategy of user " + std::to_string(i) +
                                            " exceeds budget");
            }
        }
    }
};

namespace detail {

// Log-product accumulators for one validator's delegator group. Members with
// zero accuracy/error are counted separately so removal stays exact.
struct GroupAcc {
    int count = 0;
    double sum_log_q = 0.0;
    int zero_q = 0;
    double sum_log_qb = 0.0;
    int zero_qb = 0;
    double token_sum = 0.0;

    void add(const UserParams& u, double tokens) {
        ++count;
        if (u.accuracy > 0.0) sum_log_q += std::log(u.accuracy); else ++zero_q;
        if (u.error > 0.0) sum_log_qb += std::log(u.error); else ++zero_qb;
        token_sum += tokens;
    }

    void remove(const UserParams& u, double tokens) {
        --count;
        if (u.accuracy > 0.0) sum_log_q -= std::log(u.accuracy); else --zero_q;
        if (u.error > 0.0) sum_log_qb -= std::log(u.error); else --zero_qb;
        token_sum -= tokens;
    }

    double log_prod_q() const { return zero_q > 0 ? kNegInf : sum_log_q; }
    double log_prod_qb() const { return zero_qb > 0 ? kNegInf : sum_log_qb; }

    double trust(const ValidatorParams& v) const {
        if (count == 0) return v.integrity;
        return trust_from_log_products(log_prod_q(), log_prod_qb(),
                                       v.evidence_quality, v.integrity);
    }
};

}  // namespace detail

/// Per-validator group trusts under a delegation profile; empty groups keep
/// the prior integrity.
inline std::vector<double> group_trusts(const VsgInstance& g,
                                        const StrategyProfile& profile) {
    profile.validate(g);
    std::vector<std::vector<TrustMember>> members(g.validators.size());
    for (std::size_t i = 0; i < profile.strategies.size(); ++i) {
        const Strategy& s = profile.strategies[i];
        if (!s.is_abstain()) {
            members[*s.delegation].push_back({g.users[i].accuracy, g.users[i].error});
        }
    }
    std::vector<double> trusts(g.validators.size());
    for (std::size_t j = 0; j < g.validators.size(); ++j) {
        trusts[j] = members[j].empty()
                        ? g.validators[j].integrity
                        : trust_group(members[j], g.validators[j].evidence_quality,
                                      g.validators[j].integrity);
    }
    return trusts;
}

/// Utility of user i: share of profit r by trust-weighted token mass, minus
/// commission and expected token loss. Abstainers get 0.
inline double utility(const VsgInstance& g, const StrategyProfile& profile, int i) {
    const Strategy& s = profile.strategies.at(static_cast<std::size_t>(i));
    if (s.is_abstain()) return 0.0;
    const std::vector<double> trusts = group_trusts(g, profile);
    double denom = 0.0;
    for (const Strategy& other : profile.strategies) {
        if (!other.is_abstain()) denom += trusts[*other.delegation] * other.tokens;
    }
    if (denom <= 0.0) {
        throw DegenerateEvidenceError("token pool has zero trust-weighted mass");
    }
    const int j = *s.delegation;
    const double t = trusts[j];
    return g.profit * t * s.tokens / denom - g.validators[j].commission * s.tokens -
           (1.0 - t) * s.tokens;
}

// Incremental evaluation state for one profile: per-group accumulators plus
// the global trust-weighted token mass. Single-owner; not thread-safe.
class GroupTrustCache {
public:
    GroupTrustCache(const VsgInstance& g, StrategyProfile profile)
        : game_(&g), profile_(std::move(profile)), groups_(g.validators.size()) {
        profile_.validate(g);
        for (std::size_t i = 0; i < profile_.strategies.size(); ++i) {
            const Strategy& s = profile_.strategies[i];
            if (!s.is_abstain()) groups_[*s.delegation].add(g.users[i], s.tokens);
        }
    }

    const VsgInstance& game() const { return *game_; }
    const StrategyProfile& profile() const { return profile_; }
    const Strategy& strategy_of(int i) const {
        return profile_.strategies[static_cast<std::size_t>(i)];
    }

    double group_trust(int j) const {
        return groups_[static_cast<std::size_t>(j)].trust(
            game_->validators[static_cast<std::size_t>(j)]);
    }

    // Sum over delegating users of (group trust) * tokens.
    double denominator() const {
        double d = 0.0;
        for (std::size_t j = 0; j < groups_.size(); ++j) {
            if (groups_[j].count > 0) d += groups_[j].trust(game_->validators[j]) * groups_[j].token_sum;
        }
        return d;
    }

    void apply(int i, const Strategy& next) {
        const std::size_t ui = static_cast<std::size_t>(i);
        const Strategy& cur = profile_.strategies[ui];
        if (!cur.is_abstain()) groups_[*cur.delegation].remove(game_->users[ui], cur.tokens);
        if (!next.is_abstain()) {
            const int j = *next.delegation;
            if (next.tokens * (1.0 + game_->validators[j].commission) > game_->users[ui].budget) {
                throw std::invalid_argument("strategy exceeds budget");
            }
            groups_[static_cast<std::size_t>(j)].add(game_->users[ui], next.tokens);
        }
        profile_.strategies[ui] = next;
    }

    double utility(int i) const { return utility_of(i, strategy_of(i)); }

    // Fixed-membership view of user i's deviation options: with everyone else
    // frozen and i joined to validator j, utility is a closed function of the
    // token count t alone: u(t) = r*T_j*t / (base_mass_j + T_j*t) - w_j*t.
    struct DeviationContext {
        std::vector<double> trust_with_i;  // group trust of j once i is a member
        std::vector<double> base_mass;     // trust-weighted tokens of the others
        double eval(const VsgInstance& g, int j, double t) const {
            if (t == 0.0) return 0.0;
            const std::size_t uj = static_cast<std::size_t>(j);
            const double trust = trust_with_i[uj];
            const double denom = base_mass[uj] + trust * t;
            if (denom <= 0.0) {
                throw DegenerateEvidenceError("token pool has zero trust-weighted mass");
            }
            return g.profit * trust * t / denom - g.validators[uj].commission * t -
                   (1.0 - trust) * t;
        }
    };

    DeviationContext deviation_context(int i) const {
        std::vector<detail::GroupAcc> groups = groups_;
        const std::size_t ui = static_cast<std::size_t>(i);
        const Strategy& cur = profile_.strategies[ui];
        if (!cur.is_abstain()) {
            groups[static_cast<std::size_t>(*cur.delegation)].remove(game_->users[ui],
                                                                     cur.tokens);
        }
        double denom_without_i = 0.0;
        std::vector<double> mass_without_i(groups.size(), 0.0);
        for (std::size_t j = 0; j < groups.size(); ++j) {
            if (groups[j].count > 0) {
                mass_without_i[j] = groups[j].trust(game_->validators[j]) * groups[j].token_sum;
                denom_without_i += mass_without_i[j];
            }
        }
        DeviationContext ctx;
        ctx.trust_with_i.resize(groups.size());
        ctx.base_mass.resize(groups.size());
        for (std::size_t j = 0; j < groups.size(); ++j) {
            detail::GroupAcc acc = groups[j];
            acc.add(game_->users[ui], 0.0);
            ctx.trust_with_i[j] = acc.trust(game_->validators[j]);
            // Others' mass once j's group is re-trusted with i as a member.
            ctx.base_mass[j] = denom_without_i - mass_without_i[j] +
                               ctx.trust_with_i[j] * groups[j].token_sum;
        }
        return ctx;
    }

    // Utility user i would get by playing s with everyone else fixed.
    double utility_of(int i, const Strategy& s) const {
        if (s.is_abstain()) return 0.0;
        return deviation_context(i).eval(*game_, *s.delegation, s.tokens);
    }

private:

    const VsgInstance* game_;
    StrategyProfile profile_;
    std::vector<detail::GroupAcc> groups_;
};

struct BestResponse {
    std::vector<Strategy> best;    // all utility maximizers over the discrete space
    std::vector<Strategy> better;  // strict improvements over current, minus best
    double best_utility = 0.0;
    double current_utility = 0.0;
};

// Integer token ceiling for user budget b at commission c, with an exact
// round-up check against FP division error.
inline long max_tokens(double budget, double commission) {
    long t = static_cast<long>(std::floor(budget / (1.0 + commission)));
    if (static_cast<double>(t + 1) * (1.0 + commission) <= budget) ++t;
    while (t > 0 && static_cast<double>(t) * (1.0 + commission) > budget) --t;
    return t;
}

namespace detail {
// Two strategies whose utilities differ by less than this (relative) are
// treated as tied maximizers.
constexpr double kTieTol = 1e-12;
}

/// Enumerates user i's full discrete strategy space (abstain plus every
/// integer token count at every validator) against the cached profile.
inline BestResponse best_response_sets(const GroupTrustCache& cache, int i) {
    const VsgInstance& g = cache.game();
    const UserParams& user = g.users[static_cast<std::size_t>(i)];
    BestResponse out;
    out.current_utility = cache.utility(i);

    struct Candidate {
        Strategy s;
        double u;
    };
    std::vector<Candidate> candidates;
    candidates.push_back({Strategy::abstain(), 0.0});

    const GroupTrustCache::DeviationContext ctx = cache.deviation_context(i);
    for (int j = 0; j < g.num_validators(); ++j) {
        const long tmax = max_tokens(user.budget, g.validators[j].commission);
        if (tmax < 1) continue;
        candidates.reserve(candidates.size() + static_cast<std::size_t>(tmax));
        for (long t = 1; t <= tmax; ++t) {
            const double td = static_cast<double>(t);
            candidates.push_back({Strategy::delegate_to(j, td), ctx.eval(g, j, td)});
        }
    }

    double best_u = candidates.front().u;
    for (const Candidate& c : candidates) best_u = std::max(best_u, c.u);
    const double tie = detail::kTieTol * std::max(1.0, std::abs(best_u));
    out.best_utility = best_u;
    for (const Candidate& c : candidates) {
        if (c.u >= best_u - tie) {
            out.best.push_back(c.s);
        } else if (c.u > out.current_utility) {
            out.better.push_back(c.s);
        }
    }
    return out;
}

struct Deviation {
    int user = 0;
    Strategy strategy;
    double gain = 0.0;
};

struct NashVerdict {
    bool equilibrium = false;
    std::optional<Deviation> witness;
};

/// Checks the profile against every user's discrete strategy space. An
/// improving deviation must gain more than `tolerance` to count.
inline NashVerdict is_nash(const VsgInstance& g, const StrategyProfile& profile,
                           double tolerance = 1e-9) {
    GroupTrustCache cache(g, profile);
    for (int i = 0; i < g.num_users(); ++i) {
        const BestResponse br = best_response_sets(cache, i);
        if (br.best_utility > br.current_utility + tolerance) {
            return {false, Deviation{i, br.best.front(),
                                     br.best_utility - br.current_utility}};
        }
    }
    return {true, std::nullopt};
}

/// Continuous utility-maximizing token count against a fixed trust-weighted
/// token mass of the other users. w = 1 + c - T_self must be positive,
/// otherwise utility grows without bound.
inline double continuous_optimal_tokens(double r, double others_weight, double w,
                                        double t_self) {
    if (!(others_weight >= 0.0)) {
        throw std::invalid_argument("others_weight must be non-negative");
    }
    if (!(w > 0.0)) {
        throw ConditionError("w = 1 + c - T must be positive (utility unbounded otherwise)");
    }
    if (!(t_self > 0.0)) throw std::invalid_argument("T_self must be positive");
    if (others_weight == 0.0) return 0.0;
    return std::max(0.0, std::sqrt(r * others_weight / (w * t_self)) -
                             others_weight / t_self);
}

struct SingleValidatorNe {
    double tokens = 0.0;        // identical continuous token strategy per user
    double user_utility = 0.0;  // r / n^2
    double budget_floor = 0.0;  // minimum budget required: tokens * (1 + c)
};

/// Symmetric equilibrium of the one-validator game: everyone delegates
/// (n-1) r / (n^2 (1+c-T)) tokens, T being the full-group trust.
inline SingleValidatorNe single_validator_ne(int n, double r, double c, double p,
                                             double q, double qbar) {
    if (n < 2) {
        throw ConditionError("single-validator equilibrium needs n >= 2 "
                             "(with one user the utility is linear in tokens)");
    }
    if (!(r > 0.0)) throw std::invalid_argument("profit must be positive");
    if (!(c >= 0.0)) throw std::invalid_argument("commission must be non-negative");
    if (!(q > qbar)) {
        throw ConditionError("accuracy must exceed error");
    }
    const double trust = trust_hupe(n, q, qbar, p);
    const double w = 1.0 + c - trust;
    if (!(w > 0.0)) throw ConditionError("w = 1 + c - T must be positive");
    const double nd = static_cast<double>(n);
    SingleValidatorNe ne;
    ne.tokens = (nd - 1.0) * r / (nd * nd * w);
    ne.user_utility = r / (nd * nd);
    ne.budget_floor = ne.tokens * (1.0 + c);
    return ne;
}

/// Equilibrium of a game whose validators all share (p, c): everyone on the
/// lowest-index validator with the single-validator token count.
inline StrategyProfile homogeneous_ne(const VsgInstance& g) {
    g.validate();
    const ValidatorParams& v0 = g.validators.front();
    for (const ValidatorParams& v : g.validators) {
        if (v.integrity != v0.integrity || v.commission != v0.commission) {
            throw ConditionError("validators must share integrity and commission");
        }
        if (v.evidence_quality != 1.0) {
            throw ConditionError("perfect evidence (z = 1) required");
        }
    }
    const UserParams& u0 = g.users.front();
    for (const UserParams& u : g.users) {
        if (u.accuracy != u0.accuracy || u.error != u0.error) {
            throw ConditionError("users must share accuracy and error");
        }
    }
    const SingleValidatorNe ne = single_validator_ne(
        g.num_users(), g.profit, v0.commission, v0.integrity, u0.accuracy, u0.error);
    if (!(ne.tokens >= 1.0)) {
        throw ConditionError("equilibrium token count must be at least 1 "
                             "(budget condition floor)");
    }
    for (const UserParams& u : g.users) {
        if (!(u.budget >= ne.budget_floor)) {
            throw ConditionError("budget of user " + std::to_string(u.id) +
                                 " is below the equilibrium floor");
        }
    }
    StrategyProfile profile;
    profile.strategies.assign(g.users.size(), Strategy::delegate_to(0, ne.tokens));
    return profile;
}

/// Equilibrium of a commission-free game: everyone on a maximal-integrity
/// validator (lowest index on ties) with (n-1) r / (n^2 (1-T)) tokens.
inline StrategyProfile commission_free_ne(const VsgInstance& g) {
    g.validate();
    for (const ValidatorParams& v : g.validators) {
        if (v.commission != 0.0) throw ConditionError("all commissions must be zero");
        if (v.evidence_quality != 1.0) {
            throw ConditionError("perfect evidence (z = 1) required");
        }
    }
    const UserParams& u0 = g.users.front();
    for (const UserParams& u : g.users) {
        if (u.accuracy != u0.accuracy || u.error != u0.error) {
            throw ConditionError("users must share accuracy and error");
        }
    }
    if (!(u0.accuracy > u0.error)) throw ConditionError("accuracy must exceed error");
    int best_j = 0;
    for (int j = 1; j < g.num_validators(); ++j) {
        if (g.validators[j].integrity > g.validators[best_j].integrity) best_j = j;
    }
    const int n = g.num_users();
    const double trust = trust_hupe(n, u0.accuracy, u0.error,
                                    g.validators[best_j].integrity);
    const double w = 1.0 - trust;
    if (!(w > 0.0)) throw ConditionError("w = 1 - T must be positive");
    const double nd = static_cast<double>(n);
    const double t_star = (nd - 1.0) * g.profit / (nd * nd * w);
    if (!(t_star >= 1.0)) {
        throw ConditionError("equilibrium token count must be at least 1");
    }
    for (const UserParams& u : g.users) {
        if (!(u.budget >= t_star)) {
            throw ConditionError("budget of user " + std::to_string(u.id) +
                                 " is below the equilibrium floor");
        }
    }
    StrategyProfile profile;
    profile.strategies.assign(g.users.size(), Strategy::delegate_to(best_j, t_star));
    return profile;
}

}  // namespace vsg

#endif
