#include <doctest.h>

#include <cmath>
#include <vector>

#include "vsg/game.hpp"
#include "vsg/rng.hpp"

using namespace vsg;

namespace {

// Two users (q,qbar)=(0.8,0.3), validators (p,c) = (0.8,0.2) and (0.6,0.1),
// perfect evidence, generous budgets.
VsgInstance example_market(double r = 30.0, double budget = 1e4) {
    VsgInstance g;
    g.profit = r;
    g.users = {{0, 0.8, 0.3, budget}, {1, 0.8, 0.3, budget}};
    g.validators = {{0, 0.8, 1.0, 0.2}, {1, 0.6, 1.0, 0.1}};
    return g;
}

StrategyProfile make_profile(std::vector<Strategy> ss) { return {std::move(ss)}; }

// From-scratch enumeration of user i's discrete strategy space, evaluating
// each candidate with the independent utility() path. No caching anywhere.
struct BruteForce {
    std::vector<Strategy> best;
    double best_utility;
};

BruteForce brute_force_best(const VsgInstance& g, const StrategyProfile& profile, int i) {
    BruteForce out;
    StrategyProfile scratch = profile;
    scratch.strategies[static_cast<std::size_t>(i)] = Strategy::abstain();
    out.best = {Strategy::abstain()};
    out.best_utility = 0.0;
    for (int j = 0; j < g.num_validators(); ++j) {
        const long tmax = max_tokens(g.users[static_cast<std::size_t>(i)].budget,
                                     g.validators[static_cast<std::size_t>(j)].commission);
        for (long t = 1; t <= tmax; ++t) {
            scratch.strategies[static_cast<std::size_t>(i)] =
                Strategy::delegate_to(j, static_cast<double>(t));
            const double u = utility(g, scratch, i);
            if (u > out.best_utility + 1e-12) {
                out.best = {scratch.strategies[static_cast<std::size_t>(i)]};
                out.best_utility = u;
            } else if (u >= out.best_utility - 1e-12) {
                out.best.push_back(scratch.strategies[static_cast<std::size_t>(i)]);
            }
        }
    }
    return out;
}

VsgInstance random_small_instance(Rng& rng) {
    VsgInstance g;
    g.profit = 5.0 + 25.0 * rng.uniform();
    const int n = 2 + static_cast<int>(rng.uniform_below(2));
    const int m = 1 + static_cast<int>(rng.uniform_below(2));
    for (int i = 0; i < n; ++i) {
        g.users.push_back({i, 0.3 + 0.7 * rng.uniform(), 0.2 + 0.6 * rng.uniform(),
                           5.0 + 15.0 * rng.uniform()});
    }
    for (int j = 0; j < m; ++j) {
        g.validators.push_back({j, 0.4 + 0.55 * rng.uniform(), 0.6 + 0.4 * rng.uniform(),
                                0.2 * rng.uniform()});
    }
    return g;
}

StrategyProfile random_profile(const VsgInstance& g, Rng& rng) {
    StrategyProfile profile;
    for (const UserParams& u : g.users) {
        const int j = static_cast<int>(
            rng.uniform_below(static_cast<std::uint64_t>(g.num_validators())));
        const long tmax = max_tokens(u.budget, g.validators[static_cast<std::size_t>(j)].commission);
        const long t = static_cast<long>(rng.uniform_below(static_cast<std::uint64_t>(tmax) + 1));
        profile.strategies.push_back(
            t == 0 ? Strategy::abstain() : Strategy::delegate_to(j, static_cast<double>(t)));
    }
    return profile;
}

}  // namespace

TEST_CASE("strategy invariants") {
    CHECK(Strategy::abstain().tokens == 0.0);
    CHECK(Strategy::abstain().is_abstain());
    CHECK_THROWS_AS(Strategy::delegate_to(0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Strategy::delegate_to(0, -1.0), std::invalid_argument);

    const VsgInstance g = example_market();
    StrategyProfile over = make_profile({Strategy::delegate_to(0, 1e9), Strategy::abstain()});
    CHECK_THROWS_AS(over.validate(g), std::invalid_argument);
    StrategyProfile bad_len = make_profile({Strategy::abstain()});
    CHECK_THROWS_AS(bad_len.validate(g), std::invalid_argument);
}

TEST_CASE("group trusts reproduce the worked two-user market") {
    const VsgInstance g = example_market();
    const auto t_both_v0 = group_trusts(
        g, make_profile({Strategy::delegate_to(0, 1), Strategy::delegate_to(0, 1)}));
    CHECK(t_both_v0[0] == doctest::Approx(0.966).epsilon(5e-4));
    const auto t_split = group_trusts(
        g, make_profile({Strategy::delegate_to(0, 1), Strategy::delegate_to(1, 1)}));
    CHECK(t_split[0] == doctest::Approx(0.914).epsilon(5e-4));
    CHECK(t_split[1] == doctest::Approx(0.8).epsilon(5e-4));
    const auto t_both_v1 = group_trusts(
        g, make_profile({Strategy::delegate_to(1, 1), Strategy::delegate_to(1, 1)}));
    CHECK(t_both_v1[1] == doctest::Approx(0.914).epsilon(5e-4));

    // All abstaining: priors pass through.
    const auto t_idle = group_trusts(g, make_profile({Strategy::abstain(), Strategy::abstain()}));
    CHECK(t_idle[0] == doctest::Approx(0.8));
    CHECK(t_idle[1] == doctest::Approx(0.6));
}

TEST_CASE("utility basics") {
    const VsgInstance g = example_market();

    SUBCASE("abstaining gives zero") {
        const auto profile =
            make_profile({Strategy::abstain(), Strategy::delegate_to(1, 5)});
        CHECK(utility(g, profile, 0) == 0.0);
    }

    SUBCASE("sole delegator on a single validator") {
        VsgInstance solo;
        solo.profit = 12.0;
        solo.users = {{0, 0.7, 0.4, 50.0}};
        solo.validators = {{0, 0.65, 1.0, 0.05}};
        const double trust = trust_hupe(1, 0.7, 0.4, 0.65);
        for (double t : {1.0, 3.0, 17.0}) {
            const auto profile = make_profile({Strategy::delegate_to(0, t)});
            const double expected = solo.profit - (1.0 + 0.05 - trust) * t;
            CHECK(utility(solo, profile, 0) == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    SUBCASE("symmetric profile on the cheaper validator pays r/4 each") {
        const VsgInstance g2 = example_market();
        const double trust = trust_hupe(2, 0.8, 0.3, 0.6);
        const double w = 1.0 + 0.1 - trust;
        const double t = g2.profit / (4.0 * w);
        const auto profile =
            make_profile({Strategy::delegate_to(1, t), Strategy::delegate_to(1, t)});
        CHECK(utility(g2, profile, 0) == doctest::Approx(g2.profit / 4.0).epsilon(1e-12));
        CHECK(utility(g2, profile, 1) == doctest::Approx(g2.profit / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("cache utilities agree with from-scratch evaluation") {
    Rng rng(1234);
    VsgInstance g;
    g.profit = 30.0;
    for (int i = 0; i < 30; ++i) {
        g.users.push_back({i, 0.3 + 0.7 * rng.uniform(), 0.2 + 0.7 * rng.uniform(),
                           10.0 + 60.0 * rng.uniform()});
    }
    for (int j = 0; j < 4; ++j) {
        g.validators.push_back({j, 0.5 + 0.5 * rng.uniform(), 0.5 + 0.5 * rng.uniform(),
                                0.2 * rng.uniform()});
    }
    GroupTrustCache cache(g, random_profile(g, rng));
    for (int step = 0; step < 1000; ++step) {
        const int i = static_cast<int>(rng.uniform_below(30));
        const int j = static_cast<int>(rng.uniform_below(4));
        const long tmax = max_tokens(g.users[static_cast<std::size_t>(i)].budget,
                                     g.validators[static_cast<std::size_t>(j)].commission);
        const long t = static_cast<long>(rng.uniform_below(static_cast<std::uint64_t>(tmax) + 1));
        cache.apply(i, t == 0 ? Strategy::abstain()
                              : Strategy::delegate_to(j, static_cast<double>(t)));
        if (step % 50 == 0 || step > 990) {
            const auto trusts = group_trusts(g, cache.profile());
            for (int v = 0; v < g.num_validators(); ++v) {
                CHECK(cache.group_trust(v) == doctest::Approx(trusts[static_cast<std::size_t>(v)]).epsilon(1e-9));
            }
            for (int u = 0; u < g.num_users(); ++u) {
                CHECK(cache.utility(u) ==
                      doctest::Approx(utility(g, cache.profile(), u)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("best responses match exhaustive enumeration") {
    Rng rng(555);
    for (int trial = 0; trial < 40; ++trial) {
        const VsgInstance g = random_small_instance(rng);
        const StrategyProfile profile = random_profile(g, rng);
        GroupTrustCache cache(g, profile);
        for (int i = 0; i < g.num_users(); ++i) {
            const BestResponse br = best_response_sets(cache, i);
            const BruteForce oracle = brute_force_best(g, profile, i);
            CHECK(br.best_utility ==
                  doctest::Approx(oracle.best_utility).epsilon(1e-9));
            // Every oracle maximizer appears in the cached best set.
            for (const Strategy& s : oracle.best) {
                const bool found =
                    std::find(br.best.begin(), br.best.end(), s) != br.best.end();
                CHECK(found);
            }
            // Soundness of the better set.
            for (const Strategy& s : br.better) {
                StrategyProfile scratch = profile;
                scratch.strategies[static_cast<std::size_t>(i)] = s;
                CHECK(utility(g, scratch, i) > br.current_utility);
            }
            // Budget safety for everything returned.
            for (const Strategy& s : br.best) {
                if (!s.is_abstain()) {
                    CHECK(s.tokens *
                              (1.0 + g.validators[static_cast<std::size_t>(*s.delegation)].commission) <=
                          g.users[static_cast<std::size_t>(i)].budget);
                }
            }
        }
    }
}

TEST_CASE("best response of a user already at the optimum") {
    VsgInstance g;
    g.profit = 30.0;
    g.users = {{0, 0.8, 0.3, 10.0}};
    g.validators = {{0, 0.7, 1.0, 0.1}};
    // Sole delegator: u = r - w t strictly decreases in t, so t=1 is the
    // unique best response.
    GroupTrustCache cache(g, make_profile({Strategy::delegate_to(0, 1)}));
    const BestResponse br = best_response_sets(cache, 0);
    REQUIRE(br.best.size() == 1);
    CHECK(br.best.front() == Strategy::delegate_to(0, 1));
    CHECK(br.better.empty());
}

TEST_CASE("Nash verdicts") {
    SUBCASE("all-abstain is refuted when one token pays") {
        const VsgInstance g = example_market();
        const auto idle = make_profile({Strategy::abstain(), Strategy::abstain()});
        const NashVerdict v = is_nash(g, idle);
        CHECK_FALSE(v.equilibrium);
        REQUIRE(v.witness.has_value());
        // The witness must really improve (sole delegator earns r - w t > 0).
        StrategyProfile deviated = idle;
        deviated.strategies[static_cast<std::size_t>(v.witness->user)] = v.witness->strategy;
        CHECK(utility(g, deviated, v.witness->user) > 0.0);
    }

    SUBCASE("one-user one-validator game settles at a single token") {
        VsgInstance g;
        g.profit = 10.0;
        g.users = {{0, 0.8, 0.3, 20.0}};
        g.validators = {{0, 0.7, 1.0, 0.1}};
        CHECK(is_nash(g, make_profile({Strategy::delegate_to(0, 1)})).equilibrium);
        CHECK_FALSE(is_nash(g, make_profile({Strategy::delegate_to(0, 2)})).equilibrium);
        CHECK_FALSE(is_nash(g, make_profile({Strategy::abstain()})).equilibrium);
    }

    SUBCASE("rounded single-validator equilibrium holds within grid tolerance") {
        const int n = 4;
        const SingleValidatorNe ne = single_validator_ne(n, 40.0, 0.08, 0.75, 0.7, 0.45);
        VsgInstance g;
        g.profit = 40.0;
        g.validators = {{0, 0.75, 1.0, 0.08}};
        for (int i = 0; i < n; ++i) g.users.push_back({i, 0.7, 0.45, 2.0 * ne.budget_floor});
        const double t_rounded = std::round(ne.tokens);
        StrategyProfile profile;
        profile.strategies.assign(n, Strategy::delegate_to(0, t_rounded));
        // Any discrete gain is bounded by the gap to the continuous optimum.
        GroupTrustCache cache(g, profile);
        const double trust = cache.group_trust(0);
        const double w = 1.0 + 0.08 - trust;
        const double others = trust * t_rounded * (n - 1);
        const double t_cont = continuous_optimal_tokens(g.profit, others, w, trust);
        const double u_cont = cache.utility_of(0, Strategy::delegate_to(0, t_cont));
        const double grid_gap = u_cont - cache.utility(0);
        CHECK(is_nash(g, profile, grid_gap + 1e-9).equilibrium);
    }
}

TEST_CASE("continuous optimal tokens") {
    CHECK(continuous_optimal_tokens(30.0, 0.0, 0.2, 0.9) == 0.0);
    CHECK_THROWS_AS(continuous_optimal_tokens(30.0, 5.0, 0.0, 0.9), ConditionError);
    CHECK_THROWS_AS(continuous_optimal_tokens(30.0, 5.0, -0.1, 0.9), ConditionError);

    SUBCASE("mutual fixed point of the symmetric two-user market") {
        const double r = 30.0;
        const double trust = trust_hupe(2, 0.8, 0.3, 0.6);
        const double w = 1.0 + 0.1 - trust;
        const double t = r / (4.0 * w);
        const double reply = continuous_optimal_tokens(r, trust * t, w, trust);
        CHECK(reply == doctest::Approx(t).epsilon(1e-10));
    }

    SUBCASE("zeroes the derivative of the one-dimensional utility") {
        Rng rng(77);
        for (int it = 0; it < 500; ++it) {
            const double r = 5.0 + 45.0 * rng.uniform();
            const double others = 0.5 + 50.0 * rng.uniform();
            const double w = 0.02 + 0.5 * rng.uniform();
            const double trust = 0.3 + 0.69 * rng.uniform();
            const double t_star = continuous_optimal_tokens(r, others, w, trust);
            if (t_star <= 0.0) continue;
            auto u = [&](double t) { return r * trust * t / (others + trust * t) - w * t; };
            const double h = std::max(1e-6, 1e-6 * t_star);
            const double deriv = (u(t_star + h) - u(t_star - h)) / (2.0 * h);
            CHECK(std::abs(deriv) <= 1e-6 * r);
        }
    }
}

TEST_CASE("single-validator equilibrium constructor") {
    const SingleValidatorNe ne = single_validator_ne(2, 30.0, 0.1, 0.7, 0.6, 0.5);
    CHECK(ne.user_utility == doctest::Approx(7.5).epsilon(1e-15));
    CHECK(ne.budget_floor == doctest::Approx(ne.tokens * 1.1).epsilon(1e-15));

    SUBCASE("per-user utility is exactly r/n^2") {
        Rng rng(88);
        for (int it = 0; it < 200; ++it) {
            const int n = 2 + static_cast<int>(rng.uniform_below(40));
            const double r = 1.0 + 99.0 * rng.uniform();
            const SingleValidatorNe x = single_validator_ne(
                n, r, 0.2 * rng.uniform(), 0.5 + 0.45 * rng.uniform(),
                0.55 + 0.4 * rng.uniform(), 0.5 * rng.uniform());
            CHECK(x.user_utility == doctest::Approx(r / (n * static_cast<double>(n)))
                                        .epsilon(1e-14));
        }
    }

    SUBCASE("tokens and utility vanish as the market grows") {
        double prev_t = 1e300;
        double prev_u = 1e300;
        for (int n = 2; n <= 200; n *= 2) {
            const SingleValidatorNe x = single_validator_ne(n, 30.0, 0.1, 0.7, 0.6, 0.5);
            CHECK(x.tokens < prev_t);
            CHECK(x.user_utility < prev_u);
            prev_t = x.tokens;
            prev_u = x.user_utility;
        }
    }

    CHECK_THROWS_AS(single_validator_ne(1, 30.0, 0.1, 0.7, 0.6, 0.5), ConditionError);
    CHECK_THROWS_AS(single_validator_ne(2, 30.0, 0.1, 0.7, 0.5, 0.5), ConditionError);
    CHECK_THROWS_AS(single_validator_ne(2, 30.0, 0.1, 0.7, 0.4, 0.5), ConditionError);
}

namespace {

// Continuous unilateral deviation scan: no sampled strategy may beat the
// constructed profile by more than `tol`.
void deviation_scan(const VsgInstance& g, const StrategyProfile& profile, int samples,
                    double tol, Rng& rng) {
    GroupTrustCache cache(g, profile);
    for (int s = 0; s < samples; ++s) {
        const int i = static_cast<int>(rng.uniform_below(
            static_cast<std::uint64_t>(g.num_users())));
        const int j = static_cast<int>(rng.uniform_below(
            static_cast<std::uint64_t>(g.num_validators())));
        const double tmax = g.users[static_cast<std::size_t>(i)].budget /
                            (1.0 + g.validators[static_cast<std::size_t>(j)].commission);
        const double t = tmax * rng.uniform();
        const double u = t == 0.0 ? 0.0 : cache.utility_of(i, Strategy::delegate_to(j, t));
        CHECK(u <= cache.utility(i) + tol);
    }
}

}  // namespace

TEST_CASE("homogeneous-validator equilibrium constructor") {
    SUBCASE("single validator reduces to the closed form") {
        const SingleValidatorNe ne = single_validator_ne(3, 60.0, 0.05, 0.8, 0.7, 0.4);
        VsgInstance g;
        g.profit = 60.0;
        g.validators = {{0, 0.8, 1.0, 0.05}};
        for (int i = 0; i < 3; ++i) g.users.push_back({i, 0.7, 0.4, 2.0 * ne.budget_floor});
        const StrategyProfile profile = homogeneous_ne(g);
        for (const Strategy& s : profile.strategies) {
            CHECK(*s.delegation == 0);
            CHECK(s.tokens == doctest::Approx(ne.tokens).epsilon(1e-15));
        }
    }

    SUBCASE("no cross-validator deviation pays") {
        VsgInstance g;
        g.profit = 30.0;
        for (int j = 0; j < 3; ++j) g.validators.push_back({j, 0.75, 1.0, 0.06});
        const SingleValidatorNe ne = single_validator_ne(5, 30.0, 0.06, 0.75, 0.65, 0.45);
        for (int i = 0; i < 5; ++i) g.users.push_back({i, 0.65, 0.45, 2.0 * ne.budget_floor});
        const StrategyProfile profile = homogeneous_ne(g);
        CHECK(*profile.strategies.front().delegation == 0);

        GroupTrustCache cache(g, profile);
        const double u_now = cache.utility(0);
        for (int j = 1; j < 3; ++j) {
            // Optimal continuous deviation to validator j (user 0 alone there).
            const double t_self = trust_hupe(1, 0.65, 0.45, 0.75);
            const double w = 1.0 + 0.06 - t_self;
            const double others = trust_hupe(4, 0.65, 0.45, 0.75) * ne.tokens * 4.0;
            const double t_dev = continuous_optimal_tokens(30.0, others, w, t_self);
            if (t_dev > 0.0) {
                CHECK(cache.utility_of(0, Strategy::delegate_to(j, t_dev)) <= u_now + 1e-9);
            }
        }
        Rng rng(99);
        deviation_scan(g, profile, 200, 1e-9, rng);
    }

    SUBCASE("budget condition violations are loud") {
        VsgInstance g;
        g.profit = 30.0;
        g.validators = {{0, 0.75, 1.0, 0.06}, {1, 0.75, 1.0, 0.06}};
        g.users = {{0, 0.65, 0.45, 1.0}, {1, 0.65, 0.45, 1.0}};
        CHECK_THROWS_AS(homogeneous_ne(g), ConditionError);

        VsgInstance mixed = g;
        mixed.validators[1].commission = 0.2;
        CHECK_THROWS_AS(homogeneous_ne(mixed), ConditionError);
    }
}

TEST_CASE("commission-free equilibrium constructor") {
    VsgInstance g;
    g.profit = 30.0;
    g.validators = {{0, 0.9, 1.0, 0.0}, {1, 0.6, 1.0, 0.0}, {2, 0.7, 1.0, 0.0}};
    const int n = 4;
    for (int i = 0; i < n; ++i) g.users.push_back({i, 0.7, 0.5, 500.0});

    const StrategyProfile profile = commission_free_ne(g);
    // Highest integrity wins.
    for (const Strategy& s : profile.strategies) CHECK(*s.delegation == 0);
    const double trust = trust_hupe(n, 0.7, 0.5, 0.9);
    CHECK(profile.strategies.front().tokens ==
          doctest::Approx((n - 1) * 30.0 / (n * n * (1.0 - trust))).epsilon(1e-12));
    Rng rng(111);
    deviation_scan(g, profile, 200, 1e-9, rng);

    SUBCASE("ties break to the lowest index") {
        VsgInstance tied = g;
        tied.validators[2].integrity = 0.9;
        const StrategyProfile p2 = commission_free_ne(tied);
        CHECK(*p2.strategies.front().delegation == 0);
    }

    SUBCASE("nonzero commission is rejected") {
        VsgInstance bad = g;
        bad.validators[1].commission = 0.01;
        CHECK_THROWS_AS(commission_free_ne(bad), ConditionError);
    }
}
