// vsg-sim: delegation-market simulator CLI.
//
// Subcommands: gen-scenario, simulate, check-ne, trust-curve.
// Exit codes: 0 success, 2 usage error, 3 I/O or file-format error,
// 4 domain/precondition error.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "vsg/analysis.hpp"
#include "vsg/dynamics.hpp"
#include "vsg/game.hpp"
#include "vsg/scenario.hpp"
#include "vsg/trust.hpp"

namespace fs = std::filesystem;

namespace {

enum class LogLevel { off = 0, info = 1, debug = 2 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("VSG_SIM_LOG");
        if (env == nullptr) return LogLevel::off;
        const std::string v(env);
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::off;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << "[vsg-sim] " << msg << '\n';
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", x);
    return buf;
}

vsg::ScenarioSpec load_spec(const std::string& spec_arg) {
    if (spec_arg == "default-paper") return vsg::ScenarioSpec::default_paper();
    std::ifstream in(spec_arg);
    if (!in) throw std::runtime_error("cannot open spec file " + spec_arg);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw vsg::SchemaError(spec_arg + ": " + e.what());
    }
    vsg::ScenarioSpec spec = vsg::ScenarioSpec::default_paper();
    spec.n_users = doc.value("n_users", spec.n_users);
    spec.n_validators = doc.value("n_validators", spec.n_validators);
    spec.profit = doc.value("profit", spec.profit);
    auto gauss = [&doc](const char* key, vsg::GaussianSpec fallback) {
        if (!doc.contains(key)) return fallback;
        return vsg::GaussianSpec{doc[key].value("mean", fallback.mean),
                                 doc[key].value("stddev", fallback.stddev)};
    };
    spec.integrity = gauss("integrity", spec.integrity);
    spec.evidence_quality = gauss("evidence_quality", spec.evidence_quality);
    spec.accuracy = gauss("accuracy", spec.accuracy);
    spec.error = gauss("error", spec.error);
    spec.budget = gauss("budget", spec.budget);
    spec.commission_noise_std = doc.value("commission_noise_std", spec.commission_noise_std);
    return spec;
}

struct CellResult {
    std::vector<vsg::GbrdResult> runs;
    std::vector<vsg::RunSummary> summaries;
};

CellResult run_cell(const vsg::VsgInstance& game, double epsilon, int rounds,
                    int instances, std::uint64_t base_seed, double convergence,
                    vsg::ConvergenceMode mode, int jobs) {
    CellResult cell;
    cell.runs.resize(static_cast<std::size_t>(instances));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= instances) break;
            vsg::GbrdConfig cfg;
            cfg.epsilon = epsilon;
            cfg.round_limit = rounds;
            cfg.convergence_ratio = convergence;
            cfg.mode = mode;
            cfg.seed = base_seed + static_cast<std::uint64_t>(k);
            cell.runs[static_cast<std::size_t>(k)] = vsg::run_gbrd(game, cfg);
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (const vsg::GbrdResult& run : cell.runs) {
        cell.summaries.push_back(vsg::summarize(game, run.final_profile));
    }
    return cell;
}

int cmd_gen_scenario(const std::string& spec_arg, std::uint64_t seed,
                     const std::string& out_path) {
    const vsg::ScenarioSpec spec = load_spec(spec_arg);
    vsg::Rng rng(seed);
    const vsg::VsgInstance game = vsg::sample_instance(spec, rng);
    vsg::InstanceMeta meta;
    meta.seed = seed;
    meta.spec_name = spec_arg;
    meta.notes = "budget clamped to >= 1 (no clamp stated for budgets)";
    vsg::save_instance(game, out_path, meta);
    log_info("wrote instance with " + std::to_string(game.num_users()) + " users, " +
             std::to_string(game.num_validators()) + " validators to " + out_path);
    return 0;
}

int cmd_simulate(const std::string& instance_path, const std::vector<double>& epsilons,
                 const std::vector<int>& round_limits, int instances,
                 std::uint64_t base_seed, double convergence, const std::string& mode_str,
                 const std::string& out_dir, int jobs) {
    const vsg::VsgInstance game = vsg::load_instance(instance_path);
    const vsg::ConvergenceMode mode = mode_str == "absolute"
                                          ? vsg::ConvergenceMode::absolute
                                          : vsg::ConvergenceMode::relative;
    fs::create_directories(out_dir);
    std::ofstream sweep(fs::path(out_dir) / "sweep_summary.csv");
    if (!sweep) throw std::runtime_error("cannot open sweep_summary.csv");
    sweep << "epsilon,rounds,instances,delegation_rate_mean,delegation_rate_std,"
             "token_usage_mean,token_usage_std,hhi_mean,hhi_std\n";

    for (const double epsilon : epsilons) {
        for (const int rounds : round_limits) {
            log_info("cell epsilon=" + format_number(epsilon) + " rounds=" +
                     std::to_string(rounds));
            const CellResult cell = run_cell(game, epsilon, rounds, instances, base_seed,
                                             convergence, mode, jobs);
            for (int k = 0; k < instances; ++k) {
                const std::string run_id =
                    "e" + format_number(epsilon) + "_rl" + std::to_string(rounds) +
                    "_s" + std::to_string(base_seed + static_cast<std::uint64_t>(k));
                const vsg::GbrdResult& run = cell.runs[static_cast<std::size_t>(k)];
                const vsg::RunSummary& summary = cell.summaries[static_cast<std::size_t>(k)];
                vsg::write_validators_csv(fs::path(out_dir) / (run_id + "_validators.csv"),
                                          game, summary);
                vsg::write_users_csv(fs::path(out_dir) / (run_id + "_users.csv"), game,
                                     run.final_profile, summary);
                vsg::write_trajectory_csv(fs::path(out_dir) / (run_id + "_trajectory.csv"),
                                          run.trajectory);
            }
            const vsg::AggregateSummary agg = vsg::aggregate(cell.summaries);
            sweep << format_number(epsilon) << ',' << rounds << ',' << instances << ','
                  << vsg::detail::fmt(agg.delegation_rate_mean) << ','
                  << vsg::detail::fmt(agg.delegation_rate_std) << ','
                  << vsg::detail::fmt(agg.token_usage_mean) << ','
                  << vsg::detail::fmt(agg.token_usage_std) << ','
                  << vsg::detail::fmt(agg.hhi_mean) << ','
                  << vsg::detail::fmt(agg.hhi_std) << '\n';
        }
    }
    return 0;
}

// Central finite difference of user 0's utility in their own token coordinate.
double stationarity_residual(const vsg::VsgInstance& game,
                             const vsg::StrategyProfile& profile) {
    const vsg::GroupTrustCache cache(game, profile);
    const vsg::Strategy& s0 = profile.strategies.front();
    const int j = *s0.delegation;
    const double t = s0.tokens;
    const double h = std::max(1e-6, 1e-4 * t);
    const double up = cache.utility_of(0, vsg::Strategy::delegate_to(j, t + h));
    const double dn = cache.utility_of(0, vsg::Strategy::delegate_to(j, t - h));
    return std::abs(up - dn) / (2.0 * h);
}

int cmd_check_ne(const std::string& instance_path, const std::string& profile_path,
                 const std::string& construct, int n, double r, double c, double p,
                 double q, double qbar) {
    if (!construct.empty()) {
        if (construct == "single") {
            const vsg::SingleValidatorNe ne = vsg::single_validator_ne(n, r, c, p, q, qbar);
            vsg::VsgInstance game;
            game.profit = r;
            game.validators.push_back({0, p, 1.0, c});
            for (int i = 0; i < n; ++i) {
                game.users.push_back({i, q, qbar, ne.budget_floor});
            }
            vsg::StrategyProfile profile;
            profile.strategies.assign(static_cast<std::size_t>(n),
                                      vsg::Strategy::delegate_to(0, ne.tokens));
            const double residual = stationarity_residual(game, profile);
            std::cout << "equilibrium (residual " << residual << " <= "
                      << 1e-6 * r << ")\n"
                      << "tokens per user: " << ne.tokens << '\n'
                      << "utility per user: " << ne.user_utility << '\n'
                      << "budget floor: " << ne.budget_floor << '\n';
            return residual <= 1e-6 * r ? 0 : 4;
        }
        const vsg::VsgInstance game = vsg::load_instance(instance_path);
        const vsg::StrategyProfile profile = construct == "homogeneous"
                                                 ? vsg::homogeneous_ne(game)
                                                 : vsg::commission_free_ne(game);
        const double residual = stationarity_residual(game, profile);
        std::cout << "equilibrium (residual " << residual << " <= "
                  << 1e-6 * game.profit << ")\n"
                  << "validator: " << *profile.strategies.front().delegation << '\n'
                  << "tokens per user: " << profile.strategies.front().tokens << '\n';
        return residual <= 1e-6 * game.profit ? 0 : 4;
    }

    const vsg::VsgInstance game = vsg::load_instance(instance_path);
    const vsg::StrategyProfile profile = vsg::load_profile(profile_path);
    profile.validate(game);
    const vsg::NashVerdict verdict = vsg::is_nash(game, profile);
    if (verdict.equilibrium) {
        std::cout << "equilibrium\n";
        return 0;
    }
    const vsg::Deviation& dev = *verdict.witness;
    std::cout << "not an equilibrium: user " << dev.user << " improves by " << dev.gain
              << " via ";
    if (dev.strategy.is_abstain()) {
        std::cout << "abstaining\n";
    } else {
        std::cout << "delegating " << dev.strategy.tokens << " tokens to validator "
                  << *dev.strategy.delegation << '\n';
    }
    return 0;
}

int cmd_trust_curve(double p, double q, double qbar, long kmax,
                    const std::string& out_path) {
    const auto series = vsg::trust_curve(p, q, qbar, kmax);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << "k,trust\n";
    for (const auto& [k, trust] : series) {
        out << k << ',' << vsg::detail::fmt(trust) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delegation-market simulator: Bayesian trust, best-response "
                 "dynamics, and equilibrium checks"};
    app.require_subcommand(1);

    // gen-scenario
    auto* gen = app.add_subcommand("gen-scenario", "Sample a game instance to JSON");
    std::string gen_spec = "default-paper";
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--spec", gen_spec, "Spec JSON file or 'default-paper'");
    gen->add_option("--seed", gen_seed, "Sampling seed");
    gen->add_option("--out", gen_out, "Output instance path")->required();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run best-response dynamics sweeps");
    std::string sim_instance;
    std::vector<double> sim_epsilons{1.0};
    std::vector<int> sim_rounds{1};
    int sim_instances = 1;
    std::uint64_t sim_seed = 0;
    double sim_convergence = 0.01;
    std::string sim_mode = "relative";
    std::string sim_outdir;
    int sim_jobs = 1;
    sim->add_option("--instance", sim_instance, "Instance JSON file")->required();
    sim->add_option("--epsilon", sim_epsilons, "Greedy probabilities (one or more)")
        ->delimiter(',');
    sim->add_option("--rounds", sim_rounds, "Round limits (one or more)")->delimiter(',');
    sim->add_option("--instances", sim_instances, "Runs per cell")
        ->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_seed, "Base seed; run k uses seed+k");
    sim->add_option("--convergence", sim_convergence, "Convergence threshold");
    sim->add_option("--mode", sim_mode, "Convergence test: relative|absolute")
        ->check(CLI::IsMember({"relative", "absolute"}));
    sim->add_option("--out-dir", sim_outdir, "Output directory")->required();
    sim->add_option("--jobs", sim_jobs, "Worker threads per cell")
        ->check(CLI::PositiveNumber);

    // check-ne
    auto* chk = app.add_subcommand("check-ne", "Verify or construct an equilibrium");
    std::string chk_instance, chk_profile, chk_construct;
    int chk_n = 2;
    double chk_r = 30.0, chk_c = 0.0, chk_p = 0.7, chk_q = 0.6, chk_qbar = 0.5;
    chk->add_option("--instance", chk_instance, "Instance JSON file");
    chk->add_option("--profile", chk_profile, "Profile JSON file");
    chk->add_option("--construct", chk_construct,
                    "Closed-form construction: single|homogeneous|commission-free")
        ->check(CLI::IsMember({"single", "homogeneous", "commission-free"}));
    chk->add_option("--n", chk_n, "User count (single)");
    chk->add_option("--r", chk_r, "Profit (single)");
    chk->add_option("--c", chk_c, "Commission (single)");
    chk->add_option("--p", chk_p, "Integrity (single)");
    chk->add_option("--q", chk_q, "Accuracy (single)");
    chk->add_option("--qbar", chk_qbar, "Error (single)");

    // trust-curve
    auto* tc = app.add_subcommand("trust-curve", "Trust vs. group size series");
    double tc_p = 0.7, tc_q = 0.6, tc_qbar = 0.5;
    long tc_kmax = 50;
    std::string tc_out;
    tc->add_option("--p", tc_p, "Validator integrity")->required();
    tc->add_option("--q", tc_q, "User accuracy")->required();
    tc->add_option("--qbar", tc_qbar, "User error")->required();
    tc->add_option("--kmax", tc_kmax, "Maximum group size");
    tc->add_option("--out", tc_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_scenario(gen_spec, gen_seed, gen_out);
        if (sim->parsed()) {
            return cmd_simulate(sim_instance, sim_epsilons, sim_rounds, sim_instances,
                                sim_seed, sim_convergence, sim_mode, sim_outdir, sim_jobs);
        }
        if (chk->parsed()) {
            if (chk_construct.empty() && (chk_instance.empty() || chk_profile.empty())) {
                std::cerr << "check-ne needs either --construct or both --instance "
                             "and --profile\n";
                return 2;
            }
            if ((chk_construct == "homogeneous" || chk_construct == "commission-free") &&
                chk_instance.empty()) {
                std::cerr << "check-ne --construct " << chk_construct
                          << " needs --instance\n";
                return 2;
            }
            return cmd_check_ne(chk_instance, chk_profile, chk_construct, chk_n, chk_r,
                                chk_c, chk_p, chk_q, chk_qbar);
        }
        if (tc->parsed()) return cmd_trust_curve(tc_p, tc_q, tc_qbar, tc_kmax, tc_out);
    } catch (const vsg::ConditionError& e) {
        std::cerr << "condition error: " << e.what() << '\n';
        return 4;
    } catch (const vsg::DegenerateEvidenceError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 4;
    } catch (const vsg::SchemaError& e) {
        std::cerr << "file format error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
