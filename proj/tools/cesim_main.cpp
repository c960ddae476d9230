// Command-line front end: single runs, PPO training, the canned experiment
// grids, and trace verification. Failures exit nonzero with a one-line JSON
// error object on stderr so wrapping scripts can parse them.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cesim/harness.hpp"
#include "cesim/scenario.hpp"

namespace {

cesim::Scenario load_scenario(const std::string& path) {
    cesim::Scenario sc = cesim::parse_scenario_file(path);
    sc.validate();
    return sc;
}

double parse_delay(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "INF")
        return std::numeric_limits<double>::infinity();
    return std::stod(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cloud-edge pipeline scheduling simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, checkpoint, policy_name, trace_path;
    std::uint64_t seed = 0;
    bool have_seed = false, write_trace = false;
    double horizon = -1.0;

    auto add_common = [&](CLI::App* cmd, bool needs_scenario = true) {
        if (needs_scenario)
            cmd->add_option("--scenario", scenario_path, "scenario file (INI)")
                ->required();
        cmd->add_option("--horizon", horizon,
                        "override the arrival horizon in seconds");
    };

    // --- run ---------------------------------------------------------------
    CLI::App* run = app.add_subcommand("run", "one simulation, full artifacts");
    add_common(run);
    run->add_option("--policy", policy_name,
                    "ppo | random | round_robin | eps | cps (default: scenario)");
    run->add_option("--seed", seed, "run seed (default: scenario)")
        ->each([&](const std::string&) { have_seed = true; });
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--checkpoint", checkpoint, "PPO weights (for --policy ppo)");
    run->add_flag("--trace", write_trace, "also write events.jsonl");

    // --- train ---------------------------------------------------------------
    CLI::App* train = app.add_subcommand("train", "PPO training on a scenario");
    add_common(train);
    std::string ckpt_out;
    int episodes = 300;
    std::string rates_csv = "50";
    train->add_option("--out", ckpt_out, "checkpoint output path")->required();
    train->add_option("--episodes", episodes, "training episodes (default 300)");
    train->add_option("--rates", rates_csv,
                      "episode request rates, comma separated (default 50; pass "
                      "e.g. 10,50,200 for mixed-rate training)");
    double ep_horizon = 2.5;
    train->add_option("--episode-horizon", ep_horizon,
                      "arrival horizon per episode, seconds (default 2.5)");
    train->add_option("--seed", seed, "base seed (default: scenario)")
        ->each([&](const std::string&) { have_seed = true; });

    // --- sweep ---------------------------------------------------------------
    CLI::App* sweep = app.add_subcommand(
        "sweep", "rate x policy x seed comparison grid");
    add_common(sweep);
    std::string sweep_rates = "10,50,200", sweep_seeds = "1,2,3,4,5",
                sweep_policies = "random,round_robin,eps,cps,ppo";
    sweep->add_option("--rates", sweep_rates, "request rates (default 10,50,200)");
    sweep->add_option("--seeds", sweep_seeds, "seeds (default 1,2,3,4,5)");
    sweep->add_option("--policies", sweep_policies,
                      "policies (default all five)");
    sweep->add_option("--checkpoint", checkpoint, "trained PPO weights");
    sweep->add_option("--out", out_dir, "output directory");

    // --- degrade ---------------------------------------------------------------
    CLI::App* degrade = app.add_subcommand(
        "degrade", "link-degradation response-time grid");
    add_common(degrade);
    std::string fractions_csv = "0.2,0.4,0.6,0.8,1.0";
    std::string delays_csv = "0,20,100,500,inf";
    std::string degrade_seeds = "1";
    degrade->add_option("--fractions", fractions_csv,
                        "affected link fractions (default 0.2..1.0)");
    degrade->add_option("--delays", delays_csv,
                        "added per-hop delays in ms, 'inf' = loss "
                        "(default 0,20,100,500,inf)");
    degrade->add_option("--seeds", degrade_seeds, "seeds (default 1)");
    degrade->add_option("--checkpoint", checkpoint, "PPO weights if needed");
    degrade->add_option("--out", out_dir, "output directory");

    // --- partition-compare -----------------------------------------------------
    CLI::App* pcomp = app.add_subcommand(
        "partition-compare", "serial vs full-parallel vs greedy pipelines");
    add_common(pcomp);
    std::string pcomp_seeds = "1,2,3";
    pcomp->add_option("--seeds", pcomp_seeds, "seeds (default 1,2,3)");
    pcomp->add_option("--out", out_dir, "output directory");

    // --- verify-trace -----------------------------------------------------------
    CLI::App* verify = app.add_subcommand("verify-trace",
                                          "check a JSONL event trace");
    verify->add_option("log", trace_path, "events.jsonl path")->required();
    std::string verdict_out;
    verify->add_option("--out", verdict_out, "also write the verdict JSON here");

    CLI11_PARSE(app, argc, argv);

    auto parse_doubles = [](const std::string& csv) {
        std::vector<double> v;
        std::stringstream ss(csv);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) v.push_back(parse_delay(item));
        return v;
    };
    auto parse_seeds = [](const std::string& csv) {
        std::vector<std::uint64_t> v;
        std::stringstream ss(csv);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) v.push_back(std::stoull(item));
        return v;
    };

    try {
        if (out_dir.empty()) out_dir = cesim::default_out_dir();

        if (run->parsed()) {
            cesim::Scenario sc = load_scenario(scenario_path);
            if (horizon > 0) sc.horizon_s = horizon;
            const cesim::PolicyKind policy =
                policy_name.empty() ? sc.policy
                                    : cesim::policy_kind_from_string(policy_name);
            const std::string ckpt =
                checkpoint.empty() ? sc.checkpoint_path : checkpoint;
            const cesim::SummaryReport s = cesim::run_once(
                sc, policy, ckpt, have_seed ? seed : sc.seed, out_dir, write_trace);
            std::cout << cesim::summary_to_json(s) << "\n";
        } else if (train->parsed()) {
            cesim::Scenario sc = load_scenario(scenario_path);
            if (horizon > 0) sc.horizon_s = horizon;
            if (have_seed) sc.seed = seed;
            cesim::TrainingOptions opt;
            opt.episodes = episodes;
            opt.rates_hz = parse_doubles(rates_csv);
            opt.episode_horizon_s = ep_horizon;
            const cesim::TrainingOutcome res =
                cesim::run_training(sc, opt, ckpt_out);
            nlohmann::json j;
            j["episodes"] = res.curve.size();
            j["best_episode"] = res.best_episode;
            j["best_running_mean_reward"] = res.best_running_mean;
            j["diverged"] = res.diverged;
            j["checkpoint"] = res.checkpoint_path;
            j["curve"] = res.curve_path;
            std::cout << j.dump(2) << "\n";
        } else if (sweep->parsed()) {
            cesim::Scenario sc = load_scenario(scenario_path);
            if (horizon > 0) sc.horizon_s = horizon;
            cesim::SweepOptions opt;
            opt.rates_hz = parse_doubles(sweep_rates);
            opt.seeds = parse_seeds(sweep_seeds);
            opt.policies.clear();
            std::stringstream ss(sweep_policies);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty())
                    opt.policies.push_back(cesim::policy_kind_from_string(item));
            cesim::run_workload_sweep(sc, opt, checkpoint, out_dir);
            std::cout << "{\"ok\":true,\"out\":\"" << out_dir << "\"}\n";
        } else if (degrade->parsed()) {
            cesim::Scenario sc = load_scenario(scenario_path);
            if (horizon > 0) sc.horizon_s = horizon;
            cesim::run_degradation_grid(sc, parse_doubles(fractions_csv),
                                        parse_doubles(delays_csv),
                                        parse_seeds(degrade_seeds), checkpoint,
                                        out_dir);
            std::cout << "{\"ok\":true,\"out\":\"" << out_dir << "\"}\n";
        } else if (pcomp->parsed()) {
            cesim::Scenario sc = load_scenario(scenario_path);
            if (horizon > 0) sc.horizon_s = horizon;
            cesim::run_partition_comparison(sc, parse_seeds(pcomp_seeds), out_dir);
            std::cout << "{\"ok\":true,\"out\":\"" << out_dir << "\"}\n";
        } else if (verify->parsed()) {
            const cesim::VerifyResult res = cesim::verify_trace_file(trace_path);
            const std::string verdict = res.to_json();
            std::cout << verdict << "\n";
            if (!verdict_out.empty()) {
                std::ofstream f(verdict_out);
                f << verdict << "\n";
            }
            return res.pass ? 0 : 1;
        }
        return 0;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
