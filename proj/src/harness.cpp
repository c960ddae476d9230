#include "cesim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "cesim/partition.hpp"
#include "cesim/workload.hpp"

namespace cesim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_opt(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("NA");
}

std::map<std::string, std::string> mode_flags_for(const Scenario& sc) {
    std::map<std::string, std::string> m;
    m["artifact_version"] = std::to_string(kArtifactVersion);
    m["haversine"] =
        sc.haversine_mode == HaversineMode::Canonical ? "canonical" : "literal";
    m["shannon"] =
        sc.link.shannon_mode == ShannonMode::Physical ? "physical" : "literal";
    m["reward"] = to_string(sc.ppo.reward_mode);
    m["timeout"] = sc.timeout_enabled ? "on" : "off";
    m["backhaul"] = sc.link.backhaul_available ? "on" : "off";
    return m;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw HarnessError("cannot create output directory '" + dir +
                           "': " + ec.message());
}

std::string path_join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

PolicyNetwork load_checkpoint(const std::string& path) {
    if (path.empty())
        throw HarnessError(
            "the ppo policy needs a checkpoint file; train one first or pass "
            "--checkpoint");
    if (!std::filesystem::exists(path))
        throw HarnessError("checkpoint not found: " + path);
    return PolicyNetwork::load(path);
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace

std::string default_out_dir() {
    if (const char* env = std::getenv("CESIM_OUT_DIR"); env && *env) return env;
    return "cesim-out";
}

const std::vector<WorkloadReferencePoint>& workload_reference_points() {
    static const std::vector<WorkloadReferencePoint> kTable = {
        {10, PolicyKind::Random, 736.56, 16.35, 752.91, 23.36, 13.35},
        {10, PolicyKind::RoundRobin, 816.09, 14.49, 830.58, 27.63, 15.92},
        {10, PolicyKind::Eps, 866.00, 23.04, 889.04, 28.25, 12.01},
        {10, PolicyKind::Cps, 486.86, 14.50, 501.36, 47.03, 16.34},
        {10, PolicyKind::Ppo, 495.84, 13.92, 509.76, 20.12, 16.49},
        {50, PolicyKind::Random, 878.70, 24.51, 903.21, 25.21, 65.08},
        {50, PolicyKind::RoundRobin, 828.62, 20.45, 849.07, 23.57, 61.31},
        {50, PolicyKind::Eps, 1179.88, 26.27, 1206.15, 21.21, 59.08},
        {50, PolicyKind::Cps, 752.06, 17.38, 769.44, 33.43, 68.36},
        {50, PolicyKind::Ppo, 621.61, 16.19, 637.80, 17.66, 82.12},
        {200, PolicyKind::Random, 9098.77, 102.21, 9200.98, 19.11, 71.30},
        {200, PolicyKind::RoundRobin, 8913.20, 131.84, 9045.04, 18.04, 70.54},
        {200, PolicyKind::Eps, 9445.04, 357.67, 9802.71, 18.62, 63.95},
        {200, PolicyKind::Cps, 4812.17, 63.07, 4875.24, 23.18, 74.02},
        {200, PolicyKind::Ppo, 1662.78, 46.56, 1709.34, 13.28, 99.57},
    };
    return kTable;
}

const std::vector<DegradationReferencePoint>& degradation_reference_points() {
    static const std::vector<DegradationReferencePoint> kTable = {
        {0.0, 0.0, true, 637.80},
        {0.0, 0.2, true, 637.80},
        {0.0, 0.4, true, 637.80},
        {0.0, 0.6, true, 637.80},
        {0.0, 0.8, true, 637.80},
        {0.0, 1.0, true, 637.80},
        {20.0, 0.2, true, 652.74},
        {20.0, 0.4, true, 669.85},
        {20.0, 0.6, true, 682.49},
        {20.0, 0.8, true, 739.96},
        {20.0, 1.0, true, 810.63},
        {100.0, 0.2, true, 837.89},
        {100.0, 0.4, true, 879.63},
        {100.0, 0.6, true, 915.04},
        {100.0, 0.8, true, 1249.57},
        {100.0, 1.0, true, 1529.71},
        {500.0, 0.2, true, 1137.68},
        {500.0, 0.4, true, 1358.34},
        {500.0, 0.6, true, 1992.97},
        {500.0, 0.8, true, 3076.64},
        {500.0, 1.0, true, 4850.42},
        {kInf, 0.2, true, 3172.81},
        {kInf, 0.4, true, 7653.48},
        {kInf, 0.6, true, 12436.15},
        {kInf, 0.8, true, 26010.42},
        {kInf, 1.0, false, 0.0},
    };
    return kTable;
}

// ---------------------------------------------------------------------------
// Single runs

RunOutput run_single(const Scenario& sc, PolicyKind policy,
                     const std::string& checkpoint_path, std::uint64_t seed,
                     std::ostream* event_log) {
    Scenario run = sc;
    run.seed = seed;
    run.policy = policy;
    run.validate();

    std::unique_ptr<Scheduler> sched;
    if (policy == PolicyKind::Ppo) {
        sched = std::make_unique<PpoScheduler>(load_checkpoint(checkpoint_path),
                                               SelectMode::Greedy,
                                               /*record_experiences=*/false);
        static_cast<PpoScheduler*>(sched.get())
            ->set_reward_timescale_ms(run.timeout_s * 1000.0);
    } else {
        sched = make_baseline_scheduler(policy);
    }

    EngineOptions opts;
    opts.event_log = event_log;
    Engine engine(run, *sched, opts);

    RunOutput out;
    out.result = engine.run();
    out.summary = summarize(out.result.records, out.result.loads);
    out.summary.scenario = run.name;
    out.summary.policy = to_string(policy);
    out.summary.seed = seed;
    out.summary.scenario_hash = run.hash();
    out.summary.mode_flags = mode_flags_for(run);
    return out;
}

SummaryReport run_once(const Scenario& sc, PolicyKind policy,
                       const std::string& checkpoint_path, std::uint64_t seed,
                       const std::string& out_dir, bool write_events) {
    ensure_dir(out_dir);
    std::ostringstream trace;
    RunOutput out = run_single(sc, policy, checkpoint_path, seed,
                               write_events ? &trace : nullptr);
    write_text_file(path_join(out_dir, "records.csv"),
                    records_to_csv(out.result.records));
    write_text_file(path_join(out_dir, "summary.json"),
                    summary_to_json(out.summary) + "\n");
    write_text_file(path_join(out_dir, "summary.csv"),
                    summary_csv_header() + "\n" +
                        summary_to_csv_row(out.summary) + "\n");
    if (write_events)
        write_text_file(path_join(out_dir, "events.jsonl"), trace.str());
    return out.summary;
}

// ---------------------------------------------------------------------------
// Training

TrainingOutcome run_training(const Scenario& sc, const TrainingOptions& opt,
                             const std::string& checkpoint_out) {
    if (checkpoint_out.empty())
        throw HarnessError("training needs an output checkpoint path");
    if (opt.episodes <= 0) throw HarnessError("episode count must be positive");
    if (opt.rates_hz.empty()) throw HarnessError("training needs at least one rate");
    Scenario base = sc;
    base.policy = PolicyKind::Ppo;
    base.validate();

    const std::filesystem::path ckpt(checkpoint_out);
    if (ckpt.has_parent_path()) ensure_dir(ckpt.parent_path().string());

    PpoScheduler sched(PolicyNetwork(base.ppo), SelectMode::Sample,
                       /*record_experiences=*/true);
    sched.set_reward_timescale_ms(base.timeout_s * 1000.0);
    // A checkpoint exists from the start, so an early divergence still
    // leaves the last good (here: initial) weights behind.
    sched.network().save(checkpoint_out);

    Rng update_rng = Rng::sub(base.seed, 0x75706474ULL);

    TrainingOutcome outcome;
    outcome.checkpoint_path = checkpoint_out;
    outcome.best_running_mean = -kInf;
    std::size_t window_fill = 0;

    for (int e = 0; e < opt.episodes; ++e) {
        Scenario ep = base;
        ep.seed = base.seed + 1000003ULL * static_cast<std::uint64_t>(e + 1);
        ep.workload.request_rate_hz =
            opt.rates_hz[static_cast<std::size_t>(e) % opt.rates_hz.size()];
        ep.horizon_s = opt.episode_horizon_s;

        EpisodeStat st;
        st.episode = e;
        st.rate_hz = ep.workload.request_rate_hz;
        try {
            EngineOptions opts;
            opts.training = true;
            Engine engine(ep, sched, opts);
            const EngineResult res = engine.run();
            sched.finalize_episode();

            double sum = 0.0;
            for (const Experience& x : sched.buffer()) sum += x.reward;
            st.mean_reward = sched.buffer().empty()
                                 ? 0.0
                                 : sum / static_cast<double>(sched.buffer().size());
            st.decisions = res.n_rounds;
            st.n_tasks = res.n_tasks;
            st.success_rate =
                res.n_tasks == 0
                    ? 0.0
                    : static_cast<double>(std::count_if(
                          res.records.begin(), res.records.end(),
                          [](const CompletionRecord& r) { return r.success; })) /
                          static_cast<double>(res.n_tasks);
            st.truncated = res.episode_truncated;

            // Running mean over the trailing window of episode rewards.
            window_fill = std::min<std::size_t>(
                window_fill + 1, static_cast<std::size_t>(opt.running_mean_window));
            double wsum = st.mean_reward;
            for (std::size_t k = 1; k < window_fill; ++k)
                wsum += outcome.curve[outcome.curve.size() - k].mean_reward;
            st.running_mean = wsum / static_cast<double>(window_fill);

            if (std::isfinite(st.running_mean) &&
                st.running_mean > outcome.best_running_mean) {
                outcome.best_running_mean = st.running_mean;
                outcome.best_episode = e;
                sched.network().save(checkpoint_out);
            }

            if (!sched.buffer().empty()) {
                const UpdateStats up =
                    ppo_update(sched.network(), sched.buffer(), update_rng);
                if (!std::isfinite(up.after.objective))
                    throw std::runtime_error("policy diverged: non-finite objective");
            }
        } catch (const std::runtime_error&) {
            outcome.diverged = true;
            outcome.curve.push_back(st);
            break;
        }
        outcome.curve.push_back(st);
    }

    std::string csv =
        "episode,rate_hz,mean_reward,running_mean_reward,survival_rounds,"
        "n_tasks,success_rate,truncated\n";
    for (const EpisodeStat& st : outcome.curve) {
        csv += std::to_string(st.episode) + "," + format_double(st.rate_hz) + "," +
               format_double(st.mean_reward) + "," +
               format_double(st.running_mean) + "," + std::to_string(st.decisions) +
               "," + std::to_string(st.n_tasks) + "," +
               format_double(st.success_rate) + "," + (st.truncated ? "1" : "0") +
               "\n";
    }
    outcome.curve_path =
        (ckpt.has_parent_path() ? ckpt.parent_path() / "training_curve.csv"
                                : std::filesystem::path("training_curve.csv"))
            .string();
    write_text_file(outcome.curve_path, csv);
    return outcome;
}

// ---------------------------------------------------------------------------
// Workload sweep

std::vector<SummaryReport> run_workload_sweep(const Scenario& sc,
                                              const SweepOptions& opt,
                                              const std::string& checkpoint_path,
                                              const std::string& out_dir) {
    if (opt.rates_hz.empty() || opt.seeds.empty() || opt.policies.empty())
        throw HarnessError("sweep needs at least one rate, seed, and policy");
    const bool wants_ppo =
        std::find(opt.policies.begin(), opt.policies.end(), PolicyKind::Ppo) !=
        opt.policies.end();
    if (wants_ppo) load_checkpoint(checkpoint_path);  // startup error when absent
    ensure_dir(out_dir);

    std::vector<double> rates = opt.rates_hz;
    std::sort(rates.begin(), rates.end());
    std::vector<std::uint64_t> seeds = opt.seeds;
    std::sort(seeds.begin(), seeds.end());

    std::vector<SummaryReport> reports;
    std::string runs_csv = "rate_hz," + summary_csv_header() + "\n";
    std::string merged_csv =
        "rate_hz,policy,seeds,avg_comp_ms,avg_trans_ms,avg_total_ms,load_std,"
        "utilization_pct,ref_comp_ms,ref_trans_ms,ref_total_ms,ref_load_std,"
        "ref_utilization_pct\n";

    for (double rate : rates) {
        for (PolicyKind policy : opt.policies) {
            double comp = 0, trans = 0, total = 0, lstd = 0, util = 0;
            std::size_t with_avg = 0;
            for (std::uint64_t seed : seeds) {
                Scenario s2 = sc;
                s2.workload.request_rate_hz = rate;
                RunOutput out = run_single(s2, policy, checkpoint_path, seed);
                runs_csv += format_double(rate) + "," +
                            summary_to_csv_row(out.summary) + "\n";
                if (out.summary.avg_total_ms) {
                    comp += *out.summary.avg_comp_ms;
                    trans += *out.summary.avg_trans_ms;
                    total += *out.summary.avg_total_ms;
                    ++with_avg;
                }
                lstd += out.summary.load_std;
                util += out.summary.utilization;
                reports.push_back(std::move(out.summary));
            }
            const double n = static_cast<double>(seeds.size());
            merged_csv += format_double(rate) + "," + to_string(policy) + "," +
                          std::to_string(seeds.size()) + ",";
            if (with_avg > 0) {
                const double m = static_cast<double>(with_avg);
                merged_csv += format_double(comp / m) + "," +
                              format_double(trans / m) + "," +
                              format_double(total / m) + ",";
            } else {
                merged_csv += "NA,NA,NA,";
            }
            merged_csv += format_double(lstd / n) + "," + format_double(util / n);
            const auto& refs = workload_reference_points();
            const auto ref = std::find_if(
                refs.begin(), refs.end(), [&](const WorkloadReferencePoint& r) {
                    return r.rate_hz == rate && r.policy == policy;
                });
            if (ref != refs.end()) {
                merged_csv += "," + format_double(ref->comp_ms) + "," +
                              format_double(ref->trans_ms) + "," +
                              format_double(ref->total_ms) + "," +
                              format_double(ref->load_std) + "," +
                              format_double(ref->utilization_pct);
            } else {
                merged_csv += ",,,,,";
            }
            merged_csv += "\n";
        }
    }

    write_text_file(path_join(out_dir, "sweep_runs.csv"), runs_csv);
    write_text_file(path_join(out_dir, "sweep.csv"), merged_csv);
    return reports;
}

// ---------------------------------------------------------------------------
// Degradation grid

std::vector<DegradationCell> run_degradation_grid(
    const Scenario& sc, const std::vector<double>& fractions,
    const std::vector<double>& delays_ms, const std::vector<std::uint64_t>& seeds,
    const std::string& checkpoint_path, const std::string& out_dir) {
    if (fractions.empty() || delays_ms.empty() || seeds.empty())
        throw HarnessError("degradation grid needs fractions, delays, and seeds");
    if (sc.policy == PolicyKind::Ppo) load_checkpoint(checkpoint_path);
    ensure_dir(out_dir);

    std::vector<double> fr = fractions;
    std::sort(fr.begin(), fr.end());
    std::vector<double> dl = delays_ms;
    std::sort(dl.begin(), dl.end());
    std::vector<std::uint64_t> sd = seeds;
    std::sort(sd.begin(), sd.end());

    std::vector<DegradationCell> cells;
    auto run_cell = [&](std::uint64_t seed,
                        std::optional<DegradationRule> rule) -> DegradationCell {
        Scenario s2 = sc;
        s2.degradation = rule;
        RunOutput out = run_single(s2, sc.policy, checkpoint_path, seed);
        DegradationCell c;
        c.seed = seed;
        c.delay_ms = rule ? rule->delay_ms : 0.0;
        c.fraction = rule ? rule->fraction : 0.0;
        c.n_tasks = out.summary.n_tasks;
        c.n_success = out.summary.n_success;
        // A cell only advertises an average when every request was served;
        // averaging the survivors of a partial outage would under-report the
        // damage (the cut-off origins are exactly the expensive ones).
        if (c.n_tasks > 0 && c.n_success == c.n_tasks)
            c.avg_total_ms = out.summary.avg_total_ms;
        return c;
    };

    for (std::uint64_t seed : sd) {
        cells.push_back(run_cell(seed, std::nullopt));  // baseline first
        for (double delay : dl)
            for (double fraction : fr)
                cells.push_back(
                    run_cell(seed, DegradationRule{fraction, delay, seed}));
    }

    std::string csv =
        "seed,delay_ms,fraction,n_tasks,n_success,avg_total_ms,available,"
        "ref_total_ms,ref_available\n";
    for (const DegradationCell& c : cells) {
        csv += std::to_string(c.seed) + "," + format_double(c.delay_ms) + "," +
               format_double(c.fraction) + "," + std::to_string(c.n_tasks) + "," +
               std::to_string(c.n_success) + "," + fmt_opt(c.avg_total_ms) + "," +
               (c.avg_total_ms ? "1" : "0");
        const auto& refs = degradation_reference_points();
        const auto ref = std::find_if(
            refs.begin(), refs.end(), [&](const DegradationReferencePoint& r) {
                return r.delay_ms == c.delay_ms && r.fraction == c.fraction;
            });
        if (ref != refs.end())
            csv += std::string(",") +
                   (ref->available ? format_double(ref->total_ms) : "NA") + "," +
                   (ref->available ? "1" : "0");
        else
            csv += ",,";
        csv += "\n";
    }
    write_text_file(path_join(out_dir, "degradation.csv"), csv);
    return cells;
}

// ---------------------------------------------------------------------------
// Partition comparison

std::vector<PartitionComparisonRow> run_partition_comparison(
    const Scenario& sc, const std::vector<std::uint64_t>& seeds,
    const std::string& out_dir) {
    if (seeds.empty()) throw HarnessError("partition comparison needs seeds");
    if (sc.policy == PolicyKind::Ppo)
        throw HarnessError(
            "partition comparison uses a deterministic baseline policy; pick a "
            "non-ppo policy in the scenario");
    ensure_dir(out_dir);

    const PartitionMode modes[] = {PartitionMode::Serial, PartitionMode::FullParallel,
                                   PartitionMode::Greedy};
    std::vector<std::uint64_t> sd = seeds;
    std::sort(sd.begin(), sd.end());

    std::vector<PartitionComparisonRow> rows;
    std::map<std::uint64_t, std::uint64_t> hash_by_seed;
    for (PartitionMode mode : modes) {
        for (std::uint64_t seed : sd) {
            Scenario s2 = sc;
            s2.partition.mode = mode;
            RunOutput out = run_single(s2, sc.policy, "", seed);
            PartitionComparisonRow r;
            r.mode = mode;
            r.seed = seed;
            r.arrival_hash = out.result.arrival_hash;
            r.n_tasks = out.summary.n_tasks;
            r.n_success = out.summary.n_success;
            r.avg_comp_ms = out.summary.avg_comp_ms;
            double wall = 0.0;
            std::uint64_t n_ok = 0;
            for (const CompletionRecord& rec : out.result.records)
                if (rec.success) {
                    wall += rec.t_comp_wall_ms;
                    ++n_ok;
                }
            if (n_ok > 0) r.avg_comp_wall_ms = wall / static_cast<double>(n_ok);
            r.avg_trans_ms = out.summary.avg_trans_ms;
            r.avg_total_ms = out.summary.avg_total_ms;
            rows.push_back(r);
            auto [it, fresh] = hash_by_seed.emplace(seed, r.arrival_hash);
            if (!fresh && it->second != r.arrival_hash)
                throw HarnessError(
                    "arrival traces diverged across partition modes for seed " +
                    std::to_string(seed));
        }
    }

    std::string csv =
        "mode,seed,arrival_hash,n_tasks,n_success,avg_comp_ms,avg_comp_wall_ms,"
        "avg_trans_ms,avg_total_ms\n";
    for (const PartitionComparisonRow& r : rows) {
        csv += std::string(to_string(r.mode)) + "," + std::to_string(r.seed) + "," +
               hex64(r.arrival_hash) + "," + std::to_string(r.n_tasks) + "," +
               std::to_string(r.n_success) + "," + fmt_opt(r.avg_comp_ms) + "," +
               fmt_opt(r.avg_comp_wall_ms) + "," + fmt_opt(r.avg_trans_ms) + "," +
               fmt_opt(r.avg_total_ms) + "\n";
    }
    write_text_file(path_join(out_dir, "partition_compare.csv"), csv);

    if (sc.workload.template_mode) {
        const TaskGraph g = instantiate_template(sc.workload);
        for (PartitionMode mode : modes) {
            PartitionConfig cfg = sc.partition;
            cfg.mode = mode;
            const std::vector<Pipeline> pipes = partition_graph(g, cfg);
            write_text_file(
                path_join(out_dir,
                          std::string("partition_") + to_string(mode) + ".json"),
                partition_to_json(g, cfg, pipes) + "\n");
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Trace verification

namespace {

struct CheckState {
    bool pass = true;
    std::string detail;
    void fail(const std::string& why) {
        if (!pass) return;
        pass = false;
        detail = why;
    }
};

}  // namespace

std::string VerifyResult::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    j["events"] = n_events;
    nlohmann::json checks_j = nlohmann::json::array();
    for (const VerifyCheck& c : checks) {
        nlohmann::json cj;
        cj["name"] = c.name;
        cj["pass"] = c.pass;
        cj["detail"] = c.detail;
        checks_j.push_back(cj);
    }
    j["checks"] = checks_j;
    return j.dump(2);
}

VerifyResult verify_trace(std::istream& in) {
    using nlohmann::json;

    CheckState header_ck, order_ck, coord_ck, dispatch_ck, completion_ck,
        precedence_ck, record_ck, deadline_ck;

    bool have_header = false;
    double timeout_ms = 0.0;
    bool timeout_enabled = false;
    int cloud_id = -1;

    double prev_t = -kInf;
    std::uint64_t n_events = 0;

    std::map<std::uint64_t, int> coordinator_of_term;
    using SubKey = std::pair<std::uint64_t, int>;
    struct SubDone {
        double t = 0.0, start = 0.0, queue = 0.0, comp = 0.0, idle = 0.0,
               trans = 0.0;
        int worker = -1;
        int count = 0;
    };
    struct TaskInfo {
        int n_subs = 0;
        std::vector<std::vector<int>> preds;
    };
    std::map<std::uint64_t, TaskInfo> tasks;
    std::map<SubKey, SubDone> done;
    // copy uid -> (sub, dispatch time); removed when the copy dies/completes
    std::map<std::uint64_t, std::pair<SubKey, double>> open_copies;
    std::map<SubKey, int> open_count;

    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            header_ck.fail("line " + std::to_string(line_no) +
                           ": invalid JSON: " + e.what());
            continue;
        }
        ++n_events;
        const std::string type = j.value("type", "");

        if (n_events == 1) {
            if (type != "header") {
                header_ck.fail("first line is '" + type + "', expected header");
            } else if (!j.contains("hash") || !j.contains("seed") ||
                       !j.contains("policy") || !j.contains("timeout_ms")) {
                header_ck.fail("header is missing provenance fields");
            } else {
                have_header = true;
                timeout_ms = j["timeout_ms"].get<double>();
                timeout_enabled = j.value("timeout_enabled", false);
                cloud_id = j.value("cloud", -1);
            }
            continue;
        }

        if (j.contains("t")) {
            const double t = j["t"].get<double>();
            if (t < prev_t - 1e-12)
                order_ck.fail("line " + std::to_string(line_no) + ": time " +
                              format_double(t) + " precedes " +
                              format_double(prev_t));
            prev_t = std::max(prev_t, t);
        }

        if (type == "coordinator") {
            const std::uint64_t term = j["term"].get<std::uint64_t>();
            const int node = j["node"].get<int>();
            auto [it, fresh] = coordinator_of_term.emplace(term, node);
            if (!fresh && it->second != node)
                coord_ck.fail("term " + std::to_string(term) +
                              " claimed by nodes " + std::to_string(it->second) +
                              " and " + std::to_string(node));
        } else if (type == "arrival") {
            TaskInfo info;
            info.n_subs = j["subtasks"].get<int>();
            info.preds.assign(static_cast<std::size_t>(info.n_subs), {});
            for (const auto& e : j["edges"]) {
                const int a = e[0].get<int>(), b = e[1].get<int>();
                if (b >= 0 && b < info.n_subs)
                    info.preds[static_cast<std::size_t>(b)].push_back(a);
            }
            tasks[j["task"].get<std::uint64_t>()] = std::move(info);
        } else if (type == "dispatch") {
            const std::uint64_t term = j["term"].get<std::uint64_t>();
            const double t = j["t"].get<double>();
            auto it = coordinator_of_term.find(term);
            if (it == coordinator_of_term.end())
                dispatch_ck.fail("line " + std::to_string(line_no) +
                                 ": dispatch under unannounced term " +
                                 std::to_string(term));
            const SubKey key{j["task"].get<std::uint64_t>(), j["sub"].get<int>()};
            // A new wave may only start when no copy from an earlier wave is
            // still live; same-wave duplicates share one timestamp.
            for (const auto& [uid, ent] : open_copies) {
                (void)uid;
                if (ent.first == key && ent.second != t) {
                    dispatch_ck.fail(
                        "line " + std::to_string(line_no) + ": task " +
                        std::to_string(key.first) + " sub " +
                        std::to_string(key.second) +
                        " redispatched while an older copy is live");
                    break;
                }
            }
            open_copies[j["copy"].get<std::uint64_t>()] = {key, t};
            ++open_count[key];
        } else if (type == "copy_dead") {
            open_copies.erase(j["copy"].get<std::uint64_t>());
        } else if (type == "complete") {
            const SubKey key{j["task"].get<std::uint64_t>(), j["sub"].get<int>()};
            SubDone& d = done[key];
            ++d.count;
            if (d.count > 1)
                completion_ck.fail("task " + std::to_string(key.first) + " sub " +
                                   std::to_string(key.second) +
                                   " completed more than once");
            d.t = j["t"].get<double>();
            d.queue = j["queue"].get<double>();
            d.comp = j["comp"].get<double>();
            d.idle = j["idle"].get<double>();
            d.trans = j["trans"].get<double>();
            d.worker = j["worker"].get<int>();
            d.start = d.t - d.comp;
            // every predecessor's result must exist before execution started
            const auto ti = tasks.find(key.first);
            if (ti != tasks.end() &&
                key.second < static_cast<int>(ti->second.preds.size())) {
                for (int p : ti->second.preds[static_cast<std::size_t>(key.second)]) {
                    const auto pd = done.find({key.first, p});
                    if (pd == done.end() || pd->second.count == 0) {
                        precedence_ck.fail("task " + std::to_string(key.first) +
                                           " sub " + std::to_string(key.second) +
                                           " completed before predecessor " +
                                           std::to_string(p));
                    } else if (pd->second.t > d.start + 1e-6) {
                        precedence_ck.fail(
                            "task " + std::to_string(key.first) + " sub " +
                            std::to_string(key.second) + " started at " +
                            format_double(d.start) + " before predecessor " +
                            std::to_string(p) + " finished at " +
                            format_double(pd->second.t));
                    }
                }
            }
            // the winning copy is no longer live
            for (auto it = open_copies.begin(); it != open_copies.end();) {
                if (it->second.first == key)
                    it = open_copies.erase(it);
                else
                    ++it;
            }
        } else if (type == "record") {
            const std::uint64_t task = j["task"].get<std::uint64_t>();
            const double overhead = j["overhead"].get<double>();
            const double queue = j["queue"].get<double>();
            const double comp = j["comp"].get<double>();
            const double idle = j["idle"].get<double>();
            const double trans = j["trans"].get<double>();
            const double total = j["total"].get<double>();
            const bool success = j["success"].get<int>() != 0;
            if (std::abs(overhead + queue + comp + idle + trans - total) > 1e-6)
                record_ck.fail("task " + std::to_string(task) +
                               ": components do not add up to the total");
            if (success) {
                const auto ti = tasks.find(task);
                double sq = 0, sc2 = 0, si = 0, str = 0;
                int completed = 0;
                if (ti != tasks.end()) {
                    for (int s = 0; s < ti->second.n_subs; ++s) {
                        const auto d = done.find({task, s});
                        if (d == done.end() || d->second.count == 0) continue;
                        ++completed;
                        if (d->second.worker != cloud_id) sq += d->second.queue;
                        sc2 += d->second.comp;
                        si += d->second.idle;
                        str += d->second.trans;
                    }
                    if (completed != ti->second.n_subs)
                        record_ck.fail("task " + std::to_string(task) +
                                       " succeeded with " +
                                       std::to_string(completed) + "/" +
                                       std::to_string(ti->second.n_subs) +
                                       " completed subtasks");
                    else if (std::abs(sq - queue) > 1e-6 ||
                             std::abs(sc2 - comp) > 1e-6 ||
                             std::abs(si - idle) > 1e-6 ||
                             std::abs(str - trans) > 1e-6)
                        record_ck.fail("task " + std::to_string(task) +
                                       ": record does not match its per-subtask "
                                       "timings");
                }
                if (timeout_enabled && total > timeout_ms + 1e-9)
                    deadline_ck.fail("task " + std::to_string(task) +
                                     " succeeded past the timeout");
            }
        }
    }

    if (!have_header && header_ck.pass) header_ck.fail("empty trace");

    VerifyResult res;
    res.n_events = n_events;
    auto add = [&](const char* name, const CheckState& c) {
        res.checks.push_back(VerifyCheck{name, c.pass, c.detail});
    };
    add("header", header_ck);
    add("time-ordering", order_ck);
    add("coordinator-uniqueness", coord_ck);
    add("dispatch-attribution", dispatch_ck);
    add("single-completion", completion_ck);
    add("precedence", precedence_ck);
    add("record-reassembly", record_ck);
    add("success-within-deadline", deadline_ck);
    res.pass = std::all_of(res.checks.begin(), res.checks.end(),
                           [](const VerifyCheck& c) { return c.pass; });
    return res;
}

VerifyResult verify_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw HarnessError("cannot open trace: " + path);
    return verify_trace(in);
}

}  // namespace cesim
