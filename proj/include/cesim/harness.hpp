#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cesim/metrics.hpp"
#include "cesim/ppo.hpp"
#include "cesim/scenario.hpp"
#include "cesim/sched.hpp"
#include "cesim/simcore.hpp"

namespace cesim {

// Bumped whenever the emitted file formats change shape.
inline constexpr int kArtifactVersion = 1;

// Configuration or precondition problems surfaced to the CLI as error JSON.
struct HarnessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// $CESIM_OUT_DIR when set, otherwise "cesim-out".
std::string default_out_dir();

// ---------------------------------------------------------------------------
// Published reference magnitudes, reported next to measured values for
// orientation. They are annotations only and never act as thresholds.

struct WorkloadReferencePoint {
    double rate_hz = 0.0;
    PolicyKind policy = PolicyKind::Random;
    double comp_ms = 0.0;
    double trans_ms = 0.0;
    double total_ms = 0.0;
    double load_std = 0.0;
    double utilization_pct = 0.0;
};
const std::vector<WorkloadReferencePoint>& workload_reference_points();

struct DegradationReferencePoint {
    double delay_ms = 0.0;  // +inf for the loss row
    double fraction = 0.0;  // 0 marks the undegraded baseline
    bool available = true;
    double total_ms = 0.0;  // meaningless when !available
};
const std::vector<DegradationReferencePoint>& degradation_reference_points();

// ---------------------------------------------------------------------------
// Single runs

struct RunOutput {
    SummaryReport summary;
    EngineResult result;
};

// One simulation with the given placement policy and seed. PPO needs a
// checkpoint file; other policies ignore `checkpoint_path`. `event_log`
// receives the JSONL trace when non-null.
RunOutput run_single(const Scenario& sc, PolicyKind policy,
                     const std::string& checkpoint_path, std::uint64_t seed,
                     std::ostream* event_log = nullptr);

// `run` subcommand: writes records.csv, summary.json, summary.csv and,
// when `write_events` is set, events.jsonl into `out_dir`.
SummaryReport run_once(const Scenario& sc, PolicyKind policy,
                       const std::string& checkpoint_path, std::uint64_t seed,
                       const std::string& out_dir, bool write_events);

// ---------------------------------------------------------------------------
// Training

struct TrainingOptions {
    int episodes = 300;
    // Request rates cycled across episodes; one entry pins every episode to
    // a single rate.
    std::vector<double> rates_hz = {10.0, 50.0, 200.0};
    double episode_horizon_s = 2.5;
    int running_mean_window = 10;
};

struct EpisodeStat {
    int episode = 0;
    double rate_hz = 0.0;
    double mean_reward = 0.0;
    double running_mean = 0.0;
    std::uint64_t decisions = 0;  // survival length of the episode
    std::uint64_t n_tasks = 0;
    double success_rate = 0.0;
    bool truncated = false;
};

struct TrainingOutcome {
    std::vector<EpisodeStat> curve;
    int best_episode = -1;
    double best_running_mean = 0.0;
    bool diverged = false;
    std::string checkpoint_path;  // weights at the best running-mean episode
    std::string curve_path;       // per-episode CSV next to the checkpoint
};

// Trains a fresh policy on the scenario, writing the best-running-mean
// checkpoint to `checkpoint_out` and the learning curve next to it. On
// divergence (non-finite network output) training stops and the checkpoint
// keeps the last good weights.
TrainingOutcome run_training(const Scenario& sc, const TrainingOptions& opt,
                             const std::string& checkpoint_out);

// ---------------------------------------------------------------------------
// Workload sweep

struct SweepOptions {
    std::vector<double> rates_hz = {10.0, 50.0, 200.0};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<PolicyKind> policies = {PolicyKind::Random, PolicyKind::RoundRobin,
                                        PolicyKind::Eps, PolicyKind::Cps,
                                        PolicyKind::Ppo};
};

// Rate x policy x seed grid. Writes sweep_runs.csv (one row per run) and
// sweep.csv (per rate x policy means with reference annotations). A PPO
// entry requires `checkpoint_path`; a missing file is a startup error before
// any run executes.
std::vector<SummaryReport> run_workload_sweep(const Scenario& sc,
                                              const SweepOptions& opt,
                                              const std::string& checkpoint_path,
                                              const std::string& out_dir);

// ---------------------------------------------------------------------------
// Degradation grid

struct DegradationCell {
    std::uint64_t seed = 0;
    double delay_ms = 0.0;       // +inf = loss; the baseline cell holds 0
    double fraction = 0.0;       // 0 marks the undegraded baseline
    std::uint64_t n_tasks = 0;
    std::uint64_t n_success = 0;
    std::optional<double> avg_total_ms;  // unset = unavailable ("NA")
};

// Baseline first, then delay rows in ascending order across the fraction
// axis, per seed. Writes degradation.csv. Cells that completed no request
// report unavailability instead of a time.
std::vector<DegradationCell> run_degradation_grid(
    const Scenario& sc, const std::vector<double>& fractions,
    const std::vector<double>& delays_ms, const std::vector<std::uint64_t>& seeds,
    const std::string& checkpoint_path, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Partition comparison

struct PartitionComparisonRow {
    PartitionMode mode = PartitionMode::Greedy;
    std::uint64_t seed = 0;
    std::uint64_t arrival_hash = 0;  // identical across modes for one seed
    std::uint64_t n_tasks = 0;
    std::uint64_t n_success = 0;
    std::optional<double> avg_comp_ms;
    std::optional<double> avg_comp_wall_ms;  // mean busy-window length
    std::optional<double> avg_trans_ms;
    std::optional<double> avg_total_ms;
};

// Replays the same arrival trace under Serial / FullParallel / Greedy
// partitioning. Writes partition_compare.csv and, for template workloads,
// the per-mode pipeline layout as partition_<mode>.json.
std::vector<PartitionComparisonRow> run_partition_comparison(
    const Scenario& sc, const std::vector<std::uint64_t>& seeds,
    const std::string& out_dir);

// ---------------------------------------------------------------------------
// Trace verification

struct VerifyCheck {
    std::string name;
    bool pass = true;
    std::string detail;  // first failure description, empty when passing
};

struct VerifyResult {
    bool pass = false;
    std::uint64_t n_events = 0;
    std::vector<VerifyCheck> checks;
    std::string to_json() const;
};

// Validates a JSONL event trace produced by a run with tracing enabled:
// header presence, chronological order, per-term coordinator uniqueness,
// dispatch attribution to an announced coordinator, single completion and
// non-overlapping dispatch waves per subtask, precedence between dependent
// subtasks, record reassembly from per-subtask timings, and the
// success-implies-deadline rule.
VerifyResult verify_trace(std::istream& in);
VerifyResult verify_trace_file(const std::string& path);

}  // namespace cesim
