#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cesim {

// Violated-constraint codes carried on per-request records.
constexpr int kViolationNone = 0;
constexpr int kViolationDeadline = 1;     // response time exceeded the timeout
constexpr int kViolationResources = 2;    // no node satisfies the demand profile
constexpr int kViolationReachability = 3; // needed route does not exist
constexpr int kViolationOrdering = 4;     // dependency order broken (never expected)

const char* violation_name(int code);

// Per-request outcome. Component sums run over the request's subtasks; the
// queue column only counts edge-executed subtasks (cloud queueing is part of
// the provider's SLA, not of the measured response). The total is exactly
// overhead + queue + comp + idle + trans, which the tests reassemble.
struct CompletionRecord {
    std::uint64_t task_id = 0;
    double overhead_ms = 0.0;  // per-request fixed overhead booked at the origin
    double t_queue_ms = 0.0;
    double t_comp_ms = 0.0;
    double t_idle_ms = 0.0;
    double t_trans_ms = 0.0;
    double t_total_ms = 0.0;
    // Wall-clock length of the request's busy window (union of run intervals);
    // equals t_comp_ms when subtasks never execute concurrently.
    double t_comp_wall_ms = 0.0;
    bool success = false;
    int violated_constraint = kViolationNone;
};

struct WorkerLoad {
    int node_id = 0;
    double capacity_gflops = 0.0;
    double busy_ms = 0.0;  // time with at least one running subtask
    double up_ms = 0.0;    // alive time over the run
};

// Standard deviation of per-node workload x_i under weights w_i proportional
// to node capacity: sqrt( sum w_i (x_i - xbar_w)^2 / sum w_i ).
double weighted_load_std(const std::vector<double>& values,
                         const std::vector<double>& weights);

// Capacity-weighted busy-time share across nodes, in percent.
double utilization_pct(const std::vector<WorkerLoad>& loads);

struct SummaryReport {
    std::string scenario;
    std::string policy;
    std::uint64_t seed = 0;
    std::string scenario_hash;  // hex
    std::map<std::string, std::string> mode_flags;
    std::uint64_t n_tasks = 0;
    std::uint64_t n_success = 0;
    double success_rate = 0.0;
    // means over successful requests; unset when nothing succeeded
    std::optional<double> avg_comp_ms;   // execution side: total - trans
    std::optional<double> avg_trans_ms;
    std::optional<double> avg_total_ms;
    double load_std = 0.0;
    double utilization = 0.0;  // percent
    std::uint64_t violations[5] = {0, 0, 0, 0, 0};  // indexed by violation code
};

SummaryReport summarize(const std::vector<CompletionRecord>& records,
                        const std::vector<WorkerLoad>& loads);

// Locale-independent shortest-round-trip formatting; all file output goes
// through this so reruns are byte-identical.
std::string format_double(double v);

// records CSV, fixed header:
// task_id,t_queue_ms,t_comp_ms,t_idle_ms,t_trans_ms,t_total_ms,success,violation
std::string records_to_csv(const std::vector<CompletionRecord>& records);

std::string summary_to_json(const SummaryReport& s);
SummaryReport summary_from_json(const std::string& text);

// one-line-per-run CSV; header provided by summary_csv_header()
std::string summary_csv_header();
std::string summary_to_csv_row(const SummaryReport& s);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace cesim
