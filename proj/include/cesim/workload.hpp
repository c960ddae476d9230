#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cesim/rng.hpp"

namespace cesim {

// Minimum resources a subtask demands from its worker.
struct ResourceProfile {
    double cpu_gflops = 0.0;
    double memory_mb = 128.0;
    bool needs_asic = false;
};

enum class SubtaskState { Pending, Queued, Running, Suspended, Completed, Failed };

const char* to_string(SubtaskState s);

// Legal lifecycle moves. Completed is terminal; Failed is absorbing; a
// subtask may be parked (Suspended) from Queued or Running while upstream
// results are still outstanding, and resumes through Queued.
bool transition_allowed(SubtaskState from, SubtaskState to);

struct Subtask {
    int id = 0;
    double workload_gflop = 0.0;
    ResourceProfile profile;
    std::vector<int> preds;          // filled by TaskGraph from the edge list
    SubtaskState state = SubtaskState::Pending;
    double payload_bits = 524288.0;  // context shipped to wherever it runs
    std::string label;               // stage name for template tasks
};

// Immutable DAG of subtasks with ids 0..n-1. Throws on cycles, duplicate or
// out-of-range edges.
class TaskGraph {
public:
    TaskGraph(std::vector<Subtask> subtasks,
              std::vector<std::pair<int, int>> edges);

    int size() const { return static_cast<int>(subtasks_.size()); }
    const Subtask& subtask(int id) const { return subtasks_.at(static_cast<std::size_t>(id)); }
    Subtask& subtask(int id) { return subtasks_.at(static_cast<std::size_t>(id)); }
    const std::vector<Subtask>& subtasks() const { return subtasks_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& preds(int id) const { return preds_.at(static_cast<std::size_t>(id)); }
    const std::vector<int>& succs(int id) const { return succs_.at(static_cast<std::size_t>(id)); }

    // Kahn's algorithm with a min-heap: among simultaneously ready subtasks
    // the lowest id comes first, so the order is unique.
    std::vector<int> topological_order() const;

    // Directed hop distance from -> to; nullopt when no path exists.
    std::optional<int> path_length(int from, int to) const;

    // Longest directed path (in edges) from this subtask to any sink.
    int remaining_depth(int id) const { return depth_.at(static_cast<std::size_t>(id)); }

    double total_gflop() const;
    double max_subtask_gflop() const;

private:
    std::vector<Subtask> subtasks_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> preds_;
    std::vector<std::vector<int>> succs_;
    std::vector<int> depth_;
};

enum class ArrivalProcess { Poisson, Turnout };

struct WorkloadConfig {
    bool template_mode = true;
    // per-stage GFLOP for the 8-stage diagnosis template, overridable
    std::array<double, 8> template_gflop = {0.4, 0.4, 0.4, 0.05, 0.2, 0.8, 2.0, 0.05};
    // random-DAG mode
    int n_subtasks_min = 4;
    int n_subtasks_max = 10;
    double dep_probability = 0.5;  // forward edge i->j, i<j
    double zipf_s = 1.1;
    int flops_min = 2;   // GFLOP, integer support of the Zipf draw
    int flops_max = 10;
    // shared
    double payload_bits = 524288.0;
    double memory_mb = 128.0;
    // arrivals
    ArrivalProcess arrivals = ArrivalProcess::Poisson;
    double request_rate_hz = 10.0;          // Poisson intensity
    int turnout_count = 50;                 // independent sources
    double turnout_interval_min_s = 600.0;  // each fires every U[min,max] s
    double turnout_interval_max_s = 1800.0;
};

// Names of the 8 template stages, index == subtask id.
const std::array<std::string, 8>& template_stage_names();

// Fixed fault-diagnosis workflow: three sensor-segment stages fan into an
// arbitration gate, which fans out to three detector models, whose outputs
// fuse. 8 subtasks, 9 edges, byte-identical on every call.
TaskGraph instantiate_template(const WorkloadConfig& cfg);

// Zipf draw over the integers {v_min..v_max}: rank 1 (most likely) maps to
// v_min, so empirical frequency never increases with the value.
int zipf_sample(Rng& rng, double s, int v_min, int v_max);

// Random DAG: node count uniform in [n_min, n_max], each forward pair (i, j)
// wired independently with dep_probability, workloads Zipf-distributed.
TaskGraph generate_random_dag(const WorkloadConfig& cfg, Rng& rng);

// Sorted request birth times over [0, horizon_s).
std::vector<double> generate_arrivals(const WorkloadConfig& cfg, double horizon_s,
                                      Rng& rng);

}  // namespace cesim
