#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <vector>

#include "cesim/consensus.hpp"
#include "cesim/metrics.hpp"
#include "cesim/partition.hpp"
#include "cesim/scenario.hpp"
#include "cesim/sched.hpp"
#include "cesim/topology.hpp"
#include "cesim/workload.hpp"

namespace cesim {

// --- timing model helpers, shared with the tests -------------------------

// Queueing component of one placement: fixed dispatch overhead plus the
// time spent waiting for a running slot.
double queueing_time_ms(double overhead_ms, double slot_wait_ms);

// Duration of `gflop` work at a fixed degree of sharing: each running
// subtask proceeds at capacity / max(cores, n_running).
double compute_time_ms(double gflop, double capacity_gflops, int n_cores,
                       int n_running);

// Time a dispatched subtask idles for upstream results.
double idle_time_ms(double preds_done_ms, double dispatch_ms);

// Response-time assembly; the record total is exactly this sum.
double end_to_end_ms(double overhead_ms, double queue_ms, double comp_ms,
                     double idle_ms, double trans_ms);

// --- engine ---------------------------------------------------------------

struct CoordinatorChange {
    double t_ms = 0.0;
    int node_id = -1;
    std::uint64_t term = 0;
};

struct EngineOptions {
    // Enforce the learning episode caps (decision budget, consecutive
    // violations) and skip outcome feedback for cut-off requests so the
    // policy can charge them as failures itself.
    bool training = false;
    std::ostream* event_log = nullptr;  // JSONL sink; null = no log
    bool log_heartbeats = false;        // include consensus chatter in the log
};

struct EngineResult {
    std::vector<CompletionRecord> records;  // one per request, by request id
    std::vector<WorkerLoad> loads;          // one per node, by node id
    std::uint64_t n_tasks = 0;
    std::uint64_t n_decisions = 0;     // (subtask, worker) policy evaluations
    std::uint64_t n_rounds = 0;        // placement rounds (one per scored subtask)
    std::uint64_t n_dispatches = 0;    // placements admitted
    std::uint64_t n_duplicates = 0;    // placements beyond the first per wave
    std::uint64_t n_rejections = 0;    // queue-full / stale-term / dead-route drops
    std::vector<CoordinatorChange> coordinator_changes;
    std::uint64_t arrival_hash = 0;    // identity of the generated request trace
    double end_ms = 0.0;
    bool episode_truncated = false;
    // invariant probes, by node id: most copies ever co-running on the node
    std::vector<int> peak_running;
    // worst leftover work observed at any copy completion, relative to the
    // copy's workload (processor-sharing bookkeeping drift)
    double max_completion_residual = 0.0;
};

// Deterministic discrete-event simulation of the whole system: request
// generation, pipeline partitioning, coordinator-gated dispatch, wireless /
// backhaul transfers, processor-sharing execution, failure handling, and
// heartbeat-based coordinator elections. Single-threaded; identical seeds
// give byte-identical results.
class Engine {
public:
    Engine(const Scenario& scenario, Scheduler& scheduler, EngineOptions opts = {});
    EngineResult run();

private:
    enum class EvKind {
        Arrival,
        Transfer,
        Compute,
        ConsTimer,
        ConsMsg,
        Crash,
        Recover,
        Timeout,
    };

    struct Ev {
        double t = 0.0;
        std::uint64_t seq = 0;
        EvKind kind = EvKind::Arrival;
        int a = 0;          // node / worker id
        int b = 0;          // timer kind
        std::uint64_t u = 0;  // task uid / copy uid / generation
        ConsensusMsg msg{};
    };
    struct EvLater {
        bool operator()(const Ev& x, const Ev& y) const {
            if (x.t != y.t) return x.t > y.t;
            return x.seq > y.seq;
        }
    };

    enum class CopySt { WaitPreds, InTransfer, Queued, Running, Done, Dead };

    struct CopyRt {
        std::uint64_t uid = 0;
        std::uint64_t task_uid = 0;
        int sub_id = 0;
        int worker = -1;
        CopySt st = CopySt::WaitPreds;
        double remaining_gflop = 0.0;
        double dispatch_ms = 0.0;
        double arrive_ms = 0.0;
        double start_ms = 0.0;
        double idle_ms = 0.0;
        double trans_ms = 0.0;
        std::uint64_t term = 0;  // coordinator term of the dispatch
    };

    struct SubRt {
        SubtaskState state = SubtaskState::Pending;
        std::vector<std::uint64_t> live_copies;
        int unresolved_preds = 0;
        double done_ms = 0.0;
        int done_worker = -1;
        double q_ms = 0.0, c_ms = 0.0, i_ms = 0.0, tr_ms = 0.0;
    };

    struct TaskRt {
        std::uint64_t uid = 0;
        double arrival_ms = 0.0;
        int origin = -1;
        TaskGraph graph;
        std::vector<Pipeline> pipelines;
        std::vector<std::size_t> pipe_next;  // first member index not completed
        std::vector<SubRt> subs;
        std::vector<std::pair<double, double>> comp_spans;  // run window per completed subtask
        int n_completed = 0;
        bool resolved = false;
        bool success = false;
        int violation = kViolationNone;
        bool parked = false;
        bool route_blocked = false;  // saw a dead route while placing
    };

    struct WorkerRt {
        NodeSpec spec;
        bool alive = true;
        std::vector<std::uint64_t> running;
        std::deque<std::uint64_t> queued;
        std::vector<std::uint64_t> committed;  // dispatched here, not yet enqueued
        std::uint64_t gen = 0;
        double last_t = 0.0;
        double busy_ms = 0.0;
        double up_ms = 0.0;
        int peak_running = 0;
    };

    // event plumbing
    void push(double t, EvKind k, int a, int b, std::uint64_t u);
    void push_msg(double t, const ConsensusMsg& m);

    // consensus integration
    void process_actions(int node_id, const ConsensusActions& a);
    void deliver_msg(const ConsensusMsg& m);
    int live_coordinator() const;  // node id, -1 if nobody alive claims the role

    // worker mechanics
    WorkerRt& worker(int id);
    void advance_worker(WorkerRt& w);
    void reschedule_worker(WorkerRt& w);
    void promote_from_queue(WorkerRt& w);
    void detach_copy(WorkerRt& w, std::uint64_t cuid);
    void uncommit(const CopyRt& c);

    // dispatch
    void mark_candidate(std::uint64_t task_uid);
    void run_rounds();
    bool dispatch_task(TaskRt& task);            // true if fully served this round
    bool place_subtask(TaskRt& task, int sub_id);
    WorkerSnapshot snapshot_worker(const WorkerRt& w, const TaskRt& task) const;
    SubtaskView view_subtask(const TaskRt& task, int sub_id) const;
    void begin_transfer(TaskRt& task, CopyRt& c);
    void kill_copy(CopyRt& c, const char* reason, bool park_on_loss);
    void after_copy_loss(TaskRt& task, int sub_id, bool park_on_loss);
    void park(TaskRt& task);

    // lifecycle
    void handle_arrival(std::uint64_t uid);
    void handle_transfer(std::uint64_t cuid);
    void handle_compute(int worker_id, std::uint64_t gen);
    void complete_copy(CopyRt& c);
    void handle_crash(int node_id);
    void handle_recover(int node_id);
    void resolve_task(TaskRt& task, bool success, int violation_code, bool notify);
    CompletionRecord assemble_record(const TaskRt& task) const;
    void truncate_episode();
    void advance_sub_state(TaskRt& task, int sub_id, SubtaskState to);

    // logging
    void log_line(const std::string& line);
    void log_header();
    void log_dispatch(const CopyRt& c);
    void log_copy_dead(const CopyRt& c, const char* reason);
    void log_complete(const TaskRt& task, int sub_id);
    void log_record(const TaskRt& task, const CompletionRecord& r);
    void log_coordinator(int node_id, std::uint64_t term);

    const Scenario& sc_;
    Scheduler& sched_;
    EngineOptions opts_;
    Topology topo_;
    double timeout_ms_ = 0.0;
    double hard_stop_ms_ = 0.0;

    std::priority_queue<Ev, std::vector<Ev>, EvLater> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;

    std::vector<TaskRt> tasks_;
    std::vector<CopyRt> copies_;
    std::vector<WorkerRt> workers_;           // by topology node order
    std::vector<int> worker_index_by_id_;

    std::vector<ConsensusNode> cons_;         // parallel to workers_
    std::vector<CoordinatorChange> coord_changes_;

    Rng policy_rng_;

    std::set<std::uint64_t> candidates_;      // tasks to (re)try this round
    std::deque<std::uint64_t> parked_;        // placement failed; FIFO retry
    bool freed_ = false;                      // capacity freed since last round

    SuccessWindow window_;
    std::vector<CompletionRecord> done_records_;
    double max_demand_gflop_ = 1.0;
    double max_node_memory_mb_ = 1.0;
    bool pending_truncate_ = false;
    std::uint64_t n_decisions_ = 0;
    std::uint64_t n_decide_calls_ = 0;  // placement rounds (episode iterations)
    std::uint64_t n_dispatches_ = 0;
    std::uint64_t n_duplicates_ = 0;
    std::uint64_t n_rejections_ = 0;
    std::uint64_t n_resolved_ = 0;
    std::uint64_t arrivals_seen_ = 0;
    int consecutive_violations_ = 0;
    bool truncated_ = false;
    std::uint64_t arrival_hash_ = 0;
    double max_completion_residual_ = 0.0;
};

}  // namespace cesim
