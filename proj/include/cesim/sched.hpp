#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "cesim/ppo.hpp"
#include "cesim/rng.hpp"

namespace cesim {

enum class PolicyKind { Ppo, Random, RoundRobin, Eps, Cps };
const char* to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);

// Candidate worker as seen at decision time.
struct WorkerSnapshot {
    int id = -1;
    bool alive = true;
    bool is_cloud = false;
    double capacity_gflops = 0.0;
    double memory_mb = 0.0;
    bool has_asic = false;
    int n_cores = 1;
    int concurrency_limit = 1;
    int queue_capacity = 0;
    int n_running = 0;
    int n_queued = 0;
    int n_committed = 0;             // dispatched here, still before the queue
    double queue_wait_est_ms = 0.0;  // queued + in-flight work, single-occupancy ms
    double utilization = 0.0;        // busy/up so far
    double mesh_hops = 0.0;          // from the subtask's context source; 0 wired
    double link_quality = 0.0;       // ln(1+rate)/loss^2, see encode_state
    bool reachable = true;           // a route from the context source exists
};

// Subtask awaiting placement.
struct SubtaskView {
    std::uint64_t task_uid = 0;
    int subtask_id = 0;
    double cpu_req_gflops = 0.0;
    double mem_req_mb = 0.0;
    bool needs_asic = false;
    double cpu_req_norm = 0.0;  // against the scenario-wide max demand
    double mem_req_norm = 0.0;
    int unresolved_preds = 0;
    int remaining_depth = 0;
    double waited_s = 0.0;  // now - task birth
};

// Capability filter: the node is up, owns enough resources (including the
// accelerator when demanded), a route to it exists, and it can still admit
// one more placement (a free queue or run slot even if everything already
// dispatched to it arrives first).
bool worker_eligible(const WorkerSnapshot& w, const SubtaskView& s);

// Frozen 9-feature decision observation for one (subtask, worker) pair.
StateVector encode_state(const SubtaskView& s, const WorkerSnapshot& w);

// Trailing-window success share feeding the reward; window of 100 decision
// outcomes, 1.0 while empty.
class SuccessWindow {
public:
    explicit SuccessWindow(std::size_t capacity = 100) : cap_(capacity) {}
    void push(bool ok);
    double rate() const;
    std::size_t size() const { return buf_.size(); }

private:
    std::size_t cap_;
    std::deque<bool> buf_;
    std::size_t ok_ = 0;
};

struct Decision {
    std::vector<int> workers;   // dispatch targets; may be empty (stay pending)
    int evaluations = 0;        // decision steps consumed (episode accounting)
};

// Placement policy. decide() sees only eligible workers. Implementations
// must be deterministic given the Rng stream.
class Scheduler {
public:
    virtual ~Scheduler() = default;
    virtual PolicyKind kind() const = 0;
    virtual Decision decide(const SubtaskView& sub,
                            const std::vector<WorkerSnapshot>& eligible,
                            Rng& rng) = 0;
    // Outcome feedback; only the learning policy cares.
    virtual void on_task_resolved(std::uint64_t /*task_uid*/, double /*t_exec_ms*/,
                                  double /*t_trans_ms*/, bool /*success*/,
                                  double /*success_rate*/) {}
};

std::unique_ptr<Scheduler> make_baseline_scheduler(PolicyKind kind);

// Learning policy: walks eligible workers in id order and draws keep/offload
// per worker, so one subtask may fan out to several workers (the fastest
// copy wins downstream). In training mode every decision is recorded and
// rewards are attributed when the owning request resolves.
class PpoScheduler : public Scheduler {
public:
    PpoScheduler(PolicyNetwork net, SelectMode mode, bool record_experiences);

    PolicyKind kind() const override { return PolicyKind::Ppo; }
    Decision decide(const SubtaskView& sub,
                    const std::vector<WorkerSnapshot>& eligible, Rng& rng) override;
    void on_task_resolved(std::uint64_t task_uid, double t_exec_ms,
                          double t_trans_ms, bool success,
                          double success_rate) override;

    PolicyNetwork& network() { return net_; }
    const PolicyNetwork& network() const { return net_; }
    std::vector<Experience>& buffer() { return buffer_; }

    // Scale used to normalize reward terms (defaults to 10 s).
    void set_reward_timescale_ms(double ms) { reward_timescale_ms_ = ms; }

    // Marks experiences of still-unresolved requests with the failure-grade
    // reward (episode cut them off) and flags the final step.
    void finalize_episode();

private:
    PolicyNetwork net_;
    SelectMode mode_;
    bool record_;
    double reward_timescale_ms_ = 10000.0;
    std::vector<Experience> buffer_;
    std::vector<std::size_t> open_;  // buffer indices awaiting a reward
};

}  // namespace cesim
