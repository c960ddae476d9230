#include "cesim/sched.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cesim {

const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::Ppo: return "ppo";
        case PolicyKind::Random: return "random";
        case PolicyKind::RoundRobin: return "round_robin";
        case PolicyKind::Eps: return "eps";
        case PolicyKind::Cps: return "cps";
    }
    return "?";
}

PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "ppo") return PolicyKind::Ppo;
    if (s == "random") return PolicyKind::Random;
    if (s == "round_robin") return PolicyKind::RoundRobin;
    if (s == "eps") return PolicyKind::Eps;
    if (s == "cps") return PolicyKind::Cps;
    throw std::invalid_argument("unknown policy: " + s);
}

bool worker_eligible(const WorkerSnapshot& w, const SubtaskView& s) {
    if (!w.alive || !w.reachable) return false;
    if (w.capacity_gflops < s.cpu_req_gflops) return false;
    if (w.memory_mb < s.mem_req_mb) return false;
    if (s.needs_asic && !w.has_asic) return false;
    // Admission: outstanding placements must leave room for one more, either
    // in the queue or among the run slots; otherwise the dispatch would just
    // pay the transfer and be dropped on arrival.
    const bool queue_room = w.n_queued + w.n_committed < w.queue_capacity;
    const bool slot_room =
        w.n_running + w.n_queued + w.n_committed < w.concurrency_limit;
    return queue_room || slot_room;
}

StateVector encode_state(const SubtaskView& s, const WorkerSnapshot& w) {
    StateVector v;
    v.priority_compensation = std::exp(std::min(s.waited_s, 20.0));
    v.cpu_req_norm = s.cpu_req_norm;
    v.mem_req_norm = s.mem_req_norm;
    v.unresolved_preds = static_cast<double>(s.unresolved_preds);
    v.remaining_depth = static_cast<double>(s.remaining_depth);
    v.mesh_hops = w.mesh_hops;
    v.utilization = w.utilization;
    v.has_asic = w.has_asic ? 1.0 : 0.0;
    v.link_quality = w.link_quality;
    return v;
}

void SuccessWindow::push(bool ok) {
    buf_.push_back(ok);
    if (ok) ++ok_;
    if (buf_.size() > cap_) {
        if (buf_.front()) --ok_;
        buf_.pop_front();
    }
}

double SuccessWindow::rate() const {
    if (buf_.empty()) return 1.0;
    return static_cast<double>(ok_) / static_cast<double>(buf_.size());
}

namespace {

class RandomScheduler : public Scheduler {
public:
    PolicyKind kind() const override { return PolicyKind::Random; }
    Decision decide(const SubtaskView&, const std::vector<WorkerSnapshot>& eligible,
                    Rng& rng) override {
        Decision d;
        d.evaluations = 1;
        if (eligible.empty()) return d;
        d.workers.push_back(eligible[rng.below(eligible.size())].id);
        return d;
    }
};

class RoundRobinScheduler : public Scheduler {
public:
    PolicyKind kind() const override { return PolicyKind::RoundRobin; }
    Decision decide(const SubtaskView&, const std::vector<WorkerSnapshot>& eligible,
                    Rng&) override {
        Decision d;
        d.evaluations = 1;
        if (eligible.empty()) return d;
        // cycle over node ids: pick the smallest id strictly above the last
        // pick, wrapping to the smallest overall
        const WorkerSnapshot* next = nullptr;
        const WorkerSnapshot* lowest = nullptr;
        for (const auto& w : eligible) {
            if (!lowest || w.id < lowest->id) lowest = &w;
            if (w.id > last_ && (!next || w.id < next->id)) next = &w;
        }
        const WorkerSnapshot* pick = next ? next : lowest;
        last_ = pick->id;
        d.workers.push_back(pick->id);
        return d;
    }

private:
    int last_ = -1;
};

// shortest estimated queue wait, ties to the lower id
const WorkerSnapshot* least_loaded(const std::vector<const WorkerSnapshot*>& ws) {
    const WorkerSnapshot* best = nullptr;
    for (const auto* w : ws) {
        if (!best || w->queue_wait_est_ms < best->queue_wait_est_ms ||
            (w->queue_wait_est_ms == best->queue_wait_est_ms && w->id < best->id))
            best = w;
    }
    return best;
}

class EpsScheduler : public Scheduler {
public:
    PolicyKind kind() const override { return PolicyKind::Eps; }
    Decision decide(const SubtaskView&, const std::vector<WorkerSnapshot>& eligible,
                    Rng&) override {
        Decision d;
        d.evaluations = 1;
        std::vector<const WorkerSnapshot*> edges, clouds;
        for (const auto& w : eligible) (w.is_cloud ? clouds : edges).push_back(&w);
        // edge first; spill to the cloud only when every edge queue is full
        std::vector<const WorkerSnapshot*> open_edges;
        for (const auto* w : edges)
            if (w->n_queued < w->queue_capacity) open_edges.push_back(w);
        if (!open_edges.empty()) {
            d.workers.push_back(least_loaded(open_edges)->id);
        } else if (!clouds.empty()) {
            d.workers.push_back(least_loaded(clouds)->id);
        } else if (!edges.empty()) {
            d.workers.push_back(least_loaded(edges)->id);  // everything full: try anyway
        }
        return d;
    }
};

class CpsScheduler : public Scheduler {
public:
    PolicyKind kind() const override { return PolicyKind::Cps; }
    Decision decide(const SubtaskView&, const std::vector<WorkerSnapshot>& eligible,
                    Rng&) override {
        Decision d;
        d.evaluations = 1;
        std::vector<const WorkerSnapshot*> edges, clouds;
        for (const auto& w : eligible) (w.is_cloud ? clouds : edges).push_back(&w);
        // cloud until its running set is full, then fall back to the edge
        for (const auto* c : clouds) {
            if (c->n_running < c->concurrency_limit) {
                d.workers.push_back(c->id);
                return d;
            }
        }
        std::vector<const WorkerSnapshot*> open_edges;
        for (const auto* w : edges)
            if (w->n_queued < w->queue_capacity) open_edges.push_back(w);
        if (!open_edges.empty()) {
            d.workers.push_back(least_loaded(open_edges)->id);
        } else if (!clouds.empty()) {
            d.workers.push_back(least_loaded(clouds)->id);
        } else if (!edges.empty()) {
            d.workers.push_back(least_loaded(edges)->id);
        }
        return d;
    }
};

}  // namespace

std::unique_ptr<Scheduler> make_baseline_scheduler(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::Random: return std::make_unique<RandomScheduler>();
        case PolicyKind::RoundRobin: return std::make_unique<RoundRobinScheduler>();
        case PolicyKind::Eps: return std::make_unique<EpsScheduler>();
        case PolicyKind::Cps: return std::make_unique<CpsScheduler>();
        case PolicyKind::Ppo:
            throw std::invalid_argument("learning policy needs a network; not a baseline");
    }
    throw std::logic_error("unreachable policy kind");
}

PpoScheduler::PpoScheduler(PolicyNetwork net, SelectMode mode, bool record_experiences)
    : net_(std::move(net)), mode_(mode), record_(record_experiences) {}

Decision PpoScheduler::decide(const SubtaskView& sub,
                              const std::vector<WorkerSnapshot>& eligible, Rng& rng) {
    Decision d;
    // walk candidates in id order; each (subtask, worker) pair is one step
    std::vector<const WorkerSnapshot*> order;
    order.reserve(eligible.size());
    for (const auto& w : eligible) order.push_back(&w);
    std::sort(order.begin(), order.end(),
              [](const WorkerSnapshot* a, const WorkerSnapshot* b) { return a->id < b->id; });
    for (const auto* w : order) {
        const StateVector sv = encode_state(sub, *w);
        double logp = 0.0, value = 0.0;
        const int action = net_.select_action(sv, mode_, rng, &logp, &value);
        ++d.evaluations;
        if (action == kActionOffload) d.workers.push_back(w->id);
        if (record_) {
            Experience e;
            e.state = sv.as_array();
            e.action = action;
            e.log_prob = logp;
            e.value = value;
            e.task_uid = sub.task_uid;
            open_.push_back(buffer_.size());
            buffer_.push_back(e);
        }
    }
    return d;
}

void PpoScheduler::on_task_resolved(std::uint64_t task_uid, double t_exec_ms,
                                    double t_trans_ms, bool /*success*/,
                                    double success_rate) {
    if (!record_) return;
    const PpoConfig& cfg = net_.config();
    const double r = reward_value(t_exec_ms, t_trans_ms, reward_timescale_ms_,
                                  success_rate, cfg.mu_exec, cfg.mu_trans,
                                  cfg.reward_mode);
    std::size_t kept = 0;
    for (std::size_t idx : open_) {
        if (buffer_[idx].task_uid == task_uid) {
            buffer_[idx].reward = r;
            buffer_[idx].task_uid = 0;  // resolved
        } else {
            open_[kept++] = idx;
        }
    }
    open_.resize(kept);
}

void PpoScheduler::finalize_episode() {
    if (!record_) return;
    const PpoConfig& cfg = net_.config();
    // requests the episode cut off are charged as full-timeout failures
    const double r = reward_value(reward_timescale_ms_, 0.0, reward_timescale_ms_,
                                  0.0, cfg.mu_exec, cfg.mu_trans, cfg.reward_mode);
    for (std::size_t idx : open_) {
        buffer_[idx].reward = r;
        buffer_[idx].task_uid = 0;
    }
    open_.clear();
    if (!buffer_.empty()) buffer_.back().done = true;
}

}  // namespace cesim
