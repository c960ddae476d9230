#include "cesim/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cesim {

namespace {

constexpr double kDoneEps = 1e-9;  // gflop slack when declaring a copy finished

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out.push_back('\\');
        if (static_cast<unsigned char>(ch) < 0x20) continue;
        out.push_back(ch);
    }
    return out;
}

int state_rank(SubtaskState s) {
    switch (s) {
        case SubtaskState::Pending: return 0;
        case SubtaskState::Suspended: return 1;
        case SubtaskState::Queued: return 2;
        case SubtaskState::Running: return 3;
        case SubtaskState::Completed: return 4;
        case SubtaskState::Failed: return 5;
    }
    return 0;
}

}  // namespace

double queueing_time_ms(double overhead_ms, double slot_wait_ms) {
    return overhead_ms + slot_wait_ms;
}

double compute_time_ms(double gflop, double capacity_gflops, int n_cores,
                       int n_running) {
    if (capacity_gflops <= 0.0) return std::numeric_limits<double>::infinity();
    const int share = std::max(n_cores, std::max(n_running, 1));
    const double rate_gflops = capacity_gflops / static_cast<double>(share);
    return gflop / rate_gflops * 1000.0;
}

double idle_time_ms(double preds_done_ms, double dispatch_ms) {
    return std::max(0.0, preds_done_ms - dispatch_ms);
}

double end_to_end_ms(double overhead_ms, double queue_ms, double comp_ms,
                     double idle_ms, double trans_ms) {
    return overhead_ms + queue_ms + comp_ms + idle_ms + trans_ms;
}

Engine::Engine(const Scenario& scenario, Scheduler& scheduler, EngineOptions opts)
    : sc_(scenario),
      sched_(scheduler),
      opts_(opts),
      topo_(scenario.degradation
                ? Topology(scenario.nodes, scenario.link, scenario.haversine_mode)
                      .degraded(*scenario.degradation)
                : Topology(scenario.nodes, scenario.link, scenario.haversine_mode)),
      policy_rng_(0) {
    timeout_ms_ = sc_.timeout_s * 1000.0;
    hard_stop_ms_ = (sc_.horizon_s + sc_.drain_limit_s) * 1000.0;

    int max_id = 0;
    for (const NodeSpec& n : topo_.nodes()) max_id = std::max(max_id, n.id);
    worker_index_by_id_.assign(static_cast<std::size_t>(max_id) + 1, -1);
    for (const NodeSpec& n : topo_.nodes()) {
        worker_index_by_id_[static_cast<std::size_t>(n.id)] =
            static_cast<int>(workers_.size());
        workers_.push_back(WorkerRt{n, true, {}, {}, {}, 0, 0.0, 0.0, 0.0});
        max_node_memory_mb_ = std::max(max_node_memory_mb_, n.memory_mb);
    }

    // Independent deterministic streams keyed off the run seed.
    Rng arrivals_rng = Rng::sub(sc_.seed, 0x61727276);  // request birth times
    Rng origin_rng = Rng::sub(sc_.seed, 0x6f726967);    // request source nodes
    Rng graph_rng = Rng::sub(sc_.seed, 0x67726170);     // request structure
    policy_rng_ = Rng::sub(sc_.seed, 0x706f6c69);       // placement draws

    std::vector<int> all_ids, rmu_ids;
    for (const NodeSpec& n : topo_.nodes()) {
        all_ids.push_back(n.id);
        if (n.kind == NodeKind::Rmu) rmu_ids.push_back(n.id);
    }
    for (const NodeSpec& n : topo_.nodes()) {
        std::vector<int> peers;
        for (int id : all_ids)
            if (id != n.id) peers.push_back(id);
        cons_.emplace_back(n.id, std::move(peers), sc_.consensus,
                           n.id == topo_.cloud_id(),
                           Rng::sub(sc_.seed, 0xc0050000ULL +
                                                  static_cast<std::uint64_t>(n.id))
                               .next_u64());
    }

    if (sc_.workload.template_mode) {
        for (double g : sc_.workload.template_gflop)
            max_demand_gflop_ = std::max(max_demand_gflop_, g);
    } else {
        max_demand_gflop_ = std::max(1.0, static_cast<double>(sc_.workload.flops_max));
    }

    const std::vector<double> births =
        generate_arrivals(sc_.workload, sc_.horizon_s, arrivals_rng);
    std::string hash_feed;
    for (std::size_t i = 0; i < births.size(); ++i) {
        const double t_ms = births[i] * 1000.0;
        const int origin = rmu_ids.empty()
                               ? topo_.cloud_id()
                               : rmu_ids[origin_rng.below(rmu_ids.size())];
        TaskGraph g = sc_.workload.template_mode
                          ? instantiate_template(sc_.workload)
                          : generate_random_dag(sc_.workload, graph_rng);
        std::vector<Pipeline> pipes = partition_graph(g, sc_.partition);

        hash_feed += "t=" + format_double(t_ms) + ";o=" + std::to_string(origin) +
                     ";n=" + std::to_string(g.size()) + ";w=";
        for (const Subtask& st : g.subtasks())
            hash_feed += format_double(st.workload_gflop) + ",";
        hash_feed += ";e=";
        for (const auto& e : g.edges())
            hash_feed += std::to_string(e.first) + "-" + std::to_string(e.second) + ",";
        hash_feed += "\n";

        std::vector<SubRt> subs(static_cast<std::size_t>(g.size()));
        for (int s = 0; s < g.size(); ++s)
            subs[static_cast<std::size_t>(s)].unresolved_preds =
                static_cast<int>(g.preds(s).size());
        std::vector<std::size_t> next(pipes.size(), 0);
        tasks_.push_back(TaskRt{i, t_ms, origin, std::move(g), std::move(pipes),
                                std::move(next), std::move(subs), {}});
    }
    arrival_hash_ = fnv1a64(hash_feed);
}

// --- event plumbing --------------------------------------------------------

void Engine::push(double t, EvKind k, int a, int b, std::uint64_t u) {
    Ev e;
    e.t = t;
    e.seq = seq_++;
    e.kind = k;
    e.a = a;
    e.b = b;
    e.u = u;
    events_.push(e);
}

void Engine::push_msg(double t, const ConsensusMsg& m) {
    Ev e;
    e.t = t;
    e.seq = seq_++;
    e.kind = EvKind::ConsMsg;
    e.msg = m;
    events_.push(e);
}

// --- logging ----------------------------------------------------------------

void Engine::log_line(const std::string& line) {
    if (opts_.event_log) *opts_.event_log << line << '\n';
}

void Engine::log_header() {
    if (!opts_.event_log) return;
    log_line("{\"type\":\"header\",\"scenario\":\"" + json_escape(sc_.name) +
             "\",\"hash\":\"" + sc_.hash() + "\",\"seed\":" + std::to_string(sc_.seed) +
             ",\"policy\":\"" + to_string(sched_.kind()) + "\",\"cloud\":" +
             std::to_string(topo_.cloud_id()) + ",\"timeout_ms\":" +
             format_double(timeout_ms_) + ",\"timeout_enabled\":" +
             (sc_.timeout_enabled ? "true" : "false") + "}");
}

void Engine::log_dispatch(const CopyRt& c) {
    if (!opts_.event_log) return;
    log_line("{\"type\":\"dispatch\",\"t\":" + format_double(now_) + ",\"task\":" +
             std::to_string(c.task_uid) + ",\"sub\":" + std::to_string(c.sub_id) +
             ",\"worker\":" + std::to_string(c.worker) + ",\"term\":" +
             std::to_string(c.term) + ",\"copy\":" + std::to_string(c.uid) + "}");
}

void Engine::log_copy_dead(const CopyRt& c, const char* reason) {
    if (!opts_.event_log) return;
    log_line("{\"type\":\"copy_dead\",\"t\":" + format_double(now_) + ",\"copy\":" +
             std::to_string(c.uid) + ",\"task\":" + std::to_string(c.task_uid) +
             ",\"sub\":" + std::to_string(c.sub_id) + ",\"reason\":\"" + reason +
             "\"}");
}

void Engine::log_complete(const TaskRt& task, int sub_id) {
    if (!opts_.event_log) return;
    const SubRt& s = task.subs[static_cast<std::size_t>(sub_id)];
    log_line("{\"type\":\"complete\",\"t\":" + format_double(now_) + ",\"task\":" +
             std::to_string(task.uid) + ",\"sub\":" + std::to_string(sub_id) +
             ",\"worker\":" + std::to_string(s.done_worker) + ",\"queue\":" +
             format_double(s.q_ms) + ",\"comp\":" + format_double(s.c_ms) +
             ",\"idle\":" + format_double(s.i_ms) + ",\"trans\":" +
             format_double(s.tr_ms) + "}");
}

void Engine::log_record(const TaskRt& task, const CompletionRecord& r) {
    if (!opts_.event_log) return;
    log_line("{\"type\":\"record\",\"t\":" + format_double(now_) + ",\"task\":" +
             std::to_string(task.uid) + ",\"overhead\":" + format_double(r.overhead_ms) +
             ",\"queue\":" + format_double(r.t_queue_ms) + ",\"comp\":" +
             format_double(r.t_comp_ms) + ",\"idle\":" + format_double(r.t_idle_ms) +
             ",\"trans\":" + format_double(r.t_trans_ms) + ",\"total\":" +
             format_double(r.t_total_ms) + ",\"success\":" + (r.success ? "1" : "0") +
             ",\"violation\":" + std::to_string(r.violated_constraint) + "}");
}

void Engine::log_coordinator(int node_id, std::uint64_t term) {
    if (!opts_.event_log) return;
    log_line("{\"type\":\"coordinator\",\"t\":" + format_double(now_) + ",\"node\":" +
             std::to_string(node_id) + ",\"term\":" + std::to_string(term) + "}");
}

// --- consensus integration --------------------------------------------------

void Engine::process_actions(int node_id, const ConsensusActions& a) {
    for (const ConsensusMsg& m : a.outbox) {
        const double lat_s =
            topo_.transfer_time_s(sc_.link.control_payload_bits, m.from, m.to);
        if (!std::isfinite(lat_s)) continue;  // partitioned away
        if (opts_.event_log && (m.type != MsgType::Heartbeat || opts_.log_heartbeats)) {
            log_line("{\"type\":\"msg\",\"t\":" + format_double(now_) + ",\"kind\":\"" +
                     to_string(m.type) + "\",\"from\":" + std::to_string(m.from) +
                     ",\"to\":" + std::to_string(m.to) + ",\"term\":" +
                     std::to_string(m.term) + "}");
        }
        push_msg(now_ + lat_s * 1000.0, m);
    }
    const int idx = worker_index_by_id_[static_cast<std::size_t>(node_id)];
    for (const TimerRequest& tr : a.timers)
        push(now_ + tr.delay_ms, EvKind::ConsTimer, node_id, static_cast<int>(tr.kind),
             tr.generation);
    if (a.role_changed && cons_[static_cast<std::size_t>(idx)].role() == Role::Coordinator) {
        const std::uint64_t term = cons_[static_cast<std::size_t>(idx)].term();
        coord_changes_.push_back(CoordinatorChange{now_, node_id, term});
        log_coordinator(node_id, term);
        // dispatch was gated while leaderless; wake everything up
        for (TaskRt& t : tasks_)
            if (!t.resolved && t.arrival_ms <= now_) mark_candidate(t.uid);
    }
}

void Engine::deliver_msg(const ConsensusMsg& m) {
    const int idx = worker_index_by_id_[static_cast<std::size_t>(m.to)];
    if (!workers_[static_cast<std::size_t>(idx)].alive) return;
    const ConsensusActions a = cons_[static_cast<std::size_t>(idx)].on_message(m);
    process_actions(m.to, a);
}

int Engine::live_coordinator() const {
    int best = -1;
    std::uint64_t best_term = 0;
    for (std::size_t i = 0; i < cons_.size(); ++i) {
        if (!workers_[i].alive) continue;
        if (cons_[i].role() != Role::Coordinator) continue;
        if (best < 0 || cons_[i].term() > best_term) {
            best = cons_[i].id();
            best_term = cons_[i].term();
        }
    }
    return best;
}

// --- worker mechanics --------------------------------------------------------

Engine::WorkerRt& Engine::worker(int id) {
    return workers_[static_cast<std::size_t>(
        worker_index_by_id_[static_cast<std::size_t>(id)])];
}

void Engine::advance_worker(WorkerRt& w) {
    const double dt = now_ - w.last_t;
    w.last_t = now_;
    if (dt <= 0.0 || !w.alive) return;
    w.up_ms += dt;
    if (w.running.empty()) return;
    w.busy_ms += dt;
    const double rate =
        w.spec.capacity_gflops /
        static_cast<double>(std::max(w.spec.n_cores, static_cast<int>(w.running.size())));
    const double drained = rate * dt / 1000.0;
    for (std::uint64_t uid : w.running)
        copies_[static_cast<std::size_t>(uid)].remaining_gflop -= drained;
}

void Engine::reschedule_worker(WorkerRt& w) {
    ++w.gen;
    if (!w.alive || w.running.empty()) return;
    const double rate =
        w.spec.capacity_gflops /
        static_cast<double>(std::max(w.spec.n_cores, static_cast<int>(w.running.size())));
    double min_rem = std::numeric_limits<double>::infinity();
    for (std::uint64_t uid : w.running)
        min_rem = std::min(min_rem, copies_[static_cast<std::size_t>(uid)].remaining_gflop);
    const double dt_ms = std::max(0.0, min_rem) / rate * 1000.0;
    push(now_ + dt_ms, EvKind::Compute, w.spec.id, 0, w.gen);
}

void Engine::promote_from_queue(WorkerRt& w) {
    if (!w.alive) return;
    while (static_cast<int>(w.running.size()) < w.spec.concurrency_limit &&
           !w.queued.empty()) {
        const std::uint64_t uid = w.queued.front();
        w.queued.pop_front();
        CopyRt& c = copies_[static_cast<std::size_t>(uid)];
        c.st = CopySt::Running;
        c.start_ms = now_;
        w.running.push_back(uid);
        w.peak_running = std::max(w.peak_running, static_cast<int>(w.running.size()));
        advance_sub_state(tasks_[static_cast<std::size_t>(c.task_uid)], c.sub_id,
                          SubtaskState::Running);
    }
}

void Engine::detach_copy(WorkerRt& w, std::uint64_t cuid) {
    auto it = std::find(w.running.begin(), w.running.end(), cuid);
    if (it != w.running.end()) {
        w.running.erase(it);
        return;
    }
    auto qit = std::find(w.queued.begin(), w.queued.end(), cuid);
    if (qit != w.queued.end()) w.queued.erase(qit);
}

void Engine::uncommit(const CopyRt& c) {
    if (c.worker < 0) return;
    WorkerRt& w = worker(c.worker);
    auto it = std::find(w.committed.begin(), w.committed.end(), c.uid);
    if (it != w.committed.end()) w.committed.erase(it);
}

// --- subtask state -----------------------------------------------------------

void Engine::advance_sub_state(TaskRt& task, int sub_id, SubtaskState to) {
    SubRt& s = task.subs[static_cast<std::size_t>(sub_id)];
    if (to == SubtaskState::Failed) {
        if (s.state == SubtaskState::Completed || s.state == SubtaskState::Failed) return;
        s.state = SubtaskState::Failed;
        return;
    }
    if (to == SubtaskState::Suspended) {
        if (!transition_allowed(s.state, to))
            throw std::logic_error("illegal subtask suspension");
        s.state = to;
        return;
    }
    while (state_rank(s.state) < state_rank(to)) {
        SubtaskState next = s.state;
        switch (s.state) {
            case SubtaskState::Pending: next = SubtaskState::Queued; break;
            case SubtaskState::Suspended: next = SubtaskState::Queued; break;
            case SubtaskState::Queued: next = SubtaskState::Running; break;
            case SubtaskState::Running: next = SubtaskState::Completed; break;
            default: throw std::logic_error("illegal subtask progress");
        }
        if (!transition_allowed(s.state, next))
            throw std::logic_error("illegal subtask transition");
        s.state = next;
    }
}

// --- copies -------------------------------------------------------------------

void Engine::kill_copy(CopyRt& c, const char* reason, bool park_on_loss) {
    if (c.st == CopySt::Done || c.st == CopySt::Dead) return;
    if (c.st == CopySt::Queued || c.st == CopySt::Running) {
        WorkerRt& w = worker(c.worker);
        advance_worker(w);
        detach_copy(w, c.uid);
        promote_from_queue(w);
        reschedule_worker(w);
        freed_ = true;
    } else {
        uncommit(c);
    }
    c.st = CopySt::Dead;
    log_copy_dead(c, reason);
    TaskRt& task = tasks_[static_cast<std::size_t>(c.task_uid)];
    SubRt& s = task.subs[static_cast<std::size_t>(c.sub_id)];
    auto it = std::find(s.live_copies.begin(), s.live_copies.end(), c.uid);
    if (it != s.live_copies.end()) s.live_copies.erase(it);
    after_copy_loss(task, c.sub_id, park_on_loss);
}

void Engine::after_copy_loss(TaskRt& task, int sub_id, bool park_on_loss) {
    if (task.resolved || truncated_) return;
    SubRt& s = task.subs[static_cast<std::size_t>(sub_id)];
    if (s.state == SubtaskState::Completed || s.state == SubtaskState::Failed) return;
    if (!s.live_copies.empty()) return;
    if (s.state == SubtaskState::Queued || s.state == SubtaskState::Running)
        advance_sub_state(task, sub_id, SubtaskState::Suspended);
    if (park_on_loss)
        park(task);
    else
        mark_candidate(task.uid);
}

void Engine::park(TaskRt& task) {
    if (task.parked || task.resolved) return;
    task.parked = true;
    parked_.push_back(task.uid);
}

void Engine::mark_candidate(std::uint64_t task_uid) {
    if (!tasks_[static_cast<std::size_t>(task_uid)].resolved)
        candidates_.insert(task_uid);
}

// --- dispatch -----------------------------------------------------------------

WorkerSnapshot Engine::snapshot_worker(const WorkerRt& w, const TaskRt& task) const {
    WorkerSnapshot s;
    s.id = w.spec.id;
    s.alive = w.alive;
    s.is_cloud = w.spec.kind == NodeKind::Cloud;
    s.capacity_gflops = w.spec.capacity_gflops;
    s.memory_mb = w.spec.memory_mb;
    s.has_asic = w.spec.has_asic;
    s.n_cores = w.spec.n_cores;
    s.concurrency_limit = w.spec.concurrency_limit;
    s.queue_capacity = w.spec.queue_capacity;
    s.n_running = static_cast<int>(w.running.size());
    s.n_queued = static_cast<int>(w.queued.size());
    s.n_committed = static_cast<int>(w.committed.size());
    double wait = 0.0;
    for (std::uint64_t uid : w.queued)
        wait += compute_time_ms(copies_[static_cast<std::size_t>(uid)].remaining_gflop,
                                w.spec.capacity_gflops, w.spec.n_cores, 1);
    // Work already dispatched here but still waiting on inputs or in transit
    // counts too; otherwise a burst of placements all lands on the same node
    // before any of it shows up in the queue.
    for (std::uint64_t uid : w.committed)
        wait += compute_time_ms(copies_[static_cast<std::size_t>(uid)].remaining_gflop,
                                w.spec.capacity_gflops, w.spec.n_cores, 1);
    s.queue_wait_est_ms = wait;
    s.utilization = w.up_ms > 0.0 ? w.busy_ms / w.up_ms : 0.0;

    const int origin = task.origin;
    const bool origin_alive =
        workers_[static_cast<std::size_t>(
                     worker_index_by_id_[static_cast<std::size_t>(origin)])]
            .alive;
    if (s.is_cloud || origin == s.id) {
        s.mesh_hops = 0.0;
    } else {
        s.mesh_hops = static_cast<double>(topo_.mesh_hops(origin, s.id).value_or(0));
    }
    const double t_s = topo_.transfer_time_s(sc_.workload.payload_bits, origin, s.id);
    double rate_bps;
    if (!std::isfinite(t_s))
        rate_bps = 0.0;
    else if (t_s <= 0.0)
        rate_bps = sc_.link.wireless.bandwidth_bps;
    else
        rate_bps = sc_.workload.payload_bits / t_s;
    const double loss = std::max(topo_.dead_incident_fraction(s.id), 0.05);
    s.link_quality = std::log1p(rate_bps) / (loss * loss);
    s.reachable = origin_alive && topo_.reachable(origin, s.id);
    return s;
}

SubtaskView Engine::view_subtask(const TaskRt& task, int sub_id) const {
    const Subtask& st = task.graph.subtask(sub_id);
    const SubRt& s = task.subs[static_cast<std::size_t>(sub_id)];
    SubtaskView v;
    v.task_uid = task.uid;
    v.subtask_id = sub_id;
    v.cpu_req_gflops = st.profile.cpu_gflops;
    v.mem_req_mb = st.profile.memory_mb;
    v.needs_asic = st.profile.needs_asic;
    v.cpu_req_norm = st.workload_gflop / std::max(max_demand_gflop_, 1e-12);
    v.mem_req_norm = st.profile.memory_mb / std::max(max_node_memory_mb_, 1e-12);
    v.unresolved_preds = s.unresolved_preds;
    v.remaining_depth = task.graph.remaining_depth(sub_id);
    v.waited_s = (now_ - task.arrival_ms) / 1000.0;
    return v;
}

void Engine::begin_transfer(TaskRt& task, CopyRt& c) {
    const auto& preds = task.graph.preds(c.sub_id);
    double preds_done = task.arrival_ms;
    for (int p : preds)
        preds_done = std::max(preds_done, task.subs[static_cast<std::size_t>(p)].done_ms);
    c.idle_ms = idle_time_ms(preds_done, c.dispatch_ms);

    double tr_s = 0.0;
    if (preds.empty()) {
        const WorkerRt& src = workers_[static_cast<std::size_t>(
            worker_index_by_id_[static_cast<std::size_t>(task.origin)])];
        tr_s = src.alive ? topo_.transfer_time_s(
                               task.graph.subtask(c.sub_id).payload_bits, task.origin,
                               c.worker)
                         : std::numeric_limits<double>::infinity();
    } else {
        for (int p : preds) {
            const int src_id = task.subs[static_cast<std::size_t>(p)].done_worker;
            const WorkerRt& src = workers_[static_cast<std::size_t>(
                worker_index_by_id_[static_cast<std::size_t>(src_id)])];
            const double leg =
                src.alive ? topo_.transfer_time_s(task.graph.subtask(p).payload_bits,
                                                  src_id, c.worker)
                          : std::numeric_limits<double>::infinity();
            tr_s = std::max(tr_s, leg);
        }
    }
    if (!std::isfinite(tr_s)) {
        task.route_blocked = true;
        ++n_rejections_;
        kill_copy(c, "unreachable", /*park_on_loss=*/true);
        return;
    }
    c.trans_ms = tr_s * 1000.0;
    c.st = CopySt::InTransfer;
    push(now_ + c.trans_ms, EvKind::Transfer, 0, 0, c.uid);
}

bool Engine::place_subtask(TaskRt& task, int sub_id) {
    const int coord = live_coordinator();
    if (coord < 0) return true;  // leaderless: the next announce re-candidates us
    const std::uint64_t coord_term =
        cons_[static_cast<std::size_t>(
                  worker_index_by_id_[static_cast<std::size_t>(coord)])]
            .term();

    const SubtaskView v = view_subtask(task, sub_id);
    std::vector<WorkerSnapshot> eligible;
    bool resource_possible = false;
    for (const WorkerRt& w : workers_) {
        const WorkerSnapshot s = snapshot_worker(w, task);
        const bool fits = s.capacity_gflops >= v.cpu_req_gflops &&
                          s.memory_mb >= v.mem_req_mb &&
                          (!v.needs_asic || s.has_asic);
        resource_possible = resource_possible || fits;
        if (worker_eligible(s, v)) eligible.push_back(s);
    }

    if (eligible.empty()) {
        if (!resource_possible) {
            resolve_task(task, false, kViolationResources, /*notify=*/true);
            return true;
        }
        if (!sc_.timeout_enabled) {
            resolve_task(task, false, kViolationReachability, /*notify=*/true);
            return true;
        }
        return false;  // capable nodes exist but are down/cut off; wait
    }

    Decision d = sched_.decide(v, eligible, policy_rng_);
    n_decisions_ += static_cast<std::uint64_t>(std::max(1, d.evaluations));
    // One placement round = one episode iteration, however many candidates the
    // policy scored inside it.
    ++n_decide_calls_;
    if (opts_.training && n_decide_calls_ >=
                              static_cast<std::uint64_t>(sc_.ppo.max_episode_iters))
        pending_truncate_ = true;

    if (d.workers.empty()) {
        // the policy kept everything back: run at the origin when it can
        bool origin_ok = false;
        for (const WorkerSnapshot& s : eligible)
            if (s.id == task.origin) origin_ok = true;
        if (!origin_ok) return false;
        d.workers.push_back(task.origin);
    }

    SubRt& sub = task.subs[static_cast<std::size_t>(sub_id)];
    int placed = 0;
    for (int wid : d.workers) {
        const int widx = worker_index_by_id_[static_cast<std::size_t>(wid)];
        if (cons_[static_cast<std::size_t>(widx)].term() > coord_term) {
            ++n_rejections_;  // worker already follows a newer coordinator
            continue;
        }
        CopyRt c;
        c.uid = copies_.size();
        c.task_uid = task.uid;
        c.sub_id = sub_id;
        c.worker = wid;
        c.st = CopySt::WaitPreds;
        c.remaining_gflop = task.graph.subtask(sub_id).workload_gflop;
        c.dispatch_ms = now_;
        c.term = coord_term;
        copies_.push_back(c);
        sub.live_copies.push_back(c.uid);
        workers_[static_cast<std::size_t>(widx)].committed.push_back(c.uid);
        ++n_dispatches_;
        if (placed > 0) ++n_duplicates_;
        ++placed;
        log_dispatch(copies_.back());
        if (sub.unresolved_preds == 0) begin_transfer(task, copies_.back());
        if (task.resolved) return true;
    }
    return !sub.live_copies.empty();
}

bool Engine::dispatch_task(TaskRt& task) {
    bool fully = true;
    for (std::size_t pi = 0; pi < task.pipelines.size(); ++pi) {
        const std::vector<int>& members = task.pipelines[pi].members;
        std::size_t& cursor = task.pipe_next[pi];
        while (cursor < members.size() &&
               task.subs[static_cast<std::size_t>(members[cursor])].state ==
                   SubtaskState::Completed)
            ++cursor;
        if (cursor >= members.size()) continue;
        const int sid = members[cursor];
        const SubRt& sub = task.subs[static_cast<std::size_t>(sid)];
        if (sub.state == SubtaskState::Failed) continue;
        if (!sub.live_copies.empty()) continue;
        if (!place_subtask(task, sid)) fully = false;
        if (task.resolved) return true;
        if (pending_truncate_) return fully;
    }
    return fully;
}

void Engine::run_rounds() {
    if (truncated_) return;
    while (!candidates_.empty() && !pending_truncate_) {
        const std::uint64_t uid = *candidates_.begin();
        candidates_.erase(candidates_.begin());
        TaskRt& task = tasks_[static_cast<std::size_t>(uid)];
        if (task.resolved) continue;
        if (!dispatch_task(task)) park(task);
    }
    if (freed_ && !pending_truncate_) {
        freed_ = false;
        while (!parked_.empty()) {
            const std::uint64_t uid = parked_.front();
            parked_.pop_front();
            TaskRt& task = tasks_[static_cast<std::size_t>(uid)];
            task.parked = false;
            if (task.resolved) continue;
            if (!dispatch_task(task)) {
                park(task);  // rotates to the tail; retry on the next release
                break;
            }
            if (pending_truncate_) break;
        }
    }
}

// --- lifecycle ------------------------------------------------------------------

void Engine::handle_arrival(std::uint64_t uid) {
    ++arrivals_seen_;
    TaskRt& task = tasks_[static_cast<std::size_t>(uid)];
    if (opts_.event_log) {
        std::string edges;
        for (int i = 0; i < task.graph.size(); ++i) {
            for (int succ : task.graph.succs(i)) {
                if (!edges.empty()) edges += ",";
                edges += "[" + std::to_string(i) + "," + std::to_string(succ) + "]";
            }
        }
        log_line("{\"type\":\"arrival\",\"t\":" + format_double(now_) + ",\"task\":" +
                 std::to_string(uid) + ",\"origin\":" + std::to_string(task.origin) +
                 ",\"subtasks\":" + std::to_string(task.graph.size()) +
                 ",\"edges\":[" + edges + "]}");
    }
    if (truncated_) {
        resolve_task(task, false, kViolationDeadline, /*notify=*/false);
        return;
    }
    // A request is receivable only while its origin keeps a usable radio link
    // or a wired fallback; a fully cut-off origin cannot take in sensor data.
    if (topo_.dead_incident_fraction(task.origin) >= 1.0 &&
        !sc_.link.backhaul_available) {
        task.route_blocked = true;
        resolve_task(task, false, kViolationReachability, /*notify=*/true);
        return;
    }
    if (sc_.timeout_enabled)
        push(task.arrival_ms + timeout_ms_, EvKind::Timeout, 0, 0, uid);
    mark_candidate(uid);
}

void Engine::handle_transfer(std::uint64_t cuid) {
    CopyRt& c = copies_[static_cast<std::size_t>(cuid)];
    if (c.st != CopySt::InTransfer) return;
    uncommit(c);
    TaskRt& task = tasks_[static_cast<std::size_t>(c.task_uid)];
    if (task.resolved) {
        c.st = CopySt::Dead;
        return;
    }
    WorkerRt& w = worker(c.worker);
    if (!w.alive) {
        kill_copy(c, "crash", /*park_on_loss=*/false);
        return;
    }
    advance_worker(w);
    c.arrive_ms = now_;
    if (static_cast<int>(w.running.size()) < w.spec.concurrency_limit &&
        w.queued.empty()) {
        c.st = CopySt::Running;
        c.start_ms = now_;
        w.running.push_back(c.uid);
        w.peak_running = std::max(w.peak_running, static_cast<int>(w.running.size()));
        advance_sub_state(task, c.sub_id, SubtaskState::Running);
    } else if (static_cast<int>(w.queued.size()) < w.spec.queue_capacity) {
        c.st = CopySt::Queued;
        w.queued.push_back(c.uid);
        advance_sub_state(task, c.sub_id, SubtaskState::Queued);
    } else {
        ++n_rejections_;
        kill_copy(c, "overflow", /*park_on_loss=*/true);
        reschedule_worker(w);
        return;
    }
    reschedule_worker(w);
}

void Engine::handle_compute(int worker_id, std::uint64_t gen) {
    WorkerRt& w = worker(worker_id);
    if (gen != w.gen || !w.alive) return;
    advance_worker(w);
    std::vector<std::uint64_t> finished;
    for (std::uint64_t uid : w.running)
        if (copies_[static_cast<std::size_t>(uid)].remaining_gflop <= kDoneEps)
            finished.push_back(uid);
    std::sort(finished.begin(), finished.end());
    for (std::uint64_t uid : finished) complete_copy(copies_[static_cast<std::size_t>(uid)]);
    promote_from_queue(w);
    reschedule_worker(w);
}

void Engine::complete_copy(CopyRt& c) {
    if (c.st != CopySt::Running) return;
    c.st = CopySt::Done;
    WorkerRt& w = worker(c.worker);
    detach_copy(w, c.uid);
    freed_ = true;

    TaskRt& task = tasks_[static_cast<std::size_t>(c.task_uid)];
    const double workload = task.graph.subtask(c.sub_id).workload_gflop;
    max_completion_residual_ =
        std::max(max_completion_residual_,
                 std::abs(c.remaining_gflop) / std::max(workload, 1e-12));
    SubRt& sub = task.subs[static_cast<std::size_t>(c.sub_id)];
    auto it = std::find(sub.live_copies.begin(), sub.live_copies.end(), c.uid);
    if (it != sub.live_copies.end()) sub.live_copies.erase(it);
    if (task.resolved || sub.state == SubtaskState::Completed) return;

    advance_sub_state(task, c.sub_id, SubtaskState::Completed);
    sub.done_ms = now_;
    sub.done_worker = c.worker;
    task.comp_spans.emplace_back(c.start_ms, now_);
    sub.q_ms = queueing_time_ms(sc_.queue_overhead_ms, c.start_ms - c.arrive_ms);
    sub.c_ms = now_ - c.start_ms;
    sub.i_ms = c.idle_ms;
    sub.tr_ms = c.trans_ms;
    ++task.n_completed;
    log_complete(task, c.sub_id);

    // duplicates lost the race
    const std::vector<std::uint64_t> losers = sub.live_copies;
    for (std::uint64_t uid : losers)
        kill_copy(copies_[static_cast<std::size_t>(uid)], "cancel",
                  /*park_on_loss=*/false);
    sub.live_copies.clear();

    // release downstream subtasks waiting on this result
    for (int succ : task.graph.succs(c.sub_id)) {
        SubRt& nxt = task.subs[static_cast<std::size_t>(succ)];
        if (--nxt.unresolved_preds == 0) {
            const std::vector<std::uint64_t> waiting = nxt.live_copies;
            for (std::uint64_t uid : waiting) {
                CopyRt& wc = copies_[static_cast<std::size_t>(uid)];
                if (wc.st == CopySt::WaitPreds) begin_transfer(task, wc);
            }
        }
    }

    if (task.n_completed == task.graph.size()) {
        const CompletionRecord r = assemble_record(task);
        const bool ok = !sc_.timeout_enabled || r.t_total_ms <= timeout_ms_;
        resolve_task(task, ok, ok ? kViolationNone : kViolationDeadline,
                     /*notify=*/true);
    } else {
        mark_candidate(task.uid);
    }
}

void Engine::handle_crash(int node_id) {
    WorkerRt& w = worker(node_id);
    if (!w.alive) return;
    advance_worker(w);
    w.alive = false;
    if (opts_.event_log)
        log_line("{\"type\":\"crash\",\"t\":" + format_double(now_) + ",\"node\":" +
                 std::to_string(node_id) + "}");
    for (CopyRt& c : copies_) {
        if (c.worker != node_id) continue;
        if (c.st == CopySt::Done || c.st == CopySt::Dead) continue;
        kill_copy(c, "crash", /*park_on_loss=*/false);
    }
    w.running.clear();
    w.queued.clear();
    w.committed.clear();
    ++w.gen;  // orphan any scheduled compute step
}

void Engine::handle_recover(int node_id) {
    WorkerRt& w = worker(node_id);
    if (w.alive) return;
    w.alive = true;
    w.last_t = now_;
    if (opts_.event_log)
        log_line("{\"type\":\"recover\",\"t\":" + format_double(now_) + ",\"node\":" +
                 std::to_string(node_id) + "}");
    const int idx = worker_index_by_id_[static_cast<std::size_t>(node_id)];
    const ConsensusActions a = cons_[static_cast<std::size_t>(idx)].on_recover();
    process_actions(node_id, a);
    freed_ = true;
    for (TaskRt& t : tasks_)
        if (!t.resolved && t.arrival_ms <= now_ && t.route_blocked) mark_candidate(t.uid);
}

CompletionRecord Engine::assemble_record(const TaskRt& task) const {
    CompletionRecord r;
    r.task_id = task.uid;
    r.overhead_ms = topo_.node(task.origin).fixed_overhead_ms;
    for (const SubRt& s : task.subs) {
        if (s.state != SubtaskState::Completed) continue;
        const bool on_edge =
            topo_.node(s.done_worker).kind == NodeKind::Rmu;
        if (on_edge) r.t_queue_ms += s.q_ms;
        r.t_comp_ms += s.c_ms;
        r.t_idle_ms += s.i_ms;
        r.t_trans_ms += s.tr_ms;
    }
    r.t_total_ms = end_to_end_ms(r.overhead_ms, r.t_queue_ms, r.t_comp_ms,
                                 r.t_idle_ms, r.t_trans_ms);

    // Wall-clock busy window: length of the union of the run intervals. With
    // everything serialized this equals t_comp_ms; concurrent branches shrink it.
    std::vector<std::pair<double, double>> spans = task.comp_spans;
    std::sort(spans.begin(), spans.end());
    double wall = 0.0;
    double lo = 0.0, hi = -1.0;
    for (const auto& [a, b] : spans) {
        if (a > hi) {
            if (hi >= lo) wall += hi - lo;
            lo = a;
            hi = b;
        } else {
            hi = std::max(hi, b);
        }
    }
    if (hi >= lo && !spans.empty()) wall += hi - lo;
    r.t_comp_wall_ms = wall;
    return r;
}

void Engine::resolve_task(TaskRt& task, bool success, int violation_code,
                          bool notify) {
    if (task.resolved) return;
    task.resolved = true;
    task.success = success;
    task.violation = success ? kViolationNone : violation_code;
    ++n_resolved_;

    for (std::size_t s = 0; s < task.subs.size(); ++s) {
        const std::vector<std::uint64_t> live = task.subs[s].live_copies;
        for (std::uint64_t uid : live)
            kill_copy(copies_[static_cast<std::size_t>(uid)],
                      success ? "cancel" : "fail", /*park_on_loss=*/false);
        task.subs[s].live_copies.clear();
        if (!success)
            advance_sub_state(task, static_cast<int>(s), SubtaskState::Failed);
    }

    CompletionRecord r = assemble_record(task);
    r.success = success;
    r.violated_constraint = task.violation;
    done_records_.push_back(r);
    log_record(task, r);

    window_.push(success);
    if (notify) {
        const double exec_charge =
            success ? r.t_total_ms - r.t_trans_ms : timeout_ms_;
        const double trans_charge = success ? r.t_trans_ms : 0.0;
        sched_.on_task_resolved(task.uid, exec_charge, trans_charge, success,
                                window_.rate());
    }
    if (opts_.training) {
        consecutive_violations_ = success ? 0 : consecutive_violations_ + 1;
        if (consecutive_violations_ >= sc_.ppo.max_consecutive_violations)
            pending_truncate_ = true;
    }
}

void Engine::truncate_episode() {
    if (truncated_) return;
    truncated_ = true;
    pending_truncate_ = false;
    candidates_.clear();
    parked_.clear();
    for (TaskRt& t : tasks_) {
        if (t.resolved || t.arrival_ms > now_) continue;
        resolve_task(t, false, kViolationDeadline, /*notify=*/false);
    }
}

// --- main loop --------------------------------------------------------------------

EngineResult Engine::run() {
    log_header();
    for (std::size_t i = 0; i < cons_.size(); ++i) {
        const ConsensusActions a = cons_[i].on_start();
        process_actions(cons_[i].id(), a);
    }
    {
        const int cid = topo_.cloud_id();
        const std::uint64_t term =
            cons_[static_cast<std::size_t>(
                      worker_index_by_id_[static_cast<std::size_t>(cid)])]
                .term();
        coord_changes_.push_back(CoordinatorChange{0.0, cid, term});
        log_coordinator(cid, term);
    }

    for (const TaskRt& t : tasks_) push(t.arrival_ms, EvKind::Arrival, 0, 0, t.uid);
    for (const CrashEvent& ce : sc_.crashes) {
        push(ce.at_s * 1000.0, EvKind::Crash, ce.node_id, 0, 0);
        if (ce.recover_s >= 0.0)
            push(ce.recover_s * 1000.0, EvKind::Recover, ce.node_id, 0, 0);
    }

    bool hard_stopped = false;
    while (!events_.empty()) {
        if (n_resolved_ == tasks_.size() && arrivals_seen_ == tasks_.size()) break;
        const Ev ev = events_.top();
        if (ev.t > hard_stop_ms_) {
            hard_stopped = true;
            break;
        }
        events_.pop();
        now_ = std::max(now_, ev.t);
        switch (ev.kind) {
            case EvKind::Arrival: handle_arrival(ev.u); break;
            case EvKind::Transfer: handle_transfer(ev.u); break;
            case EvKind::Compute: handle_compute(ev.a, ev.u); break;
            case EvKind::ConsTimer: {
                const int idx = worker_index_by_id_[static_cast<std::size_t>(ev.a)];
                if (workers_[static_cast<std::size_t>(idx)].alive) {
                    const ConsensusActions a = cons_[static_cast<std::size_t>(idx)].on_timer(
                        static_cast<TimerKind>(ev.b), ev.u);
                    process_actions(ev.a, a);
                }
                break;
            }
            case EvKind::ConsMsg: deliver_msg(ev.msg); break;
            case EvKind::Crash: handle_crash(ev.a); break;
            case EvKind::Recover: handle_recover(ev.a); break;
            case EvKind::Timeout: {
                TaskRt& t = tasks_[static_cast<std::size_t>(ev.u)];
                if (!t.resolved)
                    resolve_task(t, false,
                                 t.route_blocked ? kViolationReachability
                                                 : kViolationDeadline,
                                 /*notify=*/true);
                break;
            }
        }
        if (pending_truncate_ && !truncated_) truncate_episode();
        run_rounds();
        if (pending_truncate_ && !truncated_) truncate_episode();
    }

    if (hard_stopped) now_ = hard_stop_ms_;
    for (TaskRt& t : tasks_) {
        if (t.resolved) continue;
        if (t.arrival_ms > now_) now_ = t.arrival_ms;
        resolve_task(t, false,
                     t.route_blocked ? kViolationReachability : kViolationDeadline,
                     /*notify=*/false);
    }

    EngineResult res;
    for (WorkerRt& w : workers_) {
        advance_worker(w);
        res.loads.push_back(WorkerLoad{w.spec.id, w.spec.capacity_gflops, w.busy_ms,
                                       w.up_ms});
        res.peak_running.push_back(w.peak_running);
    }
    std::sort(done_records_.begin(), done_records_.end(),
              [](const CompletionRecord& a, const CompletionRecord& b) {
                  return a.task_id < b.task_id;
              });
    res.records = std::move(done_records_);
    res.n_tasks = tasks_.size();
    res.n_decisions = n_decisions_;
    res.n_rounds = n_decide_calls_;
    res.n_dispatches = n_dispatches_;
    res.n_duplicates = n_duplicates_;
    res.n_rejections = n_rejections_;
    res.coordinator_changes = coord_changes_;
    res.arrival_hash = arrival_hash_;
    res.end_ms = now_;
    res.episode_truncated = truncated_;
    res.max_completion_residual = max_completion_residual_;
    return res;
}

}  // namespace cesim
