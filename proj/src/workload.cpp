#include "cesim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace cesim {

const char* to_string(SubtaskState s) {
    switch (s) {
        case SubtaskState::Pending: return "Pending";
        case SubtaskState::Queued: return "Queued";
        case SubtaskState::Running: return "Running";
        case SubtaskState::Suspended: return "Suspended";
        case SubtaskState::Completed: return "Completed";
        case SubtaskState::Failed: return "Failed";
    }
    return "?";
}

bool transition_allowed(SubtaskState from, SubtaskState to) {
    using S = SubtaskState;
    if (from == S::Completed) return false;           // terminal
    if (from == S::Failed) return to == S::Failed;    // absorbing
    if (to == S::Failed) return true;                 // anything live can fail
    switch (from) {
        case S::Pending: return to == S::Queued;
        case S::Queued: return to == S::Running || to == S::Suspended;
        case S::Running: return to == S::Completed || to == S::Suspended;
        case S::Suspended: return to == S::Queued;
        default: return false;
    }
}

TaskGraph::TaskGraph(std::vector<Subtask> subtasks,
                     std::vector<std::pair<int, int>> edges)
    : subtasks_(std::move(subtasks)), edges_(std::move(edges)) {
    const int n = static_cast<int>(subtasks_.size());
    if (n == 0) throw std::invalid_argument("task graph has no subtasks");
    for (int i = 0; i < n; ++i) {
        if (subtasks_[static_cast<std::size_t>(i)].id != i)
            throw std::invalid_argument("subtask ids must be 0..n-1 in order");
        if (subtasks_[static_cast<std::size_t>(i)].workload_gflop < 0.0)
            throw std::invalid_argument("subtask workload must be >= 0");
    }
    preds_.assign(static_cast<std::size_t>(n), {});
    succs_.assign(static_cast<std::size_t>(n), {});
    std::sort(edges_.begin(), edges_.end());
    for (std::size_t i = 1; i < edges_.size(); ++i)
        if (edges_[i] == edges_[i - 1])
            throw std::invalid_argument("duplicate edge in task graph");
    for (const auto& [u, v] : edges_) {
        if (u < 0 || u >= n || v < 0 || v >= n || u == v)
            throw std::invalid_argument("edge endpoint out of range");
        succs_[static_cast<std::size_t>(u)].push_back(v);
        preds_[static_cast<std::size_t>(v)].push_back(u);
    }
    for (int i = 0; i < n; ++i) {
        subtasks_[static_cast<std::size_t>(i)].preds = preds_[static_cast<std::size_t>(i)];
    }
    // cycle check via Kahn; also caches nothing else
    if (static_cast<int>(topological_order().size()) != n)
        throw std::invalid_argument("task graph contains a cycle");
    // longest path to a sink, over reverse topological order
    depth_.assign(static_cast<std::size_t>(n), 0);
    const auto topo = topological_order();
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        int best = 0;
        for (int s : succs_[static_cast<std::size_t>(*it)])
            best = std::max(best, depth_[static_cast<std::size_t>(s)] + 1);
        depth_[static_cast<std::size_t>(*it)] = best;
    }
}

std::vector<int> TaskGraph::topological_order() const {
    const int n = size();
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    for (const auto& [u, v] : edges_) {
        (void)u;
        ++indeg[static_cast<std::size_t>(v)];
    }
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int i = 0; i < n; ++i)
        if (indeg[static_cast<std::size_t>(i)] == 0) ready.push(i);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    while (!ready.empty()) {
        const int u = ready.top();
        ready.pop();
        order.push_back(u);
        for (int v : succs_[static_cast<std::size_t>(u)])
            if (--indeg[static_cast<std::size_t>(v)] == 0) ready.push(v);
    }
    return order;  // shorter than n iff a cycle exists
}

std::optional<int> TaskGraph::path_length(int from, int to) const {
    if (from < 0 || from >= size() || to < 0 || to >= size())
        throw std::out_of_range("path_length: id out of range");
    if (from == to) return 0;
    std::vector<int> dist(static_cast<std::size_t>(size()), -1);
    dist[static_cast<std::size_t>(from)] = 0;
    std::queue<int> q;
    q.push(from);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : succs_[static_cast<std::size_t>(u)]) {
            if (dist[static_cast<std::size_t>(v)] != -1) continue;
            dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
            if (v == to) return dist[static_cast<std::size_t>(v)];
            q.push(v);
        }
    }
    return std::nullopt;
}

double TaskGraph::total_gflop() const {
    double t = 0.0;
    for (const auto& s : subtasks_) t += s.workload_gflop;
    return t;
}

double TaskGraph::max_subtask_gflop() const {
    double m = 0.0;
    for (const auto& s : subtasks_) m = std::max(m, s.workload_gflop);
    return m;
}

const std::array<std::string, 8>& template_stage_names() {
    static const std::array<std::string, 8> names = {
        "seg_a", "seg_b", "seg_c", "arbitrate", "mlp", "dae", "tcn", "fuse"};
    return names;
}

TaskGraph instantiate_template(const WorkloadConfig& cfg) {
    std::vector<Subtask> subs;
    subs.reserve(8);
    for (int i = 0; i < 8; ++i) {
        Subtask s;
        s.id = i;
        s.workload_gflop = cfg.template_gflop[static_cast<std::size_t>(i)];
        s.label = template_stage_names()[static_cast<std::size_t>(i)];
        s.payload_bits = cfg.payload_bits;
        s.profile.cpu_gflops = s.workload_gflop;  // demands its own per-second rate
        s.profile.memory_mb = cfg.memory_mb;
        s.profile.needs_asic = false;
        subs.push_back(std::move(s));
    }
    // 0..2 sensor segments -> 3 arbitration -> 4..6 detectors -> 7 fusion
    const std::vector<std::pair<int, int>> edges = {
        {0, 3}, {1, 3}, {2, 3}, {3, 4}, {3, 5}, {3, 6}, {4, 7}, {5, 7}, {6, 7}};
    return TaskGraph(std::move(subs), edges);
}

int zipf_sample(Rng& rng, double s, int v_min, int v_max) {
    if (v_min > v_max) throw std::invalid_argument("zipf: empty support");
    const int k = v_max - v_min + 1;
    double total = 0.0;
    for (int r = 1; r <= k; ++r) total += std::pow(static_cast<double>(r), -s);
    double u = rng.uniform() * total;
    for (int r = 1; r <= k; ++r) {
        u -= std::pow(static_cast<double>(r), -s);
        if (u <= 0.0) return v_min + (r - 1);
    }
    return v_max;
}

TaskGraph generate_random_dag(const WorkloadConfig& cfg, Rng& rng) {
    const int n = rng.uniform_int(cfg.n_subtasks_min, cfg.n_subtasks_max);
    std::vector<Subtask> subs;
    subs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Subtask s;
        s.id = i;
        s.workload_gflop =
            static_cast<double>(zipf_sample(rng, cfg.zipf_s, cfg.flops_min, cfg.flops_max));
        s.payload_bits = cfg.payload_bits;
        s.profile.cpu_gflops = s.workload_gflop;
        s.profile.memory_mb = cfg.memory_mb;
        subs.push_back(std::move(s));
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(cfg.dep_probability)) edges.emplace_back(i, j);
    return TaskGraph(std::move(subs), std::move(edges));
}

std::vector<double> generate_arrivals(const WorkloadConfig& cfg, double horizon_s,
                                      Rng& rng) {
    std::vector<double> times;
    if (cfg.arrivals == ArrivalProcess::Poisson) {
        if (cfg.request_rate_hz <= 0.0)
            throw std::invalid_argument("request rate must be > 0");
        double t = rng.exponential(cfg.request_rate_hz);
        while (t < horizon_s) {
            times.push_back(t);
            t += rng.exponential(cfg.request_rate_hz);
        }
    } else {
        for (int s = 0; s < cfg.turnout_count; ++s) {
            double t = rng.uniform(0.0, cfg.turnout_interval_max_s);
            while (t < horizon_s) {
                times.push_back(t);
                t += rng.uniform(cfg.turnout_interval_min_s, cfg.turnout_interval_max_s);
            }
        }
        std::sort(times.begin(), times.end());
    }
    return times;
}

}  // namespace cesim
