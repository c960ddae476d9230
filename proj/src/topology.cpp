#include "cesim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

#include "cesim/rng.hpp"

namespace cesim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Topology::Topology(std::vector<NodeSpec> nodes, LinkParams link, HaversineMode hmode)
    : nodes_(std::move(nodes)), link_(link), hmode_(hmode) {
    if (nodes_.empty()) throw std::invalid_argument("topology has no nodes");
    std::sort(nodes_.begin(), nodes_.end(),
              [](const NodeSpec& x, const NodeSpec& y) { return x.id < y.id; });
    int max_id = 0;
    for (const auto& n : nodes_) {
        if (n.id < 0) throw std::invalid_argument("node id must be >= 0");
        max_id = std::max(max_id, n.id);
        validate_position(n.pos);
        if (n.capacity_gflops <= 0.0)
            throw std::invalid_argument("node " + std::to_string(n.id) +
                                        ": capacity must be > 0");
        if (n.n_cores < 1 || n.concurrency_limit < 1)
            throw std::invalid_argument("node " + std::to_string(n.id) +
                                        ": cores and concurrency must be >= 1");
        if (n.queue_capacity < 0)
            throw std::invalid_argument("node " + std::to_string(n.id) +
                                        ": queue capacity must be >= 0");
        if (n.coverage_m < 0.0 || n.transmit_power_w < 0.0 || n.memory_mb <= 0.0)
            throw std::invalid_argument("node " + std::to_string(n.id) +
                                        ": coverage/power/memory out of range");
        if (n.kind == NodeKind::Cloud) {
            if (cloud_id_ >= 0)
                throw std::invalid_argument("more than one cloud node");
            cloud_id_ = n.id;
        }
    }
    if (cloud_id_ < 0) throw std::invalid_argument("topology needs a cloud node");

    id_to_index_.assign(max_id + 1, -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (id_to_index_[nodes_[i].id] != -1)
            throw std::invalid_argument("duplicate node id " +
                                        std::to_string(nodes_[i].id));
        id_to_index_[nodes_[i].id] = static_cast<int>(i);
    }

    const std::size_t n = nodes_.size();
    dist_m_.assign(n, std::vector<double>(n, 0.0));
    adjacency_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = haversine_distance(nodes_[i].pos, nodes_[j].pos, hmode_);
            dist_m_[i][j] = dist_m_[j][i] = d;
            const bool both_edge = nodes_[i].kind == NodeKind::Rmu &&
                                   nodes_[j].kind == NodeKind::Rmu;
            // a D2D link needs each endpoint inside the other's coverage
            if (both_edge && d <= std::min(nodes_[i].coverage_m, nodes_[j].coverage_m)) {
                d2d_links_.push_back({nodes_[i].id, nodes_[j].id});
                adjacency_[i].push_back(nodes_[j].id);
                adjacency_[j].push_back(nodes_[i].id);
            }
        }
    }
    for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
    std::sort(d2d_links_.begin(), d2d_links_.end(),
              [](const D2dLink& x, const D2dLink& y) {
                  return x.a != y.a ? x.a < y.a : x.b < y.b;
              });
    link_delay_s_.assign(d2d_links_.size(), 0.0);
}

int Topology::index_of(int id) const {
    if (id < 0 || id >= static_cast<int>(id_to_index_.size()) || id_to_index_[id] < 0)
        throw std::out_of_range("unknown node id " + std::to_string(id));
    return id_to_index_[id];
}

bool Topology::has_node(int id) const {
    return id >= 0 && id < static_cast<int>(id_to_index_.size()) &&
           id_to_index_[id] >= 0;
}

const NodeSpec& Topology::node(int id) const { return nodes_[index_of(id)]; }

double Topology::distance_m(int a, int b) const {
    return dist_m_[index_of(a)][index_of(b)];
}

std::size_t Topology::degraded_link_count() const {
    std::size_t c = 0;
    for (double d : link_delay_s_)
        if (d > 0.0) ++c;
    return c;
}

Topology Topology::degraded(const DegradationRule& rule) const {
    if (rule.fraction < 0.0 || rule.fraction > 1.0)
        throw std::invalid_argument("degradation fraction must be in [0,1]");
    if (rule.delay_ms < 0.0)
        throw std::invalid_argument("degradation delay must be >= 0");
    Topology out = *this;
    const std::size_t n_links = d2d_links_.size();
    const std::size_t n_hit =
        static_cast<std::size_t>(std::ceil(rule.fraction * static_cast<double>(n_links)));
    std::vector<std::size_t> order(n_links);
    for (std::size_t i = 0; i < n_links; ++i) order[i] = i;
    Rng rng = Rng::sub(rule.seed, /*tag=*/0x6c696e6bULL);  // one-shot draw
    for (std::size_t i = n_links; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    for (std::size_t i = 0; i < n_hit && i < n_links; ++i)
        out.link_delay_s_[order[i]] += rule.delay_ms / 1000.0;
    return out;
}

double Topology::link_delay_s(int a, int b) const {
    if (a > b) std::swap(a, b);
    const D2dLink key{a, b};
    const auto it = std::lower_bound(
        d2d_links_.begin(), d2d_links_.end(), key,
        [](const D2dLink& x, const D2dLink& y) {
            return x.a != y.a ? x.a < y.a : x.b < y.b;
        });
    if (it == d2d_links_.end() || it->a != a || it->b != b)
        return kInf;  // not an in-coverage link at all
    return link_delay_s_[static_cast<std::size_t>(it - d2d_links_.begin())];
}

bool Topology::link_usable(int a, int b) const {
    return std::isfinite(link_delay_s(a, b));
}

std::vector<int> Topology::mesh_route(int src, int dst) const {
    const int si = index_of(src), di = index_of(dst);
    if (nodes_[si].kind == NodeKind::Cloud || nodes_[di].kind == NodeKind::Cloud)
        return {};
    if (src == dst) return {src};
    std::vector<int> prev(nodes_.size(), -2);  // -2 unvisited, else predecessor id
    std::deque<int> frontier{src};
    prev[static_cast<std::size_t>(si)] = -1;
    while (!frontier.empty()) {
        const int cur = frontier.front();
        frontier.pop_front();
        if (cur == dst) break;
        for (int nb : adjacency_[static_cast<std::size_t>(index_of(cur))]) {
            const int nbi = index_of(nb);
            if (prev[static_cast<std::size_t>(nbi)] != -2) continue;
            if (!link_usable(cur, nb)) continue;  // dead links drop out of routing
            prev[static_cast<std::size_t>(nbi)] = cur;
            frontier.push_back(nb);
        }
    }
    if (prev[static_cast<std::size_t>(di)] == -2) return {};
    std::vector<int> path;
    for (int at = dst; at != -1; at = prev[static_cast<std::size_t>(index_of(at))])
        path.push_back(at);
    std::reverse(path.begin(), path.end());
    return path;
}

double Topology::mesh_time_s(double payload_bits, int src, int dst) const {
    if (src == dst) return 0.0;
    const auto path = mesh_route(src, dst);
    if (path.size() < 2) return kInf;
    std::vector<double> rates, delays;
    rates.reserve(path.size() - 1);
    delays.reserve(path.size() - 1);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const NodeSpec& a = node(path[i]);
        const NodeSpec& b = node(path[i + 1]);
        rates.push_back(shannon_rate(link_.wireless, a.transmit_power_w,
                                     b.transmit_power_w, distance_m(a.id, b.id),
                                     link_.shannon_mode));
        delays.push_back(link_delay_s(a.id, b.id));
    }
    return mesh_transfer_time_s(payload_bits, rates, delays);
}

double Topology::backhaul_time_s(int src, int dst) const {
    if (!link_.backhaul_available) return kInf;
    if (src == dst) return 0.0;
    const auto leg = [this](int rmu) {
        return backhaul_rtt_s(distance_m(rmu, cloud_id_), link_.v_tran_mps,
                              link_.attenuation);
    };
    if (src == cloud_id_) return leg(dst);
    if (dst == cloud_id_) return leg(src);
    return leg(src) + leg(dst);  // edge-to-edge relayed through the cloud
}

double Topology::transfer_time_s(double payload_bits, int src, int dst) const {
    if (src == dst) return 0.0;
    return std::min(mesh_time_s(payload_bits, src, dst), backhaul_time_s(src, dst));
}

bool Topology::reachable(int src, int dst) const {
    return std::isfinite(transfer_time_s(0.0, src, dst));
}

std::optional<int> Topology::mesh_hops(int src, int dst) const {
    if (src == dst) return 0;
    if (src == cloud_id_ || dst == cloud_id_) return 0;  // wired endpoint
    const auto path = mesh_route(src, dst);
    if (path.size() < 2) return std::nullopt;
    return static_cast<int>(path.size()) - 1;
}

double Topology::dead_incident_fraction(int id) const {
    index_of(id);  // validate
    std::size_t incident = 0, dead = 0;
    for (std::size_t i = 0; i < d2d_links_.size(); ++i) {
        if (d2d_links_[i].a != id && d2d_links_[i].b != id) continue;
        ++incident;
        if (std::isinf(link_delay_s_[i])) ++dead;
    }
    if (incident == 0) return 0.0;
    return static_cast<double>(dead) / static_cast<double>(incident);
}

}  // namespace cesim
