#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cesim/geo.hpp"

namespace cesim {

enum class NodeKind { Cloud, Rmu };

struct NodeSpec {
    int id = 0;
    NodeKind kind = NodeKind::Rmu;
    GeoPosition pos;
    double capacity_gflops = 1.0;
    int n_cores = 4;
    int concurrency_limit = 4;  // max co-running subtasks
    int queue_capacity = 8;     // waiting slots beyond the running set
    double coverage_m = 1000.0;
    double transmit_power_w = 1.0;
    double memory_mb = 4096.0;
    bool has_asic = false;
    double fixed_overhead_ms = 10.0;  // per-request fixed overhead booked at the origin
};

struct LinkParams {
    WirelessParams wireless;
    ShannonMode shannon_mode = ShannonMode::Physical;
    double v_tran_mps = 2e8;    // backhaul propagation speed
    double attenuation = 0.67;  // backhaul medium attenuation, in (0,1]
    bool backhaul_available = true;
    double control_payload_bits = 2048.0;  // size of heartbeat/vote messages
};

// Injects extra latency on a fraction of the D2D links; +inf delay means the
// link drops packets entirely. The affected set is drawn once per rule from
// the given seed and never changes during a run.
struct DegradationRule {
    double fraction = 0.0;  // in [0,1], rounded up to whole links
    double delay_ms = 0.0;  // may be +inf
    std::uint64_t seed = 0;
};

struct D2dLink {
    int a = 0;  // node ids, a < b
    int b = 0;
};

// Immutable snapshot of the physical network: node inventory, wireless
// parameters, in-coverage D2D adjacency between edge nodes, and the wired
// backhaul to the cloud. Degradation produces a derived copy.
class Topology {
public:
    Topology(std::vector<NodeSpec> nodes, LinkParams link,
             HaversineMode hmode = HaversineMode::Canonical);

    const std::vector<NodeSpec>& nodes() const { return nodes_; }
    const NodeSpec& node(int id) const;
    bool has_node(int id) const;
    int cloud_id() const { return cloud_id_; }
    const LinkParams& link() const { return link_; }
    HaversineMode haversine_mode() const { return hmode_; }

    double distance_m(int a, int b) const;

    // All in-coverage edge-to-edge links, ordered by (a, b).
    const std::vector<D2dLink>& d2d_links() const { return d2d_links_; }
    std::size_t degraded_link_count() const;

    // Derived copy with the rule applied. Affected links are the prefix of a
    // seeded shuffle of d2d_links(), so equal seeds give nested affected sets
    // across increasing fractions.
    Topology degraded(const DegradationRule& rule) const;

    // Extra delay injected on the (a,b) link, 0 if unaffected, +inf if dead.
    double link_delay_s(int a, int b) const;
    bool link_usable(int a, int b) const;

    // Hop-count-shortest usable mesh path (BFS, neighbors visited in
    // ascending id order, so ties resolve to the lowest-id route). Empty if
    // none exists. Cloud nodes never appear on mesh paths.
    std::vector<int> mesh_route(int src, int dst) const;

    // Store-and-forward time along mesh_route(); +inf without a usable path.
    double mesh_time_s(double payload_bits, int src, int dst) const;

    // Wired path time: RTT to the cloud, or two RTT legs relayed through the
    // cloud for edge-to-edge transfers; +inf when the backhaul is down.
    double backhaul_time_s(int src, int dst) const;

    // min(mesh, backhaul); 0 when src == dst; +inf when no route exists.
    double transfer_time_s(double payload_bits, int src, int dst) const;
    bool reachable(int src, int dst) const;

    // Wireless hops on the mesh route; 0 for wired/cloud endpoints or
    // colocated endpoints; nullopt when unreachable over the mesh.
    std::optional<int> mesh_hops(int src, int dst) const;

    // Fraction of a node's incident D2D links currently dead; input to the
    // scheduler's link-quality feature.
    double dead_incident_fraction(int id) const;

private:
    int index_of(int id) const;

    std::vector<NodeSpec> nodes_;
    LinkParams link_;
    HaversineMode hmode_;
    int cloud_id_ = -1;
    std::vector<std::vector<double>> dist_m_;      // dense, by node index
    std::vector<D2dLink> d2d_links_;
    std::vector<double> link_delay_s_;             // parallel to d2d_links_
    std::vector<std::vector<int>> adjacency_;      // node index -> sorted neighbor ids
    std::vector<int> id_to_index_;                 // sparse id -> dense index (-1 = absent)
};

}  // namespace cesim
