#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cesim/consensus.hpp"
#include "cesim/geo.hpp"
#include "cesim/partition.hpp"
#include "cesim/ppo.hpp"
#include "cesim/sched.hpp"
#include "cesim/topology.hpp"
#include "cesim/workload.hpp"

namespace cesim {

// Scheduled fault injection: the node drops dead at `at_s` and, unless
// `recover_s` is negative, comes back empty-handed at `recover_s`.
struct CrashEvent {
    int node_id = 0;
    double at_s = 0.0;
    double recover_s = -1.0;  // < 0: stays down for the rest of the run
};

// Full description of one simulation run, minus the seed-dependent draws.
struct Scenario {
    std::string name = "scenario";

    std::vector<NodeSpec> nodes;
    LinkParams link;
    HaversineMode haversine_mode = HaversineMode::Canonical;
    std::optional<DegradationRule> degradation;

    WorkloadConfig workload;
    PartitionConfig partition;
    ConsensusConfig consensus;

    PolicyKind policy = PolicyKind::Eps;
    std::string checkpoint_path;  // PPO weights to load; empty = fresh init
    PpoConfig ppo;

    double horizon_s = 600.0;     // arrivals stop here
    double drain_limit_s = 120.0; // extra time to let in-flight work finish
    std::uint64_t seed = 1;
    double timeout_s = 10.0;
    bool timeout_enabled = true;
    double queue_overhead_ms = 5.0;  // fixed dispatch overhead per placement

    std::vector<CrashEvent> crashes;

    // Throws std::invalid_argument describing the first problem found.
    void validate() const;

    // Deterministic rendering of every field except `seed`, so runs of the
    // same setup under different seeds share one identity.
    std::string canonical_text() const;

    // FNV-1a (64-bit) over canonical_text(), rendered as 16 hex digits.
    std::string hash() const;
};

// 64-bit FNV-1a over arbitrary bytes.
std::uint64_t fnv1a64(const std::string& bytes);

// Parses the INI-style scenario format:
//   [section] headers, `key = value` pairs, `#`/`;` comments.
// `[node]` and `[crash]` sections may repeat. Throws std::invalid_argument
// with a line number on malformed input or unknown keys.
Scenario parse_scenario_text(const std::string& text);

// Reads the file and parses it; throws std::runtime_error if unreadable.
Scenario parse_scenario_file(const std::string& path);

}  // namespace cesim
