#pragma once

#include <string>
#include <vector>

#include "cesim/workload.hpp"

namespace cesim {

struct Pipeline {
    int id = 0;
    std::vector<int> members;  // subtask ids, topological order within the pipeline
};

enum class PartitionMode { Serial, FullParallel, Greedy };

const char* to_string(PartitionMode m);
PartitionMode partition_mode_from_string(const std::string& s);

struct PartitionConfig {
    PartitionMode mode = PartitionMode::Greedy;
    int granularity = 3;        // pipeline count for the greedy mode
    double seeding_bonus = 0.5; // affinity granted by a still-empty pipeline
};

// Cosine similarity between resource demand vectors (cpu, mem, asic flag);
// 0 when either vector is all-zero.
double profile_cosine(const ResourceProfile& a, const ResourceProfile& b);

// Attraction of a subtask to one pipeline given the partial assignment so
// far: resource similarity to the pipeline's current members, weighted by
// the logarithmic dependency distance from every member of every *other*
// pipeline into this subtask. Absent dependency paths contribute nothing;
// if no other pipeline has members yet the weight collapses to 1; an empty
// candidate pipeline is worth the seeding bonus.
double affinity(const TaskGraph& g, int subtask_id,
                const std::vector<Pipeline>& state, int pipeline_id,
                double seeding_bonus);

// Split a task graph into pipelines. Serial: one pipeline holding the whole
// topological order. FullParallel: one singleton pipeline per subtask.
// Greedy: walk the topological order and append each subtask to the
// highest-affinity pipeline (lowest pipeline id wins ties).
std::vector<Pipeline> partition_graph(const TaskGraph& g, const PartitionConfig& cfg);

struct PartitionReport {
    bool disjoint_cover = false;    // every subtask in exactly one pipeline
    bool order_consistent = false;  // intra-pipeline edges respect member order
    int cross_edges = 0;            // edges spanning two pipelines (context-exchange load)
};

PartitionReport validate_partition(const TaskGraph& g,
                                   const std::vector<Pipeline>& pipelines);

// JSON dump of a partition, stable key order.
std::string partition_to_json(const TaskGraph& g, const PartitionConfig& cfg,
                              const std::vector<Pipeline>& pipelines);

}  // namespace cesim
