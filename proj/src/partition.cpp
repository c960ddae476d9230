#include "cesim/partition.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace cesim {

const char* to_string(PartitionMode m) {
    switch (m) {
        case PartitionMode::Serial: return "serial";
        case PartitionMode::FullParallel: return "full_parallel";
        case PartitionMode::Greedy: return "greedy";
    }
    return "?";
}

PartitionMode partition_mode_from_string(const std::string& s) {
    if (s == "serial") return PartitionMode::Serial;
    if (s == "full_parallel") return PartitionMode::FullParallel;
    if (s == "greedy") return PartitionMode::Greedy;
    throw std::invalid_argument("unknown partition mode: " + s);
}

double profile_cosine(const ResourceProfile& a, const ResourceProfile& b) {
    const double av[3] = {a.cpu_gflops, a.memory_mb, a.needs_asic ? 1.0 : 0.0};
    const double bv[3] = {b.cpu_gflops, b.memory_mb, b.needs_asic ? 1.0 : 0.0};
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < 3; ++i) {
        dot += av[i] * bv[i];
        na += av[i] * av[i];
        nb += bv[i] * bv[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double affinity(const TaskGraph& g, int subtask_id,
                const std::vector<Pipeline>& state, int pipeline_id,
                double seeding_bonus) {
    const Pipeline* target = nullptr;
    for (const auto& p : state)
        if (p.id == pipeline_id) target = &p;
    if (!target) throw std::invalid_argument("affinity: unknown pipeline id");
    if (target->members.empty()) return seeding_bonus;

    double sim = 0.0;
    for (int m : target->members)
        sim += profile_cosine(g.subtask(subtask_id).profile, g.subtask(m).profile);

    bool others_populated = false;
    double dep = 0.0;
    for (const auto& p : state) {
        if (p.id == pipeline_id) continue;
        if (!p.members.empty()) others_populated = true;
        for (int m : p.members) {
            const auto hops = g.path_length(m, subtask_id);
            if (hops) dep += std::log(1.0 + static_cast<double>(*hops));
        }
    }
    if (!others_populated) dep = 1.0;  // nothing to couple against yet
    return sim * dep;
}

std::vector<Pipeline> partition_graph(const TaskGraph& g, const PartitionConfig& cfg) {
    std::vector<Pipeline> out;
    const auto topo = g.topological_order();
    switch (cfg.mode) {
        case PartitionMode::Serial: {
            out.push_back({0, topo});
            return out;
        }
        case PartitionMode::FullParallel: {
            int pid = 0;
            for (int id : topo) out.push_back({pid++, {id}});
            return out;
        }
        case PartitionMode::Greedy: {
            if (cfg.granularity < 1)
                throw std::invalid_argument("granularity must be >= 1");
            for (int p = 0; p < cfg.granularity; ++p) out.push_back({p, {}});
            for (int id : topo) {
                int best = 0;
                double best_score = -std::numeric_limits<double>::infinity();
                for (const auto& p : out) {
                    const double s = affinity(g, id, out, p.id, cfg.seeding_bonus);
                    if (s > best_score) {  // strict: ties keep the lowest id
                        best_score = s;
                        best = p.id;
                    }
                }
                out[static_cast<std::size_t>(best)].members.push_back(id);
            }
            return out;
        }
    }
    throw std::logic_error("unreachable partition mode");
}

PartitionReport validate_partition(const TaskGraph& g,
                                   const std::vector<Pipeline>& pipelines) {
    PartitionReport rep;
    std::vector<int> owner(static_cast<std::size_t>(g.size()), -1);
    std::vector<int> pos(static_cast<std::size_t>(g.size()), -1);
    bool dup = false;
    for (const auto& p : pipelines) {
        for (std::size_t i = 0; i < p.members.size(); ++i) {
            const int m = p.members[i];
            if (m < 0 || m >= g.size() || owner[static_cast<std::size_t>(m)] != -1) {
                dup = true;
                continue;
            }
            owner[static_cast<std::size_t>(m)] = p.id;
            pos[static_cast<std::size_t>(m)] = static_cast<int>(i);
        }
    }
    bool all = true;
    for (int o : owner) all = all && o != -1;
    rep.disjoint_cover = all && !dup;

    rep.order_consistent = rep.disjoint_cover;
    rep.cross_edges = 0;
    for (const auto& [u, v] : g.edges()) {
        const int ou = owner[static_cast<std::size_t>(u)];
        const int ov = owner[static_cast<std::size_t>(v)];
        if (ou == -1 || ov == -1) continue;
        if (ou != ov) {
            ++rep.cross_edges;
        } else if (pos[static_cast<std::size_t>(u)] >= pos[static_cast<std::size_t>(v)]) {
            rep.order_consistent = false;
        }
    }
    return rep;
}

std::string partition_to_json(const TaskGraph& g, const PartitionConfig& cfg,
                              const std::vector<Pipeline>& pipelines) {
    nlohmann::json j;
    j["mode"] = to_string(cfg.mode);
    j["granularity"] = cfg.granularity;
    j["subtasks"] = g.size();
    j["pipelines"] = nlohmann::json::array();
    for (const auto& p : pipelines) {
        nlohmann::json pj;
        pj["id"] = p.id;
        pj["members"] = p.members;
        j["pipelines"].push_back(pj);
    }
    const auto rep = validate_partition(g, pipelines);
    j["cross_edges"] = rep.cross_edges;
    return j.dump(2);
}

}  // namespace cesim
