#include "cesim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "cesim/metrics.hpp"  // format_double

namespace cesim {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail_at(int line, const std::string& what) {
    throw std::invalid_argument("scenario line " + std::to_string(line) + ": " + what);
}

double parse_num(const std::string& v, int line) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) fail_at(line, "trailing junk in number '" + v + "'");
        return x;
    } catch (const std::invalid_argument&) {
        fail_at(line, "expected a number, got '" + v + "'");
    } catch (const std::out_of_range&) {
        fail_at(line, "number out of range: '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        std::int64_t x = std::stoll(v, &used);
        if (used != v.size()) fail_at(line, "trailing junk in integer '" + v + "'");
        return x;
    } catch (const std::invalid_argument&) {
        fail_at(line, "expected an integer, got '" + v + "'");
    } catch (const std::out_of_range&) {
        fail_at(line, "integer out of range: '" + v + "'");
    }
}

bool parse_bool(const std::string& v, int line) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    fail_at(line, "expected a boolean, got '" + v + "'");
}

// Per-section key handlers. Each returns false if the key is unknown.

bool apply_sim(Scenario& sc, const std::string& k, const std::string& v, int ln) {
    if (k == "name") sc.name = v;
    else if (k == "horizon_s") sc.horizon_s = parse_num(v, ln);
    else if (k == "drain_limit_s") sc.drain_limit_s = parse_num(v, ln);
    else if (k == "seed") sc.seed = static_cast<std::uint64_t>(parse_int(v, ln));
    else if (k == "timeout_s") sc.timeout_s = parse_num(v, ln);
    else if (k == "timeout_enabled") sc.timeout_enabled = parse_bool(v, ln);
    else if (k == "queue_overhead_ms") sc.queue_overhead_ms = parse_num(v, ln);
    else if (k == "haversine") {
        if (v == "canonical") sc.haversine_mode = HaversineMode::Canonical;
        else if (v == "literal") sc.haversine_mode = HaversineMode::Literal;
        else fail_at(ln, "haversine must be canonical|literal");
    } else return false;
    return true;
}

bool apply_link(Scenario& sc, const std::string& k, const std::string& v, int ln) {
    LinkParams& l = sc.link;
    if (k == "bandwidth_bps") l.wireless.bandwidth_bps = parse_num(v, ln);
    else if (k == "noise") l.wireless.noise_w = parse_num(v, ln);
    else if (k == "path_loss_exp") l.wireless.path_loss_exp = parse_num(v, ln);
    else if (k == "min_distance_m") l.wireless.min_distance_m = parse_num(v, ln);
    else if (k == "v_tran") l.v_tran_mps = parse_num(v, ln);
    else if (k == "attenuation") l.attenuation = parse_num(v, ln);
    else if (k == "backhaul") l.backhaul_available = parse_bool(v, ln);
    else if (k == "control_payload_bits") l.control_payload_bits = parse_num(v, ln);
    else if (k == "shannon") {
        if (v == "physical") l.shannon_mode = ShannonMode::Physical;
        else if (v == "literal") l.shannon_mode = ShannonMode::Literal;
        else fail_at(ln, "shannon must be physical|literal");
    } else return false;
    return true;
}

bool apply_node(NodeSpec& n, const std::string& k, const std::string& v, int ln) {
    if (k == "id") n.id = static_cast<int>(parse_int(v, ln));
    else if (k == "kind") {
        if (v == "cloud") n.kind = NodeKind::Cloud;
        else if (v == "rmu") n.kind = NodeKind::Rmu;
        else fail_at(ln, "kind must be cloud|rmu");
    }
    else if (k == "lat") n.pos.lat_deg = parse_num(v, ln);
    else if (k == "lon") n.pos.lon_deg = parse_num(v, ln);
    else if (k == "capacity_gflops") n.capacity_gflops = parse_num(v, ln);
    else if (k == "cores") n.n_cores = static_cast<int>(parse_int(v, ln));
    else if (k == "concurrency") n.concurrency_limit = static_cast<int>(parse_int(v, ln));
    else if (k == "queue") n.queue_capacity = static_cast<int>(parse_int(v, ln));
    else if (k == "coverage_m") n.coverage_m = parse_num(v, ln);
    else if (k == "power_w") n.transmit_power_w = parse_num(v, ln);
    else if (k == "memory_mb") n.memory_mb = parse_num(v, ln);
    else if (k == "asic") n.has_asic = parse_bool(v, ln);
    else if (k == "overhead_ms") n.fixed_overhead_ms = parse_num(v, ln);
    else return false;
    return true;
}

bool apply_workload(Scenario& sc, const std::string& k, const std::string& v, int ln) {
    WorkloadConfig& w = sc.workload;
    if (k == "mode") {
        if (v == "template") w.template_mode = true;
        else if (v == "random") w.template_mode = false;
        else fail_at(ln, "mode must be template|random");
    }
    else if (k == "request_rate_hz") w.request_rate_hz = parse_num(v, ln);
    else if (k == "arrivals") {
        if (v == "poisson") w.arrivals = ArrivalProcess::Poisson;
        else if (v == "turnout") w.arrivals = ArrivalProcess::Turnout;
        else fail_at(ln, "arrivals must be poisson|turnout");
    }
    else if (k == "turnout_count") w.turnout_count = static_cast<int>(parse_int(v, ln));
    else if (k == "turnout_min_s") w.turnout_interval_min_s = parse_num(v, ln);
    else if (k == "turnout_max_s") w.turnout_interval_max_s = parse_num(v, ln);
    else if (k == "n_subtasks_min") w.n_subtasks_min = static_cast<int>(parse_int(v, ln));
    else if (k == "n_subtasks_max") w.n_subtasks_max = static_cast<int>(parse_int(v, ln));
    else if (k == "dep_probability") w.dep_probability = parse_num(v, ln);
    else if (k == "zipf_s") w.zipf_s = parse_num(v, ln);
    else if (k == "flops_min") w.flops_min = parse_num(v, ln);
    else if (k == "flops_max") w.flops_max = parse_num(v, ln);
    else if (k == "payload_bits") w.payload_bits = parse_num(v, ln);
    else if (k == "memory_mb") w.memory_mb = parse_num(v, ln);
    else if (k == "template_scale") {
        const double s = parse_num(v, ln);
        if (s <= 0) fail_at(ln, "template_scale must be positive");
        for (double& g : w.template_gflop) g *= s;
    }
    else return false;
    return true;
}

bool apply_partition(Scenario& sc, const std::string& k, const std::string& v, int ln) {
    PartitionConfig& p = sc.partition;
    if (k == "mode") p.mode = partition_mode_from_string(v);
    else if (k == "granularity") p.granularity = static_cast<int>(parse_int(v, ln));
    else if (k == "seeding_bonus") p.seeding_bonus = parse_num(v, ln);
    else return false;
    return true;
}

bool apply_consensus(Scenario& sc, const std::string& k, const std::string& v, int ln) {
    ConsensusConfig& c = sc.consensus;
    if (k == "heartbeat_interval_ms") c.heartbeat_interval_ms = parse_num(v, ln);
    else if (k == "heartbeat_timeout_ms") c.heartbeat_timeout_ms = parse_num(v, ln);
    else if (k == "candidate_wait_min_ms") c.candidate_wait_min_ms = parse_num(v, ln);
    else if (k == "candidate_wait_max_ms") c.candidate_wait_max_ms = parse_num(v, ln);
    else if (k == "vote_window_ms") c.vote_window_ms = parse_num(v, ln);
    else return false;
    return true;
}

bool apply_policy(Scenario& sc, const std::string& k, const std::string& v, int) {
    if (k == "kind") sc.policy = policy_kind_from_string(v);
    else if (k == "checkpoint") sc.checkpoint_path = v;
    else return false;
    return true;
}

bool apply_ppo(Scenario& sc, const std::string& k, const std::string& v, int ln) {
    PpoConfig& p = sc.ppo;
    if (k == "hidden") p.hidden = static_cast<int>(parse_int(v, ln));
    else if (k == "learning_rate") p.learning_rate = parse_num(v, ln);
    else if (k == "batch_size") p.batch_size = static_cast<int>(parse_int(v, ln));
    else if (k == "discount") p.discount = parse_num(v, ln);
    else if (k == "clip_eps") p.clip_eps = parse_num(v, ln);
    else if (k == "kl_beta") p.kl_beta = parse_num(v, ln);
    else if (k == "entropy_coef") p.entropy_coef = parse_num(v, ln);
    else if (k == "value_coef") p.value_coef = parse_num(v, ln);
    else if (k == "minibatches") p.minibatch_count = static_cast<int>(parse_int(v, ln));
    else if (k == "max_episode_iters") p.max_episode_iters = static_cast<int>(parse_int(v, ln));
    else if (k == "max_consecutive_violations")
        p.max_consecutive_violations = static_cast<int>(parse_int(v, ln));
    else if (k == "mu_exec") p.mu_exec = parse_num(v, ln);
    else if (k == "mu_trans") p.mu_trans = parse_num(v, ln);
    else if (k == "reward") p.reward_mode = reward_mode_from_string(v);
    else if (k == "init_seed") p.init_seed = static_cast<std::uint64_t>(parse_int(v, ln));
    else return false;
    return true;
}

bool apply_degradation(DegradationRule& d, const std::string& k,
                       const std::string& v, int ln) {
    if (k == "fraction") d.fraction = parse_num(v, ln);
    else if (k == "delay_ms") d.delay_ms = parse_num(v, ln);
    else if (k == "seed") d.seed = static_cast<std::uint64_t>(parse_int(v, ln));
    else return false;
    return true;
}

bool apply_crash(CrashEvent& c, const std::string& k, const std::string& v, int ln) {
    if (k == "node") c.node_id = static_cast<int>(parse_int(v, ln));
    else if (k == "at_s") c.at_s = parse_num(v, ln);
    else if (k == "recover_s") c.recover_s = parse_num(v, ln);
    else return false;
    return true;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("scenario: " + what);
}

std::string fd(double x) { return format_double(x); }

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    bool saw_degradation = false;
    DegradationRule degr;

    while (std::getline(in, raw)) {
        ++line;
        std::size_t cut = raw.find_first_of("#;");
        if (cut != std::string::npos) raw.resize(cut);
        std::string s = trim(raw);
        if (s.empty()) continue;

        if (s.front() == '[') {
            if (s.back() != ']') fail_at(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section == "node") sc.nodes.emplace_back();
            else if (section == "crash") sc.crashes.emplace_back();
            else if (section == "degradation") saw_degradation = true;
            else if (section != "sim" && section != "link" && section != "workload" &&
                     section != "partition" && section != "consensus" &&
                     section != "policy" && section != "ppo")
                fail_at(line, "unknown section [" + section + "]");
            continue;
        }

        std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail_at(line, "expected key = value");
        std::string k = trim(s.substr(0, eq));
        std::string v = trim(s.substr(eq + 1));
        if (k.empty()) fail_at(line, "empty key");
        if (section.empty()) fail_at(line, "key before any [section]");

        bool known = false;
        if (section == "sim") known = apply_sim(sc, k, v, line);
        else if (section == "link") known = apply_link(sc, k, v, line);
        else if (section == "node") known = apply_node(sc.nodes.back(), k, v, line);
        else if (section == "workload") known = apply_workload(sc, k, v, line);
        else if (section == "partition") known = apply_partition(sc, k, v, line);
        else if (section == "consensus") known = apply_consensus(sc, k, v, line);
        else if (section == "policy") known = apply_policy(sc, k, v, line);
        else if (section == "ppo") known = apply_ppo(sc, k, v, line);
        else if (section == "degradation") known = apply_degradation(degr, k, v, line);
        else if (section == "crash") known = apply_crash(sc.crashes.back(), k, v, line);
        if (!known) fail_at(line, "unknown key '" + k + "' in [" + section + "]");
    }

    if (saw_degradation) sc.degradation = degr;
    sc.validate();
    return sc;
}

Scenario parse_scenario_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_scenario_text(buf.str());
}

void Scenario::validate() const {
    require(!nodes.empty(), "at least one node is required");
    // Topology construction re-checks node invariants (ids, one cloud, ranges).
    Topology topo(nodes, link, haversine_mode);

    require(horizon_s > 0, "horizon_s must be positive");
    require(drain_limit_s >= 0, "drain_limit_s must be non-negative");
    require(timeout_s > 0, "timeout_s must be positive");
    require(queue_overhead_ms >= 0, "queue_overhead_ms must be non-negative");

    const WorkloadConfig& w = workload;
    if (w.arrivals == ArrivalProcess::Poisson)
        require(w.request_rate_hz > 0, "request_rate_hz must be positive");
    else {
        require(w.turnout_count > 0, "turnout_count must be positive");
        require(w.turnout_interval_min_s > 0 &&
                    w.turnout_interval_max_s >= w.turnout_interval_min_s,
                "turnout interval range is invalid");
    }
    if (!w.template_mode) {
        require(w.n_subtasks_min >= 1 && w.n_subtasks_max >= w.n_subtasks_min,
                "subtask count range is invalid");
        require(w.dep_probability >= 0 && w.dep_probability <= 1,
                "dep_probability must be in [0,1]");
        require(w.zipf_s > 0, "zipf_s must be positive");
        require(w.flops_min > 0 && w.flops_max >= w.flops_min,
                "flops range is invalid");
    }
    require(w.payload_bits >= 0, "payload_bits must be non-negative");
    require(w.memory_mb > 0, "workload memory_mb must be positive");

    require(partition.granularity >= 1, "partition granularity must be >= 1");

    const ConsensusConfig& c = consensus;
    require(c.heartbeat_interval_ms > 0 && c.heartbeat_timeout_ms > c.heartbeat_interval_ms,
            "heartbeat timeout must exceed the interval");
    require(c.candidate_wait_min_ms > 0 &&
                c.candidate_wait_max_ms >= c.candidate_wait_min_ms,
            "candidate wait range is invalid");
    require(c.vote_window_ms > 0, "vote_window_ms must be positive");

    if (policy == PolicyKind::Ppo) {
        require(ppo.hidden >= 1, "ppo hidden width must be >= 1");
        require(ppo.batch_size >= 1 && ppo.minibatch_count >= 1,
                "ppo batch configuration is invalid");
        require(ppo.discount > 0 && ppo.discount <= 1, "ppo discount must be in (0,1]");
        require(ppo.clip_eps > 0, "ppo clip_eps must be positive");
        require(ppo.mu_exec >= 0 && ppo.mu_trans >= 0, "ppo reward weights must be >= 0");
    }

    if (degradation) {
        require(degradation->fraction >= 0 && degradation->fraction <= 1,
                "degradation fraction must be in [0,1]");
        require(degradation->delay_ms >= 0, "degradation delay must be >= 0 (or inf)");
    }

    for (const CrashEvent& ce : crashes) {
        require(topo.has_node(ce.node_id),
                "crash refers to unknown node " + std::to_string(ce.node_id));
        require(ce.at_s >= 0, "crash at_s must be non-negative");
        if (ce.recover_s >= 0)
            require(ce.recover_s > ce.at_s, "crash recover_s must be after at_s");
    }
}

std::string Scenario::canonical_text() const {
    std::ostringstream o;
    o << "name=" << name << '\n'
      << "horizon_s=" << fd(horizon_s) << '\n'
      << "drain_limit_s=" << fd(drain_limit_s) << '\n'
      << "timeout_s=" << fd(timeout_s) << '\n'
      << "timeout_enabled=" << (timeout_enabled ? 1 : 0) << '\n'
      << "queue_overhead_ms=" << fd(queue_overhead_ms) << '\n'
      << "haversine=" << (haversine_mode == HaversineMode::Canonical ? "canonical" : "literal")
      << '\n';

    o << "link=" << fd(link.wireless.bandwidth_bps) << ',' << fd(link.wireless.noise_w)
      << ',' << fd(link.wireless.path_loss_exp) << ',' << fd(link.wireless.min_distance_m)
      << ',' << fd(link.v_tran_mps) << ',' << fd(link.attenuation) << ','
      << (link.shannon_mode == ShannonMode::Physical ? "physical" : "literal") << ','
      << (link.backhaul_available ? 1 : 0) << ',' << fd(link.control_payload_bits) << '\n';

    for (const NodeSpec& n : nodes) {
        o << "node=" << n.id << ',' << (n.kind == NodeKind::Cloud ? "cloud" : "rmu")
          << ',' << fd(n.pos.lat_deg) << ',' << fd(n.pos.lon_deg) << ','
          << fd(n.capacity_gflops) << ',' << n.n_cores << ',' << n.concurrency_limit
          << ',' << n.queue_capacity << ',' << fd(n.coverage_m) << ','
          << fd(n.transmit_power_w) << ',' << fd(n.memory_mb) << ','
          << (n.has_asic ? 1 : 0) << ',' << fd(n.fixed_overhead_ms) << '\n';
    }

    const WorkloadConfig& w = workload;
    o << "workload=" << (w.template_mode ? "template" : "random") << ','
      << (w.arrivals == ArrivalProcess::Poisson ? "poisson" : "turnout") << ','
      << fd(w.request_rate_hz) << ',' << w.turnout_count << ','
      << fd(w.turnout_interval_min_s) << ',' << fd(w.turnout_interval_max_s) << ','
      << w.n_subtasks_min << ',' << w.n_subtasks_max << ',' << fd(w.dep_probability)
      << ',' << fd(w.zipf_s) << ',' << fd(w.flops_min) << ',' << fd(w.flops_max) << ','
      << fd(w.payload_bits) << ',' << fd(w.memory_mb);
    for (double g : w.template_gflop) o << ',' << fd(g);
    o << '\n';

    o << "partition=" << to_string(partition.mode) << ',' << partition.granularity
      << ',' << fd(partition.seeding_bonus) << '\n';

    const ConsensusConfig& c = consensus;
    o << "consensus=" << fd(c.heartbeat_interval_ms) << ',' << fd(c.heartbeat_timeout_ms)
      << ',' << fd(c.candidate_wait_min_ms) << ',' << fd(c.candidate_wait_max_ms) << ','
      << fd(c.vote_window_ms) << '\n';

    o << "policy=" << to_string(policy);
    if (!checkpoint_path.empty()) o << ',' << checkpoint_path;
    o << '\n';

    if (policy == PolicyKind::Ppo) {
        const PpoConfig& p = ppo;
        o << "ppo=" << p.hidden << ',' << fd(p.learning_rate) << ',' << p.batch_size
          << ',' << fd(p.discount) << ',' << fd(p.clip_eps) << ',' << fd(p.kl_beta)
          << ',' << fd(p.entropy_coef) << ',' << fd(p.value_coef) << ','
          << p.minibatch_count << ',' << p.max_episode_iters << ','
          << p.max_consecutive_violations << ',' << fd(p.mu_exec) << ','
          << fd(p.mu_trans) << ',' << to_string(p.reward_mode) << ',' << p.init_seed
          << '\n';
    }

    if (degradation) {
        o << "degradation=" << fd(degradation->fraction) << ',' << fd(degradation->delay_ms)
          << ',' << degradation->seed << '\n';
    }
    for (const CrashEvent& ce : crashes) {
        o << "crash=" << ce.node_id << ',' << fd(ce.at_s) << ',' << fd(ce.recover_s)
          << '\n';
    }
    return o.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string Scenario::hash() const {
    std::uint64_t h = fnv1a64(canonical_text());
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xF];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

}  // namespace cesim
