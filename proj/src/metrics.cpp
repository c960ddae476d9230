#include "cesim/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cesim {

const char* violation_name(int code) {
    switch (code) {
        case kViolationNone: return "none";
        case kViolationDeadline: return "deadline";
        case kViolationResources: return "resources";
        case kViolationReachability: return "reachability";
        case kViolationOrdering: return "ordering";
    }
    return "?";
}

double weighted_load_std(const std::vector<double>& values,
                         const std::vector<double>& weights) {
    if (values.size() != weights.size())
        throw std::invalid_argument("values/weights size mismatch");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("weights must be >= 0");
        wsum += w;
    }
    if (wsum <= 0.0) throw std::invalid_argument("weights sum to zero");
    double mean = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) mean += weights[i] * values[i];
    mean /= wsum;
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        acc += weights[i] * (values[i] - mean) * (values[i] - mean);
    return std::sqrt(acc / wsum);
}

double utilization_pct(const std::vector<WorkerLoad>& loads) {
    double busy = 0.0, avail = 0.0;
    for (const auto& l : loads) {
        busy += l.capacity_gflops * l.busy_ms;
        avail += l.capacity_gflops * l.up_ms;
    }
    if (avail <= 0.0) return 0.0;
    return 100.0 * busy / avail;
}

SummaryReport summarize(const std::vector<CompletionRecord>& records,
                        const std::vector<WorkerLoad>& loads) {
    SummaryReport s;
    s.n_tasks = records.size();
    double comp = 0.0, trans = 0.0, total = 0.0;
    for (const auto& r : records) {
        const double reassembled =
            r.overhead_ms + r.t_queue_ms + r.t_comp_ms + r.t_idle_ms + r.t_trans_ms;
        if (std::abs(reassembled - r.t_total_ms) > 1e-6)
            throw std::logic_error("record total does not reassemble from parts");
        if (r.violated_constraint < 0 || r.violated_constraint > 4)
            throw std::logic_error("unknown violation code");
        ++s.violations[r.violated_constraint];
        if (r.success) {
            ++s.n_success;
            comp += r.t_total_ms - r.t_trans_ms;
            trans += r.t_trans_ms;
            total += r.t_total_ms;
        }
    }
    if (s.n_tasks > 0)
        s.success_rate = static_cast<double>(s.n_success) / static_cast<double>(s.n_tasks);
    if (s.n_success > 0) {
        const double n = static_cast<double>(s.n_success);
        s.avg_comp_ms = comp / n;
        s.avg_trans_ms = trans / n;
        s.avg_total_ms = total / n;
    }
    std::vector<double> busy, weight;
    for (const auto& l : loads) {
        busy.push_back(l.busy_ms);
        weight.push_back(l.capacity_gflops);
    }
    if (!loads.empty()) {
        s.load_std = weighted_load_std(busy, weight);
        s.utilization = utilization_pct(loads);
    }
    return s;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string records_to_csv(const std::vector<CompletionRecord>& records) {
    std::string out =
        "task_id,t_queue_ms,t_comp_ms,t_idle_ms,t_trans_ms,t_total_ms,success,violation\n";
    for (const auto& r : records) {
        out += std::to_string(r.task_id);
        out += ',';
        out += format_double(r.t_queue_ms);
        out += ',';
        out += format_double(r.t_comp_ms);
        out += ',';
        out += format_double(r.t_idle_ms);
        out += ',';
        out += format_double(r.t_trans_ms);
        out += ',';
        out += format_double(r.t_total_ms);
        out += ',';
        out += r.success ? '1' : '0';
        out += ',';
        out += violation_name(r.violated_constraint);
        out += '\n';
    }
    return out;
}

std::string summary_to_json(const SummaryReport& s) {
    nlohmann::json j;
    j["scenario"] = s.scenario;
    j["policy"] = s.policy;
    j["seed"] = s.seed;
    j["scenario_hash"] = s.scenario_hash;
    j["mode_flags"] = s.mode_flags;
    j["n_tasks"] = s.n_tasks;
    j["n_success"] = s.n_success;
    j["success_rate"] = s.success_rate;
    j["avg_comp_ms"] = s.avg_comp_ms ? nlohmann::json(*s.avg_comp_ms) : nlohmann::json();
    j["avg_trans_ms"] = s.avg_trans_ms ? nlohmann::json(*s.avg_trans_ms) : nlohmann::json();
    j["avg_total_ms"] = s.avg_total_ms ? nlohmann::json(*s.avg_total_ms) : nlohmann::json();
    j["load_std"] = s.load_std;
    j["utilization_pct"] = s.utilization;
    nlohmann::json v;
    for (int c = 0; c <= 4; ++c) v[violation_name(c)] = s.violations[c];
    j["violations"] = v;
    return j.dump(2);
}

SummaryReport summary_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    SummaryReport s;
    s.scenario = j.at("scenario").get<std::string>();
    s.policy = j.at("policy").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.scenario_hash = j.at("scenario_hash").get<std::string>();
    for (const auto& [k, v] : j.at("mode_flags").items())
        s.mode_flags[k] = v.get<std::string>();
    s.n_tasks = j.at("n_tasks").get<std::uint64_t>();
    s.n_success = j.at("n_success").get<std::uint64_t>();
    s.success_rate = j.at("success_rate").get<double>();
    if (!j.at("avg_comp_ms").is_null()) s.avg_comp_ms = j.at("avg_comp_ms").get<double>();
    if (!j.at("avg_trans_ms").is_null()) s.avg_trans_ms = j.at("avg_trans_ms").get<double>();
    if (!j.at("avg_total_ms").is_null()) s.avg_total_ms = j.at("avg_total_ms").get<double>();
    s.load_std = j.at("load_std").get<double>();
    s.utilization = j.at("utilization_pct").get<double>();
    for (int c = 0; c <= 4; ++c)
        s.violations[c] = j.at("violations").at(violation_name(c)).get<std::uint64_t>();
    return s;
}

std::string summary_csv_header() {
    return "scenario,policy,seed,scenario_hash,n_tasks,n_success,success_rate,"
           "avg_comp_ms,avg_trans_ms,avg_total_ms,load_std,utilization_pct\n";
}

std::string summary_to_csv_row(const SummaryReport& s) {
    std::string out;
    out += s.scenario;
    out += ',';
    out += s.policy;
    out += ',';
    out += std::to_string(s.seed);
    out += ',';
    out += s.scenario_hash;
    out += ',';
    out += std::to_string(s.n_tasks);
    out += ',';
    out += std::to_string(s.n_success);
    out += ',';
    out += format_double(s.success_rate);
    out += ',';
    out += s.avg_comp_ms ? format_double(*s.avg_comp_ms) : "";  // empty = no successes
    out += ',';
    out += s.avg_trans_ms ? format_double(*s.avg_trans_ms) : "";
    out += ',';
    out += s.avg_total_ms ? format_double(*s.avg_total_ms) : "";
    out += ',';
    out += format_double(s.load_std);
    out += ',';
    out += format_double(s.utilization);
    out += '\n';
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cesim
