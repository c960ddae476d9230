#include "cesim/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cesim {

const char* to_string(RewardMode m) {
    return m == RewardMode::Corrected ? "corrected" : "literal";
}

RewardMode reward_mode_from_string(const std::string& s) {
    if (s == "corrected") return RewardMode::Corrected;
    if (s == "literal") return RewardMode::Literal;
    throw std::invalid_argument("unknown reward mode: " + s);
}

double reward_value(double t_exec_ms, double t_trans_ms, double timeout_ms,
                    double success_rate, double mu_exec, double mu_trans,
                    RewardMode mode) {
    if (timeout_ms <= 0.0) throw std::invalid_argument("timeout must be > 0");
    const double x = (mu_exec * t_exec_ms + mu_trans * t_trans_ms) / timeout_ms;
    if (mode == RewardMode::Corrected) {
        const double sigma = std::clamp(success_rate, 1e-6, 1.0);
        return -x * (1.0 - std::log(sigma));
    }
    const double sigma = std::clamp(success_rate, 1e-6, 1.0 - 1e-6);
    return -x / std::log(sigma);
}

std::array<double, 2> softmax2(const std::array<double, 2>& logits) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    const double z = e0 + e1;
    return {e0 / z, e1 / z};
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       const std::vector<bool>& done,
                                       double discount) {
    if (rewards.size() != done.size())
        throw std::invalid_argument("rewards/done size mismatch");
    std::vector<double> g(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        if (done[i]) acc = 0.0;
        acc = rewards[i] + discount * acc;
        g[i] = acc;
    }
    return g;
}

void normalize_advantages(std::vector<double>& advantages) {
    if (advantages.empty()) return;
    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= static_cast<double>(advantages.size());
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(advantages.size());
    const double sd = std::sqrt(var);
    for (double& a : advantages) a = (a - mean) / (sd + 1e-8);
}

namespace {

std::array<double, 2> probs_from(const Mlp& net, const std::vector<double>& x,
                                 Mlp::Trace* trace = nullptr) {
    Mlp::Trace local;
    const auto logits = net.forward(x, trace ? *trace : local);
    if (!std::isfinite(logits[0]) || !std::isfinite(logits[1]))
        throw std::runtime_error("policy diverged: non-finite logits");
    return softmax2({logits[0], logits[1]});
}

}  // namespace

PpoTerms ppo_batch_terms(const Mlp& actor, const Mlp& actor_old, const Mlp& critic,
                         const std::vector<PpoSample>& batch, const PpoConfig& cfg,
                         std::vector<double>* actor_grad,
                         std::vector<double>* critic_grad) {
    if (batch.empty()) throw std::invalid_argument("empty ppo batch");
    if (actor_grad && actor_grad->size() != actor.n_params())
        throw std::invalid_argument("actor grad size mismatch");
    if (critic_grad && critic_grad->size() != critic.n_params())
        throw std::invalid_argument("critic grad size mismatch");
    PpoTerms terms;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        Mlp::Trace atr, ctr;
        const auto p_new = probs_from(actor, s.x, &atr);
        const auto p_old = probs_from(actor_old, s.x);
        const double logp_new = std::log(p_new[static_cast<std::size_t>(s.action)]);
        const double ratio = std::exp(logp_new - s.logp_old);

        const double u_plain = ratio * s.adv;
        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double u_clip = clipped_ratio * s.adv;
        terms.surrogate += inv_n * std::min(u_plain, u_clip);

        double kl = 0.0;
        for (int a = 0; a < 2; ++a)
            kl += p_old[static_cast<std::size_t>(a)] *
                  (std::log(p_old[static_cast<std::size_t>(a)]) -
                   std::log(p_new[static_cast<std::size_t>(a)]));
        terms.kl += inv_n * kl;

        double ent = 0.0;
        for (int a = 0; a < 2; ++a)
            ent -= p_new[static_cast<std::size_t>(a)] *
                   std::log(p_new[static_cast<std::size_t>(a)]);
        terms.entropy += inv_n * ent;

        const auto v_out = critic.forward(s.x, ctr);
        const double v_err = v_out[0] - s.ret;
        terms.value_mse += inv_n * v_err * v_err;

        if (actor_grad) {
            // d(-J)/d(logits). Surrogate flows through the ratio unless the
            // clipped branch is strictly smaller with clipping engaged
            // (derivative 0 on the flat part).
            std::array<double, 2> d_logits{0.0, 0.0};
            const bool plain_active = u_plain <= u_clip;
            const bool clip_flat = clipped_ratio != ratio;
            double dsur_dratio = 0.0;
            if (plain_active)
                dsur_dratio = s.adv;
            else if (!clip_flat)
                dsur_dratio = s.adv;
            // dratio/dlogit_j = ratio * (delta_aj - p_new_j)
            for (int j = 0; j < 2; ++j) {
                const double dlogp =
                    (j == s.action ? 1.0 : 0.0) - p_new[static_cast<std::size_t>(j)];
                double g = dsur_dratio * ratio * dlogp;             // surrogate
                g -= cfg.kl_beta * (p_new[static_cast<std::size_t>(j)] -
                                    p_old[static_cast<std::size_t>(j)]);  // -beta*KL
                g += cfg.entropy_coef *
                     (-p_new[static_cast<std::size_t>(j)] *
                      (std::log(p_new[static_cast<std::size_t>(j)]) + ent));  // entropy
                d_logits[static_cast<std::size_t>(j)] = -inv_n * g;  // loss = -J
            }
            actor.backward(atr, {d_logits[0], d_logits[1]}, *actor_grad);
        }
        if (critic_grad) {
            // loss contribution: value_coef * (v - G)^2 / n
            critic.backward(ctr, {inv_n * cfg.value_coef * 2.0 * v_err}, *critic_grad);
        }
    }
    terms.objective = terms.surrogate - cfg.kl_beta * terms.kl +
                      cfg.entropy_coef * terms.entropy -
                      cfg.value_coef * terms.value_mse;
    return terms;
}

const std::array<double, StateVector::kDim>& PolicyNetwork::input_scale() {
    // brings each feature to O(1) for typical scenarios; see StateVector docs
    static const std::array<double, StateVector::kDim> k = {
        0.1,      // priority compensation, exp(wait), usually in [1, e^2]
        1.0,      // cpu demand, already normalized
        1.0,      // mem demand, already normalized
        0.125,    // predecessor count
        0.125,    // remaining depth
        0.125,    // mesh hops
        1.0,      // utilization in [0,1]
        1.0,      // asic flag
        1.25e-4,  // link quality, ~ln(1+3e8)/loss^2 <= ~8000
    };
    return k;
}

PolicyNetwork::PolicyNetwork(const PpoConfig& cfg)
    : cfg_(cfg),
      actor_({StateVector::kDim, cfg.hidden, cfg.hidden, 2}),
      actor_old_({StateVector::kDim, cfg.hidden, cfg.hidden, 2}),
      critic_({StateVector::kDim, cfg.hidden, cfg.hidden, 1}),
      actor_opt_(actor_.n_params(), cfg.learning_rate),
      critic_opt_(critic_.n_params(), cfg.learning_rate) {
    Rng rng = Rng::sub(cfg.init_seed, 0x706f6c69ULL);
    actor_.init_xavier(rng);
    critic_.init_xavier(rng);
    actor_old_.params() = actor_.params();
}

std::vector<double> PolicyNetwork::preprocess(const StateVector& s) const {
    const auto raw = s.as_array();
    std::vector<double> x(StateVector::kDim);
    for (int i = 0; i < StateVector::kDim; ++i) {
        if (!std::isfinite(raw[static_cast<std::size_t>(i)]))
            throw std::invalid_argument("state vector entry not finite");
        x[static_cast<std::size_t>(i)] =
            raw[static_cast<std::size_t>(i)] * input_scale()[static_cast<std::size_t>(i)];
    }
    return x;
}

std::array<double, 2> PolicyNetwork::action_probs(const StateVector& s) const {
    return probs_from(actor_, preprocess(s));
}

double PolicyNetwork::value_estimate(const StateVector& s) const {
    return critic_.forward(preprocess(s))[0];
}

int PolicyNetwork::select_action(const StateVector& s, SelectMode mode, Rng& rng,
                                 double* log_prob, double* value) const {
    const auto p = action_probs(s);
    int a;
    if (mode == SelectMode::Greedy) {
        a = p[1] > p[0] ? 1 : 0;
    } else {
        a = rng.uniform() < p[1] ? 1 : 0;
    }
    if (log_prob) *log_prob = std::log(p[static_cast<std::size_t>(a)]);
    if (value) *value = value_estimate(s);
    return a;
}

void PolicyNetwork::sync_snapshot() { actor_old_.params() = actor_.params(); }

std::string PolicyNetwork::to_json() const {
    nlohmann::json j;
    j["format"] = "cesim-policy";
    j["version"] = 1;
    j["state_dim"] = StateVector::kDim;
    j["actions"] = 2;
    j["hidden"] = cfg_.hidden;
    j["input_scale"] = input_scale();
    j["actor"] = actor_.params();
    j["critic"] = critic_.params();
    nlohmann::json c;
    c["learning_rate"] = cfg_.learning_rate;
    c["batch_size"] = cfg_.batch_size;
    c["discount"] = cfg_.discount;
    c["clip_eps"] = cfg_.clip_eps;
    c["kl_beta"] = cfg_.kl_beta;
    c["entropy_coef"] = cfg_.entropy_coef;
    c["value_coef"] = cfg_.value_coef;
    c["minibatch_count"] = cfg_.minibatch_count;
    c["max_episode_iters"] = cfg_.max_episode_iters;
    c["max_consecutive_violations"] = cfg_.max_consecutive_violations;
    c["mu_exec"] = cfg_.mu_exec;
    c["mu_trans"] = cfg_.mu_trans;
    c["reward_mode"] = to_string(cfg_.reward_mode);
    c["init_seed"] = cfg_.init_seed;
    j["config"] = c;
    return j.dump(2);
}

PolicyNetwork PolicyNetwork::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "cesim-policy" || j.value("version", 0) != 1)
        throw std::invalid_argument("not a version-1 policy checkpoint");
    if (j.value("state_dim", 0) != StateVector::kDim || j.value("actions", 0) != 2)
        throw std::invalid_argument("checkpoint dimensions mismatch");
    PpoConfig cfg;
    const auto& c = j.at("config");
    cfg.hidden = j.at("hidden").get<int>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.discount = c.at("discount").get<double>();
    cfg.clip_eps = c.at("clip_eps").get<double>();
    cfg.kl_beta = c.at("kl_beta").get<double>();
    cfg.entropy_coef = c.at("entropy_coef").get<double>();
    cfg.value_coef = c.at("value_coef").get<double>();
    cfg.minibatch_count = c.at("minibatch_count").get<int>();
    cfg.max_episode_iters = c.at("max_episode_iters").get<int>();
    cfg.max_consecutive_violations = c.at("max_consecutive_violations").get<int>();
    cfg.mu_exec = c.at("mu_exec").get<double>();
    cfg.mu_trans = c.at("mu_trans").get<double>();
    cfg.reward_mode = reward_mode_from_string(c.at("reward_mode").get<std::string>());
    cfg.init_seed = c.at("init_seed").get<std::uint64_t>();
    PolicyNetwork net(cfg);
    const auto actor = j.at("actor").get<std::vector<double>>();
    const auto critic = j.at("critic").get<std::vector<double>>();
    if (actor.size() != net.actor_.n_params() || critic.size() != net.critic_.n_params())
        throw std::invalid_argument("checkpoint parameter count mismatch");
    net.actor_.params() = actor;
    net.critic_.params() = critic;
    net.actor_old_.params() = actor;
    return net;
}

void PolicyNetwork::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << to_json() << "\n";
}

PolicyNetwork PolicyNetwork::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json(text);
}

UpdateStats ppo_update(PolicyNetwork& net, std::vector<Experience>& buffer,
                       Rng& rng) {
    const PpoConfig& cfg = net.config();
    UpdateStats stats;
    stats.buffer_size = buffer.size();
    if (buffer.empty()) return stats;

    std::vector<double> rewards, values;
    std::vector<bool> done;
    rewards.reserve(buffer.size());
    for (const auto& e : buffer) {
        rewards.push_back(e.reward);
        values.push_back(e.value);
        done.push_back(e.done);
    }
    const auto returns = discounted_returns(rewards, done, cfg.discount);
    std::vector<double> adv(buffer.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) adv[i] = returns[i] - values[i];
    normalize_advantages(adv);

    std::vector<PpoSample> all(buffer.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        StateVector sv;
        auto arr = buffer[i].state;
        sv.priority_compensation = arr[0];
        sv.cpu_req_norm = arr[1];
        sv.mem_req_norm = arr[2];
        sv.unresolved_preds = arr[3];
        sv.remaining_depth = arr[4];
        sv.mesh_hops = arr[5];
        sv.utilization = arr[6];
        sv.has_asic = arr[7];
        sv.link_quality = arr[8];
        all[i].x = net.preprocess(sv);
        all[i].action = buffer[i].action;
        all[i].logp_old = buffer[i].log_prob;
        all[i].ret = returns[i];
        all[i].adv = adv[i];
    }

    net.sync_snapshot();  // ratios are measured against the collection policy
    stats.before = ppo_batch_terms(net.actor(), net.actor_snapshot(), net.critic(),
                                   all, cfg, nullptr, nullptr);

    std::vector<std::size_t> index(all.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
    const std::size_t bsz =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), all.size());
    for (int k = 0; k < cfg.minibatch_count; ++k) {
        // partial Fisher-Yates: the first bsz entries become a fresh draw
        for (std::size_t i = 0; i < bsz; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(index.size() - i));
            std::swap(index[i], index[j]);
        }
        std::vector<PpoSample> mb;
        mb.reserve(bsz);
        for (std::size_t i = 0; i < bsz; ++i) mb.push_back(all[index[i]]);
        std::vector<double> ag(net.actor().n_params(), 0.0);
        std::vector<double> cg(net.critic().n_params(), 0.0);
        ppo_batch_terms(net.actor(), net.actor_snapshot(), net.critic(), mb, cfg,
                        &ag, &cg);
        net.actor_opt_.step(net.actor().params(), ag);
        net.critic_opt_.step(net.critic().params(), cg);
        ++stats.steps;
    }

    stats.after = ppo_batch_terms(net.actor(), net.actor_snapshot(), net.critic(),
                                  all, cfg, nullptr, nullptr);
    net.sync_snapshot();
    buffer.clear();
    return stats;
}

}  // namespace cesim
