#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cesim/mlp.hpp"
#include "cesim/rng.hpp"

namespace cesim {

// Observation for one (subtask, candidate worker) decision. Field order is
// frozen; reports and checkpoints depend on it. Values must be finite.
struct StateVector {
    static constexpr int kDim = 9;
    double priority_compensation = 1.0;  // exp(waiting seconds, exponent capped at 20)
    double cpu_req_norm = 0.0;           // subtask demand / scenario max demand
    double mem_req_norm = 0.0;
    double unresolved_preds = 0.0;       // direct predecessors not yet completed
    double remaining_depth = 0.0;        // longest path to a sink, in edges
    double mesh_hops = 0.0;              // wireless hops to the worker, 0 if wired
    double utilization = 0.0;            // worker busy time / uptime, in [0,1]
    double has_asic = 0.0;               // worker accelerator flag
    double link_quality = 0.0;           // ln(1+rate) / loss_fraction^2

    std::array<double, kDim> as_array() const {
        return {priority_compensation, cpu_req_norm, mem_req_norm,
                unresolved_preds,      remaining_depth, mesh_hops,
                utilization,           has_asic,        link_quality};
    }
};

// action index 0 = keep the subtask (idle), 1 = offload to the worker
constexpr int kActionIdle = 0;
constexpr int kActionOffload = 1;

enum class RewardMode { Corrected, Literal };
const char* to_string(RewardMode m);
RewardMode reward_mode_from_string(const std::string& s);

struct PpoConfig {
    int hidden = 64;
    double learning_rate = 1e-4;
    int batch_size = 128;
    double discount = 0.99;
    double clip_eps = 0.2;
    double kl_beta = 0.02;
    double entropy_coef = 0.1;
    double value_coef = 0.5;
    int minibatch_count = 4;  // gradient steps per update
    int max_episode_iters = 1200;
    int max_consecutive_violations = 10;
    double mu_exec = 0.5;   // execution-time weight in the reward
    double mu_trans = 0.5;  // transfer-time weight
    RewardMode reward_mode = RewardMode::Corrected;
    std::uint64_t init_seed = 1;
};

struct Experience {
    std::array<double, StateVector::kDim> state{};
    int action = kActionIdle;
    double log_prob = 0.0;  // under the policy that made the decision
    double value = 0.0;     // critic estimate at decision time
    double reward = 0.0;    // attributed when the owning request resolves
    bool done = false;      // last decision of an episode
    std::uint64_t task_uid = 0;  // engine bookkeeping for reward attribution
};

// Penalty proportional to the weighted response time (normalized by the
// request timeout) and amplified as the trailing success rate drops.
// Corrected mode multiplies by (1 - ln sigma); Literal mode divides by
// ln sigma (the alias form kept for comparison; positive for sigma < 1).
double reward_value(double t_exec_ms, double t_trans_ms, double timeout_ms,
                    double success_rate, double mu_exec, double mu_trans,
                    RewardMode mode);

std::array<double, 2> softmax2(const std::array<double, 2>& logits);

// min(r * adv, clip(r, 1-eps, 1+eps) * adv)
double clipped_surrogate(double ratio, double advantage, double clip_eps);

// Discounted reward-to-go; accumulation resets after each done flag.
std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       const std::vector<bool>& done,
                                       double discount);

// advantage[i] -> (advantage[i] - mean) / (std + 1e-8)
void normalize_advantages(std::vector<double>& advantages);

// One decision sample prepared for a gradient step. x is the network input
// (already preprocessed), G the discounted return, adv the normalized
// advantage, logp_old the behavior log-probability of the taken action.
struct PpoSample {
    std::vector<double> x;
    int action = 0;
    double logp_old = 0.0;
    double ret = 0.0;
    double adv = 0.0;
};

struct PpoTerms {
    double surrogate = 0.0;  // mean clipped surrogate
    double kl = 0.0;         // mean KL(old || new)
    double entropy = 0.0;    // mean policy entropy
    double value_mse = 0.0;  // mean squared critic error
    double objective = 0.0;  // surrogate - kl_beta*kl + entropy_coef*entropy - value_coef*mse
};

// Evaluates the batch objective and, if grads are non-null, accumulates the
// gradients of loss = -objective w.r.t. actor and critic parameters (so a
// descent step maximizes the objective). Analytic, matched against central
// finite differences in the test suite.
PpoTerms ppo_batch_terms(const Mlp& actor, const Mlp& actor_old, const Mlp& critic,
                         const std::vector<PpoSample>& batch, const PpoConfig& cfg,
                         std::vector<double>* actor_grad,
                         std::vector<double>* critic_grad);

enum class SelectMode { Sample, Greedy };

class PolicyNetwork;
struct UpdateStats;
UpdateStats ppo_update(PolicyNetwork& net, std::vector<Experience>& buffer,
                       Rng& rng);

// Actor-critic pair with snapshot support. Inputs are scaled by a fixed
// per-feature constant (part of the architecture, not the observation
// contract) so that wide-range features do not saturate the tanh stack.
class PolicyNetwork {
public:
    explicit PolicyNetwork(const PpoConfig& cfg);

    static const std::array<double, StateVector::kDim>& input_scale();
    std::vector<double> preprocess(const StateVector& s) const;

    // throws std::runtime_error on non-finite logits (diverged training)
    std::array<double, 2> action_probs(const StateVector& s) const;
    double value_estimate(const StateVector& s) const;
    int select_action(const StateVector& s, SelectMode mode, Rng& rng,
                      double* log_prob = nullptr, double* value = nullptr) const;

    Mlp& actor() { return actor_; }
    const Mlp& actor() const { return actor_; }
    Mlp& critic() { return critic_; }
    const Mlp& critic() const { return critic_; }
    const Mlp& actor_snapshot() const { return actor_old_; }
    void sync_snapshot();  // actor_old <- actor

    const PpoConfig& config() const { return cfg_; }

    std::string to_json() const;
    static PolicyNetwork from_json(const std::string& text);
    void save(const std::string& path) const;
    static PolicyNetwork load(const std::string& path);

private:
    PpoConfig cfg_;
    Mlp actor_;
    Mlp actor_old_;
    Mlp critic_;
    Adam actor_opt_;
    Adam critic_opt_;
    friend UpdateStats ppo_update(PolicyNetwork& net,
                                  std::vector<Experience>& buffer, Rng& rng);
};

// One training update (ppo_update above): computes returns/advantages from
// the buffer, runs minibatch_count clipped-surrogate steps, refreshes the
// snapshot, and clears the buffer.
struct UpdateStats {
    PpoTerms before;  // evaluated on the full buffer prior to stepping
    PpoTerms after;   // evaluated after the minibatch steps
    int steps = 0;
    std::size_t buffer_size = 0;
};

}  // namespace cesim
