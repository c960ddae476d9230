#pragma once

#include <cstddef>
#include <vector>

#include "cesim/rng.hpp"

namespace cesim {

// Fully-connected network with tanh hidden layers and a linear output layer.
// Parameters live in one flat vector (per layer: row-major weight matrix
// out x in, then bias) so optimizers and finite-difference checks can treat
// the model as a plain parameter vector.
class Mlp {
public:
    explicit Mlp(std::vector<int> layer_sizes);

    const std::vector<int>& layers() const { return layers_; }
    std::size_t n_params() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    void init_xavier(Rng& rng);

    struct Trace {
        std::vector<std::vector<double>> acts;  // acts[0] = input, then per layer
    };

    std::vector<double> forward(const std::vector<double>& x) const;
    std::vector<double> forward(const std::vector<double>& x, Trace& trace) const;

    // Accumulates d(loss)/d(params) into grad (same layout as params) given
    // d(loss)/d(output); grad must be pre-sized and is added to, not reset.
    void backward(const Trace& trace, const std::vector<double>& d_out,
                  std::vector<double>& grad) const;

private:
    std::vector<int> layers_;
    std::vector<double> params_;
    std::vector<std::size_t> w_off_, b_off_;  // per-layer offsets into params_
};

// Adam in descent form: params -= lr * m_hat / (sqrt(v_hat) + eps).
class Adam {
public:
    Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace cesim
