#include "cesim/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace cesim {

Mlp::Mlp(std::vector<int> layer_sizes) : layers_(std::move(layer_sizes)) {
    if (layers_.size() < 2) throw std::invalid_argument("mlp needs >= 2 layers");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        if (layers_[l] < 1 || layers_[l + 1] < 1)
            throw std::invalid_argument("mlp layer sizes must be >= 1");
        w_off_.push_back(total);
        total += static_cast<std::size_t>(layers_[l]) * static_cast<std::size_t>(layers_[l + 1]);
        b_off_.push_back(total);
        total += static_cast<std::size_t>(layers_[l + 1]);
    }
    params_.assign(total, 0.0);
}

void Mlp::init_xavier(Rng& rng) {
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        const int fan_in = layers_[l], fan_out = layers_[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        double* w = params_.data() + w_off_[l];
        for (int i = 0; i < fan_in * fan_out; ++i) w[i] = rng.uniform(-bound, bound);
        double* b = params_.data() + b_off_[l];
        for (int i = 0; i < fan_out; ++i) b[i] = 0.0;
    }
}

std::vector<double> Mlp::forward(const std::vector<double>& x) const {
    Trace t;
    return forward(x, t);
}

std::vector<double> Mlp::forward(const std::vector<double>& x, Trace& trace) const {
    if (static_cast<int>(x.size()) != layers_.front())
        throw std::invalid_argument("mlp input size mismatch");
    trace.acts.clear();
    trace.acts.push_back(x);
    std::vector<double> cur = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        const int in = layers_[l], out = layers_[l + 1];
        const double* w = params_.data() + w_off_[l];
        const double* b = params_.data() + b_off_[l];
        std::vector<double> next(static_cast<std::size_t>(out));
        for (int o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            for (int i = 0; i < in; ++i) acc += row[i] * cur[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(o)] = acc;
        }
        const bool last = (l + 2 == layers_.size());
        if (!last)
            for (auto& v : next) v = std::tanh(v);
        trace.acts.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

void Mlp::backward(const Trace& trace, const std::vector<double>& d_out,
                   std::vector<double>& grad) const {
    if (grad.size() != params_.size())
        throw std::invalid_argument("gradient buffer size mismatch");
    if (trace.acts.size() != layers_.size())
        throw std::invalid_argument("stale forward trace");
    std::vector<double> delta = d_out;  // d(loss)/d(pre-activation of layer l+1)
    for (std::size_t l = layers_.size() - 1; l-- > 0;) {
        const int in = layers_[l], out = layers_[l + 1];
        const auto& a_in = trace.acts[l];
        const auto& a_out = trace.acts[l + 1];
        const bool last = (l + 2 == layers_.size());
        // tanh layers stored post-activation: d(pre) = d(post) * (1 - y^2)
        if (!last)
            for (int o = 0; o < out; ++o)
                delta[static_cast<std::size_t>(o)] *=
                    1.0 - a_out[static_cast<std::size_t>(o)] * a_out[static_cast<std::size_t>(o)];
        double* gw = grad.data() + w_off_[l];
        double* gb = grad.data() + b_off_[l];
        const double* w = params_.data() + w_off_[l];
        std::vector<double> d_in(static_cast<std::size_t>(in), 0.0);
        for (int o = 0; o < out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)];
            gb[o] += d;
            double* grow = gw + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            const double* wrow = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
            for (int i = 0; i < in; ++i) {
                grow[i] += d * a_in[static_cast<std::size_t>(i)];
                d_in[static_cast<std::size_t>(i)] += d * wrow[i];
            }
        }
        delta = std::move(d_in);
    }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("adam size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

}  // namespace cesim
