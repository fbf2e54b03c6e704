#pragma once

// Dense layers with hand-written gradients, the logistic loss and Adam.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dinl/rng.hpp"
#include "dinl/tensor.hpp"

namespace dinl {

enum class Activation { identity, tanh, relu };

std::string_view to_string(Activation a);

/// View of one parameter block and its gradient accumulator.
struct ParamRef {
    std::span<double> value;
    std::span<double> grad;
};

/// y = act(x·Wᵀ + b). Weight is out × in. forward() caches its input and
/// output; backward() consumes that cache.
class DenseLayer {
public:
    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Activation act);

    std::size_t in_dim() const { return weight_.cols(); }
    std::size_t out_dim() const { return weight_.rows(); }
    Activation activation() const { return act_; }
    std::size_t param_count() const { return weight_.size() + bias_.size(); }

    /// Glorot-uniform weights, zero bias.
    void init(Rng& rng);

    Tensor2& weight() { return weight_; }
    const Tensor2& weight() const { return weight_; }
    std::vector<double>& bias() { return bias_; }
    const std::vector<double>& bias() const { return bias_; }
    const Tensor2& weight_grad() const { return weight_grad_; }
    const std::vector<double>& bias_grad() const { return bias_grad_; }

    Tensor2 forward(const Tensor2& input);
    /// Accumulates ∂L/∂W, ∂L/∂b and returns ∂L/∂input. Throws std::logic_error
    /// when no forward pass is cached.
    Tensor2 backward(const Tensor2& upstream);

    bool has_cache() const { return cached_input_.has_value(); }
    void clear_cache();
    void zero_grad();
    std::vector<ParamRef> params();

private:
    Tensor2 weight_;
    std::vector<double> bias_;
    Tensor2 weight_grad_;
    std::vector<double> bias_grad_;
    Activation act_ = Activation::identity;
    std::optional<Tensor2> cached_input_;
    Tensor2 cached_output_;
};

struct LossResult {
    double mean_nll = 0.0;
    /// ∂(mean NLL)/∂logit = (sigmoid(z) − y) / batch
    Tensor2 error;
};

/// Binary cross-entropy on raw logits, log-sum-exp stable. Labels must be 0/1.
LossResult bce_with_logits(const Tensor2& logits, const Tensor2& labels);

double sigmoid(double z);

struct AdamConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are sized on the first step and must
/// keep matching the parameter list afterwards.
class Adam {
public:
    Adam() = default;
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::size_t steps() const { return step_; }

    /// Applies one update and zeroes every gradient buffer.
    void step(std::span<const ParamRef> params);

private:
    AdamConfig cfg_;
    std::size_t step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace dinl
