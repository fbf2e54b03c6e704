#pragma once

// Gaussian finite-rate gate: the transmitted message is a reparameterized
// sample μ + exp(½·logvar)⊙ε, and its rate is the KL divergence of
// N(μ, diag(exp(logvar))) to the standard-normal prior, in nats.

#include <vector>

#include "dinl/rng.hpp"
#include "dinl/tensor.hpp"

namespace dinl {

struct GateState {
    Tensor2 mu;
    Tensor2 logvar;
    Tensor2 noise;               // ε, zero for deterministic evaluation
    Tensor2 message;             // μ + exp(½ logvar) ⊙ ε
    std::vector<double> kl;      // per sample, nats
    double mean_kl = 0.0;
};

struct GateGradients {
    Tensor2 d_mu;
    Tensor2 d_logvar;
};

Tensor2 standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

/// ½ Σ_i (exp(logvar_i) + μ_i² − 1 − logvar_i) for each row.
std::vector<double> gaussian_kl(const Tensor2& mu, const Tensor2& logvar);

GateState gate_forward(const Tensor2& mu, const Tensor2& logvar, const Tensor2& noise);
/// Samples ε from rng.
GateState gate_forward(const Tensor2& mu, const Tensor2& logvar, Rng& rng);
/// ε = 0: the message is μ itself; the KL is still reported.
GateState gate_deterministic(const Tensor2& mu, const Tensor2& logvar);

/// Reparameterization gradients of the task loss (through `upstream`, the
/// error on the message) plus kl_weight times the per-row KL gradient.
GateGradients gate_backward(const Tensor2& upstream, const Tensor2& noise, const Tensor2& mu,
                            const Tensor2& logvar, double kl_weight);

}  // namespace dinl
