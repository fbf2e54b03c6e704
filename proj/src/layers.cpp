#include "dinl/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dinl {

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    }
    return "unknown";
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : weight_(out, in), bias_(out, 0.0), weight_grad_(out, in), bias_grad_(out, 0.0), act_(act) {
    if (in == 0 || out == 0) throw ShapeError("dense layer dimensions must be positive");
}

void DenseLayer::init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : weight_.values()) w = dist(rng);
    std::fill(bias_.begin(), bias_.end(), 0.0);
}

Tensor2 DenseLayer::forward(const Tensor2& input) {
    if (input.cols() != in_dim())
        throw ShapeError("dense_forward: input " + shape_string(input) + " vs layer in-dim " +
                         std::to_string(in_dim()));
    Tensor2 out(input.rows(), out_dim());
    for (std::size_t r = 0; r < input.rows(); ++r) {
        const auto x = input.row(r);
        auto y = out.row(r);
        for (std::size_t o = 0; o < out_dim(); ++o) {
            const auto w = weight_.row(o);
            double acc = bias_[o];
            for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * w[i];
            switch (act_) {
            case Activation::identity: y[o] = acc; break;
            case Activation::tanh: y[o] = std::tanh(acc); break;
            case Activation::relu: y[o] = acc > 0.0 ? acc : 0.0; break;
            }
        }
    }
    cached_input_ = input;
    cached_output_ = out;
    return out;
}

Tensor2 DenseLayer::backward(const Tensor2& upstream) {
    if (!cached_input_) throw std::logic_error("dense_backward called without a cached forward pass");
    const Tensor2& input = *cached_input_;
    require_same_shape(upstream, cached_output_, "dense_backward upstream");

    Tensor2 downstream(input.rows(), in_dim());
    for (std::size_t r = 0; r < input.rows(); ++r) {
        const auto x = input.row(r);
        const auto y = cached_output_.row(r);
        const auto g = upstream.row(r);
        auto dx = downstream.row(r);
        for (std::size_t o = 0; o < out_dim(); ++o) {
            double delta = g[o];
            switch (act_) {
            case Activation::identity: break;
            case Activation::tanh: delta *= 1.0 - y[o] * y[o]; break;
            case Activation::relu: delta = y[o] > 0.0 ? delta : 0.0; break;
            }
            if (delta == 0.0) continue;
            bias_grad_[o] += delta;
            auto gw = weight_grad_.row(o);
            const auto w = weight_.row(o);
            for (std::size_t i = 0; i < x.size(); ++i) {
                gw[i] += delta * x[i];
                dx[i] += delta * w[i];
            }
        }
    }
    return downstream;
}

void DenseLayer::clear_cache() {
    cached_input_.reset();
    cached_output_ = Tensor2();
}

void DenseLayer::zero_grad() {
    weight_grad_.fill(0.0);
    std::fill(bias_grad_.begin(), bias_grad_.end(), 0.0);
}

std::vector<ParamRef> DenseLayer::params() {
    return {ParamRef{weight_.values(), weight_grad_.values()}, ParamRef{bias_, bias_grad_}};
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

LossResult bce_with_logits(const Tensor2& logits, const Tensor2& labels) {
    require_same_shape(logits, labels, "bce_with_logits");
    if (logits.empty()) throw ShapeError("bce_with_logits: empty batch");
    const double batch = static_cast<double>(logits.rows());
    LossResult result{0.0, Tensor2(logits.rows(), logits.cols())};
    const auto z = logits.values();
    const auto y = labels.values();
    auto err = result.error.values();
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw std::invalid_argument("bce_with_logits: labels must be 0 or 1");
        total += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
        err[i] = (sigmoid(z[i]) - y[i]) / batch;
    }
    result.mean_nll = total / batch;
    return result;
}

void Adam::step(std::span<const ParamRef> params) {
    if (m_.empty()) {
        for (const ParamRef& p : params) {
            m_.emplace_back(p.value.size(), 0.0);
            v_.emplace_back(p.value.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw ShapeError("adam_step: parameter list changed size");
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const ParamRef& p = params[k];
        if (p.value.size() != m_[k].size() || p.grad.size() != p.value.size())
            throw ShapeError("adam_step: parameter block " + std::to_string(k) + " changed shape");
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p.value[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            p.grad[i] = 0.0;
        }
    }
}

}  // namespace dinl
