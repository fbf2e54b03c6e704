#include "dinl/gate.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dinl {

Tensor2 standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor2 out(rows, cols);
    for (double& v : out.values()) v = dist(rng);
    return out;
}

std::vector<double> gaussian_kl(const Tensor2& mu, const Tensor2& logvar) {
    require_same_shape(mu, logvar, "gaussian_kl");
    std::vector<double> kl(mu.rows(), 0.0);
    for (std::size_t r = 0; r < mu.rows(); ++r) {
        const auto m = mu.row(r);
        const auto lv = logvar.row(r);
        double acc = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            acc += std::expm1(lv[i]) + m[i] * m[i] - lv[i];
        kl[r] = 0.5 * acc;
    }
    return kl;
}

GateState gate_forward(const Tensor2& mu, const Tensor2& logvar, const Tensor2& noise) {
    require_same_shape(mu, logvar, "gate_forward logvar");
    require_same_shape(mu, noise, "gate_forward noise");
    GateState s{mu, logvar, noise, Tensor2(mu.rows(), mu.cols()), gaussian_kl(mu, logvar), 0.0};
    const auto m = mu.values();
    const auto lv = logvar.values();
    const auto eps = noise.values();
    auto out = s.message.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] + std::exp(0.5 * lv[i]) * eps[i];
    if (!s.kl.empty())
        s.mean_kl = std::accumulate(s.kl.begin(), s.kl.end(), 0.0) / static_cast<double>(s.kl.size());
    return s;
}

GateState gate_forward(const Tensor2& mu, const Tensor2& logvar, Rng& rng) {
    return gate_forward(mu, logvar, standard_normal(mu.rows(), mu.cols(), rng));
}

GateState gate_deterministic(const Tensor2& mu, const Tensor2& logvar) {
    return gate_forward(mu, logvar, Tensor2(mu.rows(), mu.cols()));
}

GateGradients gate_backward(const Tensor2& upstream, const Tensor2& noise, const Tensor2& mu,
                            const Tensor2& logvar, double kl_weight) {
    require_same_shape(upstream, mu, "gate_backward upstream");
    require_same_shape(noise, mu, "gate_backward noise");
    require_same_shape(logvar, mu, "gate_backward logvar");
    if (!(kl_weight >= 0.0)) throw std::invalid_argument("gate_backward: kl weight must be >= 0");
    GateGradients g{Tensor2(mu.rows(), mu.cols()), Tensor2(mu.rows(), mu.cols())};
    const auto up = upstream.values();
    const auto eps = noise.values();
    const auto m = mu.values();
    const auto lv = logvar.values();
    auto dm = g.d_mu.values();
    auto dlv = g.d_logvar.values();
    for (std::size_t i = 0; i < up.size(); ++i) {
        const double sigma = std::exp(0.5 * lv[i]);
        dm[i] = up[i] + kl_weight * m[i];
        dlv[i] = up[i] * eps[i] * 0.5 * sigma + kl_weight * 0.5 * std::expm1(lv[i]);
    }
    return g;
}

}  // namespace dinl
