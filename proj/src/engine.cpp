#include "dinl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dinl {

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kNoiseStream = 12;
constexpr std::uint64_t kShuffleStream = 13;

}  // namespace

// ---------------------------------------------------------------------------
// traces

std::size_t WaveTrace::scalars(WaveDirection dir) const {
    std::size_t total = 0;
    for (const auto& t : entries)
        if (t.direction == dir) total += t.scalars;
    return total;
}

std::size_t WaveTrace::total_scalars() const {
    return scalars(WaveDirection::forward) + scalars(WaveDirection::backward);
}

std::vector<std::size_t> WaveTrace::edges(WaveDirection dir) const {
    std::vector<std::size_t> out;
    for (const auto& t : entries)
        if (t.direction == dir) out.push_back(t.edge);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void verify_edge_discipline(const WaveTrace& trace, const TrainingTopology& topology) {
    const std::vector<std::size_t> active(topology.edge_indices().begin(), topology.edge_indices().end());
    std::map<std::size_t, std::size_t> fwd;
    std::map<std::size_t, std::size_t> bwd;
    for (const auto& t : trace.entries) {
        auto& slot = t.direction == WaveDirection::forward ? fwd : bwd;
        if (slot.count(t.edge))
            throw EngineError("edge " + std::to_string(t.edge) + " transmitted twice in one direction");
        slot[t.edge] = t.scalars;
    }
    if (trace.edges(WaveDirection::forward) != active)
        throw EngineError("forward wave edge set differs from the active topology");
    if (trace.edges(WaveDirection::backward) != active)
        throw EngineError("backward wave edge set differs from the active topology");
    for (const auto& [edge, n] : fwd)
        if (bwd.at(edge) != n)
            throw EngineError("edge " + std::to_string(edge) + " forward/backward scalar counts differ");
}

// ---------------------------------------------------------------------------
// modules and batches

std::size_t NodeModule::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& rows) {
    Batch b;
    for (std::size_t j = 0; j < data.sensors; ++j) b.sensor_inputs.push_back(data.sensor_batch(j, rows));
    b.labels = data.label_batch(rows);
    return b;
}

Batch make_batch(const Dataset& data) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return make_batch(data, rows);
}

// ---------------------------------------------------------------------------
// InlNetwork

InlNetwork::InlNetwork(const NetworkGraph& graph, TrainingTopology topology, Architecture arch,
                       std::uint64_t stream_base)
    : graph_(&graph), topology_(std::move(topology)), arch_(arch) {
    if (!topology_.connects_data_nodes(graph))
        throw GraphError("training topology leaves a data node without a path to the fusion node");
    for (const Edge& e : topology_.edges())
        if (e.attr.width != arch_.message_width)
            throw ShapeError("active edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                             ") has width " + std::to_string(e.attr.width) + " but modules emit " +
                             std::to_string(arch_.message_width));

    const std::size_t n = graph.node_count();
    std::vector<bool> touched(n, false);
    touched[graph.fusion()] = true;
    for (const Edge& e : topology_.edges()) touched[e.from] = touched[e.to] = true;
    for (NodeId v : graph.topological_order())
        if (touched[v]) order_.push_back(v);

    modules_.resize(n);
    cache_.resize(n);
    const std::size_t w = arch_.message_width;
    for (NodeId v : order_) {
        NodeModule m{v, graph.role(v), {}};
        const std::size_t parents = topology_.parents(v).size();
        switch (m.role) {
        case NodeRole::sensor:
            m.layers.emplace_back(arch_.obs_dim, arch_.sensor_hidden, Activation::tanh);
            m.layers.emplace_back(arch_.sensor_hidden, 2 * w, Activation::identity);
            break;
        case NodeRole::relay:
            if (parents == 0)
                throw GraphError("relay " + std::to_string(v) + " is active but receives no messages");
            m.layers.emplace_back(w, arch_.relay_hidden, Activation::tanh);
            m.layers.emplace_back(arch_.relay_hidden, w, Activation::identity);
            break;
        case NodeRole::fusion:
            m.layers.emplace_back(parents * w, arch_.fusion_hidden, Activation::tanh);
            m.layers.emplace_back(arch_.fusion_hidden, 1, Activation::identity);
            break;
        }
        Rng init = make_stream(stream_base, {v, kInitStream});
        for (auto& layer : m.layers) layer.init(init);
        modules_[v] = std::move(m);
    }
    for (NodeId j : graph.data_nodes()) noise_streams_.push_back(make_stream(stream_base, {j, kNoiseStream}));
}

bool InlNetwork::is_active(NodeId v) const { return v < modules_.size() && modules_[v].has_value(); }

const NodeModule& InlNetwork::module(NodeId v) const {
    if (!is_active(v)) throw std::out_of_range("node " + std::to_string(v) + " is not in the topology");
    return *modules_[v];
}

NodeModule& InlNetwork::module(NodeId v) {
    if (!is_active(v)) throw std::out_of_range("node " + std::to_string(v) + " is not in the topology");
    return *modules_[v];
}

std::size_t InlNetwork::count_params() const {
    std::size_t n = 0;
    for (NodeId v : order_) n += modules_[v]->param_count();
    return n;
}

std::vector<ParamRef> InlNetwork::params() {
    std::vector<ParamRef> out;
    for (NodeId v : order_)
        for (auto& layer : modules_[v]->layers)
            for (const auto& p : layer.params()) out.push_back(p);
    return out;
}

void InlNetwork::zero_grad() {
    for (NodeId v : order_)
        for (auto& layer : modules_[v]->layers) layer.zero_grad();
}

std::size_t InlNetwork::sensor_slot(NodeId v) const {
    const auto data = graph_->data_nodes();
    return static_cast<std::size_t>(std::lower_bound(data.begin(), data.end(), v) - data.begin());
}

Tensor2 InlNetwork::run_module(NodeModule& m, const Tensor2& input) {
    Tensor2 x = input;
    for (auto& layer : m.layers) x = layer.forward(x);
    return x;
}

Tensor2 InlNetwork::backprop_module(NodeModule& m, const Tensor2& upstream) {
    Tensor2 g = upstream;
    for (auto it = m.layers.rbegin(); it != m.layers.rend(); ++it) g = it->backward(g);
    return g;
}

ForwardResult InlNetwork::forward_wave(const Batch& batch, GateMode mode,
                                       const std::vector<Tensor2>* frozen_noise) {
    const auto data_nodes = graph_->data_nodes();
    if (batch.sensor_inputs.size() != data_nodes.size())
        throw ShapeError("batch has " + std::to_string(batch.sensor_inputs.size()) + " sensor inputs, graph has " +
                         std::to_string(data_nodes.size()) + " data nodes");
    if (mode == GateMode::frozen && (!frozen_noise || frozen_noise->size() != data_nodes.size()))
        throw std::invalid_argument("frozen gate mode needs one noise tensor per data node");
    const std::size_t rows = batch.labels.rows();
    for (const Tensor2& x : batch.sensor_inputs)
        if (x.rows() != rows || x.cols() != arch_.obs_dim)
            throw ShapeError("sensor input " + shape_string(x) + " does not match batch of " + std::to_string(rows) +
                             " x " + std::to_string(arch_.obs_dim));

    ForwardResult result;
    result.sensor_kl.assign(data_nodes.size(), 0.0);
    result.noise.resize(data_nodes.size());
    result.trace.pass_id = next_pass_++;
    const std::size_t w = arch_.message_width;

    for (NodeId v : order_) {
        NodeModule& m = *modules_[v];
        NodeCache& c = cache_[v];
        c.gate.reset();
        const auto parents = topology_.parents(v);

        switch (m.role) {
        case NodeRole::sensor: {
            const std::size_t slot = sensor_slot(v);
            const Tensor2 head = run_module(m, batch.sensor_inputs[slot]);
            const Tensor2 mu = slice_cols(head, 0, w);
            const Tensor2 logvar = slice_cols(head, w, w);
            switch (mode) {
            case GateMode::sample: c.gate = gate_forward(mu, logvar, noise_streams_[slot]); break;
            case GateMode::frozen: c.gate = gate_forward(mu, logvar, (*frozen_noise)[slot]); break;
            case GateMode::deterministic: c.gate = gate_deterministic(mu, logvar); break;
            }
            c.message = c.gate->message;
            result.sensor_kl[slot] = c.gate->mean_kl;
            result.noise[slot] = c.gate->noise;
            break;
        }
        case NodeRole::relay: {
            Tensor2 mean(rows, w);
            for (NodeId p : parents) add_inplace(mean, cache_[p].message);
            scale_inplace(mean, 1.0 / static_cast<double>(parents.size()));
            c.message = run_module(m, mean);
            break;
        }
        case NodeRole::fusion: {
            std::vector<Tensor2> inputs;
            for (NodeId p : parents) inputs.push_back(cache_[p].message);
            result.logits = run_module(m, concat_cols(inputs));
            break;
        }
        }

        if (m.role != NodeRole::fusion)
            for (NodeId child : topology_.children(v)) {
                const std::size_t edge = *graph_->find_edge(v, child);
                result.trace.entries.push_back(
                    {edge, v, child, WaveDirection::forward, rows, rows * graph_->edge(edge).attr.width});
            }
    }

    result.rate = std::accumulate(result.sensor_kl.begin(), result.sensor_kl.end(), 0.0);
    cached_batch_ = rows;
    pending_pass_ = result.trace.pass_id;
    return result;
}

void InlNetwork::backward_wave(const Tensor2& fusion_error, double rate_weight, WaveTrace& trace) {
    if (pending_pass_ == 0 || trace.pass_id != pending_pass_)
        throw std::logic_error("backward_wave requires the trace of the most recent forward_wave");
    if (fusion_error.rows() != cached_batch_ || fusion_error.cols() != 1)
        throw ShapeError("fusion error " + shape_string(fusion_error) + " does not match cached batch of " +
                         std::to_string(cached_batch_));
    if (!(rate_weight >= 0.0)) throw std::invalid_argument("rate weight must be >= 0");
    pending_pass_ = 0;

    const std::size_t rows = cached_batch_;
    const std::size_t w = arch_.message_width;
    // The rate term is a batch mean of per-sample KL.
    const double kl_weight = rate_weight / static_cast<double>(rows);
    std::vector<Tensor2> message_error(graph_->node_count());
    for (NodeId v : order_)
        if (v != graph_->fusion()) message_error[v] = Tensor2(rows, w);

    auto send_back = [&](NodeId parent, NodeId child, const Tensor2& err) {
        const std::size_t edge = *graph_->find_edge(parent, child);
        trace.entries.push_back(
            {edge, parent, child, WaveDirection::backward, rows, rows * graph_->edge(edge).attr.width});
        add_inplace(message_error[parent], err);
    };

    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        const NodeId v = *it;
        NodeModule& m = *modules_[v];
        const auto parents = topology_.parents(v);
        switch (m.role) {
        case NodeRole::fusion: {
            const Tensor2 d_in = backprop_module(m, fusion_error);
            const std::vector<std::size_t> widths(parents.size(), w);
            const auto blocks = split_cols(d_in, widths);
            for (std::size_t k = 0; k < parents.size(); ++k) send_back(parents[k], v, blocks[k]);
            break;
        }
        case NodeRole::relay: {
            Tensor2 d_mean = backprop_module(m, message_error[v]);
            scale_inplace(d_mean, 1.0 / static_cast<double>(parents.size()));
            for (NodeId p : parents) send_back(p, v, d_mean);
            break;
        }
        case NodeRole::sensor: {
            const GateState& g = *cache_[v].gate;
            const GateGradients gg = gate_backward(message_error[v], g.noise, g.mu, g.logvar, kl_weight);
            const Tensor2 parts[] = {gg.d_mu, gg.d_logvar};
            backprop_module(m, concat_cols(parts));
            break;
        }
        }
    }
}

// ---------------------------------------------------------------------------
// evaluation and training

EvalMetrics evaluate(InlNetwork& net, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const Batch batch = make_batch(data);
    const ForwardResult fwd = net.forward_wave(batch, GateMode::deterministic);
    const LossResult loss = bce_with_logits(fwd.logits, batch.labels);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < batch.labels.rows(); ++r) {
        const int predicted = fwd.logits(r, 0) > 0.0 ? 1 : 0;
        correct += predicted == static_cast<int>(batch.labels(r, 0)) ? 1 : 0;
    }
    return EvalMetrics{100.0 * static_cast<double>(correct) / static_cast<double>(data.size()), loss.mean_nll,
                       fwd.rate};
}

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(cfg.rate_weight >= 0.0)) throw std::invalid_argument("train: rate weight must be >= 0");
    if (cfg.bits_per_scalar < 1) throw std::invalid_argument("train: bits per scalar must be >= 1");
}

std::vector<EpochMetrics> train(InlNetwork& net, const Dataset& train_set, const Dataset* val_set,
                                const TrainConfig& cfg, const StepObserver& observer) {
    validate(cfg);
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");

    Adam optimizer(cfg.adam);
    Rng shuffle = make_stream(cfg.seed, {kShuffleStream});
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    net.zero_grad();

    std::vector<EpochMetrics> history;
    std::uint64_t cumulative = 0;
    std::vector<std::vector<double>> best_params;
    double best_val_nll = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle);
        EpochMetrics em;
        em.epoch = epoch;
        double nll_sum = 0.0;
        double rate_sum = 0.0;
        std::size_t scalars = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(stop));
            const Batch batch = make_batch(train_set, rows);
            ForwardResult fwd = net.forward_wave(batch, GateMode::sample);
            const LossResult loss = bce_with_logits(fwd.logits, batch.labels);
            const double objective = loss.mean_nll + cfg.rate_weight * fwd.rate;
            if (!std::isfinite(objective)) {
                std::ostringstream msg;
                msg << "non-finite objective at epoch " << epoch << ", batch starting at " << start
                    << ": nll=" << loss.mean_nll << " rate=" << fwd.rate << " lambda=" << cfg.rate_weight;
                throw EngineError(msg.str());
            }
            net.backward_wave(loss.error, cfg.rate_weight, fwd.trace);
            const auto params = net.params();
            optimizer.step(params);
            if (observer) observer(fwd.trace);

            const double weight = static_cast<double>(rows.size());
            nll_sum += loss.mean_nll * weight;
            rate_sum += fwd.rate * weight;
            scalars += fwd.trace.total_scalars();
        }

        const double n = static_cast<double>(train_set.size());
        em.train_nll = nll_sum / n;
        em.train_rate = rate_sum / n;
        em.train_objective = em.train_nll + cfg.rate_weight * em.train_rate;
        em.bits = static_cast<std::uint64_t>(scalars) * cfg.bits_per_scalar;
        cumulative += em.bits;
        em.cumulative_bits = cumulative;
        if (val_set && !val_set->empty() && cfg.eval_every > 0 &&
            (epoch % cfg.eval_every == 0 || epoch == cfg.epochs))
            em.validation = evaluate(net, *val_set);
        if (cfg.keep_best_validation && em.validation && em.validation->nll < best_val_nll) {
            best_val_nll = em.validation->nll;
            best_params.clear();
            for (const auto& p : net.params()) best_params.emplace_back(p.value.begin(), p.value.end());
        }
        history.push_back(em);
    }
    if (!best_params.empty()) {
        const auto params = net.params();
        for (std::size_t k = 0; k < params.size(); ++k)
            std::copy(best_params[k].begin(), best_params[k].end(), params[k].value.begin());
    }
    return history;
}

}  // namespace dinl
