#pragma once

// In-network learning engine. Each node of the active topology owns a small
// neural module; the forward wave pushes messages along active edges toward
// the fusion node and the backward wave returns error vectors along the same
// edges in reverse. Every transmission is recorded so traffic can be checked
// against the exchange-cost formula.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dinl/gate.hpp"
#include "dinl/graph.hpp"
#include "dinl/layers.hpp"
#include "dinl/task.hpp"

namespace dinl {

/// Layer widths of the per-node modules.
///   sensor: obs → sensor_hidden (tanh) → [μ | logvar], each message_width wide
///   relay:  mean of parent messages → relay_hidden (tanh) → message_width
///   fusion: concat of parent messages → fusion_hidden (tanh) → 1 logit
struct Architecture {
    std::size_t obs_dim = 2;
    std::size_t message_width = 3;
    std::size_t sensor_hidden = 16;
    std::size_t relay_hidden = 8;
    std::size_t fusion_hidden = 16;
};

class EngineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class WaveDirection { forward, backward };

struct Transmission {
    std::size_t edge = 0;  // index into the graph's edge list
    NodeId from = 0;       // graph edge orientation, regardless of direction
    NodeId to = 0;
    WaveDirection direction = WaveDirection::forward;
    std::size_t samples = 0;
    std::size_t scalars = 0;
};

struct WaveTrace {
    std::uint64_t pass_id = 0;
    std::vector<Transmission> entries;

    std::size_t scalars(WaveDirection dir) const;
    std::size_t total_scalars() const;
    /// Sorted distinct graph edge indices that carried traffic in `dir`.
    std::vector<std::size_t> edges(WaveDirection dir) const;
};

/// Throws EngineError unless the trace used exactly the active edges, once
/// per direction, with equal forward/backward scalar counts per edge.
void verify_edge_discipline(const WaveTrace& trace, const TrainingTopology& topology);

struct NodeModule {
    NodeId id = 0;
    NodeRole role = NodeRole::relay;
    std::vector<DenseLayer> layers;

    std::size_t param_count() const;
};

enum class GateMode {
    sample,         // ε ~ N(0, I) from the node's noise stream
    frozen,         // ε supplied by the caller
    deterministic,  // ε = 0, the message is μ
};

/// Inputs of one mini-batch: observations per sensor (ordered like the
/// graph's data nodes) and a labels column.
struct Batch {
    std::vector<Tensor2> sensor_inputs;
    Tensor2 labels;
};

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& rows);
Batch make_batch(const Dataset& data);

struct ForwardResult {
    Tensor2 logits;
    /// Mean per-sample KL of each sensor's gate, ordered like data nodes.
    std::vector<double> sensor_kl;
    /// Σ over sensors of their mean KL (nats/sample).
    double rate = 0.0;
    /// ε used by each sensor, reusable with GateMode::frozen.
    std::vector<Tensor2> noise;
    WaveTrace trace;
};

/// Neural modules wired onto one training topology.
class InlNetwork {
public:
    /// Throws GraphError if the topology does not connect every data node to
    /// the fusion node; ShapeError if an active edge width differs from the
    /// message width. Parameters and noise streams derive from stream_base.
    InlNetwork(const NetworkGraph& graph, TrainingTopology topology, Architecture arch,
               std::uint64_t stream_base);

    const NetworkGraph& graph() const { return *graph_; }
    const TrainingTopology& topology() const { return topology_; }
    const Architecture& architecture() const { return arch_; }
    /// Nodes touched by the topology plus the fusion node, topological order.
    const std::vector<NodeId>& active_nodes() const { return order_; }
    bool is_active(NodeId v) const;
    const NodeModule& module(NodeId v) const;
    NodeModule& module(NodeId v);

    std::size_t count_params() const;
    std::vector<ParamRef> params();
    void zero_grad();

    /// `frozen_noise` is required for GateMode::frozen and ignored otherwise.
    ForwardResult forward_wave(const Batch& batch, GateMode mode,
                               const std::vector<Tensor2>* frozen_noise = nullptr);

    /// Propagates fusion_error (∂loss/∂logit) back over the active edges and
    /// accumulates parameter gradients of loss + rate_weight·rate. Appends
    /// one backward transmission per active edge to `trace`. Throws
    /// std::logic_error unless `trace` belongs to the latest forward pass.
    void backward_wave(const Tensor2& fusion_error, double rate_weight, WaveTrace& trace);

private:
    struct NodeCache {
        Tensor2 message;
        std::optional<GateState> gate;
    };

    Tensor2 run_module(NodeModule& m, const Tensor2& input);
    Tensor2 backprop_module(NodeModule& m, const Tensor2& upstream);
    std::size_t sensor_slot(NodeId v) const;

    const NetworkGraph* graph_;
    TrainingTopology topology_;
    Architecture arch_;
    std::vector<NodeId> order_;
    std::vector<std::optional<NodeModule>> modules_;
    std::vector<Rng> noise_streams_;  // one per data node
    std::vector<NodeCache> cache_;
    std::size_t cached_batch_ = 0;
    std::uint64_t next_pass_ = 1;
    std::uint64_t pending_pass_ = 0;
};

struct EvalMetrics {
    double accuracy = 0.0;  // percent
    double nll = 0.0;
    double rate = 0.0;      // nats/sample summed over sensors
};

/// Deterministic gate (μ only). Throws std::invalid_argument on empty data.
EvalMetrics evaluate(InlNetwork& net, const Dataset& data);

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 32;
    double rate_weight = 0.0;  // λ
    AdamConfig adam;
    std::uint64_t seed = 0;
    std::size_t eval_every = 5;
    std::size_t bits_per_scalar = 32;
    /// Restore the parameters with the lowest validation NLL seen at an
    /// evaluation epoch once training ends.
    bool keep_best_validation = true;
};

void validate(const TrainConfig& cfg);

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_nll = 0.0;
    double train_rate = 0.0;
    double train_objective = 0.0;
    std::optional<EvalMetrics> validation;
    std::uint64_t bits = 0;             // forward + backward traffic this epoch
    std::uint64_t cumulative_bits = 0;
};

/// Called after every optimizer step with that step's complete trace.
using StepObserver = std::function<void(const WaveTrace&)>;

/// Minimizes mean NLL + λ·rate with Adam over shuffled mini-batches.
/// Throws EngineError on a non-finite objective.
std::vector<EpochMetrics> train(InlNetwork& net, const Dataset& train_set, const Dataset* val_set,
                                const TrainConfig& cfg, const StepObserver& observer = {});

}  // namespace dinl
