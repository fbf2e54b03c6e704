#pragma once

// Candidate communication graph, edge costs, reverse-Dijkstra shortest-path
// tree and training-exchange accounting.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dinl {

using NodeId = std::size_t;

enum class NodeRole { sensor, relay, fusion };

std::string_view to_string(NodeRole role);
NodeRole parse_node_role(std::string_view text);

struct EdgeAttr {
    double capacity = 1.0;     // abstract rate units, > 0
    double latency = 0.0;      // >= 0
    double reliability = 1.0;  // in [0, 1]
    std::size_t width = 1;     // real scalars per message, >= 1
};

struct Edge {
    NodeId from = 0;
    NodeId to = 0;
    EdgeAttr attr;
};

struct CostWeights {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 0.0;
    double epsilon = 1e-9;
    std::size_t bits_per_scalar = 32;
};

/// Raised when a graph, topology or cost configuration breaks a structural
/// invariant (cycle, unreachable data node, out-of-range attribute, ...).
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by parse_graph_spec for malformed topology documents. The message
/// carries the line (for syntax errors) or the JSON field path.
class GraphParseError : public GraphError {
public:
    using GraphError::GraphError;
};

void validate(const EdgeAttr& attr);
void validate(const CostWeights& w);

/// Immutable DAG with exactly one fusion node. Sensors are pure sources and
/// the fusion node is a pure sink; every sensor reaches the fusion node.
class NetworkGraph {
public:
    NetworkGraph(std::vector<NodeRole> roles, std::vector<Edge> edges);

    std::size_t node_count() const { return roles_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    NodeRole role(NodeId v) const { return roles_.at(v); }
    std::span<const NodeRole> roles() const { return roles_; }
    std::span<const Edge> edges() const { return edges_; }
    const Edge& edge(std::size_t index) const { return edges_.at(index); }
    NodeId fusion() const { return fusion_; }
    /// Data nodes (sensors), ascending id.
    std::span<const NodeId> data_nodes() const { return data_nodes_; }
    /// Edge index of (from, to), if present.
    std::optional<std::size_t> find_edge(NodeId from, NodeId to) const;
    /// Edge indices leaving v, ordered by destination id.
    std::span<const std::size_t> out_edges(NodeId v) const { return out_.at(v); }
    std::span<const std::size_t> in_edges(NodeId v) const { return in_.at(v); }
    /// Nodes in a topological order (ties broken by ascending id).
    std::span<const NodeId> topological_order() const { return topo_; }

private:
    std::vector<NodeRole> roles_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> out_;
    std::vector<std::vector<std::size_t>> in_;
    std::vector<NodeId> data_nodes_;
    std::vector<NodeId> topo_;
    NodeId fusion_ = 0;
};

/// ω_e = α·s·d_e/(C_e+ε) + β·τ_e + γ·(1−ρ_e)
double edge_cost(const EdgeAttr& attr, const CostWeights& w);

std::vector<double> edge_costs(const NetworkGraph& g, const CostWeights& w);

struct ShortestPaths {
    std::vector<double> distance;                 // +inf when v cannot reach r
    std::vector<std::optional<NodeId>> next_hop;  // toward r
    std::vector<std::optional<std::size_t>> next_edge;
};

/// Dijkstra on the reversed graph from the fusion node. Equal-cost
/// alternatives resolve to the lowest next-hop id. Throws GraphError if a
/// data node cannot reach the fusion node.
ShortestPaths reverse_dijkstra(const NetworkGraph& g, const CostWeights& w);

/// Active edge subset of a graph together with its parent/child adjacency.
class TrainingTopology {
public:
    TrainingTopology() = default;
    /// Edge indices refer to g.edges(); duplicates are collapsed. Throws
    /// GraphError for out-of-range indices.
    TrainingTopology(const NetworkGraph& g, std::vector<std::size_t> edge_indices);

    std::size_t size() const { return edges_.size(); }
    bool empty() const { return edges_.empty(); }
    /// Sorted graph edge indices.
    std::span<const std::size_t> edge_indices() const { return indices_; }
    /// Active edges, ordered like edge_indices().
    std::span<const Edge> edges() const { return edges_; }
    bool contains(NodeId from, NodeId to) const;
    std::span<const NodeId> parents(NodeId v) const { return parents_.at(v); }
    std::span<const NodeId> children(NodeId v) const { return children_.at(v); }
    std::size_t node_count() const { return parents_.size(); }
    /// Total message width Σ d_e over the active set.
    std::size_t total_width() const;
    /// True if every data node of g has a directed path to r inside the set.
    bool connects_data_nodes(const NetworkGraph& g) const;

private:
    std::vector<std::size_t> indices_;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeId>> parents_;
    std::vector<std::vector<NodeId>> children_;
};

/// Union over data nodes of their reverse-Dijkstra next-hop paths.
TrainingTopology build_spt(const NetworkGraph& g, const CostWeights& w);

/// All edges terminating at a relay or the fusion node.
TrainingTopology full_topology(const NetworkGraph& g);

/// B_T = 2·s·q·Σ_{e∈T} d_e
std::uint64_t exchange_bits(const TrainingTopology& t, std::size_t bits_per_scalar,
                            std::size_t samples_per_epoch);

/// Σ_sparse d_e / Σ_dense d_e. Throws GraphError when dense carries no width.
double reduction_ratio(const TrainingTopology& sparse, const TrainingTopology& dense);

/// G_B = 1 − reduction_ratio(sparse, dense)
double exchange_gain(const TrainingTopology& sparse, const TrainingTopology& dense);

struct GraphSpec {
    NetworkGraph graph;
    CostWeights weights;
};

/// Parses the JSON topology document (nodes / edges / cost_weights).
GraphSpec parse_graph_spec(std::string_view text);
GraphSpec load_graph_spec(const std::string& path);

}  // namespace dinl
