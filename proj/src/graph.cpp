#include "dinl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace dinl {

namespace {

std::string edge_name(NodeId from, NodeId to) {
    return "(" + std::to_string(from) + "," + std::to_string(to) + ")";
}

}  // namespace

std::string_view to_string(NodeRole role) {
    switch (role) {
    case NodeRole::sensor: return "sensor";
    case NodeRole::relay: return "relay";
    case NodeRole::fusion: return "fusion";
    }
    return "unknown";
}

NodeRole parse_node_role(std::string_view text) {
    if (text == "sensor") return NodeRole::sensor;
    if (text == "relay") return NodeRole::relay;
    if (text == "fusion") return NodeRole::fusion;
    throw GraphParseError("unknown node role '" + std::string(text) + "'");
}

void validate(const EdgeAttr& attr) {
    if (!(attr.capacity > 0.0) || !std::isfinite(attr.capacity))
        throw GraphError("capacity must be finite and > 0");
    if (!(attr.latency >= 0.0) || !std::isfinite(attr.latency))
        throw GraphError("latency must be finite and >= 0");
    if (!(attr.reliability >= 0.0 && attr.reliability <= 1.0))
        throw GraphError("reliability must lie in [0, 1]");
    if (attr.width < 1) throw GraphError("width must be >= 1");
}

void validate(const CostWeights& w) {
    if (!(w.alpha >= 0.0) || !(w.beta >= 0.0) || !(w.gamma >= 0.0))
        throw GraphError("cost weights alpha, beta, gamma must be >= 0");
    if (!(w.epsilon > 0.0)) throw GraphError("cost epsilon must be > 0");
    if (w.bits_per_scalar < 1) throw GraphError("bits_per_scalar must be >= 1");
}

// ---------------------------------------------------------------------------
// NetworkGraph

NetworkGraph::NetworkGraph(std::vector<NodeRole> roles, std::vector<Edge> edges)
    : roles_(std::move(roles)), edges_(std::move(edges)) {
    const std::size_t n = roles_.size();
    if (n == 0) throw GraphError("graph has no nodes");

    std::size_t fusion_count = 0;
    for (NodeId v = 0; v < n; ++v) {
        if (roles_[v] == NodeRole::fusion) {
            fusion_ = v;
            ++fusion_count;
        } else if (roles_[v] == NodeRole::sensor) {
            data_nodes_.push_back(v);
        }
    }
    if (fusion_count != 1)
        throw GraphError("graph must contain exactly one fusion node, found " +
                         std::to_string(fusion_count));

    out_.assign(n, {});
    in_.assign(n, {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        if (e.from >= n || e.to >= n)
            throw GraphError("edge " + edge_name(e.from, e.to) + " references a missing node");
        if (e.from == e.to) throw GraphError("self-loop on node " + std::to_string(e.from));
        try {
            validate(e.attr);
        } catch (const GraphError& err) {
            throw GraphError("edge " + edge_name(e.from, e.to) + ": " + err.what());
        }
        if (roles_[e.to] == NodeRole::sensor)
            throw GraphError("edge " + edge_name(e.from, e.to) +
                             " enters a sensor; sensors are data sources only");
        if (roles_[e.from] == NodeRole::fusion)
            throw GraphError("edge " + edge_name(e.from, e.to) + " leaves the fusion node");
        out_[e.from].push_back(i);
        in_[e.to].push_back(i);
    }
    auto by_to = [this](std::size_t a, std::size_t b) { return edges_[a].to < edges_[b].to; };
    auto by_from = [this](std::size_t a, std::size_t b) { return edges_[a].from < edges_[b].from; };
    for (NodeId v = 0; v < n; ++v) {
        std::sort(out_[v].begin(), out_[v].end(), by_to);
        std::sort(in_[v].begin(), in_[v].end(), by_from);
        for (std::size_t k = 1; k < out_[v].size(); ++k)
            if (edges_[out_[v][k]].to == edges_[out_[v][k - 1]].to)
                throw GraphError("duplicate edge " + edge_name(v, edges_[out_[v][k]].to));
    }

    // Kahn's algorithm; smallest ready id first keeps the order deterministic.
    std::vector<std::size_t> indegree(n, 0);
    for (const Edge& e : edges_) ++indegree[e.to];
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (NodeId v = 0; v < n; ++v)
        if (indegree[v] == 0) ready.push(v);
    while (!ready.empty()) {
        const NodeId v = ready.top();
        ready.pop();
        topo_.push_back(v);
        for (std::size_t i : out_[v])
            if (--indegree[edges_[i].to] == 0) ready.push(edges_[i].to);
    }
    if (topo_.size() != n) throw GraphError("graph contains a directed cycle");

    std::vector<bool> reaches(n, false);
    reaches[fusion_] = true;
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it)
        for (std::size_t i : out_[*it])
            if (reaches[edges_[i].to]) reaches[*it] = true;
    for (NodeId j : data_nodes_)
        if (!reaches[j])
            throw GraphError("data node " + std::to_string(j) + " has no path to the fusion node");
}

std::optional<std::size_t> NetworkGraph::find_edge(NodeId from, NodeId to) const {
    if (from >= node_count()) return std::nullopt;
    for (std::size_t i : out_[from])
        if (edges_[i].to == to) return i;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// costs and shortest paths

double edge_cost(const EdgeAttr& attr, const CostWeights& w) {
    const double transfer = static_cast<double>(w.bits_per_scalar) *
                            static_cast<double>(attr.width) / (attr.capacity + w.epsilon);
    return w.alpha * transfer + w.beta * attr.latency + w.gamma * (1.0 - attr.reliability);
}

std::vector<double> edge_costs(const NetworkGraph& g, const CostWeights& w) {
    validate(w);
    std::vector<double> costs;
    costs.reserve(g.edge_count());
    for (const Edge& e : g.edges()) costs.push_back(edge_cost(e.attr, w));
    return costs;
}

ShortestPaths reverse_dijkstra(const NetworkGraph& g, const CostWeights& w) {
    const std::size_t n = g.node_count();
    const std::vector<double> cost = edge_costs(g, w);
    constexpr double inf = std::numeric_limits<double>::infinity();

    ShortestPaths sp;
    sp.distance.assign(n, inf);
    sp.next_hop.assign(n, std::nullopt);
    sp.next_edge.assign(n, std::nullopt);

    using Entry = std::pair<double, NodeId>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
    std::vector<bool> settled(n, false);
    sp.distance[g.fusion()] = 0.0;
    frontier.emplace(0.0, g.fusion());

    while (!frontier.empty()) {
        const auto [dist, u] = frontier.top();
        frontier.pop();
        if (settled[u]) continue;
        settled[u] = true;
        // Reverse graph: relax every edge (v, u) entering u.
        for (std::size_t i : g.in_edges(u)) {
            const NodeId v = g.edge(i).from;
            if (settled[v]) continue;
            const double candidate = dist + cost[i];
            const bool better = candidate < sp.distance[v];
            const bool tie = candidate == sp.distance[v] && sp.next_hop[v] && u < *sp.next_hop[v];
            if (better || tie) {
                sp.distance[v] = candidate;
                sp.next_hop[v] = u;
                sp.next_edge[v] = i;
                if (better) frontier.emplace(candidate, v);
            }
        }
    }

    for (NodeId j : g.data_nodes())
        if (sp.distance[j] == inf)
            throw GraphError("data node " + std::to_string(j) + " is unreachable from the fusion node");
    return sp;
}

// ---------------------------------------------------------------------------
// TrainingTopology

TrainingTopology::TrainingTopology(const NetworkGraph& g, std::vector<std::size_t> edge_indices)
    : indices_(std::move(edge_indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
    parents_.assign(g.node_count(), {});
    children_.assign(g.node_count(), {});
    edges_.reserve(indices_.size());
    for (std::size_t i : indices_) {
        if (i >= g.edge_count())
            throw GraphError("topology references edge index " + std::to_string(i) +
                             " outside the graph");
        const Edge& e = g.edge(i);
        edges_.push_back(e);
        parents_[e.to].push_back(e.from);
        children_[e.from].push_back(e.to);
    }
    for (auto& p : parents_) std::sort(p.begin(), p.end());
    for (auto& c : children_) std::sort(c.begin(), c.end());
}

bool TrainingTopology::contains(NodeId from, NodeId to) const {
    if (from >= children_.size()) return false;
    const auto& c = children_[from];
    return std::binary_search(c.begin(), c.end(), to);
}

std::size_t TrainingTopology::total_width() const {
    std::size_t total = 0;
    for (const Edge& e : edges_) total += e.attr.width;
    return total;
}

bool TrainingTopology::connects_data_nodes(const NetworkGraph& g) const {
    if (node_count() != g.node_count()) return false;
    std::vector<bool> reaches(g.node_count(), false);
    reaches[g.fusion()] = true;
    std::vector<NodeId> stack{g.fusion()};
    while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        for (NodeId p : parents_[u])
            if (!reaches[p]) {
                reaches[p] = true;
                stack.push_back(p);
            }
    }
    return std::all_of(g.data_nodes().begin(), g.data_nodes().end(),
                       [&](NodeId j) { return reaches[j]; });
}

TrainingTopology build_spt(const NetworkGraph& g, const CostWeights& w) {
    const ShortestPaths sp = reverse_dijkstra(g, w);
    std::vector<std::size_t> selected;
    for (NodeId j : g.data_nodes()) {
        NodeId v = j;
        while (v != g.fusion()) {
            selected.push_back(*sp.next_edge[v]);
            v = *sp.next_hop[v];
        }
    }
    return TrainingTopology(g, std::move(selected));
}

TrainingTopology full_topology(const NetworkGraph& g) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
        const NodeRole dst = g.role(g.edge(i).to);
        if (dst == NodeRole::relay || dst == NodeRole::fusion) active.push_back(i);
    }
    return TrainingTopology(g, std::move(active));
}

std::uint64_t exchange_bits(const TrainingTopology& t, std::size_t bits_per_scalar,
                            std::size_t samples_per_epoch) {
    return 2ULL * bits_per_scalar * samples_per_epoch * t.total_width();
}

double reduction_ratio(const TrainingTopology& sparse, const TrainingTopology& dense) {
    const std::size_t denom = dense.total_width();
    if (denom == 0) throw GraphError("dense topology carries zero total width");
    return static_cast<double>(sparse.total_width()) / static_cast<double>(denom);
}

double exchange_gain(const TrainingTopology& sparse, const TrainingTopology& dense) {
    return 1.0 - reduction_ratio(sparse, dense);
}

// ---------------------------------------------------------------------------
// topology documents

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) throw GraphParseError(where + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw GraphParseError(where + "." + key + ": missing field");
    return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number()) throw GraphParseError(where + "." + key + ": expected a number");
    return v.get<double>();
}

std::size_t count(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw GraphParseError(where + "." + key + ": expected a nonnegative integer");
    return v.get<std::size_t>();
}

std::size_t line_of(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

GraphSpec parse_graph_spec(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& err) {
        throw GraphParseError("line " + std::to_string(line_of(text, err.byte)) +
                              ": malformed JSON (" + err.what() + ")");
    }

    const json& nodes = require(doc, "nodes", "topology");
    if (!nodes.is_array() || nodes.empty())
        throw GraphParseError("topology.nodes: expected a nonempty array");
    std::vector<std::optional<NodeRole>> slots(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const std::string where = "nodes[" + std::to_string(k) + "]";
        const std::size_t id = count(nodes[k], "id", where);
        if (id >= nodes.size())
            throw GraphParseError(where + ".id: ids must be 0.." + std::to_string(nodes.size() - 1));
        if (slots[id]) throw GraphParseError(where + ".id: duplicate id " + std::to_string(id));
        const json& role = require(nodes[k], "role", where);
        if (!role.is_string()) throw GraphParseError(where + ".role: expected a string");
        try {
            slots[id] = parse_node_role(role.get<std::string>());
        } catch (const GraphParseError& err) {
            throw GraphParseError(where + ".role: " + err.what());
        }
    }
    std::vector<NodeRole> roles;
    roles.reserve(slots.size());
    for (const auto& r : slots) roles.push_back(*r);

    const json& edge_list = require(doc, "edges", "topology");
    if (!edge_list.is_array()) throw GraphParseError("topology.edges: expected an array");
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < edge_list.size(); ++k) {
        const std::string where = "edges[" + std::to_string(k) + "]";
        const json& e = edge_list[k];
        Edge edge;
        edge.from = count(e, "from", where);
        edge.to = count(e, "to", where);
        edge.attr.capacity = number(e, "capacity", where);
        edge.attr.latency = number(e, "latency", where);
        edge.attr.reliability = number(e, "reliability", where);
        edge.attr.width = count(e, "width", where);
        try {
            validate(edge.attr);
        } catch (const GraphError& err) {
            throw GraphError(where + ": " + err.what());
        }
        edges.push_back(edge);
    }

    const json& cw = require(doc, "cost_weights", "topology");
    CostWeights weights;
    weights.alpha = number(cw, "alpha", "cost_weights");
    weights.beta = number(cw, "beta", "cost_weights");
    weights.gamma = number(cw, "gamma", "cost_weights");
    weights.epsilon = number(cw, "epsilon", "cost_weights");
    weights.bits_per_scalar = count(cw, "bits_per_scalar", "cost_weights");
    validate(weights);

    return GraphSpec{NetworkGraph(std::move(roles), std::move(edges)), weights};
}

GraphSpec load_graph_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GraphError("cannot open topology file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_graph_spec(buf.str());
    } catch (const GraphParseError& err) {
        throw GraphParseError(path + ": " + err.what());
    } catch (const GraphError& err) {
        throw GraphError(path + ": " + err.what());
    }
}

}  // namespace dinl
