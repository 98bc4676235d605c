#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polynet/linalg.hpp"

namespace polynet {

enum class NodeKind { input, sum, product, output };
enum class Activation { identity, tanh };

inline std::string to_string(NodeKind k) {
    switch (k) {
        case NodeKind::input: return "input";
        case NodeKind::sum: return "sum";
        case NodeKind::product: return "product";
        case NodeKind::output: return "output";
    }
    return "?";
}

inline std::string to_string(Activation a) {
    return a == Activation::identity ? "identity" : "tanh";
}

struct Node {
    NodeKind kind = NodeKind::sum;
    Activation activation = Activation::identity;
    bool has_bias = false;
    bool bias_trainable = false;
    double bias = 0.0;
};

struct Edge {
    int from = 0;
    int to = 0;
    double weight = 0.0;
    bool trainable = false;
    bool delayed = false;
    int multiplicity = 1;
};

// One scalar slot a registry parameter writes to: an edge weight or a node bias,
// scaled by a fixed multiplier (weight = multiplier * theta).
struct ParamRef {
    bool is_bias = false;
    int index = 0;  // edge index or node index
    double multiplier = 1.0;
};

struct Param {
    std::string name;
    double value = 0.0;
    std::vector<ParamRef> refs;
};

// Feedforward circuit with additive and multiplicative nodes. Node ids are
// positions in `nodes` and must already be topologically ordered over the
// non-delayed edges (checked in finalize). Delayed edges read their source's
// value from the previous discrete step and are only used by stepper circuits.
struct NeuralCircuit {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<int> inputs;
    std::vector<int> outputs;
    std::vector<Param> params;

    // Built by finalize().
    std::vector<std::vector<int>> incoming;  // per node, edge indices in insertion order
    std::vector<int> delayed_slot;           // per edge, state slot or -1
    int state_size = 0;
    bool finalized = false;

    std::size_t n_in() const { return inputs.size(); }
    std::size_t n_out() const { return outputs.size(); }

    void finalize() {
        const int nn = static_cast<int>(nodes.size());
        incoming.assign(nodes.size(), {});
        delayed_slot.assign(edges.size(), -1);
        state_size = 0;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const Edge& ed = edges[e];
            if (ed.from < 0 || ed.from >= nn || ed.to < 0 || ed.to >= nn)
                throw std::invalid_argument("circuit: edge endpoint out of range");
            if (ed.multiplicity < 1)
                throw std::invalid_argument("circuit: edge multiplicity must be >= 1");
            if (!ed.delayed && ed.from >= ed.to)
                throw std::invalid_argument("circuit: non-delayed edges must go forward in id order");
            if (ed.delayed) delayed_slot[e] = state_size++;
            incoming[static_cast<std::size_t>(ed.to)].push_back(static_cast<int>(e));
        }
        for (std::size_t v = 0; v < nodes.size(); ++v) {
            if (nodes[v].kind == NodeKind::input && !incoming[v].empty())
                throw std::invalid_argument("circuit: input node has incoming edges");
            if (nodes[v].kind == NodeKind::product &&
                (nodes[v].has_bias || nodes[v].activation != Activation::identity))
                throw std::invalid_argument("circuit: product nodes take no bias and identity activation");
        }
        finalized = true;
    }
};

inline int count_parameters(const NeuralCircuit& c) { return static_cast<int>(c.params.size()); }

inline std::vector<double> get_parameters(const NeuralCircuit& c) {
    std::vector<double> theta(c.params.size());
    for (std::size_t q = 0; q < c.params.size(); ++q) theta[q] = c.params[q].value;
    return theta;
}

inline void set_parameters(NeuralCircuit& c, const std::vector<double>& theta) {
    if (theta.size() != c.params.size())
        throw std::invalid_argument("set_parameters: wrong parameter count");
    for (std::size_t q = 0; q < c.params.size(); ++q) {
        c.params[q].value = theta[q];
        for (const ParamRef& r : c.params[q].refs) {
            double v = r.multiplier * theta[q];
            if (r.is_bias)
                c.nodes[static_cast<std::size_t>(r.index)].bias = v;
            else
                c.edges[static_cast<std::size_t>(r.index)].weight = v;
        }
    }
}

// Registry construction for circuits without tying: one parameter per trainable
// edge in edge-array order, then one per trainable bias in node-id order.
inline void build_plain_registry(NeuralCircuit& c) {
    c.params.clear();
    for (std::size_t e = 0; e < c.edges.size(); ++e)
        if (c.edges[e].trainable)
            c.params.push_back({"", c.edges[e].weight, {{false, static_cast<int>(e), 1.0}}});
    for (std::size_t v = 0; v < c.nodes.size(); ++v)
        if (c.nodes[v].has_bias && c.nodes[v].bias_trainable)
            c.params.push_back({"", c.nodes[v].bias, {{true, static_cast<int>(v), 1.0}}});
}

namespace detail {

// Values of every node in id order. prev_state may be null only when the
// circuit has no delayed edges. Accumulation order is pinned: sum nodes start
// from the bias and add weight*source per edge application in insertion order;
// product nodes start from 1 and multiply (weight*source) per application.
inline void forward_values(const NeuralCircuit& c, const std::vector<double>& x,
                           const std::vector<double>* prev_state, std::vector<double>& vals) {
    if (!c.finalized) throw std::logic_error("circuit not finalized");
    if (x.size() != c.n_in()) throw std::invalid_argument("forward: input dimension mismatch");
    if (c.state_size > 0 &&
        (!prev_state || prev_state->size() != static_cast<std::size_t>(c.state_size)))
        throw std::invalid_argument("forward: circuit has delayed edges, prev_state required");
    vals.assign(c.nodes.size(), 0.0);
    for (std::size_t i = 0; i < c.inputs.size(); ++i)
        vals[static_cast<std::size_t>(c.inputs[i])] = x[i];
    for (std::size_t v = 0; v < c.nodes.size(); ++v) {
        const Node& nd = c.nodes[v];
        if (nd.kind == NodeKind::input) continue;
        double acc;
        if (nd.kind == NodeKind::product) {
            acc = 1.0;
            for (int ei : c.incoming[v]) {
                const Edge& ed = c.edges[static_cast<std::size_t>(ei)];
                double src =
                    ed.delayed
                        ? (*prev_state)[static_cast<std::size_t>(c.delayed_slot[static_cast<std::size_t>(ei)])]
                        : vals[static_cast<std::size_t>(ed.from)];
                for (int t = 0; t < ed.multiplicity; ++t) acc *= ed.weight * src;
            }
        } else {
            acc = nd.has_bias ? nd.bias : 0.0;
            for (int ei : c.incoming[v]) {
                const Edge& ed = c.edges[static_cast<std::size_t>(ei)];
                double src =
                    ed.delayed
                        ? (*prev_state)[static_cast<std::size_t>(c.delayed_slot[static_cast<std::size_t>(ei)])]
                        : vals[static_cast<std::size_t>(ed.from)];
                for (int t = 0; t < ed.multiplicity; ++t) acc += ed.weight * src;
            }
        }
        if (nd.activation == Activation::tanh) acc = std::tanh(acc);
        vals[v] = acc;
    }
}

}  // namespace detail

struct ForwardResult {
    std::vector<double> y;
    std::vector<double> state;
};

inline ForwardResult forward(const NeuralCircuit& c, const std::vector<double>& x,
                             const std::vector<double>* prev_state = nullptr) {
    std::vector<double> vals;
    detail::forward_values(c, x, prev_state, vals);
    ForwardResult r;
    r.y.resize(c.n_out());
    for (std::size_t i = 0; i < c.outputs.size(); ++i)
        r.y[i] = vals[static_cast<std::size_t>(c.outputs[i])];
    r.state.resize(static_cast<std::size_t>(c.state_size));
    for (std::size_t e = 0; e < c.edges.size(); ++e)
        if (c.delayed_slot[e] >= 0)
            r.state[static_cast<std::size_t>(c.delayed_slot[e])] =
                vals[static_cast<std::size_t>(c.edges[e].from)];
    return r;
}

inline std::vector<double> forward_map(const NeuralCircuit& c, const std::vector<double>& x) {
    return forward(c, x).y;
}

// d(output_i)/d(param_q) by reverse-mode accumulation; requires a pure
// feedforward circuit (no delayed edges). Product-node partials are formed from
// prefix/suffix products over the expanded factor list, never by division.
inline Matrix parameter_jacobian(const NeuralCircuit& c, const std::vector<double>& x) {
    if (!c.finalized) throw std::logic_error("circuit not finalized");
    if (c.state_size > 0)
        throw std::invalid_argument("parameter_jacobian: circuit has delayed edges");
    std::vector<double> vals;
    detail::forward_values(c, x, nullptr, vals);

    Matrix j(c.n_out(), c.params.size());
    std::vector<double> adj(c.nodes.size());
    std::vector<double> gw(c.edges.size());
    std::vector<double> gb(c.nodes.size());
    std::vector<double> factors, prefix, suffix;
    std::vector<std::pair<int, double>> factor_src;  // (edge index, source value)

    for (std::size_t o = 0; o < c.outputs.size(); ++o) {
        std::fill(adj.begin(), adj.end(), 0.0);
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        adj[static_cast<std::size_t>(c.outputs[o])] = 1.0;

        for (std::size_t v = c.nodes.size(); v-- > 0;) {
            double a = adj[v];
            if (a == 0.0) continue;
            const Node& nd = c.nodes[v];
            if (nd.kind == NodeKind::input) continue;
            if (nd.activation == Activation::tanh) a *= 1.0 - vals[v] * vals[v];
            if (nd.kind == NodeKind::product) {
                factors.clear();
                factor_src.clear();
                for (int ei : c.incoming[v]) {
                    const Edge& ed = c.edges[static_cast<std::size_t>(ei)];
                    double src = vals[static_cast<std::size_t>(ed.from)];
                    for (int t = 0; t < ed.multiplicity; ++t) {
                        factors.push_back(ed.weight * src);
                        factor_src.push_back({ei, src});
                    }
                }
                const std::size_t k = factors.size();
                prefix.assign(k + 1, 1.0);
                suffix.assign(k + 1, 1.0);
                for (std::size_t t = 0; t < k; ++t) prefix[t + 1] = prefix[t] * factors[t];
                for (std::size_t t = k; t-- > 0;) suffix[t] = suffix[t + 1] * factors[t];
                for (std::size_t t = 0; t < k; ++t) {
                    const Edge& ed = c.edges[static_cast<std::size_t>(factor_src[t].first)];
                    double rest = a * prefix[t] * suffix[t + 1];
                    gw[static_cast<std::size_t>(factor_src[t].first)] += rest * factor_src[t].second;
                    adj[static_cast<std::size_t>(ed.from)] += rest * ed.weight;
                }
            } else {
                if (nd.has_bias) gb[v] += a;
                for (int ei : c.incoming[v]) {
                    const Edge& ed = c.edges[static_cast<std::size_t>(ei)];
                    double src = vals[static_cast<std::size_t>(ed.from)];
                    gw[static_cast<std::size_t>(ei)] += a * src * ed.multiplicity;
                    adj[static_cast<std::size_t>(ed.from)] += a * ed.weight * ed.multiplicity;
                }
            }
        }
        for (std::size_t q = 0; q < c.params.size(); ++q) {
            double g = 0.0;
            for (const ParamRef& r : c.params[q].refs)
                g += r.multiplier *
                     (r.is_bias ? gb[static_cast<std::size_t>(r.index)]
                                : gw[static_cast<std::size_t>(r.index)]);
            j(o, q) = g;
        }
    }
    return j;
}

// Single-hidden-layer "conventional network": dense input->hidden and
// hidden->output layers, trainable biases on both, optional direct input->output
// skip connections. Registry order: W1 row-major, W2 row-major, skip row-major,
// hidden biases, output biases.
inline NeuralCircuit make_cn(int n, int h, Activation activation, bool with_skip) {
    if (n < 1 || h < 0) throw std::invalid_argument("make_cn: need n>=1, h>=0");
    NeuralCircuit c;
    for (int j = 0; j < n; ++j) c.nodes.push_back({NodeKind::input, Activation::identity, false, false, 0.0});
    for (int i = 0; i < h; ++i) c.nodes.push_back({NodeKind::sum, activation, true, true, 0.0});
    for (int i = 0; i < n; ++i) c.nodes.push_back({NodeKind::output, Activation::identity, true, true, 0.0});
    for (int j = 0; j < n; ++j) c.inputs.push_back(j);
    for (int i = 0; i < n; ++i) c.outputs.push_back(n + h + i);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < n; ++j) c.edges.push_back({j, n + i, 0.0, true, false, 1});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < h; ++k) c.edges.push_back({n + k, n + h + i, 0.0, true, false, 1});
    if (with_skip)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) c.edges.push_back({j, n + h + i, 0.0, true, false, 1});
    build_plain_registry(c);
    c.finalize();
    return c;
}

// ---------------------------------------------------------------------------
// JSON serialization. Plain (untied) circuits carry only per-edge trainable
// flags and the registry is reconstructed by the canonical scan; circuits with
// shared or scaled parameters additionally carry an explicit params section so
// the registry round-trips losslessly.
// ---------------------------------------------------------------------------

namespace detail {

inline bool has_plain_registry(const NeuralCircuit& c) {
    NeuralCircuit scan;
    scan.nodes = c.nodes;
    scan.edges = c.edges;
    build_plain_registry(scan);
    if (scan.params.size() != c.params.size()) return false;
    for (std::size_t q = 0; q < c.params.size(); ++q) {
        const Param& p = c.params[q];
        if (!p.name.empty() || p.refs.size() != 1) return false;
        if (p.refs[0].multiplier != 1.0) return false;
        if (p.refs[0].is_bias != scan.params[q].refs[0].is_bias) return false;
        if (p.refs[0].index != scan.params[q].refs[0].index) return false;
    }
    return true;
}

}  // namespace detail

inline nlohmann::ordered_json circuit_to_json(const NeuralCircuit& c) {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (std::size_t v = 0; v < c.nodes.size(); ++v) {
        const Node& nd = c.nodes[v];
        nlohmann::ordered_json jn;
        jn["id"] = static_cast<int>(v);
        jn["kind"] = to_string(nd.kind);
        jn["activation"] = to_string(nd.activation);
        if (nd.has_bias) {
            jn["bias"] = nd.bias;
            jn["bias_trainable"] = nd.bias_trainable;
        }
        nodes.push_back(jn);
    }
    doc["nodes"] = nodes;
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const Edge& ed : c.edges) {
        nlohmann::ordered_json je;
        je["from"] = ed.from;
        je["to"] = ed.to;
        je["weight"] = ed.weight;
        je["trainable"] = ed.trainable;
        je["delayed"] = ed.delayed;
        je["multiplicity"] = ed.multiplicity;
        edges.push_back(je);
    }
    doc["edges"] = edges;
    doc["inputs"] = c.inputs;
    doc["outputs"] = c.outputs;
    if (!detail::has_plain_registry(c)) {
        nlohmann::ordered_json params = nlohmann::ordered_json::array();
        for (const Param& p : c.params) {
            nlohmann::ordered_json jp;
            jp["name"] = p.name;
            jp["value"] = p.value;
            nlohmann::ordered_json refs = nlohmann::ordered_json::array();
            for (const ParamRef& r : p.refs) {
                nlohmann::ordered_json jr;
                jr["kind"] = r.is_bias ? "bias" : "weight";
                jr["index"] = r.index;
                jr["multiplier"] = r.multiplier;
                refs.push_back(jr);
            }
            jp["bindings"] = refs;
            params.push_back(jp);
        }
        doc["params"] = params;
    }
    return doc;
}

inline NeuralCircuit circuit_from_json(const nlohmann::json& doc) {
    NeuralCircuit c;
    const auto& jnodes = doc.at("nodes");
    c.nodes.resize(jnodes.size());
    for (const auto& jn : jnodes) {
        int id = jn.at("id").get<int>();
        if (id < 0 || static_cast<std::size_t>(id) >= c.nodes.size())
            throw std::invalid_argument("circuit_from_json: node ids must be 0..N-1");
        Node nd;
        std::string kind = jn.at("kind").get<std::string>();
        if (kind == "input") nd.kind = NodeKind::input;
        else if (kind == "sum") nd.kind = NodeKind::sum;
        else if (kind == "product") nd.kind = NodeKind::product;
        else if (kind == "output") nd.kind = NodeKind::output;
        else throw std::invalid_argument("circuit_from_json: unknown node kind " + kind);
        std::string act = jn.at("activation").get<std::string>();
        if (act == "identity") nd.activation = Activation::identity;
        else if (act == "tanh") nd.activation = Activation::tanh;
        else throw std::invalid_argument("circuit_from_json: unknown activation " + act);
        if (jn.contains("bias")) {
            nd.has_bias = true;
            nd.bias = jn.at("bias").get<double>();
            nd.bias_trainable = jn.value("bias_trainable", true);
        }
        c.nodes[static_cast<std::size_t>(id)] = nd;
    }
    for (const auto& je : doc.at("edges")) {
        Edge ed;
        ed.from = je.at("from").get<int>();
        ed.to = je.at("to").get<int>();
        ed.weight = je.at("weight").get<double>();
        ed.trainable = je.value("trainable", false);
        ed.delayed = je.value("delayed", false);
        ed.multiplicity = je.value("multiplicity", 1);
        c.edges.push_back(ed);
    }
    c.inputs = doc.at("inputs").get<std::vector<int>>();
    c.outputs = doc.at("outputs").get<std::vector<int>>();
    if (doc.contains("params")) {
        for (const auto& jp : doc.at("params")) {
            Param p;
            p.name = jp.at("name").get<std::string>();
            p.value = jp.at("value").get<double>();
            for (const auto& jr : jp.at("bindings")) {
                ParamRef r;
                std::string kind = jr.at("kind").get<std::string>();
                if (kind == "bias") r.is_bias = true;
                else if (kind == "weight") r.is_bias = false;
                else throw std::invalid_argument("circuit_from_json: unknown binding kind");
                r.index = jr.at("index").get<int>();
                r.multiplier = jr.at("multiplier").get<double>();
                p.refs.push_back(r);
            }
            c.params.push_back(p);
        }
    } else {
        build_plain_registry(c);
    }
    c.finalize();
    return c;
}

}  // namespace polynet
