#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "polynet/circuit.hpp"
#include "polynet/polysys.hpp"

namespace polynet {

// Hidden-layer size of the full PolyNet: one product node per monomial of
// degree >= 2, i.e. C(n+d,d) - n - 1, clamped at zero for linear systems.
inline int polynet_size(int n, int d) {
    if (n < 1 || d < 0) throw std::invalid_argument("polynet_size: need n>=1, d>=0");
    long long c = static_cast<long long>(binom(static_cast<unsigned>(n + d), static_cast<unsigned>(d)));
    long long h = c - n - 1;
    return h > 0 ? static_cast<int>(h) : 0;
}

struct PolyNet {
    NeuralCircuit circuit;
    PolynomialSystem source;
    int hidden_count = 0;
};

// Exact circuit for a polynomial vector field. Degree-0 terms become output
// biases, degree-1 terms direct input->output edges, and each degree>=2
// monomial a product node fed by fixed unit edges whose multiplicity is the
// exponent; the coefficients live on the output side. With full=false only
// monomials that are used somewhere (nonzero or parameter-bound) get nodes and
// edges. Tied systems put exactly theta in the registry; untied systems train
// every output-side coefficient.
inline PolyNet compile_polynet(const PolynomialSystem& s, bool full) {
    const int n = s.n;
    const std::size_t m = s.m();

    std::map<std::pair<int, int>, const Binding*> bound;
    for (const Binding& b : s.bindings) bound[{b.row, b.col}] = &b;
    auto cell_used = [&](int row, int col) {
        return s.alpha(static_cast<std::size_t>(row), static_cast<std::size_t>(col)) != 0.0 ||
               bound.count({row, col}) > 0;
    };

    // Pick hidden monomials (degree >= 2) in monomial order.
    std::vector<int> hidden_cols;
    std::map<int, int> hidden_node;  // monomial column -> node id
    for (std::size_t k = 0; k < m; ++k) {
        int deg = 0;
        for (int e : s.monomials[k]) deg += e;
        if (deg < 2) continue;
        bool used = full;
        for (int i = 0; i < n && !used; ++i) used = cell_used(i, static_cast<int>(k));
        if (used) hidden_cols.push_back(static_cast<int>(k));
    }

    PolyNet pn;
    pn.source = s;
    pn.hidden_count = static_cast<int>(hidden_cols.size());
    NeuralCircuit& c = pn.circuit;

    for (int j = 0; j < n; ++j)
        c.nodes.push_back({NodeKind::input, Activation::identity, false, false, 0.0});
    for (std::size_t t = 0; t < hidden_cols.size(); ++t) {
        hidden_node[hidden_cols[t]] = n + static_cast<int>(t);
        c.nodes.push_back({NodeKind::product, Activation::identity, false, false, 0.0});
    }
    const int out0 = n + pn.hidden_count;
    for (int i = 0; i < n; ++i) {
        double bias = s.alpha(static_cast<std::size_t>(i), 0);
        bool bias_free = !s.tied || bound.count({i, 0}) > 0;
        c.nodes.push_back({NodeKind::output, Activation::identity, true, bias_free, bias});
    }
    for (int j = 0; j < n; ++j) c.inputs.push_back(j);
    for (int i = 0; i < n; ++i) c.outputs.push_back(out0 + i);

    // Fixed unit edges into the product nodes, in input order.
    for (int col : hidden_cols) {
        const ExponentVector& e = s.monomials[static_cast<std::size_t>(col)];
        for (int j = 0; j < n; ++j)
            if (e[static_cast<std::size_t>(j)] > 0)
                c.edges.push_back({j, hidden_node[col], 1.0, false, false,
                                   e[static_cast<std::size_t>(j)]});
    }

    // Output-side coefficient edges, row by row in monomial order.
    std::map<std::pair<int, int>, int> cell_edge;
    for (int i = 0; i < n; ++i) {
        for (std::size_t k = 1; k < m; ++k) {
            int deg = 0;
            for (int e : s.monomials[k]) deg += e;
            int src;
            if (deg == 1) {
                src = 0;
                while (s.monomials[k][static_cast<std::size_t>(src)] == 0) ++src;
            } else {
                auto it = hidden_node.find(static_cast<int>(k));
                if (it == hidden_node.end()) continue;  // sparse: monomial unused everywhere
                src = it->second;
            }
            if (!full && !cell_used(i, static_cast<int>(k))) continue;
            bool free = !s.tied || bound.count({i, static_cast<int>(k)}) > 0;
            cell_edge[{i, static_cast<int>(k)}] = static_cast<int>(c.edges.size());
            c.edges.push_back({src, out0 + i, s.alpha(static_cast<std::size_t>(i), k), free,
                               false, 1});
        }
    }

    if (!s.tied) {
        build_plain_registry(c);
    } else {
        c.params.resize(s.theta.size());
        for (std::size_t q = 0; q < s.theta.size(); ++q) {
            c.params[q].name = s.theta_names[q];
            c.params[q].value = s.theta[q];
        }
        for (const Binding& b : s.bindings) {
            ParamRef r;
            r.multiplier = b.multiplier;
            if (b.col == 0) {
                r.is_bias = true;
                r.index = out0 + b.row;
            } else {
                r.is_bias = false;
                r.index = cell_edge.at({b.row, b.col});
            }
            c.params[static_cast<std::size_t>(b.theta)].refs.push_back(r);
        }
    }
    c.finalize();
    return pn;
}

}  // namespace polynet
