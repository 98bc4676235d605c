#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polynet/circuit.hpp"
#include "polynet/polysys.hpp"

namespace polynet {

using RateFn = std::function<std::vector<double>(const std::vector<double>&)>;

enum class Scheme { rk4, abm2 };

inline std::string to_string(Scheme s) { return s == Scheme::rk4 ? "rk4" : "abm2"; }

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "rk4") return Scheme::rk4;
    if (s == "abm2") return Scheme::abm2;
    throw std::invalid_argument("unknown scheme: " + s);
}

struct DivergenceError : std::runtime_error {
    long long step;
    explicit DivergenceError(long long at)
        : std::runtime_error("non-finite state at step " + std::to_string(at)), step(at) {}
};

inline void check_finite(const std::vector<double>& v, long long step) {
    for (double x : v)
        if (!std::isfinite(x)) throw DivergenceError(step);
}

// Classic four-stage explicit Runge-Kutta. The accumulation order below is
// pinned because the stepper circuits replicate it edge for edge.
inline std::vector<double> rk4_step(const RateFn& f, double h, const std::vector<double>& x) {
    const double half = h / 2.0, w16 = h / 6.0, w13 = h / 3.0;
    const std::size_t n = x.size();
    std::vector<double> f1 = f(x);
    check_finite(f1, 0);
    std::vector<double> a(n), b(n), c(n), y(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = x[i] + half * f1[i];
    std::vector<double> f2 = f(a);
    check_finite(f2, 0);
    for (std::size_t i = 0; i < n; ++i) b[i] = x[i] + half * f2[i];
    std::vector<double> f3 = f(b);
    check_finite(f3, 0);
    for (std::size_t i = 0; i < n; ++i) c[i] = x[i] + h * f3[i];
    std::vector<double> f4 = f(c);
    check_finite(f4, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i];
        acc += w16 * f1[i];
        acc += w13 * f2[i];
        acc += w13 * f3[i];
        acc += w16 * f4[i];
        y[i] = acc;
    }
    return y;
}

struct Abm2Result {
    std::vector<double> x;
    std::vector<double> state;
};

// Two-step Adams-Bashforth predictor with Adams-Moulton (trapezoidal)
// corrector. `state` must hold -(h/2)*f(x_{n-1}); the new state is
// -(h/2)*f(x_n), ready for the next call.
inline Abm2Result abm2_step(const RateFn& f, double h, const std::vector<double>& x,
                            const std::vector<double>& state) {
    const double half = h / 2.0, w32 = 1.5 * h;
    const std::size_t n = x.size();
    if (state.size() != n) throw std::invalid_argument("abm2_step: state dimension mismatch");
    std::vector<double> fx = f(x);
    check_finite(fx, 0);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i] + w32 * fx[i];
        acc += state[i];
        p[i] = acc;
    }
    std::vector<double> fp = f(p);
    check_finite(fp, 0);
    Abm2Result r;
    r.x.resize(n);
    r.state.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i] + half * fp[i];
        acc += half * fx[i];
        r.x[i] = acc;
        r.state[i] = (-half) * fx[i];
    }
    return r;
}

namespace detail {

// Appends a copy of `inner` (minus its input nodes) to `c`, wiring edges that
// left an inner input to src_ids instead. Inner output nodes become plain sum
// nodes. Returns the copied circuit's output ids; remapped parameter slots are
// appended to param_refs (one list per inner parameter).
inline std::vector<int> instantiate_inner(NeuralCircuit& c, const NeuralCircuit& inner,
                                          const std::vector<int>& src_ids,
                                          std::vector<std::vector<ParamRef>>& param_refs) {
    if (inner.state_size > 0)
        throw std::invalid_argument("build_stepper_circuit: inner circuit must be feedforward");
    if (src_ids.size() != inner.n_in())
        throw std::invalid_argument("instantiate_inner: source id count mismatch");

    std::vector<int> node_map(inner.nodes.size(), -1);
    for (std::size_t i = 0; i < inner.inputs.size(); ++i)
        node_map[static_cast<std::size_t>(inner.inputs[i])] = src_ids[i];
    for (std::size_t v = 0; v < inner.nodes.size(); ++v) {
        if (inner.nodes[v].kind == NodeKind::input) continue;
        Node nd = inner.nodes[v];
        if (nd.kind == NodeKind::output) nd.kind = NodeKind::sum;
        node_map[v] = static_cast<int>(c.nodes.size());
        c.nodes.push_back(nd);
    }
    std::vector<int> edge_map(inner.edges.size(), -1);
    for (std::size_t e = 0; e < inner.edges.size(); ++e) {
        Edge ed = inner.edges[e];
        ed.from = node_map[static_cast<std::size_t>(ed.from)];
        ed.to = node_map[static_cast<std::size_t>(ed.to)];
        edge_map[e] = static_cast<int>(c.edges.size());
        c.edges.push_back(ed);
    }
    param_refs.resize(inner.params.size());
    for (std::size_t q = 0; q < inner.params.size(); ++q)
        for (const ParamRef& r : inner.params[q].refs) {
            ParamRef nr = r;
            nr.index = r.is_bias ? node_map[static_cast<std::size_t>(r.index)]
                                 : edge_map[static_cast<std::size_t>(r.index)];
            param_refs[q].push_back(nr);
        }
    std::vector<int> outs(inner.outputs.size());
    for (std::size_t i = 0; i < inner.outputs.size(); ++i)
        outs[i] = node_map[static_cast<std::size_t>(inner.outputs[i])];
    return outs;
}

inline void adopt_inner_params(NeuralCircuit& c, const NeuralCircuit& inner,
                               const std::vector<std::vector<ParamRef>>& param_refs) {
    c.params.resize(inner.params.size());
    for (std::size_t q = 0; q < inner.params.size(); ++q) {
        c.params[q].name = inner.params[q].name;
        c.params[q].value = inner.params[q].value;
        c.params[q].refs = param_refs[q];
    }
}

}  // namespace detail

// One discrete-time network wrapping `inner` as the rate function. The inner
// circuit is instantiated once per stage; the interconnecting sum nodes carry
// fixed scheme weights that never enter the parameter registry (the inner
// parameters do, shared across the stage copies). For abm2 the recurrent state
// node holds -(h/2)*f(x_n) and feeds the predictor through a delayed edge.
inline NeuralCircuit build_stepper_network(const NeuralCircuit& inner, Scheme scheme, double h) {
    if (h <= 0.0) throw std::invalid_argument("build_stepper_network: need h > 0");
    if (inner.n_in() != inner.n_out())
        throw std::invalid_argument("build_stepper_network: inner input/output dimension mismatch");
    const int n = static_cast<int>(inner.n_in());
    const double half = h / 2.0;

    NeuralCircuit c;
    std::vector<std::vector<ParamRef>> refs;
    for (int j = 0; j < n; ++j)
        c.nodes.push_back({NodeKind::input, Activation::identity, false, false, 0.0});
    std::vector<int> xs(n);
    for (int j = 0; j < n; ++j) {
        xs[static_cast<std::size_t>(j)] = j;
        c.inputs.push_back(j);
    }
    auto stage_nodes = [&](const std::vector<int>& fs, double w) {
        std::vector<int> ids(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            int id = static_cast<int>(c.nodes.size());
            c.nodes.push_back({NodeKind::sum, Activation::identity, false, false, 0.0});
            c.edges.push_back({xs[static_cast<std::size_t>(i)], id, 1.0, false, false, 1});
            c.edges.push_back({fs[static_cast<std::size_t>(i)], id, w, false, false, 1});
            ids[static_cast<std::size_t>(i)] = id;
        }
        return ids;
    };

    if (scheme == Scheme::rk4) {
        const double w16 = h / 6.0, w13 = h / 3.0;
        std::vector<int> f1 = detail::instantiate_inner(c, inner, xs, refs);
        std::vector<int> a = stage_nodes(f1, half);
        std::vector<int> f2 = detail::instantiate_inner(c, inner, a, refs);
        std::vector<int> b = stage_nodes(f2, half);
        std::vector<int> f3 = detail::instantiate_inner(c, inner, b, refs);
        std::vector<int> cc = stage_nodes(f3, h);
        std::vector<int> f4 = detail::instantiate_inner(c, inner, cc, refs);
        for (int i = 0; i < n; ++i) {
            int id = static_cast<int>(c.nodes.size());
            c.nodes.push_back({NodeKind::output, Activation::identity, false, false, 0.0});
            c.outputs.push_back(id);
            c.edges.push_back({xs[static_cast<std::size_t>(i)], id, 1.0, false, false, 1});
            c.edges.push_back({f1[static_cast<std::size_t>(i)], id, w16, false, false, 1});
            c.edges.push_back({f2[static_cast<std::size_t>(i)], id, w13, false, false, 1});
            c.edges.push_back({f3[static_cast<std::size_t>(i)], id, w13, false, false, 1});
            c.edges.push_back({f4[static_cast<std::size_t>(i)], id, w16, false, false, 1});
        }
    } else {
        const double w32 = 1.5 * h;
        std::vector<int> fx = detail::instantiate_inner(c, inner, xs, refs);
        // State nodes: s_i = -(h/2) * f_i(x_n), read one step delayed by the predictor.
        std::vector<int> s(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            int id = static_cast<int>(c.nodes.size());
            c.nodes.push_back({NodeKind::sum, Activation::identity, false, false, 0.0});
            c.edges.push_back({fx[static_cast<std::size_t>(i)], id, -half, false, false, 1});
            s[static_cast<std::size_t>(i)] = id;
        }
        std::vector<int> p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            int id = static_cast<int>(c.nodes.size());
            c.nodes.push_back({NodeKind::sum, Activation::identity, false, false, 0.0});
            c.edges.push_back({xs[static_cast<std::size_t>(i)], id, 1.0, false, false, 1});
            c.edges.push_back({fx[static_cast<std::size_t>(i)], id, w32, false, false, 1});
            c.edges.push_back({s[static_cast<std::size_t>(i)], id, 1.0, false, true, 1});
            p[static_cast<std::size_t>(i)] = id;
        }
        std::vector<int> fp = detail::instantiate_inner(c, inner, p, refs);
        for (int i = 0; i < n; ++i) {
            int id = static_cast<int>(c.nodes.size());
            c.nodes.push_back({NodeKind::output, Activation::identity, false, false, 0.0});
            c.outputs.push_back(id);
            c.edges.push_back({xs[static_cast<std::size_t>(i)], id, 1.0, false, false, 1});
            c.edges.push_back({fp[static_cast<std::size_t>(i)], id, half, false, false, 1});
            c.edges.push_back({fx[static_cast<std::size_t>(i)], id, half, false, false, 1});
        }
    }
    detail::adopt_inner_params(c, inner, refs);
    c.finalize();
    return c;
}

// Stepper plus everything simulate() needs: the inner rate circuit for state
// priming and, for abm2, an rk4 network that produces the first step.
struct StepperCircuit {
    Scheme scheme = Scheme::rk4;
    double h = 0.0;
    NeuralCircuit inner;
    NeuralCircuit network;
    NeuralCircuit primer;  // abm2 only
};

inline StepperCircuit build_stepper_circuit(const NeuralCircuit& inner, Scheme scheme, double h) {
    StepperCircuit sc;
    sc.scheme = scheme;
    sc.h = h;
    sc.inner = inner;
    sc.network = build_stepper_network(inner, scheme, h);
    if (scheme == Scheme::abm2) sc.primer = build_stepper_network(inner, Scheme::rk4, h);
    return sc;
}

using Trajectory = std::vector<std::vector<double>>;  // (steps+1) rows of length n

// Chains stepper-network forwards. ABM2 is primed with one rk4 step and the
// state -(h/2)*f(x0), matching the reference loop bit for bit.
inline Trajectory simulate(const StepperCircuit& sc, const std::vector<double>& x0,
                           long long steps) {
    if (steps < 0) throw std::invalid_argument("simulate: steps must be >= 0");
    Trajectory traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(x0);
    if (steps == 0) return traj;
    std::vector<double> x = x0;
    if (sc.scheme == Scheme::rk4) {
        for (long long k = 1; k <= steps; ++k) {
            x = forward(sc.network, x).y;
            check_finite(x, k);
            traj.push_back(x);
        }
    } else {
        const double half = sc.h / 2.0;
        std::vector<double> f0 = forward(sc.inner, x0).y;
        check_finite(f0, 0);
        std::vector<double> state(f0.size());
        for (std::size_t i = 0; i < f0.size(); ++i) state[i] = (-half) * f0[i];
        x = forward(sc.primer, x0).y;
        check_finite(x, 1);
        traj.push_back(x);
        for (long long k = 2; k <= steps; ++k) {
            ForwardResult r = forward(sc.network, x, &state);
            x = r.y;
            state = r.state;
            check_finite(x, k);
            traj.push_back(x);
        }
    }
    return traj;
}

// Reference loop with the identical priming rule, for equivalence tests and as
// the plain numerical integrator.
inline Trajectory simulate_reference(const RateFn& f, Scheme scheme, double h,
                                     const std::vector<double>& x0, long long steps) {
    if (steps < 0) throw std::invalid_argument("simulate_reference: steps must be >= 0");
    Trajectory traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(x0);
    if (steps == 0) return traj;
    std::vector<double> x = x0;
    if (scheme == Scheme::rk4) {
        for (long long k = 1; k <= steps; ++k) {
            x = rk4_step(f, h, x);
            check_finite(x, k);
            traj.push_back(x);
        }
    } else {
        const double half = h / 2.0;
        std::vector<double> f0 = f(x0);
        check_finite(f0, 0);
        std::vector<double> state(f0.size());
        for (std::size_t i = 0; i < f0.size(); ++i) state[i] = (-half) * f0[i];
        x = rk4_step(f, h, x0);
        check_finite(x, 1);
        traj.push_back(x);
        for (long long k = 2; k <= steps; ++k) {
            Abm2Result r = abm2_step(f, h, x, state);
            x = r.x;
            state = r.state;
            check_finite(x, k);
            traj.push_back(x);
        }
    }
    return traj;
}

inline RateFn rate_of(const NeuralCircuit& c) {
    return [c](const std::vector<double>& x) { return forward(c, x).y; };
}

inline RateFn rate_of(const PolynomialSystem& s) {
    return [s](const std::vector<double>& x) { return evaluate(s, x); };
}

}  // namespace polynet
