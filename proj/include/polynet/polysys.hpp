#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polynet/linalg.hpp"

namespace polynet {

inline std::uint64_t binom(unsigned n, unsigned k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t r = 1;
    for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

using ExponentVector = std::vector<int>;

// Graded-lexicographic monomial order: the constant first, then degree-1 terms in
// input order, then each higher degree with lexicographically decreasing exponent
// tuples (x1^2, x1x2, x1x3, x2^2, x2x3, x3^2 for n=3, d=2).
inline std::vector<ExponentVector> enumerate_monomials(int n, int d) {
    if (n < 1 || d < 0) throw std::invalid_argument("enumerate_monomials: need n>=1, d>=0");
    std::vector<ExponentVector> out;
    ExponentVector cur(static_cast<std::size_t>(n), 0);
    // Fill positions left to right, highest exponent first => lex-decreasing tuples.
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == n - 1) {
            cur[pos] = remaining;
            out.push_back(cur);
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            cur[pos] = e;
            self(self, pos + 1, remaining - e);
        }
    };
    for (int g = 0; g <= d; ++g) rec(rec, 0, g);
    return out;
}

// Value of one monomial at x, by repeated multiplication in input-index order.
// This exact operation order is shared with the compiled circuits' product nodes.
inline double monomial_value(const ExponentVector& e, const std::vector<double>& x) {
    double acc = 1.0;
    for (std::size_t k = 0; k < e.size(); ++k)
        for (int t = 0; t < e[k]; ++t) acc *= x[k];
    return acc;
}

// One tied coefficient: alpha(row, col) = multiplier * theta[theta_index].
struct Binding {
    int theta = 0;
    int row = 0;
    int col = 0;
    double multiplier = 1.0;
};

struct PolynomialSystem {
    int n = 0;
    int d = 0;
    std::vector<ExponentVector> monomials;  // m entries, graded-lex
    Matrix alpha;                           // n x m current coefficient values

    // Optional parameter tying. When tied, the free parameters are theta (length p)
    // and every bound alpha cell equals multiplier * theta[q]; unbound cells are
    // fixed constants. Untied systems treat all n*m coefficients as free.
    bool tied = false;
    std::vector<std::string> theta_names;
    std::vector<double> theta;
    std::vector<Binding> bindings;

    std::size_t m() const { return monomials.size(); }
    int free_parameters() const {
        return tied ? static_cast<int>(theta.size()) : n * static_cast<int>(m());
    }
};

inline PolynomialSystem make_system(int n, int d) {
    PolynomialSystem s;
    s.n = n;
    s.d = d;
    s.monomials = enumerate_monomials(n, d);
    s.alpha = Matrix(static_cast<std::size_t>(n), s.monomials.size());
    return s;
}

inline void apply_tying(PolynomialSystem& s) {
    for (const Binding& b : s.bindings) {
        if (b.row < 0 || b.row >= s.n || b.col < 0 || b.col >= static_cast<int>(s.m()) ||
            b.theta < 0 || b.theta >= static_cast<int>(s.theta.size()))
            throw std::invalid_argument("apply_tying: binding indices out of range");
        s.alpha(static_cast<std::size_t>(b.row), static_cast<std::size_t>(b.col)) =
            b.multiplier * s.theta[static_cast<std::size_t>(b.theta)];
    }
}

inline std::vector<double> monomial_values(const PolynomialSystem& s,
                                           const std::vector<double>& x) {
    std::vector<double> monos(s.m());
    for (std::size_t k = 0; k < s.m(); ++k) monos[k] = monomial_value(s.monomials[k], x);
    return monos;
}

// Rates, accumulated per row in monomial order starting from the constant term.
// The compiled PolyNet circuit reproduces this accumulation order exactly.
inline std::vector<double> evaluate(const PolynomialSystem& s, const std::vector<double>& x) {
    if (x.size() != static_cast<std::size_t>(s.n))
        throw std::invalid_argument("evaluate: x has wrong dimension");
    std::vector<double> monos = monomial_values(s, x);
    std::vector<double> rates(static_cast<std::size_t>(s.n));
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.n); ++i) {
        double acc = s.alpha(i, 0) * monos[0];
        for (std::size_t k = 1; k < s.m(); ++k) acc += s.alpha(i, k) * monos[k];
        rates[i] = acc;
    }
    return rates;
}

// d(rate_i)/d(theta_q). Untied: block-diagonal, parameter (row r, col k) has
// gradient monomial_k(x) on row r only. Tied: sum of multiplier * monomial over
// the bindings of theta_q that live in row i.
inline Matrix parameter_jacobian(const PolynomialSystem& s, const std::vector<double>& x) {
    if (x.size() != static_cast<std::size_t>(s.n))
        throw std::invalid_argument("parameter_jacobian: x has wrong dimension");
    std::vector<double> monos = monomial_values(s, x);
    std::size_t p = static_cast<std::size_t>(s.free_parameters());
    Matrix j(static_cast<std::size_t>(s.n), p);
    if (!s.tied) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(s.n); ++i)
            for (std::size_t k = 0; k < s.m(); ++k) j(i, i * s.m() + k) = monos[k];
    } else {
        for (const Binding& b : s.bindings)
            j(static_cast<std::size_t>(b.row), static_cast<std::size_t>(b.theta)) +=
                b.multiplier * monos[static_cast<std::size_t>(b.col)];
    }
    return j;
}

// Hypercube bound on the parameter Jacobian: every monomial has magnitude <= 1 on
// [-1,1]^n, so entry (i,q) is bounded by the l1 norm of theta_q's coefficient
// pattern within row i. For L63 this is diag(2,1,1); untied systems get all-ones
// blocks whose squared Frobenius norm is n*C(n+d,d).
inline Matrix bound_jacobian(const PolynomialSystem& s) {
    std::size_t p = static_cast<std::size_t>(s.free_parameters());
    Matrix j(static_cast<std::size_t>(s.n), p);
    if (!s.tied) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(s.n); ++i)
            for (std::size_t k = 0; k < s.m(); ++k) j(i, i * s.m() + k) = 1.0;
    } else {
        for (const Binding& b : s.bindings)
            j(static_cast<std::size_t>(b.row), static_cast<std::size_t>(b.theta)) +=
                std::abs(b.multiplier);
    }
    return j;
}

inline double elt_bound(const PolynomialSystem& s) { return fro2(bound_jacobian(s)); }

// Lorenz-63 as a tied (n=3, d=2) system: sigma multiplies both -X and +Y in the
// first rate, rho multiplies X in the second, beta multiplies -Z in the third;
// the -Y, -XZ and +XY coefficients are fixed constants.
inline PolynomialSystem l63_system(double sigma, double rho, double beta) {
    PolynomialSystem s = make_system(3, 2);
    auto col = [&](const ExponentVector& e) -> int {
        for (std::size_t k = 0; k < s.m(); ++k)
            if (s.monomials[k] == e) return static_cast<int>(k);
        throw std::logic_error("l63_system: monomial not found");
    };
    const int cX = col({1, 0, 0}), cY = col({0, 1, 0}), cZ = col({0, 0, 1});
    const int cXY = col({1, 1, 0}), cXZ = col({1, 0, 1});

    s.tied = true;
    s.theta_names = {"sigma", "rho", "beta"};
    s.theta = {sigma, rho, beta};
    s.bindings = {
        {0, 0, cX, -1.0},  // dX/dt: -sigma X
        {0, 0, cY, +1.0},  // dX/dt: +sigma Y
        {1, 1, cX, +1.0},  // dY/dt: +rho X
        {2, 2, cZ, -1.0},  // dZ/dt: -beta Z
    };
    // Fixed coefficients.
    s.alpha(1, static_cast<std::size_t>(cY)) = -1.0;   // dY/dt: -Y
    s.alpha(1, static_cast<std::size_t>(cXZ)) = -1.0;  // dY/dt: -XZ
    s.alpha(2, static_cast<std::size_t>(cXY)) = +1.0;  // dZ/dt: +XY
    apply_tying(s);
    return s;
}

// ---------------------------------------------------------------------------
// JSON serialization.
// {"n":..,"d":..,"coefficients":[{"output":i,"exponents":[..],"value":v,
//  "param":name,"multiplier":m}, ...]}
// Tied entries carry param+multiplier; theta order is first appearance order.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json system_to_json(const PolynomialSystem& s) {
    nlohmann::ordered_json doc;
    doc["n"] = s.n;
    doc["d"] = s.d;
    nlohmann::ordered_json coeffs = nlohmann::ordered_json::array();

    std::map<std::pair<int, int>, const Binding*> bound_cells;
    for (const Binding& b : s.bindings) bound_cells[{b.row, b.col}] = &b;

    for (int i = 0; i < s.n; ++i)
        for (std::size_t k = 0; k < s.m(); ++k) {
            auto it = bound_cells.find({i, static_cast<int>(k)});
            double v = s.alpha(static_cast<std::size_t>(i), k);
            if (it == bound_cells.end() && v == 0.0) continue;
            nlohmann::ordered_json entry;
            entry["output"] = i;
            entry["exponents"] = s.monomials[k];
            entry["value"] = v;
            if (it != bound_cells.end()) {
                entry["param"] = s.theta_names[static_cast<std::size_t>(it->second->theta)];
                entry["multiplier"] = it->second->multiplier;
            }
            coeffs.push_back(entry);
        }
    doc["coefficients"] = coeffs;
    return doc;
}

inline PolynomialSystem system_from_json(const nlohmann::json& doc) {
    PolynomialSystem s = make_system(doc.at("n").get<int>(), doc.at("d").get<int>());
    std::map<ExponentVector, int> index;
    for (std::size_t k = 0; k < s.m(); ++k) index[s.monomials[k]] = static_cast<int>(k);
    std::map<std::string, int> theta_index;

    for (const auto& entry : doc.at("coefficients")) {
        int row = entry.at("output").get<int>();
        ExponentVector e = entry.at("exponents").get<ExponentVector>();
        auto it = index.find(e);
        if (it == index.end())
            throw std::invalid_argument("system_from_json: exponents exceed degree bound");
        int colk = it->second;
        double value = entry.at("value").get<double>();
        s.alpha(static_cast<std::size_t>(row), static_cast<std::size_t>(colk)) = value;
        if (entry.contains("param")) {
            s.tied = true;
            std::string name = entry.at("param").get<std::string>();
            double mult = entry.at("multiplier").get<double>();
            auto ti = theta_index.find(name);
            int q;
            if (ti == theta_index.end()) {
                q = static_cast<int>(s.theta_names.size());
                theta_index[name] = q;
                s.theta_names.push_back(name);
                s.theta.push_back(mult != 0.0 ? value / mult : 0.0);
            } else {
                q = ti->second;
            }
            s.bindings.push_back({q, row, colk, mult});
        }
    }
    if (s.tied) apply_tying(s);
    return s;
}

}  // namespace polynet
