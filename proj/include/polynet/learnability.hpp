#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "polynet/circuit.hpp"
#include "polynet/linalg.hpp"

namespace polynet {

// G = J J^T with its eigendecomposition (eigvals descending, eigvecs columns,
// largest-magnitude component of each vector made positive).
struct LearnabilityMetric {
    Matrix g;
    std::vector<double> eigvals;
    Matrix eigvecs;
};

inline LearnabilityMetric metric(const Matrix& j) {
    for (double v : j.a)
        if (!std::isfinite(v)) throw std::invalid_argument("metric: non-finite Jacobian");
    Matrix g = matmul(j, transpose(j));
    for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = r + 1; c < g.cols; ++c) {
            double s = 0.5 * (g(r, c) + g(c, r));
            g(r, c) = s;
            g(c, r) = s;
        }
    SymEig eig = jacobi_eigensym(g);
    for (double& v : eig.eigvals)
        if (v < 0.0) v = 0.0;  // JJ^T is PSD; tiny negatives are roundoff
    return {g, eig.eigvals, eig.eigvecs};
}

// Same decomposition for a Gram matrix assembled elsewhere (e.g. averaged over
// sample points).
inline LearnabilityMetric metric_from_gram(Matrix g) {
    if (g.rows != g.cols) throw std::invalid_argument("metric_from_gram: need a square matrix");
    for (double v : g.a)
        if (!std::isfinite(v)) throw std::invalid_argument("metric_from_gram: non-finite entry");
    for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = r + 1; c < g.cols; ++c) {
            double s = 0.5 * (g(r, c) + g(c, r));
            g(r, c) = s;
            g(c, r) = s;
        }
    SymEig eig = jacobi_eigensym(g);
    for (double& v : eig.eigvals)
        if (v < 0.0) v = 0.0;
    return {g, eig.eigvals, eig.eigvecs};
}

inline double elt(const LearnabilityMetric& m) {
    double tr = 0.0;
    for (std::size_t i = 0; i < m.g.rows; ++i) tr += m.g(i, i);
    return tr;
}

inline double spectral_norm(const LearnabilityMetric& m) {
    return m.eigvals.empty() ? 0.0 : m.eigvals[0];
}

/// epsilon = U Sigma nu: the expected-error response to a unit perturbation
// direction nu. When G is nonsingular the image satisfies eps^T G^-1 eps = 1.
inline std::vector<double> error_circle_map(const LearnabilityMetric& m,
                                            const std::vector<double>& nu) {
    const std::size_t n = m.g.rows;
    if (nu.size() != n) throw std::invalid_argument("error_circle_map: dimension mismatch");
    std::vector<double> eps(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double s = std::sqrt(m.eigvals[k]) * nu[k];
        for (std::size_t i = 0; i < n; ++i) eps[i] += m.eigvecs(i, k) * s;
    }
    return eps;
}

// Tight one-step bound on |eps_{j+1}|/|eps_j| under eps_{j+1} = (I - beta G) eps_j.
inline double contraction_factor(const LearnabilityMetric& m, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("contraction_factor: need beta > 0");
    double worst = 0.0;
    for (double lam : m.eigvals) worst = std::max(worst, std::abs(1.0 - beta * lam));
    return worst;
}

struct GdResult {
    std::vector<double> error_norms;  // |mean error| at j = 0..iterations (or until divergence)
    bool diverged = false;
};

// Full-batch gradient descent w_{j+1} = w_j + (beta/S) sum_s J_s^T e_s on the
// least-squares objective, tracking the batch-mean error norm. Restricted to
// identity-activation circuits so the (I - beta G) error dynamics are exact for
// single-sample batches.
inline GdResult simulate_gd(NeuralCircuit model, const std::vector<std::vector<double>>& xs,
                            const std::vector<std::vector<double>>& ys, double beta,
                            int iterations) {
    if (xs.empty() || xs.size() != ys.size())
        throw std::invalid_argument("simulate_gd: empty or mismatched batch");
    if (model.state_size > 0)
        throw std::invalid_argument("simulate_gd: circuit has delayed edges");
    for (const Node& nd : model.nodes)
        if (nd.activation != Activation::identity)
            throw std::invalid_argument("simulate_gd: requires identity activations");

    const std::size_t s_count = xs.size();
    const std::size_t n_out = model.n_out();
    const std::size_t p = model.params.size();
    GdResult r;
    std::vector<double> theta = get_parameters(model);
    std::vector<double> grad(p);
    std::vector<double> mean_err(n_out);

    for (int j = 0; j <= iterations; ++j) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(mean_err.begin(), mean_err.end(), 0.0);
        for (std::size_t s = 0; s < s_count; ++s) {
            std::vector<double> y = forward(model, xs[s]).y;
            Matrix jac = parameter_jacobian(model, xs[s]);
            for (std::size_t i = 0; i < n_out; ++i) {
                double e = ys[s][i] - y[i];
                mean_err[i] += e;
                for (std::size_t q = 0; q < p; ++q) grad[q] += jac(i, q) * e;
            }
        }
        double norm2 = 0.0;
        for (std::size_t i = 0; i < n_out; ++i) {
            mean_err[i] /= static_cast<double>(s_count);
            norm2 += mean_err[i] * mean_err[i];
        }
        double norm = std::sqrt(norm2);
        r.error_norms.push_back(norm);
        if (norm > 1e6) {
            r.diverged = true;
            break;
        }
        if (j == iterations) break;
        for (std::size_t q = 0; q < p; ++q)
            theta[q] += beta / static_cast<double>(s_count) * grad[q];
        set_parameters(model, theta);
    }
    return r;
}

}  // namespace polynet
