#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace polynet {

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matmul: dimension mismatch");
    Matrix z(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) z(i, j) += v * y(k, j);
        }
    return z;
}

inline Matrix transpose(const Matrix& x) {
    Matrix z(x.cols, x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) z(j, i) = x(i, j);
    return z;
}

// Squared Frobenius norm.
inline double fro2(const Matrix& x) {
    double s = 0.0;
    for (double v : x.a) s += v * v;
    return s;
}

struct SymEig {
    std::vector<double> eigvals;  // sorted descending
    Matrix eigvecs;               // columns aligned with eigvals
};

// Cyclic Jacobi for symmetric matrices. Small n only; converges quadratically.
inline SymEig jacobi_eigensym(Matrix s, double rel_tol = 1e-13, int max_sweeps = 100) {
    const std::size_t n = s.rows;
    if (n != s.cols) throw std::invalid_argument("jacobi: matrix not square");
    Matrix v = Matrix::identity(n);
    double norm = std::sqrt(fro2(s));
    if (norm == 0.0) norm = 1.0;

    auto offdiag2 = [&] {
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) t += 2.0 * s(i, j) * s(i, j);
        return t;
    };

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (std::sqrt(offdiag2()) <= rel_tol * norm) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = s(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                double theta = (s(q, q) - s(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
    }

    // Sort descending; fix sign so the largest-magnitude component is positive.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (s(order[j], order[j]) > s(order[i], order[i])) std::swap(order[i], order[j]);

    SymEig out;
    out.eigvals.resize(n);
    out.eigvecs = Matrix(n, n);
    for (std::size_t c2 = 0; c2 < n; ++c2) {
        std::size_t src = order[c2];
        out.eigvals[c2] = s(src, src);
        std::size_t imax = 0;
        double vmax = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double av = std::abs(v(k, src));
            if (av > vmax) {
                vmax = av;
                imax = k;
            }
        }
        double sign = v(imax, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k) out.eigvecs(k, c2) = sign * v(k, src);
    }
    return out;
}

}  // namespace polynet
