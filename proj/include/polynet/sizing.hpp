#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "polynet/circuit.hpp"
#include "polynet/compiler.hpp"
#include "polynet/linalg.hpp"
#include "polynet/parallel.hpp"
#include "polynet/polysys.hpp"
#include "polynet/rng.hpp"

namespace polynet {

// Closed-form lower bounds from matching the equilibrium Learnability trace
// eta^2 * n * C(n+d,d) against the network's parameter budget (2n+1)h + n
// (plus n^2 when skip connections carry the linear part).
inline int h_cn_lower(int n, int d, double eta = 1.0) {
    if (n < 1 || d < 0) throw std::invalid_argument("h_cn_lower: need n>=1, d>=0");
    if (eta < 1.0) throw std::invalid_argument("h_cn_lower: need eta >= 1");
    long long num = static_cast<long long>(n) *
                    (static_cast<long long>(binom(static_cast<unsigned>(n + d),
                                                  static_cast<unsigned>(d))) - 1);
    long long den = 2LL * n + 1;
    if (eta == 1.0) return static_cast<int>((num + den - 1) / den);
    return static_cast<int>(std::ceil(eta * eta * static_cast<double>(num) /
                                      static_cast<double>(den)));
}

inline int h_sc_lower(int n, int d, double eta = 1.0) {
    if (n < 1 || d < 0) throw std::invalid_argument("h_sc_lower: need n>=1, d>=0");
    if (eta < 1.0) throw std::invalid_argument("h_sc_lower: need eta >= 1");
    long long num = static_cast<long long>(binom(static_cast<unsigned>(n + d),
                                                 static_cast<unsigned>(d))) - n - 1;
    if (num <= 0) return 0;
    num *= n;
    long long den = 2LL * n + 1;
    if (eta == 1.0) return static_cast<int>((num + den - 1) / den);
    return static_cast<int>(std::ceil(eta * eta * static_cast<double>(num) /
                                      static_cast<double>(den)));
}

struct GevFit {
    double location = 0.0;
    double scale = 0.0;
    double shape = 0.0;     // xi; negative means a finite upper endpoint
    double elt_star = 0.0;  // endpoint when xi < 0, else the 0.999 quantile
};

struct EltDistribution {
    int n = 0;
    int h = 0;
    Activation activation = Activation::tanh;
    std::vector<double> samples;
    GevFit gev;  // filled once fit_gev has run
};

struct EltSimConfig {
    int trials = 2000;
    int input_samples = 64;
    std::uint64_t seed = 42;
    int threads = 1;
    bool aggregate_mean = false;  // default: max over inputs (bound-achieving reading)
    bool interior = false;        // default: corner inputs only
};

// Monte Carlo ELT of random CN(n,h) networks: per trial draw all registry
// parameters i.i.d. N(0,1), evaluate the parameter Jacobian at sampled corners
// of {-1,1}^n, and aggregate ||J||_F^2 over the inputs. Trial streams are keyed
// by (seed, trial) so results are independent of the thread count.
inline EltDistribution simulate_elt(int n, int h, Activation activation,
                                    const EltSimConfig& cfg) {
    if (n < 1 || h < 0) throw std::invalid_argument("simulate_elt: invalid sizes");
    if (cfg.trials < 100) throw std::invalid_argument("simulate_elt: need trials >= 100");
    if (cfg.input_samples < 1)
        throw std::invalid_argument("simulate_elt: need input_samples >= 1");

    EltDistribution dist;
    dist.n = n;
    dist.h = h;
    dist.activation = activation;
    dist.samples.assign(static_cast<std::size_t>(cfg.trials), 0.0);

    const NeuralCircuit tmpl = make_cn(n, h, activation, false);
    const std::size_t p = tmpl.params.size();

    parallel_for(static_cast<std::size_t>(cfg.trials), cfg.threads, [&](std::size_t t) {
        Rng rng(cfg.seed, static_cast<std::uint64_t>(t));
        NeuralCircuit c = tmpl;
        std::vector<double> theta(p);
        for (std::size_t q = 0; q < p; ++q) theta[q] = rng.normal();
        set_parameters(c, theta);
        double best = 0.0, sum = 0.0;
        std::vector<double> x(static_cast<std::size_t>(n));
        for (int k = 0; k < cfg.input_samples; ++k) {
            if (cfg.interior) {
                for (int j = 0; j < n; ++j)
                    x[static_cast<std::size_t>(j)] = rng.uniform(-1.0, 1.0);
            } else {
                std::uint64_t idx = rng.bits(n);
                for (int j = 0; j < n; ++j)
                    x[static_cast<std::size_t>(j)] = ((idx >> j) & 1u) ? 1.0 : -1.0;
            }
            double f = fro2(parameter_jacobian(c, x));
            best = std::max(best, f);
            sum += f;
        }
        dist.samples[t] = cfg.aggregate_mean ? sum / cfg.input_samples : best;
    });
    return dist;
}

// GEV fit by L-moments (probability-weighted moments with Hosking's shape
// approximation). elt_star is the finite upper endpoint for negative shape.
inline GevFit fit_gev(std::vector<double> samples) {
    const std::size_t n = samples.size();
    if (n < 100) throw std::invalid_argument("fit_gev: need at least 100 samples");
    std::sort(samples.begin(), samples.end());
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double xi = samples[i];
        double di = static_cast<double>(i);
        b0 += xi;
        b1 += xi * di / static_cast<double>(n - 1);
        b2 += xi * di * (di - 1.0) /
              (static_cast<double>(n - 1) * static_cast<double>(n - 2));
    }
    b0 /= static_cast<double>(n);
    b1 /= static_cast<double>(n);
    b2 /= static_cast<double>(n);
    const double l1 = b0;
    const double l2 = 2.0 * b1 - b0;
    const double l3 = 6.0 * b2 - 6.0 * b1 + b0;
    if (!(l2 > 0.0) || !std::isfinite(l2))
        throw std::invalid_argument("fit_gev: degenerate samples");

    const double t3 = l3 / l2;
    const double c0 = 2.0 / (3.0 + t3) - std::log(2.0) / std::log(3.0);
    const double k = 7.8590 * c0 + 2.9554 * c0 * c0;
    GevFit fit;
    const double p_hi = 0.999;
    if (std::abs(k) < 1e-9) {
        // Gumbel limit.
        const double euler = 0.5772156649015329;
        fit.shape = 0.0;
        fit.scale = l2 / std::log(2.0);
        fit.location = l1 - fit.scale * euler;
        fit.elt_star = fit.location - fit.scale * std::log(-std::log(p_hi));
        return fit;
    }
    if (!(1.0 + k > 0.0)) throw std::invalid_argument("fit_gev: L-moment shape out of range");
    const double g = std::exp(std::lgamma(1.0 + k));
    fit.scale = l2 * k / ((1.0 - std::pow(2.0, -k)) * g);
    fit.location = l1 - fit.scale * (1.0 - g) / k;
    fit.shape = -k;
    if (fit.shape < 0.0)
        fit.elt_star = fit.location + fit.scale / k;  // mu - s/xi
    else
        fit.elt_star =
            fit.location + fit.scale * (std::pow(-std::log(p_hi), -fit.shape) - 1.0) / fit.shape;
    return fit;
}

// c = elt_star over the LN reference trace (2n+1)h + n, the parameter count an
// identity-activation network attains exactly. Values above 1 contradict the
// attenuation bound and are clamped by the callers that feed degree lookups.
inline double calibrate_c(double elt_star, int n, int h) {
    if (!(elt_star > 0.0)) throw std::invalid_argument("calibrate_c: need elt_star > 0");
    return elt_star / static_cast<double>((2 * n + 1) * h + n);
}

// Largest degree d in [0, d_max] whose target trace n*C(n+d,d) the calibrated
// sample covers (boundary inclusive).
inline int equivalent_degree(double elt_sample, double c, int n, int d_max) {
    if (!(c > 0.0)) throw std::invalid_argument("equivalent_degree: need c > 0");
    const double ratio = elt_sample / c;
    int best = 0;
    for (int d = 0; d <= d_max; ++d) {
        double target = static_cast<double>(n) *
                        static_cast<double>(binom(static_cast<unsigned>(n + d),
                                                  static_cast<unsigned>(d)));
        if (target <= ratio) best = d;
    }
    return best;
}

struct DegreePosterior {
    int n = 0;
    int dmax = 0;
    std::vector<int> hs;
    Matrix p_d_given_h;  // rows follow hs, columns d = 0..dmax
    Matrix f_d_given_h;
    Matrix p_h_given_d;
    Matrix f_h_given_d;
};

struct BayesConfig {
    int hmax = 20;
    int dmax = 6;
    double p0 = 0.5;  // posterior quantile read off F_{h|d}
    EltSimConfig sim;
};

struct CellSummary {
    int h = 0;
    GevFit gev;
    double c_hat = 0.0;  // raw calibration
    double c_eff = 0.0;  // min(c_hat, 1)
};

struct BayesResult {
    int hstar = 0;
    DegreePosterior posterior;
    std::vector<CellSummary> cells;
    std::vector<EltDistribution> dists;
    std::vector<std::string> warnings;
};

// The random-network-spectra grid: per size h, simulate ELTs, fit the GEV,
// calibrate c (clamped at 1 where the fit overshoots the attenuation bound),
// map every sample to its equivalent degree, build F_{d|h}, and invert to
// P_{h|d} / F_{h|d} under uniform priors.
inline BayesResult spectra_grid(int n, const BayesConfig& cfg) {
    if (n < 1) throw std::invalid_argument("spectra_grid: need n >= 1");
    if (cfg.hmax < 1) throw std::invalid_argument("spectra_grid: need hmax >= 1");
    if (cfg.dmax < 1) throw std::invalid_argument("spectra_grid: need dmax >= 1");

    BayesResult res;
    const int hcount = cfg.hmax;
    const int dcount = cfg.dmax + 1;
    DegreePosterior& post = res.posterior;
    post.n = n;
    post.dmax = cfg.dmax;
    post.p_d_given_h = Matrix(static_cast<std::size_t>(hcount), static_cast<std::size_t>(dcount));
    post.f_d_given_h = Matrix(static_cast<std::size_t>(hcount), static_cast<std::size_t>(dcount));
    post.p_h_given_d = Matrix(static_cast<std::size_t>(hcount), static_cast<std::size_t>(dcount));
    post.f_h_given_d = Matrix(static_cast<std::size_t>(hcount), static_cast<std::size_t>(dcount));

    for (int h = 1; h <= hcount; ++h) {
        post.hs.push_back(h);
        EltSimConfig cell = cfg.sim;
        cell.seed = mix_key(cfg.sim.seed, static_cast<std::uint64_t>(h));
        EltDistribution dist = simulate_elt(n, h, Activation::tanh, cell);
        dist.gev = fit_gev(dist.samples);
        CellSummary cs;
        cs.h = h;
        cs.gev = dist.gev;
        cs.c_hat = calibrate_c(dist.gev.elt_star, n, h);
        cs.c_eff = std::min(cs.c_hat, 1.0);
        if (cs.c_hat > 1.0)
            res.warnings.push_back("calibrated c=" + std::to_string(cs.c_hat) + " at h=" +
                                   std::to_string(h) + " exceeds 1; clamped");
        const std::size_t row = static_cast<std::size_t>(h - 1);
        for (double s : dist.samples) {
            int deq = equivalent_degree(s, cs.c_eff, n, cfg.dmax);
            post.p_d_given_h(row, static_cast<std::size_t>(deq)) += 1.0;
        }
        for (int d = 0; d < dcount; ++d)
            post.p_d_given_h(row, static_cast<std::size_t>(d)) /= cfg.sim.trials;
        double acc = 0.0;
        for (int d = 0; d < dcount; ++d) {
            acc += post.p_d_given_h(row, static_cast<std::size_t>(d));
            post.f_d_given_h(row, static_cast<std::size_t>(d)) = acc;
        }
        res.cells.push_back(cs);
        res.dists.push_back(std::move(dist));
    }

    for (int d = 0; d < dcount; ++d) {
        double colsum = 0.0;
        for (int h = 0; h < hcount; ++h)
            colsum += post.p_d_given_h(static_cast<std::size_t>(h), static_cast<std::size_t>(d));
        if (colsum > 0.0) {
            double acc = 0.0;
            for (int h = 0; h < hcount; ++h) {
                double ph = post.p_d_given_h(static_cast<std::size_t>(h),
                                             static_cast<std::size_t>(d)) / colsum;
                post.p_h_given_d(static_cast<std::size_t>(h), static_cast<std::size_t>(d)) = ph;
                acc += ph;
                post.f_h_given_d(static_cast<std::size_t>(h), static_cast<std::size_t>(d)) = acc;
            }
        }
    }

    return res;
}

// Size bound for a target degree: run the grid and read h* = max{h : F_{h|d} < p0} + 1
// off the posterior CDF.
inline BayesResult bayes_size_bound(int n, int d_target, const BayesConfig& cfg) {
    if (d_target < 0 || d_target > cfg.dmax)
        throw std::invalid_argument("bayes_size_bound: d_target outside [0, dmax]");
    if (!(cfg.p0 > 0.0 && cfg.p0 < 1.0))
        throw std::invalid_argument("bayes_size_bound: need 0 < p0 < 1");

    if (d_target == 0) {  // any network supports a constant
        BayesResult trivial;
        trivial.hstar = 1;
        return trivial;
    }

    BayesResult res = spectra_grid(n, cfg);
    int recommended = 3 * h_cn_lower(n, d_target);
    if (cfg.hmax < recommended)
        res.warnings.push_back("h grid tops out at " + std::to_string(cfg.hmax) +
                               ", below the recommended " + std::to_string(recommended) +
                               " for d=" + std::to_string(d_target));

    const DegreePosterior& post = res.posterior;
    const int hcount = cfg.hmax;
    double mass = 0.0;
    for (int h = 0; h < hcount; ++h)
        mass += post.p_d_given_h(static_cast<std::size_t>(h), static_cast<std::size_t>(d_target));
    if (mass == 0.0)
        throw std::runtime_error("bayes_size_bound: degree " + std::to_string(d_target) +
                                 " never reached on the h grid; increase hmax");

    int hstar = post.hs.front();
    for (int h = 0; h < hcount; ++h)
        if (post.f_h_given_d(static_cast<std::size_t>(h), static_cast<std::size_t>(d_target)) <
            cfg.p0)
            hstar = post.hs[static_cast<std::size_t>(h)] + 1;
    res.hstar = hstar;
    return res;
}

struct SizingReport {
    int n = 0;
    int d = 0;
    double eta = 1.0;
    double elt_target = 0.0;
    int h_polynet = 0;
    int h_cn = 0;
    int h_sc = 0;
    bool has_bayes = false;
    int h_bayes = 0;
    double p0 = 0.0;
};

inline SizingReport sizing_report(int n, int d, double eta, bool with_bayes,
                                  const BayesConfig& cfg, BayesResult* bayes_out = nullptr) {
    SizingReport r;
    r.n = n;
    r.d = d;
    r.eta = eta;
    r.elt_target = eta * eta * static_cast<double>(n) *
                   static_cast<double>(binom(static_cast<unsigned>(n + d),
                                             static_cast<unsigned>(d)));
    r.h_polynet = polynet_size(n, d);
    r.h_cn = h_cn_lower(n, d, eta);
    r.h_sc = h_sc_lower(n, d, eta);
    if (with_bayes) {
        BayesResult br = bayes_size_bound(n, d, cfg);
        r.has_bayes = true;
        r.h_bayes = br.hstar;
        r.p0 = cfg.p0;
        if (bayes_out) *bayes_out = std::move(br);
    }
    return r;
}

}  // namespace polynet
