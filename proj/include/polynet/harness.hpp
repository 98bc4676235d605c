#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polynet/circuit.hpp"
#include "polynet/parallel.hpp"
#include "polynet/polysys.hpp"
#include "polynet/rng.hpp"
#include "polynet/steppers.hpp"

namespace polynet {

// Fixed affine map taking the L63 sampling region [-20,20]^2 x [0,50] onto
// [-1,1]^3 (attractor excursions overshoot slightly; bounds are the region's,
// not per-dataset min/max, so runs stay comparable).
struct Normalization {
    std::array<double, 3> center{0.0, 0.0, 25.0};
    std::array<double, 3> scale{20.0, 20.0, 25.0};

    std::vector<double> to_unit(const std::vector<double>& x) const {
        std::vector<double> z(3);
        for (int i = 0; i < 3; ++i) z[static_cast<std::size_t>(i)] =
            (x[static_cast<std::size_t>(i)] - center[static_cast<std::size_t>(i)]) /
            scale[static_cast<std::size_t>(i)];
        return z;
    }
    std::vector<double> from_unit(const std::vector<double>& z) const {
        std::vector<double> x(3);
        for (int i = 0; i < 3; ++i) x[static_cast<std::size_t>(i)] =
            z[static_cast<std::size_t>(i)] * scale[static_cast<std::size_t>(i)] +
            center[static_cast<std::size_t>(i)];
        return x;
    }
};

struct MapDataset {
    std::vector<std::vector<double>> x;   // normalized states
    std::vector<std::vector<double>> xp;  // normalized one-step images
    double dt = 0.01;
    Normalization norm;
    std::uint64_t seed = 0;
    int trajectories = 0;
    int keep = 0;
    int discard = 0;
    int excluded = 0;
    bool normalized = true;

    std::size_t size() const { return x.size(); }
};

struct DatasetConfig {
    int n_traj = 10;  // desk scale; full protocol uses 1000
    int total_steps = 2100;
    int discard = 2000;
    int keep = 100;
    double dt = 0.01;
    std::uint64_t seed = 42;
    int threads = 1;
};

inline DatasetConfig full_scale_config(std::uint64_t seed = 42, int threads = 1) {
    DatasetConfig c;
    c.n_traj = 1000;
    c.total_steps = 2500;
    c.discard = 2000;
    c.keep = 500;
    c.seed = seed;
    c.threads = threads;
    return c;
}

// L63 one-step-map training data: trajectories start uniformly in the sampling
// region, integrate under rk4 at fixed dt, drop the transient, and keep the
// remaining consecutive pairs in normalized coordinates. Divergent trajectories
// are excluded and counted. Per-trajectory streams keyed by index keep the
// result independent of the thread count.
inline MapDataset generate_dataset(const DatasetConfig& cfg) {
    if (cfg.discard + cfg.keep > cfg.total_steps)
        throw std::invalid_argument("generate_dataset: discard + keep exceeds total_steps");
    if (cfg.n_traj < 0 || cfg.keep < 0 || cfg.discard < 0 || cfg.dt <= 0.0)
        throw std::invalid_argument("generate_dataset: invalid config");

    MapDataset ds;
    ds.dt = cfg.dt;
    ds.seed = cfg.seed;
    ds.trajectories = cfg.n_traj;
    ds.keep = cfg.keep;
    ds.discard = cfg.discard;

    const PolynomialSystem sys = l63_system(10.0, 28.0, 8.0 / 3.0);
    const RateFn f = rate_of(sys);
    const int steps = cfg.discard + cfg.keep;

    struct Slot {
        bool ok = false;
        std::vector<std::vector<double>> x, xp;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(cfg.n_traj));

    parallel_for(static_cast<std::size_t>(cfg.n_traj), cfg.threads, [&](std::size_t t) {
        Rng rng(cfg.seed, static_cast<std::uint64_t>(t));
        std::vector<double> x = {rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0),
                                 rng.uniform(0.0, 50.0)};
        Slot& slot = slots[t];
        try {
            std::vector<double> prev_norm;
            for (int k = 0; k < steps; ++k) {
                std::vector<double> next = rk4_step(f, cfg.dt, x);
                check_finite(next, k + 1);
                if (k >= cfg.discard) {
                    std::vector<double> zn = ds.norm.to_unit(x);
                    std::vector<double> zp = ds.norm.to_unit(next);
                    slot.x.push_back(std::move(zn));
                    slot.xp.push_back(std::move(zp));
                }
                x = std::move(next);
            }
            slot.ok = true;
        } catch (const DivergenceError&) {
            slot.ok = false;
            slot.x.clear();
            slot.xp.clear();
        }
    });

    for (Slot& s : slots) {
        if (!s.ok) {
            ++ds.excluded;
            continue;
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            ds.x.push_back(std::move(s.x[i]));
            ds.xp.push_back(std::move(s.xp[i]));
        }
    }
    return ds;
}

// Uniform subsample (without replacement) of the pairs whose *unnormalized*
// state satisfies the predicate.
inline MapDataset subsample_region(const MapDataset& ds,
                                   const std::function<bool(const std::vector<double>&)>& pred,
                                   std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> matches;
    for (std::size_t s = 0; s < ds.size(); ++s)
        if (pred(ds.norm.from_unit(ds.x[s]))) matches.push_back(s);
    if (matches.size() < count)
        throw std::runtime_error("subsample_region: only " + std::to_string(matches.size()) +
                                 " pairs match, need " + std::to_string(count));
    Rng rng(seed);
    MapDataset out = ds;
    out.x.clear();
    out.xp.clear();
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + rng.index(matches.size() - i);
        std::swap(matches[i], matches[j]);
        out.x.push_back(ds.x[matches[i]]);
        out.xp.push_back(ds.xp[matches[i]]);
    }
    return out;
}

struct TrainConfig {
    double lr = 0.2;
    int epochs = 1000;
    double lambda = 1e-4;
    std::uint64_t seed = 0;
};

struct TrainingRun {
    NeuralCircuit circuit;
    TrainConfig config;
    std::vector<double> loss_history;
    double rmse_train = 0.0;
    bool diverged = false;
};

inline double evaluate_rmse(const NeuralCircuit& c, const MapDataset& ds) {
    if (ds.size() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t s = 0; s < ds.size(); ++s) {
        std::vector<double> y = forward(c, ds.x[s]).y;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double e = ds.xp[s][i] - y[i];
            acc += e * e;
        }
    }
    return std::sqrt(acc / (static_cast<double>(ds.size()) * static_cast<double>(c.n_out())));
}

// Full-batch gradient descent on (1/2S) sum ||x' - f(x;w)||^2 + lambda ||w||^2.
// Weights start at N(0, 1/fan_in) drawn in registry order, biases at zero.
inline TrainingRun train(const NeuralCircuit& circuit, const MapDataset& ds,
                         const TrainConfig& cfg) {
    if (ds.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (circuit.state_size > 0) throw std::invalid_argument("train: circuit has delayed edges");
    if (circuit.n_in() != ds.x[0].size() || circuit.n_out() != ds.xp[0].size())
        throw std::invalid_argument("train: circuit/dataset dimension mismatch");

    TrainingRun run;
    run.circuit = circuit;
    run.config = cfg;
    NeuralCircuit& c = run.circuit;
    const std::size_t p = c.params.size();
    const std::size_t s_count = ds.size();
    const std::size_t n_out = c.n_out();

    Rng rng(cfg.seed);
    std::vector<double> theta(p);
    for (std::size_t q = 0; q < p; ++q) {
        const ParamRef& r = c.params[q].refs.front();
        if (r.is_bias) {
            theta[q] = 0.0;
        } else {
            std::size_t fan = c.incoming[static_cast<std::size_t>(
                                             c.edges[static_cast<std::size_t>(r.index)].to)]
                                  .size();
            theta[q] = rng.normal() / std::sqrt(static_cast<double>(fan ? fan : 1));
        }
    }
    set_parameters(c, theta);

    std::vector<double> grad(p);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double sq = 0.0;
        for (std::size_t s = 0; s < s_count; ++s) {
            std::vector<double> y = forward(c, ds.x[s]).y;
            Matrix jac = parameter_jacobian(c, ds.x[s]);
            for (std::size_t i = 0; i < n_out; ++i) {
                double e = ds.xp[s][i] - y[i];
                sq += e * e;
                for (std::size_t q = 0; q < p; ++q) grad[q] += jac(i, q) * e;
            }
        }
        double w2 = 0.0;
        for (double t : theta) w2 += t * t;
        double loss = sq / (2.0 * static_cast<double>(s_count)) + cfg.lambda * w2;
        run.loss_history.push_back(loss);
        if (!std::isfinite(loss) || loss > 1e6) {
            run.diverged = true;
            break;
        }
        for (std::size_t q = 0; q < p; ++q)
            theta[q] += cfg.lr * (grad[q] / static_cast<double>(s_count) -
                                  2.0 * cfg.lambda * theta[q]);
        set_parameters(c, theta);
    }
    run.rmse_train = evaluate_rmse(c, ds);
    return run;
}

// Closed-loop iteration of a one-step map circuit in normalized space; the
// returned trajectory is de-normalized. Throws DivergenceError with the step
// index when the state leaves the finite range.
inline Trajectory free_run(const NeuralCircuit& c, const std::vector<double>& x0_raw,
                           long long steps, const Normalization& norm = {}) {
    Trajectory traj;
    std::vector<double> z = norm.to_unit(x0_raw);
    traj.push_back(norm.from_unit(z));
    for (long long k = 1; k <= steps; ++k) {
        z = forward(c, z).y;
        check_finite(z, k);
        traj.push_back(norm.from_unit(z));
    }
    return traj;
}

// Benettin-style largest Lyapunov exponent of a discrete map: run a reference
// and a perturbed trajectory, renormalize the separation every interval, and
// average the log growth. Returned per map application (divide by dt for a rate
// per unit time).
inline double largest_lyapunov(const std::function<std::vector<double>(const std::vector<double>&)>& map,
                               const std::vector<double>& x0, long long steps,
                               int renorm_interval, std::uint64_t seed, double d0 = 1e-7) {
    if (steps < 1 || renorm_interval < 1)
        throw std::invalid_argument("largest_lyapunov: need steps >= 1, renorm_interval >= 1");
    const std::size_t n = x0.size();
    Rng rng(seed);
    std::vector<double> u(n);
    double un = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = rng.normal();
        un += u[i] * u[i];
    }
    un = std::sqrt(un);
    std::vector<double> x = x0, y = x0;
    for (std::size_t i = 0; i < n; ++i) y[i] += d0 * u[i] / un;

    double acc = 0.0;
    long long renorms = 0;
    for (long long k = 1; k <= steps; ++k) {
        x = map(x);
        y = map(y);
        check_finite(x, k);
        check_finite(y, k);
        if (k % renorm_interval == 0) {
            double dist = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = y[i] - x[i];
                dist += d * d;
            }
            dist = std::sqrt(dist);
            if (!(dist > 0.0) || !std::isfinite(dist)) throw DivergenceError(k);
            acc += std::log(dist / d0);
            ++renorms;
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + (y[i] - x[i]) * (d0 / dist);
        }
    }
    if (renorms == 0) throw std::invalid_argument("largest_lyapunov: no renormalization events");
    return acc / (static_cast<double>(renorms) * static_cast<double>(renorm_interval));
}

// ---------------------------------------------------------------------------
// Size-validation experiment: train CNs of several widths on the same dataset,
// compare holdout RMSE medians, check free-run boundedness, and report the
// reference map's Lyapunov sign.
// ---------------------------------------------------------------------------

struct ValidationConfig {
    std::vector<int> sizes{2, 4, 6, 8};
    int seeds = 3;
    bool full_scale = false;
    TrainConfig train_cfg{0.2, 1000, 1e-4, 0};
    std::uint64_t seed = 42;
    int threads = 1;
    long long free_run_steps = 500;
    long long lyapunov_steps = 100000;
    int lyapunov_renorm = 10;
};

struct SizeValidation {
    int h = 0;
    std::vector<double> rmse_train;
    std::vector<double> rmse_holdout;
    std::vector<bool> free_run_bounded;
    double rmse_train_median = 0.0;
    double rmse_holdout_median = 0.0;
    bool free_run_bounded_all = false;
    int diverged_runs = 0;
};

struct ValidationReport {
    ValidationConfig config;
    std::size_t train_pairs = 0;
    std::size_t holdout_pairs = 0;
    int excluded_trajectories = 0;
    std::vector<SizeValidation> per_size;
    double lyapunov_per_step = 0.0;
    double lyapunov_per_time = 0.0;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// 2x the sampling box.
inline bool within_validation_bounds(const Trajectory& traj) {
    for (const auto& s : traj) {
        if (std::abs(s[0]) > 40.0 || std::abs(s[1]) > 40.0) return false;
        if (s[2] < -25.0 || s[2] > 75.0) return false;
    }
    return true;
}

inline ValidationReport run_validation(const ValidationConfig& cfg) {
    ValidationReport rep;
    rep.config = cfg;

    DatasetConfig dcfg;
    if (cfg.full_scale) dcfg = full_scale_config(cfg.seed, cfg.threads);
    dcfg.seed = cfg.seed;
    dcfg.threads = cfg.threads;
    MapDataset ds = generate_dataset(dcfg);
    DatasetConfig hcfg = dcfg;
    hcfg.n_traj = 3;
    hcfg.seed = cfg.seed + 1000;
    MapDataset holdout = generate_dataset(hcfg);
    if (ds.size() == 0 || holdout.size() == 0)
        throw std::runtime_error("run_validation: empty dataset");
    rep.train_pairs = ds.size();
    rep.holdout_pairs = holdout.size();
    rep.excluded_trajectories = ds.excluded + holdout.excluded;

    const std::vector<double> x0_raw = holdout.norm.from_unit(holdout.x.front());

    struct RunResult {
        double rmse_train = 0.0, rmse_holdout = 0.0;
        bool bounded = false, diverged = false;
    };
    const std::size_t runs = cfg.sizes.size() * static_cast<std::size_t>(cfg.seeds);
    std::vector<RunResult> results(runs);

    parallel_for(runs, cfg.threads, [&](std::size_t r) {
        const int h = cfg.sizes[r / static_cast<std::size_t>(cfg.seeds)];
        const std::uint64_t s = r % static_cast<std::size_t>(cfg.seeds);
        TrainConfig tc = cfg.train_cfg;
        tc.seed = Rng(cfg.seed, static_cast<std::uint64_t>(h), s).next_u64();
        TrainingRun run = train(make_cn(3, h, Activation::tanh, false), ds, tc);
        RunResult& out = results[r];
        out.diverged = run.diverged;
        out.rmse_train = run.rmse_train;
        out.rmse_holdout = evaluate_rmse(run.circuit, holdout);
        try {
            Trajectory traj = free_run(run.circuit, x0_raw, cfg.free_run_steps, holdout.norm);
            out.bounded = within_validation_bounds(traj);
        } catch (const DivergenceError&) {
            out.bounded = false;
        }
    });

    for (std::size_t hi = 0; hi < cfg.sizes.size(); ++hi) {
        SizeValidation sv;
        sv.h = cfg.sizes[hi];
        sv.free_run_bounded_all = true;
        for (int s = 0; s < cfg.seeds; ++s) {
            const RunResult& rr = results[hi * static_cast<std::size_t>(cfg.seeds) +
                                          static_cast<std::size_t>(s)];
            sv.rmse_train.push_back(rr.rmse_train);
            sv.rmse_holdout.push_back(rr.rmse_holdout);
            sv.free_run_bounded.push_back(rr.bounded);
            if (!rr.bounded) sv.free_run_bounded_all = false;
            if (rr.diverged) ++sv.diverged_runs;
        }
        sv.rmse_train_median = median(sv.rmse_train);
        sv.rmse_holdout_median = median(sv.rmse_holdout);
        rep.per_size.push_back(std::move(sv));
    }

    // Reference-map chaos check: rk4 L63 map at the dataset dt, transient first.
    const PolynomialSystem sys = l63_system(10.0, 28.0, 8.0 / 3.0);
    const RateFn f = rate_of(sys);
    auto map = [&](const std::vector<double>& x) { return rk4_step(f, dcfg.dt, x); };
    std::vector<double> x0 = {1.0, 1.0, 1.0};
    for (int k = 0; k < 1000; ++k) x0 = map(x0);
    rep.lyapunov_per_step =
        largest_lyapunov(map, x0, cfg.lyapunov_steps, cfg.lyapunov_renorm, cfg.seed);
    rep.lyapunov_per_time = rep.lyapunov_per_step / dcfg.dt;
    return rep;
}

}  // namespace polynet
