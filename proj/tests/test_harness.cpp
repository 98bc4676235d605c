#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "polynet/compiler.hpp"
#include "polynet/harness.hpp"
#include "polynet/polysys.hpp"
#include "polynet/rng.hpp"

using namespace polynet;

TEST_CASE("normalization is the fixed affine map and its inverse", "[harness]") {
    Normalization nm;
    std::vector<double> u = nm.to_unit({20.0, -20.0, 50.0});
    REQUIRE(u == std::vector<double>{1.0, -1.0, 1.0});
    std::vector<double> r = nm.from_unit({0.0, 0.0, 0.0});
    REQUIRE(r == std::vector<double>{0.0, 0.0, 25.0});
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> x{rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0),
                              rng.uniform(-10.0, 60.0)};
        std::vector<double> back = nm.from_unit(nm.to_unit(x));
        for (int i = 0; i < 3; ++i)
            REQUIRE_THAT(back[static_cast<std::size_t>(i)],
                         Catch::Matchers::WithinRel(x[static_cast<std::size_t>(i)], 1e-14));
    }
}

TEST_CASE("desk-scale dataset has the documented shape and chains steps", "[harness]") {
    DatasetConfig cfg;  // 10 trajectories x 100 kept
    MapDataset ds = generate_dataset(cfg);
    REQUIRE(ds.size() == 1000);
    REQUIRE(ds.excluded == 0);
    REQUIRE(ds.normalized);
    // within one trajectory the target of pair k is the input of pair k+1
    for (int k = 0; k < 99; ++k)
        REQUIRE(ds.xp[static_cast<std::size_t>(k)] == ds.x[static_cast<std::size_t>(k) + 1]);
    // trajectory boundary: pair 99 -> 100 must NOT chain
    REQUIRE(ds.xp[99] != ds.x[100]);
}

TEST_CASE("dataset generation is thread-invariant", "[harness]") {
    DatasetConfig a;
    a.n_traj = 4;
    a.threads = 1;
    DatasetConfig b = a;
    b.threads = 3;
    MapDataset da = generate_dataset(a);
    MapDataset db = generate_dataset(b);
    REQUIRE(da.x == db.x);
    REQUIRE(da.xp == db.xp);
}

TEST_CASE("post-transient states stay inside 1.4x the sampling box", "[harness]") {
    DatasetConfig cfg;
    MapDataset ds = generate_dataset(cfg);
    for (const auto& u : ds.x) {
        REQUIRE(std::abs(u[0]) <= 1.4);
        REQUIRE(std::abs(u[1]) <= 1.4);
        REQUIRE(std::abs(u[2]) <= 1.4);
    }
}

TEST_CASE("generate_dataset validates step accounting", "[harness]") {
    DatasetConfig cfg;
    cfg.total_steps = 100;
    cfg.discard = 90;
    cfg.keep = 20;
    REQUIRE_THROWS_AS(generate_dataset(cfg), std::invalid_argument);
}

TEST_CASE("region subsampling filters on raw coordinates deterministically", "[harness]") {
    DatasetConfig cfg;
    MapDataset ds = generate_dataset(cfg);
    auto positive_x = [](const std::vector<double>& raw) { return raw[0] > 0.0; };
    MapDataset sub = subsample_region(ds, positive_x, 50, 7);
    REQUIRE(sub.size() == 50);
    for (const auto& u : sub.x) REQUIRE(ds.norm.from_unit(u)[0] > 0.0);
    MapDataset sub2 = subsample_region(ds, positive_x, 50, 7);
    REQUIRE(sub.x == sub2.x);
}

TEST_CASE("rmse of the zero map equals the target second moment", "[harness]") {
    DatasetConfig cfg;
    cfg.n_traj = 2;
    MapDataset ds = generate_dataset(cfg);
    NeuralCircuit zero = make_cn(3, 2, Activation::tanh, false);
    set_parameters(zero, std::vector<double>(static_cast<std::size_t>(count_parameters(zero)), 0.0));
    double want = 0.0;
    for (const auto& t : ds.xp)
        for (double v : t) want += v * v;
    want = std::sqrt(want / (static_cast<double>(ds.size()) * 3.0));
    REQUIRE_THAT(evaluate_rmse(zero, ds), Catch::Matchers::WithinRel(want, 1e-12));
}

TEST_CASE("training lowers the loss and reports finite rmse", "[harness]") {
    DatasetConfig dcfg;
    dcfg.n_traj = 3;
    MapDataset ds = generate_dataset(dcfg);
    TrainConfig tcfg;
    tcfg.epochs = 60;
    tcfg.seed = 5;
    TrainingRun run = train(make_cn(3, 4, Activation::tanh, false), ds, tcfg);
    REQUIRE_FALSE(run.diverged);
    REQUIRE(run.loss_history.size() == 60);
    REQUIRE(run.loss_history.back() < run.loss_history.front());
    REQUIRE(std::isfinite(run.rmse_train));
    REQUIRE(run.rmse_train > 0.0);
}

TEST_CASE("training is reproducible for a fixed seed", "[harness]") {
    DatasetConfig dcfg;
    dcfg.n_traj = 2;
    MapDataset ds = generate_dataset(dcfg);
    TrainConfig tcfg;
    tcfg.epochs = 30;
    tcfg.seed = 11;
    TrainingRun a = train(make_cn(3, 3, Activation::tanh, false), ds, tcfg);
    TrainingRun b = train(make_cn(3, 3, Activation::tanh, false), ds, tcfg);
    REQUIRE(get_parameters(a.circuit) == get_parameters(b.circuit));
    REQUIRE(a.rmse_train == b.rmse_train);
}

TEST_CASE("free runs of the identity skip map stay put", "[harness]") {
    NeuralCircuit c = make_cn(3, 0, Activation::identity, true);
    std::vector<double> theta(static_cast<std::size_t>(count_parameters(c)), 0.0);
    // registry: skip weights row-major (9), then output biases (3)
    theta[0] = 1.0;
    theta[4] = 1.0;
    theta[8] = 1.0;
    set_parameters(c, theta);
    Normalization nm;
    Trajectory t = free_run(c, {5.0, -3.0, 20.0}, 10, nm);
    REQUIRE(t.size() == 11);
    for (const auto& s : t) {
        REQUIRE_THAT(s[0], Catch::Matchers::WithinAbs(5.0, 1e-12));
        REQUIRE_THAT(s[1], Catch::Matchers::WithinAbs(-3.0, 1e-12));
        REQUIRE_THAT(s[2], Catch::Matchers::WithinAbs(20.0, 1e-12));
    }
    REQUIRE(within_validation_bounds(t));
}

TEST_CASE("validation bounds catch excursions", "[harness]") {
    REQUIRE(within_validation_bounds({{0.0, 0.0, 25.0}}));
    REQUIRE_FALSE(within_validation_bounds({{41.0, 0.0, 25.0}}));
    REQUIRE_FALSE(within_validation_bounds({{0.0, 0.0, 80.0}}));
    REQUIRE_FALSE(within_validation_bounds({{0.0, 0.0, -30.0}}));
}

TEST_CASE("largest_lyapunov recovers the log-rate of a linear contraction", "[harness]") {
    auto halver = [](const std::vector<double>& x) {
        return std::vector<double>{0.5 * x[0], 0.5 * x[1]};
    };
    double lam = largest_lyapunov(halver, {1.0, 1.0}, 400, 10, 3);
    REQUIRE_THAT(lam, Catch::Matchers::WithinAbs(std::log(0.5), 1e-6));
}

TEST_CASE("largest_lyapunov of the L63 map is positive", "[harness]") {
    PolynomialSystem sys = l63_system(10.0, 28.0, 8.0 / 3.0);
    RateFn f = rate_of(sys);
    auto map = [&](const std::vector<double>& x) { return rk4_step(f, 0.01, x); };
    std::vector<double> x0{1.0, 1.0, 1.0};
    for (int k = 0; k < 1000; ++k) x0 = map(x0);
    double lam = largest_lyapunov(map, x0, 20000, 10, 42);
    REQUIRE(lam > 0.004);
    REQUIRE(lam < 0.014);
}

TEST_CASE("median handles odd and even counts", "[harness]") {
    REQUIRE(median({3.0, 1.0, 2.0}) == 2.0);
    REQUIRE(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("run_validation produces a coherent report at toy scale", "[harness]") {
    ValidationConfig cfg;
    cfg.sizes = {1, 2};
    cfg.seeds = 1;
    cfg.train_cfg.epochs = 25;
    cfg.free_run_steps = 50;
    cfg.lyapunov_steps = 2000;
    cfg.threads = 1;
    ValidationReport a = run_validation(cfg);
    REQUIRE(a.per_size.size() == 2);
    REQUIRE(a.train_pairs == 1000);
    REQUIRE(a.holdout_pairs == 300);
    for (const SizeValidation& sv : a.per_size) {
        REQUIRE(sv.rmse_train.size() == 1);
        REQUIRE(sv.rmse_holdout.size() == 1);
        REQUIRE(std::isfinite(sv.rmse_holdout_median));
    }
    REQUIRE(a.lyapunov_per_step > 0.0);

    cfg.threads = 4;
    ValidationReport b = run_validation(cfg);
    REQUIRE(a.per_size[0].rmse_holdout == b.per_size[0].rmse_holdout);
    REQUIRE(a.per_size[1].rmse_holdout == b.per_size[1].rmse_holdout);
    REQUIRE(a.lyapunov_per_step == b.lyapunov_per_step);
}
