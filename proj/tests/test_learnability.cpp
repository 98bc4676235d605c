#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "polynet/compiler.hpp"
#include "polynet/learnability.hpp"
#include "polynet/polysys.hpp"
#include "polynet/rng.hpp"

using namespace polynet;

TEST_CASE("metric builds G = JJ^T with a descending spectrum", "[learnability]") {
    Matrix j(2, 2);
    j(0, 0) = 1.0;
    j(0, 1) = 2.0;
    j(1, 0) = 3.0;
    j(1, 1) = 4.0;
    LearnabilityMetric lm = metric(j);
    REQUIRE(lm.g(0, 0) == 5.0);
    REQUIRE(lm.g(0, 1) == 11.0);
    REQUIRE(lm.g(1, 0) == 11.0);
    REQUIRE(lm.g(1, 1) == 25.0);
    REQUIRE(elt(lm) == 30.0);
    double lam1 = (30.0 + std::sqrt(884.0)) / 2.0;
    double lam2 = (30.0 - std::sqrt(884.0)) / 2.0;
    REQUIRE_THAT(lm.eigvals[0], Catch::Matchers::WithinAbs(lam1, 1e-12));
    REQUIRE_THAT(lm.eigvals[1], Catch::Matchers::WithinAbs(lam2, 1e-12));
    REQUIRE(spectral_norm(lm) == lm.eigvals[0]);

    // eigvectors satisfy G v = lambda v
    for (int k = 0; k < 2; ++k) {
        for (int r = 0; r < 2; ++r) {
            double gv = lm.g(r, 0) * lm.eigvecs(0, k) + lm.g(r, 1) * lm.eigvecs(1, k);
            REQUIRE_THAT(gv, Catch::Matchers::WithinAbs(lm.eigvals[k] * lm.eigvecs(r, k), 1e-9));
        }
    }
}

TEST_CASE("elt equals the squared Frobenius norm of J", "[learnability]") {
    Rng rng(3);
    Matrix j(3, 7);
    for (double& v : j.a) v = rng.normal();
    REQUIRE_THAT(elt(metric(j)), Catch::Matchers::WithinRel(fro2(j), 1e-12));
}

TEST_CASE("metric_from_gram agrees with metric", "[learnability]") {
    Rng rng(5);
    Matrix j(3, 4);
    for (double& v : j.a) v = rng.normal();
    LearnabilityMetric a = metric(j);
    LearnabilityMetric b = metric_from_gram(matmul(j, transpose(j)));
    for (std::size_t k = 0; k < a.eigvals.size(); ++k)
        REQUIRE_THAT(a.eigvals[k], Catch::Matchers::WithinAbs(b.eigvals[k], 1e-12));
}

TEST_CASE("error circle maps unit directions through U sqrt(Sigma)", "[learnability]") {
    Matrix j = Matrix::identity(2);
    j(0, 0) = 2.0;  // G = diag(4, 1)
    LearnabilityMetric lm = metric(j);
    std::vector<double> e1 = error_circle_map(lm, {1.0, 0.0});
    std::vector<double> e2 = error_circle_map(lm, {0.0, 1.0});
    double n1 = std::hypot(e1[0], e1[1]);
    double n2 = std::hypot(e2[0], e2[1]);
    REQUIRE_THAT(n1, Catch::Matchers::WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(n2, Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THROWS_AS(error_circle_map(lm, {1.0}), std::invalid_argument);
}

TEST_CASE("contraction_factor is max |1 - beta lambda|", "[learnability]") {
    Matrix j = Matrix::identity(2);
    j(0, 0) = 2.0;  // eigvals (4, 1)
    LearnabilityMetric lm = metric(j);
    REQUIRE_THAT(contraction_factor(lm, 0.4), Catch::Matchers::WithinAbs(0.6, 1e-12));
    REQUIRE_THAT(contraction_factor(lm, 2.0), Catch::Matchers::WithinAbs(7.0, 1e-12));
    REQUIRE_THROWS_AS(contraction_factor(lm, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(contraction_factor(lm, -0.1), std::invalid_argument);
}

TEST_CASE("gradient descent contracts linear-in-parameter models per step", "[learnability]") {
    Rng rng(7);
    PolynomialSystem s = make_system(2, 2);
    for (double& a : s.alpha.a) a = rng.normal();
    NeuralCircuit model = compile_polynet(s, true).circuit;
    std::vector<double> x{0.8, -0.6};
    LearnabilityMetric lm = metric(parameter_jacobian(model, x));
    double beta = 0.5 / lm.eigvals[0];
    double factor = contraction_factor(lm, beta);
    REQUIRE(factor < 1.0);

    std::vector<double> ystar = forward_map(model, x);
    ystar[0] += 1.0;
    ystar[1] -= 0.5;
    GdResult gd = simulate_gd(model, {x}, {ystar}, beta, 20);
    REQUIRE_FALSE(gd.diverged);
    REQUIRE(gd.error_norms.size() == 21);
    for (std::size_t j = 0; j + 1 < gd.error_norms.size(); ++j)
        REQUIRE(gd.error_norms[j + 1] <= factor * gd.error_norms[j] + 1e-8);
    REQUIRE(gd.error_norms.back() < 1e-3 * gd.error_norms.front());
}

TEST_CASE("gradient descent flags divergence at absurd rates", "[learnability]") {
    Rng rng(9);
    PolynomialSystem s = make_system(2, 2);
    for (double& a : s.alpha.a) a = rng.normal();
    NeuralCircuit model = compile_polynet(s, true).circuit;
    std::vector<double> x{0.8, -0.6};
    LearnabilityMetric lm = metric(parameter_jacobian(model, x));
    double beta = 50.0 / lm.eigvals[0];
    std::vector<double> ystar = forward_map(model, x);
    ystar[0] += 1.0;
    GdResult gd = simulate_gd(model, {x}, {ystar}, beta, 200);
    REQUIRE(gd.diverged);
}

TEST_CASE("simulate_gd rejects nonlinear activations and empty batches", "[learnability]") {
    NeuralCircuit tanh_net = make_cn(2, 2, Activation::tanh, false);
    std::vector<std::vector<double>> xs{{0.1, 0.2}};
    std::vector<std::vector<double>> ys{{0.0, 0.0}};
    REQUIRE_THROWS_AS(simulate_gd(tanh_net, xs, ys, 0.1, 5), std::invalid_argument);

    NeuralCircuit lin = make_cn(2, 2, Activation::identity, false);
    REQUIRE_THROWS_AS(simulate_gd(lin, {}, {}, 0.1, 5), std::invalid_argument);
}
