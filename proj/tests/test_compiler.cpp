#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "polynet/compiler.hpp"
#include "polynet/polysys.hpp"
#include "polynet/rng.hpp"

using namespace polynet;

TEST_CASE("polynet_size counts degree>=2 monomials", "[compiler]") {
    REQUIRE(polynet_size(3, 2) == 6);
    REQUIRE(polynet_size(3, 3) == 16);
    REQUIRE(polynet_size(2, 1) == 0);
    REQUIRE(polynet_size(1, 4) == 3);
    REQUIRE(polynet_size(4, 0) == 0);
}

TEST_CASE("sparse L63 compile keeps only the used products", "[compiler]") {
    PolyNet pn = compile_polynet(l63_system(10.0, 28.0, 8.0 / 3.0), false);
    REQUIRE(pn.hidden_count == 2);  // XY and XZ
    REQUIRE(count_parameters(pn.circuit) == 3);
    REQUIRE(pn.circuit.params[0].name == "sigma");
    REQUIRE(pn.circuit.params[1].name == "rho");
    REQUIRE(pn.circuit.params[2].name == "beta");
}

TEST_CASE("full L63 compile instantiates every degree-2 product", "[compiler]") {
    PolyNet pn = compile_polynet(l63_system(10.0, 28.0, 8.0 / 3.0), true);
    REQUIRE(pn.hidden_count == 6);
    REQUIRE(count_parameters(pn.circuit) == 3);  // tying unchanged
}

TEST_CASE("untied full compile exposes every coefficient", "[compiler]") {
    PolynomialSystem s = make_system(3, 2);
    PolyNet pn = compile_polynet(s, true);
    REQUIRE(pn.hidden_count == 6);
    REQUIRE(count_parameters(pn.circuit) == 30);  // 3 rows x (bias + 9 coefficients)
}

TEST_CASE("product hidden nodes carry exponent multiplicities", "[compiler]") {
    PolynomialSystem s = make_system(2, 3);
    Rng rng(5);
    for (double& a : s.alpha.a) a = rng.normal();
    PolyNet pn = compile_polynet(s, true);
    // x1^2 x2 must appear as a product node with mult 2 from input 0 and 1 from input 1
    bool found = false;
    for (std::size_t id = 0; id < pn.circuit.nodes.size(); ++id) {
        if (pn.circuit.nodes[id].kind != NodeKind::product) continue;
        int m0 = 0, m1 = 0;
        for (const Edge& e : pn.circuit.edges)
            if (e.to == static_cast<int>(id)) {
                if (e.from == 0) m0 = e.multiplicity;
                if (e.from == 1) m1 = e.multiplicity;
            }
        if (m0 == 2 && m1 == 1) found = true;
    }
    REQUIRE(found);
}

TEST_CASE("compiled circuits equal polynomial evaluation bit for bit", "[compiler]") {
    Rng rng(13);
    SECTION("untied, full") {
        PolynomialSystem s = make_system(3, 2);
        for (double& a : s.alpha.a) a = rng.normal();
        PolyNet pn = compile_polynet(s, true);
        for (int t = 0; t < 50; ++t) {
            std::vector<double> x{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                  rng.uniform(-1.5, 1.5)};
            REQUIRE(forward_map(pn.circuit, x) == evaluate(s, x));
        }
    }
    SECTION("tied L63, sparse") {
        PolynomialSystem s = l63_system(10.0, 28.0, 8.0 / 3.0);
        PolyNet pn = compile_polynet(s, false);
        for (int t = 0; t < 50; ++t) {
            std::vector<double> x{rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0),
                                  rng.uniform(0.0, 50.0)};
            REQUIRE(forward_map(pn.circuit, x) == evaluate(s, x));
        }
    }
}

TEST_CASE("setting compiled parameters matches recompiling the system", "[compiler]") {
    NeuralCircuit c = compile_polynet(l63_system(10.0, 28.0, 8.0 / 3.0), false).circuit;
    set_parameters(c, {9.0, 30.0, 2.0});
    PolynomialSystem s2 = l63_system(9.0, 30.0, 2.0);
    Rng rng(19);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> x{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                              rng.uniform(0.0, 40.0)};
        REQUIRE(forward_map(c, x) == evaluate(s2, x));
    }
}

TEST_CASE("degree<=1 systems compile without hidden nodes", "[compiler]") {
    PolynomialSystem s = make_system(2, 1);
    Rng rng(29);
    for (double& a : s.alpha.a) a = rng.normal();
    PolyNet pn = compile_polynet(s, true);
    REQUIRE(pn.hidden_count == 0);
    std::vector<double> x{0.4, -1.2};
    REQUIRE(forward_map(pn.circuit, x) == evaluate(s, x));
}
