#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "polynet/circuit.hpp"
#include "polynet/io.hpp"

#ifndef POLYNET_CLI_PATH
#error "POLYNET_CLI_PATH must point at the polynet binary"
#endif

namespace {

namespace fs = std::filesystem;

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() /
                     ("polynet_cli_tests_" + std::to_string(static_cast<long>(::getpid())));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run(const std::string& args) {
    fs::path so = scratch_dir() / "stdout.txt", se = scratch_dir() / "stderr.txt";
    std::string cmd =
        std::string(POLYNET_CLI_PATH) + " " + args + " > " + so.string() + " 2> " + se.string();
    int rc = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

}  // namespace

TEST_CASE("size reports the closed-form bounds as JSON", "[cli]") {
    CliResult r = run("size --n 3 --d 2");
    REQUIRE(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    REQUIRE(j.at("h_polynet") == 6);
    REQUIRE(j.at("h_cn_lower") == 4);
    REQUIRE(j.at("h_sc_lower") == 3);
    REQUIRE(j.at("elt_target") == 30.0);
}

TEST_CASE("metric reports the L63 bound spectrum", "[cli]") {
    CliResult r = run("metric --system l63");
    REQUIRE(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    REQUIRE(j.at("mode") == "corner");
    REQUIRE(j.at("elt") == 6.0);
    REQUIRE(j.at("eigvals")[0] == 4.0);
    REQUIRE(j.at("eigvals")[1] == 1.0);
    REQUIRE(j.at("eigvals")[2] == 1.0);
}

TEST_CASE("metric --samples is seed-deterministic", "[cli]") {
    CliResult a = run("metric --system l63 --samples 64 --seed 7");
    CliResult b = run("metric --system l63 --samples 64 --seed 7");
    REQUIRE(a.code == 0);
    REQUIRE(a.out == b.out);
    CliResult c = run("metric --system l63 --samples 64 --seed 8");
    REQUIRE(c.out != a.out);
}

TEST_CASE("compile writes a loadable circuit plus a digest manifest", "[cli]") {
    fs::path out = scratch_dir() / "l63_circuit.json";
    CliResult r = run("compile --system l63 --out " + out.string());
    REQUIRE(r.code == 0);
    std::string body = slurp(out);
    polynet::NeuralCircuit c = polynet::circuit_from_json(nlohmann::json::parse(body));
    REQUIRE(c.params.size() == 3);
    REQUIRE(c.inputs.size() == 3);

    nlohmann::json manifest = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
    REQUIRE(manifest.at("subcommand") == "compile");
    REQUIRE(manifest.at("outputs")[0].at("path") == out.string());
    REQUIRE(manifest.at("outputs")[0].at("fnv1a64") == polynet::fnv1a64_hex(body));
}

TEST_CASE("simulate emits a step-indexed CSV trajectory", "[cli]") {
    CliResult r = run("simulate --circuit l63 --steps 5 --dt 0.01 --x0 1,1,1");
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    REQUIRE(line == "step,t,x1,x2,x3");
    std::getline(lines, line);
    REQUIRE(line == "0,0,1,1,1");
    int rows = 1;
    while (std::getline(lines, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 6);
}

TEST_CASE("compiled circuits round trip through simulate", "[cli]") {
    fs::path circ = scratch_dir() / "rt_circuit.json";
    REQUIRE(run("compile --system l63 --out " + circ.string()).code == 0);
    CliResult from_file = run("simulate --circuit " + circ.string() + " --steps 3");
    CliResult builtin = run("simulate --circuit l63 --steps 3");
    REQUIRE(from_file.code == 0);
    REQUIRE(from_file.out == builtin.out);
}

TEST_CASE("config files fill options but explicit flags win", "[cli]") {
    fs::path cfg = scratch_dir() / "size_cfg.json";
    std::ofstream(cfg) << "{\"d\": 3, \"eta\": 1.5}\n";
    CliResult filled = run("size --n 3 --config " + cfg.string());
    REQUIRE(filled.code == 0);
    nlohmann::json jf = nlohmann::json::parse(filled.out);
    REQUIRE(jf.at("d") == 3);
    REQUIRE(jf.at("eta") == 1.5);

    CliResult overridden = run("size --n 3 --d 2 --eta 1 --config " + cfg.string());
    REQUIRE(overridden.code == 0);
    nlohmann::json jo = nlohmann::json::parse(overridden.out);
    REQUIRE(jo.at("d") == 2);
    REQUIRE(jo.at("eta") == 1.0);
}

TEST_CASE("usage errors exit 2 with a machine-parsable line", "[cli]") {
    SECTION("unknown flag") {
        CliResult r = run("size --n 3 --d 2 --bogus");
        REQUIRE(r.code == 2);
        REQUIRE(r.err.find("code=usage") != std::string::npos);
    }
    SECTION("missing required option") {
        CliResult r = run("size --n 3");
        REQUIRE(r.code == 2);
        REQUIRE(r.err.find("code=usage") != std::string::npos);
    }
    SECTION("mutually exclusive metric modes") {
        CliResult r = run("metric --system l63 --corner --samples 4");
        REQUIRE(r.code == 2);
        REQUIRE(r.err.find("code=usage") != std::string::npos);
    }
    SECTION("malformed list value") {
        CliResult r = run("simulate --circuit l63 --x0 1,zebra,3");
        REQUIRE(r.code == 2);
        REQUIRE(r.err.find("code=usage") != std::string::npos);
    }
}

TEST_CASE("domain errors exit 1 with a machine-parsable line", "[cli]") {
    SECTION("unreadable system file") {
        CliResult r = run("compile --system /nonexistent/sys.json");
        REQUIRE(r.code == 1);
        REQUIRE(r.err.find("code=domain") != std::string::npos);
    }
    SECTION("divergent trajectory") {
        CliResult r = run("simulate --circuit l63 --steps 50 --x0 1e9,1e9,1e9");
        REQUIRE(r.code == 1);
        REQUIRE(r.err.find("code=divergence") != std::string::npos);
    }
}

TEST_CASE("help and version exit cleanly", "[cli]") {
    REQUIRE(run("--help").code == 0);
    REQUIRE(run("size --help").code == 0);
    CliResult v = run("--version");
    REQUIRE(v.code == 0);
    REQUIRE(v.out.find(polynet::kVersion) != std::string::npos);
}

TEST_CASE("dataset CSV carries the normalization header", "[cli]") {
    CliResult r = run("dataset --trajectories 2 --keep 10 --discard 50");
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string l1, l2;
    std::getline(lines, l1);
    std::getline(lines, l2);
    REQUIRE(l1 == "# normalized=true center=0,0,25 scale=20,20,25");
    REQUIRE(l2 == "x,y,z,xp,yp,zp");
    int rows = 0;
    std::string line;
    while (std::getline(lines, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 20);
}

TEST_CASE("spectra writes sample and posterior CSVs with manifests", "[cli]") {
    fs::path out = scratch_dir() / "spectra.csv";
    fs::path post = scratch_dir() / "post.csv";
    CliResult r = run("spectra --n 2 --hmax 2 --trials 150 --inputs 8 --out " + out.string() +
                      " --posterior-out " + post.string());
    REQUIRE(r.code == 0);
    std::istringstream sl(slurp(out));
    std::string header;
    std::getline(sl, header);
    REQUIRE(header == "h,trial,elt");
    int rows = 0;
    std::string line;
    while (std::getline(sl, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 2 * 150);

    std::istringstream pl(slurp(post));
    std::getline(pl, header);
    REQUIRE(header == "h,d,F_d_given_h,F_h_given_d");

    nlohmann::json manifest = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
    REQUIRE(manifest.at("outputs").size() == 2);
}

TEST_CASE("validate rejects non-positive hidden sizes", "[cli]") {
    CliResult r = run("validate --sizes 0,2 --seeds 1");
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("code=usage") != std::string::npos);
}
