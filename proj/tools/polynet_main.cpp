// polynet command-line tool: compile polynomial systems to exact circuits,
// integrate them, measure learnability, size networks (closed-form and
// Bayesian), and run the Lorenz-63 training validation.
//
// Conventions shared by all subcommands:
//   * reports go to stdout unless --out is given;
//   * with --out, a sibling <out>.manifest.json records the resolved
//     configuration, seed, version, wall time, and FNV-1a digests of every
//     file written;
//   * report bodies never contain wall times or thread counts, so repeated
//     runs (at any --threads) are byte-identical;
//   * usage errors exit 2, domain errors exit 1, and every failure prints a
//     one-line "code=... message=..." to stderr.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "polynet/circuit.hpp"
#include "polynet/compiler.hpp"
#include "polynet/harness.hpp"
#include "polynet/io.hpp"
#include "polynet/learnability.hpp"
#include "polynet/linalg.hpp"
#include "polynet/polysys.hpp"
#include "polynet/rng.hpp"
#include "polynet/sizing.hpp"
#include "polynet/steppers.hpp"

namespace {

using nlohmann::ordered_json;

std::chrono::steady_clock::time_point g_start;

double elapsed_ms() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - g_start)
        .count();
}

// --config accepts a flat JSON object whose keys are long option names of the
// invoked subcommand; values fill any option not set explicitly on the command
// line.  The option lives on the root app because CLI11 only processes config
// files there; keys are routed to the active subcommand via ConfigItem parents.
class JsonConfig : public CLI::Config {
  public:
    explicit JsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App* app, bool default_also, bool,
                          std::string) const override {
        ordered_json j = ordered_json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
            if (!opt->get_default_str().empty() && default_also)
                j[opt->get_lnames()[0]] = opt->get_default_str();
        }
        return j.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(input);
        } catch (const std::exception& e) {
            throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConfigError("config must be a flat JSON object");

        // The config file is read after argv parsing, so the parsed subcommand
        // chain is known; address every key to the innermost one.
        std::vector<std::string> parents;
        for (const CLI::App* a = root_; a != nullptr;) {
            std::vector<CLI::App*> subs = a->get_subcommands();
            a = subs.empty() ? nullptr : subs.front();
            if (a != nullptr) parents.push_back(a->get_name());
        }

        std::vector<CLI::ConfigItem> items;
        for (auto it = j.begin(); it != j.end(); ++it) {
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            const nlohmann::json& v = it.value();
            if (v.is_array())
                for (const auto& e : v) item.inputs.push_back(scalar(e));
            else
                item.inputs.push_back(scalar(v));
            items.push_back(std::move(item));
        }
        return items;
    }

  private:
    static std::string scalar(const nlohmann::json& v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
    }

    const CLI::App* root_;
};

std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "'" + tok + "' is not a number");
        }
    }
    if (out.empty()) throw CLI::ValidationError(flag, "expected a comma-separated list");
    return out;
}

std::vector<int> parse_ints(const std::string& text, const std::string& flag) {
    std::vector<int> out;
    for (double v : parse_doubles(text, flag)) {
        int i = static_cast<int>(v);
        if (static_cast<double>(i) != v) throw CLI::ValidationError(flag, "expected integers");
        out.push_back(i);
    }
    return out;
}

ordered_json mat_rows(const polynet::Matrix& m) {
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        ordered_json row = ordered_json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

polynet::PolynomialSystem load_system(const std::string& ref) {
    if (ref == "l63") return polynet::l63_system(10.0, 28.0, 8.0 / 3.0);
    return polynet::system_from_json(nlohmann::json::parse(polynet::read_file(ref)));
}

polynet::NeuralCircuit load_circuit(const std::string& ref) {
    if (ref == "l63")
        return polynet::compile_polynet(polynet::l63_system(10.0, 28.0, 8.0 / 3.0), false).circuit;
    return polynet::circuit_from_json(nlohmann::json::parse(polynet::read_file(ref)));
}

struct FileOut {
    std::string path;
    std::string content;
};

// Writes the primary report to --out (or stdout when empty) plus any extra
// files, then drops the manifest next to the first file written.
void deliver(const std::string& subcommand, const ordered_json& config, std::uint64_t seed,
             const std::string& out_path, const std::string& content,
             const std::vector<FileOut>& extras = {}) {
    std::vector<FileOut> written;
    if (out_path.empty()) {
        std::cout << content;
    } else {
        polynet::write_file(out_path, content);
        written.push_back({out_path, content});
    }
    for (const FileOut& e : extras) {
        polynet::write_file(e.path, e.content);
        written.push_back(e);
    }
    if (written.empty()) return;
    std::vector<std::pair<std::string, std::string>> digests;
    for (const FileOut& w : written) digests.emplace_back(w.path, polynet::fnv1a64_hex(w.content));
    ordered_json manifest = polynet::make_manifest(subcommand, config, seed, elapsed_ms(), digests);
    std::string mpath = written.front().path + ".manifest.json";
    polynet::write_file(mpath, manifest.dump(2) + "\n");
    for (const FileOut& w : written) std::cerr << "wrote " << w.path << "\n";
    std::cerr << "wrote " << mpath << "\n";
}

// ---------------------------------------------------------------------------
// compile
// ---------------------------------------------------------------------------

struct CompileOpts {
    std::string system;
    bool full = false;
    std::string out;
    std::uint64_t seed = 42;
};

void add_compile(CLI::App& app) {
    auto o = std::make_shared<CompileOpts>();
    CLI::App* c = app.add_subcommand("compile", "Compile a polynomial system to an exact circuit");
    c->add_option("--system", o->system, "System JSON file, or the builtin 'l63'")->required();
    c->add_flag("--full", o->full, "Emit product nodes for all degree>=2 monomials, used or not");
    c->add_option("--out", o->out, "Write circuit JSON here instead of stdout");
    c->add_option("--seed", o->seed, "Recorded in the manifest; compilation is deterministic");
    c->callback([o] {
        polynet::PolynomialSystem sys = load_system(o->system);
        polynet::PolyNet pn = polynet::compile_polynet(sys, o->full);
        ordered_json cfg{{"system", o->system}, {"full", o->full}};
        deliver("compile", cfg, o->seed, o->out, polynet::circuit_to_json(pn.circuit).dump(2) + "\n");
    });
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
    std::string circuit;
    std::string scheme = "rk4";
    double dt = 0.01;
    long long steps = 1000;
    std::string x0 = "1,1,1";
    std::string out;
    std::uint64_t seed = 42;
};

void add_simulate(CLI::App& app) {
    auto o = std::make_shared<SimulateOpts>();
    CLI::App* c = app.add_subcommand("simulate", "Integrate a circuit under a stepper network");
    c->add_option("--circuit", o->circuit, "Circuit JSON file, or the builtin 'l63'")->required();
    c->add_option("--scheme", o->scheme, "Time stepper")
        ->check(CLI::IsMember({"rk4", "abm2"}))
        ->capture_default_str();
    c->add_option("--dt", o->dt, "Step size")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--steps", o->steps, "Number of steps")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--x0", o->x0, "Initial state, comma separated")->capture_default_str();
    c->add_option("--out", o->out, "Write trajectory CSV here instead of stdout");
    c->add_option("--seed", o->seed, "Recorded in the manifest; integration is deterministic");
    c->callback([o] {
        polynet::NeuralCircuit circ = load_circuit(o->circuit);
        std::vector<double> x0 = parse_doubles(o->x0, "--x0");
        if (x0.size() != circ.inputs.size())
            throw std::invalid_argument("simulate: --x0 has " + std::to_string(x0.size()) +
                                        " entries but the circuit takes " +
                                        std::to_string(circ.inputs.size()));
        polynet::StepperCircuit sc =
            polynet::build_stepper_circuit(circ, polynet::scheme_from_string(o->scheme), o->dt);
        polynet::Trajectory traj = polynet::simulate(sc, x0, o->steps);

        std::string csv = "step,t";
        for (std::size_t j = 0; j < x0.size(); ++j) csv += ",x" + std::to_string(j + 1);
        csv += "\n";
        for (std::size_t k = 0; k < traj.size(); ++k) {
            csv += std::to_string(k);
            csv += ",";
            csv += polynet::dtos(static_cast<double>(k) * o->dt);
            for (double v : traj[k]) {
                csv += ",";
                csv += polynet::dtos(v);
            }
            csv += "\n";
        }
        ordered_json cfg{{"circuit", o->circuit},
                         {"scheme", o->scheme},
                         {"dt", o->dt},
                         {"steps", o->steps},
                         {"x0", o->x0}};
        deliver("simulate", cfg, o->seed, o->out, csv);
    });
}

// ---------------------------------------------------------------------------
// metric
// ---------------------------------------------------------------------------

struct MetricOpts {
    std::string system;
    bool corner = false;
    int samples = 0;
    std::uint64_t seed = 42;
    std::string out;
};

void add_metric(CLI::App& app) {
    auto o = std::make_shared<MetricOpts>();
    CLI::App* c = app.add_subcommand("metric", "Learnability metric G = JJ^T of a system");
    c->add_option("--system", o->system, "System JSON file, or the builtin 'l63'")->required();
    c->add_flag("--corner", o->corner,
                "Evaluate at the magnitude bound |x_i|=1 (default when --samples is absent)");
    c->add_option("--samples", o->samples, "Average G over N uniform draws from [-1,1]^n")
        ->check(CLI::PositiveNumber);
    c->add_option("--seed", o->seed, "Stream seed for --samples")->capture_default_str();
    c->add_option("--out", o->out, "Write report JSON here instead of stdout");
    c->callback([o] {
        if (o->corner && o->samples > 0)
            throw CLI::ValidationError("metric", "--corner and --samples are mutually exclusive");
        polynet::PolynomialSystem sys = load_system(o->system);
        polynet::LearnabilityMetric lm;
        std::string mode;
        if (o->samples > 0) {
            mode = "sampled";
            const int n = sys.n;
            polynet::Matrix acc(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
            polynet::Rng rng(o->seed);
            std::vector<double> x(static_cast<std::size_t>(n));
            for (int s = 0; s < o->samples; ++s) {
                for (double& xi : x) xi = rng.uniform(-1.0, 1.0);
                polynet::Matrix j = polynet::parameter_jacobian(sys, x);
                polynet::Matrix g = polynet::matmul(j, polynet::transpose(j));
                for (std::size_t i = 0; i < acc.a.size(); ++i) acc.a[i] += g.a[i];
            }
            for (double& v : acc.a) v /= static_cast<double>(o->samples);
            lm = polynet::metric_from_gram(acc);
        } else {
            mode = "corner";
            lm = polynet::metric(polynet::bound_jacobian(sys));
        }
        ordered_json rpt;
        rpt["system"] = o->system;
        rpt["mode"] = mode;
        rpt["n"] = sys.n;
        rpt["free_parameters"] = sys.free_parameters();
        rpt["elt"] = polynet::elt(lm);
        rpt["spectral_norm"] = polynet::spectral_norm(lm);
        rpt["eigvals"] = lm.eigvals;
        rpt["g"] = mat_rows(lm.g);
        ordered_json cfg{{"system", o->system}, {"mode", mode}, {"samples", o->samples}};
        deliver("metric", cfg, o->seed, o->out, rpt.dump(2) + "\n");
    });
}

// ---------------------------------------------------------------------------
// size
// ---------------------------------------------------------------------------

struct SizeOpts {
    int n = 0;
    int d = 0;
    double eta = 1.0;
    bool bayes = false;
    int trials = 2000;
    int inputs = 64;
    int hmax = 20;
    int dmax = 6;
    double p0 = 0.5;
    std::uint64_t seed = 42;
    int threads = 0;
    std::string out;
};

polynet::BayesConfig bayes_config(int trials, int inputs, int hmax, int dmax, double p0,
                                  std::uint64_t seed, int threads) {
    polynet::BayesConfig bc;
    bc.hmax = hmax;
    bc.dmax = dmax;
    bc.p0 = p0;
    bc.sim.trials = trials;
    bc.sim.input_samples = inputs;
    bc.sim.seed = seed;
    bc.sim.threads = threads;
    return bc;
}

ordered_json cells_json(const polynet::BayesResult& br) {
    ordered_json cells = ordered_json::array();
    for (const polynet::CellSummary& cs : br.cells) {
        ordered_json c;
        c["h"] = cs.h;
        c["elt_star"] = cs.gev.elt_star;
        c["c_hat"] = cs.c_hat;
        c["c_eff"] = cs.c_eff;
        c["gev"] = ordered_json{
            {"location", cs.gev.location}, {"scale", cs.gev.scale}, {"shape", cs.gev.shape}};
        cells.push_back(std::move(c));
    }
    return cells;
}

void add_size(CLI::App& app) {
    auto o = std::make_shared<SizeOpts>();
    CLI::App* c = app.add_subcommand("size", "Network size bounds for emulating degree-d dynamics");
    c->add_option("--n", o->n, "State dimension")->required()->check(CLI::PositiveNumber);
    c->add_option("--d", o->d, "Polynomial degree")->required()->check(CLI::NonNegativeNumber);
    c->add_option("--eta", o->eta, "Learnability margin (>= 1)")->capture_default_str();
    c->add_flag("--bayes", o->bayes, "Also run the Monte Carlo spectral bound");
    c->add_option("--trials", o->trials, "Monte Carlo trials per grid size")
        ->capture_default_str();
    c->add_option("--inputs", o->inputs, "Corner samples per trial")->capture_default_str();
    c->add_option("--hmax", o->hmax, "Largest hidden size on the grid")->capture_default_str();
    c->add_option("--dmax", o->dmax, "Largest equivalent degree tracked")->capture_default_str();
    c->add_option("--p0", o->p0, "Posterior quantile defining h*")->capture_default_str();
    c->add_option("--seed", o->seed, "Base seed for the Monte Carlo")->capture_default_str();
    c->add_option("--threads", o->threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
    c->add_option("--out", o->out, "Write report JSON here instead of stdout");
    c->callback([o] {
        polynet::BayesConfig bc =
            bayes_config(o->trials, o->inputs, o->hmax, o->dmax, o->p0, o->seed, o->threads);
        polynet::BayesResult br;
        polynet::SizingReport rep = polynet::sizing_report(o->n, o->d, o->eta, o->bayes, bc, &br);
        ordered_json rpt;
        rpt["n"] = rep.n;
        rpt["d"] = rep.d;
        rpt["eta"] = rep.eta;
        rpt["elt_target"] = rep.elt_target;
        rpt["h_polynet"] = rep.h_polynet;
        rpt["h_cn_lower"] = rep.h_cn;
        rpt["h_sc_lower"] = rep.h_sc;
        if (rep.has_bayes) {
            rpt["h_bayes"] = rep.h_bayes;
            rpt["p0"] = rep.p0;
            rpt["bayes"] = ordered_json{{"trials", o->trials},
                                        {"inputs", o->inputs},
                                        {"hmax", o->hmax},
                                        {"dmax", o->dmax},
                                        {"seed", o->seed}};
            rpt["cells"] = cells_json(br);
            rpt["warnings"] = br.warnings;
        }
        ordered_json cfg{{"n", o->n},           {"d", o->d},         {"eta", o->eta},
                         {"bayes", o->bayes},   {"trials", o->trials}, {"inputs", o->inputs},
                         {"hmax", o->hmax},     {"dmax", o->dmax},   {"p0", o->p0},
                         {"threads", o->threads}};
        deliver("size", cfg, o->seed, o->out, rpt.dump(2) + "\n");
    });
}

// ---------------------------------------------------------------------------
// spectra
// ---------------------------------------------------------------------------

struct SpectraOpts {
    int n = 3;
    int hmax = 20;
    int dmax = 6;
    int trials = 2000;
    int inputs = 64;
    std::uint64_t seed = 42;
    int threads = 0;
    std::string out;
    std::string posterior_out;
};

void add_spectra(CLI::App& app) {
    auto o = std::make_shared<SpectraOpts>();
    CLI::App* c = app.add_subcommand(
        "spectra", "Random-network ELT spectra and the degree posterior over the h grid");
    c->add_option("--n", o->n, "State dimension")->capture_default_str();
    c->add_option("--hmax", o->hmax, "Largest hidden size on the grid")->capture_default_str();
    c->add_option("--dmax", o->dmax, "Largest equivalent degree tracked")->capture_default_str();
    c->add_option("--trials", o->trials, "Monte Carlo trials per grid size")
        ->capture_default_str();
    c->add_option("--inputs", o->inputs, "Corner samples per trial")->capture_default_str();
    c->add_option("--seed", o->seed, "Base seed for the Monte Carlo")->capture_default_str();
    c->add_option("--threads", o->threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
    c->add_option("--out", o->out, "Write sample CSV here instead of stdout");
    c->add_option("--posterior-out", o->posterior_out,
                  "Posterior CSV path (default: posterior.csv next to --out)");
    c->callback([o] {
        polynet::BayesConfig bc =
            bayes_config(o->trials, o->inputs, o->hmax, o->dmax, 0.5, o->seed, o->threads);
        polynet::BayesResult br = polynet::spectra_grid(o->n, bc);

        std::string samples = "h,trial,elt\n";
        for (const polynet::EltDistribution& dist : br.dists)
            for (std::size_t t = 0; t < dist.samples.size(); ++t) {
                samples += std::to_string(dist.h);
                samples += ",";
                samples += std::to_string(t);
                samples += ",";
                samples += polynet::dtos(dist.samples[t]);
                samples += "\n";
            }

        const polynet::DegreePosterior& post = br.posterior;
        std::string posterior = "h,d,F_d_given_h,F_h_given_d\n";
        for (std::size_t r = 0; r < post.hs.size(); ++r)
            for (int d = 0; d <= post.dmax; ++d) {
                posterior += std::to_string(post.hs[r]);
                posterior += ",";
                posterior += std::to_string(d);
                posterior += ",";
                posterior += polynet::dtos(post.f_d_given_h(r, static_cast<std::size_t>(d)));
                posterior += ",";
                posterior += polynet::dtos(post.f_h_given_d(r, static_cast<std::size_t>(d)));
                posterior += "\n";
            }

        std::string ppath = o->posterior_out;
        if (ppath.empty()) {
            std::filesystem::path base =
                o->out.empty() ? std::filesystem::path("posterior.csv")
                               : std::filesystem::path(o->out).parent_path() / "posterior.csv";
            ppath = base.string();
        }
        ordered_json cfg{{"n", o->n},           {"hmax", o->hmax},
                         {"dmax", o->dmax},     {"trials", o->trials},
                         {"inputs", o->inputs}, {"threads", o->threads},
                         {"posterior_out", ppath}};
        deliver("spectra", cfg, o->seed, o->out, samples, {{ppath, posterior}});
    });
}

// ---------------------------------------------------------------------------
// dataset
// ---------------------------------------------------------------------------

struct DatasetOpts {
    int trajectories = 10;
    int keep = 100;
    int discard = 2000;
    double dt = 0.01;
    std::uint64_t seed = 42;
    bool full_scale = false;
    int threads = 0;
    std::string out;
};

void add_dataset(CLI::App& app) {
    auto o = std::make_shared<DatasetOpts>();
    CLI::App* c =
        app.add_subcommand("dataset", "Normalized Lorenz-63 one-step-map training pairs");
    CLI::Option* otraj =
        c->add_option("--trajectories", o->trajectories, "Trajectory count")->capture_default_str();
    CLI::Option* okeep =
        c->add_option("--keep", o->keep, "Post-transient steps kept per trajectory")
            ->capture_default_str();
    CLI::Option* odisc = c->add_option("--discard", o->discard, "Transient steps dropped")
                             ->capture_default_str();
    c->add_option("--dt", o->dt, "Step size")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--seed", o->seed, "Stream seed for initial conditions")->capture_default_str();
    c->add_flag("--full-scale", o->full_scale,
                "Use the full protocol (1000 trajectories x 500 kept steps)");
    c->add_option("--threads", o->threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
    c->add_option("--out", o->out, "Write dataset CSV here instead of stdout");
    c->callback([o, otraj, okeep, odisc] {
        polynet::DatasetConfig dc;
        if (o->full_scale) dc = polynet::full_scale_config(o->seed, o->threads);
        if (!o->full_scale || otraj->count() > 0) dc.n_traj = o->trajectories;
        if (!o->full_scale || okeep->count() > 0) dc.keep = o->keep;
        if (!o->full_scale || odisc->count() > 0) dc.discard = o->discard;
        dc.total_steps = dc.discard + dc.keep;
        dc.dt = o->dt;
        dc.seed = o->seed;
        dc.threads = o->threads;
        polynet::MapDataset ds = polynet::generate_dataset(dc);

        const polynet::Normalization& nm = ds.norm;
        std::string csv = "# normalized=true center=";
        csv += polynet::dtos(nm.center[0]) + "," + polynet::dtos(nm.center[1]) + "," +
               polynet::dtos(nm.center[2]);
        csv += " scale=" + polynet::dtos(nm.scale[0]) + "," + polynet::dtos(nm.scale[1]) + "," +
               polynet::dtos(nm.scale[2]);
        csv += "\nx,y,z,xp,yp,zp\n";
        for (std::size_t i = 0; i < ds.size(); ++i) {
            csv += polynet::dtos(ds.x[i][0]);
            for (int j = 1; j < 3; ++j) csv += "," + polynet::dtos(ds.x[i][j]);
            for (int j = 0; j < 3; ++j) csv += "," + polynet::dtos(ds.xp[i][j]);
            csv += "\n";
        }
        ordered_json cfg{{"trajectories", dc.n_traj}, {"keep", dc.keep},
                         {"discard", dc.discard},     {"dt", dc.dt},
                         {"full_scale", o->full_scale}, {"threads", o->threads},
                         {"excluded", ds.excluded}};
        deliver("dataset", cfg, o->seed, o->out, csv);
    });
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateOpts {
    std::string sizes = "2,4,6,8";
    int seeds = 3;
    bool full_scale = false;
    double lr = 0.2;
    int epochs = 1000;
    double lambda = 1e-4;
    long long free_run_steps = 500;
    std::uint64_t seed = 42;
    int threads = 0;
    std::string out;
};

void add_validate(CLI::App& app) {
    auto o = std::make_shared<ValidateOpts>();
    CLI::App* c = app.add_subcommand(
        "validate", "Train tanh networks on Lorenz-63 map data and check the size bounds");
    c->add_option("--sizes", o->sizes, "Hidden sizes, comma separated")->capture_default_str();
    c->add_option("--seeds", o->seeds, "Training restarts per size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_flag("--full-scale", o->full_scale, "Use the full dataset protocol");
    c->add_option("--lr", o->lr, "Gradient step size")->capture_default_str();
    c->add_option("--epochs", o->epochs, "Training epochs")->capture_default_str();
    c->add_option("--lambda", o->lambda, "L2 penalty")->capture_default_str();
    c->add_option("--free-run-steps", o->free_run_steps, "Closed-loop rollout length")
        ->capture_default_str();
    c->add_option("--seed", o->seed, "Base seed for data and training")->capture_default_str();
    c->add_option("--threads", o->threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
    c->add_option("--out", o->out, "Write report JSON here instead of stdout");
    c->callback([o] {
        polynet::ValidationConfig vc;
        vc.sizes = parse_ints(o->sizes, "--sizes");
        for (int h : vc.sizes)
            if (h < 1) throw CLI::ValidationError("--sizes", "hidden sizes must be >= 1");
        vc.seeds = o->seeds;
        vc.full_scale = o->full_scale;
        vc.train_cfg.lr = o->lr;
        vc.train_cfg.epochs = o->epochs;
        vc.train_cfg.lambda = o->lambda;
        vc.seed = o->seed;
        vc.threads = o->threads;
        vc.free_run_steps = o->free_run_steps;
        polynet::ValidationReport rep = polynet::run_validation(vc);

        ordered_json rpt;
        rpt["system"] = "l63";
        rpt["dataset"] = ordered_json{{"full_scale", o->full_scale},
                                      {"train_pairs", rep.train_pairs},
                                      {"holdout_pairs", rep.holdout_pairs},
                                      {"excluded_trajectories", rep.excluded_trajectories}};
        rpt["training"] = ordered_json{{"lr", o->lr},
                                       {"epochs", o->epochs},
                                       {"lambda", o->lambda},
                                       {"seeds", o->seeds},
                                       {"free_run_steps", o->free_run_steps}};
        ordered_json per = ordered_json::array();
        for (const polynet::SizeValidation& sv : rep.per_size) {
            ordered_json s;
            s["h"] = sv.h;
            s["rmse_train"] = sv.rmse_train;
            s["rmse_holdout"] = sv.rmse_holdout;
            s["rmse_train_median"] = sv.rmse_train_median;
            s["rmse_holdout_median"] = sv.rmse_holdout_median;
            s["free_run_bounded"] = sv.free_run_bounded;
            s["free_run_bounded_all"] = sv.free_run_bounded_all;
            s["diverged_runs"] = sv.diverged_runs;
            per.push_back(std::move(s));
        }
        rpt["per_size"] = std::move(per);
        rpt["lyapunov"] = ordered_json{{"per_step", rep.lyapunov_per_step},
                                       {"per_time", rep.lyapunov_per_time},
                                       {"positive", rep.lyapunov_per_step > 0.0}};
        ordered_json cfg{{"sizes", o->sizes},   {"seeds", o->seeds},
                         {"full_scale", o->full_scale}, {"lr", o->lr},
                         {"epochs", o->epochs}, {"lambda", o->lambda},
                         {"free_run_steps", o->free_run_steps}, {"threads", o->threads}};
        deliver("validate", cfg, o->seed, o->out, rpt.dump(2) + "\n");
    });
}

}  // namespace

int main(int argc, char** argv) {
    g_start = std::chrono::steady_clock::now();
    CLI::App app{"polynet: size, compile, and validate neural emulators of polynomial dynamics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", polynet::kVersion);
    // Subcommands inherit these at creation: fallthrough lets --config appear
    // after the subcommand name, and unknown config keys are hard errors.
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.set_config("--config", "",
                   "JSON file with defaults for the chosen subcommand (keys are long option names)");
    add_compile(app);
    add_simulate(app);
    add_metric(app);
    add_size(app);
    add_spectra(app);
    add_dataset(app);
    add_validate(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        if (code == 0) return 0;
        std::cerr << "code=usage message=" << e.get_name() << "\n";
        return 2;
    } catch (const polynet::DivergenceError& e) {
        std::cerr << "code=divergence message=" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "code=domain message=" << e.what() << "\n";
        return 1;
    }
    return 0;
}
