#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "subid/closedloop.hpp"
#include "subid/evalmetrics.hpp"
#include "subid/io.hpp"
#include "subid/openloop.hpp"
#include "subid/simdata.hpp"

using namespace subid;

namespace {

constexpr int kOk = 0;
constexpr int kNumerical = 1;
constexpr int kUsage = 2;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Parse:
        case ErrorKind::BadShape:
        case ErrorKind::Precondition:
        case ErrorKind::BadWindow:
        case ErrorKind::BadLoopSpec:
        case ErrorKind::NotPsd:
        case ErrorKind::MissingGain:
        case ErrorKind::Unsupported:
            return kUsage;
        default:
            return kNumerical;
    }
}

struct SimulateArgs {
    std::string model;
    std::string loop;
    std::string noise;
    double innovation_var = -1.0;
    std::string input_kind = "white";
    double amplitude = 1.0;
    Index switch_period = 1;
    Index samples = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

struct IdentifyArgs {
    std::string data;
    std::string algo = "ols-projected";
    Index p = 5;
    Index f = 5;
    std::string order = "auto";
    bool closed_loop = false;
    std::string extraction = "state";
    std::string weighting = "identity";
    int iters = 3;
    std::uint64_t seed = 0;
    int runs = 0;
    std::string out;
    // Monte Carlo mode
    std::string truth;
    std::string loop;
    double innovation_var = -1.0;
    Index samples = 1000;
};

struct EvaluateArgs {
    std::string truth;
    std::string result;
    std::string data;
    Index depth = 5;
    Index skip = 0;
    std::uint64_t seed = 0;
    std::string out;
};

ExcitationKind parse_kind(const std::string& k) {
    if (k == "white") return ExcitationKind::WhiteGaussian;
    if (k == "binary") return ExcitationKind::BinarySwitching;
    if (k == "zero") return ExcitationKind::Zero;
    throw Error(ErrorKind::Parse, "unknown input kind \"" + k + "\"");
}

bool is_closed_loop_algo(const std::string& a) { return a == "iem" || a == "ssarx" || a == "pbsid"; }

std::optional<OlAlgorithm> parse_ol_algo(const std::string& a) {
    for (auto alg : {OlAlgorithm::OlsJoint, OlAlgorithm::OlsProjected, OlAlgorithm::MoespRq,
                     OlAlgorithm::ClsVectorized, OlAlgorithm::ClsTwostep, OlAlgorithm::ClsCausal}) {
        if (to_string(alg) == a) return alg;
    }
    return std::nullopt;
}

std::optional<Index> parse_order(const std::string& s) {
    if (s == "auto") return std::nullopt;
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size() || v < 1) throw std::invalid_argument(s);
        return static_cast<Index>(v);
    } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, "--order must be \"auto\" or a positive integer");
    }
}

void print_vector(const char* label, const Vector& v) {
    std::cout << label;
    for (Index i = 0; i < v.size(); ++i) std::cout << (i ? ", " : " ") << v(i);
    std::cout << '\n';
}

int cmd_simulate(const SimulateArgs& a) {
    if (a.model.empty() == a.loop.empty()) {
        throw Error(ErrorKind::Parse, "exactly one of --model and --loop is required");
    }
    if (a.samples < 1) throw Error(ErrorKind::Parse, "--samples must be positive");
    DataSet data;
    std::cout << "seed " << a.seed << '\n';
    if (!a.loop.empty()) {
        const LoopSpec loop = loop_from_json(read_json_file(a.loop));
        loop.validate();
        std::cout << "closed-loop spectral radius " << spectral_radius(loop.loop_matrix()) << " (stable)\n";
        data = simulate_closed(loop, a.samples, a.seed).data;
    } else {
        const SsModel m = model_from_json(read_json_file(a.model));
        OpenExperiment exp;
        exp.input = ExcitationSpec{parse_kind(a.input_kind), a.amplitude, a.switch_period};
        if (!a.noise.empty()) exp.noise = noise_from_json(read_json_file(a.noise));
        if (a.innovation_var >= 0.0) exp.innovation_cov = a.innovation_var * Matrix::Identity(m.n_y(), m.n_y());
        const Simulation sim = simulate_experiment(m, exp, a.samples, a.seed);
        const double rho = m.n_x() ? spectral_radius(m.A) : 0.0;
        std::cout << "model spectral radius " << rho << (rho < 1.0 ? " (stable)" : " (unstable)") << '\n';
        if (sim.unstable_warning) std::cerr << "warning: simulating an unstable model over a long horizon\n";
        data = sim.data;
    }
    write_csv_file(a.out, data);
    std::cout << "wrote " << data.n_samples() << " samples to " << a.out << '\n';
    return kOk;
}

IdentResult run_identify(const IdentifyArgs& a, const DataSet& data) {
    const std::optional<Index> order = parse_order(a.order);
    if (is_closed_loop_algo(a.algo)) {
        if ((a.algo == "pbsid" || a.algo == "ssarx") && a.f > a.p) {
            throw Error(ErrorKind::Precondition, "f must not exceed p");
        }
        if (!a.closed_loop) {
            std::cerr << "warning: " << a.algo
                      << " run without --closed-loop; D is estimated as for open-loop data\n";
        }
        ClOptions o;
        o.p = a.p;
        o.f = a.f;
        o.order = order;
        o.closed_loop = a.closed_loop;
        if (a.algo == "iem") return iem_identify(data, o);
        if (a.algo == "ssarx") return ssarx_identify(data, o);
        return pbsid_identify(data, o);
    }
    const auto alg = parse_ol_algo(a.algo);
    if (!alg) throw Error(ErrorKind::Parse, "unknown algorithm \"" + a.algo + "\"");
    if (a.closed_loop) {
        std::cerr << "warning: " << a.algo << " is an open-loop method; estimates from closed-loop data may be biased\n";
    }
    IdentOptions o;
    o.p = a.p;
    o.f = a.f;
    o.order = order;
    o.algorithm = *alg;
    o.twostep_iters = a.iters;
    if (a.extraction == "state") {
        o.extraction = Extraction::State;
    } else if (a.extraction == "observability") {
        o.extraction = Extraction::Observability;
    } else {
        throw Error(ErrorKind::Parse, "unknown extraction \"" + a.extraction + "\"");
    }
    if (a.weighting == "identity") {
        o.weighting = Weighting::Identity;
    } else if (a.weighting == "cca") {
        o.weighting = Weighting::Cca;
    } else {
        throw Error(ErrorKind::Parse, "unknown weighting \"" + a.weighting + "\"");
    }
    return identify_ol(data, o);
}

int cmd_identify_runs(const IdentifyArgs& a) {
    if (a.truth.empty() == a.loop.empty()) {
        throw Error(ErrorKind::Parse, "--runs needs exactly one of --model or --loop");
    }
    std::optional<LoopSpec> loop;
    SsModel truth;
    if (!a.loop.empty()) {
        loop = loop_from_json(read_json_file(a.loop));
        truth = loop->plant;
    } else {
        truth = model_from_json(read_json_file(a.truth));
    }
    Json runs = Json::array();
    std::vector<double> dists;
    for (int r = 0; r < a.runs; ++r) {
        const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(r);
        DataSet data;
        if (loop) {
            data = simulate_closed(*loop, a.samples, seed).data;
        } else {
            OpenExperiment exp;
            if (a.innovation_var >= 0.0) {
                exp.innovation_cov = a.innovation_var * Matrix::Identity(truth.n_y(), truth.n_y());
            }
            data = simulate_experiment(truth, exp, a.samples, seed).data;
        }
        const IdentResult res = run_identify(a, data);
        const double d = eig_distance(truth, res.model);
        dists.push_back(d);
        Json entry = result_to_json(res);
        entry["seed"] = seed;
        entry["eig_distance"] = d;
        runs.push_back(entry);
        std::cout << "run " << r << " seed " << seed << " eig_distance " << d << '\n';
    }
    std::sort(dists.begin(), dists.end());
    const double median = dists.empty() ? 0.0
                                        : 0.5 * (dists[dists.size() / 2] + dists[(dists.size() - 1) / 2]);
    std::cout << "median eig_distance " << median << '\n';
    write_json_file(a.out, Json{{"runs", runs}, {"median_eig_distance", median}});
    return kOk;
}

int cmd_identify(const IdentifyArgs& a) {
    if (a.runs > 0) return cmd_identify_runs(a);
    if (a.data.empty()) throw Error(ErrorKind::Parse, "--data is required");
    const DataSet data = read_csv_file(a.data);
    const IdentResult res = run_identify(a, data);
    std::cout << std::setprecision(6);
    print_vector("singular values:", res.singular_values);
    std::cout << "order " << res.order << '\n';
    for (const auto& f : res.rank_flags) std::cout << "flag: " << f << '\n';
    write_json_file(a.out, result_to_json(res));
    return kOk;
}

int cmd_evaluate(const EvaluateArgs& a) {
    const SsModel truth = model_from_json(read_json_file(a.truth));
    const IdentResult res = result_from_json(read_json_file(a.result));
    if (truth.n_u() != res.model.n_u() || truth.n_y() != res.model.n_y()) {
        throw Error(ErrorKind::BadShape, "truth and estimate have different input/output dimensions");
    }
    MetricReport rep;
    rep.eig_distance = eig_distance(truth, res.model);
    rep.markov_error = markov_error(truth, res.model, a.depth);
    if (!a.data.empty()) {
        const DataSet data = read_csv_file(a.data);
        rep.vaf = vaf(res.model, data, a.skip);
    }
    std::cout << std::setprecision(6) << "eig_distance " << rep.eig_distance << '\n'
              << "markov_error " << rep.markov_error << '\n';
    for (std::size_t i = 0; i < rep.vaf.vaf.size(); ++i) {
        std::cout << "vaf y" << i + 1 << ' ';
        if (rep.vaf.vaf[i]) {
            std::cout << *rep.vaf.vaf[i] << '\n';
        } else {
            std::cout << "n/a (zero variance)\n";
        }
    }
    write_json_file(a.out, report_to_json(rep));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subspace identification of linear state-space systems"};
    app.require_subcommand(1);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Simulate a model or a closed loop and write CSV data");
    sim->add_option("--model", sa.model, "SsModel JSON");
    sim->add_option("--loop", sa.loop, "Closed-loop JSON with plant, controller, noise, r1, r2");
    sim->add_option("--noise", sa.noise, "NoiseSpec JSON (process form)");
    sim->add_option("--innovation-var", sa.innovation_var, "Innovation variance (innovation form, needs K)");
    sim->add_option("--input-kind", sa.input_kind, "white | binary | zero")->capture_default_str();
    sim->add_option("--amplitude", sa.amplitude, "Input amplitude")->capture_default_str();
    sim->add_option("--switch-period", sa.switch_period, "Hold period for binary input")->capture_default_str();
    sim->add_option("--samples", sa.samples, "Number of samples")->capture_default_str();
    sim->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
    sim->add_option("--out", sa.out, "Output CSV")->required();

    IdentifyArgs ia;
    auto* idf = app.add_subcommand("identify", "Identify a model from CSV data");
    idf->add_option("--data", ia.data, "Input CSV");
    idf->add_option("--algo", ia.algo,
                    "ols-joint | ols-projected | moesp-rq | cls-vec | cls-2step | cls-causal | iem | ssarx | pbsid")
        ->capture_default_str();
    idf->add_option("--p", ia.p, "Past window")->capture_default_str();
    idf->add_option("--f", ia.f, "Future window")->capture_default_str();
    idf->add_option("--order", ia.order, "Model order or auto")->capture_default_str();
    idf->add_flag("--closed-loop", ia.closed_loop, "Data were collected under feedback");
    idf->add_option("--extraction", ia.extraction, "state | observability")->capture_default_str();
    idf->add_option("--weighting", ia.weighting, "identity | cca")->capture_default_str();
    idf->add_option("--iters", ia.iters, "Two-step iterations")->capture_default_str();
    idf->add_option("--seed", ia.seed, "First seed for --runs")->capture_default_str();
    idf->add_option("--runs", ia.runs, "Monte Carlo runs of simulate + identify");
    idf->add_option("--model", ia.truth, "Truth model for --runs");
    idf->add_option("--loop", ia.loop, "Loop JSON for --runs");
    idf->add_option("--innovation-var", ia.innovation_var, "Innovation variance for --runs");
    idf->add_option("--samples", ia.samples, "Samples per run for --runs")->capture_default_str();
    idf->add_option("--out", ia.out, "Output JSON")->required();

    EvaluateArgs ea;
    auto* ev = app.add_subcommand("evaluate", "Compare an identified model against the truth");
    ev->add_option("--truth", ea.truth, "Truth SsModel JSON")->required();
    ev->add_option("--result", ea.result, "IdentResult JSON")->required();
    ev->add_option("--data", ea.data, "CSV for VAF");
    ev->add_option("--depth", ea.depth, "Markov depth")->capture_default_str();
    ev->add_option("--skip", ea.skip, "Samples excluded from VAF")->capture_default_str();
    ev->add_option("--seed", ea.seed, "Unused; accepted for uniformity");
    ev->add_option("--out", ea.out, "Output report JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kUsage;
    }

    try {
        if (*sim) return cmd_simulate(sa);
        if (*idf) return cmd_identify(ia);
        if (*ev) return cmd_evaluate(ea);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kUsage;
}
