// Command-line front end: file-based, deterministic wrappers around
// assembly, simulation, operator learning, drift prediction, Kalman
// filtering, the evaluation harness and the synthetic generator. Every
// subcommand writes a <name>_manifest.json recording the resolved
// configuration so runs can be reproduced exactly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "netdiff/dynamics.hpp"
#include "netdiff/errors.hpp"
#include "netdiff/experiment.hpp"
#include "netdiff/io.hpp"
#include "netdiff/kalman.hpp"
#include "netdiff/multinet.hpp"
#include "netdiff/operator_learning.hpp"
#include "netdiff/random.hpp"

namespace fs = std::filesystem;
using netdiff::io::Json;

namespace {

// Stream ids for seed derivation inside the CLI; disjoint from the
// library's internal streams.
constexpr std::uint64_t kCliInitStream = 11;
constexpr std::uint64_t kCliMaskStream = 21;

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path resolve_output_dir(const std::string& flag_value) {
    fs::path dir;
    if (!flag_value.empty()) {
        dir = flag_value;
    } else if (const char* env = std::getenv("NETDIFF_OUTPUT_DIR"); env && *env) {
        dir = env;
    } else {
        dir = ".";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw netdiff::IoError("cannot create output directory " + dir.string());
    return dir;
}

netdiff::StructureMode parse_structure(const std::string& name) {
    if (name == "full") return netdiff::StructureMode::full;
    if (name == "kron") return netdiff::StructureMode::kron_constrained;
    throw netdiff::ValidationError("--structure must be full or kron");
}

std::string structure_name(netdiff::StructureMode mode) {
    return mode == netdiff::StructureMode::full ? "full" : "kron";
}

// ---------------------------------------------------------------------------
// Config file schema: {"scenario": {...}, "experiment": {...},
// "replications": n}, every section optional, unknown keys rejected.

netdiff::SyntheticParams scenario_from_json(const Json& j) {
    netdiff::SyntheticParams p;
    netdiff::io::expect_object(j, "scenario");
    netdiff::io::expect_keys(j, "scenario",
                             {"layer_sizes", "intra_edge_probability", "coupling",
                              "intra_constants", "inter_constant", "sigma_scale", "topics",
                              "steps", "dt", "exact_drift"});
    if (j.contains("layer_sizes")) p.layer_sizes = j["layer_sizes"].get<std::vector<int>>();
    if (j.contains("intra_edge_probability"))
        p.intra_edge_probability = j["intra_edge_probability"].get<double>();
    if (j.contains("coupling")) {
        const Json& c = j["coupling"];
        netdiff::io::expect_object(c, "scenario.coupling");
        netdiff::io::expect_keys(c, "scenario.coupling", {"kind", "probability"});
        if (c.contains("kind")) {
            const std::string kind = c["kind"].get<std::string>();
            if (kind == "identity")
                p.coupling.kind = netdiff::CouplingPattern::Kind::identity;
            else if (kind == "random")
                p.coupling.kind = netdiff::CouplingPattern::Kind::random;
            else
                throw netdiff::ValidationError(
                    "scenario.coupling.kind must be \"identity\" or \"random\"");
        }
        if (c.contains("probability")) p.coupling.probability = c["probability"].get<double>();
    }
    if (j.contains("intra_constants"))
        p.intra_constants = j["intra_constants"].get<std::vector<double>>();
    if (j.contains("inter_constant")) p.inter_constant = j["inter_constant"].get<double>();
    if (j.contains("sigma_scale")) p.sigma_scale = j["sigma_scale"].get<double>();
    if (j.contains("topics")) p.topics = j["topics"].get<int>();
    if (j.contains("steps")) p.steps = j["steps"].get<int>();
    if (j.contains("dt")) p.dt = j["dt"].get<double>();
    if (j.contains("exact_drift")) p.exact_drift = j["exact_drift"].get<bool>();
    return p;
}

Json scenario_to_json(const netdiff::SyntheticParams& p) {
    Json j = Json::object();
    j["layer_sizes"] = p.layer_sizes;
    j["intra_edge_probability"] = p.intra_edge_probability;
    j["coupling"] = {{"kind", p.coupling.kind == netdiff::CouplingPattern::Kind::identity
                                  ? "identity"
                                  : "random"},
                     {"probability", p.coupling.probability}};
    j["intra_constants"] = p.intra_constants;
    j["inter_constant"] = p.inter_constant;
    j["sigma_scale"] = p.sigma_scale;
    j["topics"] = p.topics;
    j["steps"] = p.steps;
    j["dt"] = p.dt;
    j["exact_drift"] = p.exact_drift;
    return j;
}

void apply_experiment_json(const Json& j, netdiff::ExperimentConfig& c) {
    netdiff::io::expect_object(j, "experiment");
    netdiff::io::expect_keys(j, "experiment",
                             {"train_fraction", "observation_fraction", "hidden_edge_fraction",
                              "selection", "gamma", "eta", "max_sweeps", "patience",
                              "structure_mode", "r_scale", "p0_scale"});
    if (j.contains("train_fraction")) c.train_fraction = j["train_fraction"].get<double>();
    if (j.contains("observation_fraction"))
        c.observation_fraction = j["observation_fraction"].get<double>();
    if (j.contains("hidden_edge_fraction"))
        c.hidden_edge_fraction = j["hidden_edge_fraction"].get<double>();
    if (j.contains("selection")) {
        const std::string s = j["selection"].get<std::string>();
        if (s == "uniform")
            c.selection = netdiff::NodeSelection::uniform;
        else if (s == "hub")
            c.selection = netdiff::NodeSelection::hub;
        else
            throw netdiff::ValidationError("experiment.selection must be \"uniform\" or \"hub\"");
    }
    if (j.contains("gamma")) c.learn.gamma = j["gamma"].get<double>();
    if (j.contains("eta")) c.learn.eta = j["eta"].get<double>();
    if (j.contains("max_sweeps")) c.learn.max_iters = j["max_sweeps"].get<int>();
    if (j.contains("patience")) c.learn.divergence_patience = j["patience"].get<int>();
    if (j.contains("structure_mode"))
        c.structure_mode = parse_structure(j["structure_mode"].get<std::string>());
    if (j.contains("r_scale")) c.r_scale = j["r_scale"].get<double>();
    if (j.contains("p0_scale")) c.p0_scale = j["p0_scale"].get<double>();
}

Json experiment_to_json(const netdiff::ExperimentConfig& c) {
    Json j = Json::object();
    j["train_fraction"] = c.train_fraction;
    j["observation_fraction"] = c.observation_fraction;
    j["hidden_edge_fraction"] = c.hidden_edge_fraction;
    j["selection"] = c.selection == netdiff::NodeSelection::uniform ? "uniform" : "hub";
    j["gamma"] = c.learn.gamma;
    j["eta"] = c.learn.eta;
    j["max_sweeps"] = c.learn.max_iters;
    j["patience"] = c.learn.divergence_patience;
    j["structure_mode"] = structure_name(c.structure_mode);
    j["r_scale"] = c.r_scale;
    j["p0_scale"] = c.p0_scale;
    j["seed"] = c.seed;
    return j;
}

Json load_config_file(const std::string& path) {
    if (path.empty()) return Json::object();
    Json root = netdiff::io::read_json_file(path);
    netdiff::io::expect_object(root, "top level");
    netdiff::io::expect_keys(root, "top level", {"scenario", "experiment", "replications"});
    return root;
}

// ---------------------------------------------------------------------------
// build

struct BuildOpts {
    std::string input;
    std::string output_dir;
};

void run_build(const BuildOpts& opts) {
    Stopwatch watch;
    const fs::path dir = resolve_output_dir(opts.output_dir);
    const netdiff::MultilayerNetwork network = netdiff::io::read_network(opts.input);
    const netdiff::SupraLaplacian supra = netdiff::assemble_supra(network);
    netdiff::io::write_matrix_csv(dir / "laplacian.csv", supra.matrix);
    netdiff::io::write_index_map(dir / "index_map.json", supra);

    netdiff::io::RunManifest manifest;
    manifest.subcommand = "build";
    manifest.resolved_config = Json::object();
    manifest.inputs = {opts.input};
    manifest.outputs = {(dir / "laplacian.csv").string(), (dir / "index_map.json").string()};
    manifest.duration_seconds = watch.seconds();
    netdiff::io::write_manifest(dir / "build_manifest.json", manifest);
    std::cout << "assembled " << supra.total_nodes() << "x" << supra.total_nodes()
              << " supra-Laplacian -> " << (dir / "laplacian.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
    std::string input;
    std::string states;
    std::string output_dir;
    int topics = 1;
    double dt = 1.0;
    int steps = 50;
    double sigma = 0.01;
    double t0 = 0.0;
    bool exact_drift = false;
    std::uint64_t seed = 0;
};

void run_simulate(const SimulateOpts& opts, bool t0_given) {
    Stopwatch watch;
    const fs::path dir = resolve_output_dir(opts.output_dir);
    const netdiff::MultilayerNetwork network = netdiff::io::read_network(opts.input);
    const netdiff::SupraLaplacian supra = netdiff::assemble_supra(network);
    const int total = supra.total_nodes();

    netdiff::StateMatrix x0;
    double t0 = opts.t0;
    int topics = opts.topics;
    std::vector<std::string> inputs = {opts.input};
    if (!opts.states.empty()) {
        const netdiff::Trajectory init = netdiff::io::read_states_csv(opts.states);
        if (init.nodes() != total)
            throw netdiff::ValidationError("initial states file has " +
                                           std::to_string(init.nodes()) + " nodes, network has " +
                                           std::to_string(total));
        x0 = init.states.back();
        topics = init.topics();
        if (!t0_given) t0 = init.timestamps.back();
        inputs.push_back(opts.states);
    } else {
        if (topics < 1) throw netdiff::ValidationError("--topics must be positive");
        auto rng = netdiff::make_rng(netdiff::derive_seed(opts.seed, kCliInitStream));
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        x0.resize(total, topics);
        for (int i = 0; i < total; ++i)
            for (int k = 0; k < topics; ++k) x0(i, k) = uniform(rng);
    }

    netdiff::NoiseSpec noise{Eigen::MatrixXd::Constant(total, topics, opts.sigma)};
    netdiff::OuOptions options;
    options.exact_drift = opts.exact_drift;
    options.t0 = t0;
    const netdiff::Trajectory trajectory =
        netdiff::simulate_ou(supra, x0, noise, opts.dt, opts.steps, opts.seed, options);
    netdiff::io::write_states_csv(dir / "states.csv", trajectory);
    for (const auto& warning : trajectory.warnings)
        std::cerr << "warning: " << warning << "\n";

    netdiff::io::RunManifest manifest;
    manifest.subcommand = "simulate";
    manifest.resolved_config = {{"dt", opts.dt},     {"steps", opts.steps},
                                {"sigma", opts.sigma}, {"exact_drift", opts.exact_drift},
                                {"t0", t0},          {"topics", topics}};
    manifest.seed = opts.seed;
    manifest.inputs = inputs;
    manifest.outputs = {(dir / "states.csv").string()};
    manifest.duration_seconds = watch.seconds();
    netdiff::io::write_manifest(dir / "simulate_manifest.json", manifest);
    std::cout << "simulated " << trajectory.length() << " states -> "
              << (dir / "states.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// learn

struct LearnOpts {
    std::string input;
    std::string network;
    std::string output_dir;
    std::string structure = "full";
    netdiff::LearnConfig config;
};

void run_learn(const LearnOpts& opts) {
    Stopwatch watch;
    const fs::path dir = resolve_output_dir(opts.output_dir);
    const netdiff::Trajectory trajectory = netdiff::io::read_states_csv(opts.input);
    const netdiff::MultilayerNetwork network = netdiff::io::read_network(opts.network);
    const netdiff::SupraLaplacian supra = netdiff::assemble_supra(network);
    if (supra.total_nodes() != trajectory.nodes())
        throw netdiff::ValidationError("states file has " + std::to_string(trajectory.nodes()) +
                                       " nodes, network has " +
                                       std::to_string(supra.total_nodes()));
    const netdiff::LambdaEstimate lambda0 =
        netdiff::initial_lambda(supra, trajectory.topics(), parse_structure(opts.structure));
    const netdiff::LearnResult result = netdiff::learn_lambda(trajectory, lambda0, opts.config);
    netdiff::io::write_lambda(dir / "lambda.csv", dir / "lambda_meta.json", result);

    netdiff::io::RunManifest manifest;
    manifest.subcommand = "learn";
    manifest.resolved_config = {{"gamma", opts.config.gamma},
                                {"eta", opts.config.eta},
                                {"max_sweeps", opts.config.max_iters},
                                {"patience", opts.config.divergence_patience},
                                {"structure", opts.structure}};
    manifest.inputs = {opts.input, opts.network};
    manifest.outputs = {(dir / "lambda.csv").string(), (dir / "lambda_meta.json").string()};
    manifest.duration_seconds = watch.seconds();
    netdiff::io::write_manifest(dir / "learn_manifest.json", manifest);
    std::cout << "learned operator in " << result.sweeps << " sweeps ("
              << (result.converged ? "converged" : "sweep limit reached")
              << ", mean residual "
              << (result.sweep_residuals.empty() ? 0.0 : result.sweep_residuals.back()) << ") -> "
              << (dir / "lambda.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
    std::string input;
    std::string network;
    std::string output_dir;
    double dt = 1.0;
};

void run_predict(const PredictOpts& opts) {
    Stopwatch watch;
    const fs::path dir = resolve_output_dir(opts.output_dir);
    const netdiff::Trajectory trajectory = netdiff::io::read_states_csv(opts.input);
    const netdiff::MultilayerNetwork network = netdiff::io::read_network(opts.network);
    const netdiff::SupraLaplacian supra = netdiff::assemble_supra(network);
    if (supra.total_nodes() != trajectory.nodes())
        throw netdiff::ValidationError("states file has " + std::to_string(trajectory.nodes()) +
                                       " nodes, network has " +
                                       std::to_string(supra.total_nodes()));
    if (opts.dt < 0.0) throw netdiff::ValidationError("--dt must be >= 0");

    netdiff::Trajectory predicted;
    for (int s = 0; s < trajectory.length(); ++s) {
        predicted.timestamps.push_back(trajectory.timestamps[s] + opts.dt);
        predicted.states.push_back(netdiff::predict_drift(supra, trajectory.states[s], opts.dt));
    }
    netdiff::io::write_states_csv(dir / "predicted.csv", predicted);

    netdiff::io::RunManifest manifest;
    manifest.subcommand = "predict";
    manifest.resolved_config = {{"dt", opts.dt}};
    manifest.inputs = {opts.input, opts.network};
    manifest.outputs = {(dir / "predicted.csv").string()};
    manifest.duration_seconds = watch.seconds();
    netdiff::io::write_manifest(dir / "predict_manifest.json", manifest);
    std::cout << "predicted " << predicted.length() << " states at dt=" << opts.dt << " -> "
              << (dir / "predicted.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// kalman

struct KalmanOpts {
    std::string input;
    std::string lambda_csv;
    std::string lambda_meta;
    std::string mask_file;
    std::string output_dir;
    double observe_fraction = -1.0;
    double r_scale = 1e-6;
    double q_scale = 1e-6;
    double p0_scale = 1.0;
    std::uint64_t seed = 0;
};

void run_kalman(const KalmanOpts& opts, bool seed_given) {
    Stopwatch watch;
    const fs::path dir = resolve_output_dir(opts.output_dir);
    const netdiff::Trajectory trajectory = netdiff::io::read_states_csv(opts.input);
    if (trajectory.length() < 2)
        throw netdiff::ValidationError(
            "states file needs the prior state plus at least one observation (2+ timestamps)");
    const netdiff::LambdaEstimate lambda =
        netdiff::io::read_lambda(opts.lambda_csv, opts.lambda_meta);
    if (lambda.nodes != trajectory.nodes() || lambda.topics != trajectory.topics())
        throw netdiff::ValidationError("operator is for " + std::to_string(lambda.nodes) +
                                       " nodes x " + std::to_string(lambda.topics) +
                                       " topics, states file has " +
                                       std::to_string(trajectory.nodes()) + "x" +
                                       std::to_string(trajectory.topics()));

    const int total = trajectory.nodes();
    std::vector<int> observed;
    if (!opts.mask_file.empty() && opts.observe_fraction >= 0.0)
        throw netdiff::ValidationError("give either --mask or --observe-fraction, not both");
    if (!opts.mask_file.empty()) {
        observed = netdiff::io::read_mask_nodes(opts.mask_file);
    } else if (opts.observe_fraction >= 0.0) {
        if (!seed_given)
            throw netdiff::ValidationError("--observe-fraction needs --seed for the node draw");
        if (opts.observe_fraction > 1.0)
            throw netdiff::ValidationError("--observe-fraction must be in [0,1]");
        const int count = static_cast<int>(std::ceil(opts.observe_fraction * total));
        std::vector<int> nodes(total);
        std::iota(nodes.begin(), nodes.end(), 0);
        auto rng = netdiff::make_rng(netdiff::derive_seed(opts.seed, kCliMaskStream));
        std::shuffle(nodes.begin(), nodes.end(), rng);
        nodes.resize(count);
        observed = std::move(nodes);
    } else {
        throw netdiff::ValidationError("provide either --mask or --observe-fraction");
    }
    const netdiff::ObservationMask mask =
        netdiff::ObservationMask::of(observed, total, trajectory.topics());

    const Eigen::Index nt = static_cast<Eigen::Index>(total) * trajectory.topics();
    netdiff::NoiseCov noise;
    noise.q = opts.q_scale * Eigen::MatrixXd::Identity(nt, nt);
    noise.r =
        opts.r_scale * Eigen::MatrixXd::Identity(mask.observed_dim(), mask.observed_dim());

    std::vector<Eigen::VectorXd> observations;
    for (int s = 1; s < trajectory.length(); ++s)
        observations.push_back(mask.select(netdiff::vectorize(trajectory.states[s])));

    const Eigen::VectorXd x0 = netdiff::vectorize(trajectory.states.front());
    const Eigen::MatrixXd p0 = opts.p0_scale * Eigen::MatrixXd::Identity(nt, nt);
    const auto steps = netdiff::run_filter(lambda, x0, p0, mask, noise, observations);
    netdiff::io::write_filter_csv(dir / "filter.csv", steps, total, trajectory.topics(),
                                  trajectory.timestamps[1]);
    netdiff::io::write_mask(dir / "mask.json", mask);

    netdiff::io::RunManifest manifest;
    manifest.subcommand = "kalman";
    manifest.resolved_config = {{"r_scale", opts.r_scale},
                                {"q_scale", opts.q_scale},
                                {"p0_scale", opts.p0_scale},
                                {"observed_count", mask.observed_count()}};
    if (seed_given) manifest.seed = opts.seed;
    manifest.inputs = {opts.input, opts.lambda_csv, opts.lambda_meta};
    if (!opts.mask_file.empty()) manifest.inputs.push_back(opts.mask_file);
    manifest.outputs = {(dir / "filter.csv").string(), (dir / "mask.json").string()};
    manifest.duration_seconds = watch.seconds();
    netdiff::io::write_manifest(dir / "kalman_manifest.json", manifest);
    std::cout << "filtered " << steps.size() << " observations (" << mask.observed_count() << "/"
              << total << " nodes observed) -> " << (dir / "filter.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// gen

struct GenOpts {
    std::string config;
    std::string output_dir;
    std::uint64_t seed = 0;
};

void run_gen(const GenOpts& opts) {
    Stopwatch watch;
    const fs::path dir = resolve_output_dir(opts.output_dir);
    const Json root = load_config_file(opts.config);
    netdiff::SyntheticParams params;
    if (root.contains("scenario")) params = scenario_from_json(root["scenario"]);
    const netdiff::Synthetic data = netdiff::generate_synthetic(params, opts.seed);
    netdiff::io::write_network(dir / "network.json", data.network);
    netdiff::io::write_states_csv(dir / "states.csv", data.trajectory);

    netdiff::io::RunManifest manifest;
    manifest.subcommand = "gen";
    manifest.resolved_config = {{"scenario", scenario_to_json(params)}};
    manifest.seed = opts.seed;
    if (!opts.config.empty()) manifest.inputs = {opts.config};
    manifest.outputs = {(dir / "network.json").string(), (dir / "states.csv").string()};
    manifest.duration_seconds = watch.seconds();
    netdiff::io::write_manifest(dir / "gen_manifest.json", manifest);
    std::cout << "generated " << data.network.total_nodes() << " nodes, "
              << data.trajectory.length() << " states -> " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string config;
    std::string network;
    std::string input;
    std::string output_dir;
    std::string selection;
    std::string structure;
    int replications = 1;
    double train_fraction = -1.0;
    double observe_fraction = -1.0;
    double hidden_fraction = -1.0;
    std::uint64_t seed = 0;
};

void run_eval(const EvalOpts& opts) {
    Stopwatch watch;
    const fs::path dir = resolve_output_dir(opts.output_dir);
    const Json root = load_config_file(opts.config);

    netdiff::SyntheticParams params;
    if (root.contains("scenario")) params = scenario_from_json(root["scenario"]);
    netdiff::ExperimentConfig config;
    if (root.contains("experiment")) apply_experiment_json(root["experiment"], config);
    int replications = root.contains("replications") ? root["replications"].get<int>() : 1;

    if (opts.replications > 0) replications = opts.replications;
    if (opts.train_fraction >= 0.0) config.train_fraction = opts.train_fraction;
    if (opts.observe_fraction >= 0.0) config.observation_fraction = opts.observe_fraction;
    if (opts.hidden_fraction >= 0.0) config.hidden_edge_fraction = opts.hidden_fraction;
    if (!opts.selection.empty()) {
        if (opts.selection == "uniform")
            config.selection = netdiff::NodeSelection::uniform;
        else if (opts.selection == "hub")
            config.selection = netdiff::NodeSelection::hub;
        else
            throw netdiff::ValidationError("--selection must be uniform or hub");
    }
    if (!opts.structure.empty()) config.structure_mode = parse_structure(opts.structure);
    config.seed = opts.seed;

    const bool file_route = !opts.network.empty() || !opts.input.empty();
    netdiff::AggregateResult aggregate;
    std::vector<std::string> inputs;
    if (!opts.config.empty()) inputs.push_back(opts.config);
    if (file_route) {
        if (opts.network.empty() || opts.input.empty())
            throw netdiff::ValidationError("file-based eval needs both --network and --input");
        const netdiff::MultilayerNetwork network = netdiff::io::read_network(opts.network);
        const netdiff::Trajectory trajectory = netdiff::io::read_states_csv(opts.input);
        aggregate = netdiff::run_replicated(config, network, trajectory, replications);
        inputs.push_back(opts.network);
        inputs.push_back(opts.input);
    } else {
        aggregate = netdiff::run_replicated(config, params, replications);
    }

    Json echo = Json::object();
    if (!file_route) echo["scenario"] = scenario_to_json(params);
    echo["experiment"] = experiment_to_json(config);
    echo["replications"] = replications;
    netdiff::io::write_errors_csv(dir / "errors.csv", aggregate);
    netdiff::io::write_summary_json(dir / "summary.json", aggregate, echo, replications);

    netdiff::io::RunManifest manifest;
    manifest.subcommand = "eval";
    manifest.resolved_config = echo;
    manifest.seed = opts.seed;
    manifest.inputs = inputs;
    manifest.outputs = {(dir / "errors.csv").string(), (dir / "summary.json").string()};
    manifest.duration_seconds = watch.seconds();
    netdiff::io::write_manifest(dir / "eval_manifest.json", manifest);

    std::cout << "mean normalized error over " << replications << " run(s):\n";
    for (const auto& [name, value] : aggregate.mean_error_all)
        std::cout << "  " << name << ": " << value << "\n";
    std::cout << "wrote " << (dir / "summary.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion modeling on interconnected multilayer networks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", netdiff::io::kToolVersion);

    auto build = std::make_shared<BuildOpts>();
    auto* build_cmd = app.add_subcommand("build", "Assemble the supra-Laplacian of a network");
    build_cmd->add_option("--input", build->input, "network JSON file")->required();
    build_cmd->add_option("--output-dir", build->output_dir, "output directory");
    build_cmd->callback([build] { run_build(*build); });

    auto sim = std::make_shared<SimulateOpts>();
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate the stochastic diffusion process");
    sim_cmd->add_option("--input", sim->input, "network JSON file")->required();
    sim_cmd->add_option("--states", sim->states,
                        "initial states CSV (its last timestamp seeds the run)");
    sim_cmd->add_option("--topics", sim->topics, "topic dimension for a random initial state");
    sim_cmd->add_option("--dt", sim->dt, "step size");
    sim_cmd->add_option("--steps", sim->steps, "number of transitions")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--sigma", sim->sigma, "noise scale for every node and topic");
    auto* t0_opt = sim_cmd->add_option("--t0", sim->t0, "timestamp of the initial state");
    sim_cmd->add_flag("--exact-drift", sim->exact_drift, "step with the exact drift propagator");
    sim_cmd->add_option("--seed", sim->seed, "random seed")->required();
    sim_cmd->add_option("--output-dir", sim->output_dir, "output directory");
    sim_cmd->callback([sim, t0_opt] { run_simulate(*sim, t0_opt->count() > 0); });

    auto learn = std::make_shared<LearnOpts>();
    auto* learn_cmd = app.add_subcommand("learn", "Learn the diffusion operator from states");
    learn_cmd->add_option("--input", learn->input, "states CSV file")->required();
    learn_cmd->add_option("--network", learn->network, "network JSON for initialization")
        ->required();
    learn_cmd->add_option("--gamma", learn->config.gamma, "update gain");
    learn_cmd->add_option("--eta", learn->config.eta,
                          "convergence threshold (<= 0: 1e-4*sqrt(NT))");
    learn_cmd->add_option("--max-sweeps", learn->config.max_iters, "sweep limit")
        ->check(CLI::PositiveNumber);
    learn_cmd->add_option("--patience", learn->config.divergence_patience,
                          "rising sweeps before the gain is halved");
    learn_cmd->add_option("--structure", learn->structure, "operator structure: full or kron");
    learn_cmd->add_option("--output-dir", learn->output_dir, "output directory");
    learn_cmd->callback([learn] { run_learn(*learn); });

    auto predict = std::make_shared<PredictOpts>();
    auto* predict_cmd = app.add_subcommand("predict", "Drift-only forecast of every state");
    predict_cmd->add_option("--input", predict->input, "states CSV file")->required();
    predict_cmd->add_option("--network", predict->network, "network JSON file")->required();
    predict_cmd->add_option("--dt", predict->dt, "forecast horizon")->required();
    predict_cmd->add_option("--output-dir", predict->output_dir, "output directory");
    predict_cmd->callback([predict] { run_predict(*predict); });

    auto kalman = std::make_shared<KalmanOpts>();
    auto* kalman_cmd =
        app.add_subcommand("kalman", "Filter partial observations with a learned operator");
    kalman_cmd->add_option("--input", kalman->input,
                           "states CSV: first timestamp is the prior, the rest are observations")
        ->required();
    kalman_cmd->add_option("--lambda", kalman->lambda_csv, "learned operator CSV")->required();
    kalman_cmd->add_option("--lambda-meta", kalman->lambda_meta, "operator JSON sidecar")
        ->required();
    kalman_cmd->add_option("--mask", kalman->mask_file, "JSON array of observed nodes (1-based)");
    kalman_cmd->add_option("--observe-fraction", kalman->observe_fraction,
                           "draw this fraction of nodes as observed (needs --seed)");
    kalman_cmd->add_option("--r-scale", kalman->r_scale, "observation noise R = r*I");
    kalman_cmd->add_option("--q-scale", kalman->q_scale, "process noise Q = q*I");
    kalman_cmd->add_option("--p0-scale", kalman->p0_scale, "initial covariance P0 = p*I");
    auto* kalman_seed = kalman_cmd->add_option("--seed", kalman->seed, "random seed");
    kalman_cmd->add_option("--output-dir", kalman->output_dir, "output directory");
    kalman_cmd->callback(
        [kalman, kalman_seed] { run_kalman(*kalman, kalman_seed->count() > 0); });

    auto gen = std::make_shared<GenOpts>();
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic network and trajectory");
    gen_cmd->add_option("--config", gen->config, "scenario JSON file");
    gen_cmd->add_option("--seed", gen->seed, "random seed")->required();
    gen_cmd->add_option("--output-dir", gen->output_dir, "output directory");
    gen_cmd->callback([gen] { run_gen(*gen); });

    auto eval = std::make_shared<EvalOpts>();
    auto* eval_cmd = app.add_subcommand("eval", "Train/test comparison of the predictors");
    eval_cmd->add_option("--config", eval->config, "scenario/experiment JSON file");
    eval_cmd->add_option("--network", eval->network, "network JSON (file-based route)");
    eval_cmd->add_option("--input", eval->input, "states CSV (file-based route)");
    eval_cmd->add_option("--replications", eval->replications, "independent replications")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--train-fraction", eval->train_fraction, "fraction of steps to train on");
    eval_cmd->add_option("--observe-fraction", eval->observe_fraction,
                         "fraction of nodes observed by the filter");
    eval_cmd->add_option("--hidden-fraction", eval->hidden_fraction,
                         "fraction of intra-layer edges hidden from the declared network");
    eval_cmd->add_option("--selection", eval->selection, "observed-node draw: uniform or hub");
    eval_cmd->add_option("--structure", eval->structure, "operator structure: full or kron");
    eval_cmd->add_option("--seed", eval->seed, "master random seed")->required();
    eval_cmd->add_option("--output-dir", eval->output_dir, "output directory");
    eval_cmd->callback([eval] { run_eval(*eval); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const netdiff::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const netdiff::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const netdiff::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
