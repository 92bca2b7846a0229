#include "oac3/cli.hpp"

#include "oac3/datasets.hpp"
#include "oac3/diagnostics.hpp"
#include "oac3/errors.hpp"
#include "oac3/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace oac3::cli {
namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
    return out;
}

ProbMatrix load_pi(const fs::path& path, SolverConfig& config)
{
    const ProbMatrix raw = io::read_prob_matrix(path);
    const ProbMatrix pi = average_class_probabilities(std::span(&raw, 1), config.divergence.domain_floor);
    config.divergence.dimension = static_cast<int>(pi.cols());
    return pi;
}

SimilarityMatrix load_similarity(const std::optional<fs::path>& partitions, const std::optional<fs::path>& sim,
                                 std::size_t n, double threshold)
{
    if (partitions.has_value() == sim.has_value()) {
        throw ArgumentError("exactly one of --partitions and --similarity is required");
    }
    SimilarityMatrix S;
    if (partitions) {
        const PartitionSet parts = io::read_partitions(*partitions);
        if (parts.n != n) {
            throw ShapeError(partitions->string() + " has " + std::to_string(parts.n) + " rows, pi has "
                             + std::to_string(n));
        }
        S = coassociation_similarity(parts);
    } else {
        S = io::read_similarity(*sim, n);
    }
    return sparsify(S, threshold);
}

void write_objective_trace(const fs::path& path, const std::vector<double>& trace)
{
    auto out = open_output(path);
    out << "iteration,J\n";
    for (std::size_t t = 0; t < trace.size(); ++t) out << t << ',' << io::format_double(trace[t]) << '\n';
}

const char* flag(bool value) { return value ? "true" : "false"; }

template <class Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        return body();
    } catch (const UnsupportedDivergence& e) {
        err << "error: " << e.what() << '\n';
        return kUnsupported;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
}

std::vector<std::string> report_sections(const std::set<std::string>& checks)
{
    std::vector<std::string> keep{"divergence", "problem", "solver"};
    const std::vector<std::pair<std::string, std::string>> mapping{
        {"descent", "descent"}, {"hessian", "hessian"}, {"rate", "rate"}, {"delta-j", "delta_j"}};
    for (const auto& [check, section] : mapping) {
        if (checks.empty() || checks.contains(check)) keep.push_back(section);
    }
    keep.push_back("lambda_hat");
    return keep;
}

std::string filter_report(const std::string& report, const std::set<std::string>& checks)
{
    const auto keep = report_sections(checks);
    std::istringstream in(report);
    std::string line;
    std::string out;
    while (std::getline(in, line)) {
        const std::string section = line.substr(0, line.find(':'));
        if (std::find(keep.begin(), keep.end(), section) != keep.end()) out += line + '\n';
    }
    return out;
}

} // namespace

int run_command(const RunManifest& manifest, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        SolverConfig config = manifest.config;
        const ProbMatrix pi = load_pi(manifest.pi_file, config);
        const auto n = static_cast<std::size_t>(pi.rows());
        const SimilarityMatrix S =
            load_similarity(manifest.partitions_file, manifest.sim_file, n, manifest.sparsify_threshold);
        std::optional<std::vector<std::size_t>> truth;
        if (manifest.truth_file) {
            truth = io::read_labels(*manifest.truth_file);
            if (truth->size() != n) {
                throw ShapeError(manifest.truth_file->string() + " has " + std::to_string(truth->size())
                                 + " labels, pi has " + std::to_string(n) + " rows");
            }
        }

        const RunResult result = run(pi, S, config);
        const Labeling& labeling = result.labeling;
        if (manifest.labels_out) io::write_labeling(*manifest.labels_out, labeling.labels, labeling.probabilities);
        if (manifest.trace_out) write_objective_trace(*manifest.trace_out, result.state.objective_trace);
        if (manifest.diagnostics_out) {
            const DiagnosticsReport report = diagnose(pi, S, config);
            open_output(*manifest.diagnostics_out) << format_report(report);
        }

        out << "converged=" << flag(labeling.converged) << " iters=" << labeling.iterations_used
            << " J=" << io::format_double(result.state.objective_trace.back()) << '\n';
        if (truth) {
            std::size_t hits = 0;
            for (std::size_t i = 0; i < n; ++i) hits += labeling.labels[i] == (*truth)[i] ? 1 : 0;
            out << "accuracy=" << io::format_double(static_cast<double>(hits) / static_cast<double>(n)) << '\n';
        }
        return labeling.converged ? kSuccess : kNotConverged;
    });
}

int generate_command(const GenerateOptions& options, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        if (!(options.label_fraction > 0.0 && options.label_fraction < 1.0)) {
            throw ArgumentError("--label-fraction must lie in (0,1)");
        }
        LabeledDataset data;
        if (options.kind == "half-moon") {
            data = half_moon(options.n, options.noise, options.seed);
        } else if (options.kind == "circles") {
            data = circles(options.n, options.noise, options.seed);
        } else {
            throw ArgumentError("unknown dataset kind '" + options.kind + "' (half-moon or circles)");
        }

        std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
        std::vector<bool> is_train(data.size(), false);
        for (std::size_t c = 0; c < data.k; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (data.labels[i] == c) members.push_back(i);
            }
            std::shuffle(members.begin(), members.end(), rng);
            const auto want = static_cast<std::size_t>(
                std::max(1.0, std::round(static_cast<double>(members.size()) * options.label_fraction)));
            for (std::size_t m = 0; m < std::min(want, members.size()); ++m) is_train[members[m]] = true;
        }
        std::vector<std::size_t> train_idx;
        std::vector<std::size_t> target_idx;
        for (std::size_t i = 0; i < data.size(); ++i) (is_train[i] ? train_idx : target_idx).push_back(i);
        const LabeledDataset train = data.subset(train_idx);
        const LabeledDataset target = data.subset(target_idx);

        const NearestCentroidClassifier classifier(train);
        const ProbMatrix raw = classifier.predict(target.points);
        const ProbMatrix pi = average_class_probabilities(std::span(&raw, 1));

        PartitionSet parts;
        parts.n = target.size();
        for (std::size_t clusters = 4; clusters <= 8; ++clusters) {
            parts.columns.push_back(kmeans(target.points, clusters, options.seed * 31 + clusters).assignment);
        }

        fs::create_directories(options.out_dir);
        io::write_prob_matrix(options.out_dir / "pi.csv", pi);
        io::write_partitions(options.out_dir / "partitions.csv", parts);
        io::write_labels(options.out_dir / "truth.csv", target.labels);
        out << "train=" << train.size() << " target=" << target.size() << " clusterers=" << parts.clusterers()
            << '\n';
        return kSuccess;
    });
}

Instance random_instance(std::size_t n, std::size_t k, std::uint64_t seed, double density)
{
    if (n == 0 || k == 0) throw ArgumentError("random_instance needs n, k >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mass(0.05, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Instance inst;
    inst.pi.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < inst.pi.rows(); ++i) {
        for (Eigen::Index c = 0; c < inst.pi.cols(); ++c) inst.pi(i, c) = mass(rng);
        inst.pi.row(i) /= inst.pi.row(i).sum();
    }
    std::vector<SimilarityEntry> entries;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double keep = unit(rng);
            const double weight = 1.0 - unit(rng);
            if (keep < density) entries.push_back({i, j, weight});
        }
    }
    inst.S = SimilarityMatrix(n, std::move(entries));
    return inst;
}

int diagnose_command(const DiagnoseManifest& manifest, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        for (const auto& check : manifest.checks) {
            if (check != "hessian" && check != "rate" && check != "descent" && check != "delta-j") {
                throw ArgumentError("unknown check '" + check + "'");
            }
        }
        SolverConfig config = manifest.config;
        ProbMatrix pi;
        SimilarityMatrix S;
        if (manifest.pi_file) {
            pi = load_pi(*manifest.pi_file, config);
            S = load_similarity(manifest.partitions_file, manifest.sim_file, static_cast<std::size_t>(pi.rows()),
                                manifest.sparsify_threshold);
        } else {
            Instance inst = random_instance(manifest.n, manifest.k, manifest.seed);
            pi = std::move(inst.pi);
            S = sparsify(inst.S, manifest.sparsify_threshold);
            config.divergence.dimension = static_cast<int>(manifest.k);
        }

        const bool hessian_only = manifest.checks.size() == 1 && manifest.checks.contains("hessian");
        const auto kind = config.divergence.kind;
        if (hessian_only && kind != DivergenceKind::KLDivergence && kind != DivergenceKind::GeneralizedI) {
            throw UnsupportedDivergence("hessian checks need kl or gen-i, got " + std::string(to_token(kind)));
        }

        DiagnosticsOptions options;
        options.compute_lambda_hat = manifest.lambda_hat;
        std::vector<SolverState> snapshots;
        DeltaJMonitor monitor;
        const DiagnosticsReport report = diagnose(pi, S, config, options, &snapshots, &monitor);
        const std::string text = filter_report(format_report(report), manifest.checks);
        out << text;
        if (manifest.report_out) open_output(*manifest.report_out) << text;
        if (manifest.trace_out) {
            auto trace = open_output(*manifest.trace_out);
            trace << "iteration,J,delta_J,ratio\n";
            for (std::size_t t = 0; t < snapshots.size(); ++t) {
                trace << t << ',' << io::format_double(snapshots[t].objective_trace.back()) << ','
                      << io::format_double(monitor.values[t]) << ',';
                if (t >= 1 && t - 1 < report.rate.ratios.size()) trace << io::format_double(report.rate.ratios[t - 1]);
                trace << '\n';
            }
        }
        return report.converged ? kSuccess : kNotConverged;
    });
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"OAC3 consensus of classifier and cluster ensembles"};
    app.require_subcommand(1);

    std::string divergence = "gen-i";
    SolverConfig config;
    config.alpha = 1e-4;
    config.lambda = 0.1;
    std::size_t threads = 0;
    double sparsify_threshold = 0.0;
    std::uint64_t seed = 0;
    auto add_solver_flags = [&](CLI::App* cmd) {
        cmd->add_option("--divergence", divergence, "squared|logistic|bose-einstein|itakura-saito|euclidean|kl|gen-i")
            ->capture_default_str();
        cmd->add_option("--alpha", config.alpha, "weight of the cluster-ensemble term")->capture_default_str();
        cmd->add_option("--lambda", config.lambda, "coupling between the copies")->capture_default_str();
        cmd->add_option("--epsilon", config.epsilon, "relative objective change to stop at")->capture_default_str();
        cmd->add_option("--max-iters", config.max_iters)->capture_default_str();
        cmd->add_option("--sparsify", sparsify_threshold, "drop similarities below this value")
            ->capture_default_str();
        cmd->add_option("--threads", threads, "worker threads, 0 = all")->capture_default_str();
        cmd->add_option("--seed", seed)->capture_default_str();
    };

    RunManifest run_manifest;
    std::string pi_file;
    std::string partitions_file;
    std::string sim_file;
    std::string truth_file;
    std::string labels_out;
    std::string trace_out;
    std::string diagnostics_out;
    auto* run_cmd = app.add_subcommand("run", "solve and write labels");
    add_solver_flags(run_cmd);
    run_cmd->add_option("--pi", pi_file, "class-probability CSV")->required();
    auto* part_opt = run_cmd->add_option("--partitions", partitions_file, "partition CSV");
    auto* sim_opt = run_cmd->add_option("--similarity", sim_file, "similarity triplets i,j,s");
    part_opt->excludes(sim_opt);
    run_cmd->add_option("--truth", truth_file, "true labels, one per line");
    run_cmd->add_option("--labels-out", labels_out);
    run_cmd->add_option("--trace-out", trace_out);
    run_cmd->add_option("--diagnostics-out", diagnostics_out);

    GenerateOptions gen;
    auto* gen_cmd = app.add_subcommand("generate", "sample a dataset and write pi, partitions and truth");
    gen_cmd->add_option("kind", gen.kind, "half-moon|circles")->required();
    gen_cmd->add_option("--n", gen.n)->capture_default_str();
    gen_cmd->add_option("--noise", gen.noise)->capture_default_str();
    gen_cmd->add_option("--label-fraction", gen.label_fraction)->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
    gen_cmd->add_option("--out", gen.out_dir, "output directory")->capture_default_str();

    DiagnoseManifest diag;
    std::vector<std::string> checks;
    std::string report_out;
    std::string diag_trace_out;
    auto* diag_cmd = app.add_subcommand("diagnose", "run the convergence diagnostics");
    add_solver_flags(diag_cmd);
    diag_cmd->add_option("--pi", pi_file, "class-probability CSV (random instance when absent)");
    auto* dpart_opt = diag_cmd->add_option("--partitions", partitions_file);
    auto* dsim_opt = diag_cmd->add_option("--similarity", sim_file);
    dpart_opt->excludes(dsim_opt);
    diag_cmd->add_option("--n", diag.n, "random instance size")->capture_default_str();
    diag_cmd->add_option("--k", diag.k, "random instance classes")->capture_default_str();
    diag_cmd->add_option("--checks", checks, "hessian,rate,descent,delta-j")->delimiter(',');
    diag_cmd->add_flag("--lambda-hat", diag.lambda_hat, "estimate the coupling threshold");
    diag_cmd->add_option("--report-out", report_out);
    diag_cmd->add_option("--trace-out", diag_trace_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    const auto kind = parse_divergence(divergence);
    if (!kind) {
        err << "error: unknown divergence '" << divergence << "'\n";
        return kInputError;
    }
    config.divergence.kind = *kind;
    config.threads = threads;
    auto optional_path = [](const std::string& s) -> std::optional<fs::path> {
        if (s.empty()) return std::nullopt;
        return fs::path(s);
    };

    if (run_cmd->parsed()) {
        run_manifest.pi_file = pi_file;
        run_manifest.partitions_file = optional_path(partitions_file);
        run_manifest.sim_file = optional_path(sim_file);
        run_manifest.truth_file = optional_path(truth_file);
        run_manifest.labels_out = optional_path(labels_out);
        run_manifest.trace_out = optional_path(trace_out);
        run_manifest.diagnostics_out = optional_path(diagnostics_out);
        run_manifest.config = config;
        run_manifest.sparsify_threshold = sparsify_threshold;
        run_manifest.seed = seed;
        return run_command(run_manifest, out, err);
    }
    if (gen_cmd->parsed()) return generate_command(gen, out, err);

    diag.pi_file = optional_path(pi_file);
    diag.partitions_file = optional_path(partitions_file);
    diag.sim_file = optional_path(sim_file);
    diag.config = config;
    diag.sparsify_threshold = sparsify_threshold;
    diag.seed = seed;
    diag.checks = {checks.begin(), checks.end()};
    diag.report_out = optional_path(report_out);
    diag.trace_out = optional_path(diag_trace_out);
    return diagnose_command(diag, out, err);
}

} // namespace oac3::cli
