#pragma once

#include "oac3/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>

namespace oac3::cli {

enum ExitCode : int {
    kSuccess = 0,
    kInputError = 2,
    kNotConverged = 3,
    kUnsupported = 4,
};

struct RunManifest {
    std::filesystem::path pi_file;
    std::optional<std::filesystem::path> partitions_file;
    std::optional<std::filesystem::path> sim_file;
    std::optional<std::filesystem::path> truth_file;
    SolverConfig config;
    std::optional<std::filesystem::path> labels_out;
    std::optional<std::filesystem::path> trace_out;
    std::optional<std::filesystem::path> diagnostics_out;
    double sparsify_threshold = 0.0;
    std::uint64_t seed = 0;
};

/// Reads the inputs, solves, writes the requested outputs and prints
/// `converged=<bool> iters=<t> J=<final>` (plus `accuracy=<fraction>` with a
/// truth file) to out.
int run_command(const RunManifest& manifest, std::ostream& out, std::ostream& err);

struct GenerateOptions {
    std::string kind = "half-moon"; // half-moon | circles
    std::size_t n = 800;
    double noise = 0.1;
    double label_fraction = 0.02;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = ".";
};

/// Samples the dataset, trains the nearest-centroid classifier on a
/// stratified label_fraction of it and clusters the remaining target points
/// with k-means for k = 4..8. Writes pi.csv, partitions.csv and truth.csv
/// for the target set into out_dir.
int generate_command(const GenerateOptions& options, std::ostream& out, std::ostream& err);

struct DiagnoseManifest {
    /// Without pi_file a random instance of size n x k is drawn from seed.
    std::optional<std::filesystem::path> pi_file;
    std::optional<std::filesystem::path> partitions_file;
    std::optional<std::filesystem::path> sim_file;
    std::size_t n = 5;
    std::size_t k = 3;
    SolverConfig config;
    double sparsify_threshold = 0.0;
    std::uint64_t seed = 0;
    std::set<std::string> checks; // subset of {hessian, rate, descent, delta-j}; empty = all
    bool lambda_hat = false;
    std::optional<std::filesystem::path> report_out;
    std::optional<std::filesystem::path> trace_out; // iteration,J,delta_J,ratio
};

int diagnose_command(const DiagnoseManifest& manifest, std::ostream& out, std::ostream& err);

/// Random desk-scale instance: strictly positive pi rows on the simplex and a
/// symmetric similarity with entries in (0,1], each pair present with
/// probability density.
struct Instance {
    ProbMatrix pi;
    SimilarityMatrix S;
};
Instance random_instance(std::size_t n, std::size_t k, std::uint64_t seed, double density = 0.6);

/// Parses argv (run | generate | diagnose) and dispatches.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace oac3::cli
