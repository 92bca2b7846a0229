#pragma once

#include "oac3/ensemble_inputs.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace oac3::io {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

/// pi file: CSV, n rows x k reals. A first row whose first token is not
/// numeric is treated as a header and skipped.
ProbMatrix read_prob_matrix(const std::filesystem::path& path);
void write_prob_matrix(const std::filesystem::path& path, const ProbMatrix& values);

/// Partition file: CSV, n rows x r2 integer columns (optional header).
PartitionSet read_partitions(const std::filesystem::path& path);
void write_partitions(const std::filesystem::path& path, const PartitionSet& parts);

/// Similarity file: lines `i,j,s` with 0-based indices.
SimilarityMatrix read_similarity(const std::filesystem::path& path, std::size_t n);
void write_similarity(const std::filesystem::path& path, const SimilarityMatrix& S);

/// Truth file: one integer class index per line (optional header).
std::vector<std::size_t> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels);

/// Labels output: header `index,label,p1..pk`, then one row per instance.
void write_labeling(const std::filesystem::path& path, const std::vector<std::size_t>& labels,
                    const ProbMatrix& probabilities);
void read_labeling(const std::filesystem::path& path, std::vector<std::size_t>& labels,
                   ProbMatrix& probabilities);

} // namespace oac3::io
