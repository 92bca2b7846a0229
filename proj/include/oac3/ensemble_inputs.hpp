#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace oac3 {

/// n x k matrix of per-instance class scores. Row-major so that a row is a
/// contiguous Point.
using ProbMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Cluster assignments of n instances under r2 clusterers, one column per
/// clusterer. Cluster identifiers are arbitrary integers.
struct PartitionSet {
    std::size_t n = 0;
    std::vector<std::vector<long>> columns;

    std::size_t clusterers() const { return columns.size(); }
};

struct SimilarityEntry {
    std::size_t i = 0;
    std::size_t j = 0;
    double s = 0.0;

    friend bool operator==(const SimilarityEntry&, const SimilarityEntry&) = default;
};

/// Symmetric co-association matrix with zero diagonal. Entries are stored
/// once with i < j, sorted by (i, j); a symmetric adjacency view with
/// ascending neighbor indices is built alongside for the solver.
class SimilarityMatrix {
public:
    struct Neighbor {
        std::size_t index;
        double weight;
    };

    SimilarityMatrix() = default;
    explicit SimilarityMatrix(std::size_t n);

    /// Canonicalizes (j, i) to (i, j), drops diagonal and zero entries.
    /// Throws RangeError for weights outside [0,1], ArgumentError for
    /// out-of-range indices or duplicated pairs.
    SimilarityMatrix(std::size_t n, std::vector<SimilarityEntry> entries);

    std::size_t size() const { return n_; }
    std::size_t nnz() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<SimilarityEntry>& entries() const { return entries_; }

    /// s_ij read symmetrically; 0 when absent or i == j.
    double operator()(std::size_t i, std::size_t j) const;

    std::span<const Neighbor> neighbors(std::size_t i) const;
    /// sum_{j != i} s_ij
    double row_sum(std::size_t i) const { return row_sums_[i]; }

    friend bool operator==(const SimilarityMatrix& a, const SimilarityMatrix& b)
    {
        return a.n_ == b.n_ && a.entries_ == b.entries_;
    }

private:
    void build_adjacency();

    std::size_t n_ = 0;
    std::vector<SimilarityEntry> entries_;
    std::vector<std::size_t> offsets_;
    std::vector<Neighbor> adjacency_;
    std::vector<double> row_sums_;
};

/// Adds domain_floor to every entry and rescales each row to unit L1 norm.
ProbMatrix smooth_rows(const ProbMatrix& values, double domain_floor = 1e-12);

/// Entrywise mean of the ensemble outputs followed by smooth_rows.
ProbMatrix average_class_probabilities(std::span<const ProbMatrix> outputs,
                                       double domain_floor = 1e-12);

/// s_ij = (number of partitions placing i and j together) / r2.
SimilarityMatrix coassociation_similarity(const PartitionSet& parts);

/// Drops entries with s_ij < threshold.
SimilarityMatrix sparsify(const SimilarityMatrix& S, double threshold);

} // namespace oac3
