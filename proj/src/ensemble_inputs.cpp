#include "oac3/ensemble_inputs.hpp"

#include "oac3/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>

namespace oac3 {

SimilarityMatrix::SimilarityMatrix(std::size_t n) : n_(n)
{
    build_adjacency();
}

SimilarityMatrix::SimilarityMatrix(std::size_t n, std::vector<SimilarityEntry> entries) : n_(n)
{
    entries_.reserve(entries.size());
    for (auto e : entries) {
        if (e.i >= n || e.j >= n) {
            throw ArgumentError("similarity index (" + std::to_string(e.i) + "," + std::to_string(e.j)
                                + ") out of range for n=" + std::to_string(n));
        }
        if (!(e.s >= 0.0 && e.s <= 1.0)) {
            throw RangeError("similarity value " + std::to_string(e.s) + " outside [0,1]");
        }
        if (e.i == e.j || e.s == 0.0) continue;
        if (e.i > e.j) std::swap(e.i, e.j);
        entries_.push_back(e);
    }
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    for (std::size_t t = 1; t < entries_.size(); ++t) {
        if (entries_[t].i == entries_[t - 1].i && entries_[t].j == entries_[t - 1].j) {
            throw ArgumentError("duplicate similarity pair (" + std::to_string(entries_[t].i) + ","
                                + std::to_string(entries_[t].j) + ")");
        }
    }
    build_adjacency();
}

void SimilarityMatrix::build_adjacency()
{
    std::vector<std::size_t> degree(n_, 0);
    for (const auto& e : entries_) {
        ++degree[e.i];
        ++degree[e.j];
    }
    offsets_.assign(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] = offsets_[i] + degree[i];

    adjacency_.resize(offsets_[n_]);
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& e : entries_) adjacency_[cursor[e.j]++] = {e.i, e.s};
    for (const auto& e : entries_) adjacency_[cursor[e.i]++] = {e.j, e.s};
    for (std::size_t i = 0; i < n_; ++i) {
        std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                  adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]),
                  [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
    }

    row_sums_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double sum = 0.0;
        for (const auto& nb : neighbors(i)) sum += nb.weight;
        row_sums_[i] = sum;
    }
}

double SimilarityMatrix::operator()(std::size_t i, std::size_t j) const
{
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    auto it = std::lower_bound(entries_.begin(), entries_.end(), SimilarityEntry{i, j, 0.0},
                               [](const auto& a, const auto& b) {
                                   return a.i != b.i ? a.i < b.i : a.j < b.j;
                               });
    if (it != entries_.end() && it->i == i && it->j == j) return it->s;
    return 0.0;
}

std::span<const SimilarityMatrix::Neighbor> SimilarityMatrix::neighbors(std::size_t i) const
{
    return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

ProbMatrix smooth_rows(const ProbMatrix& values, double domain_floor)
{
    ProbMatrix out = values.array() + domain_floor;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

ProbMatrix average_class_probabilities(std::span<const ProbMatrix> outputs, double domain_floor)
{
    if (outputs.empty()) throw EmptyEnsembleError("classifier ensemble is empty");
    const auto n = outputs.front().rows();
    const auto k = outputs.front().cols();
    if (n == 0 || k == 0) throw ShapeError("classifier output has no rows or columns");

    ProbMatrix sum = ProbMatrix::Zero(n, k);
    for (std::size_t q = 0; q < outputs.size(); ++q) {
        const auto& pi = outputs[q];
        if (pi.rows() != n || pi.cols() != k) {
            throw ShapeError("classifier " + std::to_string(q) + " output is "
                             + std::to_string(pi.rows()) + "x" + std::to_string(pi.cols())
                             + ", expected " + std::to_string(n) + "x" + std::to_string(k));
        }
        if (!pi.allFinite() || (pi.array() < 0.0).any()) {
            throw ArgumentError("classifier " + std::to_string(q)
                                + " output has negative or non-finite entries");
        }
        sum += pi;
    }
    return smooth_rows(sum / static_cast<double>(outputs.size()), domain_floor);
}

SimilarityMatrix coassociation_similarity(const PartitionSet& parts)
{
    const std::size_t n = parts.n;
    const std::size_t r2 = parts.clusterers();
    if (n < 2) throw ShapeError("co-association needs at least two instances");
    if (r2 == 0) throw EmptyEnsembleError("cluster ensemble is empty");
    for (std::size_t c = 0; c < r2; ++c) {
        if (parts.columns[c].size() != n) {
            throw ShapeError("partition " + std::to_string(c) + " assigns "
                             + std::to_string(parts.columns[c].size()) + " instances, expected "
                             + std::to_string(n));
        }
    }

    // Upper-triangle co-occurrence counts, filled cluster by cluster so the
    // cost is the number of co-clustered pairs rather than n^2 per partition.
    std::vector<std::uint32_t> counts(n * (n - 1) / 2, 0);
    auto slot = [n](std::size_t i, std::size_t j) { return i * (2 * n - i - 1) / 2 + (j - i - 1); };
    for (const auto& column : parts.columns) {
        std::unordered_map<long, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < n; ++i) members[column[i]].push_back(i);
        for (const auto& [id, idx] : members) {
            for (std::size_t a = 0; a < idx.size(); ++a) {
                for (std::size_t b = a + 1; b < idx.size(); ++b) ++counts[slot(idx[a], idx[b])];
            }
        }
    }

    std::vector<SimilarityEntry> entries;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto c = counts[slot(i, j)];
            if (c > 0) entries.push_back({i, j, static_cast<double>(c) / static_cast<double>(r2)});
        }
    }
    return SimilarityMatrix(n, std::move(entries));
}

SimilarityMatrix sparsify(const SimilarityMatrix& S, double threshold)
{
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw RangeError("sparsify threshold " + std::to_string(threshold) + " outside [0,1]");
    }
    std::vector<SimilarityEntry> kept;
    kept.reserve(S.nnz());
    for (const auto& e : S.entries()) {
        if (e.s >= threshold) kept.push_back(e);
    }
    return SimilarityMatrix(S.size(), std::move(kept));
}

} // namespace oac3
