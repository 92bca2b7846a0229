#include "oac3/datasets.hpp"

#include "oac3/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace oac3 {
namespace {

void check_generator_args(std::size_t n, double noise, const char* name)
{
    if (n == 0 || n % 2 != 0) throw ArgumentError(std::string(name) + ": n must be even and positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ArgumentError(std::string(name) + ": noise must be >= 0");
}

template <class Curve>
LabeledDataset two_curves(std::size_t n, double noise, std::uint64_t seed, double t_end, bool closed,
                          Curve&& curve)
{
    LabeledDataset data;
    data.points.resize(static_cast<Eigen::Index>(n), 2);
    data.labels.resize(n);
    data.k = 2;
    data.seed = seed;
    const std::size_t half = n / 2;
    const double steps = static_cast<double>(closed ? half : std::max<std::size_t>(half - 1, 1));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t m = 0; m < half; ++m) {
            const double t = t_end * static_cast<double>(m) / steps;
            const auto [x, y] = curve(c, t);
            const auto row = static_cast<Eigen::Index>(c * half + m);
            data.points(row, 0) = x;
            data.points(row, 1) = y;
            data.labels[c * half + m] = c;
        }
    }
    if (noise > 0.0) {
        for (Eigen::Index i = 0; i < data.points.rows(); ++i) {
            data.points(i, 0) += noise * jitter(rng);
            data.points(i, 1) += noise * jitter(rng);
        }
    }
    return data;
}

double squared_distance(const PointMatrix& points, Eigen::Index i, const PointMatrix& centers, Eigen::Index c)
{
    return (points.row(i) - centers.row(c)).squaredNorm();
}

struct LloydRun {
    std::vector<long> assignment;
    std::vector<double> trace;
};

std::vector<long> assign(const PointMatrix& points, const PointMatrix& centers)
{
    std::vector<long> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        Eigen::Index best = 0;
        double best_d = squared_distance(points, i, centers, 0);
        for (Eigen::Index c = 1; c < centers.rows(); ++c) {
            const double d = squared_distance(points, i, centers, c);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out[static_cast<std::size_t>(i)] = static_cast<long>(best);
    }
    return out;
}

PointMatrix seed_plus_plus(const PointMatrix& points, std::size_t k, std::mt19937_64& rng)
{
    const auto n = points.rows();
    PointMatrix centers(static_cast<Eigen::Index>(k), points.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.row(0) = points.row(first(rng));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(points, i, centers, 0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : d2) total += d;
        Eigen::Index pick = 0;
        if (total > 0.0) {
            std::discrete_distribution<Eigen::Index> draw(d2.begin(), d2.end());
            pick = draw(rng);
        } else {
            pick = first(rng);
        }
        const auto row = static_cast<Eigen::Index>(c);
        centers.row(row) = points.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& d = d2[static_cast<std::size_t>(i)];
            d = std::min(d, squared_distance(points, i, centers, row));
        }
    }
    return centers;
}

void repair_empty(const PointMatrix& points, const PointMatrix& centers, std::vector<long>& assignment,
                  std::size_t k)
{
    std::vector<std::size_t> counts(k, 0);
    for (long a : assignment) ++counts[static_cast<std::size_t>(a)];
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        Eigen::Index farthest = -1;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            const auto owner = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
            if (counts[owner] < 2) continue;
            const double d = squared_distance(points, i, centers, static_cast<Eigen::Index>(owner));
            if (d > far_d) {
                far_d = d;
                farthest = i;
            }
        }
        if (farthest < 0) break;
        auto& slot = assignment[static_cast<std::size_t>(farthest)];
        --counts[static_cast<std::size_t>(slot)];
        slot = static_cast<long>(c);
        ++counts[c];
    }
}

PointMatrix centroids_of(const PointMatrix& points, const std::vector<long>& assignment, std::size_t k,
                         const PointMatrix& previous)
{
    PointMatrix sums = PointMatrix::Zero(static_cast<Eigen::Index>(k), points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const auto c = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
        sums.row(static_cast<Eigen::Index>(c)) += points.row(i);
        ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
        const auto row = static_cast<Eigen::Index>(c);
        if (counts[c] == 0) {
            sums.row(row) = previous.row(row);
        } else {
            sums.row(row) /= static_cast<double>(counts[c]);
        }
    }
    return sums;
}

double wcss_of(const PointMatrix& points, const std::vector<long>& assignment, const PointMatrix& centers)
{
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        total += squared_distance(points, i, centers, assignment[static_cast<std::size_t>(i)]);
    }
    return total;
}

LloydRun lloyd(const PointMatrix& points, std::size_t k, std::mt19937_64& rng)
{
    PointMatrix centers = seed_plus_plus(points, k, rng);
    LloydRun run;
    run.assignment = assign(points, centers);
    for (int iter = 0; iter < 100; ++iter) {
        repair_empty(points, centers, run.assignment, k);
        centers = centroids_of(points, run.assignment, k, centers);
        run.trace.push_back(wcss_of(points, run.assignment, centers));
        std::vector<long> next = assign(points, centers);
        if (next == run.assignment) break;
        run.assignment = std::move(next);
    }
    return run;
}

} // namespace

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const
{
    LabeledDataset out;
    out.k = k;
    out.seed = seed;
    out.points.resize(static_cast<Eigen::Index>(indices.size()), points.cols());
    out.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= size()) throw ArgumentError("subset index out of range");
        out.points.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(indices[r]));
        out.labels.push_back(labels[indices[r]]);
    }
    return out;
}

LabeledDataset half_moon(std::size_t n, double noise, std::uint64_t seed)
{
    check_generator_args(n, noise, "half_moon");
    return two_curves(n, noise, seed, std::numbers::pi, false, [](std::size_t c, double t) {
        if (c == 0) return std::pair{std::cos(t), std::sin(t)};
        return std::pair{1.0 - std::cos(t), 0.5 - std::sin(t)};
    });
}

LabeledDataset circles(std::size_t n, double noise, std::uint64_t seed)
{
    check_generator_args(n, noise, "circles");
    return two_curves(n, noise, seed, 2.0 * std::numbers::pi, true, [](std::size_t c, double t) {
        const double radius = c == 0 ? 1.0 : 2.0;
        return std::pair{radius * std::cos(t), radius * std::sin(t)};
    });
}

NearestCentroidClassifier::NearestCentroidClassifier(const LabeledDataset& train)
{
    if (train.k == 0) throw ArgumentError("classifier needs at least one class");
    const auto k = static_cast<Eigen::Index>(train.k);
    centroids_ = PointMatrix::Zero(k, train.points.cols());
    std::vector<std::size_t> counts(train.k, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train.labels[i] >= train.k) throw ArgumentError("training label out of range");
        centroids_.row(static_cast<Eigen::Index>(train.labels[i])) += train.points.row(static_cast<Eigen::Index>(i));
        ++counts[train.labels[i]];
    }
    for (std::size_t c = 0; c < train.k; ++c) {
        if (counts[c] == 0) throw MissingClassError("no training point for class " + std::to_string(c));
        centroids_.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
    }
}

ProbMatrix NearestCentroidClassifier::predict(const PointMatrix& points) const
{
    if (points.cols() != centroids_.cols()) throw ShapeError("predict: point dimension mismatch");
    const auto k = centroids_.rows();
    ProbMatrix out(points.rows(), k);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index c = 0; c < k; ++c) out(i, c) = -squared_distance(points, i, centroids_, c);
        out.row(i) = (out.row(i).array() - out.row(i).maxCoeff()).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

KMeansResult kmeans(const PointMatrix& points, std::size_t k_clusters, std::uint64_t seed, std::size_t restarts)
{
    const auto n = static_cast<std::size_t>(points.rows());
    if (k_clusters == 0 || k_clusters > n) {
        throw ArgumentError("kmeans: need 1 <= k_clusters <= n, got k=" + std::to_string(k_clusters)
                            + " n=" + std::to_string(n));
    }
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
        LloydRun run = lloyd(points, k_clusters, rng);
        const double score = run.trace.back();
        if (score < best.wcss) {
            best.wcss = score;
            best.assignment = std::move(run.assignment);
            best.wcss_trace = std::move(run.trace);
        }
    }
    return best;
}

} // namespace oac3
