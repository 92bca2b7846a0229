#pragma once

#include "oac3/ensemble_inputs.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace oac3 {

using PointMatrix = Eigen::MatrixXd; // n x d, one point per row

struct LabeledDataset {
    PointMatrix points;
    std::vector<std::size_t> labels;
    std::size_t k = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return labels.size(); }
    /// Rows listed in indices, in that order.
    LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Two interleaving half circles, n/2 points each. Class 0 follows
/// (cos t, sin t), class 1 follows (1 - cos t, 0.5 - sin t) for evenly
/// spaced t in [0, pi]; both get Gaussian jitter of standard deviation noise.
/// Throws ArgumentError for odd n or negative noise.
LabeledDataset half_moon(std::size_t n, double noise, std::uint64_t seed);

/// Concentric circles of radius 1 (class 0) and 2 (class 1), n/2 points
/// each at evenly spaced angles, with Gaussian jitter.
LabeledDataset circles(std::size_t n, double noise, std::uint64_t seed);

/// Softmax over negative squared distances to the class centroids.
class NearestCentroidClassifier {
public:
    /// Throws MissingClassError when some class in [0, k) has no point.
    explicit NearestCentroidClassifier(const LabeledDataset& train);

    ProbMatrix predict(const PointMatrix& points) const;
    const PointMatrix& centroids() const { return centroids_; }

private:
    PointMatrix centroids_;
};

struct KMeansResult {
    std::vector<long> assignment;
    double wcss = 0.0;
    std::vector<double> wcss_trace; // WCSS after each Lloyd iteration of the chosen restart
};

/// Lloyd's algorithm from k-means++ seeds, stopped when assignments no
/// longer change or after 100 iterations. The restart with the lowest
/// within-cluster sum of squares wins. Empty clusters are reseeded with the
/// point farthest from its centroid.
/// Throws ArgumentError when k_clusters is 0 or exceeds the point count.
KMeansResult kmeans(const PointMatrix& points, std::size_t k_clusters, std::uint64_t seed,
                    std::size_t restarts = 5);

} // namespace oac3
