#pragma once
#include "wkam/problem.hpp"
#include <vector>

namespace wkam {

/// A set of centers whose pairwise distances are >= 2*lambda*size_R and whose
/// size_R-balls cover the input point set.
struct ClusterPartition {
    std::vector<int> center_indices;  // indices into the original input point list
    MatrixXd center_points;           // one column per center
    double size_R = 0.0;
    double lambda = 0.0;
    int n_points_dedup = 0;           // |A| after deduplication; R < (2 lambda)^|A| * epsilon
};

/// Smallest pairwise distance between bodies; 0 means collision.
double min_mutual_distance(const Configuration& x);

/// Builds a lambda-cluster partition of the columns of `points` with
/// epsilon <= size_R < (2 lambda)^|A| epsilon. Recursive sieve: at stage k the
/// candidate size is (2 lambda)^(k-1) epsilon; when a pair of surviving points
/// violates the separation condition, the higher-indexed one is dropped and
/// the size advances. A final size advance handles survivors whose coverage
/// chain was broken by later removals.
ClusterPartition cluster_partition(const MatrixXd& points, double lambda, double epsilon);

/// Partitions body indices {0..N-1} into clusters: body i belongs to cluster j
/// iff both its position in x and in y lie in the ball B(center_j, 2 size_R).
/// Throws if some body is not covered (the partition was built with an epsilon
/// too small for ||x-y||).
std::vector<std::vector<int>> assign_clusters(const Configuration& x, const Configuration& y,
                                              const ClusterPartition& partition);

}  // namespace wkam
