#include "wkam/geometry.hpp"
#include <algorithm>

namespace wkam {

namespace {
/// absolute tolerance for deduplicating input points before partitioning;
/// zero-distance pairs would make the separation sieve loop forever
const double kDedupTol = 1e-12;
/// relative slack for closed-ball membership tests
const double kBallTol = 1e-9;
}  // namespace

double min_mutual_distance(const Configuration& x) {
    const int n = static_cast<int>(x.cols());
    if (n < 2) throw std::invalid_argument("min_mutual_distance: need at least two bodies");
    double best = kInfinity;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            best = std::min(best, (x.col(i) - x.col(j)).norm());
    return best;
}

ClusterPartition cluster_partition(const MatrixXd& points, double lambda, double epsilon) {
    if (points.cols() < 1) throw std::invalid_argument("cluster_partition: empty point set");
    if (!(lambda > 1.0)) throw std::invalid_argument("cluster_partition: lambda must exceed 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("cluster_partition: epsilon must be positive");

    // deduplicate, keeping the first occurrence
    std::vector<int> dedup;
    for (int i = 0; i < points.cols(); ++i) {
        bool dup = false;
        for (int k : dedup)
            if ((points.col(i) - points.col(k)).norm() <= kDedupTol) { dup = true; break; }
        if (!dup) dedup.push_back(i);
    }

    std::vector<int> alive = dedup;
    double R = epsilon;
    const double grow = 2.0 * lambda;

    auto covered = [&](double radius) {
        for (int i : dedup) {
            bool ok = false;
            for (int c : alive)
                if ((points.col(i) - points.col(c)).norm() <= radius * (1.0 + kBallTol)) { ok = true; break; }
            if (!ok) return false;
        }
        return true;
    };

    while (true) {
        // condition 1: scan pairs in index order, drop the higher-indexed point
        // of the first violating pair
        bool removed = false;
        for (size_t a = 0; a + 1 < alive.size() && !removed; ++a)
            for (size_t b = a + 1; b < alive.size(); ++b) {
                if ((points.col(alive[a]) - points.col(alive[b])).norm() < grow * R) {
                    alive.erase(alive.begin() + static_cast<long>(b));
                    R *= grow;
                    removed = true;
                    break;
                }
            }
        if (removed) continue;
        if (covered(R)) break;
        R *= grow;  // separation holds but a removed point lost its sponsor chain
    }

    ClusterPartition part;
    part.center_indices = alive;
    part.center_points.resize(points.rows(), static_cast<long>(alive.size()));
    for (size_t k = 0; k < alive.size(); ++k) part.center_points.col(static_cast<long>(k)) = points.col(alive[k]);
    part.size_R = R;
    part.lambda = lambda;
    part.n_points_dedup = static_cast<int>(dedup.size());
    return part;
}

std::vector<std::vector<int>> assign_clusters(const Configuration& x, const Configuration& y,
                                              const ClusterPartition& partition) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw std::invalid_argument("assign_clusters: x and y have different shapes");
    const int n = static_cast<int>(x.cols());
    const int K = static_cast<int>(partition.center_points.cols());
    const double radius = 2.0 * partition.size_R * (1.0 + kBallTol);

    std::vector<std::vector<int>> clusters(static_cast<size_t>(K));
    for (int i = 0; i < n; ++i) {
        int found = -1;
        for (int j = 0; j < K; ++j) {
            if ((x.col(i) - partition.center_points.col(j)).norm() <= radius &&
                (y.col(i) - partition.center_points.col(j)).norm() <= radius) {
                found = j;
                break;
            }
        }
        if (found < 0)
            throw std::runtime_error("assign_clusters: body not covered by any doubled ball; "
                                     "partition epsilon must exceed ||x-y||");
        clusters[static_cast<size_t>(found)].push_back(i);
    }
    // drop empty clusters (centers whose bodies were deduplicated away)
    std::vector<std::vector<int>> out;
    for (auto& c : clusters)
        if (!c.empty()) out.push_back(std::move(c));
    return out;
}

}  // namespace wkam
