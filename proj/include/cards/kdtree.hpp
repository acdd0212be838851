#pragma once

#include <cstdint>
#include <vector>

namespace cards::gate {

/// Exact nearest-neighbor search over fixed-dimension double points.  Queries
/// return the same point a linear scan would: least squared distance, ties
/// resolved to the lowest point index.  The far branch is pruned only when the
/// axis gap strictly exceeds the best distance, so boundary points are never
/// skipped.
class KdTree {
public:
    struct Hit {
        std::int64_t index = -1;
        double dist2 = 0.0;
    };

    KdTree() = default;
    /// points: row-major count x dim, copied.
    KdTree(std::vector<double> points, std::int64_t dim);

    Hit nearest(const std::vector<double>& query) const;
    std::int64_t size() const { return count_; }
    std::int64_t dim() const { return dim_; }

private:
    struct Node {
        std::int64_t point = -1;  // index into points_
        std::int64_t left = -1, right = -1;
        int axis = 0;
    };

    std::int64_t build(std::vector<std::int64_t>& idx, std::int64_t lo, std::int64_t hi,
                       int depth);
    void search(std::int64_t node, const double* q, Hit& best) const;

    std::vector<double> points_;
    std::vector<Node> nodes_;
    std::int64_t root_ = -1;
    std::int64_t count_ = 0;
    std::int64_t dim_ = 0;
};

}  // namespace cards::gate
