#include "cards/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace cards::gate {

KdTree::KdTree(std::vector<double> points, std::int64_t dim) : points_(std::move(points)), dim_(dim) {
    if (dim_ <= 0) throw std::invalid_argument("KdTree: dimension must be positive");
    if (points_.size() % std::size_t(dim_) != 0)
        throw std::invalid_argument("KdTree: point buffer not a multiple of the dimension");
    count_ = std::int64_t(points_.size()) / dim_;
    if (count_ == 0) return;
    std::vector<std::int64_t> idx(std::size_t(count_), 0);
    for (std::int64_t i = 0; i < count_; ++i) idx[std::size_t(i)] = i;
    nodes_.reserve(std::size_t(count_));
    root_ = build(idx, 0, count_, 0);
}

std::int64_t KdTree::build(std::vector<std::int64_t>& idx, std::int64_t lo, std::int64_t hi,
                           int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % int(dim_);
    const std::int64_t mid = lo + (hi - lo) / 2;
    // (coordinate, index) ordering keeps the split deterministic under ties.
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                     [&](std::int64_t a, std::int64_t b) {
                         const double va = points_[std::size_t(a * dim_ + axis)];
                         const double vb = points_[std::size_t(b * dim_ + axis)];
                         if (va != vb) return va < vb;
                         return a < b;
                     });
    const std::int64_t me = std::int64_t(nodes_.size());
    nodes_.push_back(Node{idx[std::size_t(mid)], -1, -1, axis});
    const std::int64_t left = build(idx, lo, mid, depth + 1);
    const std::int64_t right = build(idx, mid + 1, hi, depth + 1);
    nodes_[std::size_t(me)].left = left;
    nodes_[std::size_t(me)].right = right;
    return me;
}

void KdTree::search(std::int64_t node, const double* q, Hit& best) const {
    if (node < 0) return;
    const Node& n = nodes_[std::size_t(node)];
    const double* p = points_.data() + n.point * dim_;
    double d2 = 0.0;
    for (std::int64_t k = 0; k < dim_; ++k) {
        const double diff = q[k] - p[k];
        d2 += diff * diff;
    }
    if (d2 < best.dist2 || (d2 == best.dist2 && n.point < best.index)) best = Hit{n.point, d2};

    const double gap = q[n.axis] - p[n.axis];
    const std::int64_t near = gap < 0.0 ? n.left : n.right;
    const std::int64_t far = gap < 0.0 ? n.right : n.left;
    search(near, q, best);
    // Strict inequality: an equal-distance point beyond the plane could still
    // win its tie on index, so it must be visited.
    if (gap * gap <= best.dist2) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const std::vector<double>& query) const {
    if (count_ == 0) throw std::runtime_error("KdTree: nearest on an empty tree");
    if (std::int64_t(query.size()) != dim_)
        throw std::invalid_argument("KdTree: query dimension " + std::to_string(query.size()) +
                                    " does not match " + std::to_string(dim_));
    Hit best;
    best.index = count_;  // sentinel: any real point wins
    best.dist2 = std::numeric_limits<double>::infinity();
    search(root_, query.data(), best);
    return best;
}

}  // namespace cards::gate
