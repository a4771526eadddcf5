#include "kdsm/point_location.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kdsm {

namespace {

Aabb empty_box() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {Vec3::Constant(inf), Vec3::Constant(-inf)};
}

void extend(Aabb& box, const Aabb& o) {
  box.lo = box.lo.cwiseMin(o.lo);
  box.hi = box.hi.cwiseMax(o.hi);
}

}  // namespace

TetBvh::TetBvh(std::span<const Vec3> vertices, std::span<const Tetrahedron> tets, double eps_box)
    : eps_box_(eps_box) {
  if (eps_box < 0.0) throw std::invalid_argument("eps_box must be nonnegative");
  const std::size_t n = tets.size();
  boxes_.resize(n);
  std::vector<Vec3> centroids(n);
  for (std::size_t t = 0; t < n; ++t) {
    Aabb box = empty_box();
    Vec3 c = Vec3::Zero();
    for (int v : tets[t].v) {
      const Vec3& p = vertices[static_cast<std::size_t>(v)];
      box.lo = box.lo.cwiseMin(p);
      box.hi = box.hi.cwiseMax(p);
      c += p;
    }
    box.lo.array() -= eps_box;
    box.hi.array() += eps_box;
    boxes_[t] = box;
    centroids[t] = c / 4.0;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  if (n == 0) return;
  nodes_.reserve(2 * (n / kLeafSize + 1));
  build(0, static_cast<int>(n), centroids);
}

int TetBvh::build(int begin, int end, std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box = empty_box();
  Aabb cbox = empty_box();
  for (int i = begin; i < end; ++i) {
    const int t = order_[static_cast<std::size_t>(i)];
    extend(box, boxes_[static_cast<std::size_t>(t)]);
    cbox.lo = cbox.lo.cwiseMin(centroids[static_cast<std::size_t>(t)]);
    cbox.hi = cbox.hi.cwiseMax(centroids[static_cast<std::size_t>(t)]);
  }
  nodes_[static_cast<std::size_t>(id)].box = box;
  if (end - begin <= kLeafSize) {
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    return id;
  }
  int axis = 0;
  const Vec3 ext = cbox.hi - cbox.lo;
  if (ext.y() > ext[axis]) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;
  const int mid = begin + (end - begin) / 2;
  // Ties broken by tet id so the hierarchy is identical across runs.
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = centroids[static_cast<std::size_t>(a)][axis];
    const double cb = centroids[static_cast<std::size_t>(b)][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::vector<int> TetBvh::query(const Vec3& p) const {
  std::vector<int> hits;
  if (nodes_.empty()) return hits;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (!node.box.contains(p)) continue;
    if (node.is_leaf()) {
      for (int i = node.begin; i < node.end; ++i) {
        const int t = order_[static_cast<std::size_t>(i)];
        if (boxes_[static_cast<std::size_t>(t)].contains(p)) hits.push_back(t);
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

std::vector<int> TetBvh::query(const Aabb& q) const {
  std::vector<int> hits;
  if (nodes_.empty()) return hits;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (!node.box.overlaps(q)) continue;
    if (node.is_leaf()) {
      for (int i = node.begin; i < node.end; ++i) {
        const int t = order_[static_cast<std::size_t>(i)];
        if (boxes_[static_cast<std::size_t>(t)].overlaps(q)) hits.push_back(t);
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

TetBvh build_bvh(std::span<const Vec3> vertices, std::span<const Tetrahedron> tets, double eps_box) {
  return TetBvh(vertices, tets, eps_box);
}

bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.min_weight != b.min_weight) return a.min_weight > b.min_weight;
  return a.tet < b.tet;
}

std::optional<Candidate> evaluate_candidate(const Vec3& p, std::span<const Vec3> vertices,
                                            std::span<const Tetrahedron> tets, int t) {
  const auto b = try_barycentric_coords(p, gather_tet(vertices, tets[static_cast<std::size_t>(t)]));
  if (!b) return std::nullopt;
  return Candidate{t, *b, b->min()};
}

CandidateList candidate_tets(const Vec3& p, const TetBvh& bvh, std::span<const Vec3> vertices,
                             std::span<const Tetrahedron> tets, double eps) {
  CandidateList out;
  for (int t : bvh.query(p)) {
    auto c = evaluate_candidate(p, vertices, tets, t);
    if (c && c->min_weight >= -eps) out.push_back(*c);
  }
  std::sort(out.begin(), out.end(), candidate_before);
  return out;
}

CandidateList prune_candidates(const CandidateList& list, std::span<const Tetrahedron> tets) {
  std::vector<char> removed(list.size(), 0);
  CandidateList out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (removed[i]) continue;
    const Candidate& kept = list[i];
    out.push_back(kept);
    const auto& tv = tets[static_cast<std::size_t>(kept.tet)].v;
    const int skip = kept.bary.argmin();
    std::array<int, 3> face{};
    for (int k = 0, f = 0; k < 4; ++k) {
      if (k != skip) face[static_cast<std::size_t>(f++)] = tv[static_cast<std::size_t>(k)];
    }
    for (std::size_t j = i + 1; j < list.size(); ++j) {
      if (removed[j]) continue;
      const auto& other = tets[static_cast<std::size_t>(list[j].tet)].v;
      const bool shares = std::any_of(other.begin(), other.end(), [&](int v) {
        return v == face[0] || v == face[1] || v == face[2];
      });
      if (shares) removed[j] = 1;
    }
  }
  return out;
}

std::optional<Candidate> nearest_candidate(const Vec3& p, const TetBvh& bvh, std::span<const Vec3> vertices,
                                           std::span<const Tetrahedron> tets, double start_radius,
                                           double max_radius) {
  double r = std::max(start_radius, 1e-6);
  while (true) {
    const Aabb box{p - Vec3::Constant(r), p + Vec3::Constant(r)};
    std::optional<Candidate> best;
    for (int t : bvh.query(box)) {
      auto c = evaluate_candidate(p, vertices, tets, t);
      if (c && (!best || candidate_before(*c, *best))) best = c;
    }
    if (best) return best;
    if (r >= max_radius) return std::nullopt;
    r = std::min(2.0 * r, max_radius);
  }
}

TetLocator::TetLocator(std::vector<Vec3> vertices, std::span<const Tetrahedron> tets, double eps_box)
    : vertices_(std::move(vertices)), tets_(tets), bvh_(vertices_, tets_, eps_box) {
  if (!tets_.empty()) {
    std::vector<double> diag;
    const std::size_t stride = std::max<std::size_t>(1, tets_.size() / 256);
    for (std::size_t t = 0; t < tets_.size(); t += stride) {
      const Aabb& b = bvh_.tet_boxes()[t];
      diag.push_back((b.hi - b.lo).norm());
    }
    std::nth_element(diag.begin(), diag.begin() + static_cast<long>(diag.size() / 2), diag.end());
    typical_size_ = diag[diag.size() / 2];
  }
}

std::optional<Candidate> TetLocator::best_or_nearest(const Vec3& p, double eps, double max_radius) const {
  auto list = candidates(p, eps);
  if (!list.empty()) return list.front();
  return nearest_candidate(p, bvh_, vertices_, tets_, typical_size_, max_radius);
}

BaryCoords project_to_simplex(const BaryCoords& b) {
  std::array<double, 4> u = b.w;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (int j = 0; j < 4; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double t = (cumsum - 1.0) / (j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0) theta = t;
  }
  std::array<double, 4> w{};
  for (int k = 0; k < 4; ++k) w[static_cast<std::size_t>(k)] = std::max(b.w[static_cast<std::size_t>(k)] - theta, 0.0);
  return BaryCoords::from_last_three(w[1], w[2], w[3]);
}

}  // namespace kdsm
