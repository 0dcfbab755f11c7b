#include "edgetrace/geometry.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edgetrace {

namespace {

constexpr int kLeafSize = 4;

Real axis(const Vec3 &v, int a) { return v[a]; }

} // namespace

void Bounds3::expand(const Vec3 &p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
}

void Bounds3::expand(const Bounds3 &b) {
    expand(b.lo);
    expand(b.hi);
}

bool Bounds3::contains(const Bounds3 &b) const {
    return lo.x <= b.lo.x && lo.y <= b.lo.y && lo.z <= b.lo.z && hi.x >= b.hi.x && hi.y >= b.hi.y &&
           hi.z >= b.hi.z;
}

bool Bounds3::hit(const Ray &ray, const Vec3 &inv_dir, Real t_max) const {
    Real t0 = ray.t_min, t1 = t_max;
    for (int a = 0; a < 3; a++) {
        auto near = (lo[a] - ray.origin[a]) * inv_dir[a];
        auto far = (hi[a] - ray.origin[a]) * inv_dir[a];
        if (near > far) {
            std::swap(near, far);
        }
        // NaN from 0 * inf (origin on a slab plane, zero direction) must not reject the box.
        if (!(near <= t1) && !std::isnan(near)) {
            return false;
        }
        if (!std::isnan(near)) {
            t0 = std::max(t0, near);
        }
        if (!std::isnan(far)) {
            t1 = std::min(t1, far * (1 + 4 * std::numeric_limits<Real>::epsilon()));
        }
        if (t0 > t1) {
            return false;
        }
    }
    return true;
}

Bvh::Bvh(const TriangleSet &mesh) {
    auto n = static_cast<int>(mesh.faces.size());
    if (n == 0) {
        return;
    }
    std::vector<Bounds3> face_bounds(n);
    std::vector<Vec3> centroids(n);
    for (int i = 0; i < n; i++) {
        for (auto &p : mesh.triangle(i)) {
            face_bounds[i].expand(p);
        }
        centroids[i] = face_bounds[i].centroid();
    }
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * n);
    build(mesh, face_bounds, centroids, 0, n);
}

int Bvh::build(const TriangleSet &mesh, std::vector<Bounds3> &face_bounds, std::vector<Vec3> &centroids,
               int first, int count) {
    auto node_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Bounds3 bounds, centroid_bounds;
    for (int i = first; i < first + count; i++) {
        bounds.expand(face_bounds[order_[i]]);
        centroid_bounds.expand(centroids[order_[i]]);
    }
    nodes_[node_id].bounds = bounds;
    if (count <= kLeafSize) {
        nodes_[node_id].first = first;
        nodes_[node_id].count = count;
        return node_id;
    }
    auto extent = centroid_bounds.hi - centroid_bounds.lo;
    int split_axis = 0;
    if (extent.y > extent.x && extent.y >= extent.z) {
        split_axis = 1;
    } else if (extent.z > extent.x && extent.z > extent.y) {
        split_axis = 2;
    }
    // Median split on the longest centroid axis.
    auto mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](int a, int b) { return axis(centroids[a], split_axis) < axis(centroids[b], split_axis); });
    auto left = build(mesh, face_bounds, centroids, first, mid - first);
    auto right = build(mesh, face_bounds, centroids, mid, first + count - mid);
    nodes_[node_id].left = left;
    nodes_[node_id].right = right;
    return node_id;
}

std::optional<HitRecord> intersect_triangle(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2, const Ray &ray) {
    auto e1 = p1 - p0;
    auto e2 = p2 - p0;
    auto pvec = cross(ray.direction, e2);
    auto det = dot(e1, pvec);
    if (det == 0 || !std::isfinite(det)) {
        return std::nullopt;
    }
    auto inv_det = 1 / det;
    auto tvec = ray.origin - p0;
    auto u = dot(tvec, pvec) * inv_det;
    if (u < 0 || u > 1) {
        return std::nullopt;
    }
    auto qvec = cross(tvec, e1);
    auto v = dot(ray.direction, qvec) * inv_det;
    if (v < 0 || u + v > 1) {
        return std::nullopt;
    }
    auto t = dot(e2, qvec) * inv_det;
    if (!(t > ray.t_min && t < ray.t_max)) {
        return std::nullopt;
    }
    HitRecord hit;
    hit.t = t;
    hit.u = u;
    hit.v = v;
    hit.position = ray.origin + ray.direction * t;
    hit.geometric_normal = normalize(cross(e1, e2));
    return hit;
}

namespace {

template <bool AnyHit>
std::optional<HitRecord> traverse(const Bvh &bvh, const TriangleSet &mesh, const Ray &ray) {
    if (bvh.empty()) {
        return std::nullopt;
    }
    Vec3 inv_dir{1 / ray.direction.x, 1 / ray.direction.y, 1 / ray.direction.z};
    const auto &nodes = bvh.nodes();
    const auto &order = bvh.face_order();
    std::optional<HitRecord> best;
    Real t_max = ray.t_max;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const auto &node = nodes[stack[--top]];
        if (!node.bounds.hit(ray, inv_dir, t_max)) {
            continue;
        }
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; i++) {
                auto face = order[i];
                auto tri = mesh.triangle(face);
                Ray r = ray;
                r.t_max = t_max;
                if (auto hit = intersect_triangle(tri[0], tri[1], tri[2], r)) {
                    hit->face_id = face;
                    if constexpr (AnyHit) {
                        return hit;
                    }
                    t_max = hit->t;
                    best = hit;
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

} // namespace

std::optional<HitRecord> intersect(const Bvh &bvh, const TriangleSet &mesh, const Ray &ray) {
    return traverse<false>(bvh, mesh, ray);
}

bool occluded(const Bvh &bvh, const TriangleSet &mesh, const Vec3 &from, const Vec3 &to) {
    auto d = to - from;
    auto dist = length(d);
    if (dist <= 2 * kRayEpsilon) {
        return false;
    }
    Ray ray{from, d / dist, kRayEpsilon, dist - kRayEpsilon};
    return traverse<true>(bvh, mesh, ray).has_value();
}

Vec3 face_normal(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2) { return normalize(cross(p1 - p0, p2 - p0)); }

Real face_area(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2) { return 0.5 * length(cross(p1 - p0, p2 - p0)); }

} // namespace edgetrace
