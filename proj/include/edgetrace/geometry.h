#pragma once

#include "edgetrace/vector.h"

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace edgetrace {

// Fixed offset used for t_min on secondary rays and at both ends of shadow segments.
inline constexpr Real kRayEpsilon = 1e-6;

struct Ray {
    Vec3 origin;
    Vec3 direction; // unit length
    Real t_min = 0;
    Real t_max = std::numeric_limits<Real>::infinity();
};

struct HitRecord {
    Real t = 0;
    int face_id = -1;
    // Barycentric weights of the face's second and third vertex.
    Real u = 0, v = 0;
    Vec3 position;
    Vec3 geometric_normal; // unit, from the face winding
};

using FaceIndices = std::array<int, 3>;

// World-space triangles the ray caster works on.
struct TriangleSet {
    std::vector<Vec3> vertices;
    std::vector<FaceIndices> faces;

    std::array<Vec3, 3> triangle(int face) const {
        const auto &f = faces[face];
        return {vertices[f[0]], vertices[f[1]], vertices[f[2]]};
    }
};

struct Bounds3 {
    Vec3 lo{std::numeric_limits<Real>::infinity(), std::numeric_limits<Real>::infinity(),
            std::numeric_limits<Real>::infinity()};
    Vec3 hi{-std::numeric_limits<Real>::infinity(), -std::numeric_limits<Real>::infinity(),
            -std::numeric_limits<Real>::infinity()};

    void expand(const Vec3 &p);
    void expand(const Bounds3 &b);
    bool contains(const Bounds3 &b) const;
    Vec3 centroid() const { return (lo + hi) * 0.5; }
    // Slab test against [t_min, t_max].
    bool hit(const Ray &ray, const Vec3 &inv_dir, Real t_max) const;
};

/// Bounding-volume hierarchy over a TriangleSet. Built once, then read-only;
/// concurrent traversal is safe.
class Bvh {
public:
    struct Node {
        Bounds3 bounds;
        int left = -1, right = -1; // children, -1 for leaves
        int first = 0, count = 0;  // range into face_order() for leaves
    };

    Bvh() = default;
    explicit Bvh(const TriangleSet &mesh);

    const std::vector<Node> &nodes() const { return nodes_; }
    const std::vector<int> &face_order() const { return order_; }
    bool empty() const { return nodes_.empty(); }

private:
    int build(const TriangleSet &mesh, std::vector<Bounds3> &face_bounds, std::vector<Vec3> &centroids,
              int first, int count);

    std::vector<Node> nodes_;
    std::vector<int> order_;
};

/// Single ray-triangle test (Moller-Trumbore); hits with t in (t_min, t_max).
std::optional<HitRecord> intersect_triangle(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2, const Ray &ray);

/// Nearest hit along the ray with t in (t_min, t_max).
std::optional<HitRecord> intersect(const Bvh &bvh, const TriangleSet &mesh, const Ray &ray);

/// True iff a face blocks the open segment [from, to] shrunk by kRayEpsilon at both ends.
bool occluded(const Bvh &bvh, const TriangleSet &mesh, const Vec3 &from, const Vec3 &to);

Vec3 face_normal(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2);
Real face_area(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2);

} // namespace edgetrace
