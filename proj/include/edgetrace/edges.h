#pragma once

#include "edgetrace/adjoint.h"
#include "edgetrace/camera.h"
#include "edgetrace/render.h"
#include "edgetrace/scene.h"

#include <atomic>
#include <optional>

namespace edgetrace {

// Screen-space half-plane test alpha(x, y) = A x + B y + C of the line a->b.
struct EdgeEquation2D {
    Vec2 a, b;
    Real A = 0, B = 0, C = 0;

    EdgeEquation2D() = default;
    EdgeEquation2D(const Vec2 &a, const Vec2 &b)
        : a(a), b(b), A(a.y - b.y), B(b.x - a.x), C(a.x * b.y - b.x * a.y) {}
};

Real alpha_2d(const EdgeEquation2D &eq, Real x, Real y);

struct Alpha2DGrads {
    Vec2 d_a, d_b, d_xy;
    Real norm = 0; // |grad_xy alpha| = |a - b|
};
Alpha2DGrads alpha_2d_grads(const EdgeEquation2D &eq, Real x, Real y);

// The plane through p, v0, v1 and its unit normal.
struct EdgeEquation3D {
    Vec3 p, v0, v1;
    Vec3 n_h; // normalize((v0 - p) x (v1 - p))

    EdgeEquation3D(const Vec3 &p, const Vec3 &v0, const Vec3 &v1);
};

/// alpha(p, m) = (m - p) . (v0 - p) x (v1 - p)
Real alpha_3d(const Vec3 &p, const Vec3 &v0, const Vec3 &v1, const Vec3 &m);

struct Alpha3DGrads {
    Vec3 d_p, d_v0, d_v1, d_m;
    Real norm_m = 0; // |d_m|
};
/// d_p is -(d_m + d_v0 + d_v1); alpha only depends on differences.
Alpha3DGrads alpha_3d_grads(const Vec3 &p, const Vec3 &v0, const Vec3 &v1, const Vec3 &m);

/// dm/dt for the point where the ray p -> v0 + t (v1 - v0) meets the plane
/// through m with normal n_m. None when that ray grazes the plane.
std::optional<Vec3> edge_point_jacobian(const Vec3 &p, const Vec3 &v0, const Vec3 &v1, Real t, const Vec3 &m,
                                        const Vec3 &n_m);

/// Boundary edges always; otherwise when the two adjacent face planes put the
/// viewpoint on opposite sides.
bool is_silhouette(const Scene &scene, const EdgeRecord &edge, const Vec3 &viewpoint);

// --- primary visibility ----------------------------------------------------

struct PrimaryEdge {
    int edge = -1;       // index into scene.edges()
    Real s0 = 0, s1 = 1; // 3D endpoints v0 + s (v1 - v0) after near-plane clipping
    Vec2 a, b;           // their projections
    Real t0 = 0, t1 = 1; // part of a->b inside the image
    Real length = 0;     // (t1 - t0) |b - a|
};

struct PrimaryEdgeSet {
    std::vector<PrimaryEdge> edges;
    std::vector<Real> cdf;
    Real total_length = 0;
};

/// Camera silhouettes, clipped to the near plane and the image rectangle.
PrimaryEdgeSet collect_primary_edges(const Scene &scene);

struct EdgeContribution2D {
    Vec2 d_a, d_b;
};
/// Screen-endpoint derivatives of one edge sample at (x, y) whose scaled
/// jump is `jump` (adjoint-weighted f_u - f_l times 1/pdf, divided by |grad alpha|).
EdgeContribution2D edge_contribution_2d(const EdgeEquation2D &eq, Real x, Real y, Real jump);

/// Dirac term of the screen-space pixel integrals. Samples edges with
/// probability proportional to clipped length and points uniformly along them;
/// f_u and f_l come from two rays offset +-1e-6 px along the edge normal that
/// share one random stream.
void sample_primary_edges(const Scene &scene, const GradientLayout &layout, const ImageBuffer &adjoint,
                          int n_samples, const RenderConfig &config, GradientAccumulator &out);

// --- secondary visibility ----------------------------------------------------

/// Selection weights of every scene edge for shading point p (zero for edges
/// that cannot occlude anything seen from p).
std::vector<Real> secondary_edge_weights(const Scene &scene, const Vec3 &p, const Vec3 &n, const Vec3 &wo,
                                         int face, const Material &material);

struct SecondaryQuery {
    Vec3 p;
    Vec3 n; // oriented toward wo
    Vec3 wo;
    int face = -1;
    Rgb weight; // adjoint reaching this vertex
    int bounces_left = 0;
};

struct SecondaryStats {
    std::atomic<long> samples{0};
    std::atomic<long> grazing_rejected{0};
    std::atomic<long> contributing{0};
};

/// One secondary edge sample at a shading point. Adds the edge-endpoint and
/// receiver derivatives to sink and returns the derivative w.r.t. p.
/// `path_rng` drives the reflected-radiance estimate at the receiver.
Vec3 sample_secondary_edge(const Scene &scene, const SecondaryQuery &query, Pcg32 &rng, Pcg32 &path_rng,
                           GradientSink &sink, SecondaryStats *stats = nullptr);

/// Reverse-pass hook running `samples_per_vertex` secondary edge samples at
/// every path vertex.
VertexHook make_secondary_hook(const Scene &scene, std::uint64_t seed, int samples_per_vertex,
                               SecondaryStats *stats = nullptr);

} // namespace edgetrace
