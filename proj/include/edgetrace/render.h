#pragma once

#include "edgetrace/camera.h"
#include "edgetrace/image.h"
#include "edgetrace/sampling.h"
#include "edgetrace/scene.h"

#include <cstdint>
#include <vector>

namespace edgetrace {

struct RenderConfig {
    int spp = 16;
    int max_bounces = 0; // 0 = direct lighting only
    std::uint64_t seed = 0;
    int threads = 0; // 0 = resolve_threads default
};

// Random numbers consumed per path vertex, whether or not they are needed:
// three for the light sample, two for the bounce direction.
inline constexpr int kRandomsPerVertex = 5;

/// One shading point of a traced path. Positions are stored with the
/// barycentrics that generated them so the reverse pass can move them with
/// the face.
struct PathVertex {
    int face = -1;
    Real u = 0, v = 0; // barycentrics of the 2nd and 3rd face vertex
    Vec3 position;
    Vec3 normal;         // geometric normal flipped toward the previous vertex
    Real normal_sign = 1; // normal = normal_sign * face_normal

    // Light sample. `direct` is the next-event estimate, zero when the
    // sample was occluded or fell below either surface.
    int light_face = -1;
    Vec2 light_uv;
    Vec3 light_point;
    Rgb direct;

    // Bounce to the next vertex: throughput factor brdf * cos / pdf.
    bool has_next = false;
    Rgb beta;
};

struct PathState {
    Vec3 origin;        // camera position, or the point the path was started from
    Vec2 screen;        // screen sample when started from the camera
    Rgb emission;       // emission seen directly at the first hit
    std::vector<PathVertex> vertices;

    void clear() {
        emission = {};
        vertices.clear();
    }
};

/// Radiance arriving at ray.origin along ray.direction: emission at the first
/// hit plus next-event estimation at every vertex and cosine-sampled bounces.
/// Surfaces and emitters are two-sided. Misses are black.
Rgb radiance(const Scene &scene, const Ray &ray, Pcg32 &rng, int max_bounces, PathState *state = nullptr);

/// Reflected radiance leaving `hit` toward `toward` (no emission at `hit`),
/// with `max_bounces` further bounces.
Rgb reflected_radiance(const Scene &scene, const HitRecord &hit, const Vec3 &toward, Pcg32 &rng, int max_bounces);

/// Sample `sample` of pixel (px, py): the stream and jitter render() uses.
Rgb trace_pixel_sample(const Scene &scene, const CameraFrame &frame, int px, int py, int sample,
                       const RenderConfig &config, PathState *state = nullptr);

/// Per-pixel mean of config.spp samples. A pure function of (scene, config).
ImageBuffer render(const Scene &scene, const RenderConfig &config);

// Tile decomposition shared by render and the reverse passes.
struct Tile {
    int x0, y0, x1, y1;
};
std::vector<Tile> make_tiles(int width, int height);

} // namespace edgetrace
