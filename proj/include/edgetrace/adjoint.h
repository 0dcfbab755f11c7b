#pragma once

#include "edgetrace/image.h"
#include "edgetrace/render.h"
#include "edgetrace/scene.h"

#include <functional>
#include <span>

namespace edgetrace {

struct PixelAdjoint {
    int px = 0, py = 0;
    Rgb weight; // dLoss / dPixel
};

/// Gradient sums for one pass. Optionally keeps a per-pixel copy of every
/// contribution (used for derivative images, where dim is 1).
struct GradientAccumulator {
    GradientVector total;
    int width = 0, height = 0;
    std::vector<Real> per_pixel; // (y * width + x) * dim + k; empty when disabled

    GradientAccumulator() = default;
    GradientAccumulator(int dim, int w, int h, bool keep_pixels);

    int dim() const { return total.size(); }
    bool keeps_pixels() const { return !per_pixel.empty(); }
    void add(int px, int py, std::span<const Real> values);
    void merge(const GradientAccumulator &other);
};

/// What a per-vertex hook sees: the vertex, its pixel sample, and the
/// adjoint weight reaching it (pixel adjoint times path throughput).
struct VertexContext {
    const PathState *path = nullptr;
    int vertex = 0;
    int px = 0, py = 0, sample = 0;
    Rgb weight;
    int bounces_left = 0;
};

/// Extra terms evaluated at each vertex during the reverse pass (secondary
/// edges). Returns a derivative w.r.t. the vertex position, which is chained
/// through the path like every other position derivative.
using VertexHook = std::function<Vec3(const VertexContext &, GradientSink &)>;

/// Derivative of one sample's contribution, scaled by `weight`, with the path
/// structure held fixed. The camera hit moves by reprojection onto its face
/// plane; deeper vertices and light samples are material points of their
/// faces and carry the face-area Jacobian.
/// Throws std::logic_error for a path that does not belong to this scene.
void backprop_sample(const Scene &scene, const PathState &path, const Rgb &weight, GradientSink &sink,
                     const VertexHook &hook = {}, int px = 0, int py = 0, int sample = 0, int max_bounces = 0);

/// Replays render()'s samples and accumulates their reverse pass under the
/// given per-pixel adjoint image.
GradientAccumulator backprop_image(const Scene &scene, const GradientLayout &layout, const ImageBuffer &adjoint,
                                   const RenderConfig &config, bool keep_pixels = false, const VertexHook &hook = {});

GradientVector backprop_image(const Scene &scene, const ImageBuffer &adjoint, const RenderConfig &config);

} // namespace edgetrace
