#pragma once

#include "edgetrace/adjoint.h"
#include "edgetrace/edges.h"
#include "edgetrace/image.h"
#include "edgetrace/render.h"
#include "edgetrace/scene.h"

#include <functional>
#include <string>

namespace edgetrace {

enum class LossKind { L2, L1 };

struct EdgeSampleBudget {
    int n_primary = 100000;
    int n_secondary_per_shading_point = 1;
};

struct GradConfig {
    RenderConfig render;
    EdgeSampleBudget edge_budget;
    LossKind loss = LossKind::L2;
    bool normalize_loss = true; // divide by pixel count
    Real fd_step = 1e-3;
    std::vector<Real> fd_steps; // per-scalar override, empty = fd_step everywhere
};

struct LossResult {
    Real value = 0;
    ImageBuffer adjoint; // dLoss / dPixel
};

/// L2: sum (r - t)^2, adjoint 2 (r - t). L1: sum |r - t|, adjoint sign(r - t).
/// Sums run over pixels and channels; with normalize both are divided by the
/// pixel count. Throws std::invalid_argument on a size mismatch.
LossResult loss_and_adjoint(const ImageBuffer &rendered, const ImageBuffer &target, LossKind loss,
                            bool normalize = true);

/// Smooth term, secondary edges and primary edges for a fixed adjoint image.
GradientAccumulator gradient_for_adjoint(const Scene &scene, const GradientLayout &layout, const ImageBuffer &adjoint,
                                         const GradConfig &config, bool keep_pixels = false,
                                         SecondaryStats *stats = nullptr);

struct GradientResult {
    ImageBuffer image;
    Real loss = 0;
    GradientVector gradient;
};

GradientResult render_with_gradients(const Scene &scene, const ImageBuffer &target, const GradConfig &config);

/// Per-pixel derivative of the rendered image w.r.t. one registered scalar.
ImageBuffer gradient_image(const Scene &scene, int scalar_index, const GradConfig &config);

/// (f(x + h) - f(x - h)) / 2h
Real central_difference(const std::function<Real(Real)> &f, Real x, Real h);

/// Central differences of the loss, both sides rendered with the same seed.
/// The caller picks h small enough not to jump over geometry.
GradientVector fd_gradient(const Scene &scene, const ImageBuffer &target, const GradConfig &config);

/// Sum |a - f| / sum |f|; 0 when both are zero, infinity when only f is.
Real relative_l1_error(const GradientVector &analytic, const GradientVector &reference);

struct FdEntry {
    std::string name;
    Real analytic = 0, fd = 0, abs_err = 0;
};

struct FdReport {
    std::vector<FdEntry> entries;
    Real aggregate = 0;
    Real threshold = 0.01;
    bool passed = false;
    Real loss = 0;
};

/// render_with_gradients against fd_gradient. fd_config may use more
/// samples than config; the seed of config is shared.
FdReport fd_check(const Scene &scene, const ImageBuffer &target, const GradConfig &config,
                  const GradConfig &fd_config, Real threshold = 0.01);

std::string to_json(const FdReport &report);

} // namespace edgetrace
