#pragma once

#include "edgetrace/engine.h"

#include <map>
#include <ostream>
#include <span>
#include <string>

namespace edgetrace {

struct AdamState {
    std::vector<Real> m, v;
    long step_count = 0;
    Real beta1 = 0.9, beta2 = 0.999;
    Real epsilon = 1e-8;
    bool bias_correction = false;

    explicit AdamState(int dim = 0) : m(dim, 0), v(dim, 0) {}
};

/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  x <- x - lr m / (sqrt(v) + eps)
/// with m, v divided by (1 - b^t) when bias_correction is on. `lr` holds one
/// rate per scalar. Throws std::domain_error on a non-finite gradient.
std::vector<Real> adam_step(AdamState &state, std::span<const Real> params, std::span<const Real> grad,
                            std::span<const Real> lr);

std::vector<Real> sgd_step(std::span<const Real> params, std::span<const Real> grad, std::span<const Real> lr);

enum class Optimizer { Adam, Sgd };

struct OptimizeConfig {
    int iterations = 100;
    Real learning_rate = 1e-2;
    std::map<std::string, Real> group_learning_rates; // parameter path -> rate
    Optimizer method = Optimizer::Adam;
    bool bias_correction = false;
    GradConfig grad; // grad.render.seed is the base seed; each iteration derives a fresh one
};

struct IterationRecord {
    int iter = 0;
    Real loss = 0;
    std::vector<Real> params; // before this iteration's step
    std::string params_digest;
    double wall_ms = 0;
};

struct OptimizeResult {
    std::vector<IterationRecord> trajectory;
    std::vector<Real> final_params;
    Scene final_scene;
};

/// Called after every iteration (for logs and previews).
using IterationCallback = std::function<void(const IterationRecord &, const Scene &)>;

/// Gradient descent on the loss against `target`. The input scene is not modified.
OptimizeResult optimize(const Scene &scene, const ImageBuffer &target, const OptimizeConfig &config,
                        const IterationCallback &callback = {});

std::string params_digest(std::span<const Real> params);

/// One NDJSON line: {"iter", "loss", "params_digest", "wall_ms"}.
std::string trajectory_line(const IterationRecord &record);

} // namespace edgetrace
