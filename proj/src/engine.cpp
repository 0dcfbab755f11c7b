#include "edgetrace/engine.h"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace edgetrace {

LossResult loss_and_adjoint(const ImageBuffer &rendered, const ImageBuffer &target, LossKind loss, bool normalize) {
    if (!same_size(rendered, target)) {
        throw std::invalid_argument("loss: rendered image is " + std::to_string(rendered.width) + "x" +
                                    std::to_string(rendered.height) + ", target is " + std::to_string(target.width) +
                                    "x" + std::to_string(target.height));
    }
    LossResult out;
    out.adjoint = ImageBuffer(rendered.width, rendered.height);
    auto scale = normalize && rendered.size() > 0 ? Real(1) / rendered.size() : Real(1);
    Real total = 0;
    for (int i = 0; i < rendered.size(); i++) {
        auto diff = rendered.pixels[i] - target.pixels[i];
        for (int c = 0; c < 3; c++) {
            auto d = diff[c];
            if (loss == LossKind::L2) {
                total += d * d;
                out.adjoint.pixels[i][c] = 2 * d * scale;
            } else {
                total += std::abs(d);
                out.adjoint.pixels[i][c] = (d > 0 ? 1 : (d < 0 ? -1 : 0)) * scale;
            }
        }
    }
    out.value = total * scale;
    return out;
}

GradientAccumulator gradient_for_adjoint(const Scene &scene, const GradientLayout &layout, const ImageBuffer &adjoint,
                                         const GradConfig &config, bool keep_pixels, SecondaryStats *stats) {
    auto hook = make_secondary_hook(scene, config.render.seed, config.edge_budget.n_secondary_per_shading_point, stats);
    auto acc = backprop_image(scene, layout, adjoint, config.render, keep_pixels, hook);
    sample_primary_edges(scene, layout, adjoint, config.edge_budget.n_primary, config.render, acc);
    return acc;
}

GradientResult render_with_gradients(const Scene &scene, const ImageBuffer &target, const GradConfig &config) {
    GradientResult out;
    out.image = render(scene, config.render);
    auto loss = loss_and_adjoint(out.image, target, config.loss, config.normalize_loss);
    out.loss = loss.value;
    GradientLayout layout(scene);
    out.gradient = gradient_for_adjoint(scene, layout, loss.adjoint, config).total;
    return out;
}

ImageBuffer gradient_image(const Scene &scene, int scalar_index, const GradConfig &config) {
    if (scalar_index < 0 || scalar_index >= scene.registry().total_dim()) {
        throw std::out_of_range("gradient_image: scalar index out of range");
    }
    const auto &cam = scene.camera();
    auto layout = GradientLayout::single(scene, scalar_index);
    ImageBuffer out(cam.width, cam.height);
    for (int c = 0; c < 3; c++) {
        ImageBuffer adjoint(cam.width, cam.height);
        for (auto &p : adjoint.pixels) {
            p[c] = 1;
        }
        auto acc = gradient_for_adjoint(scene, layout, adjoint, config, true);
        for (int i = 0; i < out.size(); i++) {
            out.pixels[i][c] = acc.per_pixel[i];
        }
    }
    return out;
}

Real central_difference(const std::function<Real(Real)> &f, Real x, Real h) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

GradientVector fd_gradient(const Scene &scene, const ImageBuffer &target, const GradConfig &config) {
    auto params = read_parameters(scene);
    auto dim = static_cast<int>(params.size());
    GradientVector out(dim);
    for (int k = 0; k < dim; k++) {
        auto h = k < static_cast<int>(config.fd_steps.size()) ? config.fd_steps[k] : config.fd_step;
        if (!(h > 0)) {
            throw std::invalid_argument("fd_gradient: step must be positive");
        }
        auto loss_at = [&](Real value) {
            auto p = params;
            p[k] = value;
            auto img = render(apply_parameters(scene, p), config.render);
            return loss_and_adjoint(img, target, config.loss, config.normalize_loss).value;
        };
        out[k] = central_difference(loss_at, params[k], h);
    }
    return out;
}

Real relative_l1_error(const GradientVector &analytic, const GradientVector &reference) {
    Real num = 0, den = 0;
    for (int k = 0; k < reference.size(); k++) {
        num += std::abs(analytic[k] - reference[k]);
        den += std::abs(reference[k]);
    }
    if (den == 0) {
        return num == 0 ? 0 : std::numeric_limits<Real>::infinity();
    }
    return num / den;
}

FdReport fd_check(const Scene &scene, const ImageBuffer &target, const GradConfig &config,
                  const GradConfig &fd_config, Real threshold) {
    if (scene.registry().total_dim() == 0) {
        throw std::invalid_argument("fd-check: the scene declares no differentiable parameters");
    }
    auto analytic = render_with_gradients(scene, target, config);
    auto fd = fd_gradient(scene, target, fd_config);
    FdReport report;
    report.threshold = threshold;
    report.loss = analytic.loss;
    for (int k = 0; k < fd.size(); k++) {
        report.entries.push_back({scene.registry().scalar_name(k), analytic.gradient[k], fd[k],
                                  std::abs(analytic.gradient[k] - fd[k])});
    }
    report.aggregate = relative_l1_error(analytic.gradient, fd);
    report.passed = report.aggregate <= threshold;
    return report;
}

std::string to_json(const FdReport &report) {
    nlohmann::json j;
    j["parameters"] = nlohmann::json::array();
    for (const auto &e : report.entries) {
        j["parameters"].push_back({{"name", e.name}, {"analytic", e.analytic}, {"fd", e.fd}, {"abs_err", e.abs_err}});
    }
    j["aggregate_relative_l1"] = std::isfinite(report.aggregate) ? nlohmann::json(report.aggregate) : nlohmann::json(nullptr);
    j["threshold"] = report.threshold;
    j["passed"] = report.passed;
    j["loss"] = report.loss;
    return j.dump(2);
}

} // namespace edgetrace
