#include "edgetrace/optimize.h"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace edgetrace {

namespace {

void check_sizes(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || a != c) {
        throw std::invalid_argument("optimizer: parameter, gradient and rate vectors differ in length");
    }
}

void check_finite(std::span<const Real> grad) {
    for (std::size_t k = 0; k < grad.size(); k++) {
        if (!std::isfinite(grad[k])) {
            throw std::domain_error("optimizer: non-finite gradient component " + std::to_string(k));
        }
    }
}

} // namespace

std::vector<Real> adam_step(AdamState &state, std::span<const Real> params, std::span<const Real> grad,
                            std::span<const Real> lr) {
    check_sizes(params.size(), grad.size(), lr.size());
    check_finite(grad);
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0);
        state.v.assign(params.size(), 0);
    }
    state.step_count++;
    auto c1 = state.bias_correction ? 1 - std::pow(state.beta1, static_cast<Real>(state.step_count)) : 1;
    auto c2 = state.bias_correction ? 1 - std::pow(state.beta2, static_cast<Real>(state.step_count)) : 1;
    std::vector<Real> out(params.begin(), params.end());
    for (std::size_t k = 0; k < params.size(); k++) {
        state.m[k] = state.beta1 * state.m[k] + (1 - state.beta1) * grad[k];
        state.v[k] = state.beta2 * state.v[k] + (1 - state.beta2) * grad[k] * grad[k];
        auto m = state.m[k] / c1;
        auto v = state.v[k] / c2;
        out[k] -= lr[k] * m / (std::sqrt(v) + state.epsilon);
    }
    return out;
}

std::vector<Real> sgd_step(std::span<const Real> params, std::span<const Real> grad, std::span<const Real> lr) {
    check_sizes(params.size(), grad.size(), lr.size());
    check_finite(grad);
    std::vector<Real> out(params.begin(), params.end());
    for (std::size_t k = 0; k < params.size(); k++) {
        out[k] -= lr[k] * grad[k];
    }
    return out;
}

std::string params_digest(std::span<const Real> params) {
    // FNV-1a over the raw bytes.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto v : params) {
        unsigned char bytes[sizeof(Real)];
        std::memcpy(bytes, &v, sizeof(Real));
        for (auto b : bytes) {
            h = (h ^ b) * 0x100000001b3ULL;
        }
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::string trajectory_line(const IterationRecord &record) {
    nlohmann::json j;
    j["iter"] = record.iter;
    j["loss"] = record.loss;
    j["params_digest"] = record.params_digest;
    j["wall_ms"] = record.wall_ms;
    return j.dump();
}

OptimizeResult optimize(const Scene &scene, const ImageBuffer &target, const OptimizeConfig &config,
                        const IterationCallback &callback) {
    if (config.iterations < 0) {
        throw std::invalid_argument("optimize: iterations must be non-negative");
    }
    const auto &registry = scene.registry();
    std::vector<Real> lr(registry.total_dim(), config.learning_rate);
    for (const auto &[path, rate] : config.group_learning_rates) {
        const auto *entry = registry.find(path);
        if (!entry) {
            throw std::invalid_argument("optimize: learning rate given for unregistered parameter \"" + path + "\"");
        }
        std::fill(lr.begin() + entry->offset, lr.begin() + entry->offset + entry->size, rate);
    }

    OptimizeResult result;
    auto params = read_parameters(scene);
    auto current = scene;
    AdamState adam(registry.total_dim());
    adam.bias_correction = config.bias_correction;
    for (int it = 0; it < config.iterations; it++) {
        auto start = std::chrono::steady_clock::now();
        auto grad_config = config.grad;
        grad_config.render.seed = derive_seed(config.grad.render.seed, static_cast<std::uint64_t>(it));
        auto step = render_with_gradients(current, target, grad_config);
        IterationRecord record;
        record.iter = it;
        record.loss = step.loss;
        record.params = params;
        record.params_digest = params_digest(params);
        params = config.method == Optimizer::Adam ? adam_step(adam, params, step.gradient.values, lr)
                                                  : sgd_step(params, step.gradient.values, lr);
        current = apply_parameters(scene, params);
        record.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (callback) {
            callback(record, current);
        }
        result.trajectory.push_back(std::move(record));
    }
    result.final_params = params;
    result.final_scene = current;
    return result;
}

} // namespace edgetrace
