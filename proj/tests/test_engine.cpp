#include "edgetrace/engine.h"

#include "test_support.h"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>

using namespace edgetrace;
using namespace edgetrace::testing;

TEST(Engine, IdenticalImagesGiveZeroLoss) {
    ImageBuffer a(4, 3);
    a.at(1, 2) = {0.5, 0.25, 1};
    for (auto kind : {LossKind::L2, LossKind::L1}) {
        auto r = loss_and_adjoint(a, a, kind);
        EXPECT_EQ(r.value, 0);
        for (const auto &p : r.adjoint.pixels) {
            EXPECT_EQ(p, Rgb());
        }
    }
}

TEST(Engine, SinglePixelOffByOne) {
    ImageBuffer r(4, 4), t(4, 4);
    r.at(2, 1) = {1, 0, 0};
    auto l2 = loss_and_adjoint(r, t, LossKind::L2, false);
    EXPECT_EQ(l2.value, 1);
    EXPECT_EQ(l2.adjoint.at(2, 1), Rgb(2, 0, 0));
    auto normalized = loss_and_adjoint(r, t, LossKind::L2, true);
    EXPECT_DOUBLE_EQ(normalized.value, 1.0 / 16);
    auto l1 = loss_and_adjoint(t, r, LossKind::L1, false);
    EXPECT_EQ(l1.value, 1);
    EXPECT_EQ(l1.adjoint.at(2, 1), Rgb(-1, 0, 0));
    EXPECT_THROW(loss_and_adjoint(r, ImageBuffer(3, 4), LossKind::L2), std::invalid_argument);
}

TEST(Engine, AdjointMatchesFiniteDifferencesOfLoss) {
    ImageBuffer r(3, 3), t(3, 3);
    for (int i = 0; i < 9; i++) {
        r.pixels[i] = {0.1 * i, 0.3, 1 - 0.05 * i};
        t.pixels[i] = {0.5, 0.2 * i, 0.4};
    }
    auto base = loss_and_adjoint(r, t, LossKind::L2);
    const Real h = 1e-6;
    for (int i = 0; i < 9; i++) {
        for (int c = 0; c < 3; c++) {
            auto hi = r, lo = r;
            hi.pixels[i][c] += h;
            lo.pixels[i][c] -= h;
            auto fd = (loss_and_adjoint(hi, t, LossKind::L2).value - loss_and_adjoint(lo, t, LossKind::L2).value) / (2 * h);
            EXPECT_NEAR(base.adjoint.pixels[i][c], fd, 1e-6);
        }
    }
}

TEST(Engine, CentralDifferenceOfQuadratic) {
    auto fd = central_difference([](Real x) { return x * x; }, 3, 1e-3);
    EXPECT_NEAR(fd, 6.0, 1e-9);
}

TEST(Engine, FdOfIrrelevantParameterIsExactlyZero) {
    // The triangle's diffuse color does not reach the image when nothing lights it.
    auto s = single_triangle({0, 0, 0}, {"material[0].diffuse"});
    auto emitter = single_triangle({1, 1, 1}, {"mesh[0].emission"});
    GradConfig cfg;
    cfg.render.spp = 4;
    auto target = ImageBuffer(s.camera().width, s.camera().height);
    auto fd = fd_gradient(s, target, cfg);
    for (auto x : fd.values) {
        EXPECT_EQ(x, 0);
    }
    // Common random numbers: unrelated emission channels cancel exactly.
    auto e = fd_gradient(emitter, target, cfg);
    EXPECT_GT(e[0], 0);
}

TEST(Engine, CentralAgreesWithOneSidedToFirstOrder) {
    auto s = load_named("triangle.json");
    s = with_parameters(s, {"material[0].diffuse"});
    GradConfig cfg;
    cfg.render.spp = 4;
    auto target = ImageBuffer(s.camera().width, s.camera().height);
    auto p = read_parameters(s);
    auto loss = [&](Real x) {
        auto q = p;
        q[0] = x;
        return loss_and_adjoint(render(apply_parameters(s, q), cfg.render), target, cfg.loss).value;
    };
    auto central = central_difference(loss, p[0], 1e-3);
    for (Real h : {1e-2, 5e-3}) {
        auto one_sided = (loss(p[0] + h) - loss(p[0])) / h;
        // Error of the forward difference is h f''/2, with f'' constant here.
        auto curvature = (loss(p[0] + h) - 2 * loss(p[0]) + loss(p[0] - h)) / (h * h);
        EXPECT_NEAR(one_sided - central, curvature * h / 2, 1e-6 * std::abs(central));
    }
}

TEST(Engine, RelativeL1Error) {
    GradientVector a(2), f(2);
    f[0] = 1;
    f[1] = -3;
    a[0] = 1.1;
    a[1] = -3;
    EXPECT_NEAR(relative_l1_error(a, f), 0.1 / 4, 1e-15);
    EXPECT_EQ(relative_l1_error(GradientVector(2), GradientVector(2)), 0);
    EXPECT_TRUE(std::isinf(relative_l1_error(a, GradientVector(2))));
}

TEST(Engine, UnregisteredParametersGiveZeroVector) {
    auto s = load_named("occlusion.json");
    s = with_parameters(s, {});
    GradConfig cfg;
    cfg.render.spp = 2;
    auto r = render_with_gradients(s, ImageBuffer(s.camera().width, s.camera().height), cfg);
    EXPECT_EQ(r.gradient.size(), 0);
}

TEST(Engine, EmissionGradientHasNoEdgeTerm) {
    auto s = load_named("occlusion.json");
    s = with_parameters(s, {"mesh[2].emission"});
    GradConfig with, without;
    with.render.spp = without.render.spp = 4;
    without.edge_budget = {0, 0};
    auto target = ImageBuffer(s.camera().width, s.camera().height);
    auto a = render_with_gradients(s, target, with), b = render_with_gradients(s, target, without);
    EXPECT_EQ(a.gradient.values, b.gradient.values);
}

TEST(Engine, SeedDeterminismAndThreadInvariance) {
    auto s = load_named("shadow.json");
    GradConfig cfg;
    cfg.render.spp = 4;
    cfg.render.max_bounces = 1;
    cfg.edge_budget = {10000, 1};
    auto target = ImageBuffer(s.camera().width, s.camera().height);
    cfg.render.threads = 1;
    auto a = render_with_gradients(s, target, cfg);
    cfg.render.threads = 3;
    auto b = render_with_gradients(s, target, cfg);
    EXPECT_EQ(a.image.pixels, b.image.pixels);
    EXPECT_EQ(a.gradient.values, b.gradient.values);
    EXPECT_EQ(a.loss, b.loss);
}

TEST(Engine, GradientImageOfEmissionIsFlatOnTheEmitter) {
    auto s = single_triangle({1, 0.8, 0.6}, {"mesh[0].emission"});
    GradConfig cfg;
    cfg.render.spp = 16;
    auto img = gradient_image(s, 0, cfg);
    auto shade = render(s, cfg.render);
    for (int i = 0; i < img.size(); i++) {
        // Coverage-weighted: 1 inside, 0 outside, partial on boundary pixels.
        EXPECT_NEAR(img.pixels[i].x, shade.pixels[i].x, 1e-12);
        EXPECT_EQ(img.pixels[i].y, 0);
    }
    EXPECT_EQ(img.at(7, 8).x, 1);
    EXPECT_EQ(img.at(0, 0).x, 0);
    EXPECT_THROW(gradient_image(s, 3, cfg), std::out_of_range);
}

TEST(Engine, CanonicalOcclusionMatchesFiniteDifferences) {
    auto s = load_named("occlusion.json");
    GradConfig cfg;
    cfg.render.spp = 1024;
    cfg.edge_budget = {1000000, 1};
    // The oracle needs many more samples than the estimator: edge pixels
    // flip between +h and -h and h has to stay small for the O(h^2) bias.
    cfg.fd_step = 5e-3;
    auto fd_cfg = cfg;
    fd_cfg.render.spp = 16384;
    auto report = fd_check(s, ImageBuffer(s.camera().width, s.camera().height), cfg, fd_cfg);
    EXPECT_LE(report.aggregate, 0.01);
    EXPECT_TRUE(report.passed);
    auto j = nlohmann::json::parse(to_json(report));
    EXPECT_EQ(j["parameters"].size(), 3u);
    EXPECT_EQ(j["parameters"][0]["name"], "mesh[1].translation[0]");
    EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(Engine, IndirectBounceMatchesFiniteDifferences) {
    // One bounce adds blocker-lit floor light and the hook's reflected-radiance path.
    auto s = load_named("shadow.json");
    GradConfig cfg;
    cfg.render.spp = 1024;
    cfg.render.max_bounces = 1;
    cfg.edge_budget = {100000, 1};
    cfg.fd_step = 1e-2;
    auto target = ImageBuffer(s.camera().width, s.camera().height);
    auto a = render_with_gradients(s, target, cfg);
    cfg.render.spp = 4096;
    auto fd = fd_gradient(s, target, cfg);
    EXPECT_LE(relative_l1_error(a.gradient, fd), 0.02);
}
