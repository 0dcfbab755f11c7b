#include "edgetrace/sampling.h"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace edgetrace;

TEST(Sampling, PixelPointIsBoxFilter) {
    auto p = sample_pixel_point(3, 5, 0, 0);
    EXPECT_EQ(p.x, 3.0);
    EXPECT_EQ(p.y, 5.0);
    p = sample_pixel_point(3, 5, 0.5, 0.5);
    EXPECT_EQ(p.x, 3.5);
    EXPECT_EQ(p.y, 5.5);
}

TEST(Sampling, PixelPointsCoverPixelUniformly) {
    // Chi-square over a 10 x 10 grid of cells, 99 degrees of freedom.
    auto rng = make_stream(42, StreamTag::Pixel, 3, 5, 0);
    std::vector<int> counts(100, 0);
    const int n = 100000;
    for (int i = 0; i < n; i++) {
        auto p = sample_pixel_point(3, 5, rng.uniform(), rng.uniform());
        ASSERT_GE(p.x, 3);
        ASSERT_LT(p.x, 4);
        ASSERT_GE(p.y, 5);
        ASSERT_LT(p.y, 6);
        counts[static_cast<int>((p.y - 5) * 10) * 10 + static_cast<int>((p.x - 3) * 10)]++;
    }
    double chi2 = 0, expected = n / 100.0;
    for (auto c : counts) {
        chi2 += (c - expected) * (c - expected) / expected;
    }
    EXPECT_LT(chi2, 148.2); // 0.1% tail of chi-square(99)
}

TEST(Sampling, StratifyPlacesOneSamplePerCell) {
    std::vector<int> hit(16, 0);
    auto rng = make_stream(1, StreamTag::Pixel);
    for (int s = 0; s < 16; s++) {
        auto p = stratify(s, 16, rng.uniform(), rng.uniform());
        hit[static_cast<int>(p.y * 4) * 4 + static_cast<int>(p.x * 4)]++;
    }
    for (auto h : hit) {
        EXPECT_EQ(h, 1);
    }
    auto raw = stratify(3, 5, 0.25, 0.75);
    EXPECT_EQ(raw.x, 0.25);
    EXPECT_EQ(raw.y, 0.75);
}

TEST(Sampling, StreamsAreKeyedNotOrdered) {
    auto a = make_stream(7, StreamTag::Pixel, 1, 2, 3);
    auto b = make_stream(7, StreamTag::Pixel, 1, 2, 3);
    auto c = make_stream(7, StreamTag::Pixel, 1, 2, 4);
    auto d = make_stream(7, StreamTag::SecondaryEdge, 1, 2, 3);
    auto x = a.next_u32();
    EXPECT_EQ(x, b.next_u32());
    EXPECT_NE(x, c.next_u32());
    EXPECT_NE(x, d.next_u32());
    EXPECT_NE(derive_seed(7, 0), derive_seed(7, 1));
    EXPECT_EQ(derive_seed(7, 1), derive_seed(7, 1));
}

TEST(Sampling, ReservoirFrequenciesMatchWeights) {
    std::vector<Real> w{1, 0, 3, 0.5, 2, 7, 0.25};
    Real total = 0;
    for (auto x : w) {
        total += x;
    }
    const int n = 100000;
    std::vector<int> counts(w.size(), 0);
    auto rng = make_stream(3, StreamTag::SecondaryEdge);
    for (int i = 0; i < n; i++) {
        WeightedReservoir r(rng.uniform());
        for (int k = 0; k < static_cast<int>(w.size()); k++) {
            r.add(k, w[k]);
        }
        ASSERT_GE(r.selected(), 0);
        EXPECT_DOUBLE_EQ(r.probability(), w[r.selected()] / total);
        counts[r.selected()]++;
    }
    for (std::size_t k = 0; k < w.size(); k++) {
        auto p = w[k] / total;
        auto sigma = std::sqrt(n * p * (1 - p));
        EXPECT_LE(std::abs(counts[k] - n * p), 3 * sigma + 1e-9) << "item " << k;
    }
    EXPECT_EQ(counts[1], 0);
}

TEST(Sampling, EmptyReservoirSelectsNothing) {
    WeightedReservoir r(0.5);
    r.add(0, 0);
    EXPECT_EQ(r.selected(), -1);
    EXPECT_EQ(r.probability(), 0);
}

TEST(Sampling, CosineHemisphereHasCosineDensity) {
    // E[cos] = 2/3 under p = cos / pi.
    auto rng = make_stream(9, StreamTag::Pixel);
    double s = 0;
    const int n = 200000;
    for (int i = 0; i < n; i++) {
        auto d = cosine_hemisphere(rng.uniform(), rng.uniform());
        ASSERT_NEAR(length(d), 1, 1e-12);
        ASSERT_GE(d.z, 0);
        s += d.z;
    }
    EXPECT_NEAR(s / n, 2.0 / 3, 0.003);
}

TEST(Sampling, OrthonormalBasis) {
    auto rng = make_stream(4, StreamTag::Pixel);
    for (int i = 0; i < 1000; i++) {
        auto n = normalize(Vec3{rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5});
        Vec3 t, b;
        orthonormal_basis(n, t, b);
        EXPECT_NEAR(dot(t, n), 0, 1e-12);
        EXPECT_NEAR(dot(b, n), 0, 1e-12);
        EXPECT_NEAR(dot(t, b), 0, 1e-12);
        EXPECT_NEAR(length(t), 1, 1e-12);
        EXPECT_NEAR(dot(cross(t, b), n), 1, 1e-12);
    }
}

TEST(Sampling, TrianglePointsAreUniform) {
    // Mean barycentrics of a uniform point are (1/3, 1/3).
    auto rng = make_stream(5, StreamTag::Pixel);
    double su = 0, sv = 0;
    const int n = 200000;
    for (int i = 0; i < n; i++) {
        auto b = sample_triangle(rng.uniform(), rng.uniform());
        ASSERT_LE(b.x + b.y, 1 + 1e-12);
        su += b.x;
        sv += b.y;
    }
    EXPECT_NEAR(su / n, 1.0 / 3, 0.002);
    EXPECT_NEAR(sv / n, 1.0 / 3, 0.002);
}
