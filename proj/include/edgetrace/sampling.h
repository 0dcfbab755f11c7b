#pragma once

#include "edgetrace/vector.h"

#include <cstdint>

namespace edgetrace {

/// PCG32 (XSH-RR). Small, fast, and splittable through the stream selector.
class Pcg32 {
public:
    Pcg32() : Pcg32(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL) {}
    Pcg32(std::uint64_t seed, std::uint64_t stream) {
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        auto old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
    }

    // Uniform in [0, 1).
    Real uniform() { return next_u32() * 0x1p-32; }

private:
    std::uint64_t state_ = 0, inc_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Independent random streams for the different consumers of a sample.
enum class StreamTag : std::uint64_t {
    Pixel = 1,
    SecondaryEdge = 2,
    SecondaryPath = 3,
    PrimaryEdge = 4,
    PrimaryEdgePath = 5,
    Iteration = 6,
};

/// Stream keyed by (seed, tag, a, b, c) only, so results do not depend on
/// evaluation order or thread assignment.
Pcg32 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Box pixel filter: a uniform point inside pixel (px, py).
inline Vec2 sample_pixel_point(int px, int py, Real u1, Real u2) { return {px + u1, py + u2}; }

/// Jittered sample position in the unit square: stratified on an n x n grid
/// when spp == n*n, otherwise the raw pair.
Vec2 stratify(int sample_index, int spp, Real u1, Real u2);

/// Cosine-weighted direction about the +z axis.
Vec3 cosine_hemisphere(Real u1, Real u2);

/// Orthonormal basis (t, b) completing n (Duff et al.).
void orthonormal_basis(const Vec3 &n, Vec3 &t, Vec3 &b);

/// Uniform point on a triangle as barycentric weights of its 2nd and 3rd vertices.
Vec2 sample_triangle(Real u1, Real u2);

/// Single-pass weighted selection driven by one uniform number; each item
/// ends up selected with probability weight / total.
class WeightedReservoir {
public:
    explicit WeightedReservoir(Real u) : u_(u) {}

    void add(int item, Real weight) {
        if (!(weight > 0)) {
            return;
        }
        total_ += weight;
        auto p = weight / total_;
        if (u_ < p) {
            selected_ = item;
            selected_weight_ = weight;
            u_ = u_ / p;
        } else {
            u_ = (u_ - p) / (1 - p);
        }
    }

    int selected() const { return selected_; }
    Real probability() const { return selected_ < 0 ? 0 : selected_weight_ / total_; }
    Real total() const { return total_; }

private:
    Real u_;
    Real total_ = 0;
    int selected_ = -1;
    Real selected_weight_ = 0;
};

} // namespace edgetrace
