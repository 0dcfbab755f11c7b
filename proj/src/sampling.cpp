#include "edgetrace/sampling.h"

#include <algorithm>
#include <cmath>

namespace edgetrace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Pcg32 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return Pcg32(h, splitmix64(h ^ 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ static_cast<std::uint64_t>(StreamTag::Iteration)) ^ index);
}

Vec2 stratify(int sample_index, int spp, Real u1, Real u2) {
    auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(spp))));
    if (n * n != spp || n <= 1) {
        return {u1, u2};
    }
    auto i = sample_index % n, j = sample_index / n;
    // Clamp keeps the result in [0,1) when u is within an ulp of 1.
    auto x = std::min((i + u1) / n, std::nextafter(1.0, 0.0));
    auto y = std::min((j + u2) / n, std::nextafter(1.0, 0.0));
    return {x, y};
}

Vec3 cosine_hemisphere(Real u1, Real u2) {
    auto r = std::sqrt(u1);
    auto phi = 2 * kPi * u2;
    return {r * std::cos(phi), r * std::sin(phi), std::sqrt(std::max<Real>(0, 1 - u1))};
}

void orthonormal_basis(const Vec3 &n, Vec3 &t, Vec3 &b) {
    auto sign = std::copysign(Real(1), n.z);
    auto a = -1 / (sign + n.z);
    auto c = n.x * n.y * a;
    t = {1 + sign * n.x * n.x * a, sign * c, -sign * n.x};
    b = {c, sign + n.y * n.y * a, -n.y};
}

Vec2 sample_triangle(Real u1, Real u2) {
    auto su = std::sqrt(u1);
    return {su * (1 - u2), su * u2};
}

} // namespace edgetrace
