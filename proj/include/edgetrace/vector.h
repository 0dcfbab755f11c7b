#pragma once

#include <cmath>
#include <ostream>

namespace edgetrace {

using Real = double;

inline constexpr Real kPi = 3.14159265358979323846;

struct Vec2 {
    Real x = 0, y = 0;

    constexpr Vec2() = default;
    constexpr Vec2(Real x, Real y) : x(x), y(y) {}
};

struct Vec3 {
    Real x = 0, y = 0, z = 0;

    constexpr Vec3() = default;
    constexpr Vec3(Real x, Real y, Real z) : x(x), y(y), z(z) {}

    constexpr Real operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr Real &operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

// Colors share the 3-vector arithmetic; products are componentwise.
using Rgb = Vec3;

constexpr Vec2 operator+(const Vec2 &a, const Vec2 &b) { return {a.x + b.x, a.y + b.y}; }
constexpr Vec2 operator-(const Vec2 &a, const Vec2 &b) { return {a.x - b.x, a.y - b.y}; }
constexpr Vec2 operator*(const Vec2 &a, Real s) { return {a.x * s, a.y * s}; }
constexpr Vec2 operator*(Real s, const Vec2 &a) { return {a.x * s, a.y * s}; }
constexpr Real dot(const Vec2 &a, const Vec2 &b) { return a.x * b.x + a.y * b.y; }
inline Real length(const Vec2 &a) { return std::sqrt(dot(a, a)); }

constexpr Vec3 operator+(const Vec3 &a, const Vec3 &b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
constexpr Vec3 operator-(const Vec3 &a, const Vec3 &b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
constexpr Vec3 operator-(const Vec3 &a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(const Vec3 &a, Real s) { return {a.x * s, a.y * s, a.z * s}; }
constexpr Vec3 operator*(Real s, const Vec3 &a) { return {a.x * s, a.y * s, a.z * s}; }
constexpr Vec3 operator*(const Vec3 &a, const Vec3 &b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
constexpr Vec3 operator/(const Vec3 &a, Real s) { return {a.x / s, a.y / s, a.z / s}; }
constexpr Vec3 &operator+=(Vec3 &a, const Vec3 &b) {
    a.x += b.x;
    a.y += b.y;
    a.z += b.z;
    return a;
}
constexpr Vec3 &operator-=(Vec3 &a, const Vec3 &b) {
    a.x -= b.x;
    a.y -= b.y;
    a.z -= b.z;
    return a;
}
constexpr Vec3 &operator*=(Vec3 &a, Real s) {
    a.x *= s;
    a.y *= s;
    a.z *= s;
    return a;
}
constexpr bool operator==(const Vec3 &a, const Vec3 &b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

constexpr Real dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3 &a, const Vec3 &b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline Real length(const Vec3 &a) { return std::sqrt(dot(a, a)); }
constexpr Real length_squared(const Vec3 &a) { return dot(a, a); }
inline Vec3 normalize(const Vec3 &a) { return a / length(a); }
inline Real distance(const Vec3 &a, const Vec3 &b) { return length(a - b); }

constexpr Real sum(const Vec3 &a) { return a.x + a.y + a.z; }
constexpr Real max_component(const Vec3 &a) {
    return a.x > a.y ? (a.x > a.z ? a.x : a.z) : (a.y > a.z ? a.y : a.z);
}
constexpr bool is_zero(const Vec3 &a) { return a.x == 0 && a.y == 0 && a.z == 0; }
inline bool is_finite(const Vec3 &a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

inline std::ostream &operator<<(std::ostream &os, const Vec3 &v) {
    return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}
inline std::ostream &operator<<(std::ostream &os, const Vec2 &v) {
    return os << "(" << v.x << ", " << v.y << ")";
}

// Reverse-mode helpers. Each takes the forward inputs and the adjoint of the
// output and returns (or accumulates) the adjoint of the inputs.

// n = v / |v|
inline Vec3 d_normalize(const Vec3 &v, const Vec3 &d_n) {
    auto len = length(v);
    auto n = v / len;
    return (d_n - n * dot(n, d_n)) / len;
}

// c = a x b
inline void d_cross(const Vec3 &a, const Vec3 &b, const Vec3 &d_c, Vec3 &d_a, Vec3 &d_b) {
    d_a += cross(b, d_c);
    d_b += cross(d_c, a);
}

// l = |v|
inline Vec3 d_length(const Vec3 &v, Real d_l) { return v * (d_l / length(v)); }

} // namespace edgetrace
