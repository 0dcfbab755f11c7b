#include "edgetrace/brdf.h"

#include <algorithm>

namespace edgetrace {

namespace {

Real lobe_norm(const Material &m) { return (m.shininess + 2) / (2 * kPi); }

bool has_specular(const Material &m) { return !is_zero(m.specular); }

} // namespace

Rgb eval_brdf(const Material &m, const Vec3 &n, const Vec3 &wo, const Vec3 &wi) {
    if (!(dot(n, wi) > 0) || !(dot(n, wo) > 0)) {
        return {};
    }
    auto f = m.diffuse * (1 / kPi);
    if (has_specular(m)) {
        auto h = normalize(wo + wi);
        auto c = std::max<Real>(0, dot(n, h));
        f += m.specular * (lobe_norm(m) * std::pow(c, m.shininess));
    }
    return f;
}

void d_eval_brdf(const Material &m, const Vec3 &n, const Vec3 &wo, const Vec3 &wi, const Rgb &d_f, BrdfGrad &g) {
    if (!(dot(n, wi) > 0) || !(dot(n, wo) > 0)) {
        return;
    }
    g.diffuse += d_f * (1 / kPi);
    if (!has_specular(m)) {
        return;
    }
    auto h_raw = wo + wi;
    auto h = normalize(h_raw);
    auto c = dot(n, h);
    if (!(c > 0)) {
        return;
    }
    auto lobe = lobe_norm(m) * std::pow(c, m.shininess);
    g.specular += d_f * lobe;
    auto d_c = dot(d_f, m.specular) * lobe_norm(m) * m.shininess * std::pow(c, m.shininess - 1);
    g.n += h * d_c;
    auto d_h_raw = d_normalize(h_raw, n * d_c);
    g.wo += d_h_raw;
    g.wi += d_h_raw;
}

Real brdf_bound(const Material &m) {
    return max_component(m.diffuse) / kPi + max_component(m.specular) * lobe_norm(m);
}

} // namespace edgetrace
