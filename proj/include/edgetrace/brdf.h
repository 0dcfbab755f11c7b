#pragma once

#include "edgetrace/scene.h"

namespace edgetrace {

/// Lambert + normalised Blinn-Phong:
///   f = kd/pi + ks (s+2)/(2 pi) max(0, n.h)^s
/// Zero unless both wo and wi are strictly above the (oriented) normal.
Rgb eval_brdf(const Material &m, const Vec3 &n, const Vec3 &wo, const Vec3 &wi);

struct BrdfGrad {
    Vec3 n, wo, wi;
    Rgb diffuse, specular;
};

/// Reverse pass of eval_brdf for output adjoint d_f; accumulates into g.
void d_eval_brdf(const Material &m, const Vec3 &n, const Vec3 &wo, const Vec3 &wi, const Rgb &d_f, BrdfGrad &g);

// Crude upper bound on the reflectance, used to weight edge selection.
Real brdf_bound(const Material &m);

} // namespace edgetrace
