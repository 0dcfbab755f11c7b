#include "edgetrace/render.h"

#include "edgetrace/brdf.h"
#include "edgetrace/parallel.h"

#include <algorithm>

namespace edgetrace {

namespace {

int pick_light(const LightSampler &lights, Real u) {
    auto it = std::upper_bound(lights.cdf.begin(), lights.cdf.end(), u);
    auto k = static_cast<int>(it - lights.cdf.begin());
    return std::min(k, static_cast<int>(lights.cdf.size()) - 1);
}

Vec3 barycentric_point(const std::array<Vec3, 3> &tri, Real u, Real v) {
    return tri[0] * (1 - u - v) + tri[1] * u + tri[2] * v;
}

// Shades vertices starting at `hit`, reached from `prev`. Appends up to
// max_bounces + 1 vertices to `out` when given; returns sum of T_i * D_i.
Rgb trace_vertices(const Scene &scene, HitRecord hit, Vec3 prev, Pcg32 &rng, int max_bounces,
                   std::vector<PathVertex> *out) {
    const auto &lights = scene.lights();
    Rgb total, throughput{1, 1, 1};
    for (int depth = 0; depth <= max_bounces; depth++) {
        Real r[kRandomsPerVertex];
        for (auto &x : r) {
            x = rng.uniform();
        }
        PathVertex vert;
        vert.face = hit.face_id;
        vert.u = hit.u;
        vert.v = hit.v;
        vert.position = hit.position;
        auto wo = normalize(prev - hit.position);
        vert.normal_sign = dot(hit.geometric_normal, wo) >= 0 ? 1 : -1;
        vert.normal = hit.geometric_normal * vert.normal_sign;
        const auto &material = scene.material_of_face(hit.face_id);

        if (!lights.empty()) {
            auto k = pick_light(lights, r[0]);
            auto lf = lights.faces[k];
            auto uv = sample_triangle(r[1], r[2]);
            auto tri = scene.world().triangle(lf);
            auto y = barycentric_point(tri, uv.x, uv.y);
            vert.light_face = lf;
            vert.light_uv = uv;
            vert.light_point = y;
            auto w = y - hit.position;
            auto d2 = length_squared(w);
            if (d2 > 0 && lf != hit.face_id) {
                auto wi = w / std::sqrt(d2);
                auto f = eval_brdf(material, vert.normal, wo, wi);
                auto cos_y = std::abs(dot(face_normal(tri[0], tri[1], tri[2]), wi));
                if (!is_zero(f) && cos_y > 0 && !scene.occluded(hit.position, y)) {
                    auto g = dot(vert.normal, wi) * cos_y / d2;
                    vert.direct = f * scene.emission_of_face(lf) * (g * lights.total_area);
                }
            }
        }
        total += throughput * vert.direct;

        std::optional<HitRecord> next;
        if (depth < max_bounces) {
            auto local = cosine_hemisphere(r[3], r[4]);
            Vec3 t, b;
            orthonormal_basis(vert.normal, t, b);
            auto wi = normalize(t * local.x + b * local.y + vert.normal * local.z);
            auto f = eval_brdf(material, vert.normal, wo, wi);
            if (!is_zero(f)) {
                next = scene.intersect({hit.position, wi, kRayEpsilon});
                if (next) {
                    vert.has_next = true;
                    vert.beta = f * kPi;
                }
            }
        }
        if (out) {
            out->push_back(vert);
        }
        if (!next) {
            break;
        }
        throughput = throughput * vert.beta;
        prev = hit.position;
        hit = *next;
    }
    return total;
}

} // namespace

Rgb radiance(const Scene &scene, const Ray &ray, Pcg32 &rng, int max_bounces, PathState *state) {
    if (state) {
        state->clear();
        state->origin = ray.origin;
    }
    auto hit = scene.intersect(ray);
    if (!hit) {
        return {};
    }
    auto emission = scene.emission_of_face(hit->face_id);
    if (state) {
        state->emission = emission;
    }
    return emission + trace_vertices(scene, *hit, ray.origin, rng, max_bounces, state ? &state->vertices : nullptr);
}

Rgb reflected_radiance(const Scene &scene, const HitRecord &hit, const Vec3 &toward, Pcg32 &rng, int max_bounces) {
    return trace_vertices(scene, hit, toward, rng, max_bounces, nullptr);
}

Rgb trace_pixel_sample(const Scene &scene, const CameraFrame &frame, int px, int py, int sample,
                       const RenderConfig &config, PathState *state) {
    auto rng = make_stream(config.seed, StreamTag::Pixel, px, py, sample);
    auto u1 = rng.uniform();
    auto u2 = rng.uniform();
    auto jitter = stratify(sample, config.spp, u1, u2);
    auto p = sample_pixel_point(px, py, jitter.x, jitter.y);
    auto value = radiance(scene, primary_ray(frame, p.x, p.y), rng, config.max_bounces, state);
    if (state) {
        state->screen = p;
    }
    return value;
}

std::vector<Tile> make_tiles(int width, int height) {
    std::vector<Tile> tiles;
    for (int y = 0; y < height; y += kTileSize) {
        for (int x = 0; x < width; x += kTileSize) {
            tiles.push_back({x, y, std::min(x + kTileSize, width), std::min(y + kTileSize, height)});
        }
    }
    return tiles;
}

ImageBuffer render(const Scene &scene, const RenderConfig &config) {
    if (config.spp < 1) {
        throw std::invalid_argument("render: spp must be >= 1");
    }
    const auto &cam = scene.camera();
    ImageBuffer img(cam.width, cam.height);
    auto frame = camera_frame(cam);
    auto tiles = make_tiles(cam.width, cam.height);
    parallel_for(static_cast<int>(tiles.size()), config.threads, [&](int t) {
        const auto &tile = tiles[t];
        for (int py = tile.y0; py < tile.y1; py++) {
            for (int px = tile.x0; px < tile.x1; px++) {
                Rgb sum;
                for (int s = 0; s < config.spp; s++) {
                    sum += trace_pixel_sample(scene, frame, px, py, s, config);
                }
                img.at(px, py) = sum / config.spp;
            }
        }
    });
    return img;
}

} // namespace edgetrace
