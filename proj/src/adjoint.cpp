#include "edgetrace/adjoint.h"

#include "edgetrace/brdf.h"
#include "edgetrace/camera.h"
#include "edgetrace/parallel.h"

#include <stdexcept>

namespace edgetrace {

GradientAccumulator::GradientAccumulator(int dim, int w, int h, bool keep_pixels)
    : total(dim), width(w), height(h) {
    if (keep_pixels) {
        per_pixel.assign(static_cast<std::size_t>(w) * h * dim, 0);
    }
}

void GradientAccumulator::add(int px, int py, std::span<const Real> values) {
    auto d = dim();
    for (int k = 0; k < d; k++) {
        total.values[k] += values[k];
    }
    if (keeps_pixels()) {
        auto base = (static_cast<std::size_t>(py) * width + px) * d;
        for (int k = 0; k < d; k++) {
            per_pixel[base + k] += values[k];
        }
    }
}

void GradientAccumulator::merge(const GradientAccumulator &other) {
    total += other.total;
    if (keeps_pixels() && other.keeps_pixels()) {
        for (std::size_t i = 0; i < per_pixel.size(); i++) {
            per_pixel[i] += other.per_pixel[i];
        }
    }
}

namespace {

// Unit normal (times sign) and area of a face, reverse pass into its vertices.
void d_face(const Scene &scene, int face, const Vec3 &d_normal, Real d_area, GradientSink &sink) {
    if (is_zero(d_normal) && d_area == 0) {
        return;
    }
    auto tri = scene.world().triangle(face);
    auto e1 = tri[1] - tri[0], e2 = tri[2] - tri[0];
    auto raw = cross(e1, e2);
    auto d_raw = d_normalize(raw, d_normal) + d_length(raw, 0.5 * d_area);
    Vec3 d_e1, d_e2;
    d_cross(e1, e2, d_raw, d_e1, d_e2);
    const auto &f = scene.world().faces[face];
    sink.add_vertex(f[0], -(d_e1 + d_e2));
    sink.add_vertex(f[1], d_e1);
    sink.add_vertex(f[2], d_e2);
}

// Material point (1-u-v) p0 + u p1 + v p2.
void d_barycentric(const Scene &scene, int face, Real u, Real v, const Vec3 &d_p, GradientSink &sink) {
    const auto &f = scene.world().faces[face];
    sink.add_vertex(f[0], d_p * (1 - u - v));
    sink.add_vertex(f[1], d_p * u);
    sink.add_vertex(f[2], d_p * v);
}

// G = (n_x . w^)(|n_y . w^|) / |w|^2 with w = y - x. Geometry of one connection.
struct Connection {
    Vec3 w, wh;
    Real d2 = 0, cos_x = 0, cos_y = 0, sy = 1, g = 0;

    Connection(const Vec3 &x, const Vec3 &nx, const Vec3 &y, const Vec3 &ny) {
        w = y - x;
        d2 = length_squared(w);
        wh = w / std::sqrt(d2);
        cos_x = dot(nx, wh);
        auto c = dot(ny, wh);
        sy = c >= 0 ? 1 : -1;
        cos_y = sy * c;
        g = cos_x * cos_y / d2;
    }

    // d_wh_extra: adjoint reaching w^ from elsewhere (the BRDF). Returns d_w.
    Vec3 backward(const Vec3 &nx, const Vec3 &ny, Real d_g, const Vec3 &d_wh_extra, Vec3 &d_nx, Vec3 &d_ny) const {
        auto d_cos_x = d_g * cos_y / d2;
        auto d_cos_y = d_g * cos_x / d2;
        auto d_d2 = -d_g * g / d2;
        d_nx += wh * d_cos_x;
        d_ny += wh * (d_cos_y * sy);
        auto d_wh = d_wh_extra + nx * d_cos_x + ny * (d_cos_y * sy);
        return d_normalize(w, d_wh) + w * (2 * d_d2);
    }
};

void check_path(const Scene &scene, const PathState &path) {
    auto faces = scene.face_count();
    for (const auto &v : path.vertices) {
        if (v.face < 0 || v.face >= faces || v.light_face >= faces || (!is_zero(v.direct) && v.light_face < 0)) {
            throw std::logic_error("backprop_sample: path state does not belong to this scene");
        }
    }
}

} // namespace

void backprop_sample(const Scene &scene, const PathState &path, const Rgb &weight, GradientSink &sink,
                     const VertexHook &hook, int px, int py, int sample, int max_bounces) {
    if (is_zero(weight) || path.vertices.empty()) {
        return;
    }
    check_path(scene, path);
    const auto &verts = path.vertices;
    auto n = static_cast<int>(verts.size());
    sink.add_emission(scene.mesh_of_face(verts[0].face), weight);

    std::vector<Rgb> T(n + 1), S(n + 1);
    T[0] = {1, 1, 1};
    for (int i = 0; i < n; i++) {
        T[i + 1] = verts[i].has_next ? T[i] * verts[i].beta : Rgb{};
    }
    for (int i = n - 1; i >= 0; i--) {
        S[i] = verts[i].direct + (verts[i].has_next && i + 1 < n ? verts[i].beta * S[i + 1] : Rgb{});
    }

    const auto &lights = scene.lights();
    std::vector<Vec3> d_pos(n);
    Vec3 d_origin;
    for (int i = 0; i < n; i++) {
        const auto &vx = verts[i];
        const auto &material = scene.material_of_face(vx.face);
        auto material_id = scene.meshes()[scene.mesh_of_face(vx.face)].material_id;
        auto prev = i == 0 ? path.origin : verts[i - 1].position;
        auto wo_raw = prev - vx.position;
        auto wo = normalize(wo_raw);
        BrdfGrad bg;
        Vec3 d_n;

        if (!is_zero(vx.direct)) {
            auto g_d = weight * T[i];
            auto tri = scene.world().triangle(vx.light_face);
            auto ny = face_normal(tri[0], tri[1], tri[2]);
            Connection c(vx.position, vx.normal, vx.light_point, ny);
            auto le = scene.emission_of_face(vx.light_face);
            auto f = eval_brdf(material, vx.normal, wo, c.wh);
            BrdfGrad local;
            d_eval_brdf(material, vx.normal, wo, c.wh, g_d * le * (c.g * lights.total_area), local);
            sink.add_emission(scene.mesh_of_face(vx.light_face), g_d * f * (c.g * lights.total_area));
            auto d_g = sum(g_d * f * le) * lights.total_area;
            auto light_area = face_area(tri[0], tri[1], tri[2]);
            auto d_area = sum(g_d * vx.direct) / light_area;
            Vec3 d_ny;
            auto d_w = c.backward(vx.normal, ny, d_g, local.wi, d_n, d_ny);
            d_pos[i] -= d_w;
            d_barycentric(scene, vx.light_face, vx.light_uv.x, vx.light_uv.y, d_w, sink);
            d_face(scene, vx.light_face, d_ny, d_area, sink);
            d_n += local.n;
            bg.wo += local.wo;
            bg.diffuse += local.diffuse;
            bg.specular += local.specular;
        }

        if (vx.has_next && i + 1 < n) {
            const auto &nx = verts[i + 1];
            auto g_b = weight * T[i] * S[i + 1];
            auto nq = nx.normal;
            Connection c(vx.position, vx.normal, nx.position, nq);
            auto f = eval_brdf(material, vx.normal, wo, c.wh);
            auto beta = f * kPi;
            BrdfGrad local;
            d_eval_brdf(material, vx.normal, wo, c.wh, g_b * kPi, local);
            // beta = pi f (G / G0) (A / A0) with the sampling density frozen.
            auto d_g = c.g > 0 ? sum(g_b * beta) / c.g : 0;
            auto tri = scene.world().triangle(nx.face);
            auto d_area = sum(g_b * beta) / face_area(tri[0], tri[1], tri[2]);
            Vec3 d_nq;
            auto d_w = c.backward(vx.normal, nq, d_g, local.wi, d_n, d_nq);
            d_pos[i + 1] += d_w;
            d_pos[i] -= d_w;
            d_face(scene, nx.face, d_nq * nx.normal_sign, d_area, sink);
            d_n += local.n;
            bg.wo += local.wo;
            bg.diffuse += local.diffuse;
            bg.specular += local.specular;
        }

        sink.add_diffuse(material_id, bg.diffuse);
        sink.add_specular(material_id, bg.specular);
        d_face(scene, vx.face, d_n * vx.normal_sign, 0, sink);
        auto d_wo_raw = d_normalize(wo_raw, bg.wo);
        d_pos[i] -= d_wo_raw;
        if (i == 0) {
            d_origin += d_wo_raw;
        } else {
            d_pos[i - 1] += d_wo_raw;
        }
        if (hook) {
            VertexContext ctx{&path, i, px, py, sample, weight * T[i], max_bounces - i};
            d_pos[i] += hook(ctx, sink);
        }
    }

    for (int i = 1; i < n; i++) {
        d_barycentric(scene, verts[i].face, verts[i].u, verts[i].v, d_pos[i], sink);
    }

    // Camera hit: x0 = o + t d with t = n.(p0 - o) / n.d on the face plane.
    const auto &camera = scene.camera();
    auto face = verts[0].face;
    auto tri = scene.world().triangle(face);
    auto e1 = tri[1] - tri[0], e2 = tri[2] - tri[0];
    auto nraw = cross(e1, e2);
    auto frame = camera_frame(camera);
    auto dir = primary_ray(frame, path.screen.x, path.screen.y).direction;
    auto num = dot(nraw, tri[0] - path.origin);
    auto den = dot(nraw, dir);
    auto t = num / den;
    const auto &d_x0 = d_pos[0];
    d_origin += d_x0;
    auto d_t = dot(d_x0, dir);
    auto d_dir = d_x0 * t;
    auto d_num = d_t / den;
    auto d_den = -d_t * t / den;
    auto d_nraw = (tri[0] - path.origin) * d_num + dir * d_den;
    d_origin -= nraw * d_num;
    d_dir += nraw * d_den;
    Vec3 d_e1, d_e2;
    d_cross(e1, e2, d_nraw, d_e1, d_e2);
    const auto &fi = scene.world().faces[face];
    sink.add_vertex(fi[0], nraw * d_num - d_e1 - d_e2);
    sink.add_vertex(fi[1], d_e1);
    sink.add_vertex(fi[2], d_e2);

    if (sink.layout().has_camera()) {
        CameraGrad cg;
        cg.position = d_origin;
        d_primary_direction(camera, path.screen.x, path.screen.y, d_dir, cg);
        sink.add_camera(cg.position, cg.look_at);
    }
}

GradientAccumulator backprop_image(const Scene &scene, const GradientLayout &layout, const ImageBuffer &adjoint,
                                   const RenderConfig &config, bool keep_pixels, const VertexHook &hook) {
    const auto &cam = scene.camera();
    if (adjoint.width != cam.width || adjoint.height != cam.height) {
        throw std::invalid_argument("backprop_image: adjoint image size does not match the camera resolution");
    }
    auto dim = layout.dim();
    GradientAccumulator out(dim, cam.width, cam.height, keep_pixels);
    auto frame = camera_frame(cam);
    auto tiles = make_tiles(cam.width, cam.height);
    std::vector<GradientVector> tile_totals(tiles.size());
    parallel_for(static_cast<int>(tiles.size()), config.threads, [&](int ti) {
        const auto &tile = tiles[ti];
        GradientVector tile_sum(dim);
        std::vector<Real> pixel(dim);
        PathState path;
        for (int py = tile.y0; py < tile.y1; py++) {
            for (int px = tile.x0; px < tile.x1; px++) {
                auto w = adjoint.at(px, py) / config.spp;
                if (is_zero(w)) {
                    continue;
                }
                std::fill(pixel.begin(), pixel.end(), 0);
                GradientSink sink(layout, pixel);
                for (int s = 0; s < config.spp; s++) {
                    trace_pixel_sample(scene, frame, px, py, s, config, &path);
                    backprop_sample(scene, path, w, sink, hook, px, py, s, config.max_bounces);
                }
                for (int k = 0; k < dim; k++) {
                    tile_sum.values[k] += pixel[k];
                }
                if (keep_pixels) {
                    auto base = (static_cast<std::size_t>(py) * cam.width + px) * dim;
                    std::copy(pixel.begin(), pixel.end(), out.per_pixel.begin() + static_cast<std::ptrdiff_t>(base));
                }
            }
        }
        tile_totals[ti] = std::move(tile_sum);
    });
    for (const auto &t : tile_totals) {
        out.total += t;
    }
    return out;
}

GradientVector backprop_image(const Scene &scene, const ImageBuffer &adjoint, const RenderConfig &config) {
    GradientLayout layout(scene);
    return backprop_image(scene, layout, adjoint, config).total;
}

} // namespace edgetrace
