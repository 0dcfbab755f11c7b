#include "edgetrace/edges.h"

#include "edgetrace/brdf.h"
#include "edgetrace/parallel.h"

#include <algorithm>
#include <cmath>

namespace edgetrace {

namespace {

constexpr Real kScreenOffset = 1e-6; // px, primary f_u / f_l offset
constexpr Real kAngleOffset = 1e-6;  // rad, secondary h_u / h_l offset
constexpr Real kGrazing = 1e-8;
constexpr Real kNearDepth = 1e-5;

} // namespace

Real alpha_2d(const EdgeEquation2D &eq, Real x, Real y) { return eq.A * x + eq.B * y + eq.C; }

Alpha2DGrads alpha_2d_grads(const EdgeEquation2D &eq, Real x, Real y) {
    Alpha2DGrads g;
    g.d_a = {eq.b.y - y, x - eq.b.x};
    g.d_b = {y - eq.a.y, eq.a.x - x};
    g.d_xy = {eq.A, eq.B};
    g.norm = std::hypot(eq.a.x - eq.b.x, eq.a.y - eq.b.y);
    return g;
}

EdgeEquation3D::EdgeEquation3D(const Vec3 &p, const Vec3 &v0, const Vec3 &v1)
    : p(p), v0(v0), v1(v1), n_h(normalize(cross(v0 - p, v1 - p))) {}

Real alpha_3d(const Vec3 &p, const Vec3 &v0, const Vec3 &v1, const Vec3 &m) {
    return dot(m - p, cross(v0 - p, v1 - p));
}

Alpha3DGrads alpha_3d_grads(const Vec3 &p, const Vec3 &v0, const Vec3 &v1, const Vec3 &m) {
    auto a = v0 - p, b = v1 - p, c = m - p;
    Alpha3DGrads g;
    g.d_m = cross(a, b);
    g.d_v0 = cross(b, c);
    g.d_v1 = cross(c, a);
    g.d_p = -(g.d_m + g.d_v0 + g.d_v1);
    g.norm_m = length(g.d_m);
    return g;
}

std::optional<Vec3> edge_point_jacobian(const Vec3 &p, const Vec3 &v0, const Vec3 &v1, Real t, const Vec3 &m,
                                        const Vec3 &n_m) {
    auto e = v1 - v0;
    auto omega = v0 + e * t - p;
    auto den = dot(omega, n_m);
    if (!(std::abs(den) >= kGrazing * length(omega))) {
        return std::nullopt;
    }
    auto tau = dot(m - p, n_m) / den;
    return (e - omega * (dot(e, n_m) / den)) * tau;
}

bool is_silhouette(const Scene &scene, const EdgeRecord &edge, const Vec3 &viewpoint) {
    if (edge.is_boundary()) {
        return true;
    }
    auto side = [&](int local_face) {
        auto tri = scene.world().triangle(scene.global_face(edge, local_face));
        return dot(cross(tri[1] - tri[0], tri[2] - tri[0]), viewpoint - tri[0]);
    };
    return side(edge.face_a) * side(edge.face_b) < 0;
}

// --- primary -------------------------------------------------------------------

namespace {

// Liang-Barsky clip of a + t (b - a), t in [0,1], to [0,w] x [0,h].
bool clip_to_screen(const Vec2 &a, const Vec2 &b, Real w, Real h, Real &t0, Real &t1) {
    t0 = 0;
    t1 = 1;
    auto d = b - a;
    const Real p[4] = {-d.x, d.x, -d.y, d.y};
    const Real q[4] = {a.x, w - a.x, a.y, h - a.y};
    for (int k = 0; k < 4; k++) {
        if (p[k] == 0) {
            if (q[k] < 0) {
                return false;
            }
            continue;
        }
        auto r = q[k] / p[k];
        if (p[k] < 0) {
            t0 = std::max(t0, r);
        } else {
            t1 = std::min(t1, r);
        }
    }
    return t0 < t1;
}

} // namespace

PrimaryEdgeSet collect_primary_edges(const Scene &scene) {
    PrimaryEdgeSet set;
    const auto &cam = scene.camera();
    auto frame = camera_frame(cam);
    const auto &edges = scene.edges();
    for (int i = 0; i < static_cast<int>(edges.size()); i++) {
        const auto &e = edges[i];
        if (!is_silhouette(scene, e, cam.position)) {
            continue;
        }
        auto v0 = scene.edge_vertex(e, 0), v1 = scene.edge_vertex(e, 1);
        auto z0 = dot(v0 - frame.origin, frame.forward), z1 = dot(v1 - frame.origin, frame.forward);
        if (z0 <= kNearDepth && z1 <= kNearDepth) {
            continue;
        }
        PrimaryEdge pe;
        pe.edge = i;
        if (z0 < kNearDepth) {
            pe.s0 = (kNearDepth - z0) / (z1 - z0);
        }
        if (z1 < kNearDepth) {
            pe.s1 = (kNearDepth - z0) / (z1 - z0);
        }
        auto pa = project(frame, v0 + (v1 - v0) * pe.s0);
        auto pb = project(frame, v0 + (v1 - v0) * pe.s1);
        if (!pa || !pb) {
            continue;
        }
        pe.a = pa->screen;
        pe.b = pb->screen;
        auto len = length(pe.b - pe.a);
        if (!(len > 0) || !clip_to_screen(pe.a, pe.b, cam.width, cam.height, pe.t0, pe.t1)) {
            continue;
        }
        pe.length = (pe.t1 - pe.t0) * len;
        set.total_length += pe.length;
        set.edges.push_back(pe);
    }
    Real running = 0;
    for (const auto &pe : set.edges) {
        running += pe.length;
        set.cdf.push_back(running / set.total_length);
    }
    if (!set.cdf.empty()) {
        set.cdf.back() = 1;
    }
    return set;
}

EdgeContribution2D edge_contribution_2d(const EdgeEquation2D &eq, Real x, Real y, Real jump) {
    auto g = alpha_2d_grads(eq, x, y);
    return {g.d_a * jump, g.d_b * jump};
}

void sample_primary_edges(const Scene &scene, const GradientLayout &layout, const ImageBuffer &adjoint,
                          int n_samples, const RenderConfig &config, GradientAccumulator &out) {
    const auto &cam = scene.camera();
    if (adjoint.width != cam.width || adjoint.height != cam.height) {
        throw std::invalid_argument("sample_primary_edges: adjoint image size does not match the camera resolution");
    }
    if (n_samples <= 0) {
        return;
    }
    auto set = collect_primary_edges(scene);
    if (set.edges.empty()) {
        return;
    }
    auto frame = camera_frame(cam);
    auto dim = layout.dim();
    auto chunks = (n_samples + kEdgeChunk - 1) / kEdgeChunk;
    std::vector<GradientAccumulator> partial(chunks);
    parallel_for(chunks, config.threads, [&](int c) {
        GradientAccumulator acc(dim, cam.width, cam.height, out.keeps_pixels());
        std::vector<Real> scratch(dim);
        auto end = std::min(n_samples, (c + 1) * kEdgeChunk);
        for (int j = c * kEdgeChunk; j < end; j++) {
            auto rng = make_stream(config.seed, StreamTag::PrimaryEdge, static_cast<std::uint64_t>(j));
            auto u_edge = rng.uniform();
            auto u_t = rng.uniform();
            auto k = static_cast<int>(std::upper_bound(set.cdf.begin(), set.cdf.end(), u_edge) - set.cdf.begin());
            const auto &pe = set.edges[std::min(k, static_cast<int>(set.edges.size()) - 1)];
            auto t = pe.t0 + u_t * (pe.t1 - pe.t0);
            auto q = pe.a + (pe.b - pe.a) * t;
            auto px = std::clamp(static_cast<int>(std::floor(q.x)), 0, cam.width - 1);
            auto py = std::clamp(static_cast<int>(std::floor(q.y)), 0, cam.height - 1);
            const auto &w = adjoint.at(px, py);
            if (is_zero(w)) {
                continue;
            }
            EdgeEquation2D eq(pe.a, pe.b);
            auto g = alpha_2d_grads(eq, q.x, q.y);
            auto offset = Vec2{eq.A, eq.B} * (kScreenOffset / g.norm);
            auto upper = q + offset, lower = q - offset;
            auto path_rng = make_stream(config.seed, StreamTag::PrimaryEdgePath, static_cast<std::uint64_t>(j));
            auto rng_l = path_rng;
            auto f_u = radiance(scene, primary_ray(frame, upper.x, upper.y), path_rng, config.max_bounces);
            auto f_l = radiance(scene, primary_ray(frame, lower.x, lower.y), rng_l, config.max_bounces);
            auto jump = dot(w, f_u - f_l) * set.total_length / (static_cast<Real>(n_samples) * g.norm);
            if (jump == 0) {
                continue;
            }
            auto contrib = edge_contribution_2d(eq, q.x, q.y, jump);

            const auto &e = scene.edges()[pe.edge];
            auto v0 = scene.edge_vertex(e, 0), v1 = scene.edge_vertex(e, 1);
            std::fill(scratch.begin(), scratch.end(), 0);
            GradientSink sink(layout, scratch);
            CameraGrad cg;
            Vec3 d_a3, d_b3;
            d_project(cam, v0 + (v1 - v0) * pe.s0, contrib.d_a, d_a3, cg);
            d_project(cam, v0 + (v1 - v0) * pe.s1, contrib.d_b, d_b3, cg);
            auto base = scene.vertex_offset(e.mesh_id);
            sink.add_vertex(base + e.v0, d_a3 * (1 - pe.s0) + d_b3 * (1 - pe.s1));
            sink.add_vertex(base + e.v1, d_a3 * pe.s0 + d_b3 * pe.s1);
            sink.add_camera(cg.position, cg.look_at);
            acc.add(px, py, scratch);
        }
        partial[c] = std::move(acc);
    });
    for (const auto &p : partial) {
        out.merge(p);
    }
}

// --- secondary -------------------------------------------------------------------

std::vector<Real> secondary_edge_weights(const Scene &scene, const Vec3 &p, const Vec3 &n, const Vec3 &wo,
                                         int face, const Material &material) {
    const auto &edges = scene.edges();
    std::vector<Real> weights(edges.size(), 0);
    auto lobe = (material.shininess + 2) / (2 * kPi);
    for (std::size_t i = 0; i < edges.size(); i++) {
        const auto &e = edges[i];
        if (scene.global_face(e, e.face_a) == face || (!e.is_boundary() && scene.global_face(e, e.face_b) == face)) {
            continue;
        }
        auto v0 = scene.edge_vertex(e, 0), v1 = scene.edge_vertex(e, 1);
        auto a = v0 - p, b = v1 - p;
        auto above = std::max(dot(n, a), dot(n, b));
        if (!(above > 1e-12 * (length(a) + length(b)))) {
            continue;
        }
        if (!is_silhouette(scene, e, p)) {
            continue;
        }
        auto len = length(v1 - v0);
        auto mid = (v0 + v1) * 0.5;
        auto to_mid = mid - p;
        auto dist = length(to_mid);
        // Specular peak toward the midpoint; the floor keeps every candidate selectable.
        Real spec = 0;
        if (!is_zero(material.specular) && dist > 0) {
            auto h = normalize(wo + to_mid / dist);
            spec = max_component(material.specular) * lobe * std::pow(std::max<Real>(0, dot(n, h)), material.shininess);
        }
        auto bound = std::max<Real>(max_component(material.diffuse) / kPi + spec, 1e-3);
        weights[i] = len / std::max(dist, 0.1 * len) * bound;
    }
    return weights;
}

namespace {

Vec2 barycentric_of(const std::array<Vec3, 3> &tri, const Vec3 &m) {
    auto e1 = tri[1] - tri[0], e2 = tri[2] - tri[0], r = m - tri[0];
    auto d00 = dot(e1, e1), d01 = dot(e1, e2), d11 = dot(e2, e2);
    auto d20 = dot(r, e1), d21 = dot(r, e2);
    auto den = d00 * d11 - d01 * d01;
    return {(d11 * d20 - d01 * d21) / den, (d00 * d21 - d01 * d20) / den};
}

bool adjacent(const Scene &scene, const EdgeRecord &e, int face) {
    return scene.global_face(e, e.face_a) == face || (!e.is_boundary() && scene.global_face(e, e.face_b) == face);
}

} // namespace

Vec3 sample_secondary_edge(const Scene &scene, const SecondaryQuery &query, Pcg32 &rng, Pcg32 &path_rng,
                           GradientSink &sink, SecondaryStats *stats) {
    const auto &material = scene.material_of_face(query.face);
    WeightedReservoir reservoir(rng.uniform());
    auto t = rng.uniform();
    auto weights = secondary_edge_weights(scene, query.p, query.n, query.wo, query.face, material);
    for (std::size_t i = 0; i < weights.size(); i++) {
        reservoir.add(static_cast<int>(i), weights[i]);
    }
    if (reservoir.selected() < 0) {
        return {};
    }
    if (stats) {
        stats->samples++;
    }
    const auto &e = scene.edges()[reservoir.selected()];
    auto v0 = scene.edge_vertex(e, 0), v1 = scene.edge_vertex(e, 1);
    const auto &p = query.p;
    auto omega = v0 + (v1 - v0) * t - p;
    auto dist = length(omega);
    auto dir = omega / dist;
    auto cos_p = dot(query.n, dir);
    if (!(cos_p > 0)) {
        return {};
    }
    auto f = eval_brdf(material, query.n, query.wo, dir);
    if (is_zero(f)) {
        return {};
    }
    auto c = cross(v0 - p, v1 - p);
    auto c_norm = length(c);
    if (!(c_norm > 0)) {
        return {};
    }
    auto n_h = c / c_norm;
    auto hit_u = scene.intersect({p, normalize(dir + n_h * kAngleOffset), kRayEpsilon});
    auto hit_l = scene.intersect({p, normalize(dir - n_h * kAngleOffset), kRayEpsilon});
    if (!hit_u || !hit_l || hit_u->face_id == hit_l->face_id) {
        return {};
    }
    auto upper_far = hit_u->t > hit_l->t;
    const auto &near = upper_far ? *hit_l : *hit_u;
    const auto &far = upper_far ? *hit_u : *hit_l;
    // The edge must be what separates the two hits, not something behind them.
    if (!adjacent(scene, e, near.face_id)) {
        return {};
    }
    auto receiver = far.face_id;
    auto tri = scene.world().triangle(receiver);
    auto n_m = face_normal(tri[0], tri[1], tri[2]);
    auto width = length(cross(n_m, n_h));
    auto denom = dot(n_m, dir);
    if (std::abs(denom) < kGrazing || width < kGrazing) {
        if (stats) {
            stats->grazing_rejected++;
        }
        return {};
    }
    auto m = p + dir * (dot(n_m, tri[0] - p) / denom);
    auto jac = edge_point_jacobian(p, v0, v1, t, m, n_m);
    if (!jac) {
        if (stats) {
            stats->grazing_rejected++;
        }
        return {};
    }

    // Only the far side has a moving boundary: the near face is integrated over
    // its own material points, whose extent the edge does not change.
    auto uv = barycentric_of(tri, m);
    auto radiance_out = scene.emission_of_face(receiver);
    if (query.bounces_left > 0) {
        HitRecord at;
        at.face_id = receiver;
        at.t = length(m - p);
        at.u = uv.x;
        at.v = uv.y;
        at.position = m;
        at.geometric_normal = n_m;
        radiance_out += reflected_radiance(scene, at, p, path_rng, query.bounces_left - 1);
    }
    auto d2 = length_squared(m - p);
    auto h = f * radiance_out * (cos_p * std::abs(denom) / d2);
    auto hw = dot(query.weight, h);
    if (hw == 0) {
        return {};
    }
    if (stats) {
        stats->contributing++;
    }
    auto scalar = (upper_far ? 1 : -1) * hw * length(*jac) / (c_norm * width * reservoir.probability());
    auto g = alpha_3d_grads(p, v0, v1, m);
    auto base = scene.vertex_offset(e.mesh_id);
    sink.add_vertex(base + e.v0, g.d_v0 * scalar);
    sink.add_vertex(base + e.v1, g.d_v1 * scalar);
    const auto &rf = scene.world().faces[receiver];
    auto d_m = g.d_m * scalar;
    sink.add_vertex(rf[0], d_m * (1 - uv.x - uv.y));
    sink.add_vertex(rf[1], d_m * uv.x);
    sink.add_vertex(rf[2], d_m * uv.y);
    return g.d_p * scalar;
}

VertexHook make_secondary_hook(const Scene &scene, std::uint64_t seed, int samples_per_vertex, SecondaryStats *stats) {
    if (samples_per_vertex <= 0) {
        return {};
    }
    return [&scene, seed, samples_per_vertex, stats](const VertexContext &ctx, GradientSink &sink) {
        const auto &verts = ctx.path->vertices;
        const auto &v = verts[ctx.vertex];
        auto prev = ctx.vertex == 0 ? ctx.path->origin : verts[ctx.vertex - 1].position;
        SecondaryQuery q;
        q.p = v.position;
        q.n = v.normal;
        q.wo = normalize(prev - v.position);
        q.face = v.face;
        q.weight = ctx.weight / samples_per_vertex;
        q.bounces_left = ctx.bounces_left;
        auto pixel = static_cast<std::uint64_t>(ctx.py) * scene.camera().width + ctx.px;
        Vec3 d_p;
        for (int k = 0; k < samples_per_vertex; k++) {
            auto slot = static_cast<std::uint64_t>(ctx.vertex) * samples_per_vertex + k;
            auto rng = make_stream(seed, StreamTag::SecondaryEdge, pixel, ctx.sample, slot);
            auto path_rng = make_stream(seed, StreamTag::SecondaryPath, pixel, ctx.sample, slot);
            d_p += sample_secondary_edge(scene, q, rng, path_rng, sink, stats);
        }
        return d_p;
    };
}

} // namespace edgetrace
