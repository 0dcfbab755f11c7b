#include "edgetrace/camera.h"

namespace edgetrace {

namespace {

struct FrameGrad {
    Vec3 forward, right, up;
};

// forward = normalize(look_at - position); right = normalize(forward x up); up' = right x forward
void d_frame(const Camera &camera, const FrameGrad &g, CameraGrad &out) {
    auto view = camera.look_at - camera.position;
    auto forward = normalize(view);
    auto right_raw = cross(forward, camera.up);
    auto right = normalize(right_raw);
    Vec3 d_forward = g.forward, d_right = g.right, unused;
    d_cross(right, forward, g.up, d_right, d_forward);
    auto d_right_raw = d_normalize(right_raw, d_right);
    d_cross(forward, camera.up, d_right_raw, d_forward, unused);
    auto d_view = d_normalize(view, d_forward);
    out.look_at += d_view;
    out.position -= d_view;
}

} // namespace

CameraFrame camera_frame(const Camera &camera) {
    CameraFrame f;
    f.origin = camera.position;
    f.forward = normalize(camera.look_at - camera.position);
    f.right = normalize(cross(f.forward, camera.up));
    f.up = cross(f.right, f.forward);
    f.tan_half = std::tan(camera.vertical_fov * kPi / 360);
    f.width = camera.width;
    f.height = camera.height;
    f.aspect = static_cast<Real>(camera.width) / camera.height;
    return f;
}

Vec2 screen_to_plane(const CameraFrame &frame, Real x, Real y) {
    return {(2 * x / frame.width - 1) * frame.tan_half * frame.aspect, (1 - 2 * y / frame.height) * frame.tan_half};
}

Ray primary_ray(const CameraFrame &frame, Real x, Real y) {
    auto q = screen_to_plane(frame, x, y);
    return {frame.origin, normalize(frame.forward + frame.right * q.x + frame.up * q.y)};
}

std::optional<Projection> project(const CameraFrame &frame, const Vec3 &p) {
    auto d = p - frame.origin;
    auto zc = dot(d, frame.forward);
    if (!(zc > 0)) {
        return std::nullopt;
    }
    auto px = dot(d, frame.right) / zc;
    auto py = dot(d, frame.up) / zc;
    Projection out;
    out.screen = {(px / (frame.tan_half * frame.aspect) + 1) * frame.width / 2,
                  (1 - py / frame.tan_half) * frame.height / 2};
    out.depth = zc;
    return out;
}

void d_primary_direction(const Camera &camera, Real x, Real y, const Vec3 &d_direction, CameraGrad &grad) {
    auto frame = camera_frame(camera);
    auto q = screen_to_plane(frame, x, y);
    auto raw = frame.forward + frame.right * q.x + frame.up * q.y;
    auto d_raw = d_normalize(raw, d_direction);
    d_frame(camera, {d_raw, d_raw * q.x, d_raw * q.y}, grad);
}

void d_project(const Camera &camera, const Vec3 &p, const Vec2 &d_screen, Vec3 &d_point, CameraGrad &grad) {
    auto frame = camera_frame(camera);
    auto d = p - frame.origin;
    auto xc = dot(d, frame.right), yc = dot(d, frame.up), zc = dot(d, frame.forward);
    auto d_px = d_screen.x * frame.width / (2 * frame.tan_half * frame.aspect);
    auto d_py = -d_screen.y * frame.height / (2 * frame.tan_half);
    auto d_xc = d_px / zc;
    auto d_yc = d_py / zc;
    auto d_zc = -(d_px * xc + d_py * yc) / (zc * zc);
    auto d_d = frame.right * d_xc + frame.up * d_yc + frame.forward * d_zc;
    d_point += d_d;
    grad.position -= d_d;
    d_frame(camera, {d * d_zc, d * d_xc, d * d_yc}, grad);
}

} // namespace edgetrace
