#pragma once

#include "edgetrace/geometry.h"
#include "edgetrace/scene.h"

#include <optional>

namespace edgetrace {

/// Orthonormal pinhole frame. Screen x grows right, y grows down; the pixel
/// (px, py) covers [px, px+1) x [py, py+1).
struct CameraFrame {
    Vec3 origin;
    Vec3 forward, right, up;
    Real tan_half = 1; // tan(vertical_fov / 2)
    Real aspect = 1;   // width / height
    int width = 1, height = 1;
};

CameraFrame camera_frame(const Camera &camera);

// Normalised image-plane offsets of a screen point.
Vec2 screen_to_plane(const CameraFrame &frame, Real x, Real y);

Ray primary_ray(const CameraFrame &frame, Real x, Real y);

/// Screen coordinates of a world point and its depth along the view axis.
struct Projection {
    Vec2 screen;
    Real depth = 0;
};
/// None when the point is not in front of the camera (depth <= 0).
std::optional<Projection> project(const CameraFrame &frame, const Vec3 &p);

// Derivatives w.r.t. camera.position / camera.look_at. Both accumulate.
struct CameraGrad {
    Vec3 position;
    Vec3 look_at;
};

/// Reverse pass of the primary ray direction at screen point (x, y).
void d_primary_direction(const Camera &camera, Real x, Real y, const Vec3 &d_direction, CameraGrad &grad);

/// Reverse pass of project(): adds to d_point and grad.
void d_project(const Camera &camera, const Vec3 &p, const Vec2 &d_screen, Vec3 &d_point, CameraGrad &grad);

} // namespace edgetrace
