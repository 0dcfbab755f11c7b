#pragma once

#include "edgetrace/geometry.h"
#include "edgetrace/vector.h"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edgetrace {

/// Raised for malformed scene files and invalid scene contents. The message
/// names the offending key.
class SceneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Camera {
    Vec3 position;
    Vec3 look_at{0, 0, -1};
    Vec3 up{0, 1, 0};
    Real vertical_fov = 45; // degrees
    int width = 64, height = 64;
};

struct Material {
    Rgb diffuse{0.5, 0.5, 0.5};
    Rgb specular{0, 0, 0};
    Real shininess = 1;
};

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<FaceIndices> indices;
    int material_id = 0;
    Vec3 translation;
    Rgb emission;

    bool is_emissive() const { return emission.x > 0 || emission.y > 0 || emission.z > 0; }
};

/// A unique undirected mesh edge with its one or two adjacent faces.
/// Vertex and face indices are local to the mesh.
struct EdgeRecord {
    int v0 = -1, v1 = -1; // v0 < v1
    int face_a = -1;
    int face_b = -1; // -1 for boundary edges
    int mesh_id = 0;

    bool is_boundary() const { return face_b < 0; }
};

/// Each undirected edge once. Throws SceneError when more than two faces share an edge.
std::vector<EdgeRecord> extract_edges(const Mesh &mesh, int mesh_id = 0);

enum class ParamKind { CameraPosition, CameraLookAt, MeshTranslation, MeshVertices, MeshEmission, MaterialDiffuse, MaterialSpecular };

struct ParameterEntry {
    std::string path;
    ParamKind kind;
    int target = 0; // mesh or material index; unused for camera entries
    int offset = 0; // first slot in the flat vector
    int size = 0;
};

/// Ordered map from parameter paths (e.g. "mesh[0].translation") to slots of a
/// flat vector. Scalars are addressed as "<path>[k]"; 3-vectors also accept
/// .x/.y/.z and .r/.g/.b suffixes.
class ParameterRegistry {
public:
    const std::vector<ParameterEntry> &entries() const { return entries_; }
    int total_dim() const { return total_dim_; }

    void add(ParameterEntry entry); // throws SceneError on duplicate path
    const ParameterEntry *find(std::string_view path) const;
    std::optional<int> scalar_index(std::string_view name) const;
    std::string scalar_name(int index) const;

private:
    std::vector<ParameterEntry> entries_;
    int total_dim_ = 0;
};

struct GradientVector {
    std::vector<Real> values;

    GradientVector() = default;
    explicit GradientVector(int dim) : values(dim, 0) {}

    int size() const { return static_cast<int>(values.size()); }
    Real &operator[](int i) { return values[i]; }
    Real operator[](int i) const { return values[i]; }
    GradientVector &operator+=(const GradientVector &other);
    bool all_finite() const;
};

struct LightSampler {
    std::vector<int> faces;       // global face ids of emissive faces
    std::vector<Real> cdf;        // normalised area CDF, cdf.back() == 1
    std::vector<Real> areas;
    Real total_area = 0;

    bool empty() const { return faces.empty(); }
};

/// Scene description plus the derived world-space data the renderer needs.
/// Treated as an immutable value once built.
class Scene {
public:
    Scene() = default;
    Scene(Camera camera, std::vector<Material> materials, std::vector<Mesh> meshes,
          const std::vector<std::string> &differentiable = {});

    const Camera &camera() const { return camera_; }
    const std::vector<Material> &materials() const { return materials_; }
    const std::vector<Mesh> &meshes() const { return meshes_; }
    const ParameterRegistry &registry() const { return registry_; }
    const std::vector<std::string> &differentiable_paths() const { return differentiable_; }

    // World-space triangles: meshes concatenated, translation applied.
    const TriangleSet &world() const { return world_; }
    const Bvh &bvh() const { return bvh_; }
    const std::vector<EdgeRecord> &edges() const { return edges_; }
    const LightSampler &lights() const { return lights_; }

    int mesh_of_face(int face) const { return face_mesh_[face]; }
    int vertex_offset(int mesh) const { return vertex_offset_[mesh]; }
    int face_offset(int mesh) const { return face_offset_[mesh]; }
    const Material &material_of_face(int face) const { return materials_[meshes_[face_mesh_[face]].material_id]; }
    const Rgb &emission_of_face(int face) const { return meshes_[face_mesh_[face]].emission; }
    int face_count() const { return static_cast<int>(world_.faces.size()); }

    // World-space endpoints of an edge and its adjacent faces as global ids.
    Vec3 edge_vertex(const EdgeRecord &e, int which) const {
        return world_.vertices[vertex_offset_[e.mesh_id] + (which == 0 ? e.v0 : e.v1)];
    }
    int global_face(const EdgeRecord &e, int local_face) const { return face_offset_[e.mesh_id] + local_face; }

    std::optional<HitRecord> intersect(const Ray &ray) const { return edgetrace::intersect(bvh_, world_, ray); }
    bool occluded(const Vec3 &from, const Vec3 &to) const { return edgetrace::occluded(bvh_, world_, from, to); }

private:
    void build();

    Camera camera_;
    std::vector<Material> materials_;
    std::vector<Mesh> meshes_;
    std::vector<std::string> differentiable_;
    ParameterRegistry registry_;

    TriangleSet world_;
    Bvh bvh_;
    std::vector<int> face_mesh_;
    std::vector<int> vertex_offset_;
    std::vector<int> face_offset_;
    std::vector<EdgeRecord> edges_;
    LightSampler lights_;
};

/// Parses the JSON scene format; throws SceneError naming the offending key.
Scene load_scene(std::string_view text);
Scene load_scene_file(const std::string &path);
std::string save_scene(const Scene &scene);

/// Current values of every registered parameter, in registry order.
std::vector<Real> read_parameters(const Scene &scene);
/// New scene with registered parameters overwritten by values.
Scene apply_parameters(const Scene &scene, std::span<const Real> values);

/// Routes derivatives of scene quantities to slots of a flat gradient vector.
/// Quantities without a registered parameter are dropped. A layout can also
/// select a single scalar (mapped to slot 0), which drives per-pixel
/// derivative images.
class GradientLayout {
public:
    GradientLayout() = default;
    explicit GradientLayout(const Scene &scene);
    static GradientLayout single(const Scene &scene, int scalar_index);

    int dim() const { return dim_; }

    int camera_position(int c) const { return camera_position_[c]; }
    int camera_look_at(int c) const { return camera_look_at_[c]; }
    // World vertex (global index) -> slot of its own coordinate and of its mesh translation.
    int vertex(int world_vertex, int c) const { return vertex_[3 * world_vertex + c]; }
    int translation(int world_vertex, int c) const { return translation_[3 * world_vertex + c]; }
    int emission(int mesh, int c) const { return emission_[3 * mesh + c]; }
    int diffuse(int material, int c) const { return diffuse_[3 * material + c]; }
    int specular(int material, int c) const { return specular_[3 * material + c]; }
    bool has_camera() const { return has_camera_; }

private:
    void keep_only(int scalar_index);

    int dim_ = 0;
    bool has_camera_ = false;
    int camera_position_[3] = {-1, -1, -1};
    int camera_look_at_[3] = {-1, -1, -1};
    std::vector<int> vertex_, translation_, emission_, diffuse_, specular_;
};

/// Accumulates scene-quantity derivatives into a flat vector through a layout.
class GradientSink {
public:
    GradientSink(const GradientLayout &layout, std::span<Real> out) : layout_(&layout), out_(out) {}

    void add_vertex(int world_vertex, const Vec3 &d);
    void add_camera(const Vec3 &d_position, const Vec3 &d_look_at);
    void add_emission(int mesh, const Rgb &d);
    void add_diffuse(int material, const Rgb &d);
    void add_specular(int material, const Rgb &d);

    const GradientLayout &layout() const { return *layout_; }

private:
    void add(int slot, Real v) {
        if (slot >= 0) {
            out_[slot] += v;
        }
    }

    const GradientLayout *layout_;
    std::span<Real> out_;
};

} // namespace edgetrace
