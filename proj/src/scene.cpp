#include "edgetrace/scene.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace edgetrace {

using json = nlohmann::json;

std::vector<EdgeRecord> extract_edges(const Mesh &mesh, int mesh_id) {
    std::map<std::pair<int, int>, EdgeRecord> edges;
    for (int f = 0; f < static_cast<int>(mesh.indices.size()); f++) {
        const auto &idx = mesh.indices[f];
        for (int k = 0; k < 3; k++) {
            auto a = idx[k], b = idx[(k + 1) % 3];
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = edges.find(key);
            if (it == edges.end()) {
                edges.emplace(key, EdgeRecord{key.first, key.second, f, -1, mesh_id});
            } else if (it->second.face_b < 0) {
                it->second.face_b = f;
            } else {
                std::ostringstream msg;
                msg << "meshes[" << mesh_id << "]: non-manifold edge (" << key.first << ", " << key.second
                    << ") shared by more than two faces";
                throw SceneError(msg.str());
            }
        }
    }
    std::vector<EdgeRecord> out;
    out.reserve(edges.size());
    for (auto &[key, e] : edges) {
        out.push_back(e);
    }
    return out;
}

// --- ParameterRegistry -----------------------------------------------------

void ParameterRegistry::add(ParameterEntry entry) {
    if (find(entry.path) != nullptr) {
        throw SceneError("differentiable: duplicate parameter path \"" + entry.path + "\"");
    }
    entry.offset = total_dim_;
    total_dim_ += entry.size;
    entries_.push_back(std::move(entry));
}

const ParameterEntry *ParameterRegistry::find(std::string_view path) const {
    for (const auto &e : entries_) {
        if (e.path == path) {
            return &e;
        }
    }
    return nullptr;
}

std::optional<int> ParameterRegistry::scalar_index(std::string_view name) const {
    for (const auto &e : entries_) {
        if (name.size() <= e.path.size() || name.substr(0, e.path.size()) != e.path) {
            continue;
        }
        auto rest = std::string(name.substr(e.path.size()));
        if (e.size == 3 && rest.size() == 2 && rest[0] == '.') {
            static const std::string xyz = "xyz", rgb = "rgb";
            auto k = xyz.find(rest[1]);
            if (k == std::string::npos) {
                k = rgb.find(rest[1]);
            }
            if (k != std::string::npos) {
                return e.offset + static_cast<int>(k);
            }
        }
        if (rest.size() >= 3 && rest.front() == '[' && rest.back() == ']') {
            try {
                std::size_t used = 0;
                auto k = std::stoi(rest.substr(1, rest.size() - 2), &used);
                if (used == rest.size() - 2 && k >= 0 && k < e.size) {
                    return e.offset + k;
                }
            } catch (const std::exception &) {
            }
        }
    }
    return std::nullopt;
}

std::string ParameterRegistry::scalar_name(int index) const {
    for (const auto &e : entries_) {
        if (index >= e.offset && index < e.offset + e.size) {
            return e.path + "[" + std::to_string(index - e.offset) + "]";
        }
    }
    return "?";
}

GradientVector &GradientVector::operator+=(const GradientVector &other) {
    for (std::size_t i = 0; i < values.size(); i++) {
        values[i] += other.values[i];
    }
    return *this;
}

bool GradientVector::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](Real v) { return std::isfinite(v); });
}

// --- Scene -------------------------------------------------------------------

namespace {

ParameterEntry parse_path(const std::string &path, const Camera &, const std::vector<Material> &materials,
                          const std::vector<Mesh> &meshes) {
    static const std::regex mesh_re(R"(mesh\[(\d+)\]\.(translation|vertices|emission))");
    static const std::regex material_re(R"(material\[(\d+)\]\.(diffuse|specular))");
    std::smatch m;
    if (path == "camera.position") {
        return {path, ParamKind::CameraPosition, 0, 0, 3};
    }
    if (path == "camera.look_at") {
        return {path, ParamKind::CameraLookAt, 0, 0, 3};
    }
    if (std::regex_match(path, m, mesh_re)) {
        auto id = std::stoi(m[1]);
        if (id >= static_cast<int>(meshes.size())) {
            throw SceneError("differentiable: \"" + path + "\" refers to a mesh that does not exist");
        }
        if (m[2] == "translation") {
            return {path, ParamKind::MeshTranslation, id, 0, 3};
        }
        if (m[2] == "emission") {
            return {path, ParamKind::MeshEmission, id, 0, 3};
        }
        return {path, ParamKind::MeshVertices, id, 0, 3 * static_cast<int>(meshes[id].vertices.size())};
    }
    if (std::regex_match(path, m, material_re)) {
        auto id = std::stoi(m[1]);
        if (id >= static_cast<int>(materials.size())) {
            throw SceneError("differentiable: \"" + path + "\" refers to a material that does not exist");
        }
        return {path, m[2] == "diffuse" ? ParamKind::MaterialDiffuse : ParamKind::MaterialSpecular, id, 0, 3};
    }
    throw SceneError("differentiable: unsupported parameter path \"" + path + "\"");
}

} // namespace

Scene::Scene(Camera camera, std::vector<Material> materials, std::vector<Mesh> meshes,
             const std::vector<std::string> &differentiable)
    : camera_(camera), materials_(std::move(materials)), meshes_(std::move(meshes)), differentiable_(differentiable) {
    for (const auto &path : differentiable_) {
        registry_.add(parse_path(path, camera_, materials_, meshes_));
    }
    build();
}

void Scene::build() {
    auto view = camera_.look_at - camera_.position;
    if (length(view) == 0) {
        throw SceneError("camera.look_at: coincides with camera.position");
    }
    if (length(cross(normalize(view), camera_.up)) < 1e-9) {
        throw SceneError("camera.up: parallel to the view direction");
    }
    if (!(camera_.vertical_fov > 0 && camera_.vertical_fov < 180)) {
        throw SceneError("camera.fov: must lie in (0, 180)");
    }
    if (camera_.width < 1 || camera_.height < 1) {
        throw SceneError("camera.resolution: must be positive");
    }
    for (int i = 0; i < static_cast<int>(meshes_.size()); i++) {
        const auto &mesh = meshes_[i];
        auto key = "meshes[" + std::to_string(i) + "]";
        if (mesh.material_id < 0 || mesh.material_id >= static_cast<int>(materials_.size())) {
            throw SceneError(key + ".material: index " + std::to_string(mesh.material_id) + " out of range");
        }
        vertex_offset_.push_back(static_cast<int>(world_.vertices.size()));
        face_offset_.push_back(static_cast<int>(world_.faces.size()));
        for (const auto &v : mesh.vertices) {
            world_.vertices.push_back(v + mesh.translation);
        }
        for (int f = 0; f < static_cast<int>(mesh.indices.size()); f++) {
            const auto &idx = mesh.indices[f];
            for (int k = 0; k < 3; k++) {
                if (idx[k] < 0 || idx[k] >= static_cast<int>(mesh.vertices.size())) {
                    throw SceneError(key + ".indices[" + std::to_string(3 * f + k) + "]: vertex index " +
                                     std::to_string(idx[k]) + " out of range");
                }
            }
            const auto &p0 = mesh.vertices[idx[0]], &p1 = mesh.vertices[idx[1]], &p2 = mesh.vertices[idx[2]];
            auto c = length(cross(p1 - p0, p2 - p0));
            if (!(c > 1e-12 * length(p1 - p0) * length(p2 - p0)) || c == 0) {
                throw SceneError(key + ".indices: face " + std::to_string(f) + " is degenerate (zero area)");
            }
            auto off = vertex_offset_.back();
            world_.faces.push_back({idx[0] + off, idx[1] + off, idx[2] + off});
            face_mesh_.push_back(i);
        }
        auto mesh_edges = extract_edges(mesh, i);
        edges_.insert(edges_.end(), mesh_edges.begin(), mesh_edges.end());
    }
    bvh_ = Bvh(world_);

    for (int f = 0; f < face_count(); f++) {
        if (!meshes_[face_mesh_[f]].is_emissive()) {
            continue;
        }
        auto tri = world_.triangle(f);
        auto area = face_area(tri[0], tri[1], tri[2]);
        lights_.faces.push_back(f);
        lights_.areas.push_back(area);
        lights_.total_area += area;
    }
    Real running = 0;
    for (auto a : lights_.areas) {
        running += a;
        lights_.cdf.push_back(running / lights_.total_area);
    }
    if (!lights_.cdf.empty()) {
        lights_.cdf.back() = 1;
    }
}

// --- JSON ----------------------------------------------------------------------

namespace {

void check_keys(const json &obj, const std::string &where, std::initializer_list<const char *> allowed) {
    if (!obj.is_object()) {
        throw SceneError(where + ": expected an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char *k) { return it.key() == k; })) {
            throw SceneError(where + (where.empty() ? "" : ".") + it.key() + ": unknown key");
        }
    }
}

const json &require(const json &obj, const std::string &where, const char *key) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SceneError(where + "." + key + ": missing required key");
    }
    return *it;
}

std::vector<Real> numbers(const json &j, const std::string &where, std::optional<std::size_t> size = {}) {
    if (!j.is_array()) {
        throw SceneError(where + ": expected an array of numbers");
    }
    if (size && j.size() != *size) {
        throw SceneError(where + ": expected " + std::to_string(*size) + " numbers, got " + std::to_string(j.size()));
    }
    std::vector<Real> out;
    out.reserve(j.size());
    for (const auto &x : j) {
        if (!x.is_number()) {
            throw SceneError(where + ": expected an array of numbers");
        }
        auto v = x.get<Real>();
        if (!std::isfinite(v)) {
            throw SceneError(where + ": non-finite value");
        }
        out.push_back(v);
    }
    return out;
}

Vec3 vec3(const json &j, const std::string &where) {
    auto v = numbers(j, where, 3);
    return {v[0], v[1], v[2]};
}

Real number(const json &j, const std::string &where) {
    if (!j.is_number()) {
        throw SceneError(where + ": expected a number");
    }
    return j.get<Real>();
}

int index(const json &j, const std::string &where) {
    if (!j.is_number_integer()) {
        throw SceneError(where + ": expected an integer");
    }
    return j.get<int>();
}

json to_json(const Vec3 &v) { return json::array({v.x, v.y, v.z}); }

} // namespace

Scene load_scene(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error &e) {
        throw SceneError(std::string("scene: invalid JSON: ") + e.what());
    }
    check_keys(root, "", {"camera", "materials", "meshes", "differentiable"});

    Camera camera;
    const auto &cam = require(root, "scene", "camera");
    check_keys(cam, "camera", {"position", "look_at", "up", "fov", "resolution"});
    camera.position = vec3(require(cam, "camera", "position"), "camera.position");
    camera.look_at = vec3(require(cam, "camera", "look_at"), "camera.look_at");
    camera.up = vec3(require(cam, "camera", "up"), "camera.up");
    camera.vertical_fov = number(require(cam, "camera", "fov"), "camera.fov");
    const auto &res = require(cam, "camera", "resolution");
    if (!res.is_array() || res.size() != 2) {
        throw SceneError("camera.resolution: expected [width, height]");
    }
    camera.width = index(res[0], "camera.resolution[0]");
    camera.height = index(res[1], "camera.resolution[1]");

    std::vector<Material> materials;
    if (root.contains("materials")) {
        const auto &mats = root["materials"];
        if (!mats.is_array()) {
            throw SceneError("materials: expected an array");
        }
        for (std::size_t i = 0; i < mats.size(); i++) {
            auto key = "materials[" + std::to_string(i) + "]";
            check_keys(mats[i], key, {"diffuse", "specular", "shininess"});
            Material m;
            m.diffuse = vec3(require(mats[i], key, "diffuse"), key + ".diffuse");
            if (mats[i].contains("specular")) {
                m.specular = vec3(mats[i]["specular"], key + ".specular");
            }
            if (mats[i].contains("shininess")) {
                m.shininess = number(mats[i]["shininess"], key + ".shininess");
            }
            for (int c = 0; c < 3; c++) {
                if (m.diffuse[c] < 0 || m.diffuse[c] > 1) {
                    throw SceneError(key + ".diffuse: components must lie in [0, 1]");
                }
                if (m.specular[c] < 0 || m.specular[c] > 1) {
                    throw SceneError(key + ".specular: components must lie in [0, 1]");
                }
                if (m.diffuse[c] + m.specular[c] > 1 + 1e-12) {
                    throw SceneError(key + ": diffuse + specular exceeds 1");
                }
            }
            if (!(m.shininess > 0)) {
                throw SceneError(key + ".shininess: must be positive");
            }
            materials.push_back(m);
        }
    }

    std::vector<Mesh> meshes;
    if (root.contains("meshes")) {
        const auto &ms = root["meshes"];
        if (!ms.is_array()) {
            throw SceneError("meshes: expected an array");
        }
        for (std::size_t i = 0; i < ms.size(); i++) {
            auto key = "meshes[" + std::to_string(i) + "]";
            check_keys(ms[i], key, {"vertices", "indices", "material", "translation", "emission"});
            Mesh mesh;
            auto verts = numbers(require(ms[i], key, "vertices"), key + ".vertices");
            if (verts.size() % 3 != 0) {
                throw SceneError(key + ".vertices: length must be a multiple of 3");
            }
            for (std::size_t k = 0; k < verts.size(); k += 3) {
                mesh.vertices.push_back({verts[k], verts[k + 1], verts[k + 2]});
            }
            const auto &ind = require(ms[i], key, "indices");
            if (!ind.is_array() || ind.size() % 3 != 0) {
                throw SceneError(key + ".indices: expected an array whose length is a multiple of 3");
            }
            for (std::size_t k = 0; k < ind.size(); k += 3) {
                mesh.indices.push_back({index(ind[k], key + ".indices[" + std::to_string(k) + "]"),
                                        index(ind[k + 1], key + ".indices[" + std::to_string(k + 1) + "]"),
                                        index(ind[k + 2], key + ".indices[" + std::to_string(k + 2) + "]")});
            }
            mesh.material_id = index(require(ms[i], key, "material"), key + ".material");
            if (ms[i].contains("translation")) {
                mesh.translation = vec3(ms[i]["translation"], key + ".translation");
            }
            if (ms[i].contains("emission")) {
                mesh.emission = vec3(ms[i]["emission"], key + ".emission");
                if (mesh.emission.x < 0 || mesh.emission.y < 0 || mesh.emission.z < 0) {
                    throw SceneError(key + ".emission: components must be non-negative");
                }
            }
            meshes.push_back(std::move(mesh));
        }
    }

    std::vector<std::string> differentiable;
    if (root.contains("differentiable")) {
        const auto &d = root["differentiable"];
        if (!d.is_array()) {
            throw SceneError("differentiable: expected an array of strings");
        }
        for (const auto &p : d) {
            if (!p.is_string()) {
                throw SceneError("differentiable: expected an array of strings");
            }
            differentiable.push_back(p.get<std::string>());
        }
    }
    return Scene(camera, std::move(materials), std::move(meshes), differentiable);
}

Scene load_scene_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SceneError(path + ": cannot open scene file");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return load_scene(buffer.str());
}

std::string save_scene(const Scene &scene) {
    json root;
    const auto &cam = scene.camera();
    root["camera"] = {{"position", to_json(cam.position)},
                      {"look_at", to_json(cam.look_at)},
                      {"up", to_json(cam.up)},
                      {"fov", cam.vertical_fov},
                      {"resolution", json::array({cam.width, cam.height})}};
    root["materials"] = json::array();
    for (const auto &m : scene.materials()) {
        root["materials"].push_back(
            {{"diffuse", to_json(m.diffuse)}, {"specular", to_json(m.specular)}, {"shininess", m.shininess}});
    }
    root["meshes"] = json::array();
    for (const auto &mesh : scene.meshes()) {
        json verts = json::array(), inds = json::array();
        for (const auto &v : mesh.vertices) {
            verts.push_back(v.x);
            verts.push_back(v.y);
            verts.push_back(v.z);
        }
        for (const auto &f : mesh.indices) {
            inds.push_back(f[0]);
            inds.push_back(f[1]);
            inds.push_back(f[2]);
        }
        root["meshes"].push_back({{"vertices", verts},
                                  {"indices", inds},
                                  {"material", mesh.material_id},
                                  {"translation", to_json(mesh.translation)},
                                  {"emission", to_json(mesh.emission)}});
    }
    root["differentiable"] = scene.differentiable_paths();
    return root.dump(2);
}

// --- parameters ----------------------------------------------------------------

std::vector<Real> read_parameters(const Scene &scene) {
    std::vector<Real> out(scene.registry().total_dim());
    for (const auto &e : scene.registry().entries()) {
        auto put3 = [&](const Vec3 &v) {
            out[e.offset] = v.x;
            out[e.offset + 1] = v.y;
            out[e.offset + 2] = v.z;
        };
        switch (e.kind) {
        case ParamKind::CameraPosition: put3(scene.camera().position); break;
        case ParamKind::CameraLookAt: put3(scene.camera().look_at); break;
        case ParamKind::MeshTranslation: put3(scene.meshes()[e.target].translation); break;
        case ParamKind::MeshEmission: put3(scene.meshes()[e.target].emission); break;
        case ParamKind::MaterialDiffuse: put3(scene.materials()[e.target].diffuse); break;
        case ParamKind::MaterialSpecular: put3(scene.materials()[e.target].specular); break;
        case ParamKind::MeshVertices: {
            const auto &verts = scene.meshes()[e.target].vertices;
            for (std::size_t k = 0; k < verts.size(); k++) {
                for (int c = 0; c < 3; c++) {
                    out[e.offset + 3 * k + c] = verts[k][c];
                }
            }
            break;
        }
        }
    }
    return out;
}

Scene apply_parameters(const Scene &scene, std::span<const Real> values) {
    const auto &registry = scene.registry();
    if (static_cast<int>(values.size()) != registry.total_dim()) {
        throw std::invalid_argument("apply_parameters: expected " + std::to_string(registry.total_dim()) +
                                    " values, got " + std::to_string(values.size()));
    }
    auto camera = scene.camera();
    auto materials = scene.materials();
    auto meshes = scene.meshes();
    for (const auto &e : registry.entries()) {
        auto get3 = [&] { return Vec3{values[e.offset], values[e.offset + 1], values[e.offset + 2]}; };
        switch (e.kind) {
        case ParamKind::CameraPosition: camera.position = get3(); break;
        case ParamKind::CameraLookAt: camera.look_at = get3(); break;
        case ParamKind::MeshTranslation: meshes[e.target].translation = get3(); break;
        case ParamKind::MeshEmission: meshes[e.target].emission = get3(); break;
        case ParamKind::MaterialDiffuse: materials[e.target].diffuse = get3(); break;
        case ParamKind::MaterialSpecular: materials[e.target].specular = get3(); break;
        case ParamKind::MeshVertices: {
            auto &verts = meshes[e.target].vertices;
            for (std::size_t k = 0; k < verts.size(); k++) {
                for (int c = 0; c < 3; c++) {
                    verts[k][c] = values[e.offset + 3 * k + c];
                }
            }
            break;
        }
        }
    }
    return Scene(camera, std::move(materials), std::move(meshes), scene.differentiable_paths());
}

// --- gradient routing -------------------------------------------------------------

GradientLayout::GradientLayout(const Scene &scene) : dim_(scene.registry().total_dim()) {
    auto nverts = static_cast<int>(scene.world().vertices.size());
    vertex_.assign(3 * nverts, -1);
    translation_.assign(3 * nverts, -1);
    emission_.assign(3 * scene.meshes().size(), -1);
    diffuse_.assign(3 * scene.materials().size(), -1);
    specular_.assign(3 * scene.materials().size(), -1);
    for (const auto &e : scene.registry().entries()) {
        switch (e.kind) {
        case ParamKind::CameraPosition:
            for (int c = 0; c < 3; c++) {
                camera_position_[c] = e.offset + c;
            }
            has_camera_ = true;
            break;
        case ParamKind::CameraLookAt:
            for (int c = 0; c < 3; c++) {
                camera_look_at_[c] = e.offset + c;
            }
            has_camera_ = true;
            break;
        case ParamKind::MeshTranslation: {
            auto first = scene.vertex_offset(e.target);
            auto count = static_cast<int>(scene.meshes()[e.target].vertices.size());
            for (int v = first; v < first + count; v++) {
                for (int c = 0; c < 3; c++) {
                    translation_[3 * v + c] = e.offset + c;
                }
            }
            break;
        }
        case ParamKind::MeshVertices: {
            auto first = scene.vertex_offset(e.target);
            auto count = static_cast<int>(scene.meshes()[e.target].vertices.size());
            for (int k = 0; k < count; k++) {
                for (int c = 0; c < 3; c++) {
                    vertex_[3 * (first + k) + c] = e.offset + 3 * k + c;
                }
            }
            break;
        }
        case ParamKind::MeshEmission:
            for (int c = 0; c < 3; c++) {
                emission_[3 * e.target + c] = e.offset + c;
            }
            break;
        case ParamKind::MaterialDiffuse:
            for (int c = 0; c < 3; c++) {
                diffuse_[3 * e.target + c] = e.offset + c;
            }
            break;
        case ParamKind::MaterialSpecular:
            for (int c = 0; c < 3; c++) {
                specular_[3 * e.target + c] = e.offset + c;
            }
            break;
        }
    }
}

GradientLayout GradientLayout::single(const Scene &scene, int scalar_index) {
    GradientLayout layout(scene);
    layout.keep_only(scalar_index);
    return layout;
}

void GradientLayout::keep_only(int scalar_index) {
    auto remap = [&](int &slot) { slot = slot == scalar_index ? 0 : -1; };
    for (auto *arr : {&vertex_, &translation_, &emission_, &diffuse_, &specular_}) {
        std::for_each(arr->begin(), arr->end(), remap);
    }
    has_camera_ = false;
    for (int c = 0; c < 3; c++) {
        remap(camera_position_[c]);
        remap(camera_look_at_[c]);
        has_camera_ = has_camera_ || camera_position_[c] >= 0 || camera_look_at_[c] >= 0;
    }
    dim_ = 1;
}

void GradientSink::add_vertex(int world_vertex, const Vec3 &d) {
    for (int c = 0; c < 3; c++) {
        add(layout_->vertex(world_vertex, c), d[c]);
        add(layout_->translation(world_vertex, c), d[c]);
    }
}

void GradientSink::add_camera(const Vec3 &d_position, const Vec3 &d_look_at) {
    for (int c = 0; c < 3; c++) {
        add(layout_->camera_position(c), d_position[c]);
        add(layout_->camera_look_at(c), d_look_at[c]);
    }
}

void GradientSink::add_emission(int mesh, const Rgb &d) {
    for (int c = 0; c < 3; c++) {
        add(layout_->emission(mesh, c), d[c]);
    }
}

void GradientSink::add_diffuse(int material, const Rgb &d) {
    for (int c = 0; c < 3; c++) {
        add(layout_->diffuse(material, c), d[c]);
    }
}

void GradientSink::add_specular(int material, const Rgb &d) {
    for (int c = 0; c < 3; c++) {
        add(layout_->specular(material, c), d[c]);
    }
}

} // namespace edgetrace
