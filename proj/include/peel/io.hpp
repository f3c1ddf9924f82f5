#pragma once

#include "peel/camera.hpp"
#include "peel/image.hpp"
#include "peel/mesh.hpp"
#include "peel/peel_stack.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace peel::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kStackSchema = "peelstack/1";
inline constexpr const char* kStackManifestName = "manifest.json";

// ---- images ----

/// Little-endian PFM (scale -1.0), rows stored bottom to top. `channels` is 1 or 3.
void write_pfm(const fs::path& path, int width, int height, int channels, const float* data);
std::vector<float> read_pfm(const fs::path& path, int& width, int& height, int& channels);

void write_png(const fs::path& path, const RgbImage& image);
void write_png(const fs::path& path, const GrayImage& image);
RgbImage read_png_rgb(const fs::path& path);
GrayImage read_png_gray(const fs::path& path);

// ---- camera / stack ----

json camera_to_json(const PinholeCamera& camera);
/// Accepts the full field set or a look-at form
/// {width, height, hfov_deg, eye, target, up[, znear]}.
PinholeCamera camera_from_json(const json& j);
PinholeCamera load_camera(const fs::path& path);
void save_camera(const fs::path& path, const PinholeCamera& camera);

/// Writes one file per channel and layer plus `manifest.json` into `dir`.
/// Returns the manifest path.
fs::path save_stack(const fs::path& dir, const PeelStack& stack);
/// `path` may be the manifest itself or the directory holding it.
PeelStack load_stack(const fs::path& path);

// ---- meshes ----

struct ObjMaterial {
    Rgb8 diffuse{200, 200, 200};
    std::string texture;  // map_Kd, relative to the MTL file
};

struct ObjData {
    TriMesh mesh;
    std::vector<std::string> face_material;
    std::map<std::string, ObjMaterial> materials;
};

/// Reads positions, normals, texcoords, faces (polygons fan-triangulated),
/// usemtl groups and the referenced MTL (Kd, map_Kd). The first texture found
/// is loaded into mesh.texture and face colors are taken from Kd.
ObjData read_obj(const fs::path& path);

/// Face labels from `usemtl label_<id>` material names. Throws Format otherwise.
std::vector<std::uint8_t> labels_from_materials(const ObjData& obj);

struct ObjWriteOptions {
    /// Group faces into `usemtl label_<id>` materials when face labels exist.
    bool label_materials = true;
    /// Write the mesh texture PNG next to the OBJ when present.
    bool write_texture = true;
};

void write_obj(const fs::path& path, const TriMesh& mesh, const ObjWriteOptions& options = {});

void write_ply(const fs::path& path, const LabeledPointCloud& cloud);
LabeledPointCloud read_ply(const fs::path& path);

/// Per-vertex layer tags stored next to a reconstructed OBJ.
void write_layer_tags(const fs::path& path, const LayeredMesh& mesh);
std::vector<int> read_layer_tags(const fs::path& path);
fs::path layer_tags_path(const fs::path& obj_path);

// ---- misc ----

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

}  // namespace peel::io
