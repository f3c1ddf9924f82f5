#pragma once

#include "peel/render.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace peel {

enum class TexturePattern { Constant, Checker, Stripes };

TexturePattern parse_texture_pattern(std::string_view name);
std::string_view to_string(TexturePattern pattern);

/// Procedural texture. `palette` selects one of two disjoint color sets so
/// textures of different meshes never share a color.
RgbImage make_texture(TexturePattern pattern, int size, int palette = 0);

/// Subdivided icosahedron with per-corner longitude/latitude uv.
TriMesh make_icosphere(int subdivisions, double radius);

/// Open cylinder around the y axis, no caps; uv wraps once around.
TriMesh make_open_cylinder(double radius_bottom, double radius_top, double y_bottom, double y_top,
                           int segments, int rings);

/// Regular grid quad in the plane z = `z`, centred on the z axis; normals face -z.
TriMesh make_quad(double half_width, double half_height, double z, int cells);

struct Fixture {
    std::string name;
    Scene scene;
    std::vector<std::uint8_t> garment_labels;
    /// (label, name) pairs for every label in the scene.
    std::vector<std::pair<std::uint8_t, std::string>> label_names;
};

inline constexpr std::uint8_t kLabelTop = 5;
inline constexpr std::uint8_t kLabelBottom = 9;
inline constexpr std::uint8_t kLabelBody = 10;

std::vector<std::string> fixture_names();

/// Throws Error(UnknownFixture) for names outside fixture_names().
Fixture make_fixture(std::string_view name, int resolution, TexturePattern texture);

/// Writes one OBJ per mesh (with MTL and texture PNG), labels.json and camera.json.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

/// Inverse of write_fixture.
Fixture load_fixture(const std::filesystem::path& dir);

}  // namespace peel
