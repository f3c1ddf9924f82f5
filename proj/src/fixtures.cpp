#include "peel/fixtures.hpp"

#include "peel/error.hpp"
#include "peel/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace peel {

namespace {

constexpr double kPi = std::numbers::pi;

// Two disjoint palettes: {primary, secondary}.
constexpr Rgb8 kPalette[2][2] = {{Rgb8{220, 60, 40}, Rgb8{30, 40, 150}},
                                 {Rgb8{40, 190, 80}, Rgb8{240, 220, 50}}};

std::uint64_t midpoint_key(int a, int b) { return edge_key(a, b); }

void set_sphere_uv(TriMesh& m) {
    std::vector<double> u(m.vertices.size());
    std::vector<double> v(m.vertices.size());
    std::vector<char> pole(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        const Vec3 p = m.vertices[i].normalized();
        // Longitude seam sits on the +z side, away from the default camera.
        u[i] = 0.5 + std::atan2(p.x(), -p.z()) / (2.0 * kPi);
        v[i] = 0.5 + std::asin(std::clamp(p.y(), -1.0, 1.0)) / kPi;
        pole[i] = std::hypot(p.x(), p.z()) < 1e-12;
    }
    m.texcoords.clear();
    m.face_texcoords.clear();
    for (const Face& f : m.faces) {
        double cu[3];
        for (int k = 0; k < 3; ++k) cu[k] = u[static_cast<std::size_t>(f[k])];
        double lo = 2.0, hi = -1.0;
        for (int k = 0; k < 3; ++k)
            if (!pole[static_cast<std::size_t>(f[k])]) {
                lo = std::min(lo, cu[k]);
                hi = std::max(hi, cu[k]);
            }
        if (hi - lo > 0.5)
            for (int k = 0; k < 3; ++k)
                if (!pole[static_cast<std::size_t>(f[k])] && cu[k] < 0.5) cu[k] += 1.0;
        // Pole corners take the mean longitude of the other corners.
        for (int k = 0; k < 3; ++k) {
            if (!pole[static_cast<std::size_t>(f[k])]) continue;
            double sum = 0.0;
            int n = 0;
            for (int j = 0; j < 3; ++j)
                if (!pole[static_cast<std::size_t>(f[j])]) {
                    sum += cu[j];
                    ++n;
                }
            cu[k] = n > 0 ? sum / n : 0.5;
        }
        Face tf{};
        for (int k = 0; k < 3; ++k) {
            tf[k] = static_cast<int>(m.texcoords.size());
            m.texcoords.emplace_back(cu[k], v[static_cast<std::size_t>(f[k])]);
        }
        m.face_texcoords.push_back(tf);
    }
}

Rgb8 face_color_for(int palette) { return kPalette[palette][0]; }

void dress(TriMesh& mesh, std::uint8_t label, TexturePattern pattern, int palette,
           const std::string& texture_name) {
    mesh.face_labels.assign(mesh.faces.size(), label);
    mesh.face_colors.assign(mesh.faces.size(), face_color_for(palette));
    mesh.texture = std::make_shared<RgbImage>(make_texture(pattern, 256, palette));
    mesh.texture_name = texture_name;
}

}  // namespace

TexturePattern parse_texture_pattern(std::string_view name) {
    if (name == "constant") return TexturePattern::Constant;
    if (name == "checker") return TexturePattern::Checker;
    if (name == "stripes") return TexturePattern::Stripes;
    throw Error(ErrorCode::InvalidArgument, "unknown texture pattern '" + std::string(name) + "'");
}

std::string_view to_string(TexturePattern pattern) {
    switch (pattern) {
        case TexturePattern::Constant: return "constant";
        case TexturePattern::Checker: return "checker";
        case TexturePattern::Stripes: return "stripes";
    }
    return "constant";
}

RgbImage make_texture(TexturePattern pattern, int size, int palette) {
    const auto& colors = kPalette[palette & 1];
    RgbImage img(size, size, colors[0]);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            int pick = 0;
            switch (pattern) {
                case TexturePattern::Constant: pick = 0; break;
                case TexturePattern::Checker: pick = ((x * 4 / size) + (y * 4 / size)) & 1; break;
                case TexturePattern::Stripes: pick = (x / 8) & 1; break;
            }
            img.at(x, y) = colors[pick];
        }
    }
    return img;
}

TriMesh make_icosphere(int subdivisions, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& v : m.vertices) v.normalize();
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::uint64_t, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = midpoint_key(a, b);
            if (auto it = mid.find(key); it != mid.end()) return it->second;
            const Vec3 p = (m.vertices[static_cast<std::size_t>(a)] + m.vertices[static_cast<std::size_t>(b)]).normalized();
            m.vertices.push_back(p);
            const int id = static_cast<int>(m.vertices.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<Face> next;
        next.reserve(m.faces.size() * 4);
        for (const Face& f : m.faces) {
            const int ab = midpoint(f[0], f[1]);
            const int bc = midpoint(f[1], f[2]);
            const int ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    m.normals = m.vertices;
    for (Vec3& v : m.vertices) v *= radius;
    set_sphere_uv(m);
    return m;
}

TriMesh make_open_cylinder(double radius_bottom, double radius_top, double y_bottom, double y_top,
                           int segments, int rings) {
    TriMesh m;
    auto id = [&](int r, int s) { return r * segments + (s % segments); };
    for (int r = 0; r <= rings; ++r) {
        const double a = static_cast<double>(r) / rings;
        const double y = y_bottom + a * (y_top - y_bottom);
        const double rad = radius_bottom + a * (radius_top - radius_bottom);
        for (int s = 0; s < segments; ++s) {
            const double th = 2.0 * kPi * s / segments;
            m.vertices.emplace_back(rad * std::cos(th), y, rad * std::sin(th));
            m.normals.emplace_back(std::cos(th), 0.0, std::sin(th));
        }
    }
    // uv grid carries one extra column so the wrap stays continuous.
    auto tid = [&](int r, int s) { return r * (segments + 1) + s; };
    for (int r = 0; r <= rings; ++r)
        for (int s = 0; s <= segments; ++s)
            m.texcoords.emplace_back(static_cast<double>(s) / segments, static_cast<double>(r) / rings);
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            m.faces.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
            m.face_texcoords.push_back({tid(r, s), tid(r + 1, s), tid(r + 1, s + 1)});
            m.faces.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
            m.face_texcoords.push_back({tid(r, s), tid(r + 1, s + 1), tid(r, s + 1)});
        }
    }
    if (std::abs(radius_top - radius_bottom) > 0.0) {
        // Cone: tilt the normals by the slope.
        const double slope = (radius_bottom - radius_top) / (y_top - y_bottom);
        for (Vec3& n : m.normals) n = Vec3(n.x(), slope, n.z()).normalized();
    }
    return m;
}

TriMesh make_quad(double half_width, double half_height, double z, int cells) {
    TriMesh m;
    auto id = [&](int i, int j) { return j * (cells + 1) + i; };
    for (int j = 0; j <= cells; ++j) {
        for (int i = 0; i <= cells; ++i) {
            const double u = static_cast<double>(i) / cells;
            const double v = static_cast<double>(j) / cells;
            m.vertices.emplace_back(-half_width + 2.0 * half_width * u, -half_height + 2.0 * half_height * v, z);
            m.normals.emplace_back(0.0, 0.0, -1.0);
            m.texcoords.emplace_back(u, v);
        }
    }
    for (int j = 0; j < cells; ++j) {
        for (int i = 0; i < cells; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i, j + 1), d = id(i + 1, j + 1);
            m.faces.push_back({a, c, b});
            m.faces.push_back({b, c, d});
        }
    }
    m.face_texcoords = m.faces;
    return m;
}

std::vector<std::string> fixture_names() {
    return {"sphere", "cylinder_skirt", "two_garment_mannequin", "stacked_planes"};
}

Fixture make_fixture(std::string_view name, int resolution, TexturePattern texture) {
    if (resolution < 8) throw Error(ErrorCode::InvalidArgument, "fixture resolution must be >= 8");
    Fixture fx;
    fx.name = std::string(name);
    const double deg = kPi / 180.0;
    if (name == "sphere") {
        TriMesh s = make_icosphere(4, 1.0);
        dress(s, kLabelTop, texture, 0, "sphere_0.png");
        fx.scene.meshes.push_back(std::move(s));
        fx.scene.camera = PinholeCamera::look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, resolution, resolution,
                                                 70.0 * deg);
        fx.garment_labels = {kLabelTop};
        fx.label_names = {{kLabelTop, "top"}};
    } else if (name == "cylinder_skirt") {
        TriMesh c = make_open_cylinder(0.5, 0.5, -0.5, 0.5, 96, 24);
        dress(c, kLabelBottom, texture, 0, "cylinder_skirt_0.png");
        fx.scene.meshes.push_back(std::move(c));
        fx.scene.camera = PinholeCamera::look_at({0, 0.9, -2.6}, {0, 0, 0}, {0, 1, 0}, resolution, resolution,
                                                 50.0 * deg);
        fx.garment_labels = {kLabelBottom};
        fx.label_names = {{kLabelBottom, "bottom"}};
    } else if (name == "two_garment_mannequin") {
        TriMesh body = make_icosphere(3, 1.0);
        for (Vec3& v : body.vertices) v = Vec3(0.28 * v.x(), 0.9 * v.y(), 0.22 * v.z());
        body.normals.clear();
        dress(body, kLabelBody, TexturePattern::Constant, 1, "two_garment_mannequin_0.png");
        TriMesh top = make_open_cylinder(0.36, 0.36, -0.05, 0.55, 64, 12);
        dress(top, kLabelTop, texture, 0, "two_garment_mannequin_1.png");
        TriMesh bottom = make_open_cylinder(0.5, 0.34, -0.75, -0.1, 64, 12);
        dress(bottom, kLabelBottom, texture, 1, "two_garment_mannequin_2.png");
        fx.scene.meshes = {std::move(body), std::move(top), std::move(bottom)};
        fx.scene.camera = PinholeCamera::look_at({0, 0.2, -3.2}, {0, 0, 0}, {0, 1, 0}, resolution, resolution,
                                                 45.0 * deg);
        fx.garment_labels = {kLabelTop, kLabelBottom};
        fx.label_names = {{kLabelTop, "top"}, {kLabelBottom, "bottom"}, {kLabelBody, "body"}};
    } else if (name == "stacked_planes") {
        TriMesh front = make_quad(0.7, 0.7, 1.0, 8);
        dress(front, kLabelTop, texture, 0, "stacked_planes_0.png");
        TriMesh back = make_quad(0.7, 0.7, 2.0, 8);
        dress(back, kLabelTop, texture, 1, "stacked_planes_1.png");
        fx.scene.meshes = {std::move(front), std::move(back)};
        fx.scene.camera = PinholeCamera::look_at({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, resolution, resolution,
                                                 60.0 * deg);
        fx.garment_labels = {kLabelTop};
        fx.label_names = {{kLabelTop, "top"}};
    } else {
        throw Error(ErrorCode::UnknownFixture, "unknown fixture '" + std::string(name) + "'");
    }
    return fx;
}

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::json j;
    j["schema"] = "peelfixture/1";
    j["name"] = fixture.name;
    j["meshes"] = io::json::array();
    for (std::size_t i = 0; i < fixture.scene.meshes.size(); ++i) {
        const std::string obj = fixture.name + "_" + std::to_string(i) + ".obj";
        io::write_obj(dir / obj, fixture.scene.meshes[i]);
        j["meshes"].push_back(obj);
    }
    j["garment_labels"] = fixture.garment_labels;
    io::json names = io::json::object();
    for (const auto& [label, n] : fixture.label_names) names[std::to_string(label)] = n;
    j["label_names"] = names;
    io::write_json(dir / "labels.json", j);
    io::save_camera(dir / "camera.json", fixture.scene.camera);
}

Fixture load_fixture(const std::filesystem::path& dir) {
    const io::json j = io::read_json(dir / "labels.json");
    Fixture fx;
    fx.name = j.value("name", std::string());
    for (const auto& obj : j.at("meshes")) {
        io::ObjData data = io::read_obj(dir / obj.get<std::string>());
        data.mesh.face_labels = io::labels_from_materials(data);
        fx.scene.meshes.push_back(std::move(data.mesh));
    }
    fx.garment_labels = j.at("garment_labels").get<std::vector<std::uint8_t>>();
    for (const auto& [key, value] : j.at("label_names").items())
        fx.label_names.emplace_back(static_cast<std::uint8_t>(std::stoi(key)), value.get<std::string>());
    fx.scene.camera = io::load_camera(dir / "camera.json");
    return fx;
}

}  // namespace peel
