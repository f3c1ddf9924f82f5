#include "peel/io.hpp"

#include "peel/error.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace peel::io {

namespace {

[[noreturn]] void io_fail(const fs::path& path, const std::string& what) {
    throw Error(ErrorCode::Io, path.string() + ": " + what);
}

[[noreturn]] void format_fail(const fs::path& path, const std::string& what) {
    throw Error(ErrorCode::Format, path.string() + ": " + what);
}

std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) io_fail(path, std::string("cannot open (") + mode + ")");
    return f;
}

void write_png_raw(const fs::path& path, int width, int height, int color_type, int channels,
                   const std::uint8_t* data) {
    FilePtr fp = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        io_fail(path, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        io_fail(path, "libpng write failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Decodes any 8-bit PNG into `channels` (1 or 3) interleaved bytes.
std::vector<std::uint8_t> read_png_raw(const fs::path& path, int channels, int& width,
                                       int& height) {
    FilePtr fp = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        format_fail(path, "not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        io_fail(path, "libpng init failed");
    }
    std::vector<std::uint8_t> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        format_fail(path, "libpng read failed");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
    if (channels == 3 && is_gray) png_set_gray_to_rgb(png);
    if (channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<std::size_t>(width) * static_cast<std::size_t>(channels)) {
        png_destroy_read_struct(&png, &info, nullptr);
        format_fail(path, "unsupported PNG layout");
    }
    out.resize(stride * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) png_read_row(png, out.data() + stride * static_cast<std::size_t>(y), nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Format, "expected 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

void write_pfm(const fs::path& path, int width, int height, int channels, const float* data) {
    if (channels != 1 && channels != 3) throw Error(ErrorCode::InvalidArgument, "PFM channels");
    FilePtr fp = open_file(path, "wb");
    std::fprintf(fp.get(), "%s\n%d %d\n-1.0\n", channels == 3 ? "PF" : "Pf", width, height);
    const std::size_t row = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    std::vector<std::uint32_t> buf(row);
    for (int y = height - 1; y >= 0; --y) {
        std::memcpy(buf.data(), data + static_cast<std::size_t>(y) * row, row * sizeof(float));
        if constexpr (std::endian::native == std::endian::big)
            for (auto& w : buf) w = byteswap32(w);
        if (std::fwrite(buf.data(), sizeof(std::uint32_t), row, fp.get()) != row)
            io_fail(path, "short write");
    }
}

std::vector<float> read_pfm(const fs::path& path, int& width, int& height, int& channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail(path, "cannot open");
    std::string magic;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    if (!in) format_fail(path, "bad PFM header");
    in.get();  // single whitespace before raster
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else format_fail(path, "bad PFM magic");
    if (width <= 0 || height <= 0) format_fail(path, "bad PFM dimensions");
    const bool little = scale < 0.0;
    const std::size_t row = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    std::vector<float> data(row * static_cast<std::size_t>(height));
    std::vector<std::uint32_t> buf(row);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(row * 4));
        if (!in) format_fail(path, "truncated PFM raster");
        const bool swap = little != (std::endian::native == std::endian::little);
        if (swap)
            for (auto& w : buf) w = byteswap32(w);
        std::memcpy(data.data() + static_cast<std::size_t>(y) * row, buf.data(), row * 4);
    }
    return data;
}

void write_png(const fs::path& path, const RgbImage& image) {
    write_png_raw(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, 3,
                  reinterpret_cast<const std::uint8_t*>(image.data().data()));
}

void write_png(const fs::path& path, const GrayImage& image) {
    write_png_raw(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 1, image.data().data());
}

RgbImage read_png_rgb(const fs::path& path) {
    int w = 0, h = 0;
    auto raw = read_png_raw(path, 3, w, h);
    RgbImage img(w, h);
    std::memcpy(img.data().data(), raw.data(), raw.size());
    return img;
}

GrayImage read_png_gray(const fs::path& path) {
    int w = 0, h = 0;
    auto raw = read_png_raw(path, 1, w, h);
    GrayImage img(w, h);
    img.data() = std::move(raw);
    return img;
}

json camera_to_json(const PinholeCamera& c) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) rot.push_back(c.rotation(r, k));
    return {{"width", c.width},   {"height", c.height},          {"fx", c.fx},
            {"fy", c.fy},         {"cx", c.cx},                  {"cy", c.cy},
            {"rotation", rot},    {"translation", vec_json(c.translation)},
            {"znear", c.znear}};
}

PinholeCamera camera_from_json(const json& j) {
    try {
        if (j.contains("eye")) {
            const double hfov = j.at("hfov_deg").get<double>() * 3.14159265358979323846 / 180.0;
            const Vec3 up = j.contains("up") ? json_vec(j["up"]) : Vec3(0, 1, 0);
            return PinholeCamera::look_at(json_vec(j.at("eye")), json_vec(j.at("target")), up,
                                          j.at("width").get<int>(), j.at("height").get<int>(),
                                          hfov, j.value("znear", 1e-3));
        }
        PinholeCamera c;
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.fx = j.at("fx").get<double>();
        c.fy = j.at("fy").get<double>();
        c.cx = j.at("cx").get<double>();
        c.cy = j.at("cy").get<double>();
        const auto& rot = j.at("rotation");
        if (rot.size() != 9) throw Error(ErrorCode::Format, "rotation must have 9 entries");
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) c.rotation(r, k) = rot[static_cast<std::size_t>(r * 3 + k)].get<double>();
        c.translation = json_vec(j.at("translation"));
        c.znear = j.at("znear").get<double>();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Format, std::string("camera json: ") + e.what());
    }
}

PinholeCamera load_camera(const fs::path& path) { return camera_from_json(read_json(path)); }

void save_camera(const fs::path& path, const PinholeCamera& camera) {
    write_json(path, camera_to_json(camera));
}

fs::path save_stack(const fs::path& dir, const PeelStack& stack) {
    fs::create_directories(dir);
    const int w = stack.width();
    const int h = stack.height();
    const std::size_t n = stack.texels_per_layer();
    json channels = {{"depth", json::array()}, {"normal", json::array()},
                     {"rgb", json::array()},   {"seg", json::array()}};
    for (int l = 0; l < stack.layers(); ++l) {
        const std::string tag = std::to_string(l + 1);
        const std::size_t off = n * static_cast<std::size_t>(l);

        const std::string depth_name = "depth_" + tag + ".pfm";
        write_pfm(dir / depth_name, w, h, 1, stack.depth_data().data() + off);

        std::vector<float> normals(n * 3);
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k) normals[i * 3 + static_cast<std::size_t>(k)] = stack.normal_data()[off + i][k];
        const std::string normal_name = "normal_" + tag + ".pfm";
        write_pfm(dir / normal_name, w, h, 3, normals.data());

        RgbImage rgb(w, h);
        std::copy_n(stack.rgb_data().begin() + static_cast<std::ptrdiff_t>(off), n, rgb.data().begin());
        const std::string rgb_name = "rgb_" + tag + ".png";
        write_png(dir / rgb_name, rgb);

        GrayImage seg(w, h);
        std::copy_n(stack.seg_data().begin() + static_cast<std::ptrdiff_t>(off), n, seg.data().begin());
        const std::string seg_name = "seg_" + tag + ".png";
        write_png(dir / seg_name, seg);

        channels["depth"].push_back(depth_name);
        channels["normal"].push_back(normal_name);
        channels["rgb"].push_back(rgb_name);
        channels["seg"].push_back(seg_name);
    }
    json manifest = {{"schema", kStackSchema},
                     {"camera", camera_to_json(stack.camera())},
                     {"layers", stack.layers()},
                     {"channels", channels}};
    const fs::path out = dir / kStackManifestName;
    write_json(out, manifest);
    return out;
}

PeelStack load_stack(const fs::path& path) {
    const fs::path manifest_path = fs::is_directory(path) ? path / kStackManifestName : path;
    const fs::path dir = manifest_path.parent_path();
    const json m = read_json(manifest_path);
    if (m.value("schema", std::string()) != kStackSchema)
        format_fail(manifest_path, "schema is not peelstack/1");
    const PinholeCamera cam = camera_from_json(m.at("camera"));
    const int layers = m.at("layers").get<int>();
    PeelStack stack(cam, layers);
    const auto& ch = m.at("channels");
    const std::size_t n = stack.texels_per_layer();
    for (const char* key : {"depth", "normal", "rgb", "seg"})
        if (!ch.contains(key) || ch[key].size() != static_cast<std::size_t>(layers))
            format_fail(manifest_path, std::string("channel list '") + key + "' incomplete");

    for (int l = 0; l < layers; ++l) {
        const auto li = static_cast<std::size_t>(l);
        const std::size_t off = n * li;
        int w = 0, h = 0, c = 0;
        auto depth = read_pfm(dir / ch["depth"][li].get<std::string>(), w, h, c);
        if (w != cam.width || h != cam.height || c != 1) format_fail(manifest_path, "depth layer shape");
        std::copy(depth.begin(), depth.end(), stack.depth_data().begin() + static_cast<std::ptrdiff_t>(off));

        auto normal = read_pfm(dir / ch["normal"][li].get<std::string>(), w, h, c);
        if (w != cam.width || h != cam.height || c != 3) format_fail(manifest_path, "normal layer shape");
        for (std::size_t i = 0; i < n; ++i)
            stack.normal_data()[off + i] = Vec3f(normal[3 * i], normal[3 * i + 1], normal[3 * i + 2]);

        const RgbImage rgb = read_png_rgb(dir / ch["rgb"][li].get<std::string>());
        if (rgb.width() != cam.width || rgb.height() != cam.height) format_fail(manifest_path, "rgb layer shape");
        std::copy(rgb.data().begin(), rgb.data().end(), stack.rgb_data().begin() + static_cast<std::ptrdiff_t>(off));

        const GrayImage seg = read_png_gray(dir / ch["seg"][li].get<std::string>());
        if (seg.width() != cam.width || seg.height() != cam.height) format_fail(manifest_path, "seg layer shape");
        std::copy(seg.data().begin(), seg.data().end(), stack.seg_data().begin() + static_cast<std::ptrdiff_t>(off));
    }
    return stack;
}

namespace {

void read_mtl(const fs::path& path, std::map<std::string, ObjMaterial>& out) {
    std::ifstream in(path);
    if (!in) io_fail(path, "cannot open MTL");
    std::string line;
    ObjMaterial* cur = nullptr;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "newmtl") {
            std::string name;
            ls >> name;
            cur = &out[name];
        } else if (tag == "Kd" && cur) {
            double r = 0, g = 0, b = 0;
            ls >> r >> g >> b;
            auto q = [](double v) {
                return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            };
            cur->diffuse = {q(r), q(g), q(b)};
        } else if (tag == "map_Kd" && cur) {
            std::string rest;
            std::getline(ls, rest);
            const auto first = rest.find_first_not_of(" \t");
            cur->texture = first == std::string::npos ? "" : rest.substr(first);
        }
    }
}

// Parses "v", "v/vt", "v//vn", "v/vt/vn" with 1-based or negative indices.
void parse_corner(const std::string& tok, int nv, int nt, int nn, int& v, int& vt, int& vn) {
    v = vt = vn = -1;
    int* slots[3] = {&v, &vt, &vn};
    const int counts[3] = {nv, nt, nn};
    std::size_t start = 0;
    for (int s = 0; s < 3 && start <= tok.size(); ++s) {
        const std::size_t slash = tok.find('/', start);
        const std::string part = tok.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
        if (!part.empty()) {
            const int idx = std::stoi(part);
            *slots[s] = idx > 0 ? idx - 1 : counts[s] + idx;
        }
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
}

}  // namespace

ObjData read_obj(const fs::path& path) {
    std::ifstream in(path);
    if (!in) io_fail(path, "cannot open OBJ");
    ObjData data;
    TriMesh& m = data.mesh;
    std::vector<Vec3> file_normals;
    std::vector<std::array<int, 3>> face_normal_idx;
    std::string current_material;
    std::string line;
    bool any_uv = false;
    bool any_vn = false;
    std::vector<Face> uv_faces;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            double x = 0, y = 0, z = 0;
            ls >> x >> y >> z;
            m.vertices.emplace_back(x, y, z);
        } else if (tag == "vt") {
            double u = 0, v = 0;
            ls >> u >> v;
            m.texcoords.emplace_back(u, v);
        } else if (tag == "vn") {
            double x = 0, y = 0, z = 0;
            ls >> x >> y >> z;
            file_normals.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<std::array<int, 3>> corners;
            std::string tok;
            while (ls >> tok) {
                std::array<int, 3> c{};
                parse_corner(tok, static_cast<int>(m.vertices.size()),
                             static_cast<int>(m.texcoords.size()),
                             static_cast<int>(file_normals.size()), c[0], c[1], c[2]);
                corners.push_back(c);
            }
            if (corners.size() < 3) format_fail(path, "face with fewer than 3 corners");
            for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
                const auto& a = corners[0];
                const auto& b = corners[k];
                const auto& c = corners[k + 1];
                m.faces.push_back({a[0], b[0], c[0]});
                uv_faces.push_back({a[1], b[1], c[1]});
                face_normal_idx.push_back({a[2], b[2], c[2]});
                any_uv = any_uv || (a[1] >= 0 && b[1] >= 0 && c[1] >= 0);
                any_vn = any_vn || (a[2] >= 0);
                data.face_material.push_back(current_material);
            }
        } else if (tag == "usemtl") {
            ls >> current_material;
        } else if (tag == "mtllib") {
            std::string rest;
            std::getline(ls, rest);
            const auto first = rest.find_first_not_of(" \t");
            if (first != std::string::npos) {
                const fs::path mtl = path.parent_path() / rest.substr(first);
                if (fs::exists(mtl)) read_mtl(mtl, data.materials);
            }
        }
    }
    if (any_uv) {
        for (const Face& f : uv_faces)
            if (f[0] < 0 || f[1] < 0 || f[2] < 0) format_fail(path, "mixed faces with and without uv");
        m.face_texcoords = std::move(uv_faces);
    } else {
        m.texcoords.clear();
    }
    if (any_vn && !file_normals.empty()) {
        // Per-vertex normals: last writer wins for vertices referenced with several normals.
        m.normals.assign(m.vertices.size(), Vec3::Zero());
        for (std::size_t f = 0; f < m.faces.size(); ++f)
            for (int k = 0; k < 3; ++k)
                if (face_normal_idx[f][k] >= 0)
                    m.normals[static_cast<std::size_t>(m.faces[f][k])] =
                        file_normals[static_cast<std::size_t>(face_normal_idx[f][k])].normalized();
    }
    if (!data.materials.empty()) {
        m.face_colors.resize(m.faces.size());
        for (std::size_t f = 0; f < m.faces.size(); ++f) {
            auto it = data.materials.find(data.face_material[f]);
            m.face_colors[f] = it != data.materials.end() ? it->second.diffuse : Rgb8{200, 200, 200};
        }
        for (const auto& [name, mat] : data.materials) {
            if (mat.texture.empty()) continue;
            const fs::path tex = path.parent_path() / mat.texture;
            if (!fs::exists(tex)) continue;
            m.texture = std::make_shared<RgbImage>(read_png_rgb(tex));
            m.texture_name = mat.texture;
            break;
        }
    }
    return data;
}

std::vector<std::uint8_t> labels_from_materials(const io::ObjData& obj) {
    std::vector<std::uint8_t> labels(obj.mesh.faces.size(), 0);
    for (std::size_t f = 0; f < labels.size(); ++f) {
        const std::string& m = obj.face_material[f];
        if (m.rfind("label_", 0) != 0)
            throw Error(ErrorCode::Format, "face material '" + m + "' does not carry a label");
        const int v = std::stoi(m.substr(6));
        if (v < 1 || v > 255) throw Error(ErrorCode::Format, "label out of range in material '" + m + "'");
        labels[f] = static_cast<std::uint8_t>(v);
    }
    return labels;
}

void write_obj(const fs::path& path, const TriMesh& mesh, const ObjWriteOptions& options) {
    std::ofstream out(path);
    if (!out) io_fail(path, "cannot write OBJ");
    out.precision(17);
    const bool uv = mesh.has_uv();
    const bool vn = mesh.normals.size() == mesh.vertices.size() && !mesh.normals.empty();
    const bool labels = options.label_materials && mesh.face_labels.size() == mesh.faces.size();
    const bool textured = mesh.texture && !mesh.texture_name.empty();
    const bool need_mtl = labels || textured || !mesh.face_colors.empty();
    const std::string mtl_name = path.stem().string() + ".mtl";

    if (need_mtl) out << "mtllib " << mtl_name << "\n";
    for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << "\n";
    if (uv)
        for (const Vec2& t : mesh.texcoords) out << "vt " << t.x() << ' ' << t.y() << "\n";
    if (vn)
        for (const Vec3& n : mesh.normals) out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << "\n";

    // Faces grouped by material, preserving face order within each group.
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> group_order;
    std::map<std::string, Rgb8> group_color;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        std::string name = labels ? "label_" + std::to_string(mesh.face_labels[f]) : "material0";
        if (!groups.count(name)) {
            group_order.push_back(name);
            group_color[name] = mesh.face_colors.size() == mesh.faces.size() ? mesh.face_colors[f]
                                                                             : Rgb8{200, 200, 200};
        }
        groups[name].push_back(f);
    }
    for (const std::string& name : group_order) {
        if (need_mtl) out << "usemtl " << name << "\n";
        for (std::size_t f : groups[name]) {
            out << 'f';
            for (int k = 0; k < 3; ++k) {
                out << ' ' << mesh.faces[f][k] + 1;
                if (uv || vn) out << '/';
                if (uv) out << mesh.face_texcoords[f][k] + 1;
                if (vn) out << '/' << mesh.faces[f][k] + 1;
            }
            out << "\n";
        }
    }
    if (!out) io_fail(path, "write failed");

    if (need_mtl) {
        std::ofstream mtl(path.parent_path() / mtl_name);
        if (!mtl) io_fail(path.parent_path() / mtl_name, "cannot write MTL");
        mtl.precision(9);
        for (const std::string& name : group_order) {
            const Rgb8 c = group_color[name];
            mtl << "newmtl " << name << "\n"
                << "Kd " << c[0] / 255.0 << ' ' << c[1] / 255.0 << ' ' << c[2] / 255.0 << "\n";
            if (textured) mtl << "map_Kd " << mesh.texture_name << "\n";
            mtl << "\n";
        }
        if (textured && options.write_texture)
            write_png(path.parent_path() / mesh.texture_name, *mesh.texture);
    }
}

void write_ply(const fs::path& path, const LabeledPointCloud& cloud) {
    std::ofstream out(path);
    if (!out) io_fail(path, "cannot write PLY");
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property double nx\nproperty double ny\nproperty double nz\n"
        << "property uchar label\nproperty uchar layer\nend_header\n";
    out.precision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        const Vec3& n = cloud.normals[i];
        out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' ' << n.y() << ' ' << n.z()
            << ' ' << static_cast<int>(cloud.labels[i]) << ' ' << cloud.layer_ids[i] << "\n";
    }
    if (!out) io_fail(path, "write failed");
}

LabeledPointCloud read_ply(const fs::path& path) {
    std::ifstream in(path);
    if (!in) io_fail(path, "cannot open PLY");
    std::string line;
    std::size_t count = 0;
    bool ascii = false;
    while (std::getline(in, line)) {
        if (line.rfind("format ascii", 0) == 0) ascii = true;
        if (line.rfind("element vertex", 0) == 0) count = std::stoul(line.substr(15));
        if (line == "end_header") break;
    }
    if (!ascii) format_fail(path, "only ASCII PLY is supported");
    LabeledPointCloud cloud;
    for (std::size_t i = 0; i < count; ++i) {
        double x, y, z, nx, ny, nz;
        int label, layer;
        if (!(in >> x >> y >> z >> nx >> ny >> nz >> label >> layer)) format_fail(path, "truncated vertex list");
        cloud.push_back(Vec3(x, y, z), Vec3(nx, ny, nz), static_cast<std::uint8_t>(label), layer, PixelRef{layer, -1, -1});
    }
    return cloud;
}

fs::path layer_tags_path(const fs::path& obj_path) {
    fs::path p = obj_path;
    p.replace_extension(".layers.json");
    return p;
}

void write_layer_tags(const fs::path& path, const LayeredMesh& mesh) {
    json sources = json::array();
    for (const auto& s : mesh.vertex_source) {
        if (s) sources.push_back({s->layer, s->x, s->y});
        else sources.push_back(nullptr);
    }
    write_json(path, {{"schema", "layeredmesh/1"},
                      {"fill_tag", kFillLayer},
                      {"vertex_layer", mesh.vertex_layer},
                      {"vertex_source", sources}});
}

std::vector<int> read_layer_tags(const fs::path& path) {
    const json j = read_json(path);
    if (j.value("schema", std::string()) != "layeredmesh/1") format_fail(path, "schema is not layeredmesh/1");
    return j.at("vertex_layer").get<std::vector<int>>();
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) io_fail(path, "cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        format_fail(path, e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) io_fail(path, "cannot write");
    out << j.dump(2) << "\n";
    if (!out) io_fail(path, "write failed");
}

}  // namespace peel::io
