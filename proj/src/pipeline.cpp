#include "peel/pipeline.hpp"

#include "peel/bvh.hpp"
#include "peel/io.hpp"
#include "peel/manifest.hpp"
#include "peel/metrics.hpp"
#include "peel/parallel.hpp"
#include "peel/render.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>

namespace peel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::vector<fs::path> files_in(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}


TriMesh filter_faces(const TriMesh& m, const std::function<bool(std::size_t)>& keep) {
    TriMesh out = m;
    out.faces.clear();
    out.face_labels.clear();
    out.face_colors.clear();
    out.face_texcoords.clear();
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        if (!keep(f)) continue;
        out.faces.push_back(m.faces[f]);
        if (m.face_labels.size() == m.faces.size()) out.face_labels.push_back(m.face_labels[f]);
        if (m.face_colors.size() == m.faces.size()) out.face_colors.push_back(m.face_colors[f]);
        if (m.face_texcoords.size() == m.faces.size()) out.face_texcoords.push_back(m.face_texcoords[f]);
    }
    return out;
}

/// Swaps the first two layers at the first texel where both are valid.
void corrupt(PeelStack& stack) {
    for (int y = 0; y < stack.height(); ++y)
        for (int x = 0; x < stack.width(); ++x)
            if (stack.layers() > 1 && stack.valid(0, x, y) && stack.valid(1, x, y)) {
                std::swap(stack.depth(0, x, y), stack.depth(1, x, y));
                return;
            }
    stack.depth(0, 0, 0) = -1.0f;
}

std::size_t flipped_triangles(const UVChart& chart) {
    std::size_t n = 0;
    for (const Face& f : chart.mesh.faces) {
        const Vec2 a = chart.uv[static_cast<std::size_t>(f[0])];
        const Vec2 e1 = chart.uv[static_cast<std::size_t>(f[1])] - a;
        const Vec2 e2 = chart.uv[static_cast<std::size_t>(f[2])] - a;
        n += e1.x() * e2.y() - e1.y() * e2.x() <= 0.0;
    }
    return n;
}

/// Runs pipeline stages, timing each and recording it in the manifest.
class StageRunner {
public:
    explicit StageRunner(RunManifest* manifest) : manifest_(manifest) {}

    struct Record {
        std::vector<fs::path> inputs;
        std::vector<fs::path> outputs;
        json parameters = json::object();
    };

    void run(const std::string& stage, const std::string& key, const std::function<void(Record&)>& fn) {
        Record rec;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn(rec);
        } catch (const Error& e) {
            if (manifest_) {
                const auto keep_existing = [](std::vector<fs::path>& v) {
                    std::erase_if(v, [](const fs::path& p) { return !fs::is_regular_file(p); });
                };
                keep_existing(rec.inputs);
                keep_existing(rec.outputs);
                manifest_->record(key, rec.inputs, rec.outputs, rec.parameters, elapsed(t0), e.what());
                manifest_->save();
            }
            throw StageError(stage, e);
        }
        if (manifest_) {
            manifest_->record(key, rec.inputs, rec.outputs, rec.parameters, elapsed(t0));
            manifest_->save();
        }
    }

private:
    static double elapsed(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    RunManifest* manifest_;
};

}  // namespace

json params_to_json(const PipelineParams& p) {
    const auto& t = p.thresholds;
    return {
        {"layers", p.layers},
        {"tau_disc", optional_number(p.reconstruct.tau_disc)},
        {"eps_weld", optional_number(p.reconstruct.eps_weld)},
        {"max_bridge", optional_number(p.reconstruct.max_bridge)},
        {"stitch", p.reconstruct.stitch},
        {"atlas_resolution", p.atlas_resolution},
        {"gutter", p.gutter},
        {"tau_z", p.bake.depth_tolerance},
        {"min_agreement", p.bake.min_agreement},
        {"inpaint", std::string(to_string(p.inpaint))},
        {"patch_size", p.inpaint_options.patch_size},
        {"pyramid_levels", p.inpaint_options.pyramid_levels},
        {"patchmatch_iterations", p.inpaint_options.iterations},
        {"seed", p.inpaint_options.seed},
        {"dilate_texels", p.dilate_texels},
        {"cg_tolerance", p.flatten.cg_tolerance},
        {"max_residual", p.flatten.max_residual},
        {"max_cone_cuts", p.flatten.max_cone_cuts},
        {"thresholds",
         {{"p2s_footprints", t.p2s_footprints},
          {"iou_min", t.iou_min},
          {"nre_max", t.nre_max},
          {"texture_match_min", t.texture_match_min},
          {"texture_tolerance", t.texture_tolerance},
          {"qc_p90_max", t.qc_p90_max},
          {"lscm_residual_max", t.lscm_residual_max}}},
    };
}

// ---- unwrap ----

UnwrapResult unwrap(const LayeredMesh& mesh, int atlas_resolution, int gutter, int threads,
                    const FlattenOptions& options) {
    UnwrapResult u;
    u.vertex_layer = assign_layers(mesh);
    u.seams = estimate_seams(mesh.mesh, u.vertex_layer);
    u.face_layer = merge_small_partitions(mesh.mesh, u.seams.face_layer);
    if (u.face_layer != u.seams.face_layer) u.seams = seams_from_face_layers(mesh.mesh, u.face_layer);
    u.partitions = split_partitions(mesh.mesh, u.face_layer, u.seams.is_seam, u.vertex_layer);
    u.atlas = pack_atlas(flatten_partitions(u.partitions, threads, options), atlas_resolution, gutter);
    return u;
}

TriMesh atlas_mesh(const UVAtlas& atlas) {
    TriMesh out;
    bool labels = true;
    for (const auto& c : atlas.charts) labels = labels && c.mesh.face_labels.size() == c.mesh.faces.size();
    for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
        const UVChart& chart = atlas.charts[c];
        const int base = static_cast<int>(out.vertices.size());
        for (std::size_t v = 0; v < chart.mesh.vertices.size(); ++v) {
            out.vertices.push_back(chart.mesh.vertices[v]);
            out.texcoords.push_back(atlas.atlas_uv(c, static_cast<int>(v)));
        }
        for (std::size_t f = 0; f < chart.mesh.faces.size(); ++f) {
            const Face& t = chart.mesh.faces[f];
            out.faces.push_back({t[0] + base, t[1] + base, t[2] + base});
            if (labels) out.face_labels.push_back(chart.mesh.face_labels[f]);
        }
    }
    out.face_texcoords = out.faces;
    return out;
}

json atlas_to_json(const UVAtlas& atlas) {
    json charts = json::array();
    std::size_t vbase = 0, fbase = 0;
    for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
        const UVChart& ch = atlas.charts[c];
        const ChartPlacement& p = atlas.placement[c];
        charts.push_back({
            {"partition", ch.partition},
            {"layer", ch.layer},
            {"vertex_begin", vbase},
            {"vertex_count", ch.mesh.vertices.size()},
            {"face_begin", fbase},
            {"face_count", ch.mesh.faces.size()},
            {"scale", p.scale},
            {"translation", vec2_json(p.translation)},
            {"bbox_min", vec2_json(p.bbox_min)},
            {"bbox_max", vec2_json(p.bbox_max)},
            {"texel_rect", {p.texel_x, p.texel_y, p.texel_w, p.texel_h}},
            {"pinned", ch.pinned},
            {"residual", ch.residual},
            {"iterations", ch.iterations},
            {"direct_solve", ch.direct_solve},
            {"qc_p90", ch.stats.qc_p90},
            {"qc_max", ch.stats.qc_max},
            {"angle_error_max", ch.stats.angle_error_max},
            {"cut_vertices", ch.cut_vertices},
            {"vertex_origin", ch.vertex_origin},
            {"face_origin", ch.face_origin},
        });
        vbase += ch.mesh.vertices.size();
        fbase += ch.mesh.faces.size();
    }
    return {{"schema", kAtlasSchema},
            {"resolution", atlas.resolution},
            {"gutter", atlas.gutter},
            {"utilization", atlas.utilization()},
            {"charts", charts}};
}

UVAtlas atlas_from_json(const json& layout, const TriMesh& mesh) {
    if (layout.value("schema", std::string()) != kAtlasSchema)
        throw Error(ErrorCode::Format, std::string("atlas layout schema is not ") + kAtlasSchema);
    if (!mesh.has_uv()) throw Error(ErrorCode::Format, "unwrapped mesh carries no uv");
    UVAtlas atlas;
    atlas.resolution = layout.at("resolution").get<int>();
    atlas.gutter = layout.at("gutter").get<int>();
    for (const auto& j : layout.at("charts")) {
        const auto vb = j.at("vertex_begin").get<std::size_t>();
        const auto vc = j.at("vertex_count").get<std::size_t>();
        const auto fb = j.at("face_begin").get<std::size_t>();
        const auto fc = j.at("face_count").get<std::size_t>();
        if (vb + vc > mesh.vertices.size() || fb + fc > mesh.faces.size())
            throw Error(ErrorCode::Format, "atlas layout does not match the mesh");
        UVChart ch;
        ch.partition = j.value("partition", -1);
        ch.layer = j.at("layer").get<int>();
        ch.uv.resize(vc);
        ch.mesh.vertices.assign(mesh.vertices.begin() + static_cast<std::ptrdiff_t>(vb),
                                mesh.vertices.begin() + static_cast<std::ptrdiff_t>(vb + vc));
        std::vector<char> seen(vc, 0);
        for (std::size_t f = fb; f < fb + fc; ++f) {
            Face t{};
            for (int k = 0; k < 3; ++k) {
                const int v = mesh.faces[f][k] - static_cast<int>(vb);
                if (v < 0 || v >= static_cast<int>(vc))
                    throw Error(ErrorCode::Format, "chart face references a vertex outside its chart");
                t[k] = v;
                ch.uv[static_cast<std::size_t>(v)] = mesh.corner_uv(f, k);
                seen[static_cast<std::size_t>(v)] = 1;
            }
            ch.mesh.faces.push_back(t);
            if (mesh.face_labels.size() == mesh.faces.size()) ch.mesh.face_labels.push_back(mesh.face_labels[f]);
        }
        for (std::size_t v = 0; v < vc; ++v)
            if (!seen[v]) ch.uv[v] = mesh.texcoords[std::min(vb + v, mesh.texcoords.size() - 1)];
        if (j.contains("vertex_origin")) ch.vertex_origin = j["vertex_origin"].get<std::vector<int>>();
        if (j.contains("face_origin")) ch.face_origin = j["face_origin"].get<std::vector<int>>();
        ch.residual = j.value("residual", 0.0);
        ch.stats = distortion_stats(ch.mesh, ch.uv);

        ChartPlacement p;
        const auto rect = j.at("texel_rect").get<std::vector<int>>();
        if (rect.size() != 4) throw Error(ErrorCode::Format, "texel_rect needs four entries");
        p.texel_x = rect[0];
        p.texel_y = rect[1];
        p.texel_w = rect[2];
        p.texel_h = rect[3];
        p.bbox_min = vec2_from(j.at("bbox_min"));
        p.bbox_max = vec2_from(j.at("bbox_max"));
        atlas.charts.push_back(std::move(ch));
        atlas.placement.push_back(p);
    }
    return atlas;
}

json seams_to_json(const UnwrapResult& u) {
    json parts = json::array();
    for (const Partition& p : u.partitions) {
        std::size_t seam = 0;
        for (char s : p.is_seam) seam += s != 0;
        parts.push_back({{"layer", p.layer},
                         {"faces", p.submesh.faces.size()},
                         {"vertices", p.submesh.vertices.size()},
                         {"seam_vertices", seam},
                         {"face_origin", p.face_origin}});
    }
    return {{"schema", kSeamsSchema},
            {"vertex_layer", u.vertex_layer},
            {"face_layer", u.face_layer},
            {"seam_vertices", u.seams.vertices},
            {"partitions", parts}};
}

// ---- texture ----

GrayImage mask_image(const ValidityMask& mask) {
    GrayImage g(mask.width(), mask.height(), 0);
    for (std::size_t i = 0; i < g.data().size(); ++i) {
        const TexelState s = mask.state.data()[i];
        g.data()[i] = s == TexelState::Filled ? 255 : s == TexelState::Unfilled ? 128 : 0;
    }
    return g;
}

TextureResult texture_atlas(const UVAtlas& atlas, const PeelStack& stack, const PipelineParams& params) {
    BakeOptions bo = params.bake;
    bo.threads = params.threads;
    TextureResult r;
    r.baked = bake(atlas, stack, bo);
    r.texture = inpaint(r.baked.texture, r.baked.mask, params.inpaint, params.patch ? &*params.patch : nullptr,
                        params.inpaint_options);
    dilate_gutter(r.texture, r.baked.mask, params.dilate_texels);
    return r;
}

TextureCheck check_texture(const BakeResult& baked, const Scene& scene, std::uint8_t label, int tolerance,
                           int threads) {
    std::vector<TriangleBvh::Triangle> tris;
    for (std::size_t m = 0; m < scene.meshes.size(); ++m) {
        const TriMesh& mesh = scene.meshes[m];
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            if (mesh.face_labels.size() == mesh.faces.size() && mesh.face_labels[f] != label) continue;
            const Face& t = mesh.faces[f];
            tris.push_back({mesh.vertices[static_cast<std::size_t>(t[0])], mesh.vertices[static_cast<std::size_t>(t[1])],
                            mesh.vertices[static_cast<std::size_t>(t[2])], static_cast<int>(m), static_cast<int>(f)});
        }
    }
    TextureCheck out;
    if (tris.empty()) return out;
    const TriangleBvh bvh(std::move(tris));
    const int w = baked.mask.width();
    const int h = baked.mask.height();
    std::vector<std::size_t> filled(static_cast<std::size_t>(h), 0), matched(static_cast<std::size_t>(h), 0);
    std::vector<double> err(static_cast<std::size_t>(h), 0.0);
    parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t y) {
        KahanSum e;
        for (int x = 0; x < w; ++x) {
            if (baked.mask.state.at(x, static_cast<int>(y)) != TexelState::Filled) continue;
            const ClosestPoint cp = bvh.closest(baked.position.at(x, static_cast<int>(y)));
            const auto& t = bvh.triangle(cp.prim);
            const Rgb8 want = surface_color(scene.meshes[static_cast<std::size_t>(t.mesh)], t.face, cp.bary, false);
            const Rgb8 got = baked.texture.at(x, static_cast<int>(y));
            bool ok = true;
            for (int c = 0; c < 3; ++c) {
                const int d = std::abs(int(want[c]) - int(got[c]));
                ok = ok && d <= tolerance;
                e.add(d / 255.0);
            }
            ++filled[y];
            matched[y] += ok;
        }
        err[y] = e.value();
    });
    KahanSum e;
    for (std::size_t y = 0; y < filled.size(); ++y) {
        out.filled += filled[y];
        out.matched += matched[y];
        e.add(err[y]);
    }
    if (out.filled) {
        out.match_fraction = static_cast<double>(out.matched) / static_cast<double>(out.filled);
        out.mean_abs_error = e.value() / (3.0 * static_cast<double>(out.filled));
    }
    return out;
}

// ---- round trip ----

std::vector<Vec3> surface_samples(const TriMesh& mesh) {
    std::vector<Vec3> pts = mesh.vertices;
    pts.reserve(mesh.vertices.size() + mesh.faces.size());
    for (const Face& f : mesh.faces)
        pts.push_back((mesh.vertices[static_cast<std::size_t>(f[0])] + mesh.vertices[static_cast<std::size_t>(f[1])] +
                       mesh.vertices[static_cast<std::size_t>(f[2])]) /
                      3.0);
    return pts;
}

TriMesh label_submesh(const Scene& scene, std::uint8_t label) {
    TriMesh out;
    for (const TriMesh& m : scene.meshes) {
        if (m.face_labels.size() != m.faces.size()) continue;
        std::vector<int> remap(m.vertices.size(), -1);
        for (std::size_t f = 0; f < m.faces.size(); ++f) {
            if (m.face_labels[f] != label) continue;
            Face t{};
            for (int k = 0; k < 3; ++k) {
                int& r = remap[static_cast<std::size_t>(m.faces[f][k])];
                if (r < 0) {
                    r = static_cast<int>(out.vertices.size());
                    out.vertices.push_back(m.vertices[static_cast<std::size_t>(m.faces[f][k])]);
                }
                t[k] = r;
            }
            out.faces.push_back(t);
            out.face_labels.push_back(label);
        }
    }
    return out;
}

Scene substitute_garments(const Scene& scene, const std::vector<std::uint8_t>& labels,
                          const std::vector<TriMesh>& reconstructions) {
    const std::set<std::uint8_t> replaced(labels.begin(), labels.end());
    Scene out;
    out.camera = scene.camera;
    for (const TriMesh& m : scene.meshes) {
        const bool labelled = m.face_labels.size() == m.faces.size();
        TriMesh kept = filter_faces(m, [&](std::size_t f) { return !labelled || !replaced.count(m.face_labels[f]); });
        if (!kept.faces.empty()) out.meshes.push_back(std::move(kept));
    }
    for (const TriMesh& r : reconstructions)
        if (!r.faces.empty()) out.meshes.push_back(r);
    return out;
}

json run_roundtrip(const Fixture& fixture, const PipelineParams& params, const fs::path& out_dir) {
    const bool write = !out_dir.empty();
    std::optional<RunManifest> manifest;
    if (write) {
        fs::create_directories(out_dir);
        manifest.emplace(out_dir / kRunManifestName);
    }
    StageRunner runner(manifest ? &*manifest : nullptr);
    const json pjson = params_to_json(params);
    const Thresholds& th = params.thresholds;

    std::vector<fs::path> scene_files;
    runner.run("fixture", "fixture", [&](StageRunner::Record& rec) {
        rec.parameters = {{"name", fixture.name}, {"garment_labels", fixture.garment_labels}};
        if (const auto issues = fixture.scene.validate(); !issues.empty())
            throw Error(ErrorCode::InvalidArgument, "invalid scene: " + issues.front());
        if (write) {
            write_fixture(fixture, out_dir / "scene");
            scene_files = files_in(out_dir / "scene");
            rec.outputs = scene_files;
        }
    });

    PeelStack stack;
    std::size_t violations = 0;
    runner.run("render", "render", [&](StageRunner::Record& rec) {
        rec.inputs = scene_files;
        rec.parameters = {{"layers", params.layers}, {"corrupt_stack", params.corrupt_stack}};
        RenderOptions ro;
        ro.layers = params.layers;
        ro.threads = params.threads;
        stack = peel_render(fixture.scene, ro);
        violations = validate_stack(stack).size();
        if (params.corrupt_stack) corrupt(stack);
        if (write) {
            io::save_stack(out_dir / "stack", stack);
            rec.outputs = files_in(out_dir / "stack");
        }
    });
    const double footprint = stack.mean_pixel_footprint();
    const fs::path stack_manifest = out_dir / "stack" / io::kStackManifestName;

    struct GarmentRun {
        std::uint8_t label = 0;
        ReconstructResult recon;
        UnwrapResult unwrapped;
        TextureResult texture;
    };
    std::vector<GarmentRun> garments;
    for (const std::uint8_t label : fixture.garment_labels) {
        GarmentRun g;
        g.label = label;
        const std::string tag = std::to_string(label);
        const fs::path gdir = out_dir / ("garment_" + tag);
        if (write) fs::create_directories(gdir);

        runner.run("reconstruct", "reconstruct:" + tag, [&](StageRunner::Record& rec) {
            if (write) rec.inputs = {stack_manifest};
            ReconstructOptions ro = params.reconstruct;
            ro.threads = params.threads;
            g.recon = reconstruct_garment(stack, label, ro);
            rec.parameters = {{"label", label},
                              {"tau_disc", g.recon.tau_disc},
                              {"eps_weld", g.recon.eps_weld},
                              {"max_bridge", g.recon.max_bridge},
                              {"stitch", ro.stitch}};
            if (write) {
                io::write_obj(gdir / "mesh.obj", g.recon.mesh.mesh);
                io::write_layer_tags(io::layer_tags_path(gdir / "mesh.obj"), g.recon.mesh);
                rec.outputs = {gdir / "mesh.obj", io::layer_tags_path(gdir / "mesh.obj")};
                if (fs::exists(gdir / "mesh.mtl")) rec.outputs.push_back(gdir / "mesh.mtl");
            }
        });

        runner.run("unwrap", "unwrap:" + tag, [&](StageRunner::Record& rec) {
            if (write) rec.inputs = {gdir / "mesh.obj", io::layer_tags_path(gdir / "mesh.obj")};
            rec.parameters = {{"atlas_resolution", params.atlas_resolution}, {"gutter", params.gutter}};
            g.unwrapped = unwrap(g.recon.mesh, params.atlas_resolution, params.gutter, params.threads, params.flatten);
            if (write) {
                io::ObjWriteOptions wo;
                wo.label_materials = false;
                io::write_obj(gdir / "unwrapped.obj", atlas_mesh(g.unwrapped.atlas), wo);
                io::write_json(gdir / "atlas.json", atlas_to_json(g.unwrapped.atlas));
                io::write_json(gdir / "seams.json", seams_to_json(g.unwrapped));
                rec.outputs = {gdir / "unwrapped.obj", gdir / "atlas.json", gdir / "seams.json"};
            }
        });

        runner.run("bake", "bake:" + tag, [&](StageRunner::Record& rec) {
            if (write) rec.inputs = {gdir / "unwrapped.obj", gdir / "atlas.json", stack_manifest};
            rec.parameters = {{"tau_z", params.bake.depth_tolerance},
                              {"inpaint", std::string(to_string(params.inpaint))},
                              {"seed", params.inpaint_options.seed}};
            g.texture = texture_atlas(g.unwrapped.atlas, stack, params);
            if (write) {
                io::write_png(gdir / "baked.png", g.texture.baked.texture);
                io::write_png(gdir / "mask.png", mask_image(g.texture.baked.mask));
                TriMesh textured = atlas_mesh(g.unwrapped.atlas);
                textured.texture = std::make_shared<const RgbImage>(g.texture.texture);
                textured.texture_name = "texture.png";
                io::write_obj(gdir / "textured.obj", textured);
                rec.outputs = {gdir / "baked.png", gdir / "mask.png", gdir / "textured.obj", gdir / "textured.mtl",
                               gdir / "texture.png"};
            }
        });
        garments.push_back(std::move(g));
    }

    json report;
    runner.run("evaluate", "evaluate", [&](StageRunner::Record& rec) {
        if (write)
            for (const auto& g : garments)
                rec.inputs.push_back(out_dir / ("garment_" + std::to_string(g.label)) / "mesh.obj");
        bool pass = violations == 0;
        json checks = json::object();
        checks["render_monotonic"] = violations == 0;

        json gj = json::array();
        std::vector<TriMesh> recon_meshes;
        for (const auto& g : garments) {
            const TriMesh& rm = g.recon.mesh.mesh;
            recon_meshes.push_back(rm);
            const std::vector<Vec3> pts = surface_samples(rm);
            const TriMesh source = label_submesh(fixture.scene, g.label);
            const auto dist = point_distances(pts, source, params.threads);
            KahanSum sum;
            double dmax = 0.0;
            for (double d : dist) {
                sum.add(d);
                dmax = std::max(dmax, d);
            }
            const double p2s_value = sum.value() / static_cast<double>(dist.size());

            const TextureCheck tc =
                check_texture(g.texture.baked, fixture.scene, g.label, th.texture_tolerance, params.threads);
            const ValidityMask& mask = g.texture.baked.mask;

            json charts = json::array();
            double worst_p90 = 1.0, worst_residual = 0.0;
            std::size_t flips = 0;
            for (const UVChart& c : g.unwrapped.atlas.charts) {
                const std::size_t f = flipped_triangles(c);
                flips += f;
                worst_p90 = std::max(worst_p90, c.stats.qc_p90);
                worst_residual = std::max(worst_residual, c.residual);
                charts.push_back({{"partition", c.partition},
                                  {"layer", c.layer},
                                  {"faces", c.mesh.faces.size()},
                                  {"vertices", c.mesh.vertices.size()},
                                  {"qc_p90", c.stats.qc_p90},
                                  {"qc_max", c.stats.qc_max},
                                  {"angle_error_max", c.stats.angle_error_max},
                                  {"residual", c.residual},
                                  {"direct_solve", c.direct_solve},
                                  {"cut_vertices", c.cut_vertices.size()},
                                  {"flipped", f}});
            }

            const std::string tag = std::to_string(g.label);
            const bool p2s_ok = p2s_value <= th.p2s_footprints * footprint;
            const bool tex_ok = tc.filled == 0 || tc.match_fraction >= th.texture_match_min;
            const bool flip_ok = flips == 0;
            const bool qc_ok = worst_p90 <= th.qc_p90_max;
            const bool res_ok = worst_residual <= th.lscm_residual_max;
            checks["p2s_" + tag] = p2s_ok;
            checks["texture_" + tag] = tex_ok;
            checks["flips_" + tag] = flip_ok;
            checks["qc_p90_" + tag] = qc_ok;
            checks["lscm_residual_" + tag] = res_ok;
            pass = pass && p2s_ok && tex_ok && flip_ok && qc_ok && res_ok;

            std::size_t partition_faces = 0;
            for (const auto& p : g.unwrapped.partitions) partition_faces += p.submesh.faces.size();
            gj.push_back({
                {"label", g.label},
                {"vertices", rm.vertices.size()},
                {"faces", rm.faces.size()},
                {"boundary_edges", count_boundary_edges(rm.faces)},
                {"stitch",
                 {{"boundary_edges_before", g.recon.stitch.boundary_edges_before},
                  {"boundary_edges_after", g.recon.stitch.boundary_edges_after},
                  {"faces_added", g.recon.stitch.faces_added},
                  {"loop_pairs", g.recon.stitch.loop_pairs}}},
                {"tau_disc", g.recon.tau_disc},
                {"eps_weld", g.recon.eps_weld},
                {"max_bridge", g.recon.max_bridge},
                {"p2s", p2s_value},
                {"p2s_max", dmax},
                {"p2s_points", dist.size()},
                {"seam_vertices", g.unwrapped.seams.vertices.size()},
                {"partitions", g.unwrapped.partitions.size()},
                {"partition_faces", partition_faces},
                {"charts", charts},
                {"atlas_utilization", g.unwrapped.atlas.utilization()},
                {"texture",
                 {{"filled", mask.count(TexelState::Filled)},
                  {"unfilled", mask.count(TexelState::Unfilled)},
                  {"outside", mask.count(TexelState::Outside)},
                  {"agreement", g.texture.baked.agreement},
                  {"match_fraction", tc.match_fraction},
                  {"mean_abs_error", tc.mean_abs_error}}},
            });
        }

        RenderOptions ro;
        ro.layers = params.layers;
        ro.threads = params.threads;
        const Scene rescene = substitute_garments(fixture.scene, fixture.garment_labels, recon_meshes);
        const PeelStack restack = peel_render(rescene, ro);
        json ious = json::object();
        for (const auto& [label, name] : fixture.label_names) {
            const double v = iou(restack, stack, label);
            ious[std::to_string(label)] = {{"name", name}, {"iou", v}};
            const bool garment = std::find(fixture.garment_labels.begin(), fixture.garment_labels.end(), label) !=
                                 fixture.garment_labels.end();
            if (garment) {
                const bool ok = v >= th.iou_min;
                checks["iou_" + std::to_string(label)] = ok;
                pass = pass && ok;
            }
        }
        const NreResult n = nre(render_normal_map(rescene, ro), render_normal_map(fixture.scene, ro));
        checks["nre"] = n.value <= th.nre_max;
        pass = pass && n.value <= th.nre_max;

        report = {
            {"schema", kReportSchema},
            {"fixture", fixture.name},
            {"camera", io::camera_to_json(fixture.scene.camera)},
            {"parameters", pjson},
            {"render",
             {{"valid_texels", stack.valid_count()},
              {"violations", violations},
              {"mean_pixel_footprint", footprint}}},
            {"garments", gj},
            {"iou", ious},
            {"nre", {{"value", n.value}, {"texels", n.texels}}},
            {"checks", checks},
            {"pass", pass},
        };
        rec.parameters = pjson;
        if (write) {
            io::write_json(out_dir / "report.json", report);
            rec.outputs = {out_dir / "report.json"};
        }
    });

    if (write && params.write_inspection) {
        runner.run("inspect", "inspect", [&](StageRunner::Record& rec) {
            const fs::path dir = out_dir / "inspect";
            fs::create_directories(dir);
            rec.inputs = {stack_manifest};
            io::write_png(dir / "contact_sheet.png", contact_sheet(stack));
            rec.outputs.push_back(dir / "contact_sheet.png");
            for (const auto& g : garments) {
                const std::string tag = std::to_string(g.label);
                io::write_png(dir / ("uv_wireframe_" + tag + ".png"), uv_wireframe(g.unwrapped.atlas, g.texture.texture));
                io::write_png(dir / ("distortion_" + tag + ".png"), distortion_heatmap(g.unwrapped.atlas));
                rec.outputs.push_back(dir / ("uv_wireframe_" + tag + ".png"));
                rec.outputs.push_back(dir / ("distortion_" + tag + ".png"));
            }
        });
    }
    return report;
}

}  // namespace peel
