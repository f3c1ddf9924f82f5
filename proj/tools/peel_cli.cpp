// Command line front end: one subcommand per pipeline stage plus roundtrip,
// fixture generation and manifest verification.

#include "peel/error.hpp"
#include "peel/fixtures.hpp"
#include "peel/io.hpp"
#include "peel/manifest.hpp"
#include "peel/metrics.hpp"
#include "peel/pipeline.hpp"
#include "peel/render.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace peel;

namespace {

enum Exit { kPass = 0, kThresholdFailure = 1, kInputError = 2, kInternalError = 3 };

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonDiskTopology:
        case ErrorCode::FlippedTriangles:
        case ErrorCode::SolverSingular:
        case ErrorCode::CannotFit:
        case ErrorCode::NoBoundary:
            return kInternalError;
        default:
            return kInputError;
    }
}

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Records one stage in the run manifest of `dir`, replacing a previous run of the same key.
void record(const fs::path& dir, const std::string& key, const std::vector<fs::path>& inputs,
            const std::vector<fs::path>& outputs, const json& params, double seconds) {
    RunManifest m = RunManifest::open((dir.empty() ? fs::path(".") : dir) / kRunManifestName);
    m.record(key, inputs, outputs, params, seconds);
    m.save();
}

std::vector<fs::path> existing(std::vector<fs::path> paths) {
    std::erase_if(paths, [](const fs::path& p) { return !fs::is_regular_file(p); });
    return paths;
}

/// Files a fixture directory or OBJ references, for manifests.
std::vector<fs::path> scene_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != kRunManifestName) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<fs::path> obj_files(const fs::path& obj) {
    fs::path mtl = obj;
    mtl.replace_extension(".mtl");
    return existing({obj, mtl});
}

fs::path stack_manifest(const fs::path& p) { return fs::is_directory(p) ? p / io::kStackManifestName : p; }

struct Common {
    int threads = 0;
};

struct ThresholdFlags {
    void add(CLI::App* app, Thresholds& t) {
        app->add_option("--p2s-footprints", t.p2s_footprints, "P2S limit in mean pixel footprints");
        app->add_option("--iou-min", t.iou_min, "lowest accepted garment IOU");
        app->add_option("--nre-max", t.nre_max, "largest accepted NRE");
        app->add_option("--texture-match-min", t.texture_match_min, "fraction of FILLED texels matching the source");
        app->add_option("--texture-tolerance", t.texture_tolerance, "per-channel tolerance in 8-bit steps");
        app->add_option("--qc-p90-max", t.qc_p90_max, "largest accepted chart p90 quasi-conformal ratio");
    }
};

Fixture load_scene(const std::string& scene_dir, const std::vector<std::string>& meshes, const std::string& camera,
                   const std::string& labels) {
    if (!scene_dir.empty()) return load_fixture(scene_dir);
    if (meshes.empty() || camera.empty())
        throw Error(ErrorCode::InvalidArgument, "give --scene or --mesh with --camera");
    json label_list;
    if (!labels.empty()) {
        label_list = io::read_json(labels);
        if (!label_list.is_array() || label_list.size() != meshes.size())
            throw Error(ErrorCode::Format, "--labels needs one entry per mesh");
    }
    Fixture fx;
    fx.name = fs::path(meshes.front()).stem().string();
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        io::ObjData d = io::read_obj(meshes[i]);
        if (label_list.is_null()) {
            d.mesh.face_labels = io::labels_from_materials(d);
        } else if (label_list[i].is_number_integer()) {
            d.mesh.face_labels.assign(d.mesh.faces.size(), label_list[i].get<std::uint8_t>());
        } else {
            d.mesh.face_labels = label_list[i].get<std::vector<std::uint8_t>>();
            if (d.mesh.face_labels.size() != d.mesh.faces.size())
                throw Error(ErrorCode::Format, "per-face label list length differs from the face count");
        }
        fx.scene.meshes.push_back(std::move(d.mesh));
    }
    fx.scene.camera = io::load_camera(camera);
    return fx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layered peel rendering, garment reconstruction and texture atlas tools"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags win");
    Common common;
    app.add_option("--threads", common.threads, "worker cap (0 = all cores); results do not depend on it")
        ->check(CLI::NonNegativeNumber);

    // fixture
    auto* fixture_cmd = app.add_subcommand("fixture", "write a procedural test scene");
    std::string fixture_name, texture_name = "checker";
    int fixture_res = 128;
    fs::path fixture_out;
    fixture_cmd->add_option("--name", fixture_name, "sphere | cylinder_skirt | two_garment_mannequin | stacked_planes")
        ->required();
    fixture_cmd->add_option("--resolution", fixture_res, "camera resolution in pixels");
    fixture_cmd->add_option("--texture", texture_name, "constant | checker | stripes");
    fixture_cmd->add_option("--out", fixture_out, "output directory")->required();

    // render
    auto* render_cmd = app.add_subcommand("render", "peel-render a scene into a layer stack");
    std::string render_scene, render_camera;
    std::vector<std::string> render_meshes;
    int render_layers = kDefaultLayers;
    fs::path render_out;
    render_cmd->add_option("--scene", render_scene, "fixture directory (labels.json, camera.json, OBJs)");
    render_cmd->add_option("--mesh", render_meshes, "OBJ with usemtl label_<id> materials (repeatable)");
    render_cmd->add_option("--camera", render_camera, "camera JSON");
    std::string render_labels;
    render_cmd->add_option("--labels", render_labels,
                           "JSON array with one entry per --mesh: a label for every face or a per-face list "
                           "(default: usemtl label_<id> materials)");
    render_cmd->add_option("--layers", render_layers, "peel layers")->check(CLI::Range(1, kMaxLayers));
    render_cmd->add_option("--out", render_out, "stack directory")->required();

    // reconstruct
    auto* recon_cmd = app.add_subcommand("reconstruct", "rebuild one garment mesh from a stack");
    std::string recon_stack, recon_fill, recon_cloud;
    int recon_label = 0;
    fs::path recon_out;
    ReconstructOptions recon_opts;
    bool no_stitch = false;
    recon_cmd->add_option("--stack", recon_stack, "stack directory or manifest")->required();
    recon_cmd->add_option("--label", recon_label, "garment label")->required()->check(CLI::Range(1, 255));
    recon_cmd->add_option("--out", recon_out, "output OBJ")->required();
    recon_cmd->add_option("--tau-disc", recon_opts.tau_disc, "depth discontinuity threshold");
    recon_cmd->add_option("--eps-weld", recon_opts.eps_weld, "weld distance");
    recon_cmd->add_option("--max-bridge", recon_opts.max_bridge, "largest gap stitched");
    recon_cmd->add_flag("--no-stitch", no_stitch, "skip gap stitching");
    recon_cmd->add_option("--fill-mesh", recon_fill, "external OBJ appended as FILL geometry");
    recon_cmd->add_option("--out-cloud", recon_cloud, "also write the garment point cloud (PLY)");

    // unwrap
    auto* unwrap_cmd = app.add_subcommand("unwrap", "cut, flatten and pack a reconstructed mesh");
    std::string unwrap_mesh, unwrap_tags;
    int unwrap_res = 1024, unwrap_gutter = 2;
    fs::path unwrap_out;
    unwrap_cmd->add_option("--mesh", unwrap_mesh, "OBJ with a .layers.json sidecar")->required();
    unwrap_cmd->add_option("--layer-tags", unwrap_tags, "layer tag file (default: the sidecar)");
    unwrap_cmd->add_option("--resolution", unwrap_res, "atlas resolution");
    unwrap_cmd->add_option("--gutter", unwrap_gutter, "gutter texels");
    unwrap_cmd->add_option("--out", unwrap_out, "output directory")->required();

    // bake
    auto* bake_cmd = app.add_subcommand("bake", "bake, inpaint and dilate a texture atlas");
    std::string bake_layout, bake_mesh, bake_stack, bake_patch, bake_mode = "exemplar";
    std::optional<int> bake_res;
    fs::path bake_out, bake_mask, bake_obj;
    PipelineParams bake_params;
    bake_cmd->add_option("--atlas-layout", bake_layout, "atlas.json from unwrap")->required();
    bake_cmd->add_option("--mesh", bake_mesh, "unwrapped.obj from unwrap")->required();
    bake_cmd->add_option("--stack", bake_stack, "stack directory or manifest")->required();
    bake_cmd->add_option("--resolution", bake_res, "must match the atlas layout");
    bake_cmd->add_option("--tau-z", bake_params.bake.depth_tolerance, "depth agreement in pixel footprints");
    bake_cmd->add_option("--inpaint", bake_mode, "diffusion | exemplar | patch_tile");
    bake_cmd->add_option("--patch", bake_patch, "patch PNG for patch_tile");
    bake_cmd->add_option("--seed", bake_params.inpaint_options.seed, "exemplar RNG seed");
    bake_cmd->add_option("--out", bake_out, "final texture PNG")->required();
    bake_cmd->add_option("--out-mask", bake_mask, "validity mask PNG (0 outside, 128 unfilled, 255 filled)");
    bake_cmd->add_option("--out-obj", bake_obj, "textured OBJ referencing the texture");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "metrics between a prediction and ground truth");
    std::string pred_mesh, gt_mesh, pred_stack, gt_stack;
    std::vector<int> eval_classes;
    std::optional<int> gt_label;
    std::optional<double> p2s_max;
    double iou_min = Thresholds{}.iou_min, nre_max = Thresholds{}.nre_max;
    fs::path eval_report;
    eval_cmd->add_option("--pred-mesh", pred_mesh, "predicted OBJ");
    eval_cmd->add_option("--gt-mesh", gt_mesh, "ground-truth OBJ");
    eval_cmd->add_option("--gt-label", gt_label, "restrict the ground-truth mesh to one label");
    eval_cmd->add_option("--pred-stack", pred_stack, "predicted stack");
    eval_cmd->add_option("--gt-stack", gt_stack, "ground-truth stack");
    eval_cmd->add_option("--classes", eval_classes, "labels for per-class IOU, e.g. 5,9")->delimiter(',');
    eval_cmd->add_option("--p2s-max", p2s_max, "absolute P2S limit (default: 2 mean footprints of --gt-stack)");
    eval_cmd->add_option("--iou-min", iou_min, "lowest accepted IOU");
    eval_cmd->add_option("--nre-max", nre_max, "largest accepted NRE");
    eval_cmd->add_option("--report", eval_report, "report JSON")->required();

    // roundtrip
    auto* rt_cmd = app.add_subcommand("roundtrip", "render, reconstruct, unwrap, bake and evaluate a scene");
    std::string rt_fixture, rt_scene, rt_texture = "checker", rt_mode = "exemplar", rt_patch;
    int rt_res = 128;
    fs::path rt_out;
    PipelineParams rt_params;
    bool rt_no_stitch = false, rt_no_inspect = false;
    ThresholdFlags rt_thresholds;
    rt_cmd->add_option("--fixture", rt_fixture, "procedural fixture name");
    rt_cmd->add_option("--scene", rt_scene, "fixture directory");
    rt_cmd->add_option("--resolution", rt_res, "fixture camera resolution");
    rt_cmd->add_option("--texture", rt_texture, "fixture texture: constant | checker | stripes");
    rt_cmd->add_option("--layers", rt_params.layers, "peel layers")->check(CLI::Range(1, kMaxLayers));
    rt_cmd->add_option("--tau-disc", rt_params.reconstruct.tau_disc, "depth discontinuity threshold");
    rt_cmd->add_option("--eps-weld", rt_params.reconstruct.eps_weld, "weld distance");
    rt_cmd->add_option("--max-bridge", rt_params.reconstruct.max_bridge, "largest gap stitched");
    rt_cmd->add_flag("--no-stitch", rt_no_stitch, "skip gap stitching");
    rt_cmd->add_option("--atlas-resolution", rt_params.atlas_resolution, "atlas resolution");
    rt_cmd->add_option("--gutter", rt_params.gutter, "gutter texels");
    rt_cmd->add_option("--tau-z", rt_params.bake.depth_tolerance, "depth agreement in pixel footprints");
    rt_cmd->add_option("--inpaint", rt_mode, "diffusion | exemplar | patch_tile");
    rt_cmd->add_option("--patch", rt_patch, "patch PNG for patch_tile");
    rt_cmd->add_option("--seed", rt_params.inpaint_options.seed, "exemplar RNG seed");
    rt_cmd->add_flag("--no-inspect", rt_no_inspect, "skip inspection PNGs");
    rt_cmd->add_flag("--corrupt-stack", rt_params.corrupt_stack, "fault injection: break layer order at one texel");
    rt_cmd->add_option("--out", rt_out, "output directory")->required();
    rt_thresholds.add(rt_cmd, rt_params.thresholds);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "rehash every artifact listed in a run manifest");
    fs::path verify_path;
    verify_cmd->add_option("--manifest", verify_path, "run manifest or the directory holding it")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kInputError;
    }

    try {
        Timer timer;
        if (fixture_cmd->parsed()) {
            const Fixture fx = make_fixture(fixture_name, fixture_res, parse_texture_pattern(texture_name));
            write_fixture(fx, fixture_out);
            record(fixture_out, "fixture", {}, scene_files(fixture_out),
                   {{"name", fixture_name}, {"resolution", fixture_res}, {"texture", texture_name}}, timer.seconds());
            std::cout << fixture_out.string() << "\n";
            return kPass;
        }

        if (render_cmd->parsed()) {
            const Fixture fx = load_scene(render_scene, render_meshes, render_camera, render_labels);
            RenderOptions ro;
            ro.layers = render_layers;
            ro.threads = common.threads;
            const PeelStack stack = peel_render(fx.scene, ro);
            const auto violations = validate_stack(stack);
            io::save_stack(render_out, stack);
            std::vector<fs::path> inputs;
            if (!render_scene.empty()) {
                inputs = scene_files(render_scene);
            } else {
                for (const auto& m : render_meshes)
                    for (const auto& p : obj_files(m)) inputs.push_back(p);
                inputs.push_back(render_camera);
                if (!render_labels.empty()) inputs.push_back(render_labels);
            }
            std::vector<fs::path> outputs;
            for (const auto& e : fs::directory_iterator(render_out))
                if (e.is_regular_file() && e.path().filename() != kRunManifestName) outputs.push_back(e.path());
            std::sort(outputs.begin(), outputs.end());
            record(render_out, "render", inputs, outputs, {{"layers", render_layers}}, timer.seconds());
            std::cout << json({{"valid_texels", stack.valid_count()}, {"violations", violations.size()}}).dump() << "\n";
            return violations.empty() ? kPass : kThresholdFailure;
        }

        if (recon_cmd->parsed()) {
            const PeelStack stack = io::load_stack(recon_stack);
            recon_opts.stitch = !no_stitch;
            recon_opts.threads = common.threads;
            const auto label = static_cast<std::uint8_t>(recon_label);
            ReconstructResult r = reconstruct_garment(stack, label, recon_opts);
            LayeredMesh mesh = r.mesh;
            std::vector<fs::path> inputs = {stack_manifest(recon_stack)};
            if (!recon_fill.empty()) {
                io::ObjData fill = io::read_obj(recon_fill);
                mesh = merge_fill_mesh(mesh, fill.mesh, r.eps_weld);
                inputs.push_back(recon_fill);
            }
            if (!recon_out.parent_path().empty()) fs::create_directories(recon_out.parent_path());
            io::write_obj(recon_out, mesh.mesh);
            io::write_layer_tags(io::layer_tags_path(recon_out), mesh);
            std::vector<fs::path> outputs = obj_files(recon_out);
            outputs.push_back(io::layer_tags_path(recon_out));
            if (!recon_cloud.empty()) {
                io::write_ply(recon_cloud, extract_garment(backproject(stack), label));
                outputs.push_back(recon_cloud);
            }
            const json params = {{"label", recon_label},
                                 {"tau_disc", r.tau_disc},
                                 {"eps_weld", r.eps_weld},
                                 {"max_bridge", r.max_bridge},
                                 {"stitch", recon_opts.stitch}};
            record(recon_out.parent_path(), "reconstruct:" + recon_out.filename().string(), inputs, outputs, params,
                   timer.seconds());
            std::cout << json({{"vertices", mesh.mesh.vertices.size()},
                               {"faces", mesh.mesh.faces.size()},
                               {"boundary_edges_before", r.stitch.boundary_edges_before},
                               {"boundary_edges_after", r.stitch.boundary_edges_after}})
                             .dump()
                      << "\n";
            return kPass;
        }

        if (unwrap_cmd->parsed()) {
            io::ObjData obj = io::read_obj(unwrap_mesh);
            LayeredMesh mesh;
            mesh.mesh = std::move(obj.mesh);
            const fs::path tags = unwrap_tags.empty() ? io::layer_tags_path(unwrap_mesh) : fs::path(unwrap_tags);
            mesh.vertex_layer = io::read_layer_tags(tags);
            if (mesh.vertex_layer.size() != mesh.mesh.vertices.size())
                throw Error(ErrorCode::Format, "layer tags do not match the mesh vertex count");
            mesh.vertex_source.assign(mesh.vertex_layer.size(), std::nullopt);
            const UnwrapResult u = unwrap(mesh, unwrap_res, unwrap_gutter, common.threads);
            fs::create_directories(unwrap_out);
            io::ObjWriteOptions wo;
            wo.label_materials = false;
            io::write_obj(unwrap_out / "unwrapped.obj", atlas_mesh(u.atlas), wo);
            io::write_json(unwrap_out / "atlas.json", atlas_to_json(u.atlas));
            io::write_json(unwrap_out / "seams.json", seams_to_json(u));
            std::vector<fs::path> outputs = {unwrap_out / "unwrapped.obj", unwrap_out / "atlas.json",
                                             unwrap_out / "seams.json"};
            for (std::size_t i = 0; i < u.partitions.size(); ++i) {
                const fs::path p = unwrap_out / ("partition_" + std::to_string(i) + ".obj");
                io::write_obj(p, u.partitions[i].submesh);
                for (const auto& f : obj_files(p)) outputs.push_back(f);
            }
            std::vector<fs::path> inputs = obj_files(unwrap_mesh);
            inputs.push_back(tags);
            record(unwrap_out, "unwrap", inputs, outputs, {{"resolution", unwrap_res}, {"gutter", unwrap_gutter}},
                   timer.seconds());
            std::cout << json({{"partitions", u.partitions.size()},
                               {"charts", u.atlas.charts.size()},
                               {"seam_vertices", u.seams.vertices.size()},
                               {"utilization", u.atlas.utilization()}})
                             .dump()
                      << "\n";
            return kPass;
        }

        if (bake_cmd->parsed()) {
            const json layout = io::read_json(bake_layout);
            const io::ObjData obj = io::read_obj(bake_mesh);
            const UVAtlas atlas = atlas_from_json(layout, obj.mesh);
            if (bake_res && *bake_res != atlas.resolution)
                throw Error(ErrorCode::InvalidArgument, "--resolution differs from the atlas layout");
            const PeelStack stack = io::load_stack(bake_stack);
            bake_params.inpaint = parse_inpaint_mode(bake_mode);
            bake_params.threads = common.threads;
            if (!bake_patch.empty()) bake_params.patch = io::read_png_rgb(bake_patch);
            const TextureResult t = texture_atlas(atlas, stack, bake_params);
            if (!bake_out.parent_path().empty()) fs::create_directories(bake_out.parent_path());
            io::write_png(bake_out, t.texture);
            std::vector<fs::path> outputs = {bake_out};
            if (!bake_mask.empty()) {
                io::write_png(bake_mask, mask_image(t.baked.mask));
                outputs.push_back(bake_mask);
            }
            if (!bake_obj.empty()) {
                TriMesh textured = atlas_mesh(atlas);
                textured.texture = std::make_shared<const RgbImage>(t.texture);
                textured.texture_name = bake_out.filename().string();
                io::ObjWriteOptions wo;
                wo.write_texture = bake_obj.parent_path() != bake_out.parent_path();
                io::write_obj(bake_obj, textured, wo);
                for (const auto& f : obj_files(bake_obj)) outputs.push_back(f);
                if (wo.write_texture) outputs.push_back(bake_obj.parent_path() / textured.texture_name);
            }
            std::vector<fs::path> inputs = {bake_layout, bake_mesh, stack_manifest(bake_stack)};
            if (!bake_patch.empty()) inputs.push_back(bake_patch);
            record(bake_out.parent_path(), "bake:" + bake_out.filename().string(), inputs, outputs,
                   {{"tau_z", bake_params.bake.depth_tolerance},
                    {"inpaint", bake_mode},
                    {"seed", bake_params.inpaint_options.seed}},
                   timer.seconds());
            std::cout << json({{"agreement", t.baked.agreement},
                               {"filled", t.baked.mask.count(TexelState::Filled)},
                               {"unfilled", t.baked.mask.count(TexelState::Unfilled)}})
                             .dump()
                      << "\n";
            return kPass;
        }

        if (eval_cmd->parsed()) {
            json report = {{"schema", "peeleval/1"}};
            json checks = json::object();
            std::vector<fs::path> inputs;
            std::optional<PeelStack> gts, preds;
            if (!gt_stack.empty()) {
                gts = io::load_stack(gt_stack);
                inputs.push_back(stack_manifest(gt_stack));
            }
            if (!pred_stack.empty()) {
                preds = io::load_stack(pred_stack);
                inputs.push_back(stack_manifest(pred_stack));
            }
            if (!pred_mesh.empty() || !gt_mesh.empty()) {
                if (pred_mesh.empty() || gt_mesh.empty())
                    throw Error(ErrorCode::InvalidArgument, "P2S needs both --pred-mesh and --gt-mesh");
                const TriMesh pred = io::read_obj(pred_mesh).mesh;
                io::ObjData gt = io::read_obj(gt_mesh);
                TriMesh surface = gt.mesh;
                if (gt_label) {
                    Scene s;
                    gt.mesh.face_labels = io::labels_from_materials(gt);
                    s.meshes.push_back(gt.mesh);
                    surface = label_submesh(s, static_cast<std::uint8_t>(*gt_label));
                }
                const double v = p2s(surface_samples(pred), surface, common.threads);
                report["p2s"] = v;
                std::optional<double> limit = p2s_max;
                if (!limit && gts) limit = 2.0 * gts->mean_pixel_footprint();
                if (limit) {
                    report["p2s_limit"] = *limit;
                    checks["p2s"] = v <= *limit;
                }
                inputs.push_back(pred_mesh);
                inputs.push_back(gt_mesh);
            }
            if (gts && preds) {
                json ious = json::object();
                for (int c : eval_classes) {
                    const double v = iou(*preds, *gts, static_cast<std::uint8_t>(c));
                    ious[std::to_string(c)] = v;
                    checks["iou_" + std::to_string(c)] = v >= iou_min;
                }
                report["iou"] = ious;
                Image2D<Vec3f> pn(preds->width(), preds->height()), gn(gts->width(), gts->height());
                for (int y = 0; y < preds->height(); ++y)
                    for (int x = 0; x < preds->width(); ++x) pn.at(x, y) = preds->normal(0, x, y);
                for (int y = 0; y < gts->height(); ++y)
                    for (int x = 0; x < gts->width(); ++x) gn.at(x, y) = gts->normal(0, x, y);
                const NreResult n = nre(pn, gn);
                report["nre"] = {{"value", n.value}, {"texels", n.texels}};
                checks["nre"] = n.value <= nre_max;

                int classes = 1;
                for (auto s : preds->seg_data()) classes = std::max(classes, int(s) + 1);
                for (auto s : gts->seg_data()) classes = std::max(classes, int(s) + 1);
                const PeelPrediction pp{*preds, one_hot(preds->seg_data(), classes)};
                const ComponentLosses c = component_losses(pp, *gts, Reduction::Sum);
                report["losses"] = {{"depth", c.depth},
                                    {"seg", c.seg},
                                    {"norm", c.norm},
                                    {"rgb", c.rgb},
                                    {"total", total_loss(c, LossWeights::final_preset())}};
            } else if (!eval_classes.empty()) {
                throw Error(ErrorCode::InvalidArgument, "IOU needs both --pred-stack and --gt-stack");
            }
            bool pass = true;
            for (const auto& [k, v] : checks.items()) pass = pass && v.get<bool>();
            report["checks"] = checks;
            report["pass"] = pass;
            if (!eval_report.parent_path().empty()) fs::create_directories(eval_report.parent_path());
            io::write_json(eval_report, report);
            record(eval_report.parent_path(), "evaluate:" + eval_report.filename().string(), inputs, {eval_report},
                   {{"iou_min", iou_min}, {"nre_max", nre_max}}, timer.seconds());
            std::cout << report.dump() << "\n";
            return pass ? kPass : kThresholdFailure;
        }

        if (rt_cmd->parsed()) {
            if (rt_fixture.empty() == rt_scene.empty())
                throw Error(ErrorCode::InvalidArgument, "give exactly one of --fixture and --scene");
            const Fixture fx = rt_scene.empty() ? make_fixture(rt_fixture, rt_res, parse_texture_pattern(rt_texture))
                                                : load_fixture(rt_scene);
            rt_params.reconstruct.stitch = !rt_no_stitch;
            rt_params.inpaint = parse_inpaint_mode(rt_mode);
            rt_params.threads = common.threads;
            rt_params.write_inspection = !rt_no_inspect;
            if (!rt_patch.empty()) rt_params.patch = io::read_png_rgb(rt_patch);
            const json report = run_roundtrip(fx, rt_params, rt_out);
            std::cout << json({{"report", (rt_out / "report.json").string()},
                               {"pass", report.at("pass")},
                               {"checks", report.at("checks")}})
                             .dump()
                      << "\n";
            return report.at("pass").get<bool>() ? kPass : kThresholdFailure;
        }

        if (verify_cmd->parsed()) {
            const fs::path file = fs::is_directory(verify_path) ? verify_path / kRunManifestName : verify_path;
            if (!fs::exists(file)) throw Error(ErrorCode::Io, "no manifest at " + file.string());
            const RunManifest m = RunManifest::open(file);
            const auto issues = m.verify();
            std::size_t artifacts = 0;
            for (const auto& s : m.stages()) artifacts += s.inputs.size() + s.outputs.size();
            json out = {{"manifest", file.string()}, {"stages", m.stages().size()}, {"artifacts", artifacts},
                        {"issues", json::array()}};
            for (const auto& i : issues)
                out["issues"].push_back({{"stage", i.stage}, {"path", i.path}, {"problem", i.problem}});
            out["ok"] = issues.empty();
            std::cout << out.dump() << "\n";
            return issues.empty() ? kPass : kThresholdFailure;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
    return kInternalError;
}
