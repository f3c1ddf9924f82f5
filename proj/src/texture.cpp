#include "peel/texture.hpp"

#include "peel/error.hpp"
#include "peel/parallel.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace peel {

std::size_t ValidityMask::count(TexelState s) const {
    return static_cast<std::size_t>(std::count(state.data().begin(), state.data().end(), s));
}

ValidityMask uniform_mask(int width, int height, TexelState fill) {
    ValidityMask m;
    m.state = Image2D<TexelState>(width, height, fill);
    m.chart = Image2D<int>(width, height, fill == TexelState::Outside ? -1 : 0);
    m.chart_origin = {{0, 0}};
    return m;
}

Vec2 texel_center_uv(int column, int row, int resolution) {
    const double r = resolution;
    return {(column + 0.5) / r, 1.0 - (row + 0.5) / r};
}

BakeResult bake(const UVAtlas& atlas, const PeelStack& stack, const BakeOptions& options) {
    const int R = atlas.resolution;
    if (R <= 0) throw Error(ErrorCode::InvalidArgument, "atlas has no resolution");
    BakeResult out;
    out.texture = RgbImage(R, R, Rgb8{0, 0, 0});
    out.mask.state = Image2D<TexelState>(R, R, TexelState::Outside);
    out.mask.chart = Image2D<int>(R, R, -1);
    out.position = Image2D<Vec3>(R, R, Vec3::Zero());
    const PinholeCamera& cam = stack.camera();

    const std::size_t nc = atlas.charts.size();
    out.mask.chart_origin.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        const ChartPlacement& p = atlas.placement[c];
        out.mask.chart_origin[c] = {p.texel_x + atlas.gutter, R - (p.texel_y + p.texel_h - atlas.gutter)};
        const int layer = atlas.charts[c].layer;
        if (layer < 1 || layer > stack.layers())
            throw Error(ErrorCode::InvalidArgument, "chart layer " + std::to_string(layer) + " not in the stack");
    }

    std::vector<std::size_t> inside(nc, 0), filled(nc, 0);
    // Chart rectangles are disjoint, so charts can be baked concurrently.
    parallel_for(nc, options.threads, [&](std::size_t c) {
        const UVChart& chart = atlas.charts[c];
        const int l = chart.layer - 1;
        for (const Face& t : chart.mesh.faces) {
            std::array<Vec2, 3> q;
            for (int k = 0; k < 3; ++k) {
                const Vec2 uv = atlas.atlas_uv(c, t[k]);
                q[static_cast<std::size_t>(k)] = Vec2(uv.x() * R - 0.5, (1.0 - uv.y()) * R - 0.5);
            }
            const double area = (q[1] - q[0]).x() * (q[2] - q[0]).y() - (q[1] - q[0]).y() * (q[2] - q[0]).x();
            if (area == 0.0) continue;
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].x(), q[1].x(), q[2].x()}))));
            const int x1 = std::min(R - 1, static_cast<int>(std::ceil(std::max({q[0].x(), q[1].x(), q[2].x()}))));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].y(), q[1].y(), q[2].y()}))));
            const int y1 = std::min(R - 1, static_cast<int>(std::ceil(std::max({q[0].y(), q[1].y(), q[2].y()}))));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    if (out.mask.state.at(x, y) != TexelState::Outside) continue;
                    const Vec2 s(x, y);
                    auto edge = [&](const Vec2& a, const Vec2& b) {
                        return ((b - a).x() * (s - a).y() - (b - a).y() * (s - a).x()) / area;
                    };
                    const double w0 = edge(q[1], q[2]);
                    const double w1 = edge(q[2], q[0]);
                    const double w2 = edge(q[0], q[1]);
                    constexpr double kEdgeSlack = -1e-9;
                    if (w0 < kEdgeSlack || w1 < kEdgeSlack || w2 < kEdgeSlack) continue;
                    const Vec3 pos = w0 * chart.mesh.vertices[static_cast<std::size_t>(t[0])] +
                                     w1 * chart.mesh.vertices[static_cast<std::size_t>(t[1])] +
                                     w2 * chart.mesh.vertices[static_cast<std::size_t>(t[2])];
                    out.mask.chart.at(x, y) = static_cast<int>(c);
                    out.position.at(x, y) = pos;
                    out.mask.state.at(x, y) = TexelState::Unfilled;
                    ++inside[c];
                    const Vec3 pc = cam.to_camera(pos);
                    if (!(pc.z() > cam.znear)) continue;
                    const Projection pr = project(cam, pos);
                    const long px = std::lround(pr.pixel.x());
                    const long py = std::lround(pr.pixel.y());
                    if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
                    const int ix = static_cast<int>(px);
                    const int iy = static_cast<int>(py);
                    if (!stack.valid(l, ix, iy)) continue;
                    const double tol = options.depth_tolerance * cam.pixel_footprint(pr.depth);
                    if (std::abs(static_cast<double>(stack.depth(l, ix, iy)) - pr.depth) > tol) continue;
                    out.texture.at(x, y) = stack.rgb(l, ix, iy);
                    out.mask.state.at(x, y) = TexelState::Filled;
                    ++filled[c];
                }
        }
    });

    std::size_t total_inside = 0, total_filled = 0;
    for (std::size_t c = 0; c < nc; ++c) {
        total_inside += inside[c];
        total_filled += filled[c];
    }
    out.agreement = total_inside ? static_cast<double>(total_filled) / static_cast<double>(total_inside) : 1.0;
    if (total_inside && out.agreement < options.min_agreement)
        throw Error(ErrorCode::CameraMismatch,
                    "only " + std::to_string(total_filled) + " of " + std::to_string(total_inside) +
                        " chart texels agree with the stack");
    return out;
}

InpaintMode parse_inpaint_mode(std::string_view name) {
    if (name == "diffusion") return InpaintMode::Diffusion;
    if (name == "exemplar") return InpaintMode::Exemplar;
    if (name == "patch_tile") return InpaintMode::PatchTile;
    throw Error(ErrorCode::InvalidArgument, "unknown inpaint mode '" + std::string(name) + "'");
}

std::string_view to_string(InpaintMode mode) {
    switch (mode) {
        case InpaintMode::Diffusion: return "diffusion";
        case InpaintMode::Exemplar: return "exemplar";
        case InpaintMode::PatchTile: return "patch_tile";
    }
    return "unknown";
}

namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

RgbImage inpaint_diffusion(const RgbImage& image, const ValidityMask& mask) {
    const int W = mask.width();
    const int H = mask.height();
    Image2D<int> var(W, H, -1);
    int n = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (mask.state.at(x, y) == TexelState::Unfilled) var.at(x, y) = n++;
    RgbImage out = image;
    if (n == 0) return out;

    // Every unfilled region needs a Dirichlet value somewhere.
    Image2D<char> seen(W, H, 0);
    std::vector<std::array<int, 2>> queue;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (var.at(x, y) < 0 || seen.at(x, y)) continue;
            bool anchored = false;
            queue.assign(1, {x, y});
            seen.at(x, y) = 1;
            for (std::size_t h = 0; h < queue.size(); ++h) {
                const auto [cx, cy] = queue[h];
                for (int k = 0; k < 4; ++k) {
                    const int nx = cx + kDx[k], ny = cy + kDy[k];
                    if (!mask.state.contains(nx, ny)) continue;
                    const TexelState s = mask.state.at(nx, ny);
                    if (s == TexelState::Filled) anchored = true;
                    if (s == TexelState::Unfilled && !seen.at(nx, ny)) {
                        seen.at(nx, ny) = 1;
                        queue.push_back({nx, ny});
                    }
                }
            }
            if (!anchored)
                throw Error(ErrorCode::NoBoundary, "unfilled region at (" + std::to_string(x) + ", " +
                                                       std::to_string(y) + ") touches no filled texel");
        }

    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int i = var.at(x, y);
            if (i < 0) continue;
            double diag = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx[k], ny = y + kDy[k];
                if (!mask.state.contains(nx, ny)) continue;
                const TexelState s = mask.state.at(nx, ny);
                if (s == TexelState::Outside) continue;  // zero-flux across the chart border
                diag += 1.0;
                if (s == TexelState::Unfilled) {
                    triplets.emplace_back(i, var.at(nx, ny), -1.0);
                } else {
                    const Rgb8& c = image.at(nx, ny);
                    for (int ch = 0; ch < 3; ++ch) rhs(i, ch) += c[static_cast<std::size_t>(ch)];
                }
            }
            triplets.emplace_back(i, i, diag);
        }
    Eigen::SparseMatrix<double> L(n, n);
    L.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::NoBoundary, "diffusion system is singular");
    const Eigen::MatrixXd sol = solver.solve(rhs);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int i = var.at(x, y);
            if (i < 0) continue;
            out.at(x, y) = {to_u8(sol(i, 0)), to_u8(sol(i, 1)), to_u8(sol(i, 2))};
        }
    return out;
}

RgbImage inpaint_patch_tile(const RgbImage& image, const ValidityMask& mask, const RgbImage& patch) {
    RgbImage out = image;
    const int pw = patch.width();
    const int ph = patch.height();
    auto wrap = [](int v, int m) { return ((v % m) + m) % m; };
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.state.at(x, y) != TexelState::Unfilled) continue;
            const int c = mask.chart.at(x, y);
            const auto origin = c >= 0 && static_cast<std::size_t>(c) < mask.chart_origin.size()
                                    ? mask.chart_origin[static_cast<std::size_t>(c)]
                                    : std::array<int, 2>{0, 0};
            out.at(x, y) = patch.at(wrap(x - origin[0], pw), wrap(y - origin[1], ph));
        }
    return out;
}

// ---- exemplar synthesis ----

using Color = Eigen::Vector3d;

struct Level {
    int w = 0;
    int h = 0;
    std::vector<Color> color;
    std::vector<char> known;   // filled source texel
    std::vector<char> target;  // texel to synthesize
    std::vector<char> inside;  // not outside every chart

    std::size_t at(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); }
};

Level downsample(const Level& f) {
    Level c;
    c.w = (f.w + 1) / 2;
    c.h = (f.h + 1) / 2;
    const std::size_t n = static_cast<std::size_t>(c.w) * static_cast<std::size_t>(c.h);
    c.color.assign(n, Color::Zero());
    c.known.assign(n, 0);
    c.target.assign(n, 0);
    c.inside.assign(n, 0);
    for (int y = 0; y < c.h; ++y)
        for (int x = 0; x < c.w; ++x) {
            Color sum = Color::Zero();
            int known = 0;
            bool target = false, inside = false;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const int fx = 2 * x + dx, fy = 2 * y + dy;
                    if (fx >= f.w || fy >= f.h) continue;
                    const std::size_t i = f.at(fx, fy);
                    inside = inside || f.inside[i];
                    target = target || f.target[i];
                    if (f.known[i]) {
                        sum += f.color[i];
                        ++known;
                    }
                }
            const std::size_t i = c.at(x, y);
            c.inside[i] = inside;
            if (known > 0 && !target) {
                c.known[i] = 1;
                c.color[i] = sum / known;
            } else if (target) {
                c.target[i] = 1;
            }
        }
    return c;
}

// Breadth-first onion fill of target texels from known ones.
void onion_fill(Level& lv) {
    std::vector<std::size_t> frontier;
    std::vector<char> done(lv.color.size(), 0);
    Color mean = Color::Zero();
    std::size_t known = 0;
    for (std::size_t i = 0; i < lv.color.size(); ++i)
        if (lv.known[i]) {
            done[i] = 1;
            mean += lv.color[i];
            ++known;
        }
    if (known) mean /= static_cast<double>(known);
    for (;;) {
        frontier.clear();
        for (int y = 0; y < lv.h; ++y)
            for (int x = 0; x < lv.w; ++x) {
                const std::size_t i = lv.at(x, y);
                if (!lv.target[i] || done[i]) continue;
                for (int k = 0; k < 4; ++k) {
                    const int nx = x + kDx[k], ny = y + kDy[k];
                    if (nx < 0 || ny < 0 || nx >= lv.w || ny >= lv.h) continue;
                    if (done[lv.at(nx, ny)]) {
                        frontier.push_back(i);
                        break;
                    }
                }
            }
        if (frontier.empty()) break;
        std::vector<Color> values;
        values.reserve(frontier.size());
        for (std::size_t i : frontier) {
            const int x = static_cast<int>(i % static_cast<std::size_t>(lv.w));
            const int y = static_cast<int>(i / static_cast<std::size_t>(lv.w));
            Color sum = Color::Zero();
            int count = 0;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx[k], ny = y + kDy[k];
                if (nx < 0 || ny < 0 || nx >= lv.w || ny >= lv.h) continue;
                const std::size_t j = lv.at(nx, ny);
                if (done[j]) {
                    sum += lv.color[j];
                    ++count;
                }
            }
            values.push_back(sum / count);
        }
        for (std::size_t k = 0; k < frontier.size(); ++k) {
            lv.color[frontier[k]] = values[k];
            done[frontier[k]] = 1;
        }
    }
    for (std::size_t i = 0; i < lv.color.size(); ++i)
        if (lv.target[i] && !done[i]) lv.color[i] = mean;
}

class PatchMatch {
public:
    PatchMatch(Level& level, int radius, std::mt19937& rng) : lv_(level), r_(radius), rng_(rng) {
        for (std::size_t i = 0; i < lv_.color.size(); ++i)
            if (lv_.known[i]) sources_.push_back(static_cast<int>(i));
        nnf_.assign(lv_.color.size(), -1);
        cost_.assign(lv_.color.size(), std::numeric_limits<double>::infinity());
    }

    bool has_sources() const { return !sources_.empty(); }
    std::vector<int>& nnf() { return nnf_; }

    void initialize(const std::vector<int>* coarse, int coarse_w) {
        std::uniform_int_distribution<std::size_t> pick(0, sources_.size() - 1);
        for (int y = 0; y < lv_.h; ++y)
            for (int x = 0; x < lv_.w; ++x) {
                const std::size_t i = lv_.at(x, y);
                if (!lv_.target[i]) continue;
                int s = -1;
                if (coarse) {
                    const int c = (*coarse)[static_cast<std::size_t>(y / 2) * static_cast<std::size_t>(coarse_w) +
                                            static_cast<std::size_t>(x / 2)];
                    if (c >= 0) {
                        const int sx = 2 * (c % coarse_w) + x % 2;
                        const int sy = 2 * (c / coarse_w) + y % 2;
                        if (sx < lv_.w && sy < lv_.h && lv_.known[lv_.at(sx, sy)]) s = static_cast<int>(lv_.at(sx, sy));
                    }
                }
                if (s < 0) s = sources_[pick(rng_)];
                nnf_[i] = s;
                cost_[i] = distance(x, y, s);
            }
    }

    void iterate(int pass) {
        const bool forward = pass % 2 == 0;
        const int step = forward ? 1 : -1;
        const int ys = forward ? 0 : lv_.h - 1;
        const int xs = forward ? 0 : lv_.w - 1;
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (int y = ys; y >= 0 && y < lv_.h; y += step)
            for (int x = xs; x >= 0 && x < lv_.w; x += step) {
                const std::size_t i = lv_.at(x, y);
                if (!lv_.target[i]) continue;
                // Propagation from the already visited neighbours.
                for (const auto [dx, dy] : {std::array<int, 2>{-step, 0}, std::array<int, 2>{0, -step}}) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= lv_.w || ny >= lv_.h) continue;
                    const int ns = nnf_[lv_.at(nx, ny)];
                    if (ns < 0) continue;
                    try_candidate(x, y, ns % lv_.w - dx, ns / lv_.w - dy);
                }
                // Random search with a shrinking window.
                const int sx = nnf_[i] % lv_.w;
                const int sy = nnf_[i] / lv_.w;
                for (double rad = std::max(lv_.w, lv_.h); rad >= 1.0; rad *= 0.5)
                    try_candidate(x, y, sx + static_cast<int>(std::lround(rad * unit(rng_))),
                                  sy + static_cast<int>(std::lround(rad * unit(rng_))));
            }
    }

    // Each target texel becomes the mean of the source colors proposed by all target patches covering it.
    void vote() {
        std::vector<Color> next(lv_.color.size(), Color::Zero());
        std::vector<int> weight(lv_.color.size(), 0);
        for (int y = 0; y < lv_.h; ++y)
            for (int x = 0; x < lv_.w; ++x) {
                const std::size_t t = lv_.at(x, y);
                if (!lv_.target[t] || nnf_[t] < 0) continue;
                const int sx = nnf_[t] % lv_.w;
                const int sy = nnf_[t] / lv_.w;
                for (int oy = -r_; oy <= r_; ++oy)
                    for (int ox = -r_; ox <= r_; ++ox) {
                        const int px = x + ox, py = y + oy, qx = sx + ox, qy = sy + oy;
                        if (px < 0 || py < 0 || px >= lv_.w || py >= lv_.h) continue;
                        if (qx < 0 || qy < 0 || qx >= lv_.w || qy >= lv_.h) continue;
                        const std::size_t p = lv_.at(px, py);
                        const std::size_t q = lv_.at(qx, qy);
                        if (!lv_.target[p] || !lv_.known[q]) continue;
                        next[p] += lv_.color[q];
                        ++weight[p];
                    }
            }
        for (std::size_t p = 0; p < next.size(); ++p)
            if (lv_.target[p] && weight[p] > 0) lv_.color[p] = next[p] / weight[p];
        // Costs refer to the old colors.
        for (int y = 0; y < lv_.h; ++y)
            for (int x = 0; x < lv_.w; ++x) {
                const std::size_t i = lv_.at(x, y);
                if (lv_.target[i]) cost_[i] = distance(x, y, nnf_[i]);
            }
    }

private:
    void try_candidate(int x, int y, int sx, int sy) {
        if (sx < 0 || sy < 0 || sx >= lv_.w || sy >= lv_.h) return;
        const std::size_t s = lv_.at(sx, sy);
        if (!lv_.known[s]) return;
        const std::size_t i = lv_.at(x, y);
        if (static_cast<int>(s) == nnf_[i]) return;
        const double d = distance(x, y, static_cast<int>(s));
        if (d < cost_[i]) {
            cost_[i] = d;
            nnf_[i] = static_cast<int>(s);
        }
    }

    // Mean squared color difference over the comparable part of the patch; a
    // patch position whose source texel is not known costs a full mismatch.
    double distance(int x, int y, int s) const {
        constexpr double kMiss = 3.0 * 255.0 * 255.0;
        const int sx = s % lv_.w;
        const int sy = s / lv_.w;
        double sum = 0.0;
        int n = 0;
        for (int oy = -r_; oy <= r_; ++oy)
            for (int ox = -r_; ox <= r_; ++ox) {
                const int px = x + ox, py = y + oy;
                if (px < 0 || py < 0 || px >= lv_.w || py >= lv_.h) continue;
                const std::size_t p = lv_.at(px, py);
                if (!lv_.inside[p]) continue;
                ++n;
                const int qx = sx + ox, qy = sy + oy;
                if (qx < 0 || qy < 0 || qx >= lv_.w || qy >= lv_.h || !lv_.known[lv_.at(qx, qy)]) {
                    sum += kMiss;
                    continue;
                }
                sum += (lv_.color[p] - lv_.color[lv_.at(qx, qy)]).squaredNorm();
            }
        return n ? sum / n : kMiss;
    }

    Level& lv_;
    int r_;
    std::mt19937& rng_;
    std::vector<int> sources_;
    std::vector<int> nnf_;
    std::vector<double> cost_;
};

RgbImage inpaint_exemplar(const RgbImage& image, const ValidityMask& mask, const InpaintOptions& options) {
    RgbImage out = image;
    if (mask.count(TexelState::Unfilled) == 0) return out;
    if (mask.count(TexelState::Filled) == 0)
        throw Error(ErrorCode::NoBoundary, "exemplar inpainting needs at least one filled texel");

    std::vector<Level> pyramid;
    pyramid.reserve(static_cast<std::size_t>(std::max(1, options.pyramid_levels)));
    pyramid.emplace_back();
    Level& base = pyramid[0];
    base.w = mask.width();
    base.h = mask.height();
    const std::size_t n = static_cast<std::size_t>(base.w) * static_cast<std::size_t>(base.h);
    base.color.assign(n, Color::Zero());
    base.known.assign(n, 0);
    base.target.assign(n, 0);
    base.inside.assign(n, 0);
    for (int y = 0; y < base.h; ++y)
        for (int x = 0; x < base.w; ++x) {
            const std::size_t i = base.at(x, y);
            const TexelState s = mask.state.at(x, y);
            const Rgb8& c = image.at(x, y);
            base.color[i] = Color(c[0], c[1], c[2]);
            base.known[i] = s == TexelState::Filled;
            base.target[i] = s == TexelState::Unfilled;
            base.inside[i] = s != TexelState::Outside;
        }
    const int radius = std::max(1, options.patch_size / 2);
    for (int k = 1; k < options.pyramid_levels; ++k) {
        const Level& fine = pyramid.back();
        if (std::min(fine.w, fine.h) < 4 * options.patch_size) break;
        Level coarse = downsample(fine);
        if (std::none_of(coarse.known.begin(), coarse.known.end(), [](char c) { return c != 0; })) break;
        pyramid.push_back(std::move(coarse));
    }

    std::mt19937 rng(options.seed);
    onion_fill(pyramid.back());
    std::vector<int> coarse_nnf;
    int coarse_w = 0;
    for (int k = static_cast<int>(pyramid.size()) - 1; k >= 0; --k) {
        Level& lv = pyramid[static_cast<std::size_t>(k)];
        if (k + 1 < static_cast<int>(pyramid.size())) {
            // Colors of the finer level start from the coarse solution.
            const Level& up = pyramid[static_cast<std::size_t>(k + 1)];
            for (int y = 0; y < lv.h; ++y)
                for (int x = 0; x < lv.w; ++x)
                    if (lv.target[lv.at(x, y)]) lv.color[lv.at(x, y)] = up.color[up.at(x / 2, y / 2)];
        }
        PatchMatch pm(lv, radius, rng);
        pm.initialize(coarse_nnf.empty() ? nullptr : &coarse_nnf, coarse_w);
        for (int it = 0; it < options.iterations; ++it) {
            pm.iterate(it);
            pm.vote();
        }
        coarse_nnf = pm.nnf();
        coarse_w = lv.w;
    }

    const Level& result = pyramid.front();
    for (int y = 0; y < result.h; ++y)
        for (int x = 0; x < result.w; ++x) {
            const std::size_t i = result.at(x, y);
            if (!result.target[i]) continue;
            out.at(x, y) = {to_u8(result.color[i][0]), to_u8(result.color[i][1]), to_u8(result.color[i][2])};
        }
    return out;
}

}  // namespace

RgbImage inpaint(const RgbImage& image, const ValidityMask& mask, InpaintMode mode, const RgbImage* patch,
                 const InpaintOptions& options) {
    if (image.width() != mask.width() || image.height() != mask.height())
        throw Error(ErrorCode::DimensionMismatch, "image and mask sizes differ");
    switch (mode) {
        case InpaintMode::Diffusion: return inpaint_diffusion(image, mask);
        case InpaintMode::Exemplar: return inpaint_exemplar(image, mask, options);
        case InpaintMode::PatchTile:
            if (!patch || patch->empty()) throw Error(ErrorCode::MissingPatch, "patch_tile needs a patch image");
            return inpaint_patch_tile(image, mask, *patch);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown inpaint mode");
}

void dilate_gutter(RgbImage& image, const ValidityMask& mask, int texels) {
    const int W = mask.width();
    const int H = mask.height();
    Image2D<char> colored(W, H, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) colored.at(x, y) = mask.state.at(x, y) != TexelState::Outside;
    for (int ring = 0; ring < texels; ++ring) {
        std::vector<std::pair<std::array<int, 2>, Rgb8>> writes;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (colored.at(x, y)) continue;
                int sum[3] = {0, 0, 0};
                int count = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if ((dx == 0 && dy == 0) || !colored.contains(nx, ny) || !colored.at(nx, ny)) continue;
                        const Rgb8& c = image.at(nx, ny);
                        for (int ch = 0; ch < 3; ++ch) sum[ch] += c[static_cast<std::size_t>(ch)];
                        ++count;
                    }
                if (!count) continue;
                writes.push_back({{x, y},
                                  {to_u8(static_cast<double>(sum[0]) / count), to_u8(static_cast<double>(sum[1]) / count),
                                   to_u8(static_cast<double>(sum[2]) / count)}});
            }
        for (const auto& [xy, c] : writes) {
            image.at(xy[0], xy[1]) = c;
            colored.at(xy[0], xy[1]) = 1;
        }
    }
}

}  // namespace peel
