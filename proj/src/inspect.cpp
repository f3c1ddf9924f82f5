#include "peel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace peel {

namespace {

Rgb8 label_color(std::uint8_t label) {
    if (label == 0) return {0, 0, 0};
    const unsigned h = label * 2654435761u;
    return {static_cast<std::uint8_t>(64 + (h >> 8) % 192), static_cast<std::uint8_t>(64 + (h >> 16) % 192),
            static_cast<std::uint8_t>(64 + (h >> 24) % 192)};
}

void draw_line(RgbImage& img, Vec2 a, Vec2 b, Rgb8 color) {
    const int n = static_cast<int>(std::ceil(std::max(std::abs(b.x() - a.x()), std::abs(b.y() - a.y())))) + 1;
    for (int i = 0; i <= n; ++i) {
        const Vec2 p = a + (b - a) * (static_cast<double>(i) / n);
        const int x = static_cast<int>(std::floor(p.x()));
        const int y = static_cast<int>(std::floor(p.y()));
        if (img.contains(x, y)) img.at(x, y) = color;
    }
}

Rgb8 heat(double qc) {
    const double t = std::clamp(qc - 1.0, 0.0, 1.0);
    return {static_cast<std::uint8_t>(std::lround(255 * t)), static_cast<std::uint8_t>(std::lround(64 * (1 - t))),
            static_cast<std::uint8_t>(std::lround(255 * (1 - t)))};
}

}  // namespace

RgbImage contact_sheet(const PeelStack& stack) {
    const int w = stack.width();
    const int h = stack.height();
    const int layers = stack.layers();
    RgbImage out(w * std::max(layers, 1), h * 4, Rgb8{0, 0, 0});
    float lo = std::numeric_limits<float>::max(), hi = 0.0f;
    for (float d : stack.depth_data())
        if (d != 0.0f) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    const float span = hi > lo ? hi - lo : 1.0f;
    for (int l = 0; l < layers; ++l)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!stack.valid(l, x, y)) continue;
                const int ox = l * w + x;
                const auto g = static_cast<std::uint8_t>(std::lround(255.0f - 200.0f * (stack.depth(l, x, y) - lo) / span));
                out.at(ox, y) = {g, g, g};
                out.at(ox, h + y) = stack.rgb(l, x, y);
                const Vec3f& n = stack.normal(l, x, y);
                Rgb8 nc{};
                for (int c = 0; c < 3; ++c)
                    nc[static_cast<std::size_t>(c)] =
                        static_cast<std::uint8_t>(std::lround(std::clamp(0.5f * (n[c] + 1.0f), 0.0f, 1.0f) * 255.0f));
                out.at(ox, 2 * h + y) = nc;
                out.at(ox, 3 * h + y) = label_color(stack.seg(l, x, y));
            }
    return out;
}

RgbImage uv_wireframe(const UVAtlas& atlas, const RgbImage& texture, int max_size) {
    const int res = atlas.resolution;
    const int size = std::max(1, std::min(res, max_size));
    const double s = static_cast<double>(size) / res;
    RgbImage out(size, size, Rgb8{0, 0, 0});
    if (texture.width() == res && texture.height() == res)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const Rgb8 c = texture.at(std::min(res - 1, static_cast<int>(x / s)), std::min(res - 1, static_cast<int>(y / s)));
                out.at(x, y) = {static_cast<std::uint8_t>(c[0] / 2), static_cast<std::uint8_t>(c[1] / 2),
                                static_cast<std::uint8_t>(c[2] / 2)};
            }
    const auto to_px = [&](const Vec2& uv) { return Vec2(uv.x() * size, (1.0 - uv.y()) * size); };
    for (std::size_t c = 0; c < atlas.charts.size(); ++c)
        for (const Face& f : atlas.charts[c].mesh.faces)
            for (int k = 0; k < 3; ++k)
                draw_line(out, to_px(atlas.atlas_uv(c, f[k])), to_px(atlas.atlas_uv(c, f[(k + 1) % 3])),
                          Rgb8{255, 255, 255});
    return out;
}

RgbImage distortion_heatmap(const UVAtlas& atlas, int size) {
    RgbImage out(size, size, Rgb8{0, 0, 0});
    for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
        const UVChart& chart = atlas.charts[c];
        const std::vector<double> qc = chart.stats.qc_ratio.size() == chart.mesh.faces.size()
                                           ? chart.stats.qc_ratio
                                           : distortion_stats(chart.mesh, chart.uv).qc_ratio;
        for (std::size_t f = 0; f < chart.mesh.faces.size(); ++f) {
            std::array<Vec2, 3> p;
            for (int k = 0; k < 3; ++k) {
                const Vec2 uv = atlas.atlas_uv(c, chart.mesh.faces[f][k]);
                p[static_cast<std::size_t>(k)] = Vec2(uv.x() * size, (1.0 - uv.y()) * size);
            }
            const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
            if (area == 0.0) continue;
            const Rgb8 color = heat(qc[f]);
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}))));
            const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}))));
            const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const Vec2 q(x + 0.5, y + 0.5);
                    bool inside = true;
                    for (int k = 0; k < 3 && inside; ++k) {
                        const Vec2 a = p[static_cast<std::size_t>(k)];
                        const Vec2 b = p[static_cast<std::size_t>((k + 1) % 3)];
                        const double e = (b - a).x() * (q - a).y() - (b - a).y() * (q - a).x();
                        inside = area > 0 ? e >= 0 : e <= 0;
                    }
                    if (inside) out.at(x, y) = color;
                }
        }
    }
    return out;
}

}  // namespace peel
