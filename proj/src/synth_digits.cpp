// SPDX-License-Identifier: Apache-2.0
#include "dni/synth_digits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <vector>

#include "dni/rng.hpp"
#include "dni/tasks_io.hpp"

namespace dni {

namespace {

struct Pt {
    double x, y;
};

using Stroke = std::vector<Pt>;

std::vector<Stroke> circle(double cx, double cy, double rx, double ry, int segments = 12) {
    Stroke s;
    for (int i = 0; i <= segments; ++i) {
        const double a = 2.0 * 3.14159265358979323846 * i / segments;
        s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return {s};
}

/// Stroke templates in a unit box, x rightward, y downward.
std::vector<Stroke> glyph(int digit) {
    switch (digit) {
        case 0:
            return circle(0.5, 0.5, 0.24, 0.36);
        case 1:
            return {{{0.38, 0.26}, {0.54, 0.12}, {0.54, 0.88}}};
        case 2:
            return {{{0.28, 0.3},
                     {0.34, 0.16},
                     {0.52, 0.12},
                     {0.68, 0.2},
                     {0.7, 0.36},
                     {0.56, 0.52},
                     {0.3, 0.74},
                     {0.26, 0.88},
                     {0.74, 0.88}}};
        case 3:
            return {{{0.3, 0.18}, {0.5, 0.12}, {0.68, 0.22}, {0.62, 0.4}, {0.46, 0.48}},
                    {{0.46, 0.48}, {0.66, 0.56}, {0.72, 0.72}, {0.56, 0.87}, {0.32, 0.82}}};
        case 4:
            return {{{0.62, 0.88}, {0.62, 0.12}, {0.26, 0.62}, {0.78, 0.62}}};
        case 5:
            return {{{0.7, 0.12}, {0.34, 0.12}, {0.31, 0.46}},
                    {{0.31, 0.46}, {0.56, 0.42}, {0.7, 0.56}, {0.68, 0.76}, {0.5, 0.88}, {0.3, 0.8}}};
        case 6: {
            auto bowl = circle(0.48, 0.64, 0.2, 0.22, 10);
            bowl.push_back({{0.64, 0.14}, {0.46, 0.24}, {0.32, 0.48}, {0.29, 0.66}});
            return bowl;
        }
        case 7:
            return {{{0.26, 0.14}, {0.74, 0.14}, {0.42, 0.88}}};
        case 8: {
            auto top = circle(0.5, 0.3, 0.17, 0.17, 10);
            auto bottom = circle(0.5, 0.67, 0.21, 0.2, 10);
            top.push_back(bottom[0]);
            return top;
        }
        case 9: {
            auto head = circle(0.52, 0.34, 0.2, 0.21, 10);
            head.push_back({{0.71, 0.38}, {0.66, 0.66}, {0.56, 0.88}});
            return head;
        }
        default:
            return {};
    }
}

double seg_dist(Pt p, Pt a, Pt b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 == 0.0 ? 0.0 : ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double px = a.x + t * dx - p.x, py = a.y + t * dy - p.y;
    return std::sqrt(px * px + py * py);
}

std::vector<unsigned char> render(int digit, RngState& rng) {
    const double angle = rng.next_uniform(-0.22, 0.22);
    const double sx = rng.next_uniform(0.85, 1.12);
    const double sy = rng.next_uniform(0.85, 1.12);
    const double shear = rng.next_uniform(-0.12, 0.12);
    const double tx = rng.next_uniform(-0.07, 0.07);
    const double ty = rng.next_uniform(-0.07, 0.07);
    const double thickness = rng.next_uniform(0.035, 0.065);
    const double ca = std::cos(angle), sa = std::sin(angle);

    std::vector<Stroke> strokes = glyph(digit);
    for (auto& s : strokes)
        for (auto& p : s) {
            double x = (p.x - 0.5) * sx, y = (p.y - 0.5) * sy;
            x += shear * y;
            const double xr = ca * x - sa * y, yr = sa * x + ca * y;
            p = {xr + 0.5 + tx, yr + 0.5 + ty};
        }

    std::vector<unsigned char> img(28 * 28, 0);
    for (int py = 0; py < 28; ++py)
        for (int px = 0; px < 28; ++px) {
            const Pt p{(px + 0.5) / 28.0, (py + 0.5) / 28.0};
            double best = 1e9;
            for (const auto& s : strokes)
                for (std::size_t i = 0; i + 1 < s.size(); ++i)
                    best = std::min(best, seg_dist(p, s[i], s[i + 1]));
            // Soft-edged stroke profile, 1 inside, fading over one pixel.
            const double edge = (thickness - best) / (1.0 / 28.0) + 0.5;
            double v = std::clamp(edge, 0.0, 1.0);
            v = std::clamp(v + 0.04 * rng.next_gaussian(), 0.0, 1.0);
            img[py * 28 + px] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
    return img;
}

void write_split(const std::string& dir, const std::string& split, std::size_t count, RngState& rng) {
    std::vector<std::vector<unsigned char>> images;
    std::vector<unsigned char> labels;
    images.reserve(count);
    labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int digit = static_cast<int>(rng.next_below(10));
        images.push_back(render(digit, rng));
        labels.push_back(static_cast<unsigned char>(digit));
    }
    namespace fs = std::filesystem;
    write_idx_images((fs::path(dir) / (split + "-images-idx3-ubyte.gz")).string(), images, 28, 28);
    write_idx_labels((fs::path(dir) / (split + "-labels-idx1-ubyte.gz")).string(), labels);
}

bool has_split(const std::string& root, const std::string& split) {
    namespace fs = std::filesystem;
    for (const char* suffix : {".gz", ""}) {
        if (fs::exists(fs::path(root) / (split + "-images-idx3-ubyte" + suffix)) &&
            fs::exists(fs::path(root) / (split + "-labels-idx1-ubyte" + suffix))) {
            return true;
        }
    }
    return false;
}

}  // namespace

void make_synthetic_digits(const std::string& out_dir, std::size_t n_train, std::size_t n_test,
                           std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    RngState rng(seed);
    write_split(out_dir, "train", n_train, rng);
    write_split(out_dir, "t10k", n_test, rng);
}

std::string resolve_data_root(const std::string& fallback_dir) {
    if (const char* env = std::getenv("DNI_DATA_DIR"); env != nullptr && *env != '\0') {
        if (has_split(env, "train") && has_split(env, "t10k")) return env;
    }
    if (!has_split(fallback_dir, "train") || !has_split(fallback_dir, "t10k")) {
        make_synthetic_digits(fallback_dir, 10000, 2000, 20240817);
    }
    return fallback_dir;
}

}  // namespace dni
