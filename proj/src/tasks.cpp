#include "camnet/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "camnet/image_io.hpp"
#include "camnet/resize.hpp"
#include "camnet/rng.hpp"

namespace camnet {

namespace {

constexpr uint64_t kShapesTag = 0x736861706573ULL;
constexpr double kLuma[3] = {0.299, 0.587, 0.114};
constexpr float kChroma = 0.35f;

}  // namespace

std::string shape_kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        case ShapeKind::triangle: return "triangle";
    }
    throw ShapeError("shape_kind_name: invalid kind");
}

ShapeKind shape_kind_from_name(const std::string& s) {
    if (s == "circle") return ShapeKind::circle;
    if (s == "square") return ShapeKind::square;
    if (s == "triangle") return ShapeKind::triangle;
    throw ShapeError("shape_kind_from_name: unknown kind '" + s + "'");
}

std::vector<std::array<float, 3>> iso_luminant_palette() {
    // orthonormal basis of the plane orthogonal to the luminance axis
    double ln[3], norm = std::sqrt(kLuma[0] * kLuma[0] + kLuma[1] * kLuma[1] +
                                   kLuma[2] * kLuma[2]);
    for (int i = 0; i < 3; ++i) ln[i] = kLuma[i] / norm;
    double u[3] = {1.0 - ln[0] * ln[0], -ln[0] * ln[1], -ln[0] * ln[2]};
    double un = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    for (double& x : u) x /= un;
    double v[3] = {ln[1] * u[2] - ln[2] * u[1], ln[2] * u[0] - ln[0] * u[2],
                   ln[0] * u[1] - ln[1] * u[0]};
    std::vector<std::array<float, 3>> palette;
    for (int i = 0; i < 3; ++i) {
        double theta = 2.0 * M_PI * i / 3.0;
        std::array<float, 3> c;
        for (int ch = 0; ch < 3; ++ch)
            c[ch] = static_cast<float>(0.5 + kChroma * (std::cos(theta) * u[ch] +
                                                        std::sin(theta) * v[ch]));
        palette.push_back(c);
    }
    return palette;
}

namespace {

struct Geometry {
    ShapeKind kind;
    double cx, cy, r;
};

bool inside(const Geometry& g, double x, double y) {
    switch (g.kind) {
        case ShapeKind::circle: {
            double dx = x - g.cx, dy = y - g.cy;
            return dx * dx + dy * dy <= g.r * g.r;
        }
        case ShapeKind::square:
            return std::fabs(x - g.cx) <= g.r && std::fabs(y - g.cy) <= g.r;
        case ShapeKind::triangle: {
            // upright triangle inscribed in the radius-r circle
            double ax = g.cx, ay = g.cy - g.r;
            double bx = g.cx - g.r * 0.8660254037844386, by = g.cy + g.r * 0.5;
            double cx2 = g.cx + g.r * 0.8660254037844386, cy2 = g.cy + g.r * 0.5;
            auto side = [&](double px, double py, double qx, double qy) {
                return (qx - px) * (y - py) - (qy - py) * (x - px);
            };
            double s1 = side(ax, ay, bx, by), s2 = side(bx, by, cx2, cy2),
                   s3 = side(cx2, cy2, ax, ay);
            return (s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0);
        }
    }
    return false;
}

}  // namespace

ShapeItem gen_shape(const ShapesSpec& spec, int index) {
    require(spec.image_size >= 8, "gen_shape: image_size must be >= 8");
    require(index >= 0, "gen_shape: negative index");
    const int S = spec.image_size;
    Rng rng(mix_key({spec.seed, kShapesTag, static_cast<uint64_t>(index)}));
    Geometry g;
    g.kind = static_cast<ShapeKind>(rng.uniform_int(3));
    int palette_index = rng.uniform_int(3);
    g.r = (0.18 + 0.14 * rng.uniform()) * S;
    double margin = g.r + 1.0;
    g.cx = margin + rng.uniform() * (S - 2 * margin);
    g.cy = margin + rng.uniform() * (S - 2 * margin);

    auto palette = iso_luminant_palette();
    const std::array<float, 3>& color = palette[palette_index];
    ShapeItem item;
    item.kind = g.kind;
    item.palette_index = palette_index;
    item.image = Tensor({1, 3, S, S});
    item.mask = Tensor({1, 1, S, S});
    const int ss = 4;  // supersampling grid per axis
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            int hit = 0;
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx)
                    if (inside(g, x + (sx + 0.5) / ss, y + (sy + 0.5) / ss)) ++hit;
            float alpha = static_cast<float>(hit) / (ss * ss);
            for (int c = 0; c < 3; ++c)
                item.image.at4(0, c, y, x) = alpha * color[c] + (1.0f - alpha) * 0.5f;
            item.mask.at4(0, 0, y, x) = alpha >= 0.5f ? 1.0f : 0.0f;
        }
    return item;
}

std::vector<ShapeItem> gen_shapes(const ShapesSpec& spec) {
    require(spec.count >= 1, "gen_shapes: count must be >= 1");
    std::vector<ShapeItem> items;
    items.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) items.push_back(gen_shape(spec, i));
    return items;
}

void TaskSpec::validate() const {
    if (kind == Kind::super_resolution)
        require(factor >= 2 && (factor & (factor - 1)) == 0,
                "TaskSpec: super-resolution factor must be a power of 2, got " +
                    std::to_string(factor));
    if (kind == Kind::decompression)
        require(quality >= 1 && quality <= 100,
                "TaskSpec: quality must be in [1,100], got " + std::to_string(quality));
}

TaskSpec::Kind task_kind_from_name(const std::string& s) {
    if (s == "super_resolution") return TaskSpec::Kind::super_resolution;
    if (s == "colourization") return TaskSpec::Kind::colourization;
    if (s == "decompression") return TaskSpec::Kind::decompression;
    throw ShapeError("task_kind_from_name: unknown task '" + s + "'");
}

std::string task_kind_name(TaskSpec::Kind k) {
    switch (k) {
        case TaskSpec::Kind::super_resolution: return "super_resolution";
        case TaskSpec::Kind::colourization: return "colourization";
        case TaskSpec::Kind::decompression: return "decompression";
    }
    throw ShapeError("task_kind_name: invalid kind");
}

std::pair<Tensor, Tensor> make_pair(const TaskSpec& task, const Tensor& target) {
    task.validate();
    require(target.ndim() == 4 && target.n() == 1, "make_pair: expected a {1,C,H,W} target");
    switch (task.kind) {
        case TaskSpec::Kind::super_resolution: {
            require(target.h() % task.factor == 0 && target.w() % task.factor == 0,
                    "make_pair: image size not divisible by the SR factor");
            return {bicubic_to(target, target.h() / task.factor, target.w() / task.factor),
                    target};
        }
        case TaskSpec::Kind::colourization: {
            require(target.c() == 3, "make_pair: colourization needs an RGB target");
            Tensor gray({1, 1, target.h(), target.w()});
            for (int y = 0; y < target.h(); ++y)
                for (int x = 0; x < target.w(); ++x)
                    gray.at4(0, 0, y, x) = static_cast<float>(
                        kLuma[0] * target.at4(0, 0, y, x) + kLuma[1] * target.at4(0, 1, y, x) +
                        kLuma[2] * target.at4(0, 2, y, x));
            return {std::move(gray), target};
        }
        case TaskSpec::Kind::decompression:
            return {dct_codec(target, task.quality), target};
    }
    throw ShapeError("make_pair: invalid task kind");
}

namespace {

// Standard JPEG luminance quantization table (Annex K).
const int kQuantTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

/// Orthonormal 8x8 DCT-II basis: basis[u][x] = alpha(u) cos((2x+1)u pi / 16).
struct DctBasis {
    double b[8][8];
    DctBasis() {
        for (int u = 0; u < 8; ++u) {
            double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x)
                b[u][x] = alpha * std::cos((2 * x + 1) * u * M_PI / 16.0);
        }
    }
};
const DctBasis kDct;

double round_half_away(double v) { return v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5); }

}  // namespace

Tensor dct_codec(const Tensor& image, int quality) {
    require(image.ndim() == 4, "dct_codec: expected a 4-D image");
    require(quality >= 1 && quality <= 100,
            "dct_codec: quality must be in [1,100], got " + std::to_string(quality));
    require(image.h() % 8 == 0 && image.w() % 8 == 0,
            "dct_codec: image dimensions must be divisible by 8, got " + shape_str(image.shape));
    const double s = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
    Tensor out = image;
    for (int n = 0; n < image.n(); ++n)
        for (int c = 0; c < image.c(); ++c)
            for (int by = 0; by < image.h(); by += 8)
                for (int bx = 0; bx < image.w(); bx += 8) {
                    double block[8][8], coef[8][8];
                    for (int y = 0; y < 8; ++y)
                        for (int x = 0; x < 8; ++x)
                            block[y][x] = image.at4(n, c, by + y, bx + x) * 255.0;
                    // forward DCT, quantize, dequantize
                    for (int u = 0; u < 8; ++u)
                        for (int v = 0; v < 8; ++v) {
                            double acc = 0.0;
                            for (int y = 0; y < 8; ++y)
                                for (int x = 0; x < 8; ++x)
                                    acc += block[y][x] * kDct.b[u][y] * kDct.b[v][x];
                            // s = 0 (quality 100) degenerates the divisor to
                            // 0: pass coefficients through losslessly instead
                            // of clamping to integer rounding, whose error
                            // tail exceeds the advertised near-lossless bound
                            if (s <= 0.0) {
                                coef[u][v] = acc;
                            } else {
                                double div =
                                    std::max(1.0, kQuantTable[u * 8 + v] * s / 100.0);
                                coef[u][v] = round_half_away(acc / div) * div;
                            }
                        }
                    for (int y = 0; y < 8; ++y)
                        for (int x = 0; x < 8; ++x) {
                            double acc = 0.0;
                            for (int u = 0; u < 8; ++u)
                                for (int v = 0; v < 8; ++v)
                                    acc += coef[u][v] * kDct.b[u][y] * kDct.b[v][x];
                            out.at4(n, c, by + y, bx + x) = static_cast<float>(
                                std::min(1.0, std::max(0.0, acc / 255.0)));
                        }
                }
    return out;
}

Tensor dct_roundtrip(const Tensor& image) {
    require(image.ndim() == 4, "dct_roundtrip: expected a 4-D image");
    require(image.h() % 8 == 0 && image.w() % 8 == 0,
            "dct_roundtrip: image dimensions must be divisible by 8");
    Tensor out = image;
    for (int n = 0; n < image.n(); ++n)
        for (int c = 0; c < image.c(); ++c)
            for (int by = 0; by < image.h(); by += 8)
                for (int bx = 0; bx < image.w(); bx += 8) {
                    double block[8][8], coef[8][8];
                    for (int y = 0; y < 8; ++y)
                        for (int x = 0; x < 8; ++x)
                            block[y][x] = image.at4(n, c, by + y, bx + x) * 255.0;
                    for (int u = 0; u < 8; ++u)
                        for (int v = 0; v < 8; ++v) {
                            double acc = 0.0;
                            for (int y = 0; y < 8; ++y)
                                for (int x = 0; x < 8; ++x)
                                    acc += block[y][x] * kDct.b[u][y] * kDct.b[v][x];
                            coef[u][v] = acc;
                        }
                    for (int y = 0; y < 8; ++y)
                        for (int x = 0; x < 8; ++x) {
                            double acc = 0.0;
                            for (int u = 0; u < 8; ++u)
                                for (int v = 0; v < 8; ++v)
                                    acc += coef[u][v] * kDct.b[u][y] * kDct.b[v][x];
                            out.at4(n, c, by + y, bx + x) = static_cast<float>(acc / 255.0);
                        }
                }
    return out;
}

void save_dataset(const std::string& dir, const ShapesSpec& spec,
                  const std::vector<ShapeItem>& items) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["spec"] = {{"image_size", spec.image_size},
                        {"count", spec.count},
                        {"seed", spec.seed}};
    manifest["items"] = nlohmann::json::array();
    char name[64];
    for (size_t i = 0; i < items.size(); ++i) {
        std::snprintf(name, sizeof name, "img_%05zu.png", i);
        std::string img = name;
        std::snprintf(name, sizeof name, "mask_%05zu.png", i);
        std::string mask = name;
        write_png(dir + "/" + img, items[i].image);
        write_png(dir + "/" + mask, items[i].mask);
        manifest["items"].push_back({{"image", img},
                                     {"mask", mask},
                                     {"palette_index", items[i].palette_index},
                                     {"kind", shape_kind_name(items[i].kind)}});
    }
    std::ofstream f(dir + "/manifest.json");
    if (!f.good()) throw IoError("save_dataset: cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream f(dir + "/manifest.json");
    if (!f.good()) throw IoError("load_dataset: missing manifest.json in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(f);
    Dataset ds;
    ds.spec.image_size = manifest.at("spec").at("image_size").get<int>();
    ds.spec.count = manifest.at("spec").at("count").get<int>();
    ds.spec.seed = manifest.at("spec").at("seed").get<uint64_t>();
    for (const auto& it : manifest.at("items")) {
        ShapeItem item;
        item.image = read_png(dir + "/" + it.at("image").get<std::string>());
        item.mask = read_png(dir + "/" + it.at("mask").get<std::string>());
        item.palette_index = it.at("palette_index").get<int>();
        item.kind = shape_kind_from_name(it.at("kind").get<std::string>());
        ds.items.push_back(std::move(item));
    }
    return ds;
}

}  // namespace camnet
