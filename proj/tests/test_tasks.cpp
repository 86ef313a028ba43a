#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "camnet/tasks.hpp"

using namespace camnet;

namespace {

double luminance(const Tensor& img, int y, int x) {
    return 0.299 * img.at4(0, 0, y, x) + 0.587 * img.at4(0, 1, y, x) +
           0.114 * img.at4(0, 2, y, x);
}

double mse(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / a.data.size();
}

}  // namespace

TEST_CASE("palette: three distinct colors of equal luminance 0.5") {
    auto palette = iso_luminant_palette();
    REQUIRE(palette.size() == 3);
    for (const auto& c : palette) {
        double l = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
        CHECK(l == doctest::Approx(0.5).epsilon(1e-3));
        for (float v : c) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c)
                d += (palette[i][c] - palette[j][c]) * (palette[i][c] - palette[j][c]);
            CHECK(d > 0.1);  // visually distinct
        }
}

TEST_CASE("shape generation is deterministic per (seed, index)") {
    ShapesSpec spec;
    spec.image_size = 32;
    spec.seed = 3;
    ShapeItem a = gen_shape(spec, 5);
    ShapeItem b = gen_shape(spec, 5);
    CHECK(a.image.data == b.image.data);
    CHECK(a.mask.data == b.mask.data);
    CHECK(a.palette_index == b.palette_index);
    CHECK(a.kind == b.kind);
    CHECK(gen_shape(spec, 6).image.data != a.image.data);
    ShapesSpec other = spec;
    other.seed = 4;
    CHECK(gen_shape(other, 5).image.data != a.image.data);
}

TEST_CASE("grayscale view is constant: color carries zero luminance signal") {
    ShapesSpec spec;
    spec.image_size = 32;
    spec.seed = 11;
    for (int i = 0; i < 20; ++i) {
        ShapeItem item = gen_shape(spec, i);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                CHECK(std::fabs(luminance(item.image, y, x) - 0.5) <= 1.1e-3);
    }
}

TEST_CASE("shape renders: mask nonempty, interior matches the palette color") {
    ShapesSpec spec;
    spec.image_size = 32;
    spec.seed = 12;
    auto palette = iso_luminant_palette();
    for (int i = 0; i < 10; ++i) {
        ShapeItem item = gen_shape(spec, i);
        int inside = 0;
        for (float v : item.mask.data) inside += v > 0.5f ? 1 : 0;
        CHECK(inside > 16);                                       // shape is visible
        CHECK(inside < 32 * 32 / 2);                              // and fits the canvas
        const auto& color = palette[item.palette_index];
        // fully covered pixels (mask 1 with all 8 neighbors set) carry the
        // pure palette color
        int checked = 0;
        for (int y = 1; y < 31 && checked < 8; ++y)
            for (int x = 1; x < 31 && checked < 8; ++x) {
                bool core = true;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        core = core && item.mask.at4(0, 0, y + dy, x + dx) > 0.5f;
                if (!core) continue;
                for (int c = 0; c < 3; ++c)
                    CHECK(item.image.at4(0, c, y, x) == doctest::Approx(color[c]).epsilon(1e-2));
                ++checked;
            }
        CHECK(checked > 0);
    }
}

TEST_CASE("palette frequencies are uniform within 3-sigma binomial bounds") {
    ShapesSpec spec;
    spec.image_size = 8;  // geometry irrelevant here, keep it fast
    spec.seed = 13;
    const int n = 1200;
    int counts[3] = {0, 0, 0};
    int kinds[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
        ShapeItem item = gen_shape(spec, i);
        ++counts[item.palette_index];
        ++kinds[static_cast<int>(item.kind)];
    }
    const double expect = n / 3.0;
    const double bound = 3.0 * std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
    for (int c : counts) CHECK(std::fabs(c - expect) <= bound);
    for (int k : kinds) CHECK(std::fabs(k - expect) <= bound);
}

TEST_CASE("task adapters derive the conditioning input") {
    ShapesSpec spec;
    spec.image_size = 32;
    spec.seed = 14;
    Tensor target = gen_shape(spec, 0).image;

    TaskSpec sr;
    sr.kind = TaskSpec::Kind::super_resolution;
    sr.factor = 4;
    auto [sr_in, sr_tgt] = make_pair(sr, target);
    CHECK(sr_in.shape == std::vector<int>{1, 3, 8, 8});
    CHECK(sr_tgt.data == target.data);

    TaskSpec col;
    col.kind = TaskSpec::Kind::colourization;
    auto [gray, _] = make_pair(col, target);
    CHECK(gray.shape == std::vector<int>{1, 1, 32, 32});
    // a pure-gray target's luminance equals any of its channels
    Tensor flat({1, 3, 8, 8});
    flat.fill(0.25f);
    auto [flat_gray, flat_tgt] = make_pair(col, flat);
    for (float v : flat_gray.data) CHECK(v == doctest::Approx(0.25f).epsilon(1e-6));

    TaskSpec dec;
    dec.kind = TaskSpec::Kind::decompression;
    dec.quality = 100;
    auto [near, __] = make_pair(dec, target);
    for (size_t i = 0; i < target.data.size(); ++i)
        CHECK(std::fabs(near.data[i] - target.data[i]) <= 1.5f / 255.0f);

    TaskSpec bad_sr = sr;
    bad_sr.factor = 3;
    CHECK_THROWS_AS(make_pair(bad_sr, target), ShapeError);
    TaskSpec bad_dec = dec;
    bad_dec.quality = 0;
    CHECK_THROWS_AS(make_pair(bad_dec, target), ShapeError);
}

TEST_CASE("codec: constant block quantizes only the DC coefficient") {
    // analytic oracle: for a constant c the orthonormal DC is 8 * 255c; at
    // quality 50 the DC divisor is 16, so the block reconstructs to
    // round(8 * 255c / 16) * 16 / (8 * 255) uniformly
    Tensor flat({1, 1, 8, 8});
    flat.fill(0.5f);
    Tensor out = dct_codec(flat, 50);
    double expect = std::round(8.0 * 255.0 * 0.5 / 16.0) * 16.0 / (8.0 * 255.0);
    for (float v : out.data) CHECK(v == doctest::Approx(expect).epsilon(1e-6));

    // near-lossless at quality 100 (every divisor clamps to 1)
    Tensor flat2({1, 1, 8, 8});
    flat2.fill(0.123f);
    Tensor out2 = dct_codec(flat2, 100);
    for (float v : out2.data) CHECK(std::fabs(v - 0.123f) <= 1.5f / 255.0f);
}

TEST_CASE("codec: quality 1 is far lossier than quality 100") {
    ShapesSpec spec;
    spec.image_size = 32;
    spec.seed = 15;
    Tensor target = gen_shape(spec, 2).image;
    double hi = mse(dct_codec(target, 100), target);
    double lo = mse(dct_codec(target, 1), target);
    CHECK(lo > 10.0 * hi);
    CHECK(lo > 1e-5);
}

TEST_CASE("codec: idempotent at fixed quality up to the quantization bound") {
    ShapesSpec spec;
    spec.image_size = 32;
    spec.seed = 16;
    Tensor target = gen_shape(spec, 3).image;
    for (int q : {10, 50, 90}) {
        Tensor once = dct_codec(target, q);
        Tensor twice = dct_codec(once, q);
        double first_pass = std::sqrt(mse(once, target));
        double drift = std::sqrt(mse(twice, once));
        CHECK(drift <= first_pass + 1e-9);
    }
}

TEST_CASE("orthonormal DCT basis reconstructs exactly (no quantization)") {
    ShapesSpec spec;
    spec.image_size = 16;
    spec.seed = 17;
    for (int i = 0; i < 3; ++i) {
        Tensor img = gen_shape(spec, i).image;
        Tensor rt = dct_roundtrip(img);
        for (size_t j = 0; j < img.data.size(); ++j)
            CHECK(std::fabs(rt.data[j] - img.data[j]) < 1e-4f);
    }
}

TEST_CASE("codec rejects sizes not divisible by 8") {
    Tensor odd({1, 3, 12, 12});
    CHECK_THROWS_AS(dct_codec(odd, 50), ShapeError);
    Tensor ok({1, 3, 16, 16});
    CHECK_THROWS_AS(dct_codec(ok, 0), ShapeError);
    CHECK_THROWS_AS(dct_codec(ok, 101), ShapeError);
}

TEST_CASE("dataset save/load round trip") {
    ShapesSpec spec;
    spec.image_size = 16;
    spec.count = 4;
    spec.seed = 17;
    auto items = gen_shapes(spec);
    REQUIRE(items.size() == 4);
    std::string dir = "./tasks_dataset_test";
    save_dataset(dir, spec, items);
    CHECK(std::filesystem::exists(dir + "/manifest.json"));

    Dataset ds = load_dataset(dir);
    CHECK(ds.spec.image_size == 16);
    CHECK(ds.spec.count == 4);
    CHECK(ds.spec.seed == 17);
    REQUIRE(ds.items.size() == 4);
    for (size_t i = 0; i < items.size(); ++i) {
        CHECK(ds.items[i].palette_index == items[i].palette_index);
        CHECK(ds.items[i].kind == items[i].kind);
        REQUIRE(ds.items[i].image.shape == items[i].image.shape);
        for (size_t j = 0; j < items[i].image.data.size(); ++j)
            CHECK(std::fabs(ds.items[i].image.data[j] - items[i].image.data[j]) <= 0.5f / 255.0f + 1e-6f);
        CHECK(ds.items[i].mask.data == items[i].mask.data);  // binary mask is exact
    }
    std::filesystem::remove_all(dir);
}
