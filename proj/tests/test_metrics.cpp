#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "camnet/metrics.hpp"
#include "camnet/rng.hpp"

using namespace camnet;

namespace {

Tensor random_image(int res, uint64_t seed, int c = 3) {
    Tensor t({1, c, res, res});
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(rng.uniform());
    return t;
}

CascadeConfig tiny_config(int K) {
    CascadeConfig cfg;
    cfg.K = K;
    cfg.base_res = 4;
    cfg.feat_ch = 8;
    cfg.rrdb_per_module = 1;
    cfg.dense_blocks_per_rrdb = 1;
    cfg.convs_per_dense_block = 2;
    cfg.growth_ch = 4;
    cfg.latent_spatial_ch = 2;
    cfg.latent_global_dim = 8;
    cfg.mapping_layers = 2;
    return cfg;
}

TrainItem make_item(int res, int K, uint64_t seed) {
    Tensor in = random_image(res, seed);
    Tensor out = random_image(res, seed + 1000);
    return TrainItem{conditioning_pyramid(in, K, 4), target_pyramid(out, K)};
}

FeatureStats stats_of(std::vector<double> mu, std::vector<double> diag) {
    FeatureStats s;
    s.dim = static_cast<int>(mu.size());
    s.n = 100;
    s.mu = std::move(mu);
    s.sigma.assign(static_cast<size_t>(s.dim) * s.dim, 0.0);
    for (int i = 0; i < s.dim; ++i) s.sigma[i * s.dim + i] = diag[i];
    return s;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("feature_stats: small-sample contract and n = 2 closed form") {
    PerceptualDistance dist;
    FeatureNet& net = dist.features(3);
    CHECK_THROWS_AS(feature_stats({random_image(16, 1)}, net), MetricError);

    // identical population: zero covariance
    Tensor x = random_image(16, 2);
    FeatureStats same = feature_stats({x, x, x}, net);
    for (double v : same.sigma) CHECK(std::fabs(v) < 1e-10);

    // n = 2: mu = (a+b)/2 and sigma = outer(a-b)/2 under the unbiased formula
    Tensor a = random_image(16, 3), b = random_image(16, 4);
    auto fa = net.pooled_features(a)[0];
    auto fb = net.pooled_features(b)[0];
    FeatureStats st = feature_stats({a, b}, net);
    const int dim = st.dim;
    for (int i = 0; i < dim; ++i) {
        CHECK(st.mu[i] == doctest::Approx(0.5 * (fa[i] + fb[i])).epsilon(1e-6));
        for (int j = 0; j < dim; ++j)
            CHECK(st.sigma[i * dim + j] ==
                  doctest::Approx(0.5 * (fa[i] - fb[i]) * (fa[j] - fb[j])).epsilon(1e-5));
    }

    // order invariance
    Tensor c = random_image(16, 5);
    FeatureStats s1 = feature_stats({a, b, c}, net);
    FeatureStats s2 = feature_stats({c, a, b}, net);
    for (int i = 0; i < dim; ++i) CHECK(s1.mu[i] == doctest::Approx(s2.mu[i]).epsilon(1e-9));
    for (size_t i = 0; i < s1.sigma.size(); ++i)
        CHECK(s1.sigma[i] == doctest::Approx(s2.sigma[i]).epsilon(1e-7));
}

TEST_CASE("frechet_distance: closed forms") {
    // identical stats
    FeatureStats p = stats_of({1.0, -2.0, 0.5, 3.0}, {1.0, 2.0, 0.5, 4.0});
    CHECK(frechet_distance(p, p) <= 1e-4);

    // equal identity covariances: distance is the squared mean shift
    FeatureStats i1 = stats_of({0, 0, 0, 0}, {1, 1, 1, 1});
    FeatureStats i2 = stats_of({1, 2, -1, 0.5}, {1, 1, 1, 1});
    CHECK(frechet_distance(i1, i2) == doctest::Approx(1 + 4 + 1 + 0.25).epsilon(1e-6));

    // commuting diagonals with equal means: sum of (sqrt a - sqrt b)^2
    FeatureStats d1 = stats_of({0, 0, 0, 0}, {1.0, 4.0, 9.0, 0.25});
    FeatureStats d2 = stats_of({0, 0, 0, 0}, {4.0, 1.0, 1.0, 1.0});
    double expect = (1 - 2) * (1 - 2) + (2 - 1) * (2 - 1) + (3 - 1) * (3 - 1) +
                    (0.5 - 1) * (0.5 - 1);
    CHECK(frechet_distance(d1, d2) == doctest::Approx(expect).epsilon(1e-6));

    // symmetry on a random PSD pair
    Rng rng(9);
    auto random_stats = [&](int dim) {
        std::vector<std::vector<double>> rows(dim * 2, std::vector<double>(dim));
        for (auto& r : rows)
            for (double& v : r) v = rng.gaussian();
        FeatureStats s;
        s.dim = dim;
        s.n = dim * 2;
        s.mu.assign(dim, 0.0);
        for (int i = 0; i < dim; ++i) s.mu[i] = rng.gaussian();
        s.sigma.assign(static_cast<size_t>(dim) * dim, 0.0);
        for (const auto& r : rows)
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) s.sigma[i * dim + j] += r[i] * r[j] / rows.size();
        return s;
    };
    FeatureStats r1 = random_stats(6), r2 = random_stats(6);
    CHECK(frechet_distance(r1, r2) == doctest::Approx(frechet_distance(r2, r1)).epsilon(1e-4));
    CHECK(frechet_distance(r1, r2) >= 0.0);

    FeatureStats wrong = stats_of({0, 0}, {1, 1});
    CHECK_THROWS_AS(frechet_distance(p, wrong), ShapeError);
}

TEST_CASE("faithfulness-weighted variance") {
    PerceptualDistance dist;
    FwvConfig cfg;
    Tensor target = random_image(8, 20);

    CHECK_THROWS_AS(faithfulness_weighted_variance({target}, target, cfg, dist), MetricError);

    // all samples equal the target: zero for every bandwidth
    auto zero = faithfulness_weighted_variance({target, target, target}, target, cfg, dist);
    for (auto& [sigma, v] : zero) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));

    std::vector<Tensor> samples{random_image(8, 21), random_image(8, 22), random_image(8, 23)};

    // huge bandwidth: weights go to 1, leaving the mean squared distance to
    // the pixelwise sample mean
    FwvConfig wide;
    wide.sigma_list = {1e6};
    Tensor mean({1, 3, 8, 8});
    for (const Tensor& s : samples)
        for (size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += s.data[i] / 3.0f;
    double expect = 0.0;
    for (const Tensor& s : samples) {
        double d = dist(s, mean);
        expect += d * d / 3.0;
    }
    auto w = faithfulness_weighted_variance(samples, target, wide, dist);
    CHECK(w[1e6] == doctest::Approx(expect).epsilon(1e-4));

    // analytic kernel weights at finite bandwidth
    FwvConfig one;
    one.sigma_list = {0.5};
    double manual = 0.0;
    for (const Tensor& s : samples) {
        double dt = dist(s, target);
        double dm = dist(s, mean);
        manual += std::exp(-dt * dt / (2 * 0.5 * 0.5)) * dm * dm / 3.0;
    }
    auto f = faithfulness_weighted_variance(samples, target, one, dist);
    CHECK(f[0.5] == doctest::Approx(manual).epsilon(1e-5));

    // monotone non-decreasing in the bandwidth
    auto multi = faithfulness_weighted_variance(samples, target, cfg, dist);
    CHECK(multi[0.15] <= multi[0.2] + 1e-12);
    CHECK(multi[0.2] <= multi[0.3] + 1e-12);
    for (auto& [sigma, v] : multi) CHECK(v >= 0.0);

    FwvConfig bad;
    bad.sigma_list = {-1.0};
    CHECK_THROWS_AS(faithfulness_weighted_variance(samples, target, bad, dist), ShapeError);
}

TEST_CASE("mode coverage over a palette") {
    std::vector<std::array<float, 3>> palette{{0.9f, 0.3f, 0.3f},
                                              {0.3f, 0.9f, 0.3f},
                                              {0.3f, 0.3f, 0.9f}};
    Tensor mask({1, 1, 4, 4});
    for (int y = 1; y < 3; ++y)
        for (int x = 1; x < 3; ++x) mask.at4(0, 0, y, x) = 1.0f;

    auto paint = [&](int p) {
        Tensor img({1, 3, 4, 4});
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x)
                    img.at4(0, c, y, x) = mask.at4(0, 0, y, x) > 0.5f ? palette[p][c] : 0.5f;
        return img;
    };

    CHECK(mode_coverage({paint(0), paint(0), paint(0)}, palette, mask) ==
          doctest::Approx(1.0 / 3.0));
    CHECK(mode_coverage({paint(0), paint(1), paint(2)}, palette, mask) == doctest::Approx(1.0));
    CHECK(mode_coverage({paint(2), paint(0)}, palette, mask) == doctest::Approx(2.0 / 3.0));

    Tensor empty({1, 1, 4, 4});
    CHECK_THROWS_AS(mode_coverage({paint(0)}, palette, empty), MetricError);
    CHECK_THROWS_AS(mode_coverage({paint(0)}, {}, mask), ShapeError);
}

TEST_CASE("sampling-efficiency benchmark: single-stage equivalence") {
    // with one module the stage-wise and vanilla searches are the same
    // procedure over the same draws, so the ratio is exactly 1
    CascadeConfig cfg = tiny_config(1);
    CascadeWeights w = init_weights(cfg, 31);
    PerceptualDistance dist;
    std::vector<TrainItem> inputs{make_item(4, 1, 700), make_item(4, 1, 701)};
    HsBenchResult r = hs_efficiency_benchmark(w, inputs, {4}, dist, 3, 5);
    CHECK(r.b_hs == 4);
    CHECK(r.total_runs == 6);
    CHECK(r.mean_ratio == doctest::Approx(1.0));
    CHECK(r.stderr_ratio == doctest::Approx(0.0));
    CHECK(r.censored == 0);
    REQUIRE(!r.budget_multipliers.empty());
    CHECK(r.budget_multipliers[0] == doctest::Approx(1.0));
    CHECK(r.mean_vanilla_distance[0] == doctest::Approx(r.mean_hs_distance).epsilon(1e-6));
}

TEST_CASE("sampling-efficiency benchmark: a latent-blind model ties at 1") {
    CascadeConfig cfg = tiny_config(2);
    cfg.weight_norm = false;
    CascadeWeights w = init_weights(cfg, 32);
    for (const ParamSlot& s : w.slots()) s.value->fill(0.0f);  // output ignores the latents
    PerceptualDistance dist;
    std::vector<TrainItem> inputs{make_item(8, 2, 702)};
    HsBenchResult r = hs_efficiency_benchmark(w, inputs, {2, 2}, dist, 2, 6);
    CHECK(r.mean_ratio == doctest::Approx(1.0));
    CHECK(r.censored == 0);
}

TEST_CASE("sampling-efficiency benchmark: two-module model, ratio at least 1") {
    CascadeConfig cfg = tiny_config(2);
    CascadeWeights w = init_weights(cfg, 33);
    PerceptualDistance dist;
    std::vector<TrainItem> inputs{make_item(8, 2, 703)};
    HsBenchResult r = hs_efficiency_benchmark(w, inputs, {2, 2}, dist, 2, 7);
    CHECK(r.mean_ratio >= 1.0);
    CHECK(r.total_runs == 2);
    // the mean vanilla curve starts no better than where it ends
    REQUIRE(!r.mean_vanilla_distance.empty());
    CHECK(r.mean_vanilla_distance.back() <= r.mean_vanilla_distance.front() + 1e-9);
}

TEST_CASE("CSV reports have fixed headers and deterministic bytes") {
    std::string dir = "./metrics_csv_test";
    std::remove((dir + "_fid.csv").c_str());
    write_fid_csv(dir + "_fid.csv", {{"colourization", "default", 12.5}, {"sr", "no_hs", 3.25}});
    std::string fid = read_file(dir + "_fid.csv");
    CHECK(fid == "task,config,fid\ncolourization,default,12.5\nsr,no_hs,3.25\n");

    write_fwv_csv(dir + "_fwv.csv", {{"colourization", 0.3, 0.001953125}});
    std::string fwv = read_file(dir + "_fwv.csv");
    CHECK(fwv == "task,sigma,fwv\ncolourization,0.3,0.00195312\n");

    HsBenchResult r;
    r.mean_ratio = 2.5;
    r.stderr_ratio = 0.25;
    r.censored = 1;
    write_hs_bench_csv(dir + "_hs.csv", {4, 4, 4, 4}, r);
    std::string hs = read_file(dir + "_hs.csv");
    CHECK(hs == "m_per_stage,mean_ratio,stderr,censored_count\n4|4|4|4,2.5,0.25,1\n");

    // byte-for-byte stable across rewrites
    write_fid_csv(dir + "_fid.csv", {{"colourization", "default", 12.5}, {"sr", "no_hs", 3.25}});
    CHECK(read_file(dir + "_fid.csv") == fid);
    std::remove((dir + "_fid.csv").c_str());
    std::remove((dir + "_fwv.csv").c_str());
    std::remove((dir + "_hs.csv").c_str());
}
