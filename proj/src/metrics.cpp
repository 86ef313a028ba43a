#include "camnet/metrics.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "camnet/rng.hpp"

namespace camnet {

namespace {

constexpr uint64_t kBenchTag = 0x62656e6368ULL;  // benchmark trial streams

/// Eigendecomposition of a symmetric matrix (row-major). On return `a`
/// holds the eigenvectors as columns; returns ascending eigenvalues.
std::vector<double> sym_eig(std::vector<double>& a, int dim) {
    std::vector<double> w(dim);
    lapack_int info = LAPACKE_dsyev(LAPACK_ROW_MAJOR, 'V', 'U', dim, a.data(), dim, w.data());
    if (info != 0) throw MetricError("frechet_distance: eigendecomposition failed");
    return w;
}

/// Symmetric PSD square root; negative eigenvalues clamped to zero.
std::vector<double> sqrtm_psd(const std::vector<double>& m, int dim) {
    std::vector<double> v = m;
    std::vector<double> w = sym_eig(v, dim);
    for (double& x : w) x = std::sqrt(std::max(x, 0.0));
    std::vector<double> out(static_cast<size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k) s += v[i * dim + k] * w[k] * v[j * dim + k];
            out[i * dim + j] = s;
        }
    return out;
}

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, int dim) {
    std::vector<double> out(static_cast<size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            double aik = a[i * dim + k];
            for (int j = 0; j < dim; ++j) out[i * dim + j] += aik * b[k * dim + j];
        }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

FeatureStats feature_stats(const std::vector<Tensor>& images, FeatureNet& extractor) {
    if (images.size() < 2)
        throw MetricError("feature_stats: need at least 2 images, got " +
                          std::to_string(images.size()));
    const int dim = FeatureNet::kFinalDim;
    const int n = static_cast<int>(images.size());
    std::vector<std::vector<float>> feats;
    for (const Tensor& img : images) feats.push_back(extractor.pooled_features(img)[0]);
    FeatureStats st;
    st.dim = dim;
    st.n = n;
    st.mu.assign(dim, 0.0);
    for (const auto& f : feats)
        for (int d = 0; d < dim; ++d) st.mu[d] += f[d] / n;
    st.sigma.assign(static_cast<size_t>(dim) * dim, 0.0);
    for (const auto& f : feats)
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                st.sigma[i * dim + j] += (f[i] - st.mu[i]) * (f[j] - st.mu[j]) / (n - 1);
    return st;
}

double frechet_distance(const FeatureStats& p, const FeatureStats& q) {
    require(p.dim == q.dim, "frechet_distance: feature dimension mismatch (" +
                                std::to_string(p.dim) + " vs " + std::to_string(q.dim) + ")");
    const int dim = p.dim;
    double d2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        double d = p.mu[i] - q.mu[i];
        d2 += d * d;
    }
    double tr = 0.0;
    for (int i = 0; i < dim; ++i) tr += p.sigma[i * dim + i] + q.sigma[i * dim + i];
    // Tr((Sp^1/2 Sq Sp^1/2)^1/2) = sum of sqrt eigenvalues of the inner product
    std::vector<double> sp = sqrtm_psd(p.sigma, dim);
    std::vector<double> m = matmul(matmul(sp, q.sigma, dim), sp, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) {
            double s = 0.5 * (m[i * dim + j] + m[j * dim + i]);
            m[i * dim + j] = m[j * dim + i] = s;
        }
    std::vector<double> w = sym_eig(m, dim);
    double cross = 0.0;
    for (double x : w) cross += std::sqrt(std::max(x, 0.0));
    double fid = d2 + tr - 2.0 * cross;
    require(fid >= -1e-4, "frechet_distance: result below round-off tolerance");
    return std::max(fid, 0.0);
}

std::map<double, double> faithfulness_weighted_variance(const std::vector<Tensor>& samples,
                                                        const Tensor& target, const FwvConfig& cfg,
                                                        PerceptualDistance& dist) {
    if (samples.size() < 2)
        throw MetricError("faithfulness_weighted_variance: need at least 2 samples");
    for (double s : cfg.sigma_list)
        require(s > 0.0, "faithfulness_weighted_variance: bandwidths must be positive");
    for (const Tensor& s : samples)
        require(s.same_shape(target), "faithfulness_weighted_variance: sample/target shape "
                                      "mismatch");
    const int m = static_cast<int>(samples.size());
    Tensor mean = Tensor::zeros_like(target);
    for (const Tensor& s : samples)
        for (size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += s.data[i] / m;
    std::vector<double> d_target, d_mean;
    for (const Tensor& s : samples) {
        d_target.push_back(dist(s, target));
        d_mean.push_back(dist(s, mean));
    }
    std::map<double, double> out;
    for (double sigma : cfg.sigma_list) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
            double w = std::exp(-d_target[j] * d_target[j] / (2.0 * sigma * sigma));
            acc += w * d_mean[j] * d_mean[j];
        }
        out[sigma] = acc / m;
    }
    return out;
}

namespace {

/// Best finest-scale distance over vanilla candidates [c0, c1), evaluated in
/// bounded batches. Candidate keys depend only on the index, so candidate
/// sets at growing budgets are nested prefixes.
double best_vanilla_distance(CascadeWeights& weights, const ImagePyramid& cond,
                             const Tensor& target_fin, PerceptualDistance& dist, uint64_t seed,
                             int64_t input_index, int c0, int c1) {
    const CascadeConfig& ccfg = weights.cfg;
    double best = std::numeric_limits<double>::infinity();
    const int chunk = 32;
    for (int start = c0; start < c1; start += chunk) {
        int end = std::min(c1, start + chunk);
        int m = end - start;
        std::vector<LatentPyramid> cands;
        for (int c = start; c < end; ++c)
            cands.push_back(sample_latents(ccfg, seed, LatentUse::select, 0, input_index, c));
        Tape tape(/*record=*/false);
        std::vector<Node*> cond_nodes;
        for (int k = 0; k < ccfg.K; ++k) {
            std::vector<int> s = cond.levels[k].shape;
            s[0] = m;
            Tensor rep(s);
            for (int i = 0; i < m; ++i)
                std::copy_n(cond.levels[k].data.data(), cond.levels[k].data.size(),
                            rep.data.data() + i * cond.levels[k].data.size());
            cond_nodes.push_back(tape.leaf(std::move(rep)));
        }
        std::vector<const LatentPyramid*> ptrs;
        for (const LatentPyramid& c : cands) ptrs.push_back(&c);
        auto lat = batch_latents(tape, ccfg, ptrs, ccfg.K);
        auto outs = cascade_forward(tape, weights, cond_nodes, lat, ccfg.K);
        Node* pred = tape.clamp01(outs[ccfg.K - 1]);
        std::vector<int> ts = target_fin.shape;
        ts[0] = m;
        Tensor trep(ts);
        for (int i = 0; i < m; ++i)
            std::copy_n(target_fin.data.data(), target_fin.data.size(),
                        trep.data.data() + i * target_fin.data.size());
        Node* d = dist.distance_vec(tape, pred, tape.leaf(std::move(trep)));
        for (float v : d->value.data) best = std::min(best, static_cast<double>(v));
    }
    return best;
}

}  // namespace

HsBenchResult hs_efficiency_benchmark(CascadeWeights& weights, const std::vector<TrainItem>& inputs,
                                      const std::vector<int>& m_per_stage,
                                      PerceptualDistance& dist, int trials, uint64_t seed) {
    require(!inputs.empty(), "hs_efficiency_benchmark: no inputs");
    require(trials >= 1, "hs_efficiency_benchmark: trials must be >= 1");
    const int cap_mult = 512;
    HsBenchResult res;
    TrainConfig base;
    base.m_per_stage = m_per_stage;
    base.validate(weights.cfg.K);
    res.b_hs = base.m_total();

    std::vector<double> ratios;
    std::vector<std::vector<double>> curves;  // prefix-min distance per grid point
    double hs_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
        for (size_t i = 0; i < inputs.size(); ++i) {
            TrainConfig tc = base;
            tc.seed = mix_key({seed, kBenchTag, static_cast<uint64_t>(t)});
            SelectionRecord rec = hierarchical_select(weights, inputs[i].cond, inputs[i].target,
                                                      tc, dist, static_cast<int64_t>(i), 0);
            double target_d = rec.stage_distance.back();
            hs_sum += target_d;

            std::vector<double> curve;
            double best = std::numeric_limits<double>::infinity();
            int evaluated = 0;
            int mult = 1;
            double ratio;
            for (;;) {
                int budget = res.b_hs * mult;
                best = std::min(best, best_vanilla_distance(weights, inputs[i].cond,
                                                            inputs[i].target.levels.back(), dist,
                                                            tc.seed, static_cast<int64_t>(i),
                                                            evaluated, budget));
                evaluated = budget;
                curve.push_back(best);
                if (best <= target_d + 1e-12) {
                    ratio = mult;
                    break;
                }
                if (mult >= cap_mult) {
                    ratio = cap_mult;
                    ++res.censored;
                    break;
                }
                mult *= 2;
            }
            ratios.push_back(ratio);
            curves.push_back(std::move(curve));
        }
    }
    res.total_runs = static_cast<int>(ratios.size());
    res.mean_hs_distance = hs_sum / res.total_runs;
    double mean = 0.0;
    for (double r : ratios) mean += r / res.total_runs;
    res.mean_ratio = mean;
    if (res.total_runs > 1) {
        double var = 0.0;
        for (double r : ratios) var += (r - mean) * (r - mean) / (res.total_runs - 1);
        res.stderr_ratio = std::sqrt(var / res.total_runs);
    }
    size_t max_len = 0;
    for (const auto& c : curves) max_len = std::max(max_len, c.size());
    for (size_t j = 0; j < max_len; ++j) {
        double acc = 0.0;
        int cnt = 0;
        for (const auto& c : curves)
            if (j < c.size()) {
                acc += c[j];
                ++cnt;
            }
        res.budget_multipliers.push_back(static_cast<double>(1 << j));
        res.mean_vanilla_distance.push_back(acc / cnt);
    }
    return res;
}

double mode_coverage(const std::vector<Tensor>& samples,
                     const std::vector<std::array<float, 3>>& palette, const Tensor& region_mask) {
    require(!palette.empty(), "mode_coverage: empty palette");
    require(!samples.empty(), "mode_coverage: no samples");
    long long hits = 0;
    for (float v : region_mask.data)
        if (v > 0.5f) ++hits;
    if (hits == 0) throw MetricError("mode_coverage: region mask selects no pixels");
    const int H = region_mask.shape[region_mask.ndim() - 2];
    const int W = region_mask.shape[region_mask.ndim() - 1];
    std::set<int> seen;
    for (const Tensor& s : samples) {
        require(s.ndim() == 4 && s.c() == 3 && s.h() == H && s.w() == W,
                "mode_coverage: sample/mask shape mismatch");
        double mean[3] = {0, 0, 0};
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (region_mask.data[static_cast<size_t>(y) * W + x] <= 0.5f) continue;
                for (int c = 0; c < 3; ++c) mean[c] += s.at4(0, c, y, x);
            }
        for (double& v : mean) v /= static_cast<double>(hits);
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t p = 0; p < palette.size(); ++p) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                double diff = mean[c] - palette[p][c];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(p);
            }
        }
        seen.insert(best);
    }
    return static_cast<double>(seen.size()) / static_cast<double>(palette.size());
}

void write_fid_csv(const std::string& path, const std::vector<FidRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "write_fid_csv: cannot open " + path);
    f << "task,config,fid\n";
    for (const FidRow& r : rows) f << r.task << "," << r.config << "," << fmt(r.fid) << "\n";
}

void write_fwv_csv(const std::string& path, const std::vector<FwvRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "write_fwv_csv: cannot open " + path);
    f << "task,sigma,fwv\n";
    for (const FwvRow& r : rows)
        f << r.task << "," << fmt(r.sigma) << "," << fmt(r.fwv) << "\n";
}

void write_hs_bench_csv(const std::string& path, const std::vector<int>& m_per_stage,
                        const HsBenchResult& result) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "write_hs_bench_csv: cannot open " + path);
    f << "m_per_stage,mean_ratio,stderr,censored_count\n";
    std::string budgets;
    for (size_t i = 0; i < m_per_stage.size(); ++i) {
        if (i) budgets += "|";
        budgets += std::to_string(m_per_stage[i]);
    }
    f << budgets << "," << fmt(result.mean_ratio) << "," << fmt(result.stderr_ratio) << ","
      << result.censored << "\n";
}

}  // namespace camnet
