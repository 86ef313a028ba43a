#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "camnet/distance.hpp"
#include "camnet/imle.hpp"

namespace camnet {

class MetricError : public std::runtime_error {
public:
    explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Gaussian summary of a feature population.
struct FeatureStats {
    int dim = 0;
    int n = 0;
    std::vector<double> mu;     // dim
    std::vector<double> sigma;  // dim x dim, row-major, symmetric
};

/// Global-average-pooled final-stage features per image, with unbiased
/// covariance. Requires at least two images.
FeatureStats feature_stats(const std::vector<Tensor>& images, FeatureNet& extractor);

/// ||mu_p - mu_q||^2 + Tr(Sp + Sq - 2 (Sp^1/2 Sq Sp^1/2)^1/2), square roots
/// via symmetric eigendecomposition with negative eigenvalues clamped to 0.
/// Result clamped to >= 0 (tolerating -1e-4 of round-off).
double frechet_distance(const FeatureStats& p, const FeatureStats& q);

struct FwvConfig {
    std::vector<double> sigma_list{0.3, 0.2, 0.15};
    int samples_per_input = 16;
};

/// Diversity weighted by faithfulness: with y_bar the pixelwise sample mean,
/// w_j = exp(-d(y_j, target)^2 / (2 sigma^2)) and
/// FWV(sigma) = (1/m) sum_j w_j d(y_j, y_bar)^2.
std::map<double, double> faithfulness_weighted_variance(const std::vector<Tensor>& samples,
                                                        const Tensor& target, const FwvConfig& cfg,
                                                        PerceptualDistance& dist);

/// Sampling-efficiency comparison: how many independent full-pyramid
/// candidates vanilla search needs to match the finest-scale distance the
/// stage-wise search reaches with budget B = sum(m_per_stage).
struct HsBenchResult {
    int b_hs = 0;
    double mean_ratio = 0.0;
    double stderr_ratio = 0.0;
    int censored = 0;            // runs that hit the budget cap
    int total_runs = 0;
    double mean_hs_distance = 0.0;
    // curve: vanilla budget (normalized so B = 1) vs mean best distance
    std::vector<double> budget_multipliers;
    std::vector<double> mean_vanilla_distance;
};

/// For each (input, trial): run the stage-wise search, then grow the vanilla
/// budget on a doubling grid from B up to 512 B until its best candidate is
/// at least as close. Trials use independent derived rng keys.
HsBenchResult hs_efficiency_benchmark(CascadeWeights& weights, const std::vector<TrainItem>& inputs,
                                      const std::vector<int>& m_per_stage,
                                      PerceptualDistance& dist, int trials = 10,
                                      uint64_t seed = 0);

/// Fraction of palette entries hit: each sample's mean color over the mask
/// is assigned to the nearest palette entry (Euclidean in RGB).
double mode_coverage(const std::vector<Tensor>& samples,
                     const std::vector<std::array<float, 3>>& palette, const Tensor& region_mask);

// Deterministic CSV reports.
struct FidRow {
    std::string task, config;
    double fid;
};
struct FwvRow {
    std::string task;
    double sigma, fwv;
};
void write_fid_csv(const std::string& path, const std::vector<FidRow>& rows);
void write_fwv_csv(const std::string& path, const std::vector<FwvRow>& rows);
void write_hs_bench_csv(const std::string& path, const std::vector<int>& m_per_stage,
                        const HsBenchResult& result);

}  // namespace camnet
