#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "aad/dataset.hpp"
#include "aad/linear.hpp"

namespace aad {

/// Per-participant TRFs sharing one lag axis and channel order.
struct TrfSet {
    std::vector<Trf> members;

    void add(Trf trf);
    Trf grand_average() const;
    /// (channels * taps) x members, channel-major rows.
    Eigen::MatrixXd stacked() const;
};

Trf average_trfs(std::span<const Trf> trfs);

/// Leave-one-trial-out forward models, one per held-out trial.
std::vector<Trf> crossval_trf_folds(std::span<const TrialBundle> trials, FeatureKind kind, SpeakerRole role,
                                    const LagSpec& lags = LagSpec::forward_default());
/// Mean of the leave-one-trial-out forward models.
Trf crossval_trf(std::span<const TrialBundle> trials, FeatureKind kind, SpeakerRole role,
                 const LagSpec& lags = LagSpec::forward_default());

Trf difference_trf(const Trf& attended, const Trf& ignored);

/// Circular-shift offsets in samples: `n` distinct values drawn uniformly
/// from [min_shift, length - min_shift].
std::vector<std::int64_t> draw_shifts(Eigen::Index length, int n, Eigen::Index min_shift, std::uint64_t seed);

/// Leave-one-trial-out forward models refitted with the feature circularly
/// shifted. Entry [k * trials + i] is the model for shift k with trial i held out.
std::vector<Trf> null_trfs(std::span<const TrialBundle> trials, FeatureKind kind, SpeakerRole role,
                           int n_shifts = 500, double min_shift_s = 5.0, std::uint64_t seed = 0,
                           const LagSpec& lags = LagSpec::forward_default());

/// Mean over held-out trials for each shift: n_shifts participant-level nulls.
std::vector<Trf> null_trf_means(std::span<const Trf> nulls, std::size_t trials);

struct Cluster {
    int channel = 0;
    int first_tap = 0; // inclusive
    int last_tap = 0;  // inclusive
    double start_latency_s = 0.0;
    double end_latency_s = 0.0;
    int size = 0;
    double mass = 0.0; // summed supra-threshold power
    double p_value = 1.0;
};

struct ClusterResult {
    std::vector<Cluster> clusters;
    double threshold = 0.0;
    int statistic = 0; // largest cluster size
    std::vector<int> null_statistics;

    double min_p() const;
    double total_mass() const;
    double max_mass() const;
};

/// Percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double pct);

/// Maximal supra-threshold runs of squared coefficients, per channel.
std::vector<Cluster> find_clusters(const Trf& trf, double threshold);

/// Sign-flip cluster permutation test. The threshold is the `threshold_pct`
/// percentile of the squared null coefficients; the statistic is the largest
/// cluster over channels in the participant average.
ClusterResult cluster_permutation_test(std::span<const Trf> participant_trfs, std::span<const Trf> null_trfs,
                                       int n_perm = 1000, double threshold_pct = 99.0, std::uint64_t seed = 0);

/// significant[i] = p[i] < alpha / m.
std::vector<bool> bonferroni(std::span<const double> p_values, int m, double alpha = 0.05);
double bonferroni_threshold(int m, double alpha = 0.05);

/// Columns: latency_s then one column per channel.
void write_trf_csv(const std::filesystem::path& path, const Trf& trf);
/// Latencies in milliseconds.
nlohmann::json cluster_json(const ClusterResult& result);

} // namespace aad
