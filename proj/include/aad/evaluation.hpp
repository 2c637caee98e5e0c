#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aad/dataset.hpp"
#include "aad/linear.hpp"
#include "aad/suffstats.hpp"

namespace aad {

struct OuterFold {
    int test = 0;           // index into the trial list
    std::vector<int> train; // concatenation order of the training trials
};

/// One outer fold per held-out trial; the remaining trials are concatenated
/// in a seeded order and cut into `inner` contiguous, near-equal splits.
struct NestedCvPlan {
    int n_trials = 0;
    int inner = 5;
    std::uint64_t seed = 0;
    std::vector<OuterFold> folds;
};

NestedCvPlan make_nested_cv(int n_trials = 16, int inner = 5, std::uint64_t seed = 0);

/// `k` contiguous ranges covering [0, rows) whose sizes differ by at most one.
std::vector<RowRange> equal_splits(Eigen::Index rows, int k);

/// A piece of one trial in the concatenated training time of a fold.
struct TrialPiece {
    int trial;          // index into the trial list
    RowRange rows;      // trial-local sample range
};
/// Inner splits of `fold` as lists of trial pieces.
std::vector<std::vector<TrialPiece>> inner_pieces(const OuterFold& fold, std::span<const Eigen::Index> lengths,
                                                  int inner);

/// Statistics of one design source cached per row block; any row range is
/// assembled from whole blocks plus its partial edges.
class BlockedStats {
public:
    BlockedStats(const DesignSource& source, Eigen::Index block);

    GramStats range(RowRange rows) const;
    const GramStats& total() const noexcept { return total_; }

private:
    const DesignSource* source_;
    std::vector<RowRange> blocks_;
    std::vector<GramStats> stats_;
    GramStats total_;
};

/// Design rows taken from a prebuilt matrix; the last `targets` columns are
/// the targets.
class MatrixSource final : public DesignSource {
public:
    MatrixSource(const Eigen::MatrixXd& m, Eigen::Index targets);
    Eigen::Index rows() const override { return m_.rows(); }
    Eigen::Index dims() const override { return m_.cols() - targets_; }
    Eigen::Index targets() const override { return targets_; }
    void fill(Eigen::Index r0, Eigen::Index r1, Eigen::Ref<Eigen::MatrixXd> x,
              Eigen::Ref<Eigen::MatrixXd> y) const override;

private:
    const Eigen::MatrixXd& m_;
    Eigen::Index targets_;
};

/// 1e-9, 1e-8, ..., 1e9.
std::vector<double> lambda_grid();

struct BackwardFold {
    int test = 0;
    BackwardModel model;
    std::vector<double> inner_scores; // mean inner-validation correlation per grid value
};

/// Per outer fold: ridge models over the grid on each inner split, the grid
/// value with the best mean validation correlation, then a refit on all
/// training data of the fold.
std::vector<BackwardFold> tune_backward(const NestedCvPlan& plan, std::span<const TrialBundle> trials,
                                        FeatureKind kind, SpeakerRole role = SpeakerRole::attended,
                                        const LagSpec& lags = LagSpec::backward_default(),
                                        std::span<const double> grid = {});

/// Index of the best finite score (first on ties).
std::size_t select_best(std::span<const double> scores);

/// Segment ranges at starts round(k * hop * fs) of length round(length * fs).
std::vector<RowRange> segment_trial(Eigen::Index samples, double fs, double length_s, double hop_s = 1.0);
std::vector<RowRange> segment_trial(const TrialBundle& trial, double length_s, double hop_s = 1.0);

struct AttentionMarker {
    double rho_attended = 0.0;
    double rho_ignored = 0.0;
    double delta = 0.0;
    double start_s = 0.0;
    double length_s = 0.0;

    bool correct() const noexcept { return delta > 0.0; }
};

/// Per segment: Pearson correlation of the reconstruction with both features
/// (0 for constant segments).
std::vector<AttentionMarker> markers_from_reconstruction(std::span<const double> reconstruction,
                                                         std::span<const double> attended,
                                                         std::span<const double> ignored,
                                                         std::span<const RowRange> segments, double fs);

/// As above, but segment i is scored against the features of a uniformly
/// drawn segment j != i.
std::vector<AttentionMarker> null_markers_from_reconstruction(std::span<const double> reconstruction,
                                                              std::span<const double> attended,
                                                              std::span<const double> ignored,
                                                              std::span<const RowRange> segments, double fs,
                                                              std::uint64_t seed);

/// Reconstructs the whole trial once, then scores each segment.
std::vector<AttentionMarker> markers_backward(const BackwardModel& model, const TrialBundle& trial,
                                              std::span<const RowRange> segments);
std::vector<AttentionMarker> null_markers(const BackwardModel& model, const TrialBundle& trial,
                                          std::span<const RowRange> segments, std::uint64_t seed);

/// Fraction of markers with delta > 0.
double accuracy(std::span<const AttentionMarker> markers);

} // namespace aad
