#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aad/features.hpp"
#include "aad/signal.hpp"

namespace aad {

/// Half-open lag window [lag_min, lag_max) in samples at rate fs.
struct LagSpec {
    int lag_min = 0;
    int lag_max = 1;
    double fs = 64.0;

    LagSpec() = default;
    LagSpec(int lag_min, int lag_max, double fs);

    int taps() const noexcept { return lag_max - lag_min; }
    double latency(int tap) const noexcept { return (lag_min + tap) / fs; }

    /// -1 s .. +1.5 s at 64 Hz: 160 taps.
    static LagSpec forward_default() { return {-64, 96, 64.0}; }
    /// 0 .. 1 s at 64 Hz: 64 taps.
    static LagSpec backward_default() { return {0, 64, 64.0}; }

    friend bool operator==(const LagSpec&, const LagSpec&) = default;
};

enum class SpeakerRole { attended, ignored, difference, null };
std::string to_string(SpeakerRole role);
SpeakerRole parse_speaker_role(const std::string& name);

struct RidgeSolution {
    Eigen::VectorXd weights;
    double lambda = 0.0;
};

/// Forward model: channels x taps coefficients over a latency axis.
struct Trf {
    Eigen::MatrixXd coefficients;
    LagSpec lags;
    FeatureKind kind = FeatureKind::envelope;
    SpeakerRole role = SpeakerRole::attended;
    std::vector<std::string> channels;

    Eigen::VectorXd latencies() const;
};

/// Backward model: weights over (channel, lag), channel-major.
struct BackwardModel {
    Eigen::VectorXd weights;
    LagSpec lags;
    double lambda = 0.0;
    FeatureKind kind = FeatureKind::envelope;
    SpeakerRole role = SpeakerRole::attended;
    std::vector<std::string> channels;
};

/// T x (channels * taps); row t holds x_c(t - lag), zero outside the signal.
/// Columns are channel-major, lag-ascending.
Eigen::MatrixXd build_lag_matrix(const MultiSignal& signals, const LagSpec& lags);
Eigen::MatrixXd build_lag_matrix(std::span<const double> x, const LagSpec& lags);

/// T x (channels * taps); row t holds x_c(t + lag). This is the orientation
/// of a backward model: the EEG that follows the stimulus sample t.
Eigen::MatrixXd build_lead_matrix(const Eigen::MatrixXd& channels_by_time, const LagSpec& lags);

/// Ridge solutions from an eigendecomposition of a Gram matrix X'X. The
/// decomposition is reused across regularization values.
class RidgeSolver {
public:
    explicit RidgeSolver(const Eigen::MatrixXd& gram);

    /// (X'X + lambda I)^-1 X'y for every column of xy.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& xy, double lambda) const;
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

private:
    Eigen::MatrixXd eigenvectors_;
    Eigen::VectorXd eigenvalues_;
};

RidgeSolution ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda);

/// trace(X'X / T) / columns: the mean eigenvalue of the biased autocovariance.
double mean_eigen_lambda(const Eigen::MatrixXd& x);

/// One ridge fit per EEG channel, regularized by the mean eigenvalue of the
/// feature autocovariance (the normalized problem (X'X/T + l I) w = X'y/T).
Trf fit_trf(const FeatureSignal& feature, const MultiSignal& eeg, const LagSpec& lags);

/// Solves a forward model from accumulated statistics (X'X, X'Y).
Eigen::MatrixXd solve_trf(const Eigen::MatrixXd& xx, const Eigen::MatrixXd& xy);

BackwardModel fit_backward(const MultiSignal& eeg, const FeatureSignal& feature, const LagSpec& lags,
                           double lambda);

/// Applies the backward filter; output length equals the EEG length.
FeatureSignal reconstruct(const BackwardModel& model, const MultiSignal& eeg);

/// JSON header at `path` and float32 weights at `path`.f32.
void save_backward(const std::filesystem::path& path, const BackwardModel& model);
BackwardModel load_backward(const std::filesystem::path& path);

/// Sample Pearson correlation.
double pearson(std::span<const double> a, std::span<const double> b);

/// Pearson correlation, or 0 when either input is constant.
double pearson_or_zero(std::span<const double> a, std::span<const double> b);

} // namespace aad
