#pragma once

// OpenMP-parallel versions of the hot loops. Each kernel has a serial
// counterpart in reference.hpp with the same signature; the tests check
// that both agree and bench/ compares their throughput.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "aad/suffstats.hpp"

namespace aad::kernels {

/// out[i] = sum_k h[k] * x[i + offset - k] with zero padding, i in [0, out.size()).
void fir_filter(std::span<const double> h, std::span<const double> x, std::ptrdiff_t offset,
                std::span<double> out);

/// Normalized cross-correlation of recorded(t) against reference(t - lag) for
/// lag in [-max_lag, max_lag]. Entries with an empty or all-zero overlap are NaN.
std::vector<double> xcorr_scan(std::span<const double> recorded,
                               std::span<const double> reference, int max_lag);

/// Real part of a cascade of four complex one-pole resonators per band.
/// poles[b] = a * exp(i*omega_b); gains[b] scales the output of band b.
/// `state` (one entry per band, optional) carries the resonator memory
/// across calls so long inputs can be processed in chunks.
/// Returns bands x samples.
Eigen::MatrixXd gammatone_bank(std::span<const double> x,
                               std::span<const std::complex<double>> poles,
                               std::span<const double> gains,
                               std::span<std::array<std::complex<double>, 4>> state = {});

/// Sufficient statistics for each row block, computed in parallel.
std::vector<GramStats> block_stats(const DesignSource& source, std::span<const RowRange> blocks);

/// Lag-matrix statistics of a single predictor against a multichannel target
/// when the predictor is circularly rotated by `shift` samples before the
/// zero-filled lag matrix is formed. The circular auto- and cross-correlations
/// are computed once; each shift then costs O(taps^2) instead of O(T*taps).
class ShiftedLagStats {
public:
    /// `feature` has length T; `targets` is channels x T; lags are
    /// [lag_min, lag_max) with the convention row t holds x(t - lag).
    ShiftedLagStats(std::span<const double> feature, const Eigen::MatrixXd& targets, int lag_min,
                    int lag_max);

    /// X'X (taps x taps) and X'Y (taps x channels) for the rotated feature
    /// x_s(u) = x((u - shift) mod T).
    void compute(std::int64_t shift, Eigen::MatrixXd& xx, Eigen::MatrixXd& xy) const;

    Eigen::Index length() const noexcept { return static_cast<Eigen::Index>(x_.size()); }
    int taps() const noexcept { return lag_max_ - lag_min_; }

private:
    std::vector<double> x_;
    Eigen::MatrixXd y_;
    int lag_min_;
    int lag_max_;
    std::vector<double> auto_;   // circular autocorrelation, lags [0, taps)
    Eigen::MatrixXd cross_;      // circular cross-correlation, T x channels
};

/// Largest supra-threshold run length (over channels) of the squared
/// sign-flipped average, one entry per permutation. `trfs` holds one
/// participant TRF per column (channels*taps rows, channel-major).
/// Signs for permutation p come from an RNG seeded with mix_seed(seed, p).
std::vector<int> sign_flip_max_clusters(const Eigen::MatrixXd& trfs, Eigen::Index channels,
                                        double threshold, int n_perm, std::uint64_t seed);

/// Largest run of consecutive entries above `threshold` in `power`.
int longest_run_above(std::span<const double> power, double threshold);

} // namespace aad::kernels
