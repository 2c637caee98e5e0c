#pragma once

// Serial reference implementations of the kernels in kernels.hpp. They favor
// the most direct formulation (explicit lag matrices, plain loops) and are
// used by the tests as an independent check and by bench/ as a baseline.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "aad/suffstats.hpp"

namespace aad::reference {

void fir_filter(std::span<const double> h, std::span<const double> x, std::ptrdiff_t offset,
                std::span<double> out);

std::vector<double> xcorr_scan(std::span<const double> recorded,
                               std::span<const double> reference, int max_lag);

Eigen::MatrixXd gammatone_bank(std::span<const double> x,
                               std::span<const std::complex<double>> poles,
                               std::span<const double> gains,
                               std::span<std::array<std::complex<double>, 4>> state = {});

std::vector<GramStats> block_stats(const DesignSource& source, std::span<const RowRange> blocks);

/// Explicit zero-filled lag matrix of the rotated feature, then X'X and X'Y.
void shifted_lag_stats(std::span<const double> feature, const Eigen::MatrixXd& targets,
                       int lag_min, int lag_max, std::int64_t shift, Eigen::MatrixXd& xx,
                       Eigen::MatrixXd& xy);

std::vector<int> sign_flip_max_clusters(const Eigen::MatrixXd& trfs, Eigen::Index channels,
                                        double threshold, int n_perm, std::uint64_t seed);

} // namespace aad::reference
