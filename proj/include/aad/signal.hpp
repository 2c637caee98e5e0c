#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace aad {

/// Uniformly sampled single-channel time series.
class Signal {
public:
    Signal() = default;
    Signal(std::vector<double> samples, double fs);

    std::span<const double> samples() const noexcept { return samples_; }
    const std::vector<double>& vec() const noexcept { return samples_; }
    double fs() const noexcept { return fs_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double operator[](std::size_t i) const noexcept { return samples_[i]; }

    Eigen::Map<const Eigen::VectorXd> eigen() const
    {
        return {samples_.data(), static_cast<Eigen::Index>(samples_.size())};
    }

private:
    std::vector<double> samples_;
    double fs_ = 1.0;
};

/// Named multichannel time series, stored channels x samples.
class MultiSignal {
public:
    MultiSignal() = default;
    MultiSignal(std::vector<std::string> channels, Eigen::MatrixXd data, double fs);

    const std::vector<std::string>& channels() const noexcept { return channels_; }
    const Eigen::MatrixXd& data() const noexcept { return data_; }
    double fs() const noexcept { return fs_; }
    Eigen::Index channel_count() const noexcept { return data_.rows(); }
    Eigen::Index length() const noexcept { return data_.cols(); }

    Signal channel(Eigen::Index c) const;
    MultiSignal slice(Eigen::Index begin, Eigen::Index end) const;

private:
    std::vector<std::string> channels_;
    Eigen::MatrixXd data_;
    double fs_ = 1.0;
};

enum class WindowKind { hamming, kaiser };

struct FirFilter {
    std::vector<double> coefficients;
    double cutoff_hz = 0.0;
    int order = 0;
    double fs = 0.0;
    WindowKind window = WindowKind::hamming;

    /// Magnitude of the frequency response at `freq_hz`.
    double magnitude(double freq_hz) const;
};

/// Windowed-sinc high-pass by spectral inversion. Odd orders yield the
/// even-length (type II) design with a half-sample center.
FirFilter design_highpass_sinc(double cutoff_hz, int order, double fs);

/// Linear convolution with zero-padded edges. With `compensate_delay` the
/// output is advanced by floor(order / 2) samples; length is preserved.
Signal apply_fir(const FirFilter& filter, const Signal& signal, bool compensate_delay);
MultiSignal apply_fir(const FirFilter& filter, const MultiSignal& signal, bool compensate_delay);

struct Ratio {
    std::int64_t up;
    std::int64_t down;
};

/// Rational approximation of target_fs / fs with bounded terms.
Ratio resample_ratio(double fs, double target_fs, std::int64_t max_term = 1 << 20);

/// Polyphase rational resampling with a Kaiser-windowed anti-alias filter.
Signal resample(const Signal& signal, double target_fs);
MultiSignal resample(const MultiSignal& signal, double target_fs);

/// Zero mean, unit population standard deviation.
Signal standardize(const Signal& signal);
MultiSignal standardize(const MultiSignal& signal);
std::vector<double> standardize(std::span<const double> x);

/// Lag in samples such that recorded(t) best matches reference(t - lag).
int xcorr_align(const Signal& recorded, const Signal& reference, int max_lag);

double mean(std::span<const double> x);
/// Population standard deviation.
double stddev(std::span<const double> x);

} // namespace aad
