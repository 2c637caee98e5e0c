#include "aad/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include "aad/error.hpp"
#include "aad/kernels.hpp"

namespace aad {

namespace {

double sinc(double x)
{
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

void require_finite(std::span<const double> x, const char* what)
{
    for (double v : x) {
        if (!std::isfinite(v)) throw ParameterError(std::string(what) + ": non-finite sample");
    }
}

} // namespace

Signal::Signal(std::vector<double> samples, double fs)
    : samples_(std::move(samples))
    , fs_(fs)
{
    if (!(fs > 0.0) || !std::isfinite(fs)) throw ParameterError("Signal: fs must be positive");
    require_finite(samples_, "Signal");
}

MultiSignal::MultiSignal(std::vector<std::string> channels, Eigen::MatrixXd data, double fs)
    : channels_(std::move(channels))
    , data_(std::move(data))
    , fs_(fs)
{
    if (!(fs > 0.0) || !std::isfinite(fs)) throw ParameterError("MultiSignal: fs must be positive");
    if (static_cast<Eigen::Index>(channels_.size()) != data_.rows())
        throw ParameterError("MultiSignal: channel names do not match data rows");
    std::unordered_set<std::string> seen(channels_.begin(), channels_.end());
    if (seen.size() != channels_.size()) throw ParameterError("MultiSignal: duplicate channel name");
    if (!data_.allFinite()) throw ParameterError("MultiSignal: non-finite sample");
}

Signal MultiSignal::channel(Eigen::Index c) const
{
    std::vector<double> v(data_.cols());
    Eigen::Map<Eigen::RowVectorXd>(v.data(), data_.cols()) = data_.row(c);
    return {std::move(v), fs_};
}

MultiSignal MultiSignal::slice(Eigen::Index begin, Eigen::Index end) const
{
    if (begin < 0 || end > length() || begin > end) throw ParameterError("MultiSignal::slice: bad range");
    return {channels_, data_.middleCols(begin, end - begin), fs_};
}

double FirFilter::magnitude(double freq_hz) const
{
    const double w = 2.0 * std::numbers::pi * freq_hz / fs;
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < coefficients.size(); ++n)
        acc += coefficients[n] * std::polar(1.0, -w * static_cast<double>(n));
    return std::abs(acc);
}

FirFilter design_highpass_sinc(double cutoff_hz, int order, double fs)
{
    if (order < 2) throw ParameterError("design_highpass_sinc: order must be >= 2");
    if (!(fs > 0.0)) throw ParameterError("design_highpass_sinc: fs must be positive");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0))
        throw ParameterError("design_highpass_sinc: cutoff must lie in (0, fs/2)");

    const std::size_t length = static_cast<std::size_t>(order) + 1;
    const double center = static_cast<double>(order) / 2.0;
    const double fc = cutoff_hz / fs;

    // All-pass (a delta, or a fractional-delay sinc for odd orders) minus a
    // low-pass; both are normalized to unit DC gain so the DC gain is zero.
    std::vector<double> allpass(length), lowpass(length);
    for (std::size_t n = 0; n < length; ++n) {
        const double m = static_cast<double>(n) - center;
        const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / order);
        allpass[n] = w * sinc(m);
        lowpass[n] = w * 2.0 * fc * sinc(2.0 * fc * m);
    }
    const double sa = std::accumulate(allpass.begin(), allpass.end(), 0.0);
    const double sl = std::accumulate(lowpass.begin(), lowpass.end(), 0.0);

    FirFilter f;
    f.coefficients.resize(length);
    for (std::size_t n = 0; n < length; ++n) f.coefficients[n] = allpass[n] / sa - lowpass[n] / sl;
    f.cutoff_hz = cutoff_hz;
    f.order = order;
    f.fs = fs;
    f.window = WindowKind::hamming;
    return f;
}

Signal apply_fir(const FirFilter& filter, const Signal& signal, bool compensate_delay)
{
    if (signal.size() <= filter.coefficients.size())
        throw LengthError("apply_fir: signal shorter than filter");
    std::vector<double> out(signal.size());
    const std::ptrdiff_t offset = compensate_delay ? filter.order / 2 : 0;
    kernels::fir_filter(filter.coefficients, signal.samples(), offset, out);
    return {std::move(out), signal.fs()};
}

MultiSignal apply_fir(const FirFilter& filter, const MultiSignal& signal, bool compensate_delay)
{
    Eigen::MatrixXd out(signal.channel_count(), signal.length());
    for (Eigen::Index c = 0; c < signal.channel_count(); ++c) {
        const Signal filtered = apply_fir(filter, signal.channel(c), compensate_delay);
        out.row(c) = filtered.eigen().transpose();
    }
    return {signal.channels(), std::move(out), signal.fs()};
}

Ratio resample_ratio(double fs, double target_fs, std::int64_t max_term)
{
    if (!(fs > 0.0) || !(target_fs > 0.0)) throw ParameterError("resample: rates must be positive");
    const double r = target_fs / fs;

    if (std::round(fs) == fs && std::round(target_fs) == target_fs && fs < 9e15 && target_fs < 9e15) {
        const auto a = static_cast<std::int64_t>(target_fs);
        const auto b = static_cast<std::int64_t>(fs);
        const std::int64_t g = std::gcd(a, b);
        if (a / g <= max_term && b / g <= max_term) return {a / g, b / g};
        throw ParameterError("resample: reduced ratio exceeds the term bound");
    }

    // Continued-fraction convergents of r.
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double x = r;
    for (int it = 0; it < 64; ++it) {
        const double a = std::floor(x);
        const auto ai = static_cast<std::int64_t>(a);
        const std::int64_t p2 = ai * p1 + p0;
        const std::int64_t q2 = ai * q1 + q0;
        if (p2 > max_term || q2 > max_term) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - r) <= 1e-12 * r) return {p1, q1};
        const double frac = x - a;
        if (frac < 1e-15) break;
        x = 1.0 / frac;
    }
    throw ParameterError("resample: rate ratio is not a bounded rational");
}

namespace {

std::vector<double> resample_samples(std::span<const double> x, Ratio ratio)
{
    const std::int64_t p = ratio.up;
    const std::int64_t q = ratio.down;
    const auto n_in = static_cast<std::int64_t>(x.size());
    const auto n_out = static_cast<std::int64_t>(
        std::llround(static_cast<double>(n_in) * static_cast<double>(p) / static_cast<double>(q)));

    const std::int64_t max_pq = std::max(p, q);
    const std::int64_t half = 10 * max_pq;
    const std::int64_t taps = 2 * half + 1;
    const double fc = 0.5 / static_cast<double>(max_pq);
    constexpr double beta = 5.0;
    const double i0_beta = std::cyl_bessel_i(0.0, beta);

    std::vector<double> h(static_cast<std::size_t>(taps));
    for (std::int64_t k = 0; k < taps; ++k) {
        const double m = static_cast<double>(k - half);
        const double r = m / static_cast<double>(half);
        const double win = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
        h[static_cast<std::size_t>(k)] = 2.0 * fc * sinc(2.0 * fc * m) * win;
    }
    const double hsum = std::accumulate(h.begin(), h.end(), 0.0);
    for (double& v : h) v *= static_cast<double>(p) / hsum;

    std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 0; m < n_out; ++m) {
        const std::int64_t c = m * q + half;
        // k = c - n*p must lie in [0, taps)
        const std::int64_t lo_num = c - taps + 1;
        const std::int64_t n_lo = lo_num <= 0 ? 0 : (lo_num + p - 1) / p;
        std::int64_t n_hi = c / p;
        n_hi = std::min<std::int64_t>(n_hi, n_in - 1);
        double acc = 0.0;
        for (std::int64_t n = n_lo; n <= n_hi; ++n) acc += x[static_cast<std::size_t>(n)] * h[static_cast<std::size_t>(c - n * p)];
        y[static_cast<std::size_t>(m)] = acc;
    }
    return y;
}

} // namespace

Signal resample(const Signal& signal, double target_fs)
{
    const Ratio ratio = resample_ratio(signal.fs(), target_fs);
    if (ratio.up == ratio.down) return signal;
    return {resample_samples(signal.samples(), ratio), target_fs};
}

MultiSignal resample(const MultiSignal& signal, double target_fs)
{
    const Ratio ratio = resample_ratio(signal.fs(), target_fs);
    if (ratio.up == ratio.down) return signal;
    Eigen::MatrixXd out;
    for (Eigen::Index c = 0; c < signal.channel_count(); ++c) {
        const Signal ch = signal.channel(c);
        const std::vector<double> y = resample_samples(ch.samples(), ratio);
        if (c == 0) out.resize(signal.channel_count(), static_cast<Eigen::Index>(y.size()));
        out.row(c) = Eigen::Map<const Eigen::RowVectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    }
    return {signal.channels(), std::move(out), target_fs};
}

double mean(std::span<const double> x)
{
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x)
{
    if (x.empty()) return 0.0;
    const double mu = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

std::vector<double> standardize(std::span<const double> x)
{
    const double mu = mean(x);
    const double sd = stddev(x);
    if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(mu)))
        throw DegenerateSignalError("standardize: signal has zero variance");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mu) / sd;
    // Second pass removes the rounding residue of the first.
    const double mu2 = mean(out);
    const double sd2 = stddev(out);
    for (double& v : out) v = (v - mu2) / sd2;
    return out;
}

Signal standardize(const Signal& signal)
{
    return {standardize(signal.samples()), signal.fs()};
}

MultiSignal standardize(const MultiSignal& signal)
{
    Eigen::MatrixXd out(signal.channel_count(), signal.length());
    for (Eigen::Index c = 0; c < signal.channel_count(); ++c) {
        const Signal ch = signal.channel(c);
        const std::vector<double> z = standardize(ch.samples());
        out.row(c) = Eigen::Map<const Eigen::RowVectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    }
    return {signal.channels(), std::move(out), signal.fs()};
}

int xcorr_align(const Signal& recorded, const Signal& reference, int max_lag)
{
    if (recorded.fs() != reference.fs()) throw ParameterError("xcorr_align: sampling rates differ");
    if (max_lag < 0) throw ParameterError("xcorr_align: max_lag must be non-negative");
    const auto shortest = std::min(recorded.size(), reference.size());
    if (static_cast<std::size_t>(max_lag) >= shortest)
        throw ParameterError("xcorr_align: max_lag must be shorter than both signals");

    const std::vector<double> score = kernels::xcorr_scan(recorded.samples(), reference.samples(), max_lag);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < score.size(); ++i) {
        if (std::isnan(score[i])) continue;
        if (!found || score[i] > best_score) {
            best_score = score[i];
            best = static_cast<int>(i) - max_lag;
            found = true;
        }
    }
    if (!found) throw AlignmentError("xcorr_align: no lag with a non-empty overlap");
    return best;
}

} // namespace aad
