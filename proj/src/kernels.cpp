#include "aad/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/FFT>

#include "aad/error.hpp"
#include "aad/rng.hpp"

namespace aad::kernels {

void fir_filter(std::span<const double> h, std::span<const double> x, std::ptrdiff_t offset,
                std::span<double> out)
{
    const auto taps = static_cast<std::ptrdiff_t>(h.size());
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto n_out = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n_out; ++i) {
        const std::ptrdiff_t c = i + offset;
        const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, c - n + 1);
        const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(taps - 1, c);
        double acc = 0.0;
        for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) acc += h[k] * x[c - k];
        out[i] = acc;
    }
}

std::vector<double> xcorr_scan(std::span<const double> recorded,
                               std::span<const double> reference, int max_lag)
{
    const auto nr = static_cast<std::ptrdiff_t>(recorded.size());
    const auto nf = static_cast<std::ptrdiff_t>(reference.size());
    std::vector<double> rec_sq(nr + 1, 0.0), ref_sq(nf + 1, 0.0);
    for (std::ptrdiff_t i = 0; i < nr; ++i) rec_sq[i + 1] = rec_sq[i] + recorded[i] * recorded[i];
    for (std::ptrdiff_t i = 0; i < nf; ++i) ref_sq[i + 1] = ref_sq[i] + reference[i] * reference[i];

    std::vector<double> score(2 * static_cast<std::size_t>(max_lag) + 1);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i <= 2 * max_lag; ++i) {
        const std::ptrdiff_t lag = i - max_lag;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, lag);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(nr, nf + lag);
        if (t1 <= t0) {
            score[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double acc = 0.0;
        for (std::ptrdiff_t t = t0; t < t1; ++t) acc += recorded[t] * reference[t - lag];
        const double e_rec = rec_sq[t1] - rec_sq[t0];
        const double e_ref = ref_sq[t1 - lag] - ref_sq[t0 - lag];
        score[i] = (e_rec > 0.0 && e_ref > 0.0) ? acc / std::sqrt(e_rec * e_ref)
                                                : std::numeric_limits<double>::quiet_NaN();
    }
    return score;
}

Eigen::MatrixXd gammatone_bank(std::span<const double> x,
                               std::span<const std::complex<double>> poles,
                               std::span<const double> gains,
                               std::span<std::array<std::complex<double>, 4>> state)
{
    const auto bands = static_cast<Eigen::Index>(poles.size());
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd out(bands, n);
#pragma omp parallel for schedule(dynamic, 1)
    for (Eigen::Index b = 0; b < bands; ++b) {
        const std::complex<double> p = poles[b];
        std::complex<double> s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
        if (!state.empty()) {
            s1 = state[b][0]; s2 = state[b][1]; s3 = state[b][2]; s4 = state[b][3];
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            s1 = x[i] + p * s1;
            s2 = s1 + p * s2;
            s3 = s2 + p * s3;
            s4 = s3 + p * s4;
            out(b, i) = gains[b] * s4.real();
        }
        if (!state.empty()) state[b] = {s1, s2, s3, s4};
    }
    return out;
}

std::vector<GramStats> block_stats(const DesignSource& source, std::span<const RowRange> blocks)
{
    std::vector<GramStats> out(blocks.size());
    const auto nb = static_cast<std::ptrdiff_t>(blocks.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < nb; ++b) out[b] = range_stats(source, blocks[b].begin, blocks[b].end);
    return out;
}

namespace {

std::vector<std::complex<double>> forward_fft(std::span<const double> x)
{
    Eigen::FFT<double> fft;
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out;
    fft.fwd(out, in);
    return out;
}

std::vector<double> inverse_fft(const std::vector<std::complex<double>>& spec)
{
    Eigen::FFT<double> fft;
    std::vector<double> out;
    fft.inv(out, spec);
    return out;
}

} // namespace

ShiftedLagStats::ShiftedLagStats(std::span<const double> feature, const Eigen::MatrixXd& targets,
                                 int lag_min, int lag_max)
    : x_(feature.begin(), feature.end())
    , y_(targets)
    , lag_min_(lag_min)
    , lag_max_(lag_max)
{
    const auto t = static_cast<Eigen::Index>(x_.size());
    if (lag_max <= lag_min) throw ParameterError("ShiftedLagStats: empty lag range");
    if (targets.cols() != t) throw ParameterError("ShiftedLagStats: length mismatch");
    const int reach = std::max(std::abs(lag_min), std::abs(lag_max));
    if (t <= 2 * static_cast<Eigen::Index>(reach + taps())) throw LengthError("ShiftedLagStats: signal too short for lags");

    const auto xf = forward_fft(x_);
    std::vector<std::complex<double>> spec(xf.size());
    for (std::size_t k = 0; k < xf.size(); ++k) spec[k] = xf[k] * std::conj(xf[k]);
    const std::vector<double> ac = inverse_fft(spec);
    auto_.assign(ac.begin(), ac.begin() + taps());

    cross_.resize(t, y_.rows());
    for (Eigen::Index c = 0; c < y_.rows(); ++c) {
        std::vector<double> yc(t);
        for (Eigen::Index i = 0; i < t; ++i) yc[i] = y_(c, i);
        const auto yf = forward_fft(yc);
        for (std::size_t k = 0; k < yf.size(); ++k) spec[k] = yf[k] * std::conj(xf[k]);
        const std::vector<double> cc = inverse_fft(spec);
        for (Eigen::Index i = 0; i < t; ++i) cross_(i, c) = cc[i];
    }
}

void ShiftedLagStats::compute(std::int64_t shift, Eigen::MatrixXd& xx, Eigen::MatrixXd& xy) const
{
    const auto t = static_cast<std::int64_t>(x_.size());
    const std::int64_t s = ((shift % t) + t) % t;
    const int p = taps();
    // circularly rotated feature, any integer index
    auto xc = [&](std::int64_t i) { return x_[static_cast<std::size_t>((((i - s) % t) + t) % t)]; };
    // zero-filled rotated feature
    auto xz = [&](std::int64_t i) { return (i < 0 || i >= t) ? 0.0 : xc(i); };

    xx.resize(p, p);
    const std::int64_t la0 = lag_min_;
    for (int b = 0; b < p; ++b) {
        const std::int64_t lb = lag_min_ + b;
        double edge = 0.0;
        const std::int64_t hi = std::max<std::int64_t>({0, la0, lb});
        const std::int64_t lo = t + std::min<std::int64_t>({0, la0, lb});
        for (std::int64_t u = 0; u < hi; ++u) edge += xc(u - la0) * xc(u - lb);
        for (std::int64_t u = lo; u < t; ++u) edge += xc(u - la0) * xc(u - lb);
        xx(0, b) = auto_[static_cast<std::size_t>(std::abs(la0 - lb))] - edge;
    }
    for (int a = 1; a < p; ++a) {
        const std::int64_t la = lag_min_ + a - 1;
        for (int b = a; b < p; ++b) {
            const std::int64_t lb = lag_min_ + b - 1;
            xx(a, b) = xx(a - 1, b - 1) + xz(-1 - la) * xz(-1 - lb) - xz(t - 1 - la) * xz(t - 1 - lb);
        }
    }
    xx.triangularView<Eigen::StrictlyLower>() = xx.transpose();

    const Eigen::Index channels = y_.rows();
    xy.resize(p, channels);
    for (int b = 0; b < p; ++b) {
        const std::int64_t lb = lag_min_ + b;
        const std::int64_t m = (((lb + s) % t) + t) % t;
        for (Eigen::Index c = 0; c < channels; ++c) {
            double edge = 0.0;
            if (lb > 0) {
                for (std::int64_t u = 0; u < lb; ++u) edge += xc(u - lb) * y_(c, u);
            } else if (lb < 0) {
                for (std::int64_t u = t + lb; u < t; ++u) edge += xc(u - lb) * y_(c, u);
            }
            xy(b, c) = cross_(m, c) - edge;
        }
    }
}

int longest_run_above(std::span<const double> power, double threshold)
{
    int best = 0, run = 0;
    for (double v : power) {
        run = v > threshold ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

std::vector<int> sign_flip_max_clusters(const Eigen::MatrixXd& trfs, Eigen::Index channels,
                                        double threshold, int n_perm, std::uint64_t seed)
{
    const Eigen::Index participants = trfs.cols();
    const Eigen::Index taps = trfs.rows() / channels;
    std::vector<int> out(static_cast<std::size_t>(n_perm));
#pragma omp parallel
    {
        Eigen::VectorXd signs(participants);
        Eigen::VectorXd power(trfs.rows());
#pragma omp for schedule(static)
        for (int p = 0; p < n_perm; ++p) {
            Rng rng = make_rng(seed, static_cast<std::uint64_t>(p));
            std::bernoulli_distribution coin(0.5);
            for (Eigen::Index i = 0; i < participants; ++i) signs[i] = coin(rng) ? 1.0 : -1.0;
            power.noalias() = trfs * signs;
            power /= static_cast<double>(participants);
            power = power.array().square();
            int best = 0;
            for (Eigen::Index c = 0; c < channels; ++c)
                best = std::max(best, longest_run_above({power.data() + c * taps, static_cast<std::size_t>(taps)}, threshold));
            out[static_cast<std::size_t>(p)] = best;
        }
    }
    return out;
}

} // namespace aad::kernels
