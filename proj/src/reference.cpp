#include "aad/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aad/kernels.hpp"
#include "aad/rng.hpp"

namespace aad::reference {

void fir_filter(std::span<const double> h, std::span<const double> x, std::ptrdiff_t offset,
                std::span<double> out)
{
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    // Full convolution, then the requested window of it.
    std::vector<double> full(x.size() + h.size() - 1, 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < h.size(); ++k) full[i + k] += x[i] * h[k];
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto j = static_cast<std::ptrdiff_t>(i) + offset;
        out[i] = (j >= 0 && j < static_cast<std::ptrdiff_t>(full.size())) ? full[j] : 0.0;
    }
}

std::vector<double> xcorr_scan(std::span<const double> recorded,
                               std::span<const double> reference, int max_lag)
{
    const auto nr = static_cast<std::ptrdiff_t>(recorded.size());
    const auto nf = static_cast<std::ptrdiff_t>(reference.size());
    std::vector<double> score;
    for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
        double acc = 0.0, er = 0.0, ef = 0.0;
        bool any = false;
        for (std::ptrdiff_t t = 0; t < nr; ++t) {
            const std::ptrdiff_t j = t - lag;
            if (j < 0 || j >= nf) continue;
            any = true;
            acc += recorded[t] * reference[j];
            er += recorded[t] * recorded[t];
            ef += reference[j] * reference[j];
        }
        score.push_back(any && er > 0.0 && ef > 0.0 ? acc / std::sqrt(er * ef)
                                                    : std::numeric_limits<double>::quiet_NaN());
    }
    return score;
}

Eigen::MatrixXd gammatone_bank(std::span<const double> x,
                               std::span<const std::complex<double>> poles,
                               std::span<const double> gains,
                               std::span<std::array<std::complex<double>, 4>> state)
{
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(poles.size()), n);
    for (std::size_t b = 0; b < poles.size(); ++b) {
        std::vector<std::complex<double>> stage(x.begin(), x.end());
        for (int k = 0; k < 4; ++k) {
            std::complex<double> prev = state.empty() ? 0.0 : state[b][k];
            for (auto& v : stage) {
                prev = v + poles[b] * prev;
                v = prev;
            }
            if (!state.empty()) state[b][k] = prev;
        }
        for (Eigen::Index i = 0; i < n; ++i) out(static_cast<Eigen::Index>(b), i) = gains[b] * stage[i].real();
    }
    return out;
}

std::vector<GramStats> block_stats(const DesignSource& source, std::span<const RowRange> blocks)
{
    std::vector<GramStats> out;
    for (const RowRange& b : blocks) {
        Eigen::MatrixXd x(b.size(), source.dims());
        Eigen::MatrixXd y(b.size(), source.targets());
        source.fill(b.begin, b.end, x, y);
        GramStats s(source.dims(), source.targets());
        s.n = b.size();
        s.xx = x.transpose() * x;
        s.x_sum = x.colwise().sum().transpose();
        s.xy = x.transpose() * y;
        s.y_sum = y.colwise().sum().transpose();
        s.y_sq = y.array().square().colwise().sum().transpose();
        out.push_back(std::move(s));
    }
    return out;
}

void shifted_lag_stats(std::span<const double> feature, const Eigen::MatrixXd& targets,
                       int lag_min, int lag_max, std::int64_t shift, Eigen::MatrixXd& xx,
                       Eigen::MatrixXd& xy)
{
    const auto t = static_cast<std::int64_t>(feature.size());
    const std::int64_t s = ((shift % t) + t) % t;
    std::vector<double> rotated(feature.size());
    for (std::int64_t i = 0; i < t; ++i) rotated[(i + s) % t] = feature[i];

    const int taps = lag_max - lag_min;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(t, taps);
    for (std::int64_t row = 0; row < t; ++row)
        for (int j = 0; j < taps; ++j) {
            const std::int64_t src = row - (lag_min + j);
            if (src >= 0 && src < t) x(row, j) = rotated[src];
        }
    xx = x.transpose() * x;
    xy = x.transpose() * targets.transpose();
}

std::vector<int> sign_flip_max_clusters(const Eigen::MatrixXd& trfs, Eigen::Index channels,
                                        double threshold, int n_perm, std::uint64_t seed)
{
    const Eigen::Index participants = trfs.cols();
    const Eigen::Index taps = trfs.rows() / channels;
    std::vector<int> out;
    for (int p = 0; p < n_perm; ++p) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(p));
        std::bernoulli_distribution coin(0.5);
        std::vector<double> signs(participants);
        for (auto& s : signs) s = coin(rng) ? 1.0 : -1.0;
        int best = 0;
        for (Eigen::Index c = 0; c < channels; ++c) {
            int run = 0;
            for (Eigen::Index j = 0; j < taps; ++j) {
                double avg = 0.0;
                for (Eigen::Index i = 0; i < participants; ++i) avg += signs[i] * trfs(c * taps + j, i);
                avg /= static_cast<double>(participants);
                run = avg * avg > threshold ? run + 1 : 0;
                best = std::max(best, run);
            }
        }
        out.push_back(best);
    }
    return out;
}

} // namespace aad::reference
