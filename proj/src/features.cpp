#include "aad/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aad/error.hpp"
#include "aad/kernels.hpp"

namespace aad {

std::string to_string(FeatureKind kind)
{
    return kind == FeatureKind::envelope ? "envelope" : "onsets";
}

FeatureKind parse_feature_kind(const std::string& name)
{
    if (name == "envelope") return FeatureKind::envelope;
    if (name == "onsets" || name == "onset_envelope") return FeatureKind::onset_envelope;
    throw ParameterError("unknown feature kind: " + name);
}

double erb_number(double freq_hz) { return 21.4 * std::log10(1.0 + 0.00437 * freq_hz); }

double erb_number_to_hz(double erb) { return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437; }

double erb_bandwidth(double freq_hz) { return 24.7 * (0.00437 * freq_hz + 1.0); }

std::vector<double> erb_centers(int n, double fmin, double fmax)
{
    if (n < 2) throw ParameterError("erb_centers: n must be >= 2");
    if (!(fmin > 0.0) || !(fmin < fmax)) throw ParameterError("erb_centers: need 0 < fmin < fmax");
    const double e0 = erb_number(fmin);
    const double e1 = erb_number(fmax);
    std::vector<double> f(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) f[i] = erb_number_to_hz(e0 + (e1 - e0) * i / (n - 1));
    f.front() = fmin;
    f.back() = fmax;
    return f;
}

namespace {

// Response of Re{cascade} at angular frequency w: (H(w) + conj(H(-w))) / 2.
double raw_magnitude(std::complex<double> pole, double w)
{
    auto h = [&](double ww) {
        const std::complex<double> d = 1.0 - pole * std::polar(1.0, -ww);
        return 1.0 / (d * d * d * d);
    };
    return std::abs(0.5 * (h(w) + std::conj(h(-w))));
}

} // namespace

GammatoneBank GammatoneBank::make(double fs, int n, double fmin, double fmax)
{
    if (!(fs > 0.0)) throw ParameterError("GammatoneBank: fs must be positive");
    if (!(fmax < fs / 2.0)) throw ParameterError("GammatoneBank: fmax must be below Nyquist");
    GammatoneBank bank;
    bank.fs = fs;
    bank.center_frequencies = erb_centers(n, fmin, fmax);
    for (double fc : bank.center_frequencies) {
        const double a = std::exp(-2.0 * std::numbers::pi * 1.019 * erb_bandwidth(fc) / fs);
        const double wc = 2.0 * std::numbers::pi * fc / fs;
        const std::complex<double> pole = std::polar(a, wc);
        // Golden-section search for the peak of the real-part response near wc.
        const double span = 2.0 * std::numbers::pi * erb_bandwidth(fc) / fs;
        double lo = std::max(1e-9, wc - span), hi = std::min(std::numbers::pi, wc + span);
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 100; ++it) {
            const double m1 = hi - g * (hi - lo);
            const double m2 = lo + g * (hi - lo);
            if (raw_magnitude(pole, m1) < raw_magnitude(pole, m2)) lo = m1; else hi = m2;
        }
        bank.poles.push_back(pole);
        bank.gains.push_back(1.0 / raw_magnitude(pole, 0.5 * (lo + hi)));
    }
    return bank;
}

double GammatoneBank::magnitude(std::size_t band, double freq_hz) const
{
    return gains[band] * raw_magnitude(poles[band], 2.0 * std::numbers::pi * freq_hz / fs);
}

MultiSignal gammatone_subbands(const Signal& audio, const GammatoneBank& bank)
{
    if (audio.fs() != bank.fs) throw ParameterError("gammatone_subbands: sampling rate mismatch");
    std::vector<std::string> names;
    for (std::size_t b = 0; b < bank.size(); ++b) names.push_back("band" + std::to_string(b));
    return {std::move(names), kernels::gammatone_bank(audio.samples(), bank.poles, bank.gains), audio.fs()};
}

Signal auditory_envelope_raw(const Signal& audio, double target_fs)
{
    const GammatoneBank bank = GammatoneBank::make(audio.fs());
    std::vector<std::array<std::complex<double>, 4>> state(bank.size());
    for (auto& s : state) s.fill(0.0);

    // Chunked so that long recordings never hold all subbands at once.
    constexpr std::size_t chunk = 1 << 16;
    const std::span<const double> x = audio.samples();
    std::vector<double> avg(x.size());
    const double scale = 1.0 / static_cast<double>(bank.size());
    for (std::size_t a = 0; a < x.size(); a += chunk) {
        const std::size_t len = std::min(chunk, x.size() - a);
        const Eigen::MatrixXd bands = kernels::gammatone_bank(x.subspan(a, len), bank.poles, bank.gains, state);
        const Eigen::RowVectorXd mean_rect = bands.cwiseMax(0.0).colwise().sum() * scale;
        for (std::size_t i = 0; i < len; ++i) avg[a + i] = mean_rect[static_cast<Eigen::Index>(i)];
    }
    Signal env = resample(Signal(std::move(avg), audio.fs()), target_fs);
    // The anti-alias filter has negative lobes; clip its ringing so the
    // envelope stays non-negative.
    std::vector<double> v = env.vec();
    for (double& s : v) s = std::max(0.0, s);
    return {std::move(v), env.fs()};
}

FeatureSignal auditory_envelope(const Signal& audio, double target_fs)
{
    return {standardize(auditory_envelope_raw(audio, target_fs)), FeatureKind::envelope};
}

Signal onset_envelope_raw(const Signal& envelope)
{
    const std::span<const double> e = envelope.samples();
    std::vector<double> out(e.size(), 0.0);
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
        out[i] = std::max(0.0, (e[i + 1] - e[i]) * envelope.fs());
    if (out.size() >= 2) out.back() = out[out.size() - 2];
    return {std::move(out), envelope.fs()};
}

FeatureSignal onset_envelope(const FeatureSignal& envelope)
{
    if (envelope.kind != FeatureKind::envelope) throw ParameterError("onset_envelope: input must be an envelope");
    return {standardize(onset_envelope_raw(envelope.signal)), FeatureKind::onset_envelope};
}

} // namespace aad
