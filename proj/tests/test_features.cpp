#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aad/error.hpp"
#include "aad/features.hpp"
#include "aad/kernels.hpp"
#include "aad/linear.hpp"
#include "test_util.hpp"

using namespace aad;

namespace {

double rms(const Eigen::RowVectorXd& v)
{
    return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

// White noise times a 2 Hz raised cosine, and the modulator itself.
std::pair<Signal, std::vector<double>> am_noise(double seconds, double fs, std::uint64_t seed)
{
    const auto n = static_cast<std::size_t>(seconds * fs);
    auto x = testutil::gaussian(n, seed);
    std::vector<double> mod(n);
    for (std::size_t i = 0; i < n; ++i) {
        mod[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * 2.0 * static_cast<double>(i) / fs));
        x[i] *= mod[i];
    }
    return {Signal(std::move(x), fs), std::move(mod)};
}

std::vector<double> decimate_modulator(double seconds, double fs)
{
    const auto n = static_cast<std::size_t>(seconds * fs);
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i)
        m[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * 2.0 * static_cast<double>(i) / fs));
    return m;
}

double fraction_below(std::span<const double> x, double frac)
{
    const double mx = *std::max_element(x.begin(), x.end());
    return static_cast<double>(std::count_if(x.begin(), x.end(), [&](double v) { return v < frac * mx; })) /
           static_cast<double>(x.size());
}

} // namespace

TEST_CASE("ERB centers")
{
    const auto c = erb_centers();
    REQUIRE(c.size() == 28);
    CHECK(c.front() == 50.0);
    CHECK(c.back() == 5000.0);
    CHECK(erb_number(50.0) == doctest::Approx(1.8366664173439018).epsilon(1e-12));
    CHECK(erb_number(5000.0) == doctest::Approx(29.080164774285592).epsilon(1e-12));
    for (std::size_t i = 1; i < c.size(); ++i) {
        CHECK(c[i] > c[i - 1]);
        CHECK(erb_number(c[i]) - erb_number(c[i - 1]) == doctest::Approx(1.009018457664507).epsilon(1e-9));
    }
    const auto two = erb_centers(2, 80.0, 900.0);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == 80.0);
    CHECK(two[1] == 900.0);
    CHECK(erb_number_to_hz(erb_number(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
    CHECK_THROWS_AS(erb_centers(1), ParameterError);
    CHECK_THROWS_AS(erb_centers(28, 500.0, 50.0), ParameterError);
}

TEST_CASE("gammatone bank: unit peak per band")
{
    const GammatoneBank bank = GammatoneBank::make(44100.0);
    REQUIRE(bank.size() == 28);
    for (std::size_t b = 0; b < bank.size(); ++b) {
        const double fc = bank.center_frequencies[b];
        double peak = 0.0;
        for (double f = 0.7 * fc; f <= 1.3 * fc; f += fc / 2000.0) peak = std::max(peak, bank.magnitude(b, f));
        CHECK(peak == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(bank.magnitude(b, fc) > 0.99);
    }
}

TEST_CASE("gammatone subbands: zero input and channel count")
{
    const GammatoneBank bank = GammatoneBank::make(16000.0, 28, 50.0, 5000.0);
    const MultiSignal z = gammatone_subbands(Signal(std::vector<double>(2000, 0.0), 16000.0), bank);
    CHECK(z.channel_count() == 28);
    CHECK(z.data().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(gammatone_subbands(Signal(std::vector<double>(10, 0.0), 8000.0), bank), ParameterError);
}

TEST_CASE("gammatone subbands: a tone at a center peaks in its band")
{
    const double fs = 44100.0;
    const GammatoneBank bank = GammatoneBank::make(fs);
    for (std::size_t k = 0; k < bank.size(); ++k) {
        const auto tone = testutil::sine(static_cast<std::size_t>(0.5 * fs), bank.center_frequencies[k], fs);
        const MultiSignal s = gammatone_subbands(Signal(tone, fs), bank);
        Eigen::Index best = 0;
        double best_rms = -1.0;
        // skip the onset transient of the lowest bands
        const Eigen::Index from = s.length() / 2;
        for (Eigen::Index b = 0; b < s.channel_count(); ++b) {
            const double r = rms(s.data().row(b).segment(from, s.length() - from));
            if (r > best_rms) {
                best_rms = r;
                best = b;
            }
        }
        CHECK(best == static_cast<Eigen::Index>(k));
    }
}

TEST_CASE("gammatone kernel keeps state across chunks")
{
    const GammatoneBank bank = GammatoneBank::make(8000.0, 6, 100.0, 3000.0);
    const auto x = testutil::gaussian(3000, 11);
    const MultiSignal whole = gammatone_subbands(Signal(x, 8000.0), bank);
    std::vector<std::array<std::complex<double>, 4>> state(bank.size());
    for (auto& s : state) s.fill(0.0);
    const std::span<const double> xs(x);
    const Eigen::MatrixXd a = kernels::gammatone_bank(xs.first(1234), bank.poles, bank.gains, state);
    const Eigen::MatrixXd b = kernels::gammatone_bank(xs.subspan(1234), bank.poles, bank.gains, state);
    Eigen::MatrixXd joined(a.rows(), a.cols() + b.cols());
    joined << a, b;
    CHECK(testutil::rel_err(joined, whole.data()) < 1e-12);
}

TEST_CASE("auditory envelope tracks an amplitude modulator")
{
    const double fs = 44100.0;
    const auto [x, mod] = am_noise(8.0, fs, 12);
    const Signal raw = auditory_envelope_raw(x, 64.0);
    CHECK(raw.size() == 512);
    CHECK(raw.fs() == 64.0);
    CHECK(*std::min_element(raw.vec().begin(), raw.vec().end()) >= 0.0);
    const auto m64 = decimate_modulator(8.0, 64.0);
    CHECK(pearson(raw.samples(), m64) > 0.8);

    const FeatureSignal env = auditory_envelope(x);
    CHECK(env.kind == FeatureKind::envelope);
    CHECK(std::abs(mean(env.signal.samples())) < 1e-10);
    CHECK(std::abs(stddev(env.signal.samples()) - 1.0) < 1e-10);

    // onsets are sparser than the envelope
    const Signal on = onset_envelope_raw(raw);
    CHECK(fraction_below(on.samples(), 0.1) > fraction_below(raw.samples(), 0.1));
}

TEST_CASE("auditory envelope is positively homogeneous")
{
    const double fs = 16000.0;
    const auto [x, mod] = am_noise(2.0, fs, 13);
    std::vector<double> scaled(x.vec());
    for (double& v : scaled) v *= 3.5;
    const Signal a = auditory_envelope_raw(x, 64.0);
    const Signal b = auditory_envelope_raw(Signal(scaled, fs), 64.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(3.5 * a[i]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("auditory envelope of silence is degenerate")
{
    CHECK_THROWS_AS(auditory_envelope(Signal(std::vector<double>(44100, 0.0), 44100.0)), DegenerateSignalError);
}

TEST_CASE("onset envelope: constant, ramp, decreasing")
{
    const Signal flat = onset_envelope_raw(Signal(std::vector<double>(64, 2.0), 64.0));
    for (double v : flat.samples()) CHECK(v == 0.0);

    std::vector<double> ramp(64), down(64);
    for (std::size_t i = 0; i < 64; ++i) {
        ramp[i] = 0.5 * static_cast<double>(i) / 64.0;
        down[i] = -static_cast<double>(i * i);
    }
    const Signal up_on = onset_envelope_raw(Signal(ramp, 64.0));
    const Signal down_on = onset_envelope_raw(Signal(down, 64.0));
    for (double v : up_on.samples()) CHECK(v == doctest::Approx(0.5));
    for (double v : down_on.samples()) CHECK(v == 0.0);
}

TEST_CASE("onset envelope of a standardized envelope equals that of the raw one")
{
    const auto [x, mod] = am_noise(4.0, 16000.0, 14);
    const Signal raw = auditory_envelope_raw(x, 64.0);
    const FeatureSignal env{standardize(raw), FeatureKind::envelope};
    const FeatureSignal on = onset_envelope(env);
    const Signal direct = standardize(onset_envelope_raw(raw));
    CHECK(on.kind == FeatureKind::onset_envelope);
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(on.signal[i] == doctest::Approx(direct[i]).epsilon(1e-9).scale(1e-9));
    CHECK_THROWS_AS(onset_envelope(on), ParameterError);
}

TEST_CASE("feature kind names")
{
    CHECK(to_string(FeatureKind::envelope) == "envelope");
    CHECK(to_string(FeatureKind::onset_envelope) == "onsets");
    CHECK(parse_feature_kind("onsets") == FeatureKind::onset_envelope);
    CHECK_THROWS_AS(parse_feature_kind("spectrogram"), ParameterError);
}
