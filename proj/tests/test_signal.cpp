#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "aad/error.hpp"
#include "aad/signal.hpp"
#include "test_util.hpp"

using namespace aad;

namespace {

// Direct DFT of the coefficient sequence at one frequency.
double dft_magnitude(const std::vector<double>& h, double f, double fs)
{
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < h.size(); ++n)
        acc += h[n] * std::polar(1.0, -2.0 * std::numbers::pi * f / fs * static_cast<double>(n));
    return std::abs(acc);
}

const FirFilter& eeg_highpass()
{
    static const FirFilter f = design_highpass_sinc(0.5, 1691, 256.0);
    return f;
}

} // namespace

TEST_CASE("high-pass design: length, DC gain and attenuation")
{
    const FirFilter& f = eeg_highpass();
    CHECK(f.coefficients.size() == 1692);
    double sum = 0.0;
    for (double c : f.coefficients) sum += c;
    CHECK(std::abs(sum) < 1e-10);
    CHECK(20.0 * std::log10(f.magnitude(0.25)) <= -6.0);
    CHECK(f.magnitude(10.0) == doctest::Approx(1.0).epsilon(1e-3));
    for (double fr : {0.1, 0.25, 0.5, 1.0, 10.0, 100.0})
        CHECK(f.magnitude(fr) == doctest::Approx(dft_magnitude(f.coefficients, fr, 256.0)).epsilon(1e-9));
}

TEST_CASE("high-pass design: even order is symmetric")
{
    for (int order : {2, 64, 1000}) {
        const FirFilter f = design_highpass_sinc(1.0, order, 128.0);
        REQUIRE(f.coefficients.size() == static_cast<std::size_t>(order + 1));
        double asym = 0.0;
        for (std::size_t i = 0; i < f.coefficients.size(); ++i)
            asym = std::max(asym, std::abs(f.coefficients[i] - f.coefficients[f.coefficients.size() - 1 - i]));
        CHECK(asym < 1e-12);
    }
}

TEST_CASE("high-pass design rejects bad arguments")
{
    CHECK_THROWS_AS(design_highpass_sinc(0.5, 1, 256.0), ParameterError);
    CHECK_THROWS_AS(design_highpass_sinc(0.0, 100, 256.0), ParameterError);
    CHECK_THROWS_AS(design_highpass_sinc(128.0, 100, 256.0), ParameterError);
    CHECK_THROWS_AS(design_highpass_sinc(-1.0, 100, 256.0), ParameterError);
}

TEST_CASE("apply_fir: identity kernel and impulse response")
{
    FirFilter id;
    id.coefficients = {1.0};
    const Signal x(testutil::gaussian(50, 1), 64.0);
    const Signal y = apply_fir(id, x, false);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    FirFilter f;
    f.coefficients = {0.5, -1.0, 2.0, 0.25};
    f.order = 3;
    std::vector<double> impulse(10, 0.0);
    impulse[0] = 1.0;
    const Signal r = apply_fir(f, Signal(impulse, 1.0), false);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r[i] == f.coefficients[i]);
    for (std::size_t i = 4; i < 10; ++i) CHECK(r[i] == 0.0);

    // compensation advances by floor(order / 2)
    const Signal rc = apply_fir(f, Signal(impulse, 1.0), true);
    CHECK(rc[0] == f.coefficients[1]);
    CHECK(rc[1] == f.coefficients[2]);
}

TEST_CASE("apply_fir is linear")
{
    const FirFilter f = design_highpass_sinc(2.0, 101, 128.0);
    const auto a = testutil::gaussian(1000, 2);
    const auto b = testutil::gaussian(1000, 3);
    std::vector<double> mix(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) mix[i] = 2.5 * a[i] - 0.75 * b[i];
    const Signal fa = apply_fir(f, Signal(a, 128.0), true);
    const Signal fb = apply_fir(f, Signal(b, 128.0), true);
    const Signal fm = apply_fir(f, Signal(mix, 128.0), true);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(fm[i] - (2.5 * fa[i] - 0.75 * fb[i])) < 1e-10);
}

TEST_CASE("apply_fir: 10 Hz sine keeps amplitude and phase after compensation")
{
    const FirFilter& f = eeg_highpass();
    const auto x = testutil::sine(8192, 10.0, 256.0);
    const Signal y = apply_fir(f, Signal(x, 256.0), true);
    const auto in = testutil::fit_sine(x, 10.0, 256.0, 2000, 6000);
    const auto out = testutil::fit_sine(y.vec(), 10.0, 256.0, 2000, 6000);
    CHECK(std::abs(out.amplitude / in.amplitude - 1.0) < 0.01);
    // phase difference in samples at 10 Hz
    const double shift = std::abs(out.phase - in.phase) / (2.0 * std::numbers::pi * 10.0) * 256.0;
    CHECK(shift < 1.0);
}

TEST_CASE("apply_fir: signal shorter than filter")
{
    CHECK_THROWS_AS(apply_fir(eeg_highpass(), Signal(std::vector<double>(1000, 1.0), 256.0), true), LengthError);
}

TEST_CASE("resample: lengths and ratios")
{
    const Signal x(testutil::gaussian(1024, 4), 256.0);
    CHECK(resample(x, 64.0).size() == 256);
    CHECK(resample(x, 64.0).fs() == 64.0);
    const Ratio r = resample_ratio(44100.0, 64.0);
    CHECK(r.up == 16);
    CHECK(r.down == 11025);
    const Ratio h = resample_ratio(1.0, 2.5);
    CHECK(h.up == 5);
    CHECK(h.down == 2);
    CHECK_THROWS_AS(resample_ratio(1.0, std::numbers::pi, 1000), ParameterError);
    CHECK_THROWS_AS(resample_ratio(0.0, 64.0), ParameterError);
    const Signal y(testutil::gaussian(1001, 5), 44100.0);
    CHECK(resample(y, 64.0).size() == static_cast<std::size_t>(std::lround(1001.0 * 64.0 / 44100.0)));
}

TEST_CASE("resample: 5 Hz sine from 256 to 64 Hz")
{
    const Signal x(testutil::sine(256 * 20, 5.0, 256.0), 256.0);
    const Signal y = resample(x, 64.0);
    const auto fit = testutil::fit_sine(y.vec(), 5.0, 64.0, 128, y.size() - 128);
    CHECK(std::abs(fit.amplitude - 1.0) < 0.01);
    CHECK(fit.residual_rms < 0.01);
    CHECK(std::abs(fit.phase) < 0.05);
}

TEST_CASE("resample round trip on a band-limited signal")
{
    std::vector<double> x(64 * 30, 0.0);
    const double freqs[] = {0.7, 2.3, 5.1, 9.4, 13.0};
    for (double fr : freqs) {
        const auto s = testutil::sine(x.size(), fr, 64.0, 1.0, fr);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += s[i];
    }
    const Signal back = resample(resample(Signal(x, 64.0), 100.0), 64.0);
    REQUIRE(back.size() == x.size());
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 200; i + 200 < x.size(); ++i) {
        err += (back[i] - x[i]) * (back[i] - x[i]);
        ref += x[i] * x[i];
    }
    CHECK(std::sqrt(err / ref) < 0.01);
}

TEST_CASE("standardize: moments, affine invariance, idempotence")
{
    const auto raw = testutil::gaussian(500, 6);
    std::vector<double> x(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) x[i] = 3.0 + 7.0 * raw[i] + 0.01 * static_cast<double>(i);
    const Signal z = standardize(Signal(x, 64.0));
    CHECK(std::abs(mean(z.samples())) < 1e-10);
    CHECK(std::abs(stddev(z.samples()) - 1.0) < 1e-10);

    std::vector<double> ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = 0.2 * x[i] - 40.0;
    const Signal za = standardize(Signal(ax, 64.0));
    const Signal zz = standardize(z);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(za[i] - z[i]) < 1e-10);
        CHECK(std::abs(zz[i] - z[i]) < 1e-10);
    }
    CHECK_THROWS_AS(standardize(Signal(std::vector<double>(100, 4.2), 64.0)), DegenerateSignalError);
}

TEST_CASE("standardize is per channel")
{
    Eigen::MatrixXd d = testutil::gaussian(2, 300, 7);
    d.row(1) = d.row(1) * 50.0 + Eigen::RowVectorXd::Constant(300, 9.0);
    const MultiSignal z = standardize(MultiSignal({"a", "b"}, d, 64.0));
    for (Eigen::Index c = 0; c < 2; ++c) {
        const Signal ch = z.channel(c);
        CHECK(std::abs(mean(ch.samples())) < 1e-10);
        CHECK(std::abs(stddev(ch.samples()) - 1.0) < 1e-10);
    }
}

TEST_CASE("MultiSignal invariants")
{
    CHECK_THROWS_AS(MultiSignal({"a", "a"}, Eigen::MatrixXd::Zero(2, 4), 64.0), ParameterError);
    CHECK_THROWS_AS(MultiSignal({"a"}, Eigen::MatrixXd::Zero(2, 4), 64.0), ParameterError);
    CHECK_THROWS_AS(Signal({1.0, 2.0}, 0.0), ParameterError);
    const MultiSignal m({"a", "b"}, testutil::gaussian(2, 10, 8), 64.0);
    const MultiSignal s = m.slice(2, 6);
    CHECK(s.length() == 4);
    CHECK(s.data()(1, 0) == m.data()(1, 2));
}

TEST_CASE("xcorr_align: zero, delayed, noisy")
{
    const auto x = testutil::gaussian(2000, 9);
    CHECK(xcorr_align(Signal(x, 64.0), Signal(x, 64.0), 200) == 0);

    std::vector<double> delayed(x.size(), 0.0);
    for (std::size_t i = 100; i < x.size(); ++i) delayed[i] = x[i - 100];
    CHECK(xcorr_align(Signal(delayed, 64.0), Signal(x, 64.0), 200) == 100);

    // 0 dB: noise with the signal's power
    for (int shift : {-150, -37, 0, 12, 150}) {
        const auto noise = testutil::gaussian(x.size(), 100 + static_cast<std::uint64_t>(shift + 200));
        std::vector<double> rec(x.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto j = static_cast<std::ptrdiff_t>(i) - shift;
            rec[i] = (j >= 0 && j < static_cast<std::ptrdiff_t>(x.size()) ? x[static_cast<std::size_t>(j)] : 0.0) + noise[i];
        }
        CHECK(xcorr_align(Signal(rec, 64.0), Signal(x, 64.0), 200) == shift);
    }
}

TEST_CASE("xcorr_align errors")
{
    const auto x = testutil::gaussian(100, 10);
    CHECK_THROWS_AS(xcorr_align(Signal(x, 64.0), Signal(x, 128.0), 10), ParameterError);
    CHECK_THROWS_AS(xcorr_align(Signal(x, 64.0), Signal(x, 64.0), 100), ParameterError);
    CHECK_THROWS_AS(xcorr_align(Signal(x, 64.0), Signal(std::vector<double>(100, 0.0), 64.0), 10), AlignmentError);
}
