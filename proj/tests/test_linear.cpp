#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "aad/error.hpp"
#include "aad/features.hpp"
#include "aad/linear.hpp"
#include "aad/synth.hpp"
#include "test_util.hpp"

using namespace aad;

namespace {

// Gaussian elimination with partial pivoting on the normal equations.
Eigen::VectorXd normal_equation_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda)
{
    const Eigen::Index d = x.cols();
    std::vector<std::vector<double>> a(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d + 1), 0.0));
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            double s = 0.0;
            for (Eigen::Index r = 0; r < x.rows(); ++r) s += x(r, i) * x(r, j);
            a[i][j] = s + (i == j ? lambda : 0.0);
        }
        double s = 0.0;
        for (Eigen::Index r = 0; r < x.rows(); ++r) s += x(r, i) * y(r);
        a[i][d] = s;
    }
    for (Eigen::Index c = 0; c < d; ++c) {
        Eigen::Index p = c;
        for (Eigen::Index r = c + 1; r < d; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        std::swap(a[c], a[p]);
        for (Eigen::Index r = c + 1; r < d; ++r) {
            const double f = a[r][c] / a[c][c];
            for (Eigen::Index k = c; k <= d; ++k) a[r][k] -= f * a[c][k];
        }
    }
    Eigen::VectorXd w(d);
    for (Eigen::Index i = d - 1; i >= 0; --i) {
        double s = a[i][d];
        for (Eigen::Index k = i + 1; k < d; ++k) s -= a[i][k] * w(k);
        w(i) = s / a[i][i];
    }
    return w;
}

// Explicit convolution: y(t) = sum_j h_j x(t - lag_j).
std::vector<double> convolve_lags(const std::vector<double>& x, const Eigen::RowVectorXd& h, const LagSpec& lags)
{
    const auto t = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> y(x.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < t; ++i)
        for (int j = 0; j < lags.taps(); ++j) {
            const std::ptrdiff_t s = i - (lags.lag_min + j);
            if (s >= 0 && s < t) y[static_cast<std::size_t>(i)] += h(j) * x[static_cast<std::size_t>(s)];
        }
    return y;
}

double corr(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return pearson({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())});
}

Eigen::RowVectorXd planted_kernel()
{
    return gen_trf(SynthConfig{}.peaks, {1.0}, {"c"}).coefficients.row(0);
}

} // namespace

TEST_CASE("lag matrix: shape and layout")
{
    const auto x = testutil::gaussian(200, 1);
    CHECK(build_lag_matrix(x, LagSpec::forward_default()).cols() == 160);
    const MultiSignal two({"a", "b"}, testutil::gaussian(2, 200, 2), 64.0);
    const Eigen::MatrixXd m = build_lag_matrix(two, LagSpec::backward_default());
    CHECK(m.cols() == 128);
    CHECK(m.rows() == 200);

    const Eigen::MatrixXd id = build_lag_matrix(two, LagSpec(0, 1, 64.0));
    CHECK((id - two.data().transpose()).norm() == 0.0);

    const LagSpec lags(-3, 5, 64.0);
    const Eigen::MatrixXd l = build_lag_matrix(two, lags);
    for (Eigen::Index c = 0; c < 2; ++c)
        for (int j = 0; j < lags.taps(); ++j)
            for (Eigen::Index t = 0; t < 200; ++t) {
                const Eigen::Index s = t - (lags.lag_min + j);
                const double want = (s >= 0 && s < 200) ? two.data()(c, s) : 0.0;
                CHECK(l(t, c * lags.taps() + j) == want);
            }
    CHECK_THROWS_AS(build_lag_matrix(std::span<const double>(x).first(100), LagSpec(-64, 96, 64.0)), LengthError);
}

TEST_CASE("lead matrix holds future samples")
{
    const Eigen::MatrixXd d = testutil::gaussian(2, 50, 3);
    const LagSpec lags(0, 4, 64.0);
    const Eigen::MatrixXd m = build_lead_matrix(d, lags);
    for (Eigen::Index c = 0; c < 2; ++c)
        for (int j = 0; j < 4; ++j)
            for (Eigen::Index t = 0; t < 50; ++t) CHECK(m(t, c * 4 + j) == (t + j < 50 ? d(c, t + j) : 0.0));
}

TEST_CASE("LagSpec")
{
    CHECK(LagSpec::forward_default().taps() == 160);
    CHECK(LagSpec::forward_default().latency(0) == -1.0);
    CHECK(LagSpec::forward_default().latency(159) == doctest::Approx(1.5 - 1.0 / 64.0));
    CHECK(LagSpec::backward_default().taps() == 64);
    CHECK(LagSpec::backward_default().latency(0) == 0.0);
    CHECK(LagSpec::backward_default().latency(63) == doctest::Approx(1.0 - 1.0 / 64.0));
    CHECK_THROWS_AS(LagSpec(3, 3, 64.0), ParameterError);
    CHECK_THROWS_AS(LagSpec(0, 3, 0.0), ParameterError);
}

TEST_CASE("ridge matches the normal-equation oracle")
{
    const Eigen::MatrixXd x = testutil::gaussian(50, 8, 4);
    const Eigen::VectorXd y = testutil::gaussian(50, 1, 5);
    const RidgeSolution s = ridge_solve(x, y, 0.3);
    CHECK(s.lambda == 0.3);
    CHECK(testutil::rel_err(s.weights, normal_equation_oracle(x, y, 0.3)) < 1e-8);
}

TEST_CASE("ridge limits")
{
    const MultiSignal sig({"a", "b", "c"}, testutil::gaussian(3, 400, 6), 64.0);
    const Eigen::MatrixXd x = standardize(sig).data().transpose();
    const Eigen::VectorXd y = testutil::gaussian(400, 1, 7);
    CHECK(ridge_solve(x, y, 1e12).weights.norm() < 1e-6);

    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(testutil::gaussian(30, 5, 8)).householderQ() *
                              Eigen::MatrixXd::Identity(30, 5);
    const Eigen::VectorXd yq = testutil::gaussian(30, 1, 9);
    CHECK(testutil::rel_err(ridge_solve(q, yq, 0.0).weights, q.transpose() * yq) < 1e-12);

    Eigen::MatrixXd deficient = testutil::gaussian(20, 3, 10);
    deficient.col(2) = deficient.col(0) + deficient.col(1);
    CHECK_THROWS_AS(ridge_solve(deficient, testutil::gaussian(20, 1, 11), 0.0), SingularityError);
    CHECK_NOTHROW(ridge_solve(deficient, testutil::gaussian(20, 1, 11), 1e-3));
    CHECK_THROWS_AS(ridge_solve(deficient, testutil::gaussian(19, 1, 11), 1.0), ParameterError);
    CHECK_THROWS_AS(ridge_solve(deficient, testutil::gaussian(20, 1, 11), -1.0), ParameterError);
}

TEST_CASE("ridge norm decreases with lambda")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::MatrixXd x = testutil::gaussian(40, 12, 100 + seed);
        const Eigen::VectorXd y = testutil::gaussian(40, 1, 200 + seed);
        double prev = std::numeric_limits<double>::infinity();
        for (int e = -6; e <= 6; ++e) {
            const double n = ridge_solve(x, y, std::pow(10.0, e)).weights.norm();
            CHECK(n <= prev * (1.0 + 1e-12));
            prev = n;
        }
    }
}

TEST_CASE("RidgeSolver reuses one decomposition")
{
    const Eigen::MatrixXd x = testutil::gaussian(60, 6, 12);
    const Eigen::MatrixXd y = testutil::gaussian(60, 2, 13);
    const RidgeSolver solver(x.transpose() * x);
    for (double l : {1e-3, 1.0, 1e3}) {
        const Eigen::MatrixXd w = solver.solve(x.transpose() * y, l);
        for (Eigen::Index c = 0; c < 2; ++c)
            CHECK(testutil::rel_err(w.col(c), normal_equation_oracle(x, y.col(c), l)) < 1e-8);
    }
}

TEST_CASE("mean eigenvalue")
{
    const Eigen::MatrixXd id = std::sqrt(7.0) * Eigen::MatrixXd::Identity(7, 7);
    CHECK(mean_eigen_lambda(id) == doctest::Approx(1.0).epsilon(1e-14));
    const Eigen::MatrixXd x = testutil::gaussian(33, 9, 14);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x / 33.0);
    CHECK(mean_eigen_lambda(x) == doctest::Approx(eig.eigenvalues().mean()).epsilon(1e-12));
    CHECK_THROWS_AS(mean_eigen_lambda(Eigen::MatrixXd(0, 0)), ParameterError);

    // standardized speech-like feature: diagonal ~ 1 apart from zero-filled edges
    const double fs = 16000.0;
    auto carrier = testutil::gaussian(static_cast<std::size_t>(60 * fs), 15);
    for (std::size_t i = 0; i < carrier.size(); ++i)
        carrier[i] *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * 2.0 * static_cast<double>(i) / fs));
    const FeatureSignal env = auditory_envelope(Signal(carrier, fs));
    const Eigen::MatrixXd lagged = build_lag_matrix(env.signal.samples(), LagSpec::forward_default());
    CHECK(std::abs(mean_eigen_lambda(lagged) - 1.0) < 0.05);
}

TEST_CASE("fit_trf: zero EEG gives zero TRF")
{
    const FeatureSignal f = gen_feature(30.0, 64.0, 1);
    const MultiSignal eeg({"a", "b"}, Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(f.signal.size())), 64.0);
    const Trf t = fit_trf(f, eeg, LagSpec::forward_default());
    CHECK(t.coefficients.rows() == 2);
    CHECK(t.coefficients.cols() == 160);
    CHECK(t.coefficients.norm() == 0.0);
    CHECK(t.latencies()(0) == -1.0);
}

TEST_CASE("fit_trf equals per-channel ridge with the mean-eigenvalue penalty")
{
    const FeatureSignal f = gen_feature(40.0, 64.0, 2);
    const MultiSignal eeg({"a", "b"}, testutil::gaussian(2, static_cast<Eigen::Index>(f.signal.size()), 16), 64.0);
    const LagSpec lags(-8, 24, 64.0);
    const Trf t = fit_trf(f, eeg, lags);
    const Eigen::MatrixXd x = build_lag_matrix(f.signal.samples(), lags);
    const double lambda = static_cast<double>(x.rows()) * mean_eigen_lambda(x);
    for (Eigen::Index c = 0; c < 2; ++c) {
        const Eigen::VectorXd w = ridge_solve(x, eeg.data().row(c).transpose(), lambda).weights;
        CHECK(testutil::rel_err(t.coefficients.row(c).transpose(), w) < 1e-9);
    }
}

TEST_CASE("fit_trf recovers a planted kernel")
{
    const LagSpec lags = LagSpec::forward_default();
    const Eigen::RowVectorXd h = planted_kernel();
    const FeatureSignal f = gen_feature(150.0, 64.0, 3);
    const auto clean = convolve_lags(f.signal.vec(), h, lags);
    const Eigen::Map<const Eigen::RowVectorXd> clean_row(clean.data(), static_cast<Eigen::Index>(clean.size()));

    const Trf noiseless = fit_trf(f, MultiSignal({"c"}, clean_row, 64.0), lags);
    CHECK(corr(noiseless.coefficients, h) > 0.99);

    // -10 dB
    Eigen::RowVectorXd noise = testutil::gaussian(1, clean_row.size(), 17);
    const double signal_power = clean_row.squaredNorm() / static_cast<double>(clean_row.size());
    const double noise_power = noise.squaredNorm() / static_cast<double>(noise.size());
    noise *= std::sqrt(signal_power / noise_power * std::pow(10.0, 1.0));
    const Trf noisy = fit_trf(f, MultiSignal({"c"}, clean_row + noise, 64.0), lags);
    CHECK(corr(noisy.coefficients, h) > 0.9);
}

TEST_CASE("fit_trf errors")
{
    const MultiSignal eeg({"a"}, testutil::gaussian(1, 300, 18), 64.0);
    const FeatureSignal flat{Signal(std::vector<double>(300, 1.0), 64.0), FeatureKind::envelope};
    CHECK_THROWS_AS(fit_trf(flat, eeg, LagSpec(0, 10, 64.0)), DegenerateSignalError);
    const FeatureSignal shorter{Signal(testutil::gaussian(299, 19), 64.0), FeatureKind::envelope};
    CHECK_THROWS_AS(fit_trf(shorter, eeg, LagSpec(0, 10, 64.0)), ParameterError);
}

TEST_CASE("backward model: copy mapping and latency window")
{
    const MultiSignal eeg({"a", "b"}, testutil::gaussian(2, 2000, 20), 64.0);
    const FeatureSignal f{eeg.channel(0), FeatureKind::envelope};
    const BackwardModel m = fit_backward(eeg, f, LagSpec::backward_default(), 1e-6);
    CHECK(m.weights.size() == 128);
    const FeatureSignal r = reconstruct(m, eeg);
    CHECK(r.signal.size() == 2000);
    CHECK(pearson(r.signal.samples(), f.signal.samples()) > 0.999999);
    CHECK(LagSpec::backward_default().latency(0) == 0.0);
    CHECK(LagSpec::backward_default().latency(64) == 1.0);
    CHECK_THROWS_AS(fit_backward(eeg, f, LagSpec(-1, 10, 64.0), 1.0), ParameterError);
}

TEST_CASE("backward model generalizes to held-out data")
{
    // EEG carries the feature through the planted kernel plus noise
    const LagSpec fwd = LagSpec::forward_default();
    const Eigen::RowVectorXd h = planted_kernel();
    auto make = [&](std::uint64_t seed) {
        const FeatureSignal f = gen_feature(120.0, 64.0, seed);
        const auto a = convolve_lags(f.signal.vec(), h, fwd);
        Eigen::MatrixXd d = testutil::gaussian(2, static_cast<Eigen::Index>(a.size()), seed + 1000);
        for (Eigen::Index t = 0; t < d.cols(); ++t) {
            d(0, t) += 2.0 * a[static_cast<std::size_t>(t)];
            d(1, t) += 1.2 * a[static_cast<std::size_t>(t)];
        }
        return std::make_pair(f, MultiSignal({"a", "b"}, d, 64.0));
    };
    const auto [f_train, eeg_train] = make(30);
    const auto [f_test, eeg_test] = make(31);
    const FeatureSignal other = gen_feature(120.0, 64.0, 32);
    const BackwardModel m = fit_backward(eeg_train, f_train, LagSpec::backward_default(), 1e2);
    const FeatureSignal rec_test = reconstruct(m, eeg_test);
    const FeatureSignal rec_train = reconstruct(m, eeg_train);
    const double held = pearson(rec_test.signal.samples(), f_test.signal.samples());
    const double mismatched = pearson(rec_test.signal.samples(), other.signal.samples());
    CHECK(held - mismatched > 0.2);
    CHECK(pearson(rec_train.signal.samples(), f_train.signal.samples()) >= held);
}

TEST_CASE("reconstruct: zero weights, linearity, channel check")
{
    const MultiSignal eeg({"a", "b"}, testutil::gaussian(2, 300, 21), 64.0);
    BackwardModel m;
    m.lags = LagSpec::backward_default();
    m.weights = Eigen::VectorXd::Zero(128);
    const FeatureSignal zero = reconstruct(m, eeg);
    for (double v : zero.signal.samples()) CHECK(v == 0.0);
    m.weights = testutil::gaussian(128, 1, 22);
    const FeatureSignal r = reconstruct(m, eeg);
    const FeatureSignal r3 = reconstruct(m, MultiSignal({"a", "b"}, 3.0 * eeg.data(), 64.0));
    for (std::size_t i = 0; i < r.signal.size(); ++i) CHECK(r3.signal[i] == doctest::Approx(3.0 * r.signal[i]).epsilon(1e-12));
    CHECK_THROWS_AS(reconstruct(m, MultiSignal({"a"}, testutil::gaussian(1, 300, 23), 64.0)), ParameterError);
}

TEST_CASE("backward model serialization round trip")
{
    const MultiSignal eeg({"bilateral", "unilateral"}, testutil::gaussian(2, 500, 24), 64.0);
    const FeatureSignal f{Signal(testutil::gaussian(500, 25), 64.0), FeatureKind::onset_envelope};
    BackwardModel m = fit_backward(eeg, f, LagSpec::backward_default(), 10.0);
    m.role = SpeakerRole::ignored;
    const auto p = std::filesystem::temp_directory_path() / "aad_test_backward.json";
    save_backward(p, m);
    const BackwardModel back = load_backward(p);
    CHECK(back.lags == m.lags);
    CHECK(back.lambda == 10.0);
    CHECK(back.kind == FeatureKind::onset_envelope);
    CHECK(back.role == SpeakerRole::ignored);
    CHECK(back.channels == m.channels);
    CHECK((back.weights - m.weights.cast<float>().cast<double>()).norm() == 0.0);
}

TEST_CASE("pearson")
{
    const std::vector<double> a{1.2, 3.4, 2.2, 5.1, 0.3, 4.4, 2.9, 3.3, 1.0, 4.8};
    const std::vector<double> b{2.0, 2.9, 2.5, 4.7, 1.1, 3.8, 3.0, 2.2, 1.4, 5.5};
    // 40-digit evaluation of the textbook formula
    CHECK(std::abs(pearson(a, b) - 0.91924224157697474898) < 1e-12);
    CHECK(pearson(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    std::vector<double> neg(a.size()), aff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        neg[i] = -a[i];
        aff[i] = 4.0 * a[i] + 11.0;
    }
    CHECK(pearson(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(pearson(aff, b) == doctest::Approx(pearson(a, b)).epsilon(1e-12));
    const std::vector<double> c(10, 3.0);
    CHECK_THROWS_AS(pearson(a, c), DegenerateCorrelationError);
    CHECK(pearson_or_zero(a, c) == 0.0);
    CHECK_THROWS_AS(pearson(a, std::vector<double>(9, 1.0)), ParameterError);
}

TEST_CASE("speaker role names")
{
    for (auto r : {SpeakerRole::attended, SpeakerRole::ignored, SpeakerRole::difference, SpeakerRole::null})
        CHECK(parse_speaker_role(to_string(r)) == r);
    CHECK_THROWS_AS(parse_speaker_role("bystander"), ParameterError);
}
