#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "aad/cca.hpp"
#include "aad/error.hpp"
#include "aad/synth.hpp"
#include "test_util.hpp"

using namespace aad;

namespace {

Eigen::MatrixXd centered_cov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const Eigen::MatrixXd ac = a.rowwise() - a.colwise().mean();
    const Eigen::MatrixXd bc = b.rowwise() - b.colwise().mean();
    return ac.transpose() * bc / static_cast<double>(a.rows());
}

// Canonical correlations and x-side directions from Cxy Cyy^-1 Cyx a = rho^2 Cxx a.
struct Oracle {
    Eigen::VectorXd rho;
    Eigen::MatrixXd wx;
};

Oracle brute_force(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y)
{
    const Eigen::MatrixXd cxx = centered_cov(x, x), cyy = centered_cov(y, y), cxy = centered_cov(x, y);
    Eigen::MatrixXd m = cxy * cyy.inverse() * cxy.transpose();
    m = 0.5 * (m + m.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(m, cxx);
    const Eigen::Index k = std::min(x.cols(), y.cols());
    Oracle o;
    o.rho.resize(k);
    o.wx.resize(x.cols(), k);
    // eigenvalues ascending
    for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::Index src = x.cols() - 1 - i;
        o.rho[i] = std::sqrt(std::max(0.0, ges.eigenvalues()[src]));
        o.wx.col(i) = ges.eigenvectors().col(src);
    }
    return o;
}

// y depends on part of x plus noise.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> coupled(Eigen::Index n, Eigen::Index dx, Eigen::Index dy, std::uint64_t seed)
{
    const Eigen::MatrixXd x = testutil::gaussian(n, dx, seed);
    const Eigen::MatrixXd mix = testutil::gaussian(dx, dy, seed + 1);
    const Eigen::MatrixXd y = x * mix + 2.0 * testutil::gaussian(n, dy, seed + 2);
    return {x, y};
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

} // namespace

TEST_CASE("identical inputs give unit canonical correlations")
{
    const Eigen::MatrixXd x = testutil::gaussian(500, 5, 1);
    const CcaModel m = fit_cca(x, x, 0.0);
    REQUIRE(m.components() == 5);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(m.rho[i] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("independent noise gives small canonical correlations")
{
    const Eigen::MatrixXd x = testutil::gaussian(10000, 10, 2), y = testutil::gaussian(10000, 10, 3);
    const CcaModel m = fit_cca(x, y, 0.0);
    for (Eigen::Index i = 0; i < m.components(); ++i) CHECK(m.rho[i] < 0.1);
}

TEST_CASE("fit_cca matches the generalized eigenproblem oracle")
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto [x, y] = coupled(300, 6, 4, 100 + 3 * s);
        const CcaModel m = fit_cca(x, y, 0.0);
        const Oracle o = brute_force(x, y);
        REQUIRE(m.components() == 4);
        for (Eigen::Index i = 0; i < 4; ++i) {
            CHECK(m.rho[i] == doctest::Approx(o.rho[i]).epsilon(1e-8));
            CHECK(cosine(m.wx.col(i), o.wx.col(i)) == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("canonical components: unit variance, paired correlation rho, cross pairs uncorrelated")
{
    const auto [x, y] = coupled(800, 7, 5, 9);
    const CcaModel m = fit_cca(x, y, 0.0);
    const Eigen::MatrixXd px = x * m.wx, py = y * m.wy;
    const Eigen::MatrixXd vx = centered_cov(px, px), vy = centered_cov(py, py), vxy = centered_cov(px, py);
    for (Eigen::Index i = 0; i < m.components(); ++i) {
        CHECK(vx(i, i) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(vy(i, i) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(vxy(i, i) == doctest::Approx(m.rho[i]).epsilon(1e-9));
        if (i > 0) CHECK(m.rho[i] <= m.rho[i - 1]);
        CHECK(m.rho[i] >= 0.0);
        CHECK(m.rho[i] <= 1.0);
        for (Eigen::Index j = 0; j < m.components(); ++j) {
            if (i == j) continue;
            CHECK(std::abs(vx(i, j)) < 1e-6);
            CHECK(std::abs(vy(i, j)) < 1e-6);
            CHECK(std::abs(vxy(i, j)) < 1e-6);
        }
    }
    const Eigen::VectorXd r = correlation_vector(m, x, y);
    for (Eigen::Index i = 0; i < m.components(); ++i) CHECK(r[i] == doctest::Approx(m.rho[i]).epsilon(1e-9));
}

TEST_CASE("canonical correlations are invariant under invertible column transforms")
{
    const auto [x, y] = coupled(400, 5, 3, 31);
    const CcaModel m = fit_cca(x, y, 0.0);
    const Eigen::MatrixXd a = testutil::gaussian(5, 5, 32) + 3.0 * Eigen::MatrixXd::Identity(5, 5);
    const Eigen::MatrixXd b = testutil::gaussian(3, 3, 33) + 3.0 * Eigen::MatrixXd::Identity(3, 3);
    const CcaModel t = fit_cca(x * a, y * b, 0.0);
    for (Eigen::Index i = 0; i < m.components(); ++i) CHECK(t.rho[i] == doctest::Approx(m.rho[i]).epsilon(1e-8));
}

TEST_CASE("shrinkage and rank deficiency")
{
    Eigen::MatrixXd x = testutil::gaussian(200, 4, 40);
    x.col(3) = x.col(0) + x.col(1);
    const Eigen::MatrixXd y = testutil::gaussian(200, 2, 41);
    CHECK_THROWS_AS(fit_cca(x, y, 0.0), SingularityError);
    const CcaModel m = fit_cca(x, y, 1e-2);
    CHECK(m.components() == 2);

    const Eigen::MatrixXd c = centered_cov(x, x);
    const Eigen::MatrixXd s = shrink_covariance(c, 0.25);
    Eigen::MatrixXd expect = 0.75 * c;
    expect.diagonal().array() += 0.25 * c.trace() / 4.0;
    CHECK(testutil::rel_err(s, expect) < 1e-14);
    CHECK(s.trace() == doctest::Approx(c.trace()));
    CHECK_THROWS_AS(shrink_covariance(c, -0.1), ParameterError);
    CHECK_THROWS_AS(fit_cca(x, y.topRows(100), 0.0), ParameterError);
}

TEST_CASE("correlation vectors shrink for an unrelated feature segment")
{
    const auto [x, y] = coupled(4000, 6, 3, 50);
    const CcaModel m = fit_cca(x.topRows(3000), y.topRows(3000), 0.0);
    const Eigen::VectorXd matched = correlation_vector(m, x.bottomRows(1000), y.bottomRows(1000));
    const Eigen::VectorXd unrelated = correlation_vector(m, x.bottomRows(1000), testutil::gaussian(1000, 3, 51));
    CHECK(unrelated.cwiseAbs().mean() < matched.cwiseAbs().mean());

    Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(50, 3);
    const Eigen::VectorXd z = correlation_vector(m, x.topRows(50), flat);
    CHECK(z.isZero(0.0));
    CHECK(m.truncated(2).components() == 2);
    CHECK_THROWS_AS(m.truncated(4), ParameterError);
}

TEST_CASE("LDA on symmetric and separable classes")
{
    const Eigen::MatrixXd v = testutil::gaussian(40, 3, 60).rowwise() + Eigen::RowVector3d(1.0, -0.5, 0.2);
    const LdaClassifier sym = fit_lda(v, -v);
    CHECK(std::abs(sym.bias) < 1e-12);

    const Eigen::MatrixXd pos = 0.3 * testutil::gaussian(50, 4, 61).array() + 2.0;
    const Eigen::MatrixXd neg = 0.3 * testutil::gaussian(50, 4, 62).array() - 2.0;
    const LdaClassifier lda = fit_lda(pos, neg);
    for (Eigen::Index i = 0; i < 50; ++i) {
        CHECK(lda.decision_value(pos.row(i).transpose()) > 0.0);
        CHECK(lda.decision_value(neg.row(i).transpose()) < 0.0);
    }
    // pooled-covariance formula
    const Eigen::VectorXd mp = pos.colwise().mean().transpose(), mn = neg.colwise().mean().transpose();
    const Eigen::MatrixXd cp = pos.rowwise() - mp.transpose(), cn = neg.rowwise() - mn.transpose();
    Eigen::MatrixXd s = (cp.transpose() * cp + cn.transpose() * cn) / 98.0;
    s.diagonal().array() += 1e-3 * s.trace() / 4.0;
    const Eigen::VectorXd w = s.inverse() * (mp - mn);
    CHECK(testutil::rel_err(lda.weights, w) < 1e-10);
    CHECK(lda.bias == doctest::Approx(-0.5 * w.dot(mp + mn)));

    // decision depends on d only through w'd
    Eigen::VectorXd d = testutil::gaussian(4, 1, 63);
    Eigen::VectorXd ortho = testutil::gaussian(4, 1, 64);
    ortho -= ortho.dot(lda.weights) / lda.weights.squaredNorm() * lda.weights;
    CHECK(lda.decision_value(d + 5.0 * ortho) == doctest::Approx(lda.decision_value(d)));

    CHECK_THROWS_AS(fit_lda(pos, pos), DegenerateClassifierError);
    CHECK_THROWS_AS(fit_lda(pos.topRows(1), neg), ParameterError);
}

TEST_CASE("decode_cca ties, antisymmetry and scale invariance")
{
    const auto [x, y] = coupled(600, 5, 3, 70);
    const CcaModel m = fit_cca(x, y, 0.0);
    LdaClassifier lda;
    lda.weights = Eigen::VectorXd::Ones(3);
    lda.bias = 0.0;
    const Eigen::MatrixXd other = testutil::gaussian(600, 3, 71);

    const CcaDecision tie = decode_cca(m, lda, x, y, y);
    CHECK(tie.choose_a);
    CHECK(tie.margin == 0.0);
    LdaClassifier biased = lda;
    biased.bias = -0.25;
    CHECK(decode_cca(m, biased, x, y, y).margin == -0.25);
    CHECK_FALSE(decode_cca(m, biased, x, y, y).choose_a);

    const CcaDecision ab = decode_cca(m, lda, x, y, other);
    const CcaDecision ba = decode_cca(m, lda, x, other, y);
    CHECK(ab.choose_a);
    CHECK(ba.margin == doctest::Approx(-ab.margin));
    const CcaDecision scaled = decode_cca(m, lda, x, 3.0 * y, 0.5 * other);
    CHECK(scaled.margin == doctest::Approx(ab.margin).epsilon(1e-12));
}

TEST_CASE("CCA decoder on held-out synthetic trials")
{
    SynthConfig cfg;
    cfg.trials = 8;
    cfg.duration_s = 60.0;
    cfg.seed = 5;
    std::vector<TrialBundle> trials;
    for (int i = 1; i <= 8; ++i) trials.push_back(gen_trial(cfg, 0, i));
    const std::vector<int> train{0, 1, 2, 4, 5, 6};
    const CcaDecoder dec = train_cca_decoder(trials, train, FeatureKind::envelope);
    CHECK(dec.components >= 1);
    CHECK(dec.components <= dec.cca.components());
    int ok = 0, total = 0;
    for (int t : {3, 7}) {
        const TrialBundle& tr = trials[static_cast<std::size_t>(t)];
        const auto segs = segment_trial(tr, 30.0);
        const auto dec_out = decode_segments(dec, tr, FeatureKind::envelope, segs);
        REQUIRE(dec_out.size() == segs.size());
        for (const auto& d : dec_out) {
            ok += d.choose_a == (tr.attended == Speaker::male) ? 1 : 0;
            ++total;
        }
    }
    CHECK(static_cast<double>(ok) / total > 0.8);

    const auto path = std::filesystem::temp_directory_path() / "aad_test_cca.json";
    save_cca(path, dec);
    const CcaDecoder back = load_cca(path);
    CHECK(back.components == dec.components);
    CHECK(back.shrinkage == dec.shrinkage);
    CHECK(testutil::rel_err(back.cca.wx, dec.cca.wx) < 1e-6);
    CHECK(testutil::rel_err(back.lda.weights, dec.lda.weights) < 1e-6);
    const auto segs = segment_trial(trials[3], 30.0);
    const auto a = decode_segments(dec, trials[3], FeatureKind::envelope, segs);
    const auto b = decode_segments(back, trials[3], FeatureKind::envelope, segs);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].choose_a == b[i].choose_a);
}
