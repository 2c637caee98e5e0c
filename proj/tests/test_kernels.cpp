#include <doctest.h>

#include <cmath>

#include "aad/evaluation.hpp"
#include "aad/features.hpp"
#include "aad/kernels.hpp"
#include "aad/reference.hpp"
#include "test_util.hpp"

using namespace aad;

TEST_CASE("fir_filter agrees with the reference at every offset")
{
    const auto h = testutil::gaussian(37, 1);
    const auto x = testutil::gaussian(500, 2);
    for (std::ptrdiff_t offset : {std::ptrdiff_t{0}, std::ptrdiff_t{18}, std::ptrdiff_t{-5}, std::ptrdiff_t{480}}) {
        std::vector<double> a(520), b(520);
        kernels::fir_filter(h, x, offset, a);
        reference::fir_filter(h, x, offset, b);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("fir_filter against a direct full convolution")
{
    const std::vector<double> h{1.0, -2.0, 0.5};
    const std::vector<double> x{3.0, 1.0, 4.0, 1.0, 5.0};
    std::vector<double> out(7);
    kernels::fir_filter(h, x, 0, out);
    const std::vector<double> expect{3.0, -5.0, 3.5, -6.5, 5.0, -9.5, 2.5};
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(expect[i]));
}

TEST_CASE("xcorr_scan agrees with the reference, NaN where the overlap is empty")
{
    const auto rec = testutil::gaussian(300, 3);
    const auto ref = testutil::gaussian(120, 4);
    const auto a = kernels::xcorr_scan(rec, ref, 350);
    const auto b = reference::xcorr_scan(rec, ref, 350);
    REQUIRE(a.size() == b.size());
    int nan_count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::isnan(a[i]) == std::isnan(b[i]));
        if (std::isnan(a[i])) {
            ++nan_count;
            continue;
        }
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
        CHECK(std::abs(a[i]) <= 1.0 + 1e-12);
    }
    // lags below -119 and above 299 have no overlap
    CHECK(nan_count == (350 - 119) + (350 - 299));
}

TEST_CASE("gammatone_bank agrees with the reference, including carried state")
{
    const auto bank = GammatoneBank::make(8000.0, 6, 100.0, 3000.0);
    const auto x = testutil::gaussian(4000, 5);
    const Eigen::MatrixXd a = kernels::gammatone_bank(x, bank.poles, bank.gains);
    const Eigen::MatrixXd b = reference::gammatone_bank(x, bank.poles, bank.gains);
    CHECK(testutil::rel_err(a, b) < 1e-12);

    std::vector<std::array<std::complex<double>, 4>> sa(bank.size()), sb(bank.size());
    const std::span<const double> head(x.data(), 1500), tail(x.data() + 1500, 2500);
    kernels::gammatone_bank(head, bank.poles, bank.gains, sa);
    reference::gammatone_bank(head, bank.poles, bank.gains, sb);
    const Eigen::MatrixXd ta = kernels::gammatone_bank(tail, bank.poles, bank.gains, sa);
    const Eigen::MatrixXd tb = reference::gammatone_bank(tail, bank.poles, bank.gains, sb);
    CHECK(testutil::rel_err(ta, tb) < 1e-12);
    CHECK(testutil::rel_err(ta, a.rightCols(2500)) < 1e-10);
}

TEST_CASE("block_stats agrees with the reference and sums to the whole")
{
    const Eigen::MatrixXd m = testutil::gaussian(1003, 7, 6);
    const MatrixSource source(m, 2);
    const auto blocks = split_blocks(m.rows(), 128);
    const auto a = kernels::block_stats(source, blocks);
    const auto b = reference::block_stats(source, blocks);
    REQUIRE(a.size() == b.size());
    GramStats sum(5, 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].n == b[i].n);
        CHECK(testutil::rel_err(a[i].xx, b[i].xx) < 1e-12);
        CHECK(testutil::rel_err(a[i].xy, b[i].xy) < 1e-12);
        sum += a[i];
    }
    const Eigen::MatrixXd x = m.leftCols(5);
    CHECK(sum.n == 1003);
    CHECK(testutil::rel_err(sum.xx, x.transpose() * x) < 1e-12);
    CHECK(testutil::rel_err(sum.xy, x.transpose() * m.rightCols(2)) < 1e-12);
}

TEST_CASE("ShiftedLagStats matches explicit rotated lag matrices")
{
    const auto x = testutil::gaussian(400, 7);
    const Eigen::MatrixXd y = testutil::gaussian(3, 400, 8);
    for (auto [lo, hi] : {std::pair{-10, 15}, std::pair{0, 8}, std::pair{-12, -2}, std::pair{3, 20}}) {
        const kernels::ShiftedLagStats fast(x, y, lo, hi);
        for (std::int64_t shift : {std::int64_t{0}, std::int64_t{1}, std::int64_t{57}, std::int64_t{399},
                                   std::int64_t{-33}, std::int64_t{1234}}) {
            Eigen::MatrixXd xa, ya, xb, yb;
            fast.compute(shift, xa, ya);
            reference::shifted_lag_stats(x, y, lo, hi, shift, xb, yb);
            CHECK(testutil::rel_err(xa, xb) < 1e-10);
            CHECK(testutil::rel_err(ya, yb) < 1e-10);
        }
    }
}

TEST_CASE("ShiftedLagStats rejects bad geometry")
{
    const auto x = testutil::gaussian(50, 9);
    const Eigen::MatrixXd y = testutil::gaussian(1, 50, 10);
    CHECK_THROWS(kernels::ShiftedLagStats(x, y, 5, 5));
    CHECK_THROWS(kernels::ShiftedLagStats(x, testutil::gaussian(1, 49, 10), 0, 4));
    CHECK_THROWS(kernels::ShiftedLagStats(x, y, -20, 20));
}

TEST_CASE("longest_run_above counts strict exceedances")
{
    const std::vector<double> p{0.0, 2.0, 3.0, 1.0, 2.5, 2.5, 2.5, 0.5, 1.0};
    CHECK(kernels::longest_run_above(p, 1.0) == 3);
    CHECK(kernels::longest_run_above(p, 2.5) == 1);
    CHECK(kernels::longest_run_above(p, 3.0) == 0);
    CHECK(kernels::longest_run_above({}, 0.0) == 0);
}

TEST_CASE("sign_flip_max_clusters agrees with the reference and is bounded")
{
    const Eigen::MatrixXd trfs = testutil::gaussian(2 * 40, 9, 11);
    const auto a = kernels::sign_flip_max_clusters(trfs, 2, 0.1, 300, 42);
    const auto b = reference::sign_flip_max_clusters(trfs, 2, 0.1, 300, 42);
    CHECK(a == b);
    for (int v : a) {
        CHECK(v >= 0);
        CHECK(v <= 40);
    }
    CHECK(a != kernels::sign_flip_max_clusters(trfs, 2, 0.1, 300, 43));
}
