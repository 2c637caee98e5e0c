#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    const auto v = gaussian(static_cast<std::size_t>(rows * cols), seed);
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

inline std::vector<double> sine(std::size_t n, double freq, double fs, double amp = 1.0, double phase = 0.0)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs + phase);
    return v;
}

struct SineFit {
    double amplitude;
    double phase;
    double residual_rms;
};

/// Least-squares fit of a*sin + b*cos at a known frequency over [b, e).
inline SineFit fit_sine(const std::vector<double>& x, double freq, double fs, std::size_t b, std::size_t e)
{
    Eigen::MatrixXd a(static_cast<Eigen::Index>(e - b), 2);
    Eigen::VectorXd y(a.rows());
    for (std::size_t i = b; i < e; ++i) {
        const double w = 2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs;
        a(static_cast<Eigen::Index>(i - b), 0) = std::sin(w);
        a(static_cast<Eigen::Index>(i - b), 1) = std::cos(w);
        y(static_cast<Eigen::Index>(i - b)) = x[i];
    }
    const Eigen::Vector2d c = a.colPivHouseholderQr().solve(y);
    const double res = std::sqrt((a * c - y).squaredNorm() / static_cast<double>(y.size()));
    return {c.norm(), std::atan2(c(1), c(0)), res};
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

} // namespace testutil
