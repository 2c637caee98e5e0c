#include "aad/suffstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aad/error.hpp"

namespace aad {

GramStats::GramStats(Eigen::Index dims, Eigen::Index targets)
    : xx(Eigen::MatrixXd::Zero(dims, dims))
    , x_sum(Eigen::VectorXd::Zero(dims))
    , xy(Eigen::MatrixXd::Zero(dims, targets))
    , y_sum(Eigen::VectorXd::Zero(targets))
    , y_sq(Eigen::VectorXd::Zero(targets))
{
}

void GramStats::add_rows(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& y)
{
    n += x.rows();
    xx.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    xx.triangularView<Eigen::StrictlyUpper>() = xx.transpose();
    x_sum += x.colwise().sum().transpose();
    if (y.cols() > 0) {
        xy.noalias() += x.transpose() * y;
        y_sum += y.colwise().sum().transpose();
        y_sq += y.array().square().colwise().sum().matrix().transpose();
    }
}

GramStats& GramStats::operator+=(const GramStats& other)
{
    if (xx.size() == 0 && n == 0) return *this = other;
    n += other.n;
    xx += other.xx;
    x_sum += other.x_sum;
    xy += other.xy;
    y_sum += other.y_sum;
    y_sq += other.y_sq;
    return *this;
}

GramStats& GramStats::operator-=(const GramStats& other)
{
    n -= other.n;
    xx -= other.xx;
    x_sum -= other.x_sum;
    xy -= other.xy;
    y_sum -= other.y_sum;
    y_sq -= other.y_sq;
    return *this;
}

GramStats operator+(GramStats a, const GramStats& b) { return a += b; }
GramStats operator-(GramStats a, const GramStats& b) { return a -= b; }

double GramStats::correlation(const Eigen::VectorXd& w, Eigen::Index target) const
{
    const double nn = static_cast<double>(n);
    const double pred_sum = w.dot(x_sum);
    const double pred_sq = w.dot(xx * w);
    const double cross = w.dot(xy.col(target));
    const double cov = cross - pred_sum * y_sum[target] / nn;
    const double var_p = pred_sq - pred_sum * pred_sum / nn;
    const double var_y = y_sq[target] - y_sum[target] * y_sum[target] / nn;
    // Cancellation guard: a variance this small relative to its raw second
    // moment is rounding noise.
    if (!(var_p > 1e-12 * pred_sq) || !(var_y > 1e-12 * y_sq[target]))
        return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(cov / std::sqrt(var_p * var_y), -1.0, 1.0);
}

Eigen::MatrixXd GramStats::covariance() const
{
    const double nn = static_cast<double>(n);
    const Eigen::VectorXd mu = x_sum / nn;
    return xx / nn - mu * mu.transpose();
}

GramStats range_stats(const DesignSource& source, Eigen::Index r0, Eigen::Index r1)
{
    if (r0 < 0 || r1 > source.rows() || r0 > r1) throw ParameterError("range_stats: bad row range");
    constexpr Eigen::Index chunk = 2048;
    GramStats s(source.dims(), source.targets());
    Eigen::MatrixXd x, y;
    for (Eigen::Index a = r0; a < r1; a += chunk) {
        const Eigen::Index b = std::min(r1, a + chunk);
        x.resize(b - a, source.dims());
        y.resize(b - a, source.targets());
        source.fill(a, b, x, y);
        s.add_rows(x, y);
    }
    return s;
}

std::vector<RowRange> split_blocks(Eigen::Index rows, Eigen::Index block)
{
    if (block <= 0) throw ParameterError("split_blocks: block must be positive");
    std::vector<RowRange> out;
    for (Eigen::Index a = 0; a < rows; a += block) out.push_back({a, std::min(rows, a + block)});
    return out;
}

} // namespace aad
