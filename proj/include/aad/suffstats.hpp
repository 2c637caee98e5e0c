#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace aad {

/// Sufficient statistics of a design matrix X (n x d) and targets Y (n x m):
/// everything needed to solve ridge problems and to score predictions
/// Xw against Y by Pearson correlation without revisiting the rows.
struct GramStats {
    Eigen::Index n = 0;
    Eigen::MatrixXd xx; // X'X
    Eigen::VectorXd x_sum;
    Eigen::MatrixXd xy; // X'Y
    Eigen::VectorXd y_sum;
    Eigen::VectorXd y_sq;

    GramStats() = default;
    GramStats(Eigen::Index dims, Eigen::Index targets);

    Eigen::Index dims() const noexcept { return xx.rows(); }
    Eigen::Index targets() const noexcept { return xy.cols(); }

    /// Adds the rows of X and Y.
    void add_rows(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& y);

    GramStats& operator+=(const GramStats& other);
    GramStats& operator-=(const GramStats& other);

    /// Pearson correlation between X*w and column `target` of Y over the
    /// rows summarised here. Returns NaN when either side is constant.
    double correlation(const Eigen::VectorXd& w, Eigen::Index target) const;

    /// Centered covariance (1/n) of the X columns.
    Eigen::MatrixXd covariance() const;
};

GramStats operator+(GramStats a, const GramStats& b);
GramStats operator-(GramStats a, const GramStats& b);

/// Source of design rows. `fill` writes rows [r0, r1) into x (r1-r0 x dims)
/// and y (r1-r0 x targets).
class DesignSource {
public:
    virtual ~DesignSource() = default;
    virtual Eigen::Index rows() const = 0;
    virtual Eigen::Index dims() const = 0;
    virtual Eigen::Index targets() const = 0;
    virtual void fill(Eigen::Index r0, Eigen::Index r1, Eigen::Ref<Eigen::MatrixXd> x,
                      Eigen::Ref<Eigen::MatrixXd> y) const = 0;
};

/// Statistics of rows [r0, r1), processed in chunks.
GramStats range_stats(const DesignSource& source, Eigen::Index r0, Eigen::Index r1);

struct RowRange {
    Eigen::Index begin;
    Eigen::Index end;
    Eigen::Index size() const noexcept { return end - begin; }
};

/// Contiguous blocks of `block` rows covering [0, rows); the last may be short.
std::vector<RowRange> split_blocks(Eigen::Index rows, Eigen::Index block);

} // namespace aad
