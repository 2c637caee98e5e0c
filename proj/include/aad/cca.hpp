#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "aad/dataset.hpp"
#include "aad/evaluation.hpp"
#include "aad/linear.hpp"

namespace aad {

struct CcaModel {
    Eigen::MatrixXd wx;  // eeg dims x components
    Eigen::MatrixXd wy;  // feature dims x components
    Eigen::VectorXd rho; // non-increasing, in [0, 1]
    LagSpec eeg_lags = LagSpec::backward_default();
    LagSpec feature_lags{0, 16, 64.0};
    double shrinkage = 0.0;

    int components() const noexcept { return static_cast<int>(rho.size()); }
    CcaModel truncated(int n) const;
};

/// (1 - gamma) C + gamma * trace(C) / d * I
Eigen::MatrixXd shrink_covariance(const Eigen::MatrixXd& c, double gamma);

/// CCA from centered covariance blocks.
CcaModel fit_cca_cov(const Eigen::MatrixXd& cxx, const Eigen::MatrixXd& cyy, const Eigen::MatrixXd& cxy,
                     double shrinkage);
/// CCA of the rows of x (n x dx) and y (n x dy).
CcaModel fit_cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double shrinkage);

/// Per-component Pearson correlation of the projected rows; 0 for a
/// constant projection.
Eigen::VectorXd correlation_vector(const CcaModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
/// Same, from projected rows (n x components each).
Eigen::VectorXd projected_correlations(const Eigen::Ref<const Eigen::MatrixXd>& px,
                                       const Eigen::Ref<const Eigen::MatrixXd>& py);

struct LdaClassifier {
    Eigen::VectorXd weights;
    double bias = 0.0;

    double decision_value(const Eigen::VectorXd& d) const { return weights.dot(d) + bias; }
};

/// Rows are samples. Pooled covariance with shrinkage 1e-3 * trace / d.
LdaClassifier fit_lda(const Eigen::MatrixXd& positive, const Eigen::MatrixXd& negative);

struct CcaDecision {
    bool choose_a = true;
    double margin = 0.0;
};

/// d = corr(eeg, A) - corr(eeg, B); A iff w'd + b >= 0.
CcaDecision decode_cca(const CcaModel& model, const LdaClassifier& lda, const Eigen::MatrixXd& eeg_lagged,
                       const Eigen::MatrixXd& feature_a_lagged, const Eigen::MatrixXd& feature_b_lagged);

/// Lagged designs of one trial for CCA.
struct CcaDesign {
    Eigen::MatrixXd eeg;    // T x (channels * eeg taps), lead lags
    Eigen::MatrixXd male;   // T x feature taps
    Eigen::MatrixXd female; // T x feature taps
};
CcaDesign cca_design(const TrialBundle& trial, FeatureKind kind, const LagSpec& eeg_lags, const LagSpec& feature_lags);

struct CcaDecoder {
    CcaModel cca;
    LdaClassifier lda;
    int components = 0;
    double shrinkage = 0.0;
};

struct CcaTrainOptions {
    LagSpec eeg_lags = LagSpec::backward_default();
    LagSpec feature_lags{0, 16, 64.0};
    std::vector<double> shrinkage_grid{0.0, 1e-4, 1e-2};
    double segment_s = 5.0;
    int inner = 5;
    std::uint64_t seed = 0;
};

/// CCA + LDA with the component count and shrinkage chosen by inner
/// cross-validation over the concatenated training trials.
CcaDecoder train_cca_decoder(std::span<const TrialBundle> trials, std::span<const int> train, FeatureKind kind,
                             const CcaTrainOptions& options = {});

/// Decision per segment with A = male and B = female talker.
std::vector<CcaDecision> decode_segments(const CcaDecoder& decoder, const TrialBundle& trial, FeatureKind kind,
                                         std::span<const RowRange> segments);

void save_cca(const std::filesystem::path& path, const CcaDecoder& decoder);
CcaDecoder load_cca(const std::filesystem::path& path);

} // namespace aad
