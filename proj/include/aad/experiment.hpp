#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "aad/cca.hpp"
#include "aad/cnn.hpp"
#include "aad/dataset.hpp"

namespace aad {

struct TrfAnalysisConfig {
    bool enabled = false;
    int n_shifts = 500;
    double min_shift_s = 5.0;
    int n_perm = 1000;
    double threshold_pct = 99.0;
};

struct ExperimentConfig {
    std::filesystem::path dataset;
    std::filesystem::path output = "results";
    std::uint64_t seed = 1;
    std::vector<std::string> algorithms{"linear", "cnn", "cca"};
    std::vector<FeatureKind> features{FeatureKind::envelope, FeatureKind::onset_envelope};
    std::vector<double> segment_lengths{0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0};
    double hop_s = 1.0;
    int inner_folds = 5;
    std::vector<std::string> participants; // empty: all
    int outer_folds = 0;                    // 0: every trial held out once; else evenly spaced trials
    int lambda_min_exp = -9;
    int lambda_max_exp = 9;
    CnnBudget cnn;
    std::vector<CnnConfig> cnn_grid = aad::cnn_grid();
    CcaTrainOptions cca;
    double marker_segment_s = 5.0;
    TrfAnalysisConfig trf;

    /// Throws ParameterError on an invalid combination.
    void validate() const;
    nlohmann::json to_json() const;
    /// Unknown keys are rejected; relative dataset/output paths resolve
    /// against `base`.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
    static ExperimentConfig load(const std::filesystem::path& path);
};

struct SegmentRow {
    std::string participant;
    std::string algorithm;
    std::string feature;
    double length_s;
    int trial;
    double start_s;
    double rho_attended; // NaN for CCA
    double rho_ignored;  // NaN for CCA
    double score;        // delta rho, or margin oriented toward the attended talker
    bool correct;
};

struct AccuracyRow {
    std::string participant;
    std::string algorithm;
    std::string feature;
    double length_s;
    int segments;
    double accuracy;
    double chance;
};

struct MarkerTest {
    std::string participant;
    std::string algorithm;
    std::string feature;
    int markers;
    double mean_delta;
    double mean_null;
    double t;
    double p;
};

struct ExperimentReport {
    std::vector<SegmentRow> segments;
    std::vector<AccuracyRow> accuracy;
    std::vector<MarkerTest> marker_tests;
    nlohmann::json summary;
};

/// Mean accuracy over participants per (algorithm, feature, length).
nlohmann::json summarize_accuracy(const std::vector<AccuracyRow>& rows);

/// Nested cross-validated decoding of every participant, marker tests, and
/// optional TRF cluster analysis. Writes results.csv, segments.csv,
/// markers.csv and summary.json under config.output.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Forward-model analysis alone: TRF CSVs and clusters.json under `out`.
nlohmann::json run_trf_analysis(const std::filesystem::path& dataset, const std::filesystem::path& out,
                                const TrfAnalysisConfig& config, std::uint64_t seed,
                                const std::vector<std::string>& participants = {});

/// Caps OpenMP parallelism from AAD_JOBS when set.
void apply_job_limit();

std::vector<AccuracyRow> read_results_csv(const std::filesystem::path& path);
std::vector<SegmentRow> read_segments_csv(const std::filesystem::path& path);

} // namespace aad
