#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aad/dataset.hpp"
#include "aad/evaluation.hpp"

namespace aad {

struct CnnConfig {
    int kernel = 3; // 3 or 5
    int blocks = 1; // 1, 2 or 3
    int maps = 16;
    int channels = 2;
    int window = 64;
    int pool = 2;

    /// Temporal length entering the readout.
    int readout_length() const;
    void validate() const;
    std::string name() const;
};

/// The six kernel x depth combinations.
std::vector<CnnConfig> cnn_grid();

/// conv (same padding) -> ReLU -> BatchNorm -> average pool, plus a pooled
/// width-1 projection of the block input.
struct ConvBlock {
    Eigen::MatrixXd weight; // maps x (in_channels * kernel), column c * kernel + j
    Eigen::VectorXd bias;
    Eigen::VectorXd bn_scale;
    Eigen::VectorXd bn_offset;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
    Eigen::MatrixXd skip; // maps x in_channels
};

enum class CnnMode { train, eval };

struct ParamRef {
    double* data;
    Eigen::Index size;
    std::string name;
};

struct CnnModel {
    CnnConfig config;
    std::vector<ConvBlock> blocks;
    Eigen::VectorXd readout;      // maps * readout_length, time-major
    Eigen::VectorXd readout_bias; // size 1
    CnnMode mode = CnnMode::train;

    static constexpr double bn_eps = 1e-7;
    static constexpr double bn_momentum = 0.1;

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; BatchNorm scale 1, offset 0.
    static CnnModel init(const CnnConfig& config, std::uint64_t seed);
    /// Same shapes, all trainable parameters zero.
    CnnModel zeros_like() const;

    /// Trainable parameters in a fixed order.
    std::vector<ParamRef> params();
    Eigen::Index parameter_count() const;
};

/// Batch layout: channels x (B * window), window b in columns [b*window, (b+1)*window).
/// Train mode normalizes with batch statistics and updates the running
/// statistics; eval mode uses the running statistics.
Eigen::VectorXd forward(CnnModel& model, const Eigen::MatrixXd& batch);
/// Eval-mode forward; never touches the model.
Eigen::VectorXd predict(const CnnModel& model, const Eigen::MatrixXd& batch);

/// -pearson(predictions, targets).
double loss(std::span<const double> predictions, std::span<const double> targets);

/// Batch loss and its exact gradient with respect to every trainable
/// parameter (train-mode statistics; running statistics are left alone).
struct GradientResult {
    double loss = 0.0;
    CnnModel grads; // parameter-shaped
};
GradientResult gradients(const CnnModel& model, const Eigen::MatrixXd& batch, std::span<const double> targets);

/// Per-map batch statistics of the normalized (pre scale/offset) BatchNorm
/// output of block `block` in train mode: rows are (mean, variance).
Eigen::MatrixXd batchnorm_statistics(const CnnModel& model, const Eigen::MatrixXd& batch, int block);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Eigen::VectorXd> m;
    std::vector<Eigen::VectorXd> v;
};

/// One bias-corrected Adam update of `params` from `grads` (same layout).
void adam_step(AdamState& state, std::span<const ParamRef> params, std::span<const ParamRef> grads);

struct CnnBudget {
    int max_epochs = 100;
    int patience = 5;
    int batch = 256;
    int windows_per_epoch = 0; // 0: every training window
    int max_validation_windows = 0; // 0: every validation window
    double learning_rate = 1e-3;
};

struct EpochLog {
    int epoch;
    double train_loss;
    double validation_rho;
};

struct CnnTrainResult {
    CnnModel model; // eval mode, best validation checkpoint
    double initial_validation = 0.0;
    double best_validation = 0.0;
    std::vector<EpochLog> log;
};

/// Sliding 1 s windows (stride 1) inside each piece; the target is the
/// attended feature at the window onset.
CnnTrainResult train_cnn(std::span<const TrialBundle> trials, std::span<const TrialPiece> train,
                         std::span<const TrialPiece> validation, FeatureKind kind, const CnnConfig& config,
                         const CnnBudget& budget, std::uint64_t seed);

struct CnnSelection {
    CnnTrainResult result;
    CnnConfig config;
    std::vector<double> grid_scores;
};

/// Trains every grid configuration on four of five contiguous splits of the
/// training trials and keeps the model with the best validation correlation
/// on the fifth.
CnnSelection select_cnn(std::span<const TrialBundle> trials, std::span<const int> train, FeatureKind kind,
                        const CnnBudget& budget, std::uint64_t seed, std::span<const CnnConfig> grid = {});

/// Reconstruction of a whole trial: window starting at each sample, zero
/// EEG beyond the end. Output length equals the EEG length.
std::vector<double> predict_trial(const CnnModel& model, const MultiSignal& eeg);

void save_cnn(const std::filesystem::path& path, const CnnModel& model);
CnnModel load_cnn(const std::filesystem::path& path);
void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> log);

} // namespace aad
