#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "aad/dataset.hpp"
#include "aad/linear.hpp"

namespace aad {

/// Gaussian bump on the latency axis.
struct PeakSpec {
    double latency_s = 0.1;
    double width_s = 0.04; // standard deviation
    double amplitude = 1.0;
};

enum class SynthDriver { envelope, onsets, both };

struct SynthConfig {
    int participants = 18;
    int trials = 16;
    double duration_s = 150.0;
    double fs = 64.0;
    double gain_attended = 1.0;
    double gain_ignored = 0.5;
    double snr_db = -5.0;
    std::uint64_t seed = 1;
    std::vector<PeakSpec> peaks{{0.1, 0.04, 1.0}, {0.2, 0.04, -1.0}};
    std::vector<std::string> channels{"bilateral", "unilateral"};
    std::vector<double> channel_gains{1.0, 0.6};
    SynthDriver driver = SynthDriver::envelope;
    bool pink_noise = false;
    double feature_cutoff_hz = 7.0;

    void validate() const;
    nlohmann::json to_json() const;
    static SynthConfig from_json(const nlohmann::json& j);
};

/// Positive low-pass random process before standardization.
Signal gen_feature_raw(double duration_s, double fs, std::uint64_t seed, double cutoff_hz = 7.0);
/// Standardized envelope-kind surrogate.
FeatureSignal gen_feature(double duration_s, double fs = 64.0, std::uint64_t seed = 0, double cutoff_hz = 7.0);
/// Envelope and onset features from one raw draw.
FeaturePair gen_feature_pair(double duration_s, double fs, std::uint64_t seed, double cutoff_hz = 7.0);

/// Sum of peaks on the forward-model lag axis, scaled per channel.
Trf gen_trf(const std::vector<PeakSpec>& peaks, const std::vector<double>& channel_gains,
            const std::vector<std::string>& channels, const LagSpec& lags = LagSpec::forward_default());

/// Male talker for trials 1-4, female for 5-8, and so on.
Speaker attended_speaker(int trial_index);

struct SynthTrial {
    TrialBundle bundle;
    Eigen::MatrixXd signal; // channels x T, before noise and standardization
    Eigen::MatrixXd noise;
};

/// EEG = g_att * (TRF * f_att) + g_ign * (TRF * f_ign) + noise, noise scaled
/// to the requested SNR per channel; every stored signal is standardized.
/// Stimuli depend on (seed, trial) only; noise also on the participant.
SynthTrial gen_trial_components(const SynthConfig& config, int participant, int trial_index);
TrialBundle gen_trial(const SynthConfig& config, int participant, int trial_index);
Participant gen_participant(const SynthConfig& config, int participant);

std::string participant_id(int participant);

/// Dataset layout with manifest.json and truth.json at the root.
void write_synth_dataset(const std::filesystem::path& root, const SynthConfig& config);

} // namespace aad
