#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "aad/features.hpp"
#include "aad/linear.hpp"
#include "aad/signal.hpp"

namespace aad {

enum class Speaker { male, female };
std::string to_string(Speaker s);
Speaker parse_speaker(const std::string& name);
inline Speaker other(Speaker s) { return s == Speaker::male ? Speaker::female : Speaker::male; }

struct FeaturePair {
    FeatureSignal envelope;
    FeatureSignal onsets{Signal{}, FeatureKind::onset_envelope};

    const FeatureSignal& get(FeatureKind kind) const
    {
        return kind == FeatureKind::envelope ? envelope : onsets;
    }
};

/// One trial: two-channel EEG with the features of both talkers, all at the
/// same rate and length.
struct TrialBundle {
    int index = 1; // 1-based
    Speaker attended = Speaker::male;
    MultiSignal eeg;
    FeaturePair attended_features;
    FeaturePair ignored_features;

    /// role must be attended or ignored.
    const FeatureSignal& feature(SpeakerRole role, FeatureKind kind) const;
    Eigen::Index length() const noexcept { return eeg.length(); }
    double fs() const noexcept { return eeg.fs(); }
    /// Throws ParameterError when the lengths or rates disagree.
    void validate() const;
    TrialBundle slice(Eigen::Index begin, Eigen::Index end) const;
};

struct Participant {
    std::string id;
    std::vector<TrialBundle> trials;
};

/// Participant directory: manifest.json plus, per trial k (two-digit),
/// trial_k_eeg.f32 and trial_k_{male,female}_{envelope,onsets}.f32.
void write_participant(const std::filesystem::path& dir, const Participant& participant);
Participant read_participant(const std::filesystem::path& dir);

/// Dataset root: manifest.json with {"participants": [ids], ...}; one
/// subdirectory per id.
struct DatasetManifest {
    std::vector<std::string> participants;
    nlohmann::json extra = nlohmann::json::object();
};
void write_dataset_manifest(const std::filesystem::path& root, const DatasetManifest& manifest);
DatasetManifest read_dataset_manifest(const std::filesystem::path& root);

} // namespace aad
