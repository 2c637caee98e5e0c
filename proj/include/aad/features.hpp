#pragma once

#include <complex>
#include <string>
#include <vector>

#include "aad/signal.hpp"

namespace aad {

enum class FeatureKind { envelope, onset_envelope };

/// "envelope" / "onsets"
std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& name);

struct FeatureSignal {
    Signal signal;
    FeatureKind kind = FeatureKind::envelope;
};

/// Glasberg-Moore ERB-number (Cams) of a frequency in Hz.
double erb_number(double freq_hz);
double erb_number_to_hz(double erb);
/// Equivalent rectangular bandwidth in Hz.
double erb_bandwidth(double freq_hz);

/// `n` centers equally spaced on the ERB-number scale, endpoints exact.
std::vector<double> erb_centers(int n = 28, double fmin = 50.0, double fmax = 5000.0);

struct GammatoneBank {
    std::vector<double> center_frequencies;
    int order = 4;
    double fs = 0.0;
    std::vector<std::complex<double>> poles;
    std::vector<double> gains; // unit peak magnitude response per band

    static GammatoneBank make(double fs, int n = 28, double fmin = 50.0, double fmax = 5000.0);
    std::size_t size() const noexcept { return center_frequencies.size(); }
    /// Magnitude response of band b at `freq_hz`, including its gain.
    double magnitude(std::size_t band, double freq_hz) const;
};

MultiSignal gammatone_subbands(const Signal& audio, const GammatoneBank& bank);

/// Subbands -> half-wave rectification -> band average -> resample to
/// `target_fs`. Not standardized; non-negative.
Signal auditory_envelope_raw(const Signal& audio, double target_fs = 64.0);
FeatureSignal auditory_envelope(const Signal& audio, double target_fs = 64.0);

/// Forward difference scaled by fs, clipped at zero. Not standardized.
Signal onset_envelope_raw(const Signal& envelope);
/// Onset envelope of an envelope feature, standardized.
FeatureSignal onset_envelope(const FeatureSignal& envelope);

} // namespace aad
