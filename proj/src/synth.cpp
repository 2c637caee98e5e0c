#include "aad/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "aad/error.hpp"
#include "aad/rng.hpp"

namespace aad {

namespace {

constexpr std::uint64_t kStimulusStream = 0x5354494dULL;
constexpr std::uint64_t kNoiseStream = 0x4e4f4953ULL;

std::string driver_name(SynthDriver d)
{
    switch (d) {
    case SynthDriver::envelope: return "envelope";
    case SynthDriver::onsets: return "onsets";
    case SynthDriver::both: return "both";
    }
    return "envelope";
}

SynthDriver parse_driver(const std::string& s)
{
    if (s == "envelope") return SynthDriver::envelope;
    if (s == "onsets") return SynthDriver::onsets;
    if (s == "both") return SynthDriver::both;
    throw ParameterError("unknown synth driver: " + s);
}

/// Hamming-windowed sinc low-pass, unit DC gain.
std::vector<double> lowpass(double cutoff_hz, double fs, int half)
{
    std::vector<double> h(2 * static_cast<std::size_t>(half) + 1);
    const double fc = cutoff_hz / fs;
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double sinc = i == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * i) / (std::numbers::pi * i);
        const double w = 0.54 + 0.46 * std::cos(std::numbers::pi * i / half);
        h[static_cast<std::size_t>(i + half)] = sinc * w;
        sum += sinc * w;
    }
    for (double& v : h) v /= sum;
    return h;
}

/// Voss-McCartney style 1/f approximation: sum of octave-held white rows.
std::vector<double> pink(std::size_t n, Rng& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    constexpr int rows = 12;
    std::vector<double> value(rows);
    for (double& v : value) v = g(rng);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int r = 0; r < rows; ++r)
            if (i % (std::size_t{1} << r) == 0) value[static_cast<std::size_t>(r)] = g(rng);
        double s = 0.0;
        for (double v : value) s += v;
        out[i] = s;
    }
    return out;
}

Eigen::MatrixXd convolve_trf(const Trf& trf, const Signal& feature)
{
    const Eigen::MatrixXd x = build_lag_matrix(feature.samples(), trf.lags);
    return (x * trf.coefficients.transpose()).transpose();
}

} // namespace

void SynthConfig::validate() const
{
    if (participants < 1 || trials < 1) throw ParameterError("SynthConfig: participants and trials must be positive");
    if (!(duration_s > 0.0) || !(fs > 0.0)) throw ParameterError("SynthConfig: duration and fs must be positive");
    if (!(gain_attended > gain_ignored) || gain_ignored < 0.0)
        throw ParameterError("SynthConfig: need gain_attended > gain_ignored >= 0");
    if (channels.empty() || channels.size() != channel_gains.size())
        throw ParameterError("SynthConfig: one gain per channel");
    if (!(feature_cutoff_hz > 0.0 && feature_cutoff_hz < fs / 2)) throw ParameterError("SynthConfig: bad feature cutoff");
}

nlohmann::json SynthConfig::to_json() const
{
    nlohmann::json p = nlohmann::json::array();
    for (const auto& k : peaks) p.push_back({{"latency_s", k.latency_s}, {"width_s", k.width_s}, {"amplitude", k.amplitude}});
    return {{"participants", participants},
            {"trials", trials},
            {"duration_s", duration_s},
            {"fs", fs},
            {"gain_attended", gain_attended},
            {"gain_ignored", gain_ignored},
            {"snr_db", snr_db},
            {"seed", seed},
            {"peaks", p},
            {"channels", channels},
            {"channel_gains", channel_gains},
            {"driver", driver_name(driver)},
            {"pink_noise", pink_noise},
            {"feature_cutoff_hz", feature_cutoff_hz}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j)
{
    SynthConfig c;
    c.participants = j.value("participants", c.participants);
    c.trials = j.value("trials", c.trials);
    c.duration_s = j.value("duration_s", c.duration_s);
    c.fs = j.value("fs", c.fs);
    c.gain_attended = j.value("gain_attended", c.gain_attended);
    c.gain_ignored = j.value("gain_ignored", c.gain_ignored);
    c.snr_db = j.value("snr_db", c.snr_db);
    c.seed = j.value("seed", c.seed);
    if (j.contains("peaks")) {
        c.peaks.clear();
        for (const auto& p : j.at("peaks"))
            c.peaks.push_back({p.at("latency_s").get<double>(), p.at("width_s").get<double>(), p.at("amplitude").get<double>()});
    }
    c.channels = j.value("channels", c.channels);
    c.channel_gains = j.value("channel_gains", c.channel_gains);
    c.driver = parse_driver(j.value("driver", driver_name(c.driver)));
    c.pink_noise = j.value("pink_noise", c.pink_noise);
    c.feature_cutoff_hz = j.value("feature_cutoff_hz", c.feature_cutoff_hz);
    c.validate();
    return c;
}

Signal gen_feature_raw(double duration_s, double fs, std::uint64_t seed, double cutoff_hz)
{
    if (!(duration_s > 0.0) || !(fs > 0.0)) throw ParameterError("gen_feature: duration and fs must be positive");
    const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
    const int half = static_cast<int>(std::ceil(4.0 * fs / cutoff_hz));
    const std::vector<double> h = lowpass(cutoff_hz, fs, half);
    Rng rng = make_rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> w(n + h.size() - 1);
    for (double& v : w) v = g(rng);
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * w[i + k];
        x[i] = acc;
    }
    const double sd = stddev(x);
    double lo = x[0];
    for (double v : x) lo = std::min(lo, v);
    for (double& v : x) v = v - lo + 0.1 * sd;
    return Signal(std::move(x), fs);
}

FeatureSignal gen_feature(double duration_s, double fs, std::uint64_t seed, double cutoff_hz)
{
    return {standardize(gen_feature_raw(duration_s, fs, seed, cutoff_hz)), FeatureKind::envelope};
}

FeaturePair gen_feature_pair(double duration_s, double fs, std::uint64_t seed, double cutoff_hz)
{
    const Signal raw = gen_feature_raw(duration_s, fs, seed, cutoff_hz);
    return {{standardize(raw), FeatureKind::envelope}, onset_envelope({raw, FeatureKind::envelope})};
}

Trf gen_trf(const std::vector<PeakSpec>& peaks, const std::vector<double>& channel_gains,
            const std::vector<std::string>& channels, const LagSpec& lags)
{
    if (channel_gains.size() != channels.size()) throw ParameterError("gen_trf: one gain per channel");
    const double lo = lags.latency(0), hi = lags.latency(lags.taps() - 1);
    Trf trf;
    trf.lags = lags;
    trf.channels = channels;
    trf.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(channels.size()), lags.taps());
    for (const PeakSpec& p : peaks) {
        if (p.latency_s < lo || p.latency_s > hi) throw ParameterError("gen_trf: peak outside the latency axis");
        if (!(p.width_s > 0.0)) throw ParameterError("gen_trf: peak width must be positive");
        for (int j = 0; j < lags.taps(); ++j) {
            const double d = (lags.latency(j) - p.latency_s) / p.width_s;
            const double v = p.amplitude * std::exp(-0.5 * d * d);
            for (std::size_t c = 0; c < channels.size(); ++c)
                trf.coefficients(static_cast<Eigen::Index>(c), j) += channel_gains[c] * v;
        }
    }
    return trf;
}

Speaker attended_speaker(int trial_index)
{
    if (trial_index < 1) throw ParameterError("trial indices start at 1");
    return ((trial_index - 1) / 4) % 2 == 0 ? Speaker::male : Speaker::female;
}

SynthTrial gen_trial_components(const SynthConfig& cfg, int participant, int trial_index)
{
    cfg.validate();
    const auto t = static_cast<std::uint64_t>(trial_index);
    const std::uint64_t stim = mix_seed(cfg.seed, kStimulusStream);
    const FeaturePair male = gen_feature_pair(cfg.duration_s, cfg.fs, mix_seed(stim, 2 * t), cfg.feature_cutoff_hz);
    const FeaturePair female = gen_feature_pair(cfg.duration_s, cfg.fs, mix_seed(stim, 2 * t + 1), cfg.feature_cutoff_hz);
    const Speaker att = attended_speaker(trial_index);
    const FeaturePair& fa = att == Speaker::male ? male : female;
    const FeaturePair& fi = att == Speaker::male ? female : male;

    const Trf trf = gen_trf(cfg.peaks, cfg.channel_gains, cfg.channels, LagSpec(-64, 96, cfg.fs));
    auto drive = [&](const FeaturePair& f) {
        switch (cfg.driver) {
        case SynthDriver::envelope: return convolve_trf(trf, f.envelope.signal);
        case SynthDriver::onsets: return convolve_trf(trf, f.onsets.signal);
        case SynthDriver::both: break;
        }
        return Eigen::MatrixXd(convolve_trf(trf, f.envelope.signal) + convolve_trf(trf, f.onsets.signal));
    };
    SynthTrial out;
    out.signal = cfg.gain_attended * drive(fa) + cfg.gain_ignored * drive(fi);

    Rng rng = make_rng(mix_seed(cfg.seed, kNoiseStream), (static_cast<std::uint64_t>(participant) << 20) + t);
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::Index n = out.signal.cols();
    out.noise.resize(out.signal.rows(), n);
    for (Eigen::Index c = 0; c < out.signal.rows(); ++c) {
        if (cfg.pink_noise) {
            const auto p = pink(static_cast<std::size_t>(n), rng);
            for (Eigen::Index i = 0; i < n; ++i) out.noise(c, i) = p[static_cast<std::size_t>(i)];
        } else {
            for (Eigen::Index i = 0; i < n; ++i) out.noise(c, i) = g(rng);
        }
        out.noise.row(c).array() -= out.noise.row(c).mean();
        const double ps = out.signal.row(c).squaredNorm() / static_cast<double>(n);
        const double pn = out.noise.row(c).squaredNorm() / static_cast<double>(n);
        // a silent channel keeps unit noise
        const double target = ps > 0.0 ? ps / std::pow(10.0, cfg.snr_db / 10.0) : 1.0;
        out.noise.row(c) *= std::sqrt(target / pn);
    }

    TrialBundle& b = out.bundle;
    b.index = trial_index;
    b.attended = att;
    b.eeg = standardize(MultiSignal(cfg.channels, out.signal + out.noise, cfg.fs));
    b.attended_features = fa;
    b.ignored_features = fi;
    return out;
}

TrialBundle gen_trial(const SynthConfig& config, int participant, int trial_index)
{
    return gen_trial_components(config, participant, trial_index).bundle;
}

std::string participant_id(int participant)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%02d", participant);
    return buf;
}

Participant gen_participant(const SynthConfig& config, int participant)
{
    Participant p;
    p.id = participant_id(participant);
    p.trials.resize(static_cast<std::size_t>(config.trials));
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 1; t <= config.trials; ++t) p.trials[static_cast<std::size_t>(t - 1)] = gen_trial(config, participant, t);
    return p;
}

void write_synth_dataset(const std::filesystem::path& root, const SynthConfig& config)
{
    config.validate();
    DatasetManifest m;
    for (int p = 1; p <= config.participants; ++p) m.participants.push_back(participant_id(p));
    m.extra = {{"generator", "synthetic"}, {"fs", config.fs}, {"trials", config.trials}};
    write_dataset_manifest(root, m);
    for (int p = 1; p <= config.participants; ++p) write_participant(root / participant_id(p), gen_participant(config, p));

    const Trf trf = gen_trf(config.peaks, config.channel_gains, config.channels, LagSpec(-64, 96, config.fs));
    nlohmann::json coeffs = nlohmann::json::object();
    for (std::size_t c = 0; c < config.channels.size(); ++c) {
        std::vector<double> row(static_cast<std::size_t>(trf.coefficients.cols()));
        for (Eigen::Index j = 0; j < trf.coefficients.cols(); ++j)
            row[static_cast<std::size_t>(j)] = trf.coefficients(static_cast<Eigen::Index>(c), j);
        coeffs[config.channels[c]] = row;
    }
    std::vector<double> lat;
    for (int j = 0; j < trf.lags.taps(); ++j) lat.push_back(trf.lags.latency(j));
    const nlohmann::json truth{{"config", config.to_json()},
                               {"trf", {{"lag_min", trf.lags.lag_min}, {"lag_max", trf.lags.lag_max}, {"latency_s", lat}, {"coefficients", coeffs}}}};
    std::ofstream out(root / "truth.json");
    if (!out) throw IngestionError("cannot write " + (root / "truth.json").string());
    out << truth.dump(2) << '\n';
}

} // namespace aad
