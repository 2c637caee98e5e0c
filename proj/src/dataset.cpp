#include "aad/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "aad/error.hpp"
#include "aad/signal_io.hpp"

namespace aad {

namespace fs = std::filesystem;

std::string to_string(Speaker s) { return s == Speaker::male ? "male" : "female"; }

Speaker parse_speaker(const std::string& name)
{
    if (name == "male") return Speaker::male;
    if (name == "female") return Speaker::female;
    throw ParameterError("unknown speaker: " + name);
}

const FeatureSignal& TrialBundle::feature(SpeakerRole role, FeatureKind kind) const
{
    if (role == SpeakerRole::attended) return attended_features.get(kind);
    if (role == SpeakerRole::ignored) return ignored_features.get(kind);
    throw ParameterError("TrialBundle::feature: role must be attended or ignored");
}

void TrialBundle::validate() const
{
    for (const FeaturePair* p : {&attended_features, &ignored_features}) {
        for (const FeatureSignal* f : {&p->envelope, &p->onsets}) {
            if (static_cast<Eigen::Index>(f->signal.size()) != eeg.length())
                throw ParameterError("trial " + std::to_string(index) + ": feature length differs from EEG");
            if (f->signal.fs() != eeg.fs())
                throw ParameterError("trial " + std::to_string(index) + ": feature rate differs from EEG");
        }
    }
}

namespace {

FeatureSignal slice_feature(const FeatureSignal& f, Eigen::Index begin, Eigen::Index end)
{
    std::vector<double> v(f.signal.vec().begin() + begin, f.signal.vec().begin() + end);
    return {Signal(std::move(v), f.signal.fs()), f.kind};
}

std::string trial_stem(int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "trial_%02d", index);
    return buf;
}

FeatureSignal load_feature(const fs::path& path, FeatureKind kind)
{
    const MultiSignal m = read_f32(path);
    if (m.channel_count() != 1) throw IngestionError(path.string() + ": feature must have one channel");
    return {m.channel(0), kind};
}

void save_feature(const fs::path& path, const FeatureSignal& f)
{
    Eigen::MatrixXd row = f.signal.eigen().transpose();
    write_f32(path, MultiSignal({to_string(f.kind)}, std::move(row), f.signal.fs()), {{"kind", to_string(f.kind)}});
}

nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("missing " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

} // namespace

TrialBundle TrialBundle::slice(Eigen::Index begin, Eigen::Index end) const
{
    TrialBundle t;
    t.index = index;
    t.attended = attended;
    t.eeg = eeg.slice(begin, end);
    t.attended_features = {slice_feature(attended_features.envelope, begin, end),
                           slice_feature(attended_features.onsets, begin, end)};
    t.ignored_features = {slice_feature(ignored_features.envelope, begin, end),
                          slice_feature(ignored_features.onsets, begin, end)};
    return t;
}

void write_participant(const fs::path& dir, const Participant& participant)
{
    fs::create_directories(dir);
    nlohmann::json trials = nlohmann::json::array();
    for (const TrialBundle& t : participant.trials) {
        t.validate();
        const std::string stem = trial_stem(t.index);
        write_f32(dir / (stem + "_eeg.f32"), t.eeg);
        const Speaker ign = other(t.attended);
        for (FeatureKind kind : {FeatureKind::envelope, FeatureKind::onset_envelope}) {
            save_feature(dir / (stem + "_" + to_string(t.attended) + "_" + to_string(kind) + ".f32"),
                         t.attended_features.get(kind));
            save_feature(dir / (stem + "_" + to_string(ign) + "_" + to_string(kind) + ".f32"),
                         t.ignored_features.get(kind));
        }
        trials.push_back({{"index", t.index}, {"attended", to_string(t.attended)}, {"stem", stem}});
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IngestionError("cannot write " + (dir / "manifest.json").string());
    out << nlohmann::json{{"id", participant.id}, {"trials", trials}}.dump(2) << '\n';
}

Participant read_participant(const fs::path& dir)
{
    const fs::path mpath = dir / "manifest.json";
    const nlohmann::json m = read_json(mpath);
    Participant p;
    try {
        p.id = m.at("id").get<std::string>();
        for (const auto& entry : m.at("trials")) {
            TrialBundle t;
            t.index = entry.at("index").get<int>();
            t.attended = parse_speaker(entry.at("attended").get<std::string>());
            const std::string stem = entry.at("stem").get<std::string>();
            t.eeg = read_f32(dir / (stem + "_eeg.f32"));
            const Speaker ign = other(t.attended);
            auto path = [&](Speaker s, FeatureKind k) {
                return dir / (stem + "_" + to_string(s) + "_" + to_string(k) + ".f32");
            };
            t.attended_features = {load_feature(path(t.attended, FeatureKind::envelope), FeatureKind::envelope),
                                   load_feature(path(t.attended, FeatureKind::onset_envelope), FeatureKind::onset_envelope)};
            t.ignored_features = {load_feature(path(ign, FeatureKind::envelope), FeatureKind::envelope),
                                  load_feature(path(ign, FeatureKind::onset_envelope), FeatureKind::onset_envelope)};
            try {
                t.validate();
            } catch (const ParameterError& e) {
                throw IngestionError(dir.string() + ": " + e.what());
            }
            p.trials.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(mpath.string() + ": " + e.what());
    } catch (const ParameterError& e) {
        throw IngestionError(mpath.string() + ": " + e.what());
    }
    return p;
}

void write_dataset_manifest(const fs::path& root, const DatasetManifest& manifest)
{
    fs::create_directories(root);
    nlohmann::json j = manifest.extra;
    j["participants"] = manifest.participants;
    std::ofstream out(root / "manifest.json");
    if (!out) throw IngestionError("cannot write " + (root / "manifest.json").string());
    out << j.dump(2) << '\n';
}

DatasetManifest read_dataset_manifest(const fs::path& root)
{
    const fs::path mpath = root / "manifest.json";
    nlohmann::json j = read_json(mpath);
    DatasetManifest m;
    try {
        m.participants = j.at("participants").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(mpath.string() + ": " + e.what());
    }
    j.erase("participants");
    m.extra = std::move(j);
    return m;
}

} // namespace aad
