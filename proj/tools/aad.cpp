#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

#include "aad/error.hpp"
#include "aad/experiment.hpp"
#include "aad/features.hpp"
#include "aad/hypothesis.hpp"
#include "aad/signal_io.hpp"
#include "aad/synth.hpp"

namespace fs = std::filesystem;
using namespace aad;

namespace {

ExperimentConfig base_config(const std::string& config_path)
{
    if (config_path.empty()) return {};
    return ExperimentConfig::load(config_path);
}

std::vector<FeatureKind> parse_features(const std::string& s)
{
    if (s == "both") return {FeatureKind::envelope, FeatureKind::onset_envelope};
    return {parse_feature_kind(s)};
}

int cmd_features(const std::string& wav, const std::string& kind, std::string out)
{
    const Signal audio = read_wav(wav);
    FeatureSignal env = auditory_envelope(audio);
    const FeatureKind k = parse_feature_kind(kind);
    const FeatureSignal feat = k == FeatureKind::envelope ? env : onset_envelope(env);
    if (out.empty()) out = fs::path(wav).replace_extension().string() + "_" + to_string(k) + ".f32";
    Eigen::MatrixXd data = feat.signal.eigen().transpose();
    write_f32(out, MultiSignal({to_string(k)}, data, feat.signal.fs()),
              {{"kind", to_string(k)},
               {"source", fs::path(wav).filename().string()},
               {"source_digest", file_digest(wav)},
               {"audio_fs", audio.fs()}});
    std::printf("%s %s samples=%zu fs=%g\n", out.c_str(), to_string(k).c_str(), feat.signal.size(), feat.signal.fs());
    return 0;
}

int cmd_synth(SynthConfig cfg, const std::string& out)
{
    cfg.validate();
    apply_job_limit();
    write_synth_dataset(out, cfg);
    std::printf("wrote %d participants x %d trials to %s\n", cfg.participants, cfg.trials, out.c_str());
    return 0;
}

int cmd_trf(const std::string& dataset, ExperimentConfig cfg, const std::string& out)
{
    const fs::path dir = out.empty() ? cfg.output / "trf" : fs::path(out);
    const nlohmann::json doc = run_trf_analysis(dataset, dir, cfg.trf, cfg.seed, cfg.participants);
    std::printf("feature,role,channel,statistic,threshold,min_p,significant\n");
    for (const auto& t : doc.at("tests")) {
        double min_p = 1.0;
        for (const auto& c : t.at("clusters")) min_p = std::min(min_p, c.at("p_value").get<double>());
        std::printf("%s,%s,%s,%d,%.6g,%.4f,%d\n", t.at("feature").get<std::string>().c_str(),
                    t.at("role").get<std::string>().c_str(), t.at("channel").get<std::string>().c_str(),
                    t.at("statistic").get<int>(), t.at("threshold").get<double>(), min_p,
                    t.at("significant").get<bool>() ? 1 : 0);
    }
    return 0;
}

int cmd_decode(ExperimentConfig cfg)
{
    cfg.validate();
    const ExperimentReport rep = run_experiment(cfg);
    for (const auto& row : rep.summary.at("accuracy"))
        std::printf("%s %s %gs accuracy=%.4f\n", row.at("algorithm").get<std::string>().c_str(),
                    row.at("feature").get<std::string>().c_str(), row.at("length_s").get<double>(),
                    row.at("mean_accuracy").get<double>());
    std::printf("results in %s\n", cfg.output.string().c_str());
    return 0;
}

fs::path results_file(const fs::path& p)
{
    return fs::is_directory(p) ? p / "results.csv" : p;
}

int cmd_stats(const fs::path& results)
{
    const auto rows = read_results_csv(results_file(results));
    using Key = std::tuple<std::string, std::string, double>;
    std::map<Key, std::vector<double>> acc;
    std::map<Key, int> above;
    for (const auto& r : rows) {
        acc[{r.algorithm, r.feature, r.length_s}].push_back(r.accuracy);
        above[{r.algorithm, r.feature, r.length_s}] += r.accuracy >= r.chance ? 1 : 0;
    }
    std::printf("algorithm,feature,length_s,participants,mean,sem,above_chance,t_vs_half,p\n");
    for (const auto& [k, v] : acc) {
        const double n = static_cast<double>(v.size());
        double m = 0.0, ss = 0.0;
        for (double a : v) m += a;
        m /= n;
        for (double a : v) ss += (a - m) * (a - m);
        const double sem = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : NAN;
        double t = NAN, p = NAN;
        if (v.size() > 1) {
            try {
                // one-sample test against 0.5 as a paired test against a constant
                const std::vector<double> half(v.size(), 0.5);
                const TestResult r = ttest(TestKind::paired, Tail::single, v, half);
                t = r.t;
                p = r.p;
            } catch (const DegenerateTestError&) {
            }
        }
        std::printf("%s,%s,%g,%zu,%.4f,%.4f,%d,%.4f,%.3g\n", std::get<0>(k).c_str(), std::get<1>(k).c_str(),
                    std::get<2>(k), v.size(), m, sem, above[k], t, p);
    }
    return 0;
}

int cmd_report(const fs::path& results, const std::string& out)
{
    const fs::path dir = fs::is_directory(results) ? results : results.parent_path();
    const auto rows = read_results_csv(results_file(results));
    std::ostringstream md;
    md << "# Decoding report\n\n## Mean accuracy\n\n";
    using Key = std::tuple<std::string, std::string>;
    std::map<Key, std::map<double, std::pair<double, int>>> table;
    std::map<double, bool> lengths;
    for (const auto& r : rows) {
        auto& c = table[{r.algorithm, r.feature}][r.length_s];
        c.first += r.accuracy;
        c.second += 1;
        lengths[r.length_s] = true;
    }
    md << "| decoder | feature |";
    for (const auto& [l, _] : lengths) md << ' ' << l << " s |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < lengths.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& [k, cells] : table) {
        md << "| " << std::get<0>(k) << " | " << std::get<1>(k) << " |";
        for (const auto& [l, _] : lengths) {
            const auto it = cells.find(l);
            char buf[32];
            if (it == cells.end()) std::snprintf(buf, sizeof buf, " |");
            else std::snprintf(buf, sizeof buf, " %.3f |", it->second.first / it->second.second);
            md << buf;
        }
        md << '\n';
    }
    const fs::path summary = dir / "summary.json";
    if (fs::exists(summary)) {
        std::ifstream in(summary);
        const nlohmann::json s = nlohmann::json::parse(in);
        if (s.contains("marker_tests") && !s.at("marker_tests").empty()) {
            md << "\n## Attention markers vs null (threshold p < " << s.at("marker_threshold").get<double>() << ")\n\n";
            std::map<Key, std::pair<int, int>> sig;
            for (const auto& t : s.at("marker_tests")) {
                auto& c = sig[{t.at("algorithm").get<std::string>(), t.at("feature").get<std::string>()}];
                c.first += t.at("significant").get<bool>() ? 1 : 0;
                c.second += 1;
            }
            md << "| decoder | feature | significant |\n|---|---|---|\n";
            for (const auto& [k, c] : sig)
                md << "| " << std::get<0>(k) << " | " << std::get<1>(k) << " | " << c.first << " / " << c.second << " |\n";
        }
        if (s.contains("trf")) {
            md << "\n## TRF clusters\n\n| feature | role | channel | min p | significant |\n|---|---|---|---|---|\n";
            for (const auto& t : s.at("trf").at("tests")) {
                double min_p = 1.0;
                for (const auto& c : t.at("clusters")) min_p = std::min(min_p, c.at("p_value").get<double>());
                md << "| " << t.at("feature").get<std::string>() << " | " << t.at("role").get<std::string>() << " | "
                   << t.at("channel").get<std::string>() << " | " << min_p << " | "
                   << (t.at("significant").get<bool>() ? "yes" : "no") << " |\n";
            }
        }
    }
    if (out.empty()) {
        std::cout << md.str();
    } else {
        std::ofstream f(out);
        if (!f) throw IngestionError("cannot write " + out);
        f << md.str();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Auditory attention decoding from EEG"};
    app.require_subcommand(1);

    std::string wav, kind = "envelope", feat_out;
    auto* features = app.add_subcommand("features", "Extract a speech feature from a WAV file");
    features->add_option("audio", wav, "input WAV")->required()->check(CLI::ExistingFile);
    features->add_option("--kind", kind, "envelope or onsets")->check(CLI::IsMember({"envelope", "onsets"}));
    features->add_option("--out", feat_out, "output .f32 (default: next to the input)");

    SynthConfig synth_cfg;
    std::string synth_out, synth_config;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--participants", synth_cfg.participants)->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_cfg.seed);
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--trials", synth_cfg.trials)->check(CLI::PositiveNumber);
    synth->add_option("--duration", synth_cfg.duration_s, "trial duration in seconds");
    synth->add_option("--snr", synth_cfg.snr_db, "SNR in dB");
    synth->add_option("--gain-attended", synth_cfg.gain_attended);
    synth->add_option("--gain-ignored", synth_cfg.gain_ignored);
    synth->add_flag("--pink", synth_cfg.pink_noise, "1/f noise instead of white");
    synth->add_option("--config", synth_config, "JSON synthesis config; flags override it")->check(CLI::ExistingFile);

    std::string trf_dataset, trf_config, trf_out;
    int trf_shifts = -1, trf_perm = -1;
    std::uint64_t trf_seed = 0;
    auto* trf = app.add_subcommand("trf", "Cross-validated TRFs and cluster tests");
    trf->add_option("dataset", trf_dataset)->required()->check(CLI::ExistingDirectory);
    trf->add_option("--config", trf_config)->check(CLI::ExistingFile);
    trf->add_option("--out", trf_out);
    trf->add_option("--shifts", trf_shifts, "circular shifts for the null");
    trf->add_option("--permutations", trf_perm);
    auto* trf_seed_opt = trf->add_option("--seed", trf_seed);

    std::string dec_dataset, dec_config, dec_algo, dec_feature, dec_out;
    std::uint64_t dec_seed = 0;
    auto* decode = app.add_subcommand("decode", "Nested cross-validated attention decoding");
    decode->add_option("dataset", dec_dataset)->required()->check(CLI::ExistingDirectory);
    decode->add_option("--algo", dec_algo, "linear, cnn or cca (default: from config)")
        ->check(CLI::IsMember({"linear", "cnn", "cca"}));
    decode->add_option("--feature", dec_feature, "envelope, onsets or both")
        ->check(CLI::IsMember({"envelope", "onsets", "both"}));
    decode->add_option("--config", dec_config)->check(CLI::ExistingFile);
    decode->add_option("--out", dec_out);
    auto* dec_seed_opt = decode->add_option("--seed", dec_seed);

    std::string stats_in;
    auto* stats = app.add_subcommand("stats", "Per-condition accuracy statistics");
    stats->add_option("results", stats_in, "results.csv or its directory")->required()->check(CLI::ExistingPath);

    std::string report_in, report_out;
    auto* report = app.add_subcommand("report", "Markdown summary of a results directory");
    report->add_option("results", report_in, "results.csv or its directory")->required()->check(CLI::ExistingPath);
    report->add_option("--out", report_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*features) return cmd_features(wav, kind, feat_out);
        if (*synth) {
            if (!synth_config.empty()) {
                std::ifstream in(synth_config);
                SynthConfig from = SynthConfig::from_json(nlohmann::json::parse(in));
                // explicit flags win over the file
                for (const auto* o : synth->get_options()) {
                    if (o->count() == 0) continue;
                    const std::string n = o->get_name();
                    if (n == "--participants") from.participants = synth_cfg.participants;
                    else if (n == "--seed") from.seed = synth_cfg.seed;
                    else if (n == "--trials") from.trials = synth_cfg.trials;
                    else if (n == "--duration") from.duration_s = synth_cfg.duration_s;
                    else if (n == "--snr") from.snr_db = synth_cfg.snr_db;
                    else if (n == "--gain-attended") from.gain_attended = synth_cfg.gain_attended;
                    else if (n == "--gain-ignored") from.gain_ignored = synth_cfg.gain_ignored;
                    else if (n == "--pink") from.pink_noise = synth_cfg.pink_noise;
                }
                synth_cfg = from;
            }
            return cmd_synth(synth_cfg, synth_out);
        }
        if (*trf) {
            ExperimentConfig cfg = base_config(trf_config);
            if (trf_shifts > 0) cfg.trf.n_shifts = trf_shifts;
            if (trf_perm > 0) cfg.trf.n_perm = trf_perm;
            if (trf_seed_opt->count()) cfg.seed = trf_seed;
            apply_job_limit();
            return cmd_trf(trf_dataset, cfg, trf_out);
        }
        if (*decode) {
            ExperimentConfig cfg = base_config(dec_config);
            cfg.dataset = dec_dataset;
            if (!dec_algo.empty()) cfg.algorithms = {dec_algo};
            if (!dec_feature.empty()) cfg.features = parse_features(dec_feature);
            if (!dec_out.empty()) cfg.output = dec_out;
            if (dec_seed_opt->count()) cfg.seed = dec_seed;
            return cmd_decode(cfg);
        }
        if (*stats) return cmd_stats(stats_in);
        if (*report) return cmd_report(report_in, report_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "aad: %s\n", e.what());
        return 1;
    }
    return 0;
}
