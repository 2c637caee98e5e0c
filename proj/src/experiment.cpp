#include "aad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <omp.h>

#include "aad/error.hpp"
#include "aad/evaluation.hpp"
#include "aad/hypothesis.hpp"
#include "aad/rng.hpp"
#include "aad/trf_analysis.hpp"

namespace aad {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kAlgorithms{"linear", "cnn", "cca"};

std::string fmt(const char* f, double v)
{
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

nlohmann::json budget_json(const CnnBudget& b)
{
    return {{"max_epochs", b.max_epochs},
            {"patience", b.patience},
            {"batch", b.batch},
            {"windows_per_epoch", b.windows_per_epoch},
            {"max_validation_windows", b.max_validation_windows},
            {"learning_rate", b.learning_rate}};
}

void require_known(const nlohmann::json& j, const std::set<std::string>& keys, const std::string& where)
{
    for (const auto& [k, v] : j.items())
        if (!keys.contains(k)) throw ParameterError(where + ": unknown key '" + k + "'");
}

} // namespace

void ExperimentConfig::validate() const
{
    if (algorithms.empty()) throw ParameterError("config: algorithm list is empty");
    for (const auto& a : algorithms)
        if (!kAlgorithms.contains(a)) throw ParameterError("config: unknown algorithm '" + a + "'");
    if (features.empty()) throw ParameterError("config: feature list is empty");
    if (segment_lengths.empty()) throw ParameterError("config: segment length list is empty");
    for (double l : segment_lengths)
        if (!(l > 0.0)) throw ParameterError("config: segment lengths must be positive");
    if (!(hop_s > 0.0)) throw ParameterError("config: hop must be positive");
    if (inner_folds < 2) throw ParameterError("config: need at least two inner folds");
    if (outer_folds < 0) throw ParameterError("config: outer_folds must be non-negative");
    if (lambda_min_exp > lambda_max_exp) throw ParameterError("config: empty lambda grid");
    if (cnn_grid.empty()) throw ParameterError("config: empty CNN grid");
    for (const auto& c : cnn_grid) c.validate();
    if (cca.shrinkage_grid.empty()) throw ParameterError("config: empty CCA shrinkage grid");
    if (!(marker_segment_s > 0.0)) throw ParameterError("config: marker segment length must be positive");
}

nlohmann::json ExperimentConfig::to_json() const
{
    std::vector<std::string> feats;
    for (auto f : features) feats.push_back(to_string(f));
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& c : cnn_grid) grid.push_back({{"kernel", c.kernel}, {"blocks", c.blocks}});
    return {{"dataset", dataset.string()},
            {"output", output.string()},
            {"seed", seed},
            {"algorithms", algorithms},
            {"features", feats},
            {"segment_lengths", segment_lengths},
            {"hop_s", hop_s},
            {"inner_folds", inner_folds},
            {"participants", participants},
            {"outer_folds", outer_folds},
            {"lambda_min_exp", lambda_min_exp},
            {"lambda_max_exp", lambda_max_exp},
            {"cnn", {{"budget", budget_json(cnn)}, {"grid", grid}}},
            {"cca", {{"shrinkage", cca.shrinkage_grid}, {"segment_s", cca.segment_s}}},
            {"marker_segment_s", marker_segment_s},
            {"trf",
             {{"enabled", trf.enabled},
              {"n_shifts", trf.n_shifts},
              {"min_shift_s", trf.min_shift_s},
              {"n_perm", trf.n_perm},
              {"threshold_pct", trf.threshold_pct}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base)
{
    require_known(j,
                  {"dataset", "output", "seed", "algorithms", "features", "segment_lengths", "hop_s", "inner_folds",
                   "participants", "outer_folds", "lambda_min_exp", "lambda_max_exp", "cnn", "cca",
                   "marker_segment_s", "trf"},
                  "config");
    ExperimentConfig c;
    try {
        auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? fs::path(p) : base / p; };
        if (j.contains("dataset")) c.dataset = resolve(j.at("dataset").get<std::string>());
        if (j.contains("output")) c.output = resolve(j.at("output").get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.algorithms = j.value("algorithms", c.algorithms);
        if (j.contains("features")) {
            c.features.clear();
            for (const auto& f : j.at("features")) c.features.push_back(parse_feature_kind(f.get<std::string>()));
        }
        c.segment_lengths = j.value("segment_lengths", c.segment_lengths);
        c.hop_s = j.value("hop_s", c.hop_s);
        c.inner_folds = j.value("inner_folds", c.inner_folds);
        c.participants = j.value("participants", c.participants);
        c.outer_folds = j.value("outer_folds", c.outer_folds);
        c.lambda_min_exp = j.value("lambda_min_exp", c.lambda_min_exp);
        c.lambda_max_exp = j.value("lambda_max_exp", c.lambda_max_exp);
        if (j.contains("cnn")) {
            const auto& n = j.at("cnn");
            require_known(n, {"budget", "grid"}, "config.cnn");
            if (n.contains("budget")) {
                const auto& b = n.at("budget");
                require_known(b, {"max_epochs", "patience", "batch", "windows_per_epoch", "max_validation_windows", "learning_rate"},
                              "config.cnn.budget");
                c.cnn.max_epochs = b.value("max_epochs", c.cnn.max_epochs);
                c.cnn.patience = b.value("patience", c.cnn.patience);
                c.cnn.batch = b.value("batch", c.cnn.batch);
                c.cnn.windows_per_epoch = b.value("windows_per_epoch", c.cnn.windows_per_epoch);
                c.cnn.max_validation_windows = b.value("max_validation_windows", c.cnn.max_validation_windows);
                c.cnn.learning_rate = b.value("learning_rate", c.cnn.learning_rate);
            }
            if (n.contains("grid")) {
                c.cnn_grid.clear();
                for (const auto& g : n.at("grid")) {
                    CnnConfig cc;
                    cc.kernel = g.at("kernel").get<int>();
                    cc.blocks = g.at("blocks").get<int>();
                    c.cnn_grid.push_back(cc);
                }
            }
        }
        if (j.contains("cca")) {
            const auto& a = j.at("cca");
            require_known(a, {"shrinkage", "segment_s"}, "config.cca");
            c.cca.shrinkage_grid = a.value("shrinkage", c.cca.shrinkage_grid);
            c.cca.segment_s = a.value("segment_s", c.cca.segment_s);
        }
        c.marker_segment_s = j.value("marker_segment_s", c.marker_segment_s);
        if (j.contains("trf")) {
            const auto& t = j.at("trf");
            require_known(t, {"enabled", "n_shifts", "min_shift_s", "n_perm", "threshold_pct"}, "config.trf");
            c.trf.enabled = t.value("enabled", c.trf.enabled);
            c.trf.n_shifts = t.value("n_shifts", c.trf.n_shifts);
            c.trf.min_shift_s = t.value("min_shift_s", c.trf.min_shift_s);
            c.trf.n_perm = t.value("n_perm", c.trf.n_perm);
            c.trf.threshold_pct = t.value("threshold_pct", c.trf.threshold_pct);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

void apply_job_limit()
{
    if (const char* v = std::getenv("AAD_JOBS")) {
        const int n = std::atoi(v);
        if (n < 1) throw ParameterError("AAD_JOBS must be a positive integer");
        omp_set_num_threads(n);
    }
}

namespace {

struct ParticipantOutput {
    std::vector<SegmentRow> segments;
    std::vector<MarkerTest> tests;
    std::vector<std::string> marker_lines;
};

std::vector<double> grid_from(const ExperimentConfig& c)
{
    std::vector<double> g;
    for (int e = c.lambda_min_exp; e <= c.lambda_max_exp; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

NestedCvPlan plan_for(const ExperimentConfig& c, int n_trials, std::uint64_t seed)
{
    NestedCvPlan plan = make_nested_cv(n_trials, c.inner_folds, seed);
    if (c.outer_folds > 0 && c.outer_folds < n_trials) {
        // evenly spaced held-out trials, so both attended talkers are tested
        std::vector<OuterFold> kept;
        for (int k = 0; k < c.outer_folds; ++k)
            kept.push_back(plan.folds[static_cast<std::size_t>(k * n_trials / c.outer_folds)]);
        plan.folds = std::move(kept);
    }
    return plan;
}

void add_backward_rows(ParticipantOutput& out, const std::string& pid, const std::string& algo, FeatureKind kind,
                       const TrialBundle& trial, std::span<const double> rec, const ExperimentConfig& c,
                       std::vector<double>& deltas, std::vector<double>& nulls, std::uint64_t seed)
{
    const auto att = trial.feature(SpeakerRole::attended, kind).signal.samples();
    const auto ign = trial.feature(SpeakerRole::ignored, kind).signal.samples();
    for (double len : c.segment_lengths) {
        const auto segs = segment_trial(trial, len, c.hop_s);
        for (const AttentionMarker& m : markers_from_reconstruction(rec, att, ign, segs, trial.fs()))
            out.segments.push_back({pid, algo, to_string(kind), len, trial.index, m.start_s, m.rho_attended,
                                    m.rho_ignored, m.delta, m.correct()});
    }
    const auto segs = segment_trial(trial, c.marker_segment_s, c.marker_segment_s);
    if (segs.size() < 2) return;
    const auto real = markers_from_reconstruction(rec, att, ign, segs, trial.fs());
    const auto null = null_markers_from_reconstruction(rec, att, ign, segs, trial.fs(), seed);
    for (std::size_t i = 0; i < real.size(); ++i) {
        deltas.push_back(real[i].delta);
        nulls.push_back(null[i].delta);
        out.marker_lines.push_back(pid + "," + algo + "," + to_string(kind) + "," + std::to_string(trial.index) + "," +
                                   fmt("%.3f", real[i].start_s) + "," + fmt("%.9f", real[i].delta) + "," +
                                   fmt("%.9f", null[i].delta));
    }
}

void add_test(ParticipantOutput& out, const std::string& pid, const std::string& algo, FeatureKind kind,
              const std::vector<double>& deltas, const std::vector<double>& nulls)
{
    if (deltas.size() < 2) return;
    MarkerTest t{pid, algo, to_string(kind), static_cast<int>(deltas.size()), 0.0, 0.0, 0.0, 1.0};
    for (double d : deltas) t.mean_delta += d;
    for (double d : nulls) t.mean_null += d;
    t.mean_delta /= static_cast<double>(deltas.size());
    t.mean_null /= static_cast<double>(nulls.size());
    try {
        const TestResult r = ttest(TestKind::unpaired, Tail::single, deltas, nulls);
        t.t = r.t;
        t.p = r.p;
    } catch (const DegenerateTestError&) {
        t.t = std::numeric_limits<double>::quiet_NaN();
    }
    out.tests.push_back(t);
}

ParticipantOutput run_participant(const ExperimentConfig& c, const Participant& p, std::uint64_t pseed)
{
    ParticipantOutput out;
    const int n = static_cast<int>(p.trials.size());
    if (n < 3) throw IngestionError("participant " + p.id + ": need at least three trials");
    for (FeatureKind kind : c.features) {
        const std::uint64_t fseed = mix_seed(pseed, static_cast<std::uint64_t>(kind));
        const NestedCvPlan plan = plan_for(c, n, fseed);
        for (const std::string& algo : c.algorithms) {
            std::vector<double> deltas, nulls;
            if (algo == "linear") {
                const auto grid = grid_from(c);
                const auto folds = tune_backward(plan, p.trials, kind, SpeakerRole::attended, LagSpec::backward_default(), grid);
                for (const BackwardFold& f : folds) {
                    const TrialBundle& trial = p.trials[static_cast<std::size_t>(f.test)];
                    const FeatureSignal rec = reconstruct(f.model, trial.eeg);
                    add_backward_rows(out, p.id, algo, kind, trial, rec.signal.samples(), c, deltas, nulls,
                                      mix_seed(fseed, 1000 + static_cast<std::uint64_t>(f.test)));
                }
            } else if (algo == "cnn") {
                for (const OuterFold& f : plan.folds) {
                    const CnnSelection sel = select_cnn(p.trials, f.train, kind, c.cnn,
                                                        mix_seed(fseed, 2000 + static_cast<std::uint64_t>(f.test)), c.cnn_grid);
                    const TrialBundle& trial = p.trials[static_cast<std::size_t>(f.test)];
                    const std::vector<double> rec = predict_trial(sel.result.model, trial.eeg);
                    add_backward_rows(out, p.id, algo, kind, trial, rec, c, deltas, nulls,
                                      mix_seed(fseed, 3000 + static_cast<std::uint64_t>(f.test)));
                }
            } else {
                for (const OuterFold& f : plan.folds) {
                    CcaTrainOptions opt = c.cca;
                    opt.inner = c.inner_folds;
                    opt.seed = mix_seed(fseed, 4000 + static_cast<std::uint64_t>(f.test));
                    const CcaDecoder dec = train_cca_decoder(p.trials, f.train, kind, opt);
                    const TrialBundle& trial = p.trials[static_cast<std::size_t>(f.test)];
                    const bool male_att = trial.attended == Speaker::male;
                    for (double len : c.segment_lengths) {
                        auto segs = segment_trial(trial, len, c.hop_s);
                        // a correlation needs two samples
                        std::erase_if(segs, [](const RowRange& r) { return r.size() < 2; });
                        const auto dec_rows = decode_segments(dec, trial, kind, segs);
                        for (std::size_t i = 0; i < segs.size(); ++i) {
                            const double oriented = male_att ? dec_rows[i].margin : -dec_rows[i].margin;
                            out.segments.push_back({p.id, algo, to_string(kind), len, trial.index,
                                                    static_cast<double>(segs[i].begin) / trial.fs(),
                                                    std::numeric_limits<double>::quiet_NaN(),
                                                    std::numeric_limits<double>::quiet_NaN(), oriented,
                                                    dec_rows[i].choose_a == male_att});
                        }
                    }
                }
            }
            if (algo != "cca") add_test(out, p.id, algo, kind, deltas, nulls);
        }
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << text;
}

// `rows` must be grouped by (participant, algorithm, feature, length)
std::vector<AccuracyRow> aggregate(const std::vector<SegmentRow>& rows)
{
    std::vector<AccuracyRow> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        int ok = 0;
        while (j < rows.size() && rows[j].participant == rows[i].participant && rows[j].algorithm == rows[i].algorithm &&
               rows[j].feature == rows[i].feature && rows[j].length_s == rows[i].length_s) {
            ok += rows[j].correct ? 1 : 0;
            ++j;
        }
        const int n = static_cast<int>(j - i);
        out.push_back({rows[i].participant, rows[i].algorithm, rows[i].feature, rows[i].length_s, n,
                       static_cast<double>(ok) / n, chance_level(n)});
        i = j;
    }
    return out;
}

} // namespace

nlohmann::json summarize_accuracy(const std::vector<AccuracyRow>& rows)
{
    std::map<std::tuple<std::string, std::string, double>, std::pair<double, int>> acc;
    for (const auto& r : rows) {
        auto& a = acc[{r.algorithm, r.feature, r.length_s}];
        a.first += r.accuracy;
        a.second += 1;
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [k, v] : acc)
        out.push_back({{"algorithm", std::get<0>(k)},
                       {"feature", std::get<1>(k)},
                       {"length_s", std::get<2>(k)},
                       {"participants", v.second},
                       {"mean_accuracy", v.first / v.second}});
    return out;
}

ExperimentReport run_experiment(const ExperimentConfig& c)
{
    c.validate();
    if (c.dataset.empty()) throw ParameterError("config: dataset path is required");
    apply_job_limit();
    const DatasetManifest manifest = read_dataset_manifest(c.dataset);
    std::vector<std::string> ids = c.participants.empty() ? manifest.participants : c.participants;
    for (const auto& id : ids)
        if (std::find(manifest.participants.begin(), manifest.participants.end(), id) == manifest.participants.end())
            throw IngestionError(c.dataset.string() + ": participant '" + id + "' not in manifest");

    std::vector<ParticipantOutput> outputs(ids.size());
    std::vector<std::string> errors(ids.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < ids.size(); ++i) {
        try {
            const Participant p = read_participant(c.dataset / ids[i]);
            outputs[i] = run_participant(c, p, mix_seed(c.seed, i));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (!errors[i].empty()) throw IngestionError(ids[i] + ": " + errors[i]);

    ExperimentReport rep;
    std::vector<std::string> marker_lines;
    for (auto& o : outputs) {
        rep.segments.insert(rep.segments.end(), o.segments.begin(), o.segments.end());
        rep.marker_tests.insert(rep.marker_tests.end(), o.tests.begin(), o.tests.end());
        marker_lines.insert(marker_lines.end(), o.marker_lines.begin(), o.marker_lines.end());
    }
    // participants stay in manifest order; within one, group by condition
    std::vector<std::size_t> rank(rep.segments.size());
    {
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;
        for (std::size_t i = 0; i < rep.segments.size(); ++i) rank[i] = pos[rep.segments[i].participant];
    }
    std::vector<std::size_t> order(rep.segments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const SegmentRow& x = rep.segments[a];
        const SegmentRow& y = rep.segments[b];
        return std::tie(rank[a], x.algorithm, x.feature, x.length_s) < std::tie(rank[b], y.algorithm, y.feature, y.length_s);
    });
    std::vector<SegmentRow> sorted;
    sorted.reserve(order.size());
    for (std::size_t i : order) sorted.push_back(rep.segments[i]);
    rep.segments = std::move(sorted);
    rep.accuracy = aggregate(rep.segments);

    fs::create_directories(c.output);
    std::ostringstream seg, res, mk;
    seg << "participant,algorithm,feature,length_s,trial,start_s,rho_attended,rho_ignored,score,correct\n";
    for (const auto& r : rep.segments)
        seg << r.participant << ',' << r.algorithm << ',' << r.feature << ',' << fmt("%g", r.length_s) << ',' << r.trial
            << ',' << fmt("%.3f", r.start_s) << ',' << fmt("%.9f", r.rho_attended) << ',' << fmt("%.9f", r.rho_ignored)
            << ',' << fmt("%.9f", r.score) << ',' << (r.correct ? 1 : 0) << '\n';
    res << "participant,algorithm,feature,length_s,segments,accuracy,chance\n";
    for (const auto& r : rep.accuracy)
        res << r.participant << ',' << r.algorithm << ',' << r.feature << ',' << fmt("%g", r.length_s) << ','
            << r.segments << ',' << fmt("%.9f", r.accuracy) << ',' << fmt("%.9f", r.chance) << '\n';
    mk << "participant,algorithm,feature,trial,start_s,delta,null_delta\n";
    for (const auto& l : marker_lines) mk << l << '\n';
    write_text(c.output / "segments.csv", seg.str());
    write_text(c.output / "results.csv", res.str());
    write_text(c.output / "markers.csv", mk.str());

    nlohmann::json tests = nlohmann::json::array();
    const double bonf = ids.empty() ? 0.05 : bonferroni_threshold(static_cast<int>(ids.size()));
    for (const auto& t : rep.marker_tests)
        tests.push_back({{"participant", t.participant},
                         {"algorithm", t.algorithm},
                         {"feature", t.feature},
                         {"markers", t.markers},
                         {"mean_delta", t.mean_delta},
                         {"mean_null", t.mean_null},
                         {"t", std::isnan(t.t) ? nlohmann::json(nullptr) : nlohmann::json(t.t)},
                         {"p", t.p},
                         {"significant", t.p < bonf}});
    rep.summary = {{"config", c.to_json()},
                   {"participants", ids},
                   {"accuracy", summarize_accuracy(rep.accuracy)},
                   {"marker_tests", tests},
                   {"marker_threshold", bonf}};
    if (c.trf.enabled) rep.summary["trf"] = run_trf_analysis(c.dataset, c.output / "trf", c.trf, c.seed, ids);
    write_text(c.output / "summary.json", rep.summary.dump(2) + "\n");
    return rep;
}

namespace {

Trf channel_of(const Trf& t, Eigen::Index c)
{
    Trf o = t;
    o.coefficients = t.coefficients.row(c);
    o.channels = {t.channels[static_cast<std::size_t>(c)]};
    return o;
}

} // namespace

nlohmann::json run_trf_analysis(const fs::path& dataset, const fs::path& out, const TrfAnalysisConfig& cfg,
                                std::uint64_t seed, const std::vector<std::string>& participants)
{
    apply_job_limit();
    const DatasetManifest manifest = read_dataset_manifest(dataset);
    const std::vector<std::string> ids = participants.empty() ? manifest.participants : participants;
    if (ids.size() < 2) throw ParameterError("TRF analysis needs at least two participants");
    fs::create_directories(out);

    const std::vector<FeatureKind> kinds{FeatureKind::envelope, FeatureKind::onset_envelope};
    const std::vector<SpeakerRole> roles{SpeakerRole::attended, SpeakerRole::ignored, SpeakerRole::difference};
    // [kind][role] -> per-participant TRFs and per-participant null means per shift
    std::map<std::pair<int, int>, std::vector<Trf>> trfs;
    std::map<std::pair<int, int>, std::vector<std::vector<Trf>>> nulls;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Participant p = read_participant(dataset / ids[i]);
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            const Trf att = crossval_trf(p.trials, kinds[k], SpeakerRole::attended);
            const Trf ign = crossval_trf(p.trials, kinds[k], SpeakerRole::ignored);
            const Trf dif = difference_trf(att, ign);
            // identical shifts for both talkers so the differences pair up
            const std::uint64_t s = mix_seed(seed, 100 * i + k);
            const auto na = null_trf_means(null_trfs(p.trials, kinds[k], SpeakerRole::attended, cfg.n_shifts, cfg.min_shift_s, s), p.trials.size());
            const auto ni = null_trf_means(null_trfs(p.trials, kinds[k], SpeakerRole::ignored, cfg.n_shifts, cfg.min_shift_s, s), p.trials.size());
            std::vector<Trf> nd;
            for (std::size_t j = 0; j < na.size(); ++j) nd.push_back(difference_trf(na[j], ni[j]));
            trfs[{static_cast<int>(k), 0}].push_back(att);
            trfs[{static_cast<int>(k), 1}].push_back(ign);
            trfs[{static_cast<int>(k), 2}].push_back(dif);
            nulls[{static_cast<int>(k), 0}].push_back(na);
            nulls[{static_cast<int>(k), 1}].push_back(ni);
            nulls[{static_cast<int>(k), 2}].push_back(nd);
        }
    }

    constexpr int kTests = 12;
    nlohmann::json result = nlohmann::json::array();
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        for (std::size_t r = 0; r < roles.size(); ++r) {
            const auto key = std::make_pair(static_cast<int>(k), static_cast<int>(r));
            const Trf grand = average_trfs(trfs[key]);
            write_trf_csv(out / ("trf_" + to_string(kinds[k]) + "_" + to_string(roles[r]) + ".csv"), grand);
            // grand-average nulls: mean over participants per shift
            std::vector<Trf> grand_nulls;
            for (int s = 0; s < cfg.n_shifts; ++s) {
                std::vector<Trf> per;
                for (const auto& pn : nulls[key]) per.push_back(pn[static_cast<std::size_t>(s)]);
                grand_nulls.push_back(average_trfs(per));
            }
            for (Eigen::Index ch = 0; ch < grand.coefficients.rows(); ++ch) {
                std::vector<Trf> part, nl;
                for (const auto& t : trfs[key]) part.push_back(channel_of(t, ch));
                for (const auto& t : grand_nulls) nl.push_back(channel_of(t, ch));
                const ClusterResult cr = cluster_permutation_test(part, nl, cfg.n_perm, cfg.threshold_pct,
                                                                  mix_seed(seed, 7000 + 10 * k + 3 * r + static_cast<std::uint64_t>(ch)));
                nlohmann::json j = cluster_json(cr);
                j["feature"] = to_string(kinds[k]);
                j["role"] = to_string(roles[r]);
                j["channel"] = grand.channels[static_cast<std::size_t>(ch)];
                j["significant"] = cr.min_p() < bonferroni_threshold(kTests);
                result.push_back(j);
            }
        }
    }
    const nlohmann::json doc{{"bonferroni_threshold", bonferroni_threshold(kTests)}, {"tests", result}};
    write_text(out / "clusters.json", doc.dump(2) + "\n");
    return doc;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != header) throw IngestionError(path.string() + ": unexpected header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

double num(const std::string& s)
{
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
}

} // namespace

std::vector<AccuracyRow> read_results_csv(const fs::path& path)
{
    std::vector<AccuracyRow> out;
    for (const auto& r : read_csv(path, "participant,algorithm,feature,length_s,segments,accuracy,chance")) {
        if (r.size() != 7) throw IngestionError(path.string() + ": malformed row");
        out.push_back({r[0], r[1], r[2], num(r[3]), std::stoi(r[4]), num(r[5]), num(r[6])});
    }
    return out;
}

std::vector<SegmentRow> read_segments_csv(const fs::path& path)
{
    std::vector<SegmentRow> out;
    for (const auto& r :
         read_csv(path, "participant,algorithm,feature,length_s,trial,start_s,rho_attended,rho_ignored,score,correct")) {
        if (r.size() != 10) throw IngestionError(path.string() + ": malformed row");
        out.push_back({r[0], r[1], r[2], num(r[3]), std::stoi(r[4]), num(r[5]), num(r[6]), num(r[7]), num(r[8]), r[9] == "1"});
    }
    return out;
}

} // namespace aad
