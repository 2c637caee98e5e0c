#include "aad/trf_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "aad/error.hpp"
#include "aad/kernels.hpp"
#include "aad/rng.hpp"

namespace aad {

namespace {

void check_axes(const Trf& a, const Trf& b)
{
    if (!(a.lags == b.lags) || a.channels != b.channels || a.coefficients.rows() != b.coefficients.rows() ||
        a.coefficients.cols() != b.coefficients.cols())
        throw ParameterError("TRF axes differ");
}

Eigen::MatrixXd target_matrix(const TrialBundle& t) { return t.eeg.data(); }

Trf make_trf(const Eigen::MatrixXd& w, const LagSpec& lags, FeatureKind kind, SpeakerRole role,
             const std::vector<std::string>& channels)
{
    Trf trf;
    trf.coefficients = w.transpose();
    trf.lags = lags;
    trf.kind = kind;
    trf.role = role;
    trf.channels = channels;
    return trf;
}

std::vector<kernels::ShiftedLagStats> trial_stats(std::span<const TrialBundle> trials, FeatureKind kind,
                                                  SpeakerRole role, const LagSpec& lags)
{
    std::vector<kernels::ShiftedLagStats> out;
    out.reserve(trials.size());
    for (const TrialBundle& t : trials) {
        t.validate();
        if (t.eeg.channels() != trials.front().eeg.channels())
            throw ParameterError("crossval_trf: channel order differs between trials");
        out.emplace_back(t.feature(role, kind).signal.samples(), target_matrix(t), lags.lag_min, lags.lag_max);
    }
    return out;
}

/// Leave-one-out solves given per-trial statistics.
std::vector<Eigen::MatrixXd> loo_solve(const std::vector<Eigen::MatrixXd>& xx, const std::vector<Eigen::MatrixXd>& xy)
{
    Eigen::MatrixXd sxx = Eigen::MatrixXd::Zero(xx[0].rows(), xx[0].cols());
    Eigen::MatrixXd sxy = Eigen::MatrixXd::Zero(xy[0].rows(), xy[0].cols());
    for (std::size_t i = 0; i < xx.size(); ++i) {
        sxx += xx[i];
        sxy += xy[i];
    }
    std::vector<Eigen::MatrixXd> w(xx.size());
    for (std::size_t i = 0; i < xx.size(); ++i) w[i] = solve_trf(sxx - xx[i], sxy - xy[i]);
    return w;
}

} // namespace

void TrfSet::add(Trf trf)
{
    if (!members.empty()) check_axes(members.front(), trf);
    members.push_back(std::move(trf));
}

Trf TrfSet::grand_average() const { return average_trfs(members); }

Eigen::MatrixXd TrfSet::stacked() const
{
    if (members.empty()) throw ParameterError("TrfSet: empty");
    const Eigen::Index ch = members[0].coefficients.rows(), taps = members[0].coefficients.cols();
    Eigen::MatrixXd s(ch * taps, static_cast<Eigen::Index>(members.size()));
    for (std::size_t m = 0; m < members.size(); ++m)
        s.col(static_cast<Eigen::Index>(m)) =
            Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(members[m].coefficients.transpose()).data(), ch * taps);
    return s;
}

Trf average_trfs(std::span<const Trf> trfs)
{
    if (trfs.empty()) throw ParameterError("average_trfs: empty list");
    Trf out = trfs[0];
    for (std::size_t i = 1; i < trfs.size(); ++i) {
        check_axes(trfs[0], trfs[i]);
        out.coefficients += trfs[i].coefficients;
    }
    out.coefficients /= static_cast<double>(trfs.size());
    return out;
}

std::vector<Trf> crossval_trf_folds(std::span<const TrialBundle> trials, FeatureKind kind, SpeakerRole role,
                                    const LagSpec& lags)
{
    if (trials.size() < 2) throw ParameterError("crossval_trf: need at least two trials");
    const auto stats = trial_stats(trials, kind, role, lags);
    std::vector<Eigen::MatrixXd> xx(stats.size()), xy(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        (void)standardize(trials[i].feature(role, kind).signal.samples()); // rejects a constant feature
        stats[i].compute(0, xx[i], xy[i]);
    }
    const auto w = loo_solve(xx, xy);
    std::vector<Trf> out;
    for (const auto& wi : w) out.push_back(make_trf(wi, lags, kind, role, trials.front().eeg.channels()));
    return out;
}

Trf crossval_trf(std::span<const TrialBundle> trials, FeatureKind kind, SpeakerRole role, const LagSpec& lags)
{
    const auto folds = crossval_trf_folds(trials, kind, role, lags);
    return average_trfs(folds);
}

Trf difference_trf(const Trf& attended, const Trf& ignored)
{
    check_axes(attended, ignored);
    if (attended.kind != ignored.kind) throw ParameterError("difference_trf: feature kinds differ");
    Trf d = attended;
    d.coefficients -= ignored.coefficients;
    d.role = SpeakerRole::difference;
    return d;
}

std::vector<std::int64_t> draw_shifts(Eigen::Index length, int n, Eigen::Index min_shift, std::uint64_t seed)
{
    if (n < 1) throw ParameterError("null_trfs: n_shifts must be positive");
    const std::int64_t lo = min_shift, hi = length - min_shift;
    if (lo < 1 || hi - lo + 1 < n) throw ParameterError("null_trfs: shift range too small for the requested count");
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(lo, hi);
    std::set<std::int64_t> seen;
    std::vector<std::int64_t> out;
    while (static_cast<int>(out.size()) < n) {
        const std::int64_t s = pick(rng);
        if (seen.insert(s).second) out.push_back(s);
    }
    return out;
}

std::vector<Trf> null_trfs(std::span<const TrialBundle> trials, FeatureKind kind, SpeakerRole role, int n_shifts,
                           double min_shift_s, std::uint64_t seed, const LagSpec& lags)
{
    if (trials.size() < 2) throw ParameterError("null_trfs: need at least two trials");
    if (!(min_shift_s > lags.taps() / lags.fs)) throw ParameterError("null_trfs: min_shift must exceed the TRF span");
    Eigen::Index shortest = trials[0].length();
    for (const auto& t : trials) shortest = std::min(shortest, t.length());
    const auto min_shift = static_cast<Eigen::Index>(std::ceil(min_shift_s * lags.fs));
    const auto shifts = draw_shifts(shortest, n_shifts, min_shift, seed);

    const auto stats = trial_stats(trials, kind, role, lags);
    const std::size_t n_trials = trials.size();
    std::vector<Trf> out(static_cast<std::size_t>(n_shifts) * n_trials);
    const auto& channels = trials.front().eeg.channels();
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < n_shifts; ++k) {
        std::vector<Eigen::MatrixXd> xx(n_trials), xy(n_trials);
        for (std::size_t i = 0; i < n_trials; ++i) stats[i].compute(shifts[static_cast<std::size_t>(k)], xx[i], xy[i]);
        const auto w = loo_solve(xx, xy);
        for (std::size_t i = 0; i < n_trials; ++i)
            out[static_cast<std::size_t>(k) * n_trials + i] = make_trf(w[i], lags, kind, SpeakerRole::null, channels);
    }
    return out;
}

std::vector<Trf> null_trf_means(std::span<const Trf> nulls, std::size_t trials)
{
    if (trials == 0 || nulls.size() % trials != 0) throw ParameterError("null_trf_means: size mismatch");
    std::vector<Trf> out;
    for (std::size_t k = 0; k < nulls.size() / trials; ++k) out.push_back(average_trfs(nulls.subspan(k * trials, trials)));
    return out;
}

double ClusterResult::min_p() const
{
    double p = 1.0;
    for (const auto& c : clusters) p = std::min(p, c.p_value);
    return p;
}

double ClusterResult::total_mass() const
{
    double m = 0.0;
    for (const auto& c : clusters) m += c.mass;
    return m;
}

double ClusterResult::max_mass() const
{
    double m = 0.0;
    for (const auto& c : clusters) m = std::max(m, c.mass);
    return m;
}

double percentile(std::vector<double> values, double pct)
{
    if (values.empty()) throw ParameterError("percentile: empty input");
    if (!(pct >= 0.0 && pct <= 100.0)) throw ParameterError("percentile: pct outside [0, 100]");
    const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double vlo = values[lo];
    if (hi == lo) return vlo;
    const double vhi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(hi), values.end());
    return vlo + (rank - static_cast<double>(lo)) * (vhi - vlo);
}

std::vector<Cluster> find_clusters(const Trf& trf, double threshold)
{
    std::vector<Cluster> out;
    const Eigen::Index taps = trf.coefficients.cols();
    for (Eigen::Index c = 0; c < trf.coefficients.rows(); ++c) {
        Eigen::Index j = 0;
        while (j < taps) {
            if (!(trf.coefficients(c, j) * trf.coefficients(c, j) > threshold)) {
                ++j;
                continue;
            }
            Cluster cl;
            cl.channel = static_cast<int>(c);
            cl.first_tap = static_cast<int>(j);
            while (j < taps && trf.coefficients(c, j) * trf.coefficients(c, j) > threshold) {
                cl.mass += trf.coefficients(c, j) * trf.coefficients(c, j);
                ++j;
            }
            cl.last_tap = static_cast<int>(j - 1);
            cl.size = cl.last_tap - cl.first_tap + 1;
            cl.start_latency_s = trf.lags.latency(cl.first_tap);
            cl.end_latency_s = trf.lags.latency(cl.last_tap);
            out.push_back(cl);
        }
    }
    return out;
}

ClusterResult cluster_permutation_test(std::span<const Trf> participant_trfs, std::span<const Trf> null_trfs,
                                       int n_perm, double threshold_pct, std::uint64_t seed)
{
    if (participant_trfs.size() < 2) throw ParameterError("cluster test: need at least two participant TRFs");
    if (null_trfs.empty()) throw ParameterError("cluster test: empty null set");
    if (n_perm < 1) throw ParameterError("cluster test: n_perm must be positive");

    std::vector<double> power;
    for (const Trf& n : null_trfs) {
        check_axes(participant_trfs[0], n);
        for (Eigen::Index i = 0; i < n.coefficients.size(); ++i)
            power.push_back(n.coefficients.data()[i] * n.coefficients.data()[i]);
    }
    ClusterResult r;
    r.threshold = percentile(std::move(power), threshold_pct);

    TrfSet set;
    for (const Trf& t : participant_trfs) set.add(t);
    r.clusters = find_clusters(set.grand_average(), r.threshold);
    for (const auto& c : r.clusters) r.statistic = std::max(r.statistic, c.size);

    r.null_statistics = kernels::sign_flip_max_clusters(set.stacked(), participant_trfs[0].coefficients.rows(),
                                                        r.threshold, n_perm, seed);
    for (auto& c : r.clusters) {
        const auto ge = std::count_if(r.null_statistics.begin(), r.null_statistics.end(),
                                      [&](int s) { return s >= c.size; });
        c.p_value = static_cast<double>(ge) / static_cast<double>(n_perm);
    }
    return r;
}

double bonferroni_threshold(int m, double alpha)
{
    if (m < 1) throw ParameterError("bonferroni: m must be at least 1");
    return alpha / m;
}

std::vector<bool> bonferroni(std::span<const double> p_values, int m, double alpha)
{
    const double thr = bonferroni_threshold(m, alpha);
    std::vector<bool> out;
    for (double p : p_values) out.push_back(p < thr);
    return out;
}

void write_trf_csv(const std::filesystem::path& path, const Trf& trf)
{
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << "latency_s";
    for (const auto& c : trf.channels) out << ',' << c;
    out << '\n';
    char buf[64];
    for (Eigen::Index j = 0; j < trf.coefficients.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.6f", trf.lags.latency(static_cast<int>(j)));
        out << buf;
        for (Eigen::Index c = 0; c < trf.coefficients.rows(); ++c) {
            std::snprintf(buf, sizeof buf, ",%.9g", trf.coefficients(c, j));
            out << buf;
        }
        out << '\n';
    }
}

nlohmann::json cluster_json(const ClusterResult& result)
{
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& c : result.clusters) {
        clusters.push_back({{"channel", c.channel},
                            {"start_ms", c.start_latency_s * 1000.0},
                            {"end_ms", c.end_latency_s * 1000.0},
                            {"size", c.size},
                            {"mass", c.mass},
                            {"p_value", c.p_value}});
    }
    return {{"threshold", result.threshold}, {"statistic", result.statistic}, {"clusters", clusters}};
}

} // namespace aad
