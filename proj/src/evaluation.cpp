#include "aad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aad/error.hpp"
#include "aad/kernels.hpp"
#include "aad/rng.hpp"

namespace aad {

NestedCvPlan make_nested_cv(int n_trials, int inner, std::uint64_t seed)
{
    if (n_trials < 2) throw ParameterError("make_nested_cv: need at least two trials");
    if (inner < 2) throw ParameterError("make_nested_cv: need at least two inner folds");
    NestedCvPlan plan{n_trials, inner, seed, {}};
    for (int test = 0; test < n_trials; ++test) {
        OuterFold f;
        f.test = test;
        for (int i = 0; i < n_trials; ++i)
            if (i != test) f.train.push_back(i);
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(test));
        std::shuffle(f.train.begin(), f.train.end(), rng);
        plan.folds.push_back(std::move(f));
    }
    return plan;
}

std::vector<RowRange> equal_splits(Eigen::Index rows, int k)
{
    if (k < 1 || rows < k) throw ParameterError("equal_splits: too few rows for the split count");
    std::vector<RowRange> out;
    Eigen::Index start = 0;
    for (int i = 0; i < k; ++i) {
        const Eigen::Index size = rows / k + (i < rows % k ? 1 : 0);
        out.push_back({start, start + size});
        start += size;
    }
    return out;
}

std::vector<std::vector<TrialPiece>> inner_pieces(const OuterFold& fold, std::span<const Eigen::Index> lengths,
                                                  int inner)
{
    Eigen::Index total = 0;
    for (int t : fold.train) total += lengths[static_cast<std::size_t>(t)];
    const auto splits = equal_splits(total, inner);
    std::vector<std::vector<TrialPiece>> out(splits.size());
    Eigen::Index offset = 0;
    for (int t : fold.train) {
        const Eigen::Index len = lengths[static_cast<std::size_t>(t)];
        for (std::size_t s = 0; s < splits.size(); ++s) {
            const Eigen::Index b = std::max(splits[s].begin, offset), e = std::min(splits[s].end, offset + len);
            if (e > b) out[s].push_back({t, {b - offset, e - offset}});
        }
        offset += len;
    }
    return out;
}

BlockedStats::BlockedStats(const DesignSource& source, Eigen::Index block)
    : source_(&source)
    , blocks_(split_blocks(source.rows(), block))
    , stats_(kernels::block_stats(source, blocks_))
    , total_(source.dims(), source.targets())
{
    for (const auto& s : stats_) total_ += s;
}

GramStats BlockedStats::range(RowRange r) const
{
    GramStats s(source_->dims(), source_->targets());
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const RowRange& blk = blocks_[k];
        const Eigen::Index b = std::max(blk.begin, r.begin), e = std::min(blk.end, r.end);
        if (e <= b) continue;
        if (b == blk.begin && e == blk.end)
            s += stats_[k];
        else
            s += range_stats(*source_, b, e);
    }
    return s;
}

MatrixSource::MatrixSource(const Eigen::MatrixXd& m, Eigen::Index targets)
    : m_(m)
    , targets_(targets)
{
    if (targets < 0 || targets > m.cols()) throw ParameterError("MatrixSource: bad target count");
}

void MatrixSource::fill(Eigen::Index r0, Eigen::Index r1, Eigen::Ref<Eigen::MatrixXd> x,
                        Eigen::Ref<Eigen::MatrixXd> y) const
{
    x = m_.block(r0, 0, r1 - r0, dims());
    y = m_.block(r0, dims(), r1 - r0, targets_);
}

std::vector<double> lambda_grid()
{
    std::vector<double> g;
    for (int e = -9; e <= 9; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

std::size_t select_best(std::span<const double> scores)
{
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (std::isfinite(scores[i]) && (best == scores.size() || scores[i] > scores[best])) best = i;
    if (best == scores.size()) throw TuningError("all inner-fold scores are degenerate");
    return best;
}

namespace {

/// Lead-lagged EEG rows of one trial with the attended and ignored feature
/// as the two targets.
class BackwardDesign final : public DesignSource {
public:
    BackwardDesign(const TrialBundle& trial, FeatureKind kind, const LagSpec& lags)
        : eeg_(trial.eeg.data())
        , att_(trial.feature(SpeakerRole::attended, kind).signal.samples())
        , ign_(trial.feature(SpeakerRole::ignored, kind).signal.samples())
        , lags_(lags)
    {
    }

    Eigen::Index rows() const override { return eeg_.cols(); }
    Eigen::Index dims() const override { return eeg_.rows() * lags_.taps(); }
    Eigen::Index targets() const override { return 2; }

    void fill(Eigen::Index r0, Eigen::Index r1, Eigen::Ref<Eigen::MatrixXd> x,
              Eigen::Ref<Eigen::MatrixXd> y) const override
    {
        const Eigen::Index t = eeg_.cols();
        const int taps = lags_.taps();
        for (Eigen::Index r = r0; r < r1; ++r) {
            for (Eigen::Index c = 0; c < eeg_.rows(); ++c)
                for (int j = 0; j < taps; ++j) {
                    const Eigen::Index s = r + lags_.lag_min + j;
                    x(r - r0, c * taps + j) = (s >= 0 && s < t) ? eeg_(c, s) : 0.0;
                }
            y(r - r0, 0) = att_[static_cast<std::size_t>(r)];
            y(r - r0, 1) = ign_[static_cast<std::size_t>(r)];
        }
    }

private:
    const Eigen::MatrixXd& eeg_;
    std::span<const double> att_;
    std::span<const double> ign_;
    LagSpec lags_;
};

constexpr Eigen::Index kBlock = 640;

} // namespace

std::vector<BackwardFold> tune_backward(const NestedCvPlan& plan, std::span<const TrialBundle> trials,
                                        FeatureKind kind, SpeakerRole role, const LagSpec& lags,
                                        std::span<const double> grid_in)
{
    if (static_cast<int>(trials.size()) != plan.n_trials) throw ParameterError("tune_backward: plan does not match trials");
    if (role != SpeakerRole::attended && role != SpeakerRole::ignored)
        throw ParameterError("tune_backward: role must be attended or ignored");
    if (lags.lag_min < 0) throw ParameterError("tune_backward: lags must be non-negative");
    const std::vector<double> grid = grid_in.empty() ? lambda_grid() : std::vector<double>(grid_in.begin(), grid_in.end());
    const Eigen::Index target = role == SpeakerRole::attended ? 0 : 1;

    std::vector<BackwardDesign> designs;
    std::vector<Eigen::Index> lengths;
    for (const TrialBundle& t : trials) {
        t.validate();
        designs.emplace_back(t, kind, lags);
        lengths.push_back(t.length());
    }
    std::vector<BlockedStats> stats;
    for (const auto& d : designs) stats.emplace_back(d, kBlock);

    std::vector<BackwardFold> out;
    for (const OuterFold& fold : plan.folds) {
        GramStats train(designs[0].dims(), 2);
        for (int t : fold.train) train += stats[static_cast<std::size_t>(t)].total();

        const auto pieces = inner_pieces(fold, lengths, plan.inner);
        std::vector<double> sum(grid.size(), 0.0);
        std::vector<int> count(grid.size(), 0);
        for (const auto& split : pieces) {
            GramStats val(designs[0].dims(), 2);
            for (const TrialPiece& p : split) {
                val += stats[static_cast<std::size_t>(p.trial)].range(p.rows);
            }
            const GramStats fit = train - val;
            const RidgeSolver solver(fit.xx);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const Eigen::VectorXd w = solver.solve(fit.xy.col(target), grid[g]).col(0);
                const double r = val.correlation(w, target);
                if (std::isfinite(r)) {
                    sum[g] += r;
                    ++count[g];
                }
            }
        }
        BackwardFold bf;
        bf.test = fold.test;
        for (std::size_t g = 0; g < grid.size(); ++g)
            bf.inner_scores.push_back(count[g] ? sum[g] / count[g] : std::numeric_limits<double>::quiet_NaN());
        const std::size_t best = select_best(bf.inner_scores);

        const RidgeSolver solver(train.xx);
        bf.model.weights = solver.solve(train.xy.col(target), grid[best]).col(0);
        bf.model.lags = lags;
        bf.model.lambda = grid[best];
        bf.model.kind = kind;
        bf.model.role = role;
        bf.model.channels = trials[0].eeg.channels();
        out.push_back(std::move(bf));
    }
    return out;
}

std::vector<RowRange> segment_trial(Eigen::Index samples, double fs, double length_s, double hop_s)
{
    if (!(length_s > 0.0) || !(hop_s > 0.0) || !(fs > 0.0)) throw ParameterError("segment_trial: non-positive length or hop");
    const auto len = static_cast<Eigen::Index>(std::llround(length_s * fs));
    std::vector<RowRange> out;
    if (len < 1) return out;
    for (long k = 0;; ++k) {
        const auto start = static_cast<Eigen::Index>(std::llround(static_cast<double>(k) * hop_s * fs));
        if (start + len > samples) break;
        out.push_back({start, start + len});
    }
    return out;
}

std::vector<RowRange> segment_trial(const TrialBundle& trial, double length_s, double hop_s)
{
    return segment_trial(trial.length(), trial.fs(), length_s, hop_s);
}

namespace {

AttentionMarker score(std::span<const double> rec, std::span<const double> att, std::span<const double> ign,
                      const RowRange& own, const RowRange& partner, double fs)
{
    const auto n = static_cast<std::size_t>(own.size());
    const auto r = rec.subspan(static_cast<std::size_t>(own.begin), n);
    AttentionMarker m;
    m.rho_attended = pearson_or_zero(r, att.subspan(static_cast<std::size_t>(partner.begin), n));
    m.rho_ignored = pearson_or_zero(r, ign.subspan(static_cast<std::size_t>(partner.begin), n));
    m.delta = m.rho_attended - m.rho_ignored;
    m.start_s = static_cast<double>(own.begin) / fs;
    m.length_s = static_cast<double>(n) / fs;
    return m;
}

void check_lengths(std::span<const double> rec, std::span<const double> att, std::span<const double> ign,
                   std::span<const RowRange> segments)
{
    if (att.size() != rec.size() || ign.size() != rec.size()) throw ParameterError("markers: length mismatch");
    for (const auto& s : segments)
        if (s.begin < 0 || s.end > static_cast<Eigen::Index>(rec.size()) || s.size() < 1)
            throw ParameterError("markers: segment outside the trial");
}

} // namespace

std::vector<AttentionMarker> markers_from_reconstruction(std::span<const double> rec, std::span<const double> att,
                                                         std::span<const double> ign,
                                                         std::span<const RowRange> segments, double fs)
{
    check_lengths(rec, att, ign, segments);
    std::vector<AttentionMarker> out;
    for (const auto& s : segments) out.push_back(score(rec, att, ign, s, s, fs));
    return out;
}

std::vector<AttentionMarker> null_markers_from_reconstruction(std::span<const double> rec,
                                                              std::span<const double> att,
                                                              std::span<const double> ign,
                                                              std::span<const RowRange> segments, double fs,
                                                              std::uint64_t seed)
{
    if (segments.size() < 2) throw ParameterError("null_markers: need at least two segments");
    check_lengths(rec, att, ign, segments);
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, segments.size() - 2);
    std::vector<AttentionMarker> out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        std::size_t j = pick(rng);
        if (j >= i) ++j;
        out.push_back(score(rec, att, ign, segments[i], segments[j], fs));
    }
    return out;
}

std::vector<AttentionMarker> markers_backward(const BackwardModel& model, const TrialBundle& trial,
                                              std::span<const RowRange> segments)
{
    const FeatureSignal rec = reconstruct(model, trial.eeg);
    return markers_from_reconstruction(rec.signal.samples(),
                                       trial.feature(SpeakerRole::attended, model.kind).signal.samples(),
                                       trial.feature(SpeakerRole::ignored, model.kind).signal.samples(), segments,
                                       trial.fs());
}

std::vector<AttentionMarker> null_markers(const BackwardModel& model, const TrialBundle& trial,
                                          std::span<const RowRange> segments, std::uint64_t seed)
{
    const FeatureSignal rec = reconstruct(model, trial.eeg);
    return null_markers_from_reconstruction(rec.signal.samples(),
                                            trial.feature(SpeakerRole::attended, model.kind).signal.samples(),
                                            trial.feature(SpeakerRole::ignored, model.kind).signal.samples(),
                                            segments, trial.fs(), seed);
}

double accuracy(std::span<const AttentionMarker> markers)
{
    if (markers.empty()) throw ParameterError("accuracy: no markers");
    std::size_t ok = 0;
    for (const auto& m : markers) ok += m.correct() ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(markers.size());
}

} // namespace aad
