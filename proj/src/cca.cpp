#include "aad/cca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "aad/error.hpp"
#include "aad/rng.hpp"
#include "aad/signal_io.hpp"

namespace aad {

CcaModel CcaModel::truncated(int n) const
{
    if (n < 1 || n > components()) throw ParameterError("CcaModel: component count out of range");
    CcaModel m = *this;
    m.wx = wx.leftCols(n);
    m.wy = wy.leftCols(n);
    m.rho = rho.head(n);
    return m;
}

Eigen::MatrixXd shrink_covariance(const Eigen::MatrixXd& c, double gamma)
{
    if (gamma < 0.0 || gamma > 1.0) throw ParameterError("shrinkage must lie in [0, 1]");
    Eigen::MatrixXd out = (1.0 - gamma) * c;
    out.diagonal().array() += gamma * c.trace() / static_cast<double>(c.rows());
    return out;
}

namespace {

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& c, double gamma)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shrink_covariance(c, gamma));
    if (eig.info() != Eigen::Success) throw SingularityError("fit_cca: eigendecomposition failed");
    const Eigen::VectorXd& e = eig.eigenvalues();
    const double top = e.maxCoeff();
    if (!(top > 0.0) || !(e.minCoeff() > 1e-12 * top))
        throw SingularityError("fit_cca: covariance is rank deficient; use shrinkage > 0");
    return eig.eigenvectors() * e.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace

CcaModel fit_cca_cov(const Eigen::MatrixXd& cxx, const Eigen::MatrixXd& cyy, const Eigen::MatrixXd& cxy,
                     double shrinkage)
{
    if (cxy.rows() != cxx.rows() || cxy.cols() != cyy.rows()) throw ParameterError("fit_cca: covariance shapes differ");
    const Eigen::MatrixXd kx = inverse_sqrt(cxx, shrinkage);
    const Eigen::MatrixXd ky = inverse_sqrt(cyy, shrinkage);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(kx * cxy * ky, Eigen::ComputeThinU | Eigen::ComputeThinV);
    CcaModel m;
    m.wx = kx * svd.matrixU();
    m.wy = ky * svd.matrixV();
    m.rho = svd.singularValues().cwiseMin(1.0).cwiseMax(0.0);
    m.shrinkage = shrinkage;
    return m;
}

CcaModel fit_cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double shrinkage)
{
    if (x.rows() != y.rows()) throw ParameterError("fit_cca: row counts differ");
    if (x.rows() < 2) throw ParameterError("fit_cca: need at least two rows");
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
    const double n = static_cast<double>(x.rows());
    return fit_cca_cov(xc.transpose() * xc / n, yc.transpose() * yc / n, xc.transpose() * yc / n, shrinkage);
}

Eigen::VectorXd projected_correlations(const Eigen::Ref<const Eigen::MatrixXd>& px,
                                       const Eigen::Ref<const Eigen::MatrixXd>& py)
{
    Eigen::VectorXd r(px.cols());
    for (Eigen::Index k = 0; k < px.cols(); ++k) {
        const Eigen::VectorXd a = px.col(k), b = py.col(k);
        r[k] = pearson_or_zero({a.data(), static_cast<std::size_t>(a.size())},
                               {b.data(), static_cast<std::size_t>(b.size())});
    }
    return r;
}

Eigen::VectorXd correlation_vector(const CcaModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y)
{
    if (x.cols() != model.wx.rows() || y.cols() != model.wy.rows() || x.rows() != y.rows())
        throw ParameterError("correlation_vector: segment shape does not match the model");
    if (x.rows() < 2) throw ParameterError("correlation_vector: segment too short");
    return projected_correlations(x * model.wx, y * model.wy);
}

LdaClassifier fit_lda(const Eigen::MatrixXd& positive, const Eigen::MatrixXd& negative)
{
    if (positive.rows() < 2 || negative.rows() < 2) throw ParameterError("fit_lda: need two samples per class");
    if (positive.cols() != negative.cols()) throw ParameterError("fit_lda: dimension mismatch");
    const Eigen::VectorXd mp = positive.colwise().mean().transpose();
    const Eigen::VectorXd mn = negative.colwise().mean().transpose();
    const Eigen::VectorXd diff = mp - mn;
    if (!(diff.norm() > 1e-14 * std::max(1.0, mp.norm() + mn.norm())))
        throw DegenerateClassifierError("fit_lda: class means coincide");
    const Eigen::MatrixXd cp = positive.rowwise() - mp.transpose();
    const Eigen::MatrixXd cn = negative.rowwise() - mn.transpose();
    Eigen::MatrixXd s = (cp.transpose() * cp + cn.transpose() * cn) /
                        static_cast<double>(positive.rows() + negative.rows() - 2);
    const double d = static_cast<double>(s.rows());
    const double tr = s.trace();
    s.diagonal().array() += tr > 0.0 ? 1e-3 * tr / d : 1.0;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    if (ldlt.info() != Eigen::Success) throw DegenerateClassifierError("fit_lda: pooled covariance not invertible");
    LdaClassifier lda;
    lda.weights = ldlt.solve(diff);
    lda.bias = -0.5 * lda.weights.dot(mp + mn);
    return lda;
}

CcaDecision decode_cca(const CcaModel& model, const LdaClassifier& lda, const Eigen::MatrixXd& eeg_lagged,
                       const Eigen::MatrixXd& feature_a_lagged, const Eigen::MatrixXd& feature_b_lagged)
{
    const Eigen::VectorXd d =
        correlation_vector(model, eeg_lagged, feature_a_lagged) - correlation_vector(model, eeg_lagged, feature_b_lagged);
    const double margin = lda.decision_value(d);
    return {margin >= 0.0, margin};
}

CcaDesign cca_design(const TrialBundle& trial, FeatureKind kind, const LagSpec& eeg_lags, const LagSpec& feature_lags)
{
    trial.validate();
    const bool male_attended = trial.attended == Speaker::male;
    const auto& att = trial.feature(SpeakerRole::attended, kind).signal.samples();
    const auto& ign = trial.feature(SpeakerRole::ignored, kind).signal.samples();
    CcaDesign d;
    d.eeg = build_lead_matrix(trial.eeg.data(), eeg_lags);
    d.male = build_lag_matrix(male_attended ? att : ign, feature_lags);
    d.female = build_lag_matrix(male_attended ? ign : att, feature_lags);
    return d;
}

namespace {

/// Trial design laid out as [eeg | attended | ignored] for covariance sums.
struct JointTrial {
    Eigen::MatrixXd z;
    Eigen::Index dx = 0;
    Eigen::Index dy = 0;
};

struct SegmentVectors {
    Eigen::MatrixXd attended; // segments x components
    Eigen::MatrixXd ignored;
};

/// Correlation vectors for segments of `segment_s` inside every piece.
SegmentVectors segment_vectors(const CcaModel& m, const std::vector<JointTrial>& joint,
                               const std::vector<TrialPiece>& pieces, double fs, double segment_s)
{
    std::vector<Eigen::VectorXd> att, ign;
    for (const TrialPiece& p : pieces) {
        const JointTrial& j = joint[static_cast<std::size_t>(p.trial)];
        const auto segs = segment_trial(p.rows.size(), fs, segment_s, segment_s);
        if (segs.empty()) continue;
        const auto rows = j.z.middleRows(p.rows.begin, p.rows.size());
        const Eigen::MatrixXd px = rows.leftCols(j.dx) * m.wx;
        const Eigen::MatrixXd pa = rows.middleCols(j.dx, j.dy) * m.wy;
        const Eigen::MatrixXd pi = rows.middleCols(j.dx + j.dy, j.dy) * m.wy;
        for (const RowRange& s : segs) {
            att.push_back(projected_correlations(px.middleRows(s.begin, s.size()), pa.middleRows(s.begin, s.size())));
            ign.push_back(projected_correlations(px.middleRows(s.begin, s.size()), pi.middleRows(s.begin, s.size())));
        }
    }
    SegmentVectors v;
    v.attended.resize(static_cast<Eigen::Index>(att.size()), m.components());
    v.ignored.resize(static_cast<Eigen::Index>(ign.size()), m.components());
    for (std::size_t i = 0; i < att.size(); ++i) {
        v.attended.row(static_cast<Eigen::Index>(i)) = att[i].transpose();
        v.ignored.row(static_cast<Eigen::Index>(i)) = ign[i].transpose();
    }
    return v;
}

LdaClassifier lda_on(const SegmentVectors& v, int n)
{
    const Eigen::MatrixXd d = v.attended.leftCols(n) - v.ignored.leftCols(n);
    return fit_lda(d, -d);
}

} // namespace

CcaDecoder train_cca_decoder(std::span<const TrialBundle> trials, std::span<const int> train, FeatureKind kind,
                             const CcaTrainOptions& opt)
{
    if (train.size() < 2) throw ParameterError("train_cca_decoder: need at least two training trials");
    if (opt.shrinkage_grid.empty()) throw ParameterError("train_cca_decoder: empty shrinkage grid");
    const double fs = trials[static_cast<std::size_t>(train[0])].fs();

    std::vector<JointTrial> joint(trials.size());
    std::vector<Eigen::Index> lengths(trials.size(), 0);
    std::vector<std::unique_ptr<MatrixSource>> sources(trials.size());
    std::vector<std::unique_ptr<BlockedStats>> stats(trials.size());
    for (int t : train) {
        const auto ti = static_cast<std::size_t>(t);
        const TrialBundle& trial = trials[ti];
        const CcaDesign d = cca_design(trial, kind, opt.eeg_lags, opt.feature_lags);
        const bool male_att = trial.attended == Speaker::male;
        JointTrial& j = joint[ti];
        j.dx = d.eeg.cols();
        j.dy = d.male.cols();
        j.z.resize(d.eeg.rows(), j.dx + 2 * j.dy);
        j.z << d.eeg, (male_att ? d.male : d.female), (male_att ? d.female : d.male);
        lengths[ti] = trial.length();
        sources[ti] = std::make_unique<MatrixSource>(j.z, 0);
        stats[ti] = std::make_unique<BlockedStats>(*sources[ti], 640);
    }
    const Eigen::Index dx = joint[static_cast<std::size_t>(train[0])].dx;
    const Eigen::Index dy = joint[static_cast<std::size_t>(train[0])].dy;
    const Eigen::Index dims = dx + 2 * dy;

    GramStats total(dims, 0);
    std::vector<TrialPiece> all_pieces;
    for (int t : train) {
        total += stats[static_cast<std::size_t>(t)]->total();
        all_pieces.push_back({t, {0, lengths[static_cast<std::size_t>(t)]}});
    }
    // the attended-feature block of the joint statistics
    auto fit_att = [&](const GramStats& s, double gamma) {
        const Eigen::MatrixXd c = s.covariance();
        return fit_cca_cov(c.topLeftCorner(dx, dx), c.block(dx, dx, dy, dy), c.block(0, dx, dx, dy), gamma);
    };

    OuterFold fold;
    fold.train.assign(train.begin(), train.end());
    Rng rng = make_rng(opt.seed);
    std::shuffle(fold.train.begin(), fold.train.end(), rng);
    const auto splits = inner_pieces(fold, lengths, opt.inner);

    const int max_comp = static_cast<int>(std::min(dx, dy));
    const std::size_t ng = opt.shrinkage_grid.size();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ng), max_comp);
    Eigen::MatrixXd margin = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ng), max_comp);
    for (const auto& val_pieces : splits) {
        GramStats val(dims, 0);
        for (const TrialPiece& p : val_pieces) val += stats[static_cast<std::size_t>(p.trial)]->range(p.rows);
        const GramStats fit = total - val;
        std::vector<TrialPiece> fit_pieces;
        for (const TrialPiece& whole : all_pieces) {
            // complement of the validation pieces inside this trial
            Eigen::Index cursor = 0;
            for (const TrialPiece& v : val_pieces) {
                if (v.trial != whole.trial) continue;
                if (v.rows.begin > cursor) fit_pieces.push_back({whole.trial, {cursor, v.rows.begin}});
                cursor = v.rows.end;
            }
            if (cursor < whole.rows.end) fit_pieces.push_back({whole.trial, {cursor, whole.rows.end}});
        }
        for (std::size_t g = 0; g < ng; ++g) {
            CcaModel m;
            try {
                m = fit_att(fit, opt.shrinkage_grid[g]);
            } catch (const SingularityError&) {
                acc.row(static_cast<Eigen::Index>(g)).array() -= 1e9;
                continue;
            }
            const SegmentVectors tr = segment_vectors(m, joint, fit_pieces, fs, opt.segment_s);
            const SegmentVectors va = segment_vectors(m, joint, val_pieces, fs, opt.segment_s);
            if (va.attended.rows() == 0) throw TuningError("train_cca_decoder: validation split shorter than a segment");
            for (int n = 1; n <= max_comp; ++n) {
                LdaClassifier lda;
                try {
                    lda = lda_on(tr, n);
                } catch (const DegenerateClassifierError&) {
                    acc(static_cast<Eigen::Index>(g), n - 1) -= 1e9;
                    continue;
                }
                double ok = 0.0, msum = 0.0;
                for (Eigen::Index s = 0; s < va.attended.rows(); ++s) {
                    const Eigen::VectorXd d = (va.attended.row(s).head(n) - va.ignored.row(s).head(n)).transpose();
                    const double v = lda.decision_value(d);
                    ok += v > 0.0 ? 1.0 : 0.0;
                    msum += v;
                }
                acc(static_cast<Eigen::Index>(g), n - 1) += ok / static_cast<double>(va.attended.rows());
                margin(static_cast<Eigen::Index>(g), n - 1) += msum / static_cast<double>(va.attended.rows());
            }
        }
    }

    Eigen::Index bg = -1, bn = -1;
    for (Eigen::Index g = 0; g < acc.rows(); ++g)
        for (Eigen::Index n = 0; n < acc.cols(); ++n) {
            if (acc(g, n) < -1e8) continue;
            if (bg < 0 || acc(g, n) > acc(bg, bn) || (acc(g, n) == acc(bg, bn) && margin(g, n) > margin(bg, bn))) {
                bg = g;
                bn = n;
            }
        }
    if (bg < 0) throw TuningError("train_cca_decoder: every inner configuration was degenerate");

    CcaDecoder dec;
    dec.shrinkage = opt.shrinkage_grid[static_cast<std::size_t>(bg)];
    dec.components = static_cast<int>(bn + 1);
    CcaModel full = fit_att(total, dec.shrinkage);
    full.eeg_lags = opt.eeg_lags;
    full.feature_lags = opt.feature_lags;
    dec.cca = full.truncated(dec.components);
    dec.lda = lda_on(segment_vectors(full, joint, all_pieces, fs, opt.segment_s), dec.components);
    return dec;
}

std::vector<CcaDecision> decode_segments(const CcaDecoder& decoder, const TrialBundle& trial, FeatureKind kind,
                                         std::span<const RowRange> segments)
{
    const CcaDesign d = cca_design(trial, kind, decoder.cca.eeg_lags, decoder.cca.feature_lags);
    const Eigen::MatrixXd px = d.eeg * decoder.cca.wx;
    const Eigen::MatrixXd pa = d.male * decoder.cca.wy;
    const Eigen::MatrixXd pb = d.female * decoder.cca.wy;
    std::vector<CcaDecision> out;
    for (const RowRange& s : segments) {
        if (s.begin < 0 || s.end > trial.length() || s.size() < 2) throw ParameterError("decode_segments: bad segment");
        const Eigen::VectorXd diff = projected_correlations(px.middleRows(s.begin, s.size()), pa.middleRows(s.begin, s.size())) -
                                     projected_correlations(px.middleRows(s.begin, s.size()), pb.middleRows(s.begin, s.size()));
        const double m = decoder.lda.decision_value(diff);
        out.push_back({m >= 0.0, m});
    }
    return out;
}

void save_cca(const std::filesystem::path& path, const CcaDecoder& dec)
{
    const CcaModel& m = dec.cca;
    nlohmann::json h{{"kind", "cca"},
                     {"components", dec.components},
                     {"shrinkage", dec.shrinkage},
                     {"eeg_lags", {m.eeg_lags.lag_min, m.eeg_lags.lag_max}},
                     {"feature_lags", {m.feature_lags.lag_min, m.feature_lags.lag_max}},
                     {"fs", m.eeg_lags.fs},
                     {"eeg_dims", m.wx.rows()},
                     {"feature_dims", m.wy.rows()},
                     {"payload", path.filename().string() + ".f32"},
                     {"layout", "wx (eeg_dims x components), wy (feature_dims x components), rho, lda weights, lda bias"}};
    Eigen::MatrixXd flat(1, m.wx.size() + m.wy.size() + m.rho.size() + dec.lda.weights.size() + 1);
    Eigen::Index k = 0;
    auto put = [&](const Eigen::MatrixXd& a) {
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            for (Eigen::Index c = 0; c < a.cols(); ++c) flat(0, k++) = a(r, c);
    };
    put(m.wx);
    put(m.wy);
    put(m.rho);
    put(dec.lda.weights);
    flat(0, k++) = dec.lda.bias;
    write_f32_matrix(path.string() + ".f32", flat);
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << h.dump(2) << '\n';
}

CcaDecoder load_cca(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("missing " + path.string());
    const nlohmann::json h = nlohmann::json::parse(in);
    CcaDecoder dec;
    dec.components = h.at("components").get<int>();
    dec.shrinkage = h.at("shrinkage").get<double>();
    const double fs = h.at("fs").get<double>();
    dec.cca.eeg_lags = {h.at("eeg_lags")[0].get<int>(), h.at("eeg_lags")[1].get<int>(), fs};
    dec.cca.feature_lags = {h.at("feature_lags")[0].get<int>(), h.at("feature_lags")[1].get<int>(), fs};
    const auto dx = h.at("eeg_dims").get<Eigen::Index>(), dy = h.at("feature_dims").get<Eigen::Index>();
    const Eigen::Index n = dec.components;
    const Eigen::MatrixXd flat = read_f32_matrix(path.string() + ".f32", 1, dx * n + dy * n + 2 * n + 1);
    Eigen::Index k = 0;
    auto take = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd a(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = flat(0, k++);
        return a;
    };
    dec.cca.wx = take(dx, n);
    dec.cca.wy = take(dy, n);
    dec.cca.rho = take(n, 1);
    dec.cca.shrinkage = dec.shrinkage;
    dec.lda.weights = take(n, 1);
    dec.lda.bias = flat(0, k++);
    return dec;
}

} // namespace aad
