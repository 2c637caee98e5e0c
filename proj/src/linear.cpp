#include "aad/linear.hpp"

#include <algorithm>
#include <cmath>

#include <fstream>

#include <json.hpp>

#include "aad/error.hpp"
#include "aad/signal_io.hpp"

namespace aad {

LagSpec::LagSpec(int lag_min_, int lag_max_, double fs_)
    : lag_min(lag_min_)
    , lag_max(lag_max_)
    , fs(fs_)
{
    if (lag_min >= lag_max) throw ParameterError("LagSpec: lag_min must be below lag_max");
    if (!(fs > 0.0)) throw ParameterError("LagSpec: fs must be positive");
}

std::string to_string(SpeakerRole role)
{
    switch (role) {
    case SpeakerRole::attended: return "attended";
    case SpeakerRole::ignored: return "ignored";
    case SpeakerRole::difference: return "difference";
    case SpeakerRole::null: return "null";
    }
    return "unknown";
}

SpeakerRole parse_speaker_role(const std::string& name)
{
    if (name == "attended") return SpeakerRole::attended;
    if (name == "ignored") return SpeakerRole::ignored;
    if (name == "difference") return SpeakerRole::difference;
    if (name == "null") return SpeakerRole::null;
    throw ParameterError("unknown speaker role: " + name);
}

Eigen::VectorXd Trf::latencies() const
{
    Eigen::VectorXd t(lags.taps());
    for (int j = 0; j < lags.taps(); ++j) t[j] = lags.latency(j);
    return t;
}

Eigen::MatrixXd build_lag_matrix(const MultiSignal& signals, const LagSpec& lags)
{
    const Eigen::Index t = signals.length();
    const int taps = lags.taps();
    if (taps >= t) throw LengthError("build_lag_matrix: more taps than samples");
    const Eigen::MatrixXd& d = signals.data();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(t, signals.channel_count() * taps);
    for (Eigen::Index c = 0; c < signals.channel_count(); ++c) {
        for (int j = 0; j < taps; ++j) {
            const Eigen::Index lag = lags.lag_min + j;
            const Eigen::Index r0 = std::max<Eigen::Index>(0, lag);
            const Eigen::Index r1 = std::min<Eigen::Index>(t, t + lag);
            if (r1 <= r0) continue;
            x.col(c * taps + j).segment(r0, r1 - r0) = d.row(c).segment(r0 - lag, r1 - r0).transpose();
        }
    }
    return x;
}

Eigen::MatrixXd build_lag_matrix(std::span<const double> x, const LagSpec& lags)
{
    Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return build_lag_matrix(MultiSignal({"x"}, std::move(row), lags.fs), lags);
}

Eigen::MatrixXd build_lead_matrix(const Eigen::MatrixXd& channels_by_time, const LagSpec& lags)
{
    const Eigen::Index t = channels_by_time.cols();
    const int taps = lags.taps();
    if (taps >= t) throw LengthError("build_lead_matrix: more taps than samples");
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(t, channels_by_time.rows() * taps);
    for (Eigen::Index c = 0; c < channels_by_time.rows(); ++c) {
        for (int j = 0; j < taps; ++j) {
            const Eigen::Index lead = lags.lag_min + j;
            // row r takes sample r + lead
            const Eigen::Index r0 = std::max<Eigen::Index>(0, -lead);
            const Eigen::Index r1 = std::min<Eigen::Index>(t, t - lead);
            if (r1 <= r0) continue;
            x.col(c * taps + j).segment(r0, r1 - r0) = channels_by_time.row(c).segment(r0 + lead, r1 - r0).transpose();
        }
    }
    return x;
}

RidgeSolver::RidgeSolver(const Eigen::MatrixXd& gram)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw SingularityError("RidgeSolver: eigendecomposition failed");
    eigenvectors_ = eig.eigenvectors();
    eigenvalues_ = eig.eigenvalues();
}

Eigen::MatrixXd RidgeSolver::solve(const Eigen::MatrixXd& xy, double lambda) const
{
    if (lambda < 0.0) throw ParameterError("ridge: lambda must be non-negative");
    const double top = eigenvalues_.size() ? eigenvalues_.maxCoeff() : 0.0;
    const double floor = 1e-12 * std::max(top, 0.0);
    Eigen::VectorXd inv(eigenvalues_.size());
    for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
        const double e = std::max(eigenvalues_[i], 0.0) + lambda;
        if (lambda == 0.0 && !(eigenvalues_[i] > floor))
            throw SingularityError("ridge: rank-deficient design with lambda = 0");
        inv[i] = 1.0 / e;
    }
    return eigenvectors_ * (inv.asDiagonal() * (eigenvectors_.transpose() * xy));
}

RidgeSolution ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda)
{
    if (x.rows() != y.size()) throw ParameterError("ridge_solve: row count mismatch");
    if (lambda < 0.0) throw ParameterError("ridge_solve: lambda must be non-negative");
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    const RidgeSolver solver(gram);
    return {solver.solve(x.transpose() * y, lambda).col(0), lambda};
}

double mean_eigen_lambda(const Eigen::MatrixXd& x)
{
    if (x.size() == 0) throw ParameterError("mean_eigen_lambda: empty design");
    return x.squaredNorm() / static_cast<double>(x.rows()) / static_cast<double>(x.cols());
}

Eigen::MatrixXd solve_trf(const Eigen::MatrixXd& xx, const Eigen::MatrixXd& xy)
{
    // mean eigenvalue of X'X; equals T * mean_eigen_lambda(X)
    const double lambda = xx.trace() / static_cast<double>(xx.rows());
    if (!(lambda > 0.0)) throw DegenerateSignalError("fit_trf: feature has no energy");
    Eigen::MatrixXd a = xx;
    a.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw SingularityError("fit_trf: factorization failed");
    return llt.solve(xy);
}

Trf fit_trf(const FeatureSignal& feature, const MultiSignal& eeg, const LagSpec& lags)
{
    if (static_cast<Eigen::Index>(feature.signal.size()) != eeg.length())
        throw ParameterError("fit_trf: feature and EEG lengths differ");
    (void)standardize(feature.signal.samples()); // rejects a constant feature
    const Eigen::MatrixXd x = build_lag_matrix(feature.signal.samples(), lags);
    Eigen::MatrixXd xx = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    xx.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    xx.triangularView<Eigen::StrictlyUpper>() = xx.transpose();
    const Eigen::MatrixXd w = solve_trf(xx, x.transpose() * eeg.data().transpose());

    Trf trf;
    trf.coefficients = w.transpose();
    trf.lags = lags;
    trf.kind = feature.kind;
    trf.channels = eeg.channels();
    return trf;
}

BackwardModel fit_backward(const MultiSignal& eeg, const FeatureSignal& feature, const LagSpec& lags,
                           double lambda)
{
    if (lags.lag_min < 0) throw ParameterError("fit_backward: lags must be non-negative");
    if (static_cast<Eigen::Index>(feature.signal.size()) != eeg.length())
        throw ParameterError("fit_backward: feature and EEG lengths differ");
    const Eigen::MatrixXd x = build_lead_matrix(eeg.data(), lags);
    const RidgeSolution sol = ridge_solve(x, feature.signal.eigen(), lambda);
    BackwardModel m;
    m.weights = sol.weights;
    m.lags = lags;
    m.lambda = lambda;
    m.kind = feature.kind;
    m.channels = eeg.channels();
    return m;
}

FeatureSignal reconstruct(const BackwardModel& model, const MultiSignal& eeg)
{
    if (eeg.channel_count() * model.lags.taps() != model.weights.size())
        throw ParameterError("reconstruct: EEG channel count does not match the model");
    const Eigen::VectorXd y = build_lead_matrix(eeg.data(), model.lags) * model.weights;
    return {Signal(std::vector<double>(y.data(), y.data() + y.size()), eeg.fs()), model.kind};
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw ParameterError("pearson: length mismatch");
    if (a.size() < 2) throw ParameterError("pearson: need at least two samples");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    const double tiny = 1e-24 * static_cast<double>(a.size());
    if (!(saa > tiny * std::max(1.0, ma * ma)) || !(sbb > tiny * std::max(1.0, mb * mb)))
        throw DegenerateCorrelationError("pearson: constant input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson_or_zero(std::span<const double> a, std::span<const double> b)
{
    try {
        return pearson(a, b);
    } catch (const DegenerateCorrelationError&) {
        return 0.0;
    }
}

void save_backward(const std::filesystem::path& path, const BackwardModel& model)
{
    const nlohmann::json h{{"kind", "backward"},
                           {"lags", {model.lags.lag_min, model.lags.lag_max}},
                           {"fs", model.lags.fs},
                           {"lambda", model.lambda},
                           {"feature", to_string(model.kind)},
                           {"role", to_string(model.role)},
                           {"channels", model.channels},
                           {"payload", path.filename().string() + ".f32"}};
    write_f32_matrix(path.string() + ".f32", model.weights.transpose());
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << h.dump(2) << '\n';
}

BackwardModel load_backward(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("missing " + path.string());
    try {
        const nlohmann::json h = nlohmann::json::parse(in);
        if (h.at("kind") != "backward") throw IngestionError(path.string() + ": not a backward model");
        BackwardModel m;
        m.lags = {h.at("lags")[0].get<int>(), h.at("lags")[1].get<int>(), h.at("fs").get<double>()};
        m.lambda = h.at("lambda").get<double>();
        m.kind = parse_feature_kind(h.at("feature").get<std::string>());
        m.role = parse_speaker_role(h.at("role").get<std::string>());
        m.channels = h.at("channels").get<std::vector<std::string>>();
        const auto n = static_cast<Eigen::Index>(m.channels.size()) * m.lags.taps();
        m.weights = read_f32_matrix(path.string() + ".f32", 1, n).transpose();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

} // namespace aad
