#include "aad/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "aad/error.hpp"
#include "aad/linear.hpp"
#include "aad/rng.hpp"
#include "aad/signal_io.hpp"

namespace aad {

int CnnConfig::readout_length() const
{
    int len = window;
    for (int b = 0; b < blocks; ++b) len /= pool;
    return len;
}

void CnnConfig::validate() const
{
    if (kernel != 3 && kernel != 5) throw ParameterError("CnnConfig: kernel must be 3 or 5");
    if (blocks < 1 || blocks > 3) throw ParameterError("CnnConfig: blocks must be 1, 2 or 3");
    if (maps < 1 || channels < 1 || pool < 1) throw ParameterError("CnnConfig: non-positive size");
    int len = window;
    for (int b = 0; b < blocks; ++b) {
        if (len % pool != 0) throw ParameterError("CnnConfig: window not divisible by the pooling");
        len /= pool;
    }
    if (len < 1) throw ParameterError("CnnConfig: window too short for the depth");
}

std::string CnnConfig::name() const { return "k" + std::to_string(kernel) + "_b" + std::to_string(blocks); }

std::vector<CnnConfig> cnn_grid()
{
    std::vector<CnnConfig> g;
    for (int k : {3, 5})
        for (int b : {1, 2, 3}) {
            CnnConfig c;
            c.kernel = k;
            c.blocks = b;
            g.push_back(c);
        }
    return g;
}

CnnModel CnnModel::init(const CnnConfig& config, std::uint64_t seed)
{
    config.validate();
    CnnModel m;
    m.config = config;
    Rng rng = make_rng(seed);
    auto uniform = [&](Eigen::Index rows, Eigen::Index cols, double fan_in) {
        std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
        Eigen::MatrixXd a(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = u(rng);
        return a;
    };
    int in = config.channels;
    for (int b = 0; b < config.blocks; ++b) {
        ConvBlock blk;
        const double fan = static_cast<double>(in * config.kernel);
        blk.weight = uniform(config.maps, in * config.kernel, fan);
        blk.bias = uniform(config.maps, 1, fan).col(0);
        blk.bn_scale = Eigen::VectorXd::Ones(config.maps);
        blk.bn_offset = Eigen::VectorXd::Zero(config.maps);
        blk.running_mean = Eigen::VectorXd::Zero(config.maps);
        blk.running_var = Eigen::VectorXd::Ones(config.maps);
        blk.skip = uniform(config.maps, in, static_cast<double>(in));
        m.blocks.push_back(std::move(blk));
        in = config.maps;
    }
    const int flat = config.maps * config.readout_length();
    m.readout = uniform(flat, 1, static_cast<double>(flat)).col(0);
    m.readout_bias = Eigen::VectorXd::Zero(1);
    return m;
}

CnnModel CnnModel::zeros_like() const
{
    CnnModel z = *this;
    for (ParamRef p : z.params()) std::fill(p.data, p.data + p.size, 0.0);
    return z;
}

std::vector<ParamRef> CnnModel::params()
{
    std::vector<ParamRef> out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        ConvBlock& blk = blocks[b];
        out.push_back({blk.weight.data(), blk.weight.size(), pre + "weight"});
        out.push_back({blk.bias.data(), blk.bias.size(), pre + "bias"});
        out.push_back({blk.bn_scale.data(), blk.bn_scale.size(), pre + "bn_scale"});
        out.push_back({blk.bn_offset.data(), blk.bn_offset.size(), pre + "bn_offset"});
        out.push_back({blk.skip.data(), blk.skip.size(), pre + "skip"});
    }
    out.push_back({readout.data(), readout.size(), "readout"});
    out.push_back({readout_bias.data(), readout_bias.size(), "readout_bias"});
    return out;
}

Eigen::Index CnnModel::parameter_count() const
{
    Eigen::Index n = 0;
    for (const ParamRef& p : const_cast<CnnModel*>(this)->params()) n += p.size;
    return n;
}

namespace {

struct BlockCache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd cols;
    Eigen::MatrixXd z;
    Eigen::MatrixXd xhat;
    Eigen::VectorXd inv_std;
    int length = 0; // input temporal length
};

struct Pass {
    std::vector<BlockCache> blocks;
    Eigen::MatrixXd features; // maps x (B * readout_length)
    Eigen::VectorXd output;
};

Eigen::MatrixXd im2col(const Eigen::MatrixXd& x, Eigen::Index batch, int len, int k)
{
    const Eigen::Index c_in = x.rows();
    const int pad = k / 2;
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(c_in * k, batch * len);
    for (Eigen::Index b = 0; b < batch; ++b)
        for (int t = 0; t < len; ++t) {
            const Eigen::Index col = b * len + t;
            for (int j = 0; j < k; ++j) {
                const int s = t + j - pad;
                if (s < 0 || s >= len) continue;
                for (Eigen::Index c = 0; c < c_in; ++c) cols(c * k + j, col) = x(c, b * len + s);
            }
        }
    return cols;
}

void col2im_add(const Eigen::MatrixXd& dcols, Eigen::MatrixXd& dx, Eigen::Index batch, int len, int k)
{
    const Eigen::Index c_in = dx.rows();
    const int pad = k / 2;
    for (Eigen::Index b = 0; b < batch; ++b)
        for (int t = 0; t < len; ++t) {
            const Eigen::Index col = b * len + t;
            for (int j = 0; j < k; ++j) {
                const int s = t + j - pad;
                if (s < 0 || s >= len) continue;
                for (Eigen::Index c = 0; c < c_in; ++c) dx(c, b * len + s) += dcols(c * k + j, col);
            }
        }
}

Eigen::MatrixXd avg_pool(const Eigen::MatrixXd& x, int width)
{
    Eigen::MatrixXd out(x.rows(), x.cols() / width);
    for (Eigen::Index i = 0; i < out.cols(); ++i) out.col(i) = x.middleCols(i * width, width).rowwise().mean();
    return out;
}

Eigen::MatrixXd unpool(const Eigen::MatrixXd& g, int width)
{
    Eigen::MatrixXd out(g.rows(), g.cols() * width);
    for (Eigen::Index i = 0; i < g.cols(); ++i)
        for (int w = 0; w < width; ++w) out.col(i * width + w) = g.col(i) / static_cast<double>(width);
    return out;
}

Eigen::Index batch_size(const CnnConfig& cfg, const Eigen::MatrixXd& batch)
{
    if (batch.rows() != cfg.channels || batch.cols() == 0 || batch.cols() % cfg.window != 0)
        throw ParameterError("cnn: batch must be " + std::to_string(cfg.channels) + " x (B * " +
                             std::to_string(cfg.window) + ")");
    return batch.cols() / cfg.window;
}

/// `use_batch_stats` selects train-mode normalization. When `running` is
/// non-null the batch statistics are folded into it.
Pass run(const CnnModel& m, const Eigen::MatrixXd& batch, bool use_batch_stats, std::vector<ConvBlock>* running)
{
    const Eigen::Index bsz = batch_size(m.config, batch);
    Pass pass;
    Eigen::MatrixXd x = batch;
    int len = m.config.window;
    for (std::size_t bi = 0; bi < m.blocks.size(); ++bi) {
        const ConvBlock& blk = m.blocks[bi];
        BlockCache c;
        c.length = len;
        c.cols = im2col(x, bsz, len, m.config.kernel);
        c.z.noalias() = blk.weight * c.cols;
        c.z.colwise() += blk.bias;
        const Eigen::MatrixXd r = c.z.cwiseMax(0.0);
        Eigen::VectorXd mu, var;
        if (use_batch_stats) {
            mu = r.rowwise().mean();
            var = (r.colwise() - mu).array().square().rowwise().mean();
            if (running) {
                const double n = static_cast<double>(r.cols());
                ConvBlock& rb = (*running)[bi];
                rb.running_mean = (1.0 - CnnModel::bn_momentum) * rb.running_mean + CnnModel::bn_momentum * mu;
                rb.running_var = (1.0 - CnnModel::bn_momentum) * rb.running_var +
                                 CnnModel::bn_momentum * var * (n > 1.0 ? n / (n - 1.0) : 1.0);
            }
        } else {
            mu = blk.running_mean;
            var = blk.running_var;
        }
        c.inv_std = (var.array() + CnnModel::bn_eps).rsqrt();
        c.xhat = (r.colwise() - mu).array().colwise() * c.inv_std.array();
        Eigen::MatrixXd y = (c.xhat.array().colwise() * blk.bn_scale.array()).colwise() + blk.bn_offset.array();
        y.noalias() += blk.skip * x;
        c.input = std::move(x);
        x = avg_pool(y, m.config.pool);
        len /= m.config.pool;
        pass.blocks.push_back(std::move(c));
    }
    pass.features = std::move(x);
    const Eigen::Map<const Eigen::MatrixXd> flat(pass.features.data(), pass.features.rows() * len, bsz);
    pass.output = flat.transpose() * m.readout;
    pass.output.array() += m.readout_bias[0];
    return pass;
}

bool is_constant(std::span<const double> t)
{
    if (t.empty()) return true;
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    return *lo == *hi;
}

struct LossGrad {
    double loss;
    Eigen::VectorXd grad;
};

LossGrad pearson_loss(const Eigen::VectorXd& p, std::span<const double> targets)
{
    const Eigen::Map<const Eigen::VectorXd> t(targets.data(), static_cast<Eigen::Index>(targets.size()));
    const Eigen::VectorXd pc = p.array() - p.mean();
    const Eigen::VectorXd tc = t.array() - t.mean();
    const double np = pc.norm(), nt = tc.norm();
    if (!(nt > 1e-12 * std::sqrt(static_cast<double>(t.size())) * std::max(1.0, std::abs(t.mean()))))
        throw DegenerateCorrelationError("cnn loss: constant targets");
    if (!(np > 0.0)) throw DegenerateCorrelationError("cnn loss: constant predictions");
    const double r = pc.dot(tc) / (np * nt);
    return {-r, -(tc / (np * nt) - r * pc / (np * np))};
}

} // namespace

Eigen::VectorXd forward(CnnModel& model, const Eigen::MatrixXd& batch)
{
    if (model.mode == CnnMode::eval) return run(model, batch, false, nullptr).output;
    return run(model, batch, true, &model.blocks).output;
}

Eigen::VectorXd predict(const CnnModel& model, const Eigen::MatrixXd& batch)
{
    return run(model, batch, false, nullptr).output;
}

double loss(std::span<const double> predictions, std::span<const double> targets)
{
    if (predictions.size() != targets.size()) throw ParameterError("cnn loss: length mismatch");
    if (predictions.size() < 8) throw ParameterError("cnn loss: batch smaller than 8");
    const Eigen::Map<const Eigen::VectorXd> p(predictions.data(), static_cast<Eigen::Index>(predictions.size()));
    return pearson_loss(p, targets).loss;
}

namespace {

GradientResult backprop(const CnnModel& model, const Eigen::MatrixXd& batch, std::span<const double> targets,
                        std::vector<ConvBlock>* running)
{
    if (model.mode != CnnMode::train) throw StateError("gradients: model is in eval mode");
    if (is_constant(targets)) throw DegenerateCorrelationError("cnn loss: constant targets");
    const Pass pass = run(model, batch, true, running);
    if (static_cast<Eigen::Index>(targets.size()) != pass.output.size())
        throw ParameterError("gradients: target count differs from the batch");
    if (targets.size() < 8) throw ParameterError("gradients: batch smaller than 8");
    const LossGrad lg = pearson_loss(pass.output, targets);

    GradientResult res{lg.loss, model.zeros_like()};
    CnnModel& g = res.grads;
    const Eigen::Index bsz = pass.output.size();
    const int len_f = model.config.readout_length();
    const Eigen::Index maps = pass.features.rows();

    g.readout_bias[0] = lg.grad.sum();
    const Eigen::Map<const Eigen::MatrixXd> flat(pass.features.data(), maps * len_f, bsz);
    g.readout = flat * lg.grad;
    Eigen::MatrixXd dflat = model.readout * lg.grad.transpose();
    Eigen::MatrixXd dx = Eigen::Map<Eigen::MatrixXd>(dflat.data(), maps, bsz * len_f);

    for (std::size_t bi = model.blocks.size(); bi-- > 0;) {
        const ConvBlock& blk = model.blocks[bi];
        ConvBlock& gb = g.blocks[bi];
        const BlockCache& c = pass.blocks[bi];
        const Eigen::MatrixXd gy = unpool(dx, model.config.pool);

        gb.skip.noalias() = gy * c.input.transpose();
        Eigen::MatrixXd dinput = blk.skip.transpose() * gy;

        gb.bn_scale = (gy.array() * c.xhat.array()).rowwise().sum();
        gb.bn_offset = gy.rowwise().sum();
        const Eigen::ArrayXXd dxhat = gy.array().colwise() * blk.bn_scale.array();
        const double n = static_cast<double>(gy.cols());
        const Eigen::ArrayXd sum_d = dxhat.rowwise().sum();
        const Eigen::ArrayXd sum_dx = (dxhat * c.xhat.array()).rowwise().sum();
        Eigen::ArrayXXd dr = (n * dxhat).colwise() - sum_d;
        dr -= c.xhat.array().colwise() * sum_dx;
        dr = dr.colwise() * (c.inv_std.array() / n);
        const Eigen::MatrixXd dz = (dr * (c.z.array() > 0.0).cast<double>()).matrix();

        gb.weight.noalias() = dz * c.cols.transpose();
        gb.bias = dz.rowwise().sum();
        const Eigen::MatrixXd dcols = blk.weight.transpose() * dz;
        col2im_add(dcols, dinput, bsz, c.length, model.config.kernel);
        dx = std::move(dinput);
    }
    return res;
}

} // namespace

GradientResult gradients(const CnnModel& model, const Eigen::MatrixXd& batch, std::span<const double> targets)
{
    return backprop(model, batch, targets, nullptr);
}

Eigen::MatrixXd batchnorm_statistics(const CnnModel& model, const Eigen::MatrixXd& batch, int block)
{
    if (block < 0 || block >= static_cast<int>(model.blocks.size())) throw ParameterError("batchnorm_statistics: no such block");
    const Pass pass = run(model, batch, true, nullptr);
    const Eigen::MatrixXd& xh = pass.blocks[static_cast<std::size_t>(block)].xhat;
    Eigen::MatrixXd out(2, xh.rows());
    out.row(0) = xh.rowwise().mean().transpose();
    out.row(1) = (xh.colwise() - xh.rowwise().mean()).array().square().rowwise().mean().transpose();
    return out;
}

void adam_step(AdamState& s, std::span<const ParamRef> params, std::span<const ParamRef> grads)
{
    if (params.size() != grads.size()) throw ParameterError("adam_step: parameter and gradient lists differ");
    if (s.m.empty()) {
        for (const ParamRef& p : params) {
            s.m.push_back(Eigen::VectorXd::Zero(p.size));
            s.v.push_back(Eigen::VectorXd::Zero(p.size));
        }
    }
    if (s.m.size() != params.size()) throw ParameterError("adam_step: state does not match the parameters");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size != grads[i].size || s.m[i].size() != params[i].size)
            throw ParameterError("adam_step: shape mismatch for " + params[i].name);
        Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size);
        const Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size);
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g.cwiseAbs2();
        p.array() -= s.learning_rate * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.eps);
    }
}

namespace {

struct WindowRef {
    int trial;
    Eigen::Index start;
};

std::vector<WindowRef> windows_in(std::span<const TrialPiece> pieces, int window)
{
    std::vector<WindowRef> out;
    for (const TrialPiece& p : pieces)
        for (Eigen::Index s = p.rows.begin; s + window <= p.rows.end; ++s) out.push_back({p.trial, s});
    return out;
}

void assemble(std::span<const TrialBundle> trials, std::span<const WindowRef> w, FeatureKind kind, int window,
              Eigen::MatrixXd& x, std::vector<double>& y)
{
    const Eigen::Index ch = trials[static_cast<std::size_t>(w[0].trial)].eeg.channel_count();
    x.resize(ch, static_cast<Eigen::Index>(w.size()) * window);
    y.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const TrialBundle& t = trials[static_cast<std::size_t>(w[i].trial)];
        x.middleCols(static_cast<Eigen::Index>(i) * window, window) = t.eeg.data().middleCols(w[i].start, window);
        y[i] = t.feature(SpeakerRole::attended, kind).signal[static_cast<std::size_t>(w[i].start)];
    }
}

double validation_rho(const CnnModel& m, std::span<const TrialBundle> trials, std::span<const WindowRef> val,
                      FeatureKind kind)
{
    constexpr std::size_t chunk = 2048;
    std::vector<double> pred, target;
    Eigen::MatrixXd x;
    std::vector<double> y;
    for (std::size_t a = 0; a < val.size(); a += chunk) {
        const auto part = val.subspan(a, std::min(chunk, val.size() - a));
        assemble(trials, part, kind, m.config.window, x, y);
        const Eigen::VectorXd p = predict(m, x);
        pred.insert(pred.end(), p.data(), p.data() + p.size());
        target.insert(target.end(), y.begin(), y.end());
    }
    return pearson_or_zero(pred, target);
}

} // namespace

CnnTrainResult train_cnn(std::span<const TrialBundle> trials, std::span<const TrialPiece> train,
                         std::span<const TrialPiece> validation, FeatureKind kind, const CnnConfig& config,
                         const CnnBudget& budget, std::uint64_t seed)
{
    config.validate();
    if (budget.batch < 8) throw ParameterError("train_cnn: batch smaller than 8");
    const std::vector<WindowRef> train_w = windows_in(train, config.window);
    std::vector<WindowRef> val_w = windows_in(validation, config.window);
    if (train_w.size() < static_cast<std::size_t>(budget.batch)) throw ParameterError("train_cnn: not enough training windows");
    if (val_w.size() < 2) throw ParameterError("train_cnn: not enough validation windows");
    if (budget.max_validation_windows > 0 && val_w.size() > static_cast<std::size_t>(budget.max_validation_windows)) {
        // evenly spaced subset
        std::vector<WindowRef> sub;
        const double step = static_cast<double>(val_w.size()) / budget.max_validation_windows;
        for (int i = 0; i < budget.max_validation_windows; ++i)
            sub.push_back(val_w[static_cast<std::size_t>(i * step)]);
        val_w = std::move(sub);
    }

    CnnTrainResult res;
    CnnModel model = CnnModel::init(config, mix_seed(seed, 1));
    model.mode = CnnMode::eval;
    res.initial_validation = validation_rho(model, trials, val_w, kind);
    res.best_validation = res.initial_validation;
    res.model = model;
    model.mode = CnnMode::train;

    AdamState adam;
    adam.learning_rate = budget.learning_rate;
    Rng rng = make_rng(seed, 2);
    std::vector<std::size_t> order(train_w.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t per_epoch = budget.windows_per_epoch > 0
                                      ? std::min(order.size(), static_cast<std::size_t>(budget.windows_per_epoch))
                                      : order.size();
    int stale = 0;
    Eigen::MatrixXd x;
    std::vector<double> y;
    std::vector<WindowRef> picked;
    for (int epoch = 1; epoch <= budget.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t a = 0; a + static_cast<std::size_t>(budget.batch) <= per_epoch; a += static_cast<std::size_t>(budget.batch)) {
            picked.clear();
            for (std::size_t i = a; i < a + static_cast<std::size_t>(budget.batch); ++i) picked.push_back(train_w[order[i]]);
            assemble(trials, picked, kind, config.window, x, y);
            GradientResult gr;
            try {
                gr = backprop(model, x, y, &model.blocks);
            } catch (const DegenerateCorrelationError&) {
                continue;
            }
            adam_step(adam, model.params(), gr.grads.params());
            loss_sum += gr.loss;
            ++batches;
        }
        model.mode = CnnMode::eval;
        const double rho = validation_rho(model, trials, val_w, kind);
        model.mode = CnnMode::train;
        res.log.push_back({epoch, batches ? loss_sum / batches : std::numeric_limits<double>::quiet_NaN(), rho});
        if (rho > res.best_validation) {
            res.best_validation = rho;
            res.model = model;
            stale = 0;
        } else if (++stale >= budget.patience) {
            break;
        }
    }
    res.model.mode = CnnMode::eval;
    return res;
}

CnnSelection select_cnn(std::span<const TrialBundle> trials, std::span<const int> train, FeatureKind kind,
                        const CnnBudget& budget, std::uint64_t seed, std::span<const CnnConfig> grid_in)
{
    if (train.size() < 2) throw ParameterError("select_cnn: need at least two training trials");
    const std::vector<CnnConfig> grid = grid_in.empty() ? cnn_grid() : std::vector<CnnConfig>(grid_in.begin(), grid_in.end());
    OuterFold fold;
    fold.train.assign(train.begin(), train.end());
    Rng rng = make_rng(seed);
    std::shuffle(fold.train.begin(), fold.train.end(), rng);
    std::vector<Eigen::Index> lengths(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) lengths[i] = trials[i].length();
    const auto splits = inner_pieces(fold, lengths, 5);
    const std::size_t val_split = static_cast<std::size_t>(mix_seed(seed, 7) % splits.size());
    std::vector<TrialPiece> fit;
    for (std::size_t s = 0; s < splits.size(); ++s)
        if (s != val_split) fit.insert(fit.end(), splits[s].begin(), splits[s].end());

    CnnSelection sel;
    bool have = false;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        CnnTrainResult r = train_cnn(trials, fit, splits[val_split], kind, grid[g], budget, mix_seed(seed, 100 + g));
        sel.grid_scores.push_back(r.best_validation);
        if (!have || r.best_validation > sel.result.best_validation) {
            sel.result = std::move(r);
            sel.config = grid[g];
            have = true;
        }
    }
    return sel;
}

std::vector<double> predict_trial(const CnnModel& model, const MultiSignal& eeg)
{
    const int w = model.config.window;
    if (eeg.channel_count() != model.config.channels) throw ParameterError("predict_trial: channel count mismatch");
    const Eigen::Index t = eeg.length();
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(eeg.channel_count(), t + w);
    padded.leftCols(t) = eeg.data();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(t));
    constexpr Eigen::Index chunk = 2048;
    Eigen::MatrixXd x;
    for (Eigen::Index a = 0; a < t; a += chunk) {
        const Eigen::Index n = std::min(chunk, t - a);
        x.resize(eeg.channel_count(), n * w);
        for (Eigen::Index i = 0; i < n; ++i) x.middleCols(i * w, w) = padded.middleCols(a + i, w);
        const Eigen::VectorXd p = predict(model, x);
        out.insert(out.end(), p.data(), p.data() + p.size());
    }
    return out;
}

void save_cnn(const std::filesystem::path& path, const CnnModel& model)
{
    CnnModel m = model;
    nlohmann::json shapes = nlohmann::json::array();
    std::vector<double> flat;
    for (const ParamRef& p : m.params()) {
        shapes.push_back({{"name", p.name}, {"size", p.size}});
        flat.insert(flat.end(), p.data, p.data + p.size);
    }
    for (const ConvBlock& b : m.blocks) {
        flat.insert(flat.end(), b.running_mean.data(), b.running_mean.data() + b.running_mean.size());
        flat.insert(flat.end(), b.running_var.data(), b.running_var.data() + b.running_var.size());
    }
    const nlohmann::json h{{"kind", "cnn"},
                           {"kernel", m.config.kernel},
                           {"blocks", m.config.blocks},
                           {"maps", m.config.maps},
                           {"channels", m.config.channels},
                           {"window", m.config.window},
                           {"pool", m.config.pool},
                           {"parameters", shapes},
                           {"payload", path.filename().string() + ".f32"},
                           {"layout", "parameters in order, then running mean and variance per block"}};
    write_f32_matrix(path.string() + ".f32",
                     Eigen::Map<const Eigen::MatrixXd>(flat.data(), 1, static_cast<Eigen::Index>(flat.size())));
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << h.dump(2) << '\n';
}

CnnModel load_cnn(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IngestionError("missing " + path.string());
    const nlohmann::json h = nlohmann::json::parse(in);
    CnnConfig c;
    c.kernel = h.at("kernel").get<int>();
    c.blocks = h.at("blocks").get<int>();
    c.maps = h.at("maps").get<int>();
    c.channels = h.at("channels").get<int>();
    c.window = h.at("window").get<int>();
    c.pool = h.at("pool").get<int>();
    CnnModel m = CnnModel::init(c, 0);
    const Eigen::Index n = m.parameter_count() + 2 * c.maps * c.blocks;
    const Eigen::MatrixXd flat = read_f32_matrix(path.string() + ".f32", 1, n);
    Eigen::Index k = 0;
    for (ParamRef p : m.params())
        for (Eigen::Index i = 0; i < p.size; ++i) p.data[i] = flat(0, k++);
    for (ConvBlock& b : m.blocks) {
        for (Eigen::Index i = 0; i < c.maps; ++i) b.running_mean[i] = flat(0, k++);
        for (Eigen::Index i = 0; i < c.maps; ++i) b.running_var[i] = flat(0, k++);
    }
    m.mode = CnnMode::eval;
    return m;
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> log)
{
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << "epoch,train_loss,validation_rho\n";
    char buf[96];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", e.epoch, e.train_loss, e.validation_rho);
        out << buf;
    }
}

} // namespace aad
