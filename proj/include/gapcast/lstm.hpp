#pragma once

#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcast/common.hpp"
#include "gapcast/features.hpp"

namespace gapcast {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Gate weights act on the concatenation [h_{t-1}, x_t] (units + d wide).
struct LstmParams {
    std::size_t units = 0;
    std::size_t input_dim = 0;
    Matrix w_f, w_i, w_c, w_o;                 // units x (units + d)
    std::vector<double> b_f, b_i, b_c, b_o;    // units
    std::vector<double> w_y;                   // linear head, units
    double b_y = 0.0;

    static LstmParams zeros(std::size_t units, std::size_t input_dim) {
        LstmParams p;
        p.units = units;
        p.input_dim = input_dim;
        const std::size_t w = units + input_dim;
        p.w_f = p.w_i = p.w_c = p.w_o = Matrix(units, w);
        p.b_f.assign(units, 0.0);
        p.b_i.assign(units, 0.0);
        p.b_c.assign(units, 0.0);
        p.b_o.assign(units, 0.0);
        p.w_y.assign(units, 0.0);
        p.b_y = 0.0;
        return p;
    }

    std::vector<std::pair<std::string, std::span<double>>> tensors() {
        return {{"w_f", w_f.data}, {"w_i", w_i.data}, {"w_c", w_c.data}, {"w_o", w_o.data},
                {"b_f", b_f},      {"b_i", b_i},      {"b_c", b_c},      {"b_o", b_o},
                {"w_y", w_y},      {"b_y", {&b_y, 1}}};
    }

    std::vector<std::pair<std::string, std::span<const double>>> tensors() const {
        return {{"w_f", w_f.data}, {"w_i", w_i.data}, {"w_c", w_c.data}, {"w_o", w_o.data},
                {"b_f", b_f},      {"b_i", b_i},      {"b_c", b_c},      {"b_o", b_o},
                {"w_y", w_y},      {"b_y", {&b_y, 1}}};
    }
};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;

    static LstmState zeros(std::size_t units) { return {std::vector<double>(units, 0.0),
                                                        std::vector<double>(units, 0.0)}; }
};

struct GateCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> f, i, c_tilde, o, c, tanh_c;
};

enum class LossKind { mse, mae };
enum class OptimizerKind { sgd, rmsprop, adam };

inline std::string to_string(LossKind k) { return k == LossKind::mse ? "MSE" : "MAE"; }
inline std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "SGD";
        case OptimizerKind::rmsprop: return "RMSProp";
        case OptimizerKind::adam: return "Adam";
    }
    return "Adam";
}

inline LossKind loss_from_string(const std::string& s) {
    if (s == "MSE" || s == "mse") return LossKind::mse;
    if (s == "MAE" || s == "mae") return LossKind::mae;
    fail("BadConfig", "unknown loss '" + s + "'");
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "SGD" || s == "sgd") return OptimizerKind::sgd;
    if (s == "RMSProp" || s == "rmsprop") return OptimizerKind::rmsprop;
    if (s == "Adam" || s == "adam") return OptimizerKind::adam;
    fail("BadConfig", "unknown optimizer '" + s + "'");
}

struct TrainConfig {
    std::size_t units = 100;
    std::size_t lookback = 24;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    LossKind loss = LossKind::mse;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 1;
    double learning_rate = 1e-3;
    double beta1 = 0.9;        // adam
    double beta2 = 0.999;      // adam
    double adam_epsilon = 1e-8;
    double rho = 0.9;          // rmsprop moving average
    double clip_norm = 5.0;    // global gradient norm ceiling; 0 disables
};

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace lstm {

inline void check_x(const LstmParams& p, std::size_t x_size) {
    if (x_size != p.input_dim)
        fail("ShapeMismatch", "input width " + std::to_string(x_size) + " vs model d " +
                                  std::to_string(p.input_dim));
}

/// One cell step:
///   f = sig(W_f [h, x] + b_f)      i = sig(W_i [h, x] + b_i)
///   c~ = tanh(W_c [h, x] + b_c)    c' = f (.) c + i (.) c~
///   o = sig(W_o [h, x] + b_o)      h' = tanh(c') (.) o
inline LstmState forward_step(const LstmParams& p, const LstmState& state,
                              std::span<const double> x, GateCache& cache) {
    check_x(p, x.size());
    if (state.h.size() != p.units || state.c.size() != p.units)
        fail("ShapeMismatch", "state size differs from unit count");

    const std::size_t u = p.units;
    cache.x.assign(x.begin(), x.end());
    cache.h_prev = state.h;
    cache.c_prev = state.c;
    cache.f.resize(u);
    cache.i.resize(u);
    cache.c_tilde.resize(u);
    cache.o.resize(u);
    cache.c.resize(u);
    cache.tanh_c.resize(u);

    LstmState next = LstmState::zeros(u);
    for (std::size_t r = 0; r < u; ++r) {
        double zf = p.b_f[r], zi = p.b_i[r], zc = p.b_c[r], zo = p.b_o[r];
        const auto wf = p.w_f.row(r);
        const auto wi = p.w_i.row(r);
        const auto wc = p.w_c.row(r);
        const auto wo = p.w_o.row(r);
        for (std::size_t k = 0; k < u; ++k) {
            const double h = state.h[k];
            zf += wf[k] * h;
            zi += wi[k] * h;
            zc += wc[k] * h;
            zo += wo[k] * h;
        }
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double v = x[k];
            zf += wf[u + k] * v;
            zi += wi[u + k] * v;
            zc += wc[u + k] * v;
            zo += wo[u + k] * v;
        }
        cache.f[r] = sigmoid(zf);
        cache.i[r] = sigmoid(zi);
        cache.c_tilde[r] = std::tanh(zc);
        cache.o[r] = sigmoid(zo);
        cache.c[r] = cache.f[r] * state.c[r] + cache.i[r] * cache.c_tilde[r];
        cache.tanh_c[r] = std::tanh(cache.c[r]);
        next.c[r] = cache.c[r];
        next.h[r] = cache.tanh_c[r] * cache.o[r];
    }
    return next;
}

/// Runs a lookback x d window from a zero state; prediction = w_y . h_T + b_y.
inline double forward_sequence(const LstmParams& p, const Matrix& window,
                               std::vector<GateCache>* caches = nullptr) {
    if (window.rows == 0) fail("ShapeMismatch", "empty window");
    check_x(p, window.cols);
    LstmState state = LstmState::zeros(p.units);
    if (caches) caches->resize(window.rows);
    GateCache scratch;
    for (std::size_t t = 0; t < window.rows; ++t) {
        GateCache& cache = caches ? (*caches)[t] : scratch;
        state = forward_step(p, state, window.row(t), cache);
    }
    return dot(p.w_y, state.h) + p.b_y;
}

/// Exact reverse-accumulation gradients of (d_loss * prediction) through all
/// timesteps of one window. Accumulates into `grads`.
inline void backward(const LstmParams& p, const std::vector<GateCache>& caches, double d_loss,
                     LstmParams& grads) {
    const std::size_t u = p.units;
    const std::size_t T = caches.size();

    std::vector<double> dh(u), dc_next(u, 0.0);
    const auto& last = caches[T - 1];
    for (std::size_t r = 0; r < u; ++r) {
        const double h_last = last.tanh_c[r] * last.o[r];
        grads.w_y[r] += d_loss * h_last;
        dh[r] = d_loss * p.w_y[r];
    }
    grads.b_y += d_loss;

    std::vector<double> dzf(u), dzi(u), dzc(u), dzo(u);
    for (std::size_t t = T; t-- > 0;) {
        const GateCache& cc = caches[t];
        for (std::size_t r = 0; r < u; ++r) {
            const double do_ = dh[r] * cc.tanh_c[r];
            const double dc = dc_next[r] + dh[r] * cc.o[r] * (1.0 - cc.tanh_c[r] * cc.tanh_c[r]);
            const double df = dc * cc.c_prev[r];
            const double di = dc * cc.c_tilde[r];
            const double dct = dc * cc.i[r];
            dzf[r] = df * cc.f[r] * (1.0 - cc.f[r]);
            dzi[r] = di * cc.i[r] * (1.0 - cc.i[r]);
            dzc[r] = dct * (1.0 - cc.c_tilde[r] * cc.c_tilde[r]);
            dzo[r] = do_ * cc.o[r] * (1.0 - cc.o[r]);
            dc_next[r] = dc * cc.f[r];
        }
        // parameter gradients: dz (outer) [h_prev, x], and bias += dz
        for (std::size_t r = 0; r < u; ++r) {
            auto gf = grads.w_f.row(r);
            auto gi = grads.w_i.row(r);
            auto gc = grads.w_c.row(r);
            auto go = grads.w_o.row(r);
            for (std::size_t k = 0; k < u; ++k) {
                const double h = cc.h_prev[k];
                gf[k] += dzf[r] * h;
                gi[k] += dzi[r] * h;
                gc[k] += dzc[r] * h;
                go[k] += dzo[r] * h;
            }
            for (std::size_t k = 0; k < cc.x.size(); ++k) {
                const double v = cc.x[k];
                gf[u + k] += dzf[r] * v;
                gi[u + k] += dzi[r] * v;
                gc[u + k] += dzc[r] * v;
                go[u + k] += dzo[r] * v;
            }
            grads.b_f[r] += dzf[r];
            grads.b_i[r] += dzi[r];
            grads.b_c[r] += dzc[r];
            grads.b_o[r] += dzo[r];
        }
        // propagate into h_{t-1} through all four gates
        for (std::size_t k = 0; k < u; ++k) {
            double s = 0.0;
            for (std::size_t r = 0; r < u; ++r) {
                s += p.w_f(r, k) * dzf[r] + p.w_i(r, k) * dzi[r] + p.w_c(r, k) * dzc[r] +
                     p.w_o(r, k) * dzo[r];
            }
            dh[k] = s;
        }
    }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

struct Optimizer {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    double rho = 0.9;
    LstmParams first_moment;   // adam m / rmsprop average
    LstmParams second_moment;  // adam v
    std::size_t step = 0;

    static Optimizer make(const TrainConfig& cfg, std::size_t units, std::size_t d) {
        Optimizer opt;
        opt.kind = cfg.optimizer;
        opt.learning_rate = cfg.learning_rate;
        opt.beta1 = cfg.beta1;
        opt.beta2 = cfg.beta2;
        opt.epsilon = cfg.adam_epsilon;
        opt.rho = cfg.rho;
        opt.first_moment = LstmParams::zeros(units, d);
        opt.second_moment = LstmParams::zeros(units, d);
        return opt;
    }
};

/// One optimizer step; SGD and RMSProp share the state layout, Adam applies
/// bias-corrected moment estimates.
inline void apply_update(Optimizer& opt, LstmParams& params, LstmParams& grads) {
    opt.step += 1;
    auto ps = params.tensors();
    auto gs = grads.tensors();
    auto ms = opt.first_moment.tensors();
    auto vs = opt.second_moment.tensors();
    const double lr = opt.learning_rate;

    for (std::size_t t = 0; t < ps.size(); ++t) {
        auto p = ps[t].second;
        auto g = gs[t].second;
        auto m = ms[t].second;
        auto v = vs[t].second;
        switch (opt.kind) {
            case OptimizerKind::sgd:
                for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
                break;
            case OptimizerKind::rmsprop:
                for (std::size_t k = 0; k < p.size(); ++k) {
                    v[k] = opt.rho * v[k] + (1.0 - opt.rho) * g[k] * g[k];
                    p[k] -= lr * g[k] / (std::sqrt(v[k]) + opt.epsilon);
                }
                break;
            case OptimizerKind::adam: {
                const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
                const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
                for (std::size_t k = 0; k < p.size(); ++k) {
                    m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
                    v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
                    const double m_hat = m[k] / bc1;
                    const double v_hat = v[k] / bc2;
                    p[k] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct LstmModel {
    LstmParams params;
    TrainConfig config;
    std::vector<double> loss_history;  // one entry per epoch, scaled-target space
    MinMaxScaler target_scaler;        // empty -> predictions stay in model space
};

inline LstmParams init_params(std::size_t units, std::size_t d, std::uint64_t seed) {
    LstmParams p = LstmParams::zeros(units, d);
    const double bound = 1.0 / std::sqrt(static_cast<double>(units + d));
    Rng rng = Rng(seed).child(0xd1);
    for (auto& [name, span] : p.tensors()) {
        if (name == "b_f") {
            for (auto& v : span) v = 1.0;  // standard forget-gate bias
        } else if (name[0] == 'b') {
            // zero biases
        } else {
            for (auto& v : span) v = rng.uniform(-bound, bound);
        }
    }
    return p;
}

inline double clip_gradients(LstmParams& grads, double max_norm) {
    double sq = 0.0;
    for (auto& [name, span] : grads.tensors())
        for (double v : span) sq += v * v;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& [name, span] : grads.tensors())
            for (auto& v : span) v *= scale;
    }
    return norm;
}

inline LstmModel fit(const SequenceDataset& data, const TrainConfig& cfg) {
    if (data.n_samples() == 0) fail("EmptyInput", "lstm fit on empty sequence data");
    if (cfg.units == 0 || cfg.epochs == 0 || cfg.batch_size == 0)
        fail("BadConfig", "units, epochs and batch_size must be positive");

    LstmModel model;
    model.config = cfg;
    model.params = init_params(cfg.units, data.n_features, cfg.seed);

    Optimizer opt = Optimizer::make(cfg, cfg.units, data.n_features);
    Rng shuffle_rng = Rng(cfg.seed).child(0x5e);

    std::vector<std::size_t> order(data.n_samples());
    std::iota(order.begin(), order.end(), 0);

    std::vector<GateCache> caches;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const double batch_n = static_cast<double>(stop - start);
            LstmParams grads = LstmParams::zeros(cfg.units, data.n_features);

            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t idx = order[s];
                const double pred = forward_sequence(model.params, data.windows[idx], &caches);
                const double err = pred - data.targets[idx];
                double sample_loss, d_loss;
                if (cfg.loss == LossKind::mse) {
                    sample_loss = err * err;
                    d_loss = 2.0 * err / batch_n;
                } else {
                    sample_loss = std::abs(err);
                    d_loss = (err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0)) / batch_n;
                }
                if (!std::isfinite(sample_loss))
                    fail("NonFiniteLoss", "training diverged at epoch " + std::to_string(epoch));
                epoch_loss += sample_loss;
                backward(model.params, caches, d_loss, grads);
            }

            clip_gradients(grads, cfg.clip_norm);
            apply_update(opt, model.params, grads);
        }
        model.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return model;
}

inline std::vector<double> predict(const LstmModel& model, const SequenceDataset& data) {
    std::vector<double> out;
    out.reserve(data.n_samples());
    for (const Matrix& window : data.windows)
        out.push_back(forward_sequence(model.params, window));
    if (model.target_scaler.n_cols() == 1) out = inverse(model.target_scaler, out);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LstmModel& model) {
    nlohmann::json j;
    j["config"] = {{"units", model.config.units},
                   {"lookback", model.config.lookback},
                   {"epochs", model.config.epochs},
                   {"batch_size", model.config.batch_size},
                   {"loss", to_string(model.config.loss)},
                   {"optimizer", to_string(model.config.optimizer)},
                   {"seed", model.config.seed},
                   {"learning_rate", model.config.learning_rate},
                   {"clip_norm", model.config.clip_norm}};
    j["input_dim"] = model.params.input_dim;
    nlohmann::json weights;
    for (const auto& [name, span] : model.params.tensors())
        weights[name] = std::vector<double>(span.begin(), span.end());
    j["weights"] = std::move(weights);
    j["loss_history"] = model.loss_history;
    if (model.target_scaler.n_cols() == 1)
        j["target_scaler"] = {{"min", model.target_scaler.col_min[0]},
                              {"max", model.target_scaler.col_max[0]}};
    return j;
}

inline LstmModel from_json(const nlohmann::json& j) {
    LstmModel model;
    const auto& jc = j.at("config");
    model.config.units = jc.at("units").get<std::size_t>();
    model.config.lookback = jc.at("lookback").get<std::size_t>();
    model.config.epochs = jc.at("epochs").get<std::size_t>();
    model.config.batch_size = jc.at("batch_size").get<std::size_t>();
    model.config.loss = loss_from_string(jc.at("loss").get<std::string>());
    model.config.optimizer = optimizer_from_string(jc.at("optimizer").get<std::string>());
    model.config.seed = jc.at("seed").get<std::uint64_t>();
    model.config.learning_rate = jc.at("learning_rate").get<double>();
    model.config.clip_norm = jc.at("clip_norm").get<double>();

    model.params = LstmParams::zeros(model.config.units, j.at("input_dim").get<std::size_t>());
    for (auto& [name, span] : model.params.tensors()) {
        const auto values = j.at("weights").at(name).get<std::vector<double>>();
        if (values.size() != span.size()) fail("ShapeMismatch", "weight tensor '" + name + "'");
        std::copy(values.begin(), values.end(), span.begin());
    }
    model.loss_history = j.at("loss_history").get<std::vector<double>>();
    if (j.contains("target_scaler")) {
        model.target_scaler.col_min = {j.at("target_scaler").at("min").get<double>()};
        model.target_scaler.col_max = {j.at("target_scaler").at("max").get<double>()};
    }
    return model;
}

}  // namespace lstm
}  // namespace gapcast
