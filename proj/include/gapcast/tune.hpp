#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcast/common.hpp"
#include "gapcast/features.hpp"
#include "gapcast/forest.hpp"
#include "gapcast/lasso.hpp"
#include "gapcast/lstm.hpp"
#include "gapcast/svr.hpp"

namespace gapcast {

// ---------------------------------------------------------------------------
// K-fold partitions
// ---------------------------------------------------------------------------

/// Contiguous chronological folds covering [0, n); sizes differ by at most
/// one with the earliest folds taking the extras. With shuffle enabled the
/// indices are permuted first (leaks lagged features across folds, offered
/// for parity with random CV).
inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                           std::uint64_t seed = 0,
                                                           bool shuffle = false) {
    if (k < 2) fail("BadConfig", "k-fold needs k >= 2");
    if (n < k) fail("TooFewSamples", std::to_string(n) + " samples for " + std::to_string(k) + " folds");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (shuffle) {
        Rng rng(seed);
        rng.shuffle(order);
    }

    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Parameter grids
// ---------------------------------------------------------------------------

/// Named axes in declared order; candidates enumerate the Cartesian product
/// with the last axis varying fastest.
struct ParamGrid {
    std::string learner;  // lasso | svr | forest | lstm
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;

    std::size_t size() const {
        std::size_t s = 1;
        for (const auto& [name, values] : axes) s *= values.size();
        return s;
    }

    nlohmann::json candidate(std::size_t index) const {
        nlohmann::json params;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const auto& values = axes[a].second;
            params[axes[a].first] = values[index % values.size()];
            index /= values.size();
        }
        return params;
    }
};

/// The shipped default grids. The winners reported for this problem family
/// are lambda=0.0003; C=1000, eps=0.001, rbf gamma=0.1; 100 trees; and
/// 100 units / MSE / Adam / lookback 24 / 100 epochs.
inline ParamGrid default_grid(const std::string& learner) {
    ParamGrid g;
    g.learner = learner;
    if (learner == "lasso") {
        g.axes = {{"lambda",
                   {0.0001, 0.0002, 0.0003, 0.0004, 0.0005, 0.001, 0.002, 0.003, 0.004, 0.005, 0.01}}};
    } else if (learner == "svr") {
        g.axes = {{"C", {1.0, 10.0, 100.0, 1000.0}},
                  {"epsilon", {0.001, 0.01, 0.1}},
                  {"kernel", {"linear", "sigmoid", "rbf"}},
                  {"gamma", {0.01, 0.1, 1.0}}};
    } else if (learner == "forest") {
        g.axes = {{"n_trees", {50, 100}}};
    } else if (learner == "lstm") {
        g.axes = {{"units", {10, 20, 50, 100}},
                  {"epochs", {10, 20, 50, 100}},
                  {"lookback", {24, 168, 720}},
                  {"loss", {"MSE", "MAE"}},
                  {"optimizer", {"SGD", "RMSProp", "Adam"}}};
    } else {
        fail("BadConfig", "unknown learner '" + learner + "'");
    }
    return g;
}

// ---------------------------------------------------------------------------
// Grid search with K-fold cross-validation
// ---------------------------------------------------------------------------

struct CandidateResult {
    nlohmann::json params;
    std::vector<double> fold_losses;  // validation MSE on scaled targets
    double mean_loss = std::numeric_limits<double>::infinity();
    bool failed = false;
    std::string failure;
};

struct CvResult {
    std::vector<CandidateResult> candidates;
    std::size_t best_index = 0;
    std::size_t fold_count = 0;
    std::string learner;

    const CandidateResult& best() const { return candidates[best_index]; }
};

namespace tune {
namespace detail {

inline SupervisedDataset gather_rows(const SupervisedDataset& ds,
                                     const std::vector<std::size_t>& rows) {
    SupervisedDataset out;
    out.feature_names = ds.feature_names;
    out.target_name = ds.target_name;
    out.features = Matrix(rows.size(), ds.features.cols);
    out.target.reserve(rows.size());
    out.timestamps.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = ds.features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.target.push_back(ds.target[rows[i]]);
        out.timestamps.push_back(ds.timestamps[rows[i]]);
    }
    return out;
}

inline double mse_of(const std::vector<double>& y, const std::vector<double>& y_hat) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - y_hat[i];
        s += d * d;
    }
    return s / static_cast<double>(y.size());
}

/// Trains one candidate on the training split and returns validation MSE.
/// For the recurrent learner both splits are windowed with the candidate's
/// own lookback, so folds shorter than the lookback fail the candidate.
inline double evaluate_candidate(const std::string& learner, const nlohmann::json& params,
                                 const SupervisedDataset& train, const SupervisedDataset& val,
                                 std::uint64_t seed) {
    if (learner == "lasso") {
        LassoOptions opts;
        opts.lambda = params.at("lambda").get<double>();
        const LassoModel model = lasso::fit(train.features, train.target, opts);
        return mse_of(val.target, lasso::predict(model, val.features));
    }
    if (learner == "svr") {
        SvrOptions opts;
        opts.C = params.value("C", 1.0);
        opts.epsilon = params.value("epsilon", 0.1);
        if (params.contains("kernel"))
            opts.kernel.kind = kernel_kind_from_string(params.at("kernel").get<std::string>());
        opts.kernel.gamma = params.value("gamma", 0.1);
        const SvrModel model = svr::fit(train.features, train.target, opts);
        return mse_of(val.target, svr::predict(model, val.features));
    }
    if (learner == "forest") {
        ForestOptions opts;
        opts.n_trees = params.value("n_trees", 100);
        opts.min_samples_leaf = params.value("min_samples_leaf", 1);
        const ForestModel model = forest::fit(train.features, train.target, opts, seed);
        return mse_of(val.target, forest::predict(model, val.features));
    }
    if (learner == "lstm") {
        TrainConfig cfg;
        cfg.units = params.value("units", 10);
        cfg.epochs = params.value("epochs", 10);
        cfg.lookback = params.value("lookback", 24);
        if (params.contains("loss")) cfg.loss = loss_from_string(params.at("loss").get<std::string>());
        if (params.contains("optimizer"))
            cfg.optimizer = optimizer_from_string(params.at("optimizer").get<std::string>());
        cfg.seed = seed;
        const LstmModel model = lstm::fit(to_sequences(train, cfg.lookback), cfg);
        const SequenceDataset vs = to_sequences(val, cfg.lookback);
        std::vector<double> truth = vs.targets;
        return mse_of(truth, lstm::predict(model, vs));
    }
    fail("BadConfig", "unknown learner '" + learner + "'");
}

}  // namespace detail

/// Exhaustive search: every candidate is trained k times, rotating the
/// held-out fold. A candidate whose training throws is marked failed and the
/// search continues. Ties resolve to the earliest candidate in grid order.
inline CvResult grid_search(const SupervisedDataset& dataset, const ParamGrid& grid, std::size_t k,
                            std::uint64_t seed, bool shuffle = false) {
    if (grid.size() == 0 || grid.axes.empty()) fail("BadConfig", "empty parameter grid");
    const auto folds = kfold_indices(dataset.n_rows(), k, seed, shuffle);

    CvResult result;
    result.fold_count = k;
    result.learner = grid.learner;
    result.candidates.resize(grid.size());

    for (std::size_t c = 0; c < grid.size(); ++c) {
        CandidateResult& cand = result.candidates[c];
        cand.params = grid.candidate(c);
        const std::uint64_t cand_seed = splitmix64(seed ^ splitmix64(c));
        try {
            double total = 0.0;
            for (std::size_t f = 0; f < k; ++f) {
                std::vector<std::size_t> train_rows;
                for (std::size_t g = 0; g < k; ++g)
                    if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
                const SupervisedDataset train = detail::gather_rows(dataset, train_rows);
                const SupervisedDataset val = detail::gather_rows(dataset, folds[f]);
                const double loss =
                    detail::evaluate_candidate(grid.learner, cand.params, train, val, cand_seed);
                cand.fold_losses.push_back(loss);
                total += loss;
            }
            cand.mean_loss = total / static_cast<double>(k);
        } catch (const std::exception& e) {
            cand.failed = true;
            cand.failure = e.what();
            cand.fold_losses.clear();
            cand.mean_loss = std::numeric_limits<double>::infinity();
        }
    }

    bool any_ok = false;
    for (std::size_t c = 0; c < result.candidates.size(); ++c) {
        if (result.candidates[c].failed) continue;
        if (!any_ok || result.candidates[c].mean_loss < result.candidates[result.best_index].mean_loss) {
            result.best_index = c;
            any_ok = true;
        }
    }
    if (!any_ok) fail("LearnerFailure", "every grid candidate failed");
    return result;
}

/// CSV export: one row per (candidate, fold) with the flattened parameters.
inline std::string cv_results_csv(const CvResult& result) {
    std::vector<std::string> param_names;
    for (const auto& [name, value] : result.candidates[0].params.items()) param_names.push_back(name);

    std::string out = "candidate";
    for (const auto& n : param_names) out += "," + n;
    out += ",fold,val_mse\n";
    for (std::size_t c = 0; c < result.candidates.size(); ++c) {
        const auto& cand = result.candidates[c];
        std::string prefix = std::to_string(c);
        for (const auto& n : param_names) {
            const auto& v = cand.params.at(n);
            prefix += "," + (v.is_string() ? v.get<std::string>() : v.dump());
        }
        if (cand.failed) {
            out += prefix + ",failed,\n";
            continue;
        }
        for (std::size_t f = 0; f < cand.fold_losses.size(); ++f)
            out += prefix + "," + std::to_string(f) + "," + format_double(cand.fold_losses[f]) + "\n";
    }
    return out;
}

inline nlohmann::json best_params_json(const CvResult& result) {
    return {{"learner", result.learner},
            {"params", result.best().params},
            {"mean_val_mse", result.best().mean_loss},
            {"folds", result.fold_count}};
}

}  // namespace tune
}  // namespace gapcast
