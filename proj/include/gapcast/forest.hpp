#pragma once

#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcast/common.hpp"

namespace gapcast {

// ---------------------------------------------------------------------------
// Impurities
// ---------------------------------------------------------------------------

/// Squared-loss impurity: the population variance of the node targets.
inline double squared_loss_impurity(std::span<const double> targets) {
    if (targets.empty()) fail("EmptyNode", "impurity of an empty node");
    const double mean = mean_of(targets);
    double s = 0.0;
    for (double y : targets) {
        const double d = y - mean;
        s += d * d;
    }
    return s / static_cast<double>(targets.size());
}

/// Gini impurity sum_k p_k (1 - p_k) for categorical labels; exposed for
/// categorical targets, regression splits use squared loss.
inline double gini_impurity(std::span<const int> labels) {
    if (labels.empty()) fail("EmptyNode", "impurity of an empty node");
    std::map<int, std::size_t> counts;
    for (int k : labels) ++counts[k];
    double g = 0.0;
    const double n = static_cast<double>(labels.size());
    for (const auto& [label, count] : counts) {
        const double p = static_cast<double>(count) / n;
        g += p * (1.0 - p);
    }
    return g;
}

// ---------------------------------------------------------------------------
// CART regression trees
// ---------------------------------------------------------------------------

/// Flat pre-order node list; internal nodes route x[feature] <= threshold to
/// the left child. Leaves predict the mean of their training targets.
struct TreeNode {
    bool is_leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    double split_gain = 0.0;  // weighted impurity decrease of this split
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
    std::size_t n_samples = 0;
};

using Tree = std::vector<TreeNode>;

struct SplitResult {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double impurity_decrease = 0.0;
};

/// Best (feature, midpoint threshold) over the candidate features, maximizing
/// the weighted impurity decrease |D| L(D) - |D_L| L(D_L) - |D_R| L(D_R).
/// Ties break toward the lowest feature index, then the lowest threshold.
inline SplitResult best_split(const Matrix& x, const std::vector<double>& y,
                              std::span<const std::size_t> candidate_features,
                              std::span<const std::size_t> rows) {
    SplitResult best;
    const std::size_t n = rows.size();
    if (n < 2) return best;

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t r : rows) {
        sum += y[r];
        sum_sq += y[r] * y[r];
    }
    const double parent_sse = sum_sq - sum * sum / static_cast<double>(n);

    std::vector<std::pair<double, double>> ordered(n);  // (feature value, target)
    std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
    std::sort(features.begin(), features.end());

    for (std::size_t f : features) {
        for (std::size_t i = 0; i < n; ++i) ordered[i] = {x(rows[i], f), y[rows[i]]};
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        double left_sum = 0.0, left_sq = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += ordered[i].second;
            left_sq += ordered[i].second * ordered[i].second;
            if (ordered[i].first == ordered[i + 1].first) continue;  // not a boundary
            const double n_left = static_cast<double>(i + 1);
            const double n_right = static_cast<double>(n - i - 1);
            const double right_sum = sum - left_sum;
            const double right_sq = sum_sq - left_sq;
            const double sse_left = left_sq - left_sum * left_sum / n_left;
            const double sse_right = right_sq - right_sum * right_sum / n_right;
            const double decrease = parent_sse - sse_left - sse_right;
            if (decrease > best.impurity_decrease) {
                best.found = true;
                best.feature = f;
                best.threshold = ordered[i].first + 0.5 * (ordered[i + 1].first - ordered[i].first);
                best.impurity_decrease = decrease;
            }
        }
    }
    if (best.impurity_decrease <= 0.0) best.found = false;
    return best;
}

struct TreeOptions {
    std::size_t k_features = 0;  // 0 means all features
    std::size_t min_samples_leaf = 1;
    int max_depth = -1;  // -1 means unlimited
};

namespace detail {

inline std::vector<std::size_t> sample_features(std::size_t d, std::size_t k, Rng& rng) {
    std::vector<std::size_t> all(d);
    std::iota(all.begin(), all.end(), 0);
    if (k >= d) return all;
    // partial Fisher-Yates: the first k entries are a sample without replacement
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(d - i);
        std::swap(all[i], all[j]);
    }
    all.resize(k);
    return all;
}

inline std::int32_t grow_tree(Tree& tree, const Matrix& x, const std::vector<double>& y,
                              std::vector<std::size_t>&& rows, const TreeOptions& opts, int depth,
                              Rng& rng) {
    const std::size_t n = rows.size();
    double sum = 0.0;
    for (std::size_t r : rows) sum += y[r];

    TreeNode node;
    node.value = sum / static_cast<double>(n);
    node.n_samples = n;
    const std::int32_t index = static_cast<std::int32_t>(tree.size());
    tree.push_back(node);

    bool pure = true;
    for (std::size_t r : rows)
        if (y[r] != y[rows[0]]) {
            pure = false;
            break;
        }
    if (pure || n < 2 * opts.min_samples_leaf || (opts.max_depth >= 0 && depth >= opts.max_depth))
        return index;

    const std::size_t d = x.cols;
    const std::size_t k = opts.k_features == 0 ? d : std::min(opts.k_features, d);
    const auto features = sample_features(d, k, rng);
    const SplitResult split = best_split(x, y, features, rows);
    if (!split.found) return index;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows)
        (x(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
    if (left_rows.size() < opts.min_samples_leaf || right_rows.size() < opts.min_samples_leaf)
        return index;

    tree[static_cast<std::size_t>(index)].is_leaf = false;
    tree[static_cast<std::size_t>(index)].feature = split.feature;
    tree[static_cast<std::size_t>(index)].threshold = split.threshold;
    tree[static_cast<std::size_t>(index)].split_gain = split.impurity_decrease;

    rows.clear();
    rows.shrink_to_fit();
    const std::int32_t left = grow_tree(tree, x, y, std::move(left_rows), opts, depth + 1, rng);
    tree[static_cast<std::size_t>(index)].left = left;
    const std::int32_t right = grow_tree(tree, x, y, std::move(right_rows), opts, depth + 1, rng);
    tree[static_cast<std::size_t>(index)].right = right;
    return index;
}

}  // namespace detail

inline Tree fit_tree(const Matrix& x, const std::vector<double>& y, const TreeOptions& opts, Rng rng) {
    if (x.rows == 0 || y.empty()) fail("EmptyInput", "fit_tree on empty data");
    if (x.rows != y.size()) fail("DimensionMismatch", "row count differs from target length");
    Tree tree;
    std::vector<std::size_t> rows(x.rows);
    std::iota(rows.begin(), rows.end(), 0);
    detail::grow_tree(tree, x, y, std::move(rows), opts, 0, rng);
    return tree;
}

inline double predict_tree(const Tree& tree, std::span<const double> row) {
    std::size_t i = 0;
    while (!tree[i].is_leaf) {
        i = static_cast<std::size_t>(row[tree[i].feature] <= tree[i].threshold ? tree[i].left
                                                                               : tree[i].right);
    }
    return tree[i].value;
}

// ---------------------------------------------------------------------------
// Forest
// ---------------------------------------------------------------------------

struct ForestOptions {
    std::size_t n_trees = 100;
    std::size_t k_features = 0;  // 0 -> round(sqrt(d))
    std::size_t min_samples_leaf = 1;
    int max_depth = -1;
    bool bootstrap = true;  // test hook: off makes m=1 equal a single tree
    std::size_t threads = 1;
};

struct ForestModel {
    std::vector<Tree> trees;
    std::size_t k = 0;
    std::vector<std::string> feature_names;
    std::vector<std::vector<std::size_t>> oob_indices;  // rows not drawn per tree
    std::uint64_t rng_seed = 0;

    std::size_t n_trees() const { return trees.size(); }
    std::size_t n_features() const { return feature_names.size(); }
};

/// Probability distribution over one prediction, approximated by the
/// per-tree outputs: each of the m trees contributes probability 1/m.
struct PredictionDistribution {
    std::vector<double> tree_outputs;
    std::vector<double> bin_edges;          // bins+1 edges over [min, max]
    std::vector<double> bin_probabilities;  // sums to 1
    double point_estimate = 0.0;
};

namespace forest {

inline ForestModel fit(const Matrix& x, const std::vector<double>& y, ForestOptions opts,
                       std::uint64_t rng_seed, std::vector<std::string> feature_names = {}) {
    if (x.rows == 0 || y.empty()) fail("EmptyInput", "fit_forest on empty data");
    if (x.rows != y.size()) fail("DimensionMismatch", "row count differs from target length");
    if (opts.n_trees < 1) fail("BadConfig", "forest needs at least one tree");

    const std::size_t d = x.cols;
    if (opts.k_features == 0)
        opts.k_features = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d)))));
    opts.k_features = std::min(opts.k_features, d);

    ForestModel model;
    model.k = opts.k_features;
    model.rng_seed = rng_seed;
    model.feature_names = std::move(feature_names);
    if (model.feature_names.empty())
        for (std::size_t j = 0; j < d; ++j) model.feature_names.push_back("x" + std::to_string(j));
    model.trees.resize(opts.n_trees);
    model.oob_indices.resize(opts.n_trees);

    const Rng base(rng_seed);
    const std::size_t n = x.rows;
    const TreeOptions tree_opts{opts.k_features, opts.min_samples_leaf, opts.max_depth};

    auto build = [&](std::size_t i) {
        // tree i draws from its own child stream, so results do not depend on
        // whether trees were trained serially or in parallel
        Rng rng = base.child(i);
        if (!opts.bootstrap) {
            model.trees[i] = fit_tree(x, y, tree_opts, rng);
            return;
        }
        std::vector<std::size_t> draws(n);
        std::vector<bool> drawn(n, false);
        for (std::size_t r = 0; r < n; ++r) {
            draws[r] = rng.uniform_index(n);
            drawn[draws[r]] = true;
        }
        Matrix bx(n, x.cols);
        std::vector<double> by(n);
        for (std::size_t r = 0; r < n; ++r) {
            const auto src = x.row(draws[r]);
            std::copy(src.begin(), src.end(), bx.row(r).begin());
            by[r] = y[draws[r]];
        }
        model.trees[i] = fit_tree(bx, by, tree_opts, rng);
        for (std::size_t r = 0; r < n; ++r)
            if (!drawn[r]) model.oob_indices[i].push_back(r);
    };

    if (opts.threads <= 1) {
        for (std::size_t i = 0; i < opts.n_trees; ++i) build(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mu;
        const std::size_t workers = std::min(opts.threads, opts.n_trees);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    std::size_t i;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= opts.n_trees) return;
                        i = next++;
                    }
                    build(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    return model;
}

inline void check_width(const ForestModel& model, std::size_t cols) {
    if (cols != model.n_features())
        fail("DimensionMismatch", "model expects " + std::to_string(model.n_features()) +
                                      " features, got " + std::to_string(cols));
}

inline std::vector<double> predict(const ForestModel& model, const Matrix& x) {
    check_width(model, x.cols);
    std::vector<double> out(x.rows, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double s = 0.0;
        for (const Tree& t : model.trees) s += predict_tree(t, x.row(r));
        out[r] = s / static_cast<double>(model.n_trees());
    }
    return out;
}

inline PredictionDistribution distribution_from_outputs(std::vector<double> outputs,
                                                        std::size_t bins) {
    if (outputs.empty()) fail("EmptyInput", "distribution needs at least one output");
    if (bins < 1) fail("BadConfig", "bins must be positive");

    PredictionDistribution dist;
    dist.tree_outputs = std::move(outputs);
    dist.point_estimate = mean_of(dist.tree_outputs);

    const auto [lo_it, hi_it] =
        std::minmax_element(dist.tree_outputs.begin(), dist.tree_outputs.end());
    const double lo = *lo_it, hi = *hi_it;
    const double weight = 1.0 / static_cast<double>(dist.tree_outputs.size());

    if (lo == hi) {
        dist.bin_edges = {lo, hi};
        dist.bin_probabilities = {1.0};
        return dist;
    }
    dist.bin_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b)
        dist.bin_edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    dist.bin_probabilities.assign(bins, 0.0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double v : dist.tree_outputs) {
        std::size_t b = static_cast<std::size_t>((v - lo) / width);
        if (b >= bins) b = bins - 1;  // max lands in the last bin
        dist.bin_probabilities[b] += weight;
    }
    return dist;
}

inline PredictionDistribution predict_distribution(const ForestModel& model,
                                                   std::span<const double> row, std::size_t bins) {
    check_width(model, row.size());
    std::vector<double> outputs;
    outputs.reserve(model.n_trees());
    for (const Tree& t : model.trees) outputs.push_back(predict_tree(t, row));
    return distribution_from_outputs(std::move(outputs), bins);
}

/// Per-feature sum of weighted impurity decreases over all splits of all
/// trees, scaled so the scores total 100. Sorted descending.
inline std::vector<std::pair<std::string, double>> feature_importance(const ForestModel& model) {
    std::vector<double> raw(model.n_features(), 0.0);
    for (const Tree& tree : model.trees)
        for (const TreeNode& node : tree)
            if (!node.is_leaf) raw[node.feature] += node.split_gain;
    double total = 0.0;
    for (double v : raw) total += v;
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t j = 0; j < raw.size(); ++j)
        out.emplace_back(model.feature_names[j], total > 0.0 ? raw[j] * 100.0 / total : 0.0);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: pre-order node lists
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ForestModel& model) {
    nlohmann::json j;
    j["k"] = model.k;
    j["rng_seed"] = model.rng_seed;
    j["feature_names"] = model.feature_names;
    j["trees"] = nlohmann::json::array();
    for (const Tree& tree : model.trees) {
        nlohmann::json jt = nlohmann::json::array();
        for (const TreeNode& n : tree) {
            if (n.is_leaf) {
                jt.push_back({{"value", n.value}, {"n", n.n_samples}});
            } else {
                jt.push_back({{"feature", n.feature},
                              {"threshold", n.threshold},
                              {"gain", n.split_gain},
                              {"left", n.left},
                              {"right", n.right},
                              {"value", n.value},
                              {"n", n.n_samples}});
            }
        }
        j["trees"].push_back(std::move(jt));
    }
    return j;
}

inline ForestModel from_json(const nlohmann::json& j) {
    ForestModel model;
    model.k = j.at("k").get<std::size_t>();
    model.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& jt : j.at("trees")) {
        Tree tree;
        for (const auto& jn : jt) {
            TreeNode n;
            n.value = jn.at("value").get<double>();
            n.n_samples = jn.at("n").get<std::size_t>();
            if (jn.contains("feature")) {
                n.is_leaf = false;
                n.feature = jn.at("feature").get<std::size_t>();
                n.threshold = jn.at("threshold").get<double>();
                n.split_gain = jn.at("gain").get<double>();
                n.left = jn.at("left").get<std::int32_t>();
                n.right = jn.at("right").get<std::int32_t>();
            }
            tree.push_back(n);
        }
        model.trees.push_back(std::move(tree));
    }
    model.oob_indices.resize(model.trees.size());
    return model;
}

}  // namespace forest
}  // namespace gapcast
