#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcast/common.hpp"
#include "gapcast/forest.hpp"

namespace gapcast {

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

struct MetricReport {
    double mae = 0.0;
    double rmse = 0.0;
    double nrmse_percent = 0.0;
    double max_error = 0.0;
    std::size_t n_samples = 0;
    std::string target_name;
};

namespace eval {

inline void check_lengths(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.size() != y_hat.size())
        fail("LengthMismatch", std::to_string(y.size()) + " actuals vs " +
                                   std::to_string(y_hat.size()) + " predictions");
    if (y.empty()) fail("LengthMismatch", "metrics need at least one sample");
}

inline double mae(const std::vector<double>& y, const std::vector<double>& y_hat) {
    check_lengths(y, y_hat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
    return s / static_cast<double>(y.size());
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    check_lengths(y, y_hat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - y_hat[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

/// RMSE normalized by the range of the actual values, in percent.
inline double nrmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    check_lengths(y, y_hat);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*hi == *lo) fail("DegenerateRange", "actuals are constant, nRMSE undefined");
    return rmse(y, y_hat) / (*hi - *lo) * 100.0;
}

inline double max_error(const std::vector<double>& y, const std::vector<double>& y_hat) {
    check_lengths(y, y_hat);
    double m = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) m = std::max(m, std::abs(y[i] - y_hat[i]));
    return m;
}

inline MetricReport report(const std::vector<double>& y, const std::vector<double>& y_hat,
                           const std::string& target_name) {
    MetricReport r;
    r.mae = mae(y, y_hat);
    r.rmse = rmse(y, y_hat);
    r.nrmse_percent = nrmse(y, y_hat);
    r.max_error = max_error(y, y_hat);
    r.n_samples = y.size();
    r.target_name = target_name;
    return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
    return {{"mae", r.mae},
            {"rmse", r.rmse},
            {"nrmse_percent", r.nrmse_percent},
            {"max_error", r.max_error},
            {"n_samples", r.n_samples},
            {"target", r.target_name}};
}

}  // namespace eval

// ---------------------------------------------------------------------------
// Descriptive statistics
// ---------------------------------------------------------------------------

struct DescriptiveStats {
    double mean = 0.0;
    double std = 0.0;  // sample (n-1) standard deviation
    double min = 0.0;
    double max = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
};

namespace eval {

/// Linear-interpolation percentile on a sorted copy: rank = p/100 * (n-1).
inline double percentile(std::vector<double> sorted_values, double p) {
    const double rank = p / 100.0 * static_cast<double>(sorted_values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

inline DescriptiveStats describe(const std::vector<double>& series) {
    if (series.empty()) fail("EmptyInput", "describe on an empty series");
    DescriptiveStats st;
    st.mean = mean_of(series);
    double ss = 0.0;
    for (double v : series) {
        const double d = v - st.mean;
        ss += d * d;
    }
    st.std = series.size() > 1 ? std::sqrt(ss / static_cast<double>(series.size() - 1)) : 0.0;

    std::vector<double> sorted = series;
    std::sort(sorted.begin(), sorted.end());
    st.min = sorted.front();
    st.max = sorted.back();
    st.p25 = percentile(sorted, 25.0);
    st.p50 = percentile(sorted, 50.0);
    st.p75 = percentile(sorted, 75.0);
    return st;
}

inline nlohmann::json to_json(const DescriptiveStats& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max},
            {"p25", s.p25},   {"p50", s.p50}, {"p75", s.p75}};
}

}  // namespace eval

// ---------------------------------------------------------------------------
// Direct-gap vs. difference-of-predictions comparison
// ---------------------------------------------------------------------------

/// Two ways to predict the same gap value from forests: directly from a
/// gap-trained forest, and by pairing tree i of a DAM forest with tree i of
/// an RTM forest and subtracting. Each paired output keeps probability 1/m.
struct GapComparison {
    PredictionDistribution direct_distribution;
    PredictionDistribution difference_distribution;
    double actual_gap = 0.0;
    double delta = 0.0;
    double direct_prob_within_delta = 0.0;
    double difference_prob_within_delta = 0.0;
};

namespace eval {

/// Probability mass of the empirical per-tree distribution within
/// [actual - delta, actual + delta].
inline double prob_within(const std::vector<double>& outputs, double actual, double delta) {
    std::size_t hits = 0;
    for (double v : outputs)
        if (std::abs(v - actual) <= delta) ++hits;
    return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

inline GapComparison compare_gap_methods(const ForestModel& dam_forest, const ForestModel& rtm_forest,
                                         const ForestModel& gap_forest, std::span<const double> row,
                                         double actual_gap, double delta, std::size_t bins) {
    if (dam_forest.n_trees() != rtm_forest.n_trees() || dam_forest.n_trees() != gap_forest.n_trees())
        fail("TreeCountMismatch", "the three forests must share a tree count");

    GapComparison cmp;
    cmp.actual_gap = actual_gap;
    cmp.delta = delta;

    cmp.direct_distribution = forest::predict_distribution(gap_forest, row, bins);

    forest::check_width(dam_forest, row.size());
    forest::check_width(rtm_forest, row.size());
    std::vector<double> diffs;
    diffs.reserve(dam_forest.n_trees());
    for (std::size_t i = 0; i < dam_forest.n_trees(); ++i)
        diffs.push_back(predict_tree(dam_forest.trees[i], row) - predict_tree(rtm_forest.trees[i], row));
    cmp.difference_distribution = forest::distribution_from_outputs(std::move(diffs), bins);

    cmp.direct_prob_within_delta = prob_within(cmp.direct_distribution.tree_outputs, actual_gap, delta);
    cmp.difference_prob_within_delta =
        prob_within(cmp.difference_distribution.tree_outputs, actual_gap, delta);
    return cmp;
}

inline nlohmann::json to_json(const GapComparison& c) {
    return {{"actual_gap", c.actual_gap},
            {"delta", c.delta},
            {"direct_prob_within_delta", c.direct_prob_within_delta},
            {"difference_prob_within_delta", c.difference_prob_within_delta},
            {"direct_point_estimate", c.direct_distribution.point_estimate},
            {"difference_point_estimate", c.difference_distribution.point_estimate}};
}

/// CSV block (bin_left, bin_right, probability) for external plotting.
inline std::string distribution_csv(const PredictionDistribution& d) {
    std::string out = "bin_left,bin_right,probability\n";
    for (std::size_t b = 0; b < d.bin_probabilities.size(); ++b) {
        out += format_double(d.bin_edges[b]) + "," + format_double(d.bin_edges[b + 1]) + "," +
               format_double(d.bin_probabilities[b]) + "\n";
    }
    return out;
}

}  // namespace eval
}  // namespace gapcast
