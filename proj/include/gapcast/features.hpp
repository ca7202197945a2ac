#pragma once

#include <string>
#include <vector>

#include "gapcast/common.hpp"
#include "gapcast/dataset.hpp"

namespace gapcast {

// ---------------------------------------------------------------------------
// Lag features with availability constraints
// ---------------------------------------------------------------------------

/// One lag request. availability_delay is the number of hours after which
/// the source series becomes observable: 0 for day-ahead data known at
/// clearing, 12 for real-time prices (and anything derived from them).
struct LagSpec {
    std::string source_column;
    std::vector<int> lags;
    int availability_delay = 0;
};

inline std::string lag_column_name(const std::string& source, int lag) {
    return source + "_lag" + std::to_string(lag);
}

/// Appends a `<source>_lag<k>` column per requested lag. Rows whose lag
/// would index before the table start stay missing and are excluded when
/// the supervised matrix is built. A lag below max(1, availability_delay)
/// would leak unavailable data and is rejected.
inline TimeSeriesTable add_lags(const TimeSeriesTable& table, const std::vector<LagSpec>& specs) {
    TimeSeriesTable out = table;
    const std::size_t n = table.n_rows();
    for (const auto& spec : specs) {
        const Column& src = table.require(spec.source_column);
        const int floor = std::max(1, spec.availability_delay);
        for (int k : spec.lags) {
            if (k < floor)
                fail("LagBelowAvailability",
                     spec.source_column + " lag " + std::to_string(k) + " is below the availability delay " +
                         std::to_string(spec.availability_delay));
            Column col;
            col.name = lag_column_name(spec.source_column, k);
            col.kind = ColumnKind::numeric;
            col.provenance = src.provenance;
            col.values.assign(n, kMissing);
            for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t)
                col.values[t] = src.values[t - static_cast<std::size_t>(k)];
            out.columns.push_back(std::move(col));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Target construction
// ---------------------------------------------------------------------------

inline constexpr const char* kDamColumn = "dam_lmp";
inline constexpr const char* kRtmIntervalPrefix = "rtm_lmp_";
inline constexpr int kRtmIntervals = 12;

/// Hourly RTM price: the mean of the 12 five-minute interval columns.
inline std::vector<double> rtm_hourly_mean(const TimeSeriesTable& table) {
    std::vector<const Column*> intervals;
    for (int k = 1; k <= kRtmIntervals; ++k)
        intervals.push_back(&table.require(kRtmIntervalPrefix + std::to_string(k)));
    std::vector<double> out(table.n_rows());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        double s = 0.0;
        for (const Column* c : intervals) s += c->values[r];
        out[r] = s / static_cast<double>(kRtmIntervals);
    }
    return out;
}

/// gap = DAM minus hourly-mean RTM; "dam" and "rtm" return those series.
inline std::vector<double> build_target(const TimeSeriesTable& table, const std::string& kind) {
    if (kind == "dam") return table.require(kDamColumn).values;
    if (kind == "rtm") return rtm_hourly_mean(table);
    if (kind == "gap") {
        const auto& dam = table.require(kDamColumn).values;
        auto rtm = rtm_hourly_mean(table);
        for (std::size_t r = 0; r < rtm.size(); ++r) rtm[r] = dam[r] - rtm[r];
        return rtm;
    }
    fail("BadConfig", "unknown target kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Min-max scaling (train rows only)
// ---------------------------------------------------------------------------

struct MinMaxScaler {
    std::vector<double> col_min;
    std::vector<double> col_max;

    std::size_t n_cols() const { return col_min.size(); }
};

inline MinMaxScaler fit_scaler(const Matrix& train_rows) {
    if (train_rows.rows == 0 || train_rows.cols == 0) fail("EmptyInput", "fit_scaler on empty matrix");
    MinMaxScaler s;
    s.col_min.assign(train_rows.cols, std::numeric_limits<double>::infinity());
    s.col_max.assign(train_rows.cols, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < train_rows.rows; ++r) {
        for (std::size_t c = 0; c < train_rows.cols; ++c) {
            const double v = train_rows(r, c);
            s.col_min[c] = std::min(s.col_min[c], v);
            s.col_max[c] = std::max(s.col_max[c], v);
        }
    }
    return s;
}

/// (x - min) / (max - min); degenerate columns map to 0. Values outside the
/// training range are not clipped.
inline Matrix transform(const MinMaxScaler& s, const Matrix& rows) {
    if (rows.cols != s.n_cols()) fail("DimensionMismatch", "scaler/matrix column mismatch");
    Matrix out(rows.rows, rows.cols);
    for (std::size_t c = 0; c < rows.cols; ++c) {
        const double range = s.col_max[c] - s.col_min[c];
        for (std::size_t r = 0; r < rows.rows; ++r)
            out(r, c) = range == 0.0 ? 0.0 : (rows(r, c) - s.col_min[c]) / range;
    }
    return out;
}

inline Matrix inverse(const MinMaxScaler& s, const Matrix& rows) {
    if (rows.cols != s.n_cols()) fail("DimensionMismatch", "scaler/matrix column mismatch");
    Matrix out(rows.rows, rows.cols);
    for (std::size_t c = 0; c < rows.cols; ++c) {
        const double range = s.col_max[c] - s.col_min[c];
        for (std::size_t r = 0; r < rows.rows; ++r)
            out(r, c) = s.col_min[c] + rows(r, c) * range;
    }
    return out;
}

// single-series convenience (targets are scaled with a one-column scaler)
inline MinMaxScaler fit_scaler(const std::vector<double>& series) {
    Matrix m(series.size(), 1);
    m.data = series;
    return fit_scaler(m);
}

inline std::vector<double> transform(const MinMaxScaler& s, const std::vector<double>& v) {
    if (s.n_cols() != 1) fail("DimensionMismatch", "expected a one-column scaler");
    const double range = s.col_max[0] - s.col_min[0];
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = range == 0.0 ? 0.0 : (v[i] - s.col_min[0]) / range;
    return out;
}

inline std::vector<double> inverse(const MinMaxScaler& s, const std::vector<double>& v) {
    if (s.n_cols() != 1) fail("DimensionMismatch", "expected a one-column scaler");
    const double range = s.col_max[0] - s.col_min[0];
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = s.col_min[0] + v[i] * range;
    return out;
}

// ---------------------------------------------------------------------------
// Supervised matrices
// ---------------------------------------------------------------------------

struct SupervisedDataset {
    Matrix features;
    std::vector<double> target;
    std::vector<std::string> feature_names;
    std::string target_name;  // gap | dam | rtm
    std::vector<HourStamp> timestamps;

    std::size_t n_rows() const { return target.size(); }
    std::size_t n_features() const { return features.cols; }
};

/// Builds the dense supervised matrix from a cleansed table: materializes the
/// rtm_mean and gap helper series, applies the lag specs, keeps only the lag
/// columns as features and drops leading rows with incomplete lags.
inline SupervisedDataset build_supervised(const TimeSeriesTable& table,
                                          const std::vector<LagSpec>& specs,
                                          const std::string& target_kind) {
    TimeSeriesTable work = table;
    {
        Column rtm_mean;
        rtm_mean.name = "rtm_mean";
        rtm_mean.kind = ColumnKind::numeric;
        rtm_mean.provenance = "derived:rtm";
        rtm_mean.values = rtm_hourly_mean(table);
        Column gap;
        gap.name = "gap";
        gap.kind = ColumnKind::numeric;
        gap.provenance = "derived:rtm";
        gap.values = build_target(table, "gap");
        work.columns.push_back(std::move(rtm_mean));
        work.columns.push_back(std::move(gap));
    }

    const std::size_t base_cols = work.n_cols();
    const TimeSeriesTable lagged = add_lags(work, specs);
    const std::vector<double> target = build_target(table, target_kind);

    int max_lag = 0;
    for (const auto& spec : specs)
        for (int k : spec.lags) max_lag = std::max(max_lag, k);

    const std::size_t n = lagged.n_rows();
    if (static_cast<std::size_t>(max_lag) >= n) fail("EmptyInput", "lags consume every row");
    const std::size_t first = static_cast<std::size_t>(max_lag);

    SupervisedDataset ds;
    ds.target_name = target_kind;
    for (std::size_t c = base_cols; c < lagged.n_cols(); ++c)
        ds.feature_names.push_back(lagged.columns[c].name);
    ds.features = Matrix(n - first, ds.feature_names.size());
    ds.target.reserve(n - first);
    ds.timestamps.reserve(n - first);
    for (std::size_t r = first; r < n; ++r) {
        for (std::size_t c = base_cols; c < lagged.n_cols(); ++c)
            ds.features(r - first, c - base_cols) = lagged.columns[c].values[r];
        ds.target.push_back(target[r]);
        ds.timestamps.push_back(lagged.timestamps[r]);
    }
    return ds;
}

inline SupervisedDataset slice_rows(const SupervisedDataset& ds, std::size_t first, std::size_t count) {
    SupervisedDataset out;
    out.features = submatrix_rows(ds.features, first, count);
    out.target.assign(ds.target.begin() + static_cast<std::ptrdiff_t>(first),
                      ds.target.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.feature_names = ds.feature_names;
    out.target_name = ds.target_name;
    out.timestamps.assign(ds.timestamps.begin() + static_cast<std::ptrdiff_t>(first),
                          ds.timestamps.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
}

/// Chronological split: the earliest floor(n * fraction) rows train, the rest
/// test. Random splitting would leak lagged targets across the boundary.
inline std::pair<SupervisedDataset, SupervisedDataset> split_train_test(const SupervisedDataset& ds,
                                                                        double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail("BadConfig", "train fraction must be in (0,1)");
    const std::size_t n = ds.n_rows();
    const std::size_t n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train == n) fail("TooFewRows", "split leaves an empty partition");
    return {slice_rows(ds, 0, n_train), slice_rows(ds, n_train, n - n_train)};
}

// ---------------------------------------------------------------------------
// Sequence windows for the recurrent learner
// ---------------------------------------------------------------------------

/// samples x lookback x d feature windows; window i covers feature rows
/// [i, i+lookback) and pairs with the target at row i+lookback.
struct SequenceDataset {
    std::vector<Matrix> windows;  // each lookback x d
    std::vector<double> targets;
    std::vector<HourStamp> timestamps;  // of the target rows
    std::size_t lookback = 0;
    std::size_t n_features = 0;

    std::size_t n_samples() const { return targets.size(); }
};

inline SequenceDataset to_sequences(const SupervisedDataset& ds, std::size_t lookback) {
    if (lookback < 1) fail("BadConfig", "lookback must be at least 1");
    if (lookback >= ds.n_rows())
        fail("LookbackTooLong", "lookback " + std::to_string(lookback) + " with only " +
                                    std::to_string(ds.n_rows()) + " rows");
    SequenceDataset out;
    out.lookback = lookback;
    out.n_features = ds.n_features();
    const std::size_t n_samples = ds.n_rows() - lookback;
    out.windows.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Matrix w(lookback, ds.n_features());
        for (std::size_t r = 0; r < lookback; ++r)
            for (std::size_t c = 0; c < ds.n_features(); ++c) w(r, c) = ds.features(i + r, c);
        out.windows.push_back(std::move(w));
        out.targets.push_back(ds.target[i + lookback]);
        out.timestamps.push_back(ds.timestamps[i + lookback]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Causality audit
// ---------------------------------------------------------------------------

/// Availability floor by source class: real-time prices and anything derived
/// from them become observable 12 hours late, everything else one hour late.
inline int availability_floor(const std::string& source_column) {
    if (source_column.rfind("rtm", 0) == 0 || source_column.rfind("gap", 0) == 0) return 12;
    return 1;
}

struct CausalityReport {
    std::size_t columns_checked = 0;
    std::size_t cells_checked = 0;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Independent scan of a built supervised dataset against the raw table:
/// every feature must be named `<source>_lag<k>`, satisfy the availability
/// floor of its source class and reproduce the source value at t-k exactly.
inline CausalityReport audit_causality(const TimeSeriesTable& raw, const SupervisedDataset& ds) {
    CausalityReport report;

    TimeSeriesTable table = raw;
    {
        Column rtm_mean;
        rtm_mean.name = "rtm_mean";
        rtm_mean.values = rtm_hourly_mean(raw);
        Column gap;
        gap.name = "gap";
        gap.values = build_target(raw, "gap");
        table.columns.push_back(std::move(rtm_mean));
        table.columns.push_back(std::move(gap));
    }

    for (std::size_t c = 0; c < ds.feature_names.size(); ++c) {
        const std::string& name = ds.feature_names[c];
        const std::size_t pos = name.rfind("_lag");
        int lag = 0;
        if (pos == std::string::npos || !(std::istringstream(name.substr(pos + 4)) >> lag)) {
            report.violations.push_back(name + ": not a lagged column");
            continue;
        }
        const std::string source = name.substr(0, pos);
        const Column* src = table.find(source);
        if (!src) {
            report.violations.push_back(name + ": unknown source '" + source + "'");
            continue;
        }
        if (lag < availability_floor(source)) {
            report.violations.push_back(name + ": lag " + std::to_string(lag) +
                                        " below availability floor " +
                                        std::to_string(availability_floor(source)));
            continue;
        }
        ++report.columns_checked;
        for (std::size_t r = 0; r < ds.n_rows(); ++r) {
            const HourStamp want = ds.timestamps[r] - lag;
            const auto it = std::lower_bound(table.timestamps.begin(), table.timestamps.end(), want);
            if (it == table.timestamps.end() || *it != want) {
                report.violations.push_back(name + ": source hour missing at row " + std::to_string(r));
                break;
            }
            const std::size_t sr = static_cast<std::size_t>(it - table.timestamps.begin());
            if (ds.features(r, c) != src->values[sr]) {
                report.violations.push_back(name + ": cell mismatch at row " + std::to_string(r));
                break;
            }
            ++report.cells_checked;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Shipped default lag menu
// ---------------------------------------------------------------------------

inline std::vector<int> lag_range(int lo, int hi) {
    std::vector<int> out;
    for (int k = lo; k <= hi; ++k) out.push_back(k);
    return out;
}

/// Default menu: DAM lags 1-48, every RTM interval at lags 12-48, the gap at
/// lags 12-48, and each exogenous column at lag 1.
inline std::vector<LagSpec> default_lag_menu(const TimeSeriesTable& table) {
    std::vector<LagSpec> specs;
    specs.push_back({kDamColumn, lag_range(1, 48), 0});
    for (int k = 1; k <= kRtmIntervals; ++k)
        specs.push_back({kRtmIntervalPrefix + std::to_string(k), lag_range(12, 48), 12});
    specs.push_back({"gap", lag_range(12, 48), 12});
    for (const auto& c : table.columns) {
        if (c.name == kDamColumn || c.name.rfind(kRtmIntervalPrefix, 0) == 0) continue;
        specs.push_back({c.name, {1}, 0});
    }
    return specs;
}

}  // namespace gapcast
