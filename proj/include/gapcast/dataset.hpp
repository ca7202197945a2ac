#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcast/common.hpp"

namespace gapcast {

enum class ColumnKind { numeric, categorical, datetime };

inline std::string to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::datetime: return "datetime";
    }
    return "numeric";
}

inline ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "datetime") return ColumnKind::datetime;
    fail("BadConfig", "unknown column kind '" + s + "'");
}

/// Declared layout of one CSV column. For categorical columns the
/// category map assigns consecutive integer codes in first-appearance order.
struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<std::string> category_map;  // code -> label, present iff categorical

    int encode(const std::string& label) {
        for (std::size_t i = 0; i < category_map.size(); ++i)
            if (category_map[i] == label) return static_cast<int>(i);
        category_map.push_back(label);
        return static_cast<int>(category_map.size()) - 1;
    }

    const std::string& decode(int code) const { return category_map.at(static_cast<std::size_t>(code)); }
};

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<double> values;              // NaN marks a missing cell
    std::vector<std::string> categories;     // code -> label for categorical columns
    std::string provenance;                  // free-form source tag
};

/// Hourly timestamp-indexed numeric table; the canonical merged dataset.
/// After cleanse() the timestamps are strictly increasing with one-hour
/// spacing and every cell is finite.
struct TimeSeriesTable {
    std::vector<HourStamp> timestamps;
    std::vector<Column> columns;

    std::size_t n_rows() const { return timestamps.size(); }
    std::size_t n_cols() const { return columns.size(); }

    const Column* find(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return &c;
        return nullptr;
    }

    const Column& require(const std::string& name) const {
        const Column* c = find(name);
        if (!c) fail("MissingColumn", "column '" + name + "' not found");
        return *c;
    }
};

// ---------------------------------------------------------------------------
// RFC-4180 CSV parsing
// ---------------------------------------------------------------------------

namespace csv {

/// Splits the whole file into records, honoring quoted fields with embedded
/// commas, escaped quotes ("") and newlines.
inline std::vector<std::vector<std::string>> parse(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"': in_quotes = true; any = true; break;
            case ',': record.push_back(std::move(field)); field.clear(); any = true; break;
            case '\r': break;
            case '\n':
                if (any || !field.empty() || !record.empty()) {
                    record.push_back(std::move(field));
                    field.clear();
                    records.push_back(std::move(record));
                    record.clear();
                    any = false;
                }
                break;
            default: field += c; any = true; break;
        }
    }
    if (any || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace csv

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("MissingFile", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& body) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("MissingFile", "cannot write '" + path + "'");
    out << body;
}

// ---------------------------------------------------------------------------
// load_csv
// ---------------------------------------------------------------------------

/// Loads a CSV file against a declared schema. Rows keep file order;
/// categorical cells are encoded by first appearance; unparseable numeric
/// cells become missing. Exactly one schema entry must be the datetime key.
inline TimeSeriesTable load_csv(const std::string& path, std::vector<ColumnSchema> schema) {
    const std::string text = read_file(path);
    auto records = csv::parse(text);
    if (records.empty()) fail("EmptyFile", "'" + path + "' has no content");
    if (records.size() == 1) fail("EmptyFile", "'" + path + "' has a header but no rows");

    std::size_t dt_schema = schema.size();
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].kind == ColumnKind::datetime) {
            if (dt_schema != schema.size()) fail("BadConfig", "schema declares two datetime columns");
            dt_schema = i;
        }
    }
    if (dt_schema == schema.size()) fail("BadConfig", "schema declares no datetime column");

    const auto& header = records[0];
    std::vector<std::size_t> file_index(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
        auto it = std::find(header.begin(), header.end(), schema[i].name);
        if (it == header.end())
            fail("MissingColumn", "'" + schema[i].name + "' absent from header of '" + path + "'");
        file_index[i] = static_cast<std::size_t>(it - header.begin());
    }

    TimeSeriesTable table;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (i == dt_schema) continue;
        Column col;
        col.name = schema[i].name;
        col.kind = schema[i].kind;
        col.provenance = path;
        table.columns.push_back(std::move(col));
    }

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::size_t row = r - 1;
        if (file_index[dt_schema] >= rec.size())
            fail("BadDatetime", "row " + std::to_string(row) + " of '" + path + "' is short");
        HourStamp t;
        if (!parse_hour(rec[file_index[dt_schema]], t))
            fail("BadDatetime", "row " + std::to_string(row) + " of '" + path + "': '" +
                                    rec[file_index[dt_schema]] + "'");
        table.timestamps.push_back(t);

        std::size_t out = 0;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            if (i == dt_schema) continue;
            Column& col = table.columns[out++];
            const std::string cell =
                file_index[i] < rec.size() ? rec[file_index[i]] : std::string();
            if (cell.empty()) {
                col.values.push_back(kMissing);
                continue;
            }
            if (schema[i].kind == ColumnKind::categorical) {
                col.values.push_back(static_cast<double>(schema[i].encode(cell)));
            } else {
                double v;
                col.values.push_back(parse_double(cell, v) ? v : kMissing);
            }
        }
    }

    std::size_t out = 0;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (i == dt_schema) continue;
        table.columns[out++].categories = schema[i].category_map;
    }
    return table;
}

// ---------------------------------------------------------------------------
// merge_on_datetime
// ---------------------------------------------------------------------------

/// Aligns tables on the hourly key over the union of hours. Cells outside a
/// source's span are marked missing. Column order is the concatenation of
/// the input orders; a single table passes through unchanged.
inline TimeSeriesTable merge_on_datetime(const std::vector<TimeSeriesTable>& tables) {
    if (tables.empty()) fail("EmptyInput", "merge_on_datetime needs at least one table");
    if (tables.size() == 1) return tables[0];

    std::vector<std::string> seen;
    for (const auto& t : tables) {
        for (const auto& c : t.columns) {
            if (std::find(seen.begin(), seen.end(), c.name) != seen.end())
                fail("DuplicateColumn", "'" + c.name + "' appears in more than one table");
            seen.push_back(c.name);
        }
    }

    std::vector<HourStamp> hours;
    for (const auto& t : tables) hours.insert(hours.end(), t.timestamps.begin(), t.timestamps.end());
    std::sort(hours.begin(), hours.end());
    hours.erase(std::unique(hours.begin(), hours.end()), hours.end());

    TimeSeriesTable out;
    out.timestamps = hours;
    for (const auto& t : tables) {
        // first occurrence wins when a source repeats an hour
        std::map<HourStamp, std::size_t> row_of;
        for (std::size_t r = 0; r < t.n_rows(); ++r) row_of.emplace(t.timestamps[r], r);
        for (const auto& c : t.columns) {
            Column col;
            col.name = c.name;
            col.kind = c.kind;
            col.categories = c.categories;
            col.provenance = c.provenance;
            col.values.reserve(hours.size());
            for (HourStamp h : hours) {
                auto it = row_of.find(h);
                col.values.push_back(it == row_of.end() ? kMissing : c.values[it->second]);
            }
            out.columns.push_back(std::move(col));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// cleanse
// ---------------------------------------------------------------------------

/// Dedupes timestamps (first kept), restricts to [start, end], materializes
/// missing hours and replaces every missing cell with the fill constant.
inline TimeSeriesTable cleanse(const TimeSeriesTable& table, double fill_constant,
                               HourStamp start, HourStamp end) {
    if (start >= end) fail("EmptySpan", "span start must precede end");

    std::map<HourStamp, std::size_t> row_of;
    std::size_t inside = 0;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        const HourStamp t = table.timestamps[r];
        if (t < start || t > end) continue;
        ++inside;
        row_of.emplace(t, r);  // keeps the first occurrence
    }
    if (inside == 0) fail("EmptySpan", "no rows fall inside the requested span");

    TimeSeriesTable out;
    const std::size_t n = static_cast<std::size_t>(end - start) + 1;
    out.timestamps.reserve(n);
    for (HourStamp t = start; t <= end; ++t) out.timestamps.push_back(t);

    for (const auto& c : table.columns) {
        Column col;
        col.name = c.name;
        col.kind = c.kind;
        col.categories = c.categories;
        col.provenance = c.provenance;
        col.values.reserve(n);
        for (HourStamp t = start; t <= end; ++t) {
            auto it = row_of.find(t);
            double v = it == row_of.end() ? kMissing : c.values[it->second];
            if (is_missing(v) || !std::isfinite(v)) v = fill_constant;
            col.values.push_back(v);
        }
        out.columns.push_back(std::move(col));
    }
    return out;
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

/// Synthetic market/weather generator for desk-scale experiments. The RTM
/// series tracks the DAM series plus weather-coupled drift and sparse spikes
/// so the gap target has learnable structure.
struct SynthConfig {
    std::size_t hours = 8760;
    std::uint64_t seed = 1;
    double dam_base = 38.0;          // $/MWh
    double rtm_base = 35.0;          // $/MWh
    double daily_amplitude = 12.0;   // $/MWh
    double spike_rate = 0.005;       // probability per hour
    double spike_scale = 60.0;       // $/MWh
    double weather_coupling = 0.6;   // links weather channels into the gap
    double missing_rate = 0.0;       // probability a cell is blanked
};

namespace detail {

inline void synth_validate(const SynthConfig& cfg) {
    if (cfg.hours < 48) fail("BadConfig", "synthesize needs at least 48 hours");
    if (cfg.spike_rate < 0.0 || cfg.spike_rate > 1.0) fail("BadConfig", "spike_rate outside [0,1]");
    if (cfg.missing_rate < 0.0 || cfg.missing_rate > 1.0) fail("BadConfig", "missing_rate outside [0,1]");
}

}  // namespace detail

inline TimeSeriesTable synthesize(const SynthConfig& cfg) {
    detail::synth_validate(cfg);
    const std::size_t n = cfg.hours;
    const HourStamp start = make_hour(2017, 1, 1, 0);
    constexpr double tau = 6.283185307179586;

    Rng weather_rng = Rng(cfg.seed).child(1);
    Rng price_rng = Rng(cfg.seed).child(2);
    Rng spike_rng = Rng(cfg.seed).child(3);
    Rng miss_rng = Rng(cfg.seed).child(4);

    std::vector<double> temperature(n), humidity(n), wind_speed(n), wind_direction(n);
    std::vector<double> zenith(n), ghi(n), dni(n), dhi(n), cloud(n);
    std::vector<double> demand(n), demand_fc_da(n), demand_fc_2d(n);
    std::vector<double> dam(n);
    std::vector<std::vector<double>> rtm(12, std::vector<double>(n));

    double temp_ar = 0.0, wind_ar = 6.0, cloud_ar = 0.3, price_ar = 0.0, gap_ar = 0.0;
    double wind_dir = 210.0;

    for (std::size_t t = 0; t < n; ++t) {
        const double hour = static_cast<double>((start + static_cast<HourStamp>(t)) % 24);
        const double day = static_cast<double>(t) / 24.0;

        temp_ar = 0.92 * temp_ar + weather_rng.normal() * 1.1;
        const double season = 7.0 * std::sin(tau * day / 365.0 - 1.2);
        const double diurnal = 5.5 * std::sin(tau * (hour - 9.0) / 24.0);
        temperature[t] = 18.0 + season + diurnal + temp_ar;

        humidity[t] = std::clamp(68.0 - 1.8 * (temperature[t] - 18.0) + weather_rng.normal() * 6.0, 5.0, 100.0);

        wind_ar = 0.9 * wind_ar + 0.1 * 6.0 + weather_rng.normal() * 0.8;
        wind_speed[t] = std::max(0.0, wind_ar);
        wind_dir += weather_rng.normal() * 14.0;
        while (wind_dir < 0.0) wind_dir += 360.0;
        while (wind_dir >= 360.0) wind_dir -= 360.0;
        wind_direction[t] = wind_dir;

        cloud_ar = std::clamp(0.85 * cloud_ar + 0.15 * 0.3 + weather_rng.normal() * 0.09, 0.0, 1.0);
        cloud[t] = cloud_ar;

        const double elevation = std::sin(tau * (hour - 6.0) / 24.0);  // >0 during daytime
        zenith[t] = 90.0 - 72.0 * std::max(0.0, elevation) + 3.0 * std::max(0.0, -elevation);
        const double clear_sky = 950.0 * std::max(0.0, elevation);
        ghi[t] = clear_sky * (1.0 - 0.72 * cloud[t]);
        dni[t] = clear_sky * (1.0 - 0.95 * cloud[t]);
        dhi[t] = std::max(0.0, ghi[t] - dni[t] * std::max(0.0, elevation));

        const double workday = (static_cast<std::size_t>(day) % 7 < 5) ? 1.0 : 0.86;
        const double demand_shape =
            0.75 + 0.2 * std::sin(tau * (hour - 11.0) / 24.0) + 0.1 * std::sin(2.0 * tau * (hour - 19.0) / 24.0);
        demand[t] = 2400.0 * workday * demand_shape + 14.0 * std::max(0.0, temperature[t] - 22.0) +
                    weather_rng.normal() * 25.0;
        demand_fc_da[t] = demand[t] + weather_rng.normal() * 40.0;
        demand_fc_2d[t] = demand[t] + weather_rng.normal() * 70.0;

        price_ar = 0.85 * price_ar + price_rng.normal() * 1.4;
        const double daily_price = cfg.daily_amplitude * (0.6 * std::sin(tau * (hour - 13.0) / 24.0) +
                                                          0.4 * std::sin(2.0 * tau * (hour - 18.5) / 24.0));
        dam[t] = cfg.dam_base + daily_price + 0.012 * (demand[t] - 2200.0) + price_ar;

        // gap driver: weather-coupled, slowly varying and daily-periodic, so
        // lagged weather and gap features carry real signal
        gap_ar = 0.9 * gap_ar + price_rng.normal() * 0.7;
        const double solar_drive = (90.0 - zenith[t]) / 72.0;  // 0 at night, ~1 at solar noon
        double rtm_offset = (cfg.rtm_base - cfg.dam_base) +
                            cfg.weather_coupling * (6.0 * solar_drive - 0.35 * (temperature[t] - 18.0) +
                                                    2.2 * std::sin(tau * (hour - 16.0) / 24.0)) +
                            gap_ar;
        if (cfg.spike_rate > 0.0 && spike_rng.uniform01() < cfg.spike_rate) {
            const double magnitude = cfg.spike_scale * (0.5 + spike_rng.uniform01());
            rtm_offset += (spike_rng.uniform01() < 0.7 ? magnitude : -magnitude);
        }
        const double rtm_hour = dam[t] + rtm_offset;
        for (std::size_t k = 0; k < 12; ++k) {
            const double intra = 0.8 * std::sin(tau * static_cast<double>(k) / 12.0);
            rtm[k][t] = rtm_hour + intra + price_rng.normal() * 0.5;
        }
    }

    TimeSeriesTable table;
    table.timestamps.resize(n);
    for (std::size_t t = 0; t < n; ++t) table.timestamps[t] = start + static_cast<HourStamp>(t);

    auto push = [&](const std::string& name, std::vector<double> v, const std::string& prov) {
        Column c;
        c.name = name;
        c.kind = ColumnKind::numeric;
        c.values = std::move(v);
        c.provenance = prov;
        table.columns.push_back(std::move(c));
    };

    push("dam_lmp", std::move(dam), "synth:market");
    for (std::size_t k = 0; k < 12; ++k)
        push("rtm_lmp_" + std::to_string(k + 1), std::move(rtm[k]), "synth:market");
    push("demand_fc_da", std::move(demand_fc_da), "synth:market");
    push("demand_fc_2d", std::move(demand_fc_2d), "synth:market");
    push("temperature", std::move(temperature), "synth:weather");
    push("humidity", std::move(humidity), "synth:weather");
    push("wind_speed", std::move(wind_speed), "synth:weather");
    push("wind_direction", std::move(wind_direction), "synth:weather");
    push("solar_zenith", std::move(zenith), "synth:solar");
    push("ghi", std::move(ghi), "synth:solar");
    push("dni", std::move(dni), "synth:solar");
    push("dhi", std::move(dhi), "synth:solar");
    push("cloud_layer", std::move(cloud), "synth:weather");

    if (cfg.missing_rate > 0.0) {
        for (auto& c : table.columns)
            for (auto& v : c.values)
                if (miss_rng.uniform01() < cfg.missing_rate) v = kMissing;
    }
    return table;
}

// ---------------------------------------------------------------------------
// Canonical table serialization: CSV + JSON schema sidecar
// ---------------------------------------------------------------------------

inline void write_canonical(const TimeSeriesTable& table, const std::string& csv_path,
                            const std::string& schema_path, double fill_constant) {
    std::string body = "datetime";
    for (const auto& c : table.columns) body += "," + csv::quote(c.name);
    body += '\n';
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        body += format_hour(table.timestamps[r]);
        for (const auto& c : table.columns) {
            body += ',';
            if (!is_missing(c.values[r])) body += format_double(c.values[r]);
        }
        body += '\n';
    }
    write_file(csv_path, body);

    nlohmann::json schema;
    schema["fill_constant"] = fill_constant;
    schema["columns"] = nlohmann::json::array();
    for (const auto& c : table.columns) {
        nlohmann::json jc;
        jc["name"] = c.name;
        jc["kind"] = to_string(c.kind);
        jc["provenance"] = c.provenance;
        if (c.kind == ColumnKind::categorical) jc["category_map"] = c.categories;
        schema["columns"].push_back(jc);
    }
    write_file(schema_path, schema.dump(2) + "\n");
}

struct CanonicalTable {
    TimeSeriesTable table;
    double fill_constant = -999.0;
};

inline CanonicalTable read_canonical(const std::string& csv_path, const std::string& schema_path) {
    nlohmann::json schema = nlohmann::json::parse(read_file(schema_path));
    CanonicalTable out;
    out.fill_constant = schema.at("fill_constant").get<double>();

    // categorical cells are already integer codes in canonical form, so every
    // column loads as numeric and the category map is re-attached afterwards
    std::vector<ColumnSchema> cols;
    cols.push_back({"datetime", ColumnKind::datetime, {}});
    struct Meta {
        ColumnKind kind;
        std::vector<std::string> categories;
        std::string provenance;
    };
    std::vector<Meta> metas;
    for (const auto& jc : schema.at("columns")) {
        Meta m;
        m.kind = column_kind_from_string(jc.at("kind").get<std::string>());
        if (jc.contains("category_map"))
            m.categories = jc.at("category_map").get<std::vector<std::string>>();
        m.provenance = jc.value("provenance", std::string());
        metas.push_back(std::move(m));
        cols.push_back({jc.at("name").get<std::string>(), ColumnKind::numeric, {}});
    }
    out.table = load_csv(csv_path, cols);
    for (std::size_t i = 0; i < out.table.columns.size(); ++i) {
        out.table.columns[i].kind = metas[i].kind;
        out.table.columns[i].categories = metas[i].categories;
        out.table.columns[i].provenance = metas[i].provenance;
    }
    return out;
}

}  // namespace gapcast
