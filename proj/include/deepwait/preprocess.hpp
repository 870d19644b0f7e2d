#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "deepwait/csv.hpp"
#include "deepwait/error.hpp"
#include "deepwait/survival.hpp"

namespace deepwait {

// %.17g round-trips IEEE doubles exactly through strtod.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0'))
        throw IoError(context + ": cannot parse '" + s + "' as a number");
    return v;
}

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

enum class ColumnType { numeric, categorical };

struct ColumnSpec {
    std::string name;
    ColumnType type = ColumnType::numeric;
    std::vector<std::string> levels;  // categorical only, declared order
};

/**
 * Column declarations for a CSV file. Text format, one declaration per line:
 *
 *     duration: wait_time
 *     event: crossed
 *     numeric: speed_limit
 *     categorical: road_type = One-Way | Two-Way | Two-Way with Median
 *
 * Feature order follows declaration order. '#' starts a comment line.
 */
struct TableSchema {
    std::vector<ColumnSpec> columns;
    std::string duration_column;
    std::string event_column;

    void validate() const {
        if (duration_column.empty()) throw ValidationError("schema: no duration column declared");
        if (event_column.empty()) throw ValidationError("schema: no event column declared");
        std::unordered_set<std::string> seen{duration_column, event_column};
        for (const auto& col : columns) {
            if (!seen.insert(col.name).second)
                throw ValidationError("schema: column '" + col.name + "' declared twice");
            if (col.type == ColumnType::categorical) {
                if (col.levels.size() < 2)
                    throw ValidationError("schema: categorical column '" + col.name +
                                          "' needs at least two levels");
                std::unordered_set<std::string> lv;
                for (const auto& level : col.levels)
                    if (!lv.insert(level).second)
                        throw ValidationError("schema: duplicate level '" + level + "' in column '" +
                                              col.name + "'");
            }
        }
    }

    static TableSchema parse(std::istream& in) {
        TableSchema schema;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line = trim(line);
            if (line.empty() || line[0] == '#') continue;
            const auto colon = line.find(':');
            if (colon == std::string::npos)
                throw IoError("schema line " + std::to_string(line_no) + ": expected 'key: value'");
            const std::string key = trim(line.substr(0, colon));
            const std::string value = trim(line.substr(colon + 1));
            if (key == "duration") {
                schema.duration_column = value;
            } else if (key == "event") {
                schema.event_column = value;
            } else if (key == "numeric") {
                schema.columns.push_back({value, ColumnType::numeric, {}});
            } else if (key == "categorical") {
                const auto eq = value.find('=');
                if (eq == std::string::npos)
                    throw IoError("schema line " + std::to_string(line_no) +
                                  ": categorical needs 'name = level | level | ...'");
                ColumnSpec col{trim(value.substr(0, eq)), ColumnType::categorical, {}};
                std::string rest = value.substr(eq + 1);
                std::size_t pos = 0;
                while (pos <= rest.size()) {
                    const auto bar = rest.find('|', pos);
                    col.levels.push_back(trim(rest.substr(pos, bar == std::string::npos
                                                                   ? std::string::npos
                                                                   : bar - pos)));
                    if (bar == std::string::npos) break;
                    pos = bar + 1;
                }
                schema.columns.push_back(std::move(col));
            } else {
                throw IoError("schema line " + std::to_string(line_no) + ": unknown key '" + key +
                              "'");
            }
        }
        schema.validate();
        return schema;
    }

    static TableSchema load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open schema '" + path.string() + "'");
        return parse(in);
    }
};

struct RawColumn {
    ColumnSpec spec;
    std::vector<double> numeric;   // numeric columns
    std::vector<int> level_index;  // categorical columns, index into spec.levels
};

/** Typed table with duration/event columns pulled out. */
struct RawTable {
    std::vector<RawColumn> columns;
    std::vector<double> durations;
    std::vector<int> events;
    std::vector<std::size_t> dropped_rows;  // 1-based CSV line numbers with missing duration/event

    std::size_t n_rows() const { return durations.size(); }
};

/**
 * Reads a CSV against a schema. Rows whose duration or event cell is empty
 * are dropped and reported in `dropped_rows`; any other malformed cell is an
 * error naming its row and column.
 */
inline RawTable load_table(const std::filesystem::path& csv_path, const TableSchema& schema) {
    schema.validate();
    const CsvTable csv = read_csv(csv_path);

    auto require_column = [&](const std::string& name) {
        const int idx = csv.column_index(name);
        if (idx < 0)
            throw ValidationError("column '" + name + "' declared in schema but missing from '" +
                                  csv_path.string() + "'");
        return idx;
    };
    const int dur_idx = require_column(schema.duration_column);
    const int ev_idx = require_column(schema.event_column);
    std::vector<int> col_idx;
    for (const auto& col : schema.columns) col_idx.push_back(require_column(col.name));

    RawTable table;
    for (const auto& col : schema.columns) table.columns.push_back({col, {}, {}});

    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::size_t line_no = r + 2;  // header is line 1
        if (trim(row[dur_idx]).empty() || trim(row[ev_idx]).empty()) {
            table.dropped_rows.push_back(line_no);
            continue;
        }
        auto cell_context = [&](const std::string& col) {
            return "row " + std::to_string(line_no) + ", column '" + col + "'";
        };
        const double duration =
            parse_double(trim(row[dur_idx]), cell_context(schema.duration_column));
        if (!std::isfinite(duration) || duration <= 0.0)
            throw ValidationError(cell_context(schema.duration_column) +
                                  ": duration must be positive, got '" + row[dur_idx] + "'");
        const std::string ev_cell = trim(row[ev_idx]);
        if (ev_cell != "0" && ev_cell != "1")
            throw ValidationError(cell_context(schema.event_column) +
                                  ": event must be 0 or 1, got '" + row[ev_idx] + "'");
        table.durations.push_back(duration);
        table.events.push_back(ev_cell == "1" ? 1 : 0);

        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const std::string cell = trim(row[col_idx[c]]);
            auto& column = table.columns[c];
            if (column.spec.type == ColumnType::numeric) {
                column.numeric.push_back(parse_double(cell, cell_context(column.spec.name)));
            } else {
                const auto it =
                    std::find(column.spec.levels.begin(), column.spec.levels.end(), cell);
                if (it == column.spec.levels.end()) {
                    std::string allowed;
                    for (const auto& level : column.spec.levels)
                        allowed += (allowed.empty() ? "" : ", ") + level;
                    throw ValidationError(cell_context(column.spec.name) + ": value '" + cell +
                                          "' not in declared levels [" + allowed + "]");
                }
                column.level_index.push_back(
                    static_cast<int>(it - column.spec.levels.begin()));
            }
        }
    }
    return table;
}

struct NumericEncoding {
    std::string column;
    double mean = 0.0;
    double stddev = 1.0;  // sample standard deviation
};

struct CategoricalEncoding {
    std::string column;
    std::string reference;                 // dropped level
    std::vector<std::string> levels;       // emitted levels, declared order minus reference
    std::vector<std::string> emitted_names;  // "column: level"
};

/**
 * Frozen encoding: per numeric column the standardization statistics, per
 * categorical column the reference level and emitted one-hot columns.
 * Applying a saved spec to new data reuses the saved statistics.
 */
struct EncodingSpec {
    std::vector<std::string> column_order;  // schema order, for emit ordering
    std::vector<NumericEncoding> numeric;
    std::vector<CategoricalEncoding> categorical;

    std::vector<std::string> feature_names() const {
        std::vector<std::string> names;
        for (const auto& col : column_order) {
            if (const auto* n = find_numeric(col)) {
                names.push_back(n->column);
            } else if (const auto* c = find_categorical(col)) {
                names.insert(names.end(), c->emitted_names.begin(), c->emitted_names.end());
            }
        }
        return names;
    }

    const NumericEncoding* find_numeric(const std::string& name) const {
        for (const auto& n : numeric)
            if (n.column == name) return &n;
        return nullptr;
    }
    const CategoricalEncoding* find_categorical(const std::string& name) const {
        for (const auto& c : categorical)
            if (c.column == name) return &c;
        return nullptr;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write encoding spec '" + path.string() + "'");
        out << "deepwait-encoding v1\n";
        for (const auto& col : column_order) {
            if (const auto* n = find_numeric(col)) {
                out << "column " << n->column << "\n";
                out << "type numeric\n";
                out << "mean " << format_double(n->mean) << "\n";
                out << "stddev " << format_double(n->stddev) << "\n";
            } else if (const auto* c = find_categorical(col)) {
                out << "column " << c->column << "\n";
                out << "type categorical\n";
                out << "reference " << c->reference << "\n";
                for (const auto& level : c->levels) out << "level " << level << "\n";
            }
        }
        if (!out) throw IoError("failed writing '" + path.string() + "'");
    }

    static EncodingSpec load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open encoding spec '" + path.string() + "'");
        std::string line;
        if (!std::getline(in, line) || trim(line) != "deepwait-encoding v1")
            throw IoError("'" + path.string() + "': not a deepwait-encoding v1 file");
        EncodingSpec spec;
        std::string cur_column;
        std::string cur_type;
        auto finish = [&]() {
            cur_column.clear();
            cur_type.clear();
        };
        while (std::getline(in, line)) {
            line = trim(line);
            if (line.empty()) continue;
            const auto space = line.find(' ');
            const std::string key = line.substr(0, space);
            const std::string value = space == std::string::npos ? "" : trim(line.substr(space + 1));
            if (key == "column") {
                finish();
                cur_column = value;
                spec.column_order.push_back(value);
            } else if (key == "type") {
                cur_type = value;
                if (value == "numeric")
                    spec.numeric.push_back({cur_column, 0.0, 1.0});
                else if (value == "categorical")
                    spec.categorical.push_back({cur_column, "", {}, {}});
                else
                    throw IoError("'" + path.string() + "': unknown column type '" + value + "'");
            } else if (key == "mean") {
                spec.numeric.back().mean = parse_double(value, "encoding mean");
            } else if (key == "stddev") {
                spec.numeric.back().stddev = parse_double(value, "encoding stddev");
            } else if (key == "reference") {
                spec.categorical.back().reference = value;
            } else if (key == "level") {
                spec.categorical.back().levels.push_back(value);
                spec.categorical.back().emitted_names.push_back(cur_column + ": " + value);
            } else {
                throw IoError("'" + path.string() + "': unknown key '" + key + "'");
            }
        }
        return spec;
    }
};

/** Applies a frozen encoding; statistics are taken from the spec, not the data. */
inline SurvivalDataset encode_with(const RawTable& table, const EncodingSpec& spec) {
    const std::size_t n = table.n_rows();
    std::vector<std::string> names = spec.feature_names();
    {
        std::unordered_set<std::string> seen;
        for (const auto& name : names)
            if (!seen.insert(name).second)
                throw ValidationError("encoded feature name collision: '" + name + "'");
    }

    SurvivalDataset data;
    data.feature_names = names;
    data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
    data.durations = Eigen::Map<const Vector>(table.durations.data(), static_cast<Eigen::Index>(n));
    data.events.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) data.events[static_cast<Eigen::Index>(i)] = table.events[i];

    Eigen::Index out_col = 0;
    for (const auto& col_name : spec.column_order) {
        const RawColumn* raw = nullptr;
        for (const auto& col : table.columns)
            if (col.spec.name == col_name) raw = &col;
        if (!raw)
            throw ValidationError("encoding spec column '" + col_name + "' missing from table");

        if (const auto* ne = spec.find_numeric(col_name)) {
            if (raw->spec.type != ColumnType::numeric)
                throw ValidationError("column '" + col_name + "' type mismatch with encoding spec");
            if (!(ne->stddev > 0.0))
                throw ValidationError("encoding spec stddev for '" + col_name +
                                      "' must be positive");
            for (std::size_t i = 0; i < n; ++i)
                data.features(static_cast<Eigen::Index>(i), out_col) =
                    (raw->numeric[i] - ne->mean) / ne->stddev;
            ++out_col;
        } else if (const auto* ce = spec.find_categorical(col_name)) {
            if (raw->spec.type != ColumnType::categorical)
                throw ValidationError("column '" + col_name + "' type mismatch with encoding spec");
            for (std::size_t k = 0; k < ce->levels.size(); ++k) {
                const auto it = std::find(raw->spec.levels.begin(), raw->spec.levels.end(),
                                          ce->levels[k]);
                if (it == raw->spec.levels.end())
                    throw ValidationError("encoding spec level '" + ce->levels[k] +
                                          "' unknown for column '" + col_name + "'");
                const int level = static_cast<int>(it - raw->spec.levels.begin());
                for (std::size_t i = 0; i < n; ++i)
                    data.features(static_cast<Eigen::Index>(i), out_col + static_cast<Eigen::Index>(k)) =
                        raw->level_index[i] == level ? 1.0 : 0.0;
            }
            out_col += static_cast<Eigen::Index>(ce->levels.size());
        }
    }
    return data;
}

/**
 * One-hot encodes categorical columns (reference = first declared level,
 * dropped) and z-scores numeric columns with sample standard deviation.
 * The returned spec reproduces this dataset bit-for-bit via encode_with.
 */
inline std::pair<SurvivalDataset, EncodingSpec> encode(const RawTable& table) {
    if (table.n_rows() < 2) throw ValidationError("encode: need at least two rows");
    EncodingSpec spec;
    for (const auto& col : table.columns) {
        spec.column_order.push_back(col.spec.name);
        if (col.spec.type == ColumnType::numeric) {
            const double n = static_cast<double>(col.numeric.size());
            double mean = 0.0;
            for (double v : col.numeric) mean += v;
            mean /= n;
            double ss = 0.0;
            for (double v : col.numeric) ss += (v - mean) * (v - mean);
            const double sd = std::sqrt(ss / (n - 1.0));
            if (!(sd > 0.0))
                throw ValidationError("numeric column '" + col.spec.name +
                                      "' is constant; drop it or fix the data");
            spec.numeric.push_back({col.spec.name, mean, sd});
        } else {
            CategoricalEncoding enc;
            enc.column = col.spec.name;
            enc.reference = col.spec.levels.front();
            for (std::size_t k = 1; k < col.spec.levels.size(); ++k) {
                enc.levels.push_back(col.spec.levels[k]);
                enc.emitted_names.push_back(col.spec.name + ": " + col.spec.levels[k]);
            }
            spec.categorical.push_back(std::move(enc));
        }
    }
    return {encode_with(table, spec), spec};
}

struct LevelMean {
    std::string variable;
    std::string level;
    std::size_t count = 0;
    std::optional<double> mean;  // absent when the level has no rows
};

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

struct Description {
    std::vector<LevelMean> level_means;
    std::vector<HistogramBin> histogram;
    double bin_width = 1.0;
};

/** Mean waiting time per categorical level plus a duration histogram. */
inline Description describe(const RawTable& table, double bin_width = 1.0) {
    if (!(bin_width > 0.0)) throw ValidationError("describe: bin width must be positive");
    Description out;
    out.bin_width = bin_width;
    for (const auto& col : table.columns) {
        if (col.spec.type != ColumnType::categorical) continue;
        for (std::size_t level = 0; level < col.spec.levels.size(); ++level) {
            LevelMean lm;
            lm.variable = col.spec.name;
            lm.level = col.spec.levels[level];
            double sum = 0.0;
            for (std::size_t i = 0; i < table.n_rows(); ++i) {
                if (col.level_index[i] == static_cast<int>(level)) {
                    ++lm.count;
                    sum += table.durations[i];
                }
            }
            if (lm.count > 0) lm.mean = sum / static_cast<double>(lm.count);
            out.level_means.push_back(std::move(lm));
        }
    }
    double max_duration = 0.0;
    for (double t : table.durations) max_duration = std::max(max_duration, t);
    const std::size_t n_bins =
        table.n_rows() == 0 ? 0 : static_cast<std::size_t>(std::floor(max_duration / bin_width)) + 1;
    out.histogram.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        out.histogram[b].lower = static_cast<double>(b) * bin_width;
        out.histogram[b].upper = static_cast<double>(b + 1) * bin_width;
    }
    for (double t : table.durations)
        ++out.histogram[static_cast<std::size_t>(std::floor(t / bin_width))].count;
    return out;
}

}  // namespace deepwait
