#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "persreg/core_model.hpp"
#include "persreg/covariates.hpp"
#include "persreg/error.hpp"
#include "persreg/simulator.hpp"

namespace persreg::io {

using nlohmann::json;

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw Error("could not format number");
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw ValidationError("cannot parse '" + s + "' as a number (" + where + ")");
    return v;
}

// ---------------------------------------------------------------- CSV

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ValidationError("unterminated quote in " + where);
    fields.push_back(std::move(cur));
    return fields;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "' for reading");
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty (a header row is required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split_csv_line(line, path + ":1");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line, path + ":" + std::to_string(lineno));
        if (fields.size() != t.header.size()) {
            throw ValidationError(path + ":" + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                                  " fields, header has " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += quote_field(fields[i]);
    }
    return out + '\n';
}

/// Matrix with one CSV row per matrix row.
inline std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
    detail::require(static_cast<Index>(header.size()) == m.cols(), "CSV header width does not match the matrix");
    std::string out = csv_line(header);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline std::vector<std::string> numbered(const std::string& prefix, Index count) {
    std::vector<std::string> names;
    for (Index i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i));
    return names;
}

inline Eigen::MatrixXd csv_to_matrix(const CsvTable& t, const std::string& path) {
    Eigen::MatrixXd m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < t.header.size(); ++j)
            m(static_cast<Index>(i), static_cast<Index>(j)) =
                parse_double(t.rows[i][j], path + " row " + std::to_string(i + 1) + " column " + t.header[j]);
    return m;
}

inline Eigen::MatrixXd read_matrix_csv(const std::string& path) { return csv_to_matrix(read_csv(path), path); }

inline Eigen::VectorXd read_vector_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    detail::require(t.header.size() == 1, "'" + path + "' must have exactly one column");
    return csv_to_matrix(t, path).col(0);
}

// ---------------------------------------------------------------- covariate schema

struct ColumnSpec {
    std::string name;
    ColumnKind kind;
    bool operator==(const ColumnSpec&) const = default;
};
using Schema = std::vector<ColumnSpec>;

inline json schema_to_json(const Schema& s) {
    json arr = json::array();
    for (const auto& c : s) arr.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    return arr;
}

inline Schema schema_from_json(const json& arr) {
    detail::require(arr.is_array() && !arr.empty(), "covariate schema must be a non-empty array");
    Schema s;
    for (const auto& c : arr) {
        detail::require(c.is_object() && c.contains("name") && c.contains("kind"),
                        "each schema entry needs 'name' and 'kind'");
        s.push_back({c.at("name").get<std::string>(), column_kind_from_string(c.at("kind").get<std::string>())});
    }
    return s;
}

inline json parse_json(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError("invalid JSON in " + where + ": " + e.what());
    }
}

/// Reads the "covariates" array from a schema file (meta.json from simulate also qualifies).
inline Schema read_schema(const std::string& path) {
    const json j = parse_json(read_text(path), path);
    detail::require(j.is_object() && j.contains("covariates"), "'" + path + "' has no 'covariates' entry");
    return schema_from_json(j.at("covariates"));
}

inline Schema schema_of(const CovariateTable& U) {
    Schema s;
    for (const auto& c : U.columns()) s.push_back({c.name, c.kind});
    return s;
}

inline CovariateTable read_covariates_csv(const std::string& path, const Schema& schema) {
    const CsvTable t = read_csv(path);
    detail::require(t.header.size() == schema.size(), "'" + path + "' has " + std::to_string(t.header.size()) +
                                                          " columns, schema declares " +
                                                          std::to_string(schema.size()));
    std::vector<CovariateColumn> cols;
    for (std::size_t l = 0; l < schema.size(); ++l) {
        detail::require(t.header[l] == schema[l].name, "'" + path + "' column " + std::to_string(l) + " is '" +
                                                           t.header[l] + "', schema expects '" + schema[l].name +
                                                           "'");
        CovariateColumn c{schema[l].name, schema[l].kind, {}, {}};
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            if (c.kind == ColumnKind::continuous)
                c.numbers.push_back(parse_double(t.rows[i][l], path + " row " + std::to_string(i + 1)));
            else
                c.labels.push_back(t.rows[i][l]);
        }
        cols.push_back(std::move(c));
    }
    return CovariateTable(std::move(cols));
}

inline std::string covariates_to_csv(const CovariateTable& U) {
    std::vector<std::string> header;
    for (const auto& c : U.columns()) header.push_back(c.name);
    std::string out = csv_line(header);
    for (std::size_t i = 0; i < U.rows(); ++i) {
        std::vector<std::string> fields;
        for (const auto& c : U.columns())
            fields.push_back(c.kind == ColumnKind::continuous ? format_double(c.numbers[i]) : c.labels[i]);
        out += csv_line(fields);
    }
    return out;
}

// ---------------------------------------------------------------- model JSON

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
    detail::require(j.is_array(), std::string(what) + " must be an array of rows");
    const auto rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& r = j.at(static_cast<std::size_t>(i));
        detail::require(r.is_array() && static_cast<Index>(r.size()) == cols, std::string(what) + " is ragged");
        for (Index c = 0; c < cols; ++c) m(i, c) = r.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Eigen::VectorXd vector_from_json(const json& j, const char* what) {
    detail::require(j.is_array(), std::string(what) + " must be an array");
    Eigen::VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

inline json hyper_to_json(const HyperParams& h) {
    return {{"lambda", h.lambda},
            {"gamma", h.gamma},
            {"upsilon", h.upsilon},
            {"q", h.q},
            {"radius", {{"automatic", h.radius.automatic}, {"value", h.radius.value}}},
            {"alpha0", h.alpha0},
            {"decay", h.decay},
            {"init_noise", h.init_noise},
            {"rate_floor", h.rate_floor},
            {"k_n", h.k_n},
            {"max_iters", h.max_iters},
            {"rel_tol", h.rel_tol},
            {"seed", h.seed}};
}

inline HyperParams hyper_from_json(const json& j) {
    HyperParams h;
    h.lambda = j.at("lambda").get<double>();
    h.gamma = j.at("gamma").get<double>();
    h.upsilon = j.at("upsilon").get<double>();
    h.q = j.at("q").get<Index>();
    h.radius.automatic = j.at("radius").at("automatic").get<bool>();
    h.radius.value = j.at("radius").at("value").get<double>();
    h.alpha0 = j.at("alpha0").get<double>();
    h.decay = j.at("decay").get<double>();
    h.init_noise = j.at("init_noise").get<double>();
    h.rate_floor = j.at("rate_floor").get<double>();
    h.k_n = j.at("k_n").get<Index>();
    h.max_iters = j.at("max_iters").get<Index>();
    h.rel_tol = j.at("rel_tol").get<double>();
    h.seed = j.at("seed").get<std::uint64_t>();
    return h;
}

inline json covariate_values_to_json(const CovariateTable& U) {
    json cols = json::array();
    for (const auto& c : U.columns()) {
        if (c.kind == ColumnKind::continuous)
            cols.push_back(c.numbers);
        else
            cols.push_back(c.labels);
    }
    return cols;
}

inline json model_to_json(const TrainedModel& m) {
    return {{"format", "persreg-model"},
            {"version", 1},
            {"task", to_string(m.task)},
            {"hyper", hyper_to_json(m.hyper)},
            {"covariates", schema_to_json(schema_of(m.train_U))},
            {"theta_pop", vector_to_json(m.theta_pop)},
            {"phi", vector_to_json(m.phi.phi)},
            {"Q", matrix_to_json(m.factorization.Q)},
            {"Z", matrix_to_json(m.factorization.Z)},
            {"train_U", covariate_values_to_json(m.train_U)}};
}

inline TrainedModel model_from_json(const json& j) {
    try {
        detail::require(j.is_object() && j.value("format", "") == "persreg-model", "not a persreg model file");
        detail::require(j.at("version").get<int>() == 1, "unsupported model version");
        TrainedModel m;
        m.task = task_from_string(j.at("task").get<std::string>());
        m.hyper = hyper_from_json(j.at("hyper"));
        const Schema schema = schema_from_json(j.at("covariates"));
        m.theta_pop = vector_from_json(j.at("theta_pop"), "theta_pop");
        m.phi.phi = vector_from_json(j.at("phi"), "phi");
        m.factorization.Q = matrix_from_json(j.at("Q"), "Q");
        m.factorization.Z = matrix_from_json(j.at("Z"), "Z");
        const json& vals = j.at("train_U");
        detail::require(vals.is_array() && vals.size() == schema.size(), "train_U does not match the schema");
        std::vector<CovariateColumn> cols;
        for (std::size_t l = 0; l < schema.size(); ++l) {
            if (schema[l].kind == ColumnKind::continuous)
                cols.push_back(CovariateColumn::continuous(schema[l].name, vals[l].get<std::vector<double>>()));
            else
                cols.push_back(CovariateColumn::categorical(schema[l].name, vals[l].get<std::vector<std::string>>()));
        }
        m.train_U = CovariateTable(std::move(cols));
        m.validate();
        m.hyper.validate();
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model: ") + e.what());
    }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void save_model(const std::string& path, const TrainedModel& m) { write_text(path, dump(model_to_json(m))); }

inline TrainedModel load_model(const std::string& path) {
    return model_from_json(parse_json(read_text(path), path));
}

} // namespace persreg::io
