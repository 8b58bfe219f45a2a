#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coxbvs/data.hpp"

namespace coxbvs {

// Column mapping for survival CSVs. Defaults follow the file contract:
// required columns `time`, `status`, `subgroup`; every remaining numeric
// column is a covariate.
struct CsvSchema {
    std::string time_column = "time";
    std::string status_column = "status";
    std::string subgroup_column = "subgroup";
    std::vector<std::string> covariate_columns;  // empty = all remaining
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& field, int row, const std::string& col) {
    if (field.empty())
        throw std::invalid_argument(detail::str(
            "row ", row, ", column '", col, "': missing value"));
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument(detail::str(
            "row ", row, ", column '", col, "': cannot parse '", field, "' as a number"));
    }
    if (pos != field.size())
        throw std::invalid_argument(detail::str(
            "row ", row, ", column '", col, "': trailing characters in '", field, "'"));
    return v;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(detail::str("cannot open '", path, "'"));
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument(detail::str("'", path, "': empty file"));
    const std::vector<std::string> header = detail::split_csv_line(line);

    auto find_col = [&](const std::string& name) {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        throw std::invalid_argument(detail::str(
            "'", path, "': required column '", name, "' not found in header"));
    };
    const int time_col = find_col(schema.time_column);
    const int status_col = find_col(schema.status_column);
    const int subgroup_col = find_col(schema.subgroup_column);

    std::vector<int> cov_cols;
    std::vector<std::string> cov_names;
    if (schema.covariate_columns.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            const int ji = static_cast<int>(j);
            if (ji == time_col || ji == status_col || ji == subgroup_col) continue;
            cov_cols.push_back(ji);
            cov_names.push_back(header[j]);
        }
    } else {
        for (const auto& name : schema.covariate_columns) {
            cov_cols.push_back(find_col(name));
            cov_names.push_back(name);
        }
    }
    if (cov_cols.empty())
        throw std::invalid_argument(detail::str("'", path, "': no covariate columns"));

    std::vector<SurvivalRecord> records;
    int row = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw std::invalid_argument(detail::str(
                "'", path, "', row ", row, ": expected ", header.size(),
                " fields, got ", fields.size()));
        SurvivalRecord r;
        r.observed_time = detail::parse_double(fields[time_col], row, schema.time_column);
        const double status = detail::parse_double(fields[status_col], row, schema.status_column);
        const double sub = detail::parse_double(fields[subgroup_col], row, schema.subgroup_column);
        if (status != 0.0 && status != 1.0)
            throw std::invalid_argument(detail::str(
                "'", path, "', row ", row, ": status must be 0 or 1, got ", fields[status_col]));
        if (sub != std::floor(sub) || sub < 1.0)
            throw std::invalid_argument(detail::str(
                "'", path, "', row ", row, ": subgroup must be a positive integer, got ",
                fields[subgroup_col]));
        if (!(r.observed_time > 0.0))
            throw std::invalid_argument(detail::str(
                "'", path, "', row ", row, ": time must be positive, got ", fields[time_col]));
        r.event = static_cast<int>(status);
        r.subgroup = static_cast<int>(sub);
        r.covariates.resize(static_cast<int>(cov_cols.size()));
        for (std::size_t j = 0; j < cov_cols.size(); ++j)
            r.covariates[static_cast<int>(j)] =
                detail::parse_double(fields[cov_cols[j]], row, cov_names[j]);
        records.push_back(std::move(r));
    }
    if (records.empty())
        throw std::invalid_argument(detail::str("'", path, "': no data rows"));
    try {
        return make_dataset(std::move(records), true, cov_names);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(detail::str("'", path, "': ", e.what()));
    }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(detail::str("cannot write '", path, "'"));
    out << "time,status,subgroup";
    for (int j = 0; j < ds.p; ++j) {
        if (j < static_cast<int>(ds.covariate_names.size()))
            out << ',' << ds.covariate_names[j];
        else
            out << ",x" << (j + 1);
    }
    out << '\n';
    out << std::setprecision(17);
    for (const auto& r : ds.records) {
        out << r.observed_time << ',' << r.event << ',' << r.subgroup;
        for (int j = 0; j < ds.p; ++j) out << ',' << r.covariates[j];
        out << '\n';
    }
    if (!out) throw std::runtime_error(detail::str("write failed for '", path, "'"));
}

}  // namespace coxbvs
