#include "pme/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "pme/error.hpp"

namespace pme {

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    if (quoted) throw ParseError("unterminated quote", line_no);
    cells.push_back(std::move(cell));
    return cells;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_double(const std::string& s, const std::string& column, std::size_t line_no) {
    if (s.empty()) throw ParseError("missing value in column '" + column + "'", line_no);
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("cannot parse '" + s + "' in column '" + column + "' as a number", line_no);
    }
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& column, std::size_t line_no) {
    if (s.empty()) throw ParseError("missing value in column '" + column + "'", line_no);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("cannot parse '" + s + "' in column '" + column + "' as an integer time", line_no);
    }
    return v;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

RawPanel read_csv_long(std::istream& in, const CsvColumns& columns) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty input: header row expected", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_line(line, line_no);
    for (auto& h : header) h = trim(h);

    auto find = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("column '" + name + "' not found in header", 1);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t unit_idx = find(columns.unit);
    const std::size_t time_idx = find(columns.time);
    std::vector<std::size_t> value_idx;
    RawPanel panel;
    if (columns.values.empty()) {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (k == unit_idx || k == time_idx) continue;
            value_idx.push_back(k);
            panel.variables.push_back(header[k]);
        }
    } else {
        for (const auto& name : columns.values) {
            value_idx.push_back(find(name));
            panel.variables.push_back(name);
        }
    }
    if (value_idx.empty()) throw ParseError("no value columns", 1);

    struct Row {
        std::int64_t time;
        std::vector<double> values;
        std::size_t line;
    };
    std::map<std::string, std::size_t> index;
    std::vector<std::string> ids;
    std::vector<std::vector<Row>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_line(line, line_no);
        if (cells.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             line_no);
        }
        const std::string id = trim(cells[unit_idx]);
        if (id.empty()) throw ParseError("missing unit identifier", line_no);
        Row row{parse_int(trim(cells[time_idx]), columns.time, line_no), {}, line_no};
        row.values.reserve(value_idx.size());
        for (std::size_t k = 0; k < value_idx.size(); ++k) {
            row.values.push_back(parse_double(trim(cells[value_idx[k]]), panel.variables[k], line_no));
        }
        auto [it, inserted] = index.emplace(id, ids.size());
        if (inserted) {
            ids.push_back(id);
            rows.emplace_back();
        }
        rows[it->second].push_back(std::move(row));
    }

    const auto m = static_cast<Eigen::Index>(value_idx.size());
    for (std::size_t u = 0; u < ids.size(); ++u) {
        auto& rs = rows[u];
        std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
        for (std::size_t k = 1; k < rs.size(); ++k) {
            if (rs[k].time == rs[k - 1].time) {
                throw ParseError("duplicate record for unit '" + ids[u] + "' at time " + std::to_string(rs[k].time) +
                                     " (first seen on line " + std::to_string(std::min(rs[k].line, rs[k - 1].line)) +
                                     ")",
                                 std::max(rs[k].line, rs[k - 1].line));
            }
        }
        RawUnit unit;
        unit.unit_id = ids[u];
        unit.values.resize(static_cast<Eigen::Index>(rs.size()), m);
        for (std::size_t t = 0; t < rs.size(); ++t) {
            unit.times.push_back(rs[t].time);
            for (Eigen::Index k = 0; k < m; ++k) unit.values(static_cast<Eigen::Index>(t), k) = rs[t].values[k];
        }
        panel.units.push_back(std::move(unit));
    }
    return panel;
}

RawPanel read_csv_long(const std::filesystem::path& path, const CsvColumns& columns) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return read_csv_long(in, columns);
}

void write_csv_long(std::ostream& out, const RawPanel& panel, const std::string& unit_col,
                    const std::string& time_col) {
    out << quote_if_needed(unit_col) << ',' << quote_if_needed(time_col);
    for (const auto& v : panel.variables) out << ',' << quote_if_needed(v);
    out << '\n';
    for (const auto& u : panel.units) {
        const std::string id = quote_if_needed(u.unit_id);
        for (std::size_t t = 0; t < u.times.size(); ++t) {
            out << id << ',' << u.times[t];
            for (Eigen::Index k = 0; k < u.values.cols(); ++k) {
                out << ',' << format_double(u.values(static_cast<Eigen::Index>(t), k));
            }
            out << '\n';
        }
    }
}

void write_csv_long(std::ostream& out, const PanelDataset& panel, const std::string& unit_col,
                    const std::string& time_col) {
    write_csv_long(out, to_raw(panel), unit_col, time_col);
}

RawPanel to_raw(const PanelDataset& panel) {
    RawPanel raw;
    raw.variables = panel.variable_names;
    raw.units.reserve(panel.n());
    for (const auto& u : panel.units) raw.units.push_back({u.unit_id, u.times, u.values});
    return raw;
}

PanelDataset to_panel(const RawPanel& raw) {
    PanelDataset panel;
    panel.variable_names = raw.variables;
    panel.units.reserve(raw.units.size());
    for (const auto& u : raw.units) panel.units.emplace_back(u.unit_id, u.times, u.values);
    return panel;
}

}  // namespace pme
