#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pme/panel.hpp"

namespace pme {

/// One unit's records as read, sorted by time; gaps are allowed at this stage.
struct RawUnit {
    std::string unit_id;
    std::vector<std::int64_t> times;
    Matrix values;  ///< rows follow `times`
};

struct RawPanel {
    std::vector<std::string> variables;
    std::vector<RawUnit> units;  ///< in order of first appearance
};

struct CsvColumns {
    std::string unit = "unit";
    std::string time = "time";
    std::vector<std::string> values;  ///< empty selects every other column
};

/// Long-format CSV: header row, one line per (unit, time). Empty cells, unparsable
/// numbers and duplicate (unit, time) keys raise ParseError with the line number.
RawPanel read_csv_long(std::istream& in, const CsvColumns& columns = {});
RawPanel read_csv_long(const std::filesystem::path& path, const CsvColumns& columns = {});

/// Writes values in shortest round-trip form, so reading back is bit-exact.
void write_csv_long(std::ostream& out, const RawPanel& panel, const std::string& unit_col = "unit",
                    const std::string& time_col = "time");
void write_csv_long(std::ostream& out, const PanelDataset& panel, const std::string& unit_col = "unit",
                    const std::string& time_col = "time");

RawPanel to_raw(const PanelDataset& panel);

/// Converts without any filtering; gaps surface later through `validate`.
PanelDataset to_panel(const RawPanel& raw);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace pme
