#pragma once

#include <string>
#include <vector>

namespace teffect {

// Minimal CSV support: comma separator, optional double-quote quoting,
// no embedded newlines. Sufficient for the file formats this tool consumes.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

void write_csv(const std::string& path, const CsvTable& table);

}  // namespace teffect
