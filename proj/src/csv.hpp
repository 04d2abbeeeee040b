#pragma once

#include <sstream>
#include <string>
#include <vector>

namespace statmicro::detail {

/// Splits one CSV line on commas and trims surrounding blanks and a
/// trailing carriage return. Quoting is not supported.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ' || cell.back() == '\t')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && (cell[start] == ' ' || cell[start] == '\t')) ++start;
        out.push_back(cell.substr(start));
    }
    if (!line.empty() && (line.back() == ',' || (line.size() > 1 && line.back() == '\r' && line[line.size() - 2] == ','))) {
        out.emplace_back();
    }
    return out;
}

inline bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace statmicro::detail
