#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace segrank::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

std::string fmt_double(double value);
double parse_double(const std::string& text);
long parse_long(const std::string& text);

std::vector<std::string> split_line(const std::string& line);
std::string join_line(const std::vector<std::string>& fields);

Table read_csv(const std::filesystem::path& path);
Table read_csv_text(const std::string& text);
void write_csv(const std::filesystem::path& path, const Table& table);
std::string csv_text(const Table& table);

} // namespace segrank::csv
