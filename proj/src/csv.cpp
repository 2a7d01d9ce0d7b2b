#include "segrank/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "segrank/errors.hpp"

namespace segrank::csv {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    throw SchemaError("missing column: " + name);
}

std::string fmt_double(double value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc())
        throw IoFailure("double formatting failed");
    return std::string(buf, end);
}

double parse_double(const std::string& text) {
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size())
        throw ParseError("bad number: " + text);
    return value;
}

long parse_long(const std::string& text) {
    long value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size())
        throw ParseError("bad integer: " + text);
    return value;
}

namespace {

bool needs_quotes(const std::string& field) {
    return field.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quoted(const std::string& field) {
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string join_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out += ',';
        out += needs_quotes(fields[i]) ? quoted(fields[i]) : fields[i];
    }
    return out;
}

Table read_csv_text(const std::string& text) {
    Table table;
    std::istringstream stream(text);
    std::string line;
    bool first = true;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto fields = split_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != table.header.size())
                throw ParseError("row width " + std::to_string(fields.size()) +
                                 " does not match header width " +
                                 std::to_string(table.header.size()));
            table.rows.push_back(std::move(fields));
        }
    }
    if (first)
        throw ParseError("empty CSV input");
    return table;
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream stream(path, std::ios::binary);
    if (!stream)
        throw IoFailure("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << stream.rdbuf();
    return read_csv_text(buffer.str());
}

std::string csv_text(const Table& table) {
    std::string out = join_line(table.header);
    out += '\n';
    for (const auto& row : table.rows) {
        out += join_line(row);
        out += '\n';
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const Table& table) {
    std::ofstream stream(path, std::ios::binary);
    if (!stream)
        throw IoFailure("cannot open for writing: " + path.string());
    stream << csv_text(table);
    if (!stream)
        throw IoFailure("write failed: " + path.string());
}

} // namespace segrank::csv
