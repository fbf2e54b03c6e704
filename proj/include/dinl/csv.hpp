#pragma once

// Minimal CSV reading/writing for the flat numeric files the harness emits.
// Fields never contain commas, quotes or newlines.

#include <fstream>
#include <string>
#include <vector>

namespace dinl {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double x);
double parse_double(const std::string& text);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void write_row(const std::vector<std::string>& fields);

private:
    std::string path_;
    std::size_t columns_;
    std::ofstream out_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Throws std::runtime_error with path and line context on I/O or shape errors.
CsvTable read_csv(const std::string& path);

}  // namespace dinl
