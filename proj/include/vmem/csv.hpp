#pragma once

// Minimal CSV plumbing shared by the panel loader and the report writers.
// Fields are unquoted; the files this project reads and writes never embed
// commas in a field.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vmem::csv {

std::vector<std::string> split_line(std::string_view line);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);

/// Opens a file for writing, creating parent directories; throws on failure.
std::ofstream open_output(const std::filesystem::path& path);

/// Writes rows of already-formatted fields.
class Writer {
public:
    explicit Writer(const std::filesystem::path& path);

    Writer& header(std::initializer_list<std::string_view> names);
    Writer& header(const std::vector<std::string>& names) { return row(names); }
    Writer& row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
};

}  // namespace vmem::csv
