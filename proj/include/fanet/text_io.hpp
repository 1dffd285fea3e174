#ifndef FANET_TEXT_IO_HPP
#define FANET_TEXT_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace fanet {

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Whole file as bytes; ErrorKind::Dependency when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);
/// Whole-token parse; throws ErrorKind::Format on anything else.
double parse_double(const std::string& token, const std::string& context);
long long parse_integer(const std::string& token, const std::string& context);

std::vector<std::string> split(const std::string& s, char sep);

}  // namespace fanet

#endif  // FANET_TEXT_IO_HPP
