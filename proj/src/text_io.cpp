#include "fanet/text_io.hpp"

#include "fanet/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fanet {

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Dependency, "cannot write " + tmp.string());
    out << content;
    out.close();
    require(static_cast<bool>(out), ErrorKind::Dependency, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "missing file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(const std::string& token, const std::string& context) {
  double v = 0;
  const char* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, v);
  require(res.ec == std::errc{} && res.ptr == end, ErrorKind::Format,
          context + ": '" + token + "' is not a number");
  return v;
}

long long parse_integer(const std::string& token, const std::string& context) {
  long long v = 0;
  const char* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, v);
  require(res.ec == std::errc{} && res.ptr == end, ErrorKind::Format,
          context + ": '" + token + "' is not an integer");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

}  // namespace fanet
