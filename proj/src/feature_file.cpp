#include "fanet/feature_file.hpp"

#include "fanet/error.hpp"
#include "fanet/iqa/features.hpp"
#include "fanet/forensic/extractor.hpp"
#include "fanet/nn/checkpoint.hpp"
#include "fanet/text_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fanet {

namespace {

constexpr const char* kHeader = "#fanet-features v1";

std::string join(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ' ';
    out += format_double(v(i));
  }
  return out;
}

Eigen::VectorXd parse_values(const std::string& field, const std::string& context) {
  std::vector<double> vals;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) vals.push_back(parse_double(tok, context));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void check_record(const FeatureRecord& r, const std::string& where) {
  require(r.quality.size() == 0 || r.quality.size() == iqa::kQualityDim, ErrorKind::Format,
          where + " (id '" + r.id + "'): expected 94 quality values, got " + std::to_string(r.quality.size()));
  require(r.forensic.size() == 0 || r.forensic.size() == forensic::kForensicDim, ErrorKind::Format,
          where + " (id '" + r.id + "'): expected 128 forensic values, got " +
              std::to_string(r.forensic.size()));
  require(r.quality.allFinite() && r.forensic.allFinite(), ErrorKind::Format,
          where + " (id '" + r.id + "'): non-finite value");
}

std::vector<FeatureRecord> read_text(std::istream& in, const std::string& name) {
  std::vector<FeatureRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      require(line == kHeader, ErrorKind::Format, name + ": missing '" + std::string(kHeader) + "' header");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto cols = split(line, '\t');
    require(cols.size() == 3, ErrorKind::Format, where + ": expected 3 tab-separated columns");
    FeatureRecord r;
    r.id = nn::percent_decode(cols[0]);
    r.quality = parse_values(cols[1], where);
    r.forensic = parse_values(cols[2], where);
    check_record(r, "record at " + where);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FeatureRecord> read_binary(std::istream& in, const std::string& name) {
  const nn::Checkpoint ck = nn::read_checkpoint(in);
  require(ck.kind == "features", ErrorKind::Format, name + ": checkpoint kind is '" + ck.kind + "', not features");
  std::vector<FeatureRecord> out;
  std::map<std::string, std::size_t> index;
  for (const auto& [key, values] : ck.blocks) {
    require(key.size() > 2 && (key.starts_with("q:") || key.starts_with("f:")), ErrorKind::Format,
            name + ": unexpected block '" + key + "'");
    const std::string id = key.substr(2);
    auto [it, fresh] = index.emplace(id, out.size());
    if (fresh) out.push_back({id, {}, {}});
    (key[0] == 'q' ? out[it->second].quality : out[it->second].forensic) = values;
  }
  for (std::size_t i = 0; i < out.size(); ++i) check_record(out[i], name + " record " + std::to_string(i + 1));
  return out;
}

}  // namespace

FeatureFormat feature_format_from_string(const std::string& name) {
  if (name == "text") return FeatureFormat::Text;
  if (name == "binary") return FeatureFormat::Binary;
  fail(ErrorKind::InvalidInput, "unknown feature format '" + name + "' (text or binary)");
}

void write_feature_file(const std::filesystem::path& path, const std::vector<FeatureRecord>& records,
                        FeatureFormat format) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_record(records[i], "record " + std::to_string(i + 1));
    require(seen.insert(records[i].id).second, ErrorKind::InvalidInput, "duplicate id '" + records[i].id + "'");
  }
  std::ostringstream out;
  if (format == FeatureFormat::Text) {
    out << kHeader << '\n';
    for (const auto& r : records) out << nn::percent_encode(r.id) << '\t' << join(r.quality) << '\t' << join(r.forensic) << '\n';
  } else {
    nn::Checkpoint ck;
    ck.kind = "features";
    for (const auto& r : records) {
      if (r.quality.size() > 0) ck.blocks.emplace_back("q:" + r.id, r.quality);
      if (r.forensic.size() > 0) ck.blocks.emplace_back("f:" + r.id, r.forensic);
    }
    nn::write_checkpoint(out, ck);
  }
  write_file_atomic(path, out.str());
}

std::vector<FeatureRecord> read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "missing feature file " + path.string());
  if (in.peek() == std::char_traits<char>::eof()) return {};
  std::vector<FeatureRecord> out =
      nn::has_checkpoint_magic(in) ? read_binary(in, path.string()) : read_text(in, path.string());
  std::set<std::string> seen;
  for (const auto& r : out)
    require(seen.insert(r.id).second, ErrorKind::Format, path.string() + ": duplicate id '" + r.id + "'");
  return out;
}

std::map<std::string, Eigen::VectorXd> import_features(const std::filesystem::path& path) {
  std::map<std::string, Eigen::VectorXd> out;
  std::size_t n = 0;
  for (auto& r : read_feature_file(path)) {
    ++n;
    require(r.forensic.size() == forensic::kForensicDim, ErrorKind::Format,
            path.string() + " record " + std::to_string(n) + " (id '" + r.id + "'): expected 128 forensic values, got " +
                std::to_string(r.forensic.size()));
    out.emplace(r.id, std::move(r.forensic));
  }
  return out;
}

}  // namespace fanet
