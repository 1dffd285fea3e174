#ifndef FANET_FEATURE_FILE_HPP
#define FANET_FEATURE_FILE_HPP

#include "fanet/text_io.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fanet {

// Text form, one record per line after the header:
//
//   #fanet-features v1
//   <id>\t<quality values>\t<forensic values>
//
// Values inside a column are space separated in shortest round-trip decimal
// form; either column may be empty. Ids are percent-encoded. The binary form is
// a checkpoint of kind "features" with blocks "q:<id>" and "f:<id>" in record
// order. Readers detect the form from the leading bytes.

struct FeatureRecord {
  std::string id;
  Eigen::VectorXd quality;   // 94 values or empty
  Eigen::VectorXd forensic;  // 128 values or empty
};

enum class FeatureFormat { Text, Binary };

FeatureFormat feature_format_from_string(const std::string& name);

/// Writes through a temporary file in the same directory, then renames.
void write_feature_file(const std::filesystem::path& path, const std::vector<FeatureRecord>& records,
                        FeatureFormat format);

/// Validates dimensions (0 or 94 quality, 0 or 128 forensic) and unique ids.
std::vector<FeatureRecord> read_feature_file(const std::filesystem::path& path);

/// Forensic columns by id. Every record must carry exactly 128 forensic values.
/// An empty file yields an empty map.
std::map<std::string, Eigen::VectorXd> import_features(const std::filesystem::path& path);

}  // namespace fanet

#endif  // FANET_FEATURE_FILE_HPP
