#ifndef FANET_NN_CHECKPOINT_HPP
#define FANET_NN_CHECKPOINT_HPP

#include "fanet/nn/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace fanet::nn {

// Binary checkpoint layout (all integers and floats little-endian):
//
//   offset 0    8 bytes   magic "FANETCKP"
//   offset 8    u32       format version (kCheckpointVersion)
//   offset 12   u64       manifest length M in bytes
//   offset 20   M bytes   UTF-8 manifest, one '\n'-terminated line per entry:
//                           kind <kind>
//                           meta <key> <value>
//                           net <name> <layer-count>
//                           dense <in> <out> <activation>
//                           conv <in_ch> <in_h> <in_w> <out_ch> <kernel> <stride> <padding> <activation>
//                           block <name> <count>
//   offset 20+M u64       payload length P (number of f64 values)
//               P x f64   values in manifest order: for every net, each layer's
//                         weights row-major then its bias; then every block.
//
// Names and meta values are percent-encoded so that any UTF-8 string survives
// the whitespace-separated manifest.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'F', 'A', 'N', 'E', 'T', 'C', 'K', 'P'};

struct Checkpoint {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Network>> networks;
  std::vector<std::pair<std::string, Eigen::VectorXd>> blocks;

  const Network& network(const std::string& name) const;
  const Eigen::VectorXd& block(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
  bool has_block(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// True when the stream starts with the checkpoint magic; the stream position is restored.
bool has_checkpoint_magic(std::istream& in);

std::string percent_encode(const std::string& s);
std::string percent_decode(const std::string& s);

}  // namespace fanet::nn

#endif  // FANET_NN_CHECKPOINT_HPP
