#include "fanet/nn/checkpoint.hpp"

#include "fanet/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fanet::nn {

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorKind::Format,
          "checkpoint truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void put_matrix_row_major(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

void get_matrix_row_major(std::istream& in, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f64(in);
}

struct BlockSpec {
  std::string name;
  std::size_t count;
};

}  // namespace

std::string percent_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (c <= 0x20 || c == '%' || c == 0x7F) {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    } else {
      out += static_cast<char>(c);
    }
  }
  return out.empty() ? "%00" : out;
}

std::string percent_decode(const std::string& s) {
  if (s == "%00") return {};
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%') {
      require(i + 2 < s.size(), ErrorKind::Format, "bad percent escape in '" + s + "'");
      out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

const Network& Checkpoint::network(const std::string& name) const {
  for (const auto& [n, net] : networks)
    if (n == name) return net;
  fail(ErrorKind::Format, "checkpoint has no network '" + name + "'");
}

const Eigen::VectorXd& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, b] : blocks)
    if (n == name) return b;
  fail(ErrorKind::Format, "checkpoint has no block '" + name + "'");
}

bool Checkpoint::has_block(const std::string& name) const {
  for (const auto& [n, b] : blocks)
    if (n == name) return true;
  return false;
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  fail(ErrorKind::Format, "checkpoint has no meta entry '" + key + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::ostringstream manifest;
  std::uint64_t payload = 0;
  manifest << "kind " << percent_encode(ckpt.kind) << "\n";
  for (const auto& [k, v] : ckpt.meta) manifest << "meta " << percent_encode(k) << " " << percent_encode(v) << "\n";
  for (const auto& [name, net] : ckpt.networks) {
    manifest << "net " << percent_encode(name) << " " << net.size() << "\n";
    for (std::size_t i = 0; i < net.size(); ++i) {
      std::visit(
          [&](const auto& l) {
            if constexpr (std::is_same_v<std::decay_t<decltype(l)>, DenseLayer>) {
              manifest << "dense " << l.input_size() << " " << l.output_size() << " "
                       << to_string(l.activation) << "\n";
            } else {
              manifest << "conv " << l.in_channels << " " << l.in_height << " " << l.in_width << " "
                       << l.out_channels << " " << l.kernel << " " << l.stride << " " << l.padding
                       << " " << to_string(l.activation) << "\n";
            }
            payload += static_cast<std::uint64_t>(l.weights.size() + l.bias.size());
          },
          net.layer(i));
    }
  }
  for (const auto& [name, b] : ckpt.blocks) {
    manifest << "block " << percent_encode(name) << " " << b.size() << "\n";
    payload += static_cast<std::uint64_t>(b.size());
  }
  const std::string text = manifest.str();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_le<std::uint64_t>(out, payload);
  for (const auto& [name, net] : ckpt.networks) {
    net.for_each_parameter([&](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
      put_matrix_row_major(out, w);
      for (Eigen::Index i = 0; i < b.size(); ++i) put_f64(out, b(i));
    });
  }
  for (const auto& [name, b] : ckpt.blocks)
    for (Eigen::Index i = 0; i < b.size(); ++i) put_f64(out, b(i));
  require(static_cast<bool>(out), ErrorKind::Format, "failed writing checkpoint");
}

bool has_checkpoint_magic(std::istream& in) {
  const auto pos = in.tellg();
  char magic[sizeof(kCheckpointMagic)] = {};
  in.read(magic, sizeof(magic));
  const bool ok = in.gcount() == static_cast<std::streamsize>(sizeof(magic)) &&
                  std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0;
  in.clear();
  in.seekg(pos);
  return ok;
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)] = {};
  in.read(magic, sizeof(magic));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(magic)) &&
              std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
          ErrorKind::Format, "not a checkpoint (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  require(version == kCheckpointVersion, ErrorKind::Format,
          "unsupported checkpoint version " + std::to_string(version));
  const auto manifest_size = get_le<std::uint64_t>(in);
  std::string text(manifest_size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(manifest_size));
  require(in.gcount() == static_cast<std::streamsize>(manifest_size), ErrorKind::Format,
          "checkpoint manifest truncated");

  Checkpoint ckpt;
  std::vector<BlockSpec> block_specs;
  std::istringstream lines(text);
  std::string line;
  std::size_t pending_layers = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    auto expect = [&](bool ok) { require(ok, ErrorKind::Format, "bad manifest line '" + line + "'"); };
    if (pending_layers > 0) {
      auto& net = ckpt.networks.back().second;
      std::string act;
      if (tag == "dense") {
        Eigen::Index in_sz = 0, out_sz = 0;
        fields >> in_sz >> out_sz >> act;
        expect(static_cast<bool>(fields));
        net.add(DenseLayer(in_sz, out_sz, activation_from_string(act)));
      } else if (tag == "conv") {
        Eigen::Index c = 0, h = 0, w = 0, oc = 0, k = 0, s = 0, p = 0;
        fields >> c >> h >> w >> oc >> k >> s >> p >> act;
        expect(static_cast<bool>(fields));
        net.add(ConvLayer(c, h, w, oc, k, s, p, activation_from_string(act)));
      } else {
        expect(false);
      }
      --pending_layers;
      continue;
    }
    if (tag == "kind") {
      std::string kind;
      fields >> kind;
      ckpt.kind = percent_decode(kind);
    } else if (tag == "meta") {
      std::string k, v;
      fields >> k >> v;
      expect(static_cast<bool>(fields));
      ckpt.meta.emplace_back(percent_decode(k), percent_decode(v));
    } else if (tag == "net") {
      std::string name;
      fields >> name >> pending_layers;
      expect(static_cast<bool>(fields));
      ckpt.networks.emplace_back(percent_decode(name), Network());
    } else if (tag == "block") {
      BlockSpec spec;
      fields >> spec.name >> spec.count;
      expect(static_cast<bool>(fields));
      spec.name = percent_decode(spec.name);
      block_specs.push_back(spec);
    } else {
      expect(false);
    }
  }
  require(pending_layers == 0, ErrorKind::Format, "checkpoint manifest ends inside a network");

  std::uint64_t expected = 0;
  for (const auto& [name, net] : ckpt.networks) expected += net.parameter_count();
  for (const auto& spec : block_specs) expected += spec.count;
  const auto payload = get_le<std::uint64_t>(in);
  require(payload == expected, ErrorKind::Format,
          "checkpoint payload has " + std::to_string(payload) + " values, manifest declares " +
              std::to_string(expected));
  for (auto& [name, net] : ckpt.networks) {
    net.for_each_parameter([&](Eigen::MatrixXd& w, Eigen::VectorXd& b) {
      get_matrix_row_major(in, w);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = get_f64(in);
    });
  }
  for (const auto& spec : block_specs) {
    Eigen::VectorXd b(static_cast<Eigen::Index>(spec.count));
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = get_f64(in);
    ckpt.blocks.emplace_back(spec.name, std::move(b));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Dependency, "cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "cannot open " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace fanet::nn
