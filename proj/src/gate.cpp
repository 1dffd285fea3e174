#include "fanet/gate.hpp"

#include "fanet/error.hpp"
#include "fanet/nn/checkpoint.hpp"
#include "fanet/parallel.hpp"
#include "fanet/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fanet::gate {

namespace {

constexpr const char* kReportHeader = "#fanet-gate-report v1";
constexpr const char* kUnitsHeader = "#units";

std::size_t count_label(const std::vector<int>& labels, const std::vector<std::size_t>& idx, int label) {
  return static_cast<std::size_t>(
      std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return labels[i] == label; }));
}

std::optional<double> partition_eer(const std::vector<double>& scores, const std::vector<int>& labels,
                                    const std::vector<std::size_t>& idx) {
  std::vector<double> s;
  std::vector<int> l;
  for (std::size_t i : idx) {
    s.push_back(scores[i]);
    l.push_back(labels[i]);
  }
  const bool both = std::count(l.begin(), l.end(), 1) > 0 && std::count(l.begin(), l.end(), 0) > 0;
  if (!both) return std::nullopt;
  return eer(s, l);
}

std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : "absent"; }

std::string mode_name(GateConfig::Mode m) { return m == GateConfig::Mode::Fraction ? "fraction" : "threshold"; }

}  // namespace

double calibrate_threshold(std::vector<double> reference, double t_f) {
  require(!reference.empty(), ErrorKind::InvalidInput, "threshold calibration needs reference scores");
  require(t_f >= 0 && t_f < 1, ErrorKind::InvalidInput, "t_f must lie in [0, 1)");
  if (t_f == 0) return -std::numeric_limits<double>::infinity();
  std::sort(reference.begin(), reference.end());
  const double h = t_f * static_cast<double>(reference.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, reference.size() - 1);
  return reference[lo] + (h - static_cast<double>(lo)) * (reference[hi] - reference[lo]);
}

GateConfig GateConfig::fraction(double t_f) {
  GateConfig c;
  c.mode = Mode::Fraction;
  c.t_f = t_f;
  c.validate();
  return c;
}

GateConfig GateConfig::absolute(double threshold) {
  GateConfig c;
  c.mode = Mode::Threshold;
  c.threshold = threshold;
  c.validate();
  return c;
}

void GateConfig::validate() const {
  if (mode == Mode::Fraction)
    require(t_f >= 0 && t_f < 1, ErrorKind::InvalidInput, "t_f must lie in [0, 1)");
  else
    require(!std::isnan(threshold), ErrorKind::InvalidInput, "gate threshold is NaN");
}

Partition gate(const std::vector<std::string>& ids, const std::vector<double>& f, const GateConfig& cfg) {
  cfg.validate();
  require(ids.size() == f.size(), ErrorKind::InvalidInput, "one id per score required");
  const std::size_t n = f.size();
  std::vector<bool> reject(n, false);
  if (cfg.mode == GateConfig::Mode::Fraction) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (f[a] != f[b]) return f[a] < f[b];
      return ids[a] < ids[b];
    });
    const auto k = static_cast<std::size_t>(std::floor(cfg.t_f * static_cast<double>(n) + 1e-9));
    for (std::size_t i = 0; i < k; ++i) reject[order[i]] = true;
  } else {
    for (std::size_t i = 0; i < n; ++i) reject[i] = f[i] < cfg.threshold;
  }
  Partition p;
  for (std::size_t i = 0; i < n; ++i) (reject[i] ? p.rejected : p.accepted).push_back(i);
  return p;
}

double eer(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), ErrorKind::InvalidInput, "one label per score required");
  std::size_t ng = 0, ns = 0;
  for (int l : labels) {
    require(l == 0 || l == 1, ErrorKind::InvalidInput, "labels must be 0 (spoof) or 1 (genuine)");
    (l == 1 ? ng : ns) += 1;
  }
  require(ng > 0 && ns > 0, ErrorKind::UndefinedMetric,
          "EER needs both classes (" + std::to_string(ng) + " genuine, " + std::to_string(ns) + " spoof)");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const double dg = static_cast<double>(ng), ds = static_cast<double>(ns);
  std::size_t genuine_below = 0, spoof_below = 0;
  double prev_far = 0, prev_diff = 0;
  // thresholds ascend through the distinct scores, then +inf (FAR 0, FRR 1)
  for (std::size_t k = 0;;) {
    const double far = static_cast<double>(ns - spoof_below) / ds;
    const double frr = static_cast<double>(genuine_below) / dg;
    const double diff = far - frr;
    if (diff == 0) return far;
    if (diff < 0) {
      const double w = prev_diff / (prev_diff - diff);
      return prev_far + w * (far - prev_far);
    }
    prev_far = far;
    prev_diff = diff;
    const double t = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == t; ++k) (labels[order[k]] == 1 ? genuine_below : spoof_below) += 1;
  }
}

std::pair<double, double> remaining_ratios(const Partition& p, const std::vector<int>& labels) {
  std::vector<std::size_t> all(p.accepted);
  all.insert(all.end(), p.rejected.begin(), p.rejected.end());
  const std::size_t og = count_label(labels, all, 1), os = count_label(labels, all, 0);
  require(og > 0, ErrorKind::UndefinedMetric, "remaining ratio undefined: no genuine samples");
  require(os > 0, ErrorKind::UndefinedMetric, "remaining ratio undefined: no spoof samples");
  return {static_cast<double>(count_label(labels, p.accepted, 1)) / static_cast<double>(og),
          static_cast<double>(count_label(labels, p.accepted, 0)) / static_cast<double>(os)};
}

double system_flops(double o_fa, double o_fi, double t_f) {
  require(o_fa >= 0 && o_fi >= 0, ErrorKind::InvalidInput, "operation counts must be nonnegative");
  require(t_f >= 0 && t_f <= 1, ErrorKind::InvalidInput, "t_f must lie in [0, 1]");
  return o_fa + (1.0 - t_f) * o_fi;
}

HeadClassifier::HeadClassifier(forensic::ForensicExtractor extractor) : extractor_(std::move(extractor)) {
  require(extractor_.ready(), ErrorKind::ModelNotReady, "stub classifier needs a trained extractor");
}

double HeadClassifier::score(const std::string&, const Eigen::Ref<const Eigen::VectorXd>& features) const {
  require(features.size() == quant::kInputDim, ErrorKind::InvalidInput,
          "dimension contract: classifier input must be 222-dim, got " + std::to_string(features.size()));
  return forensic::class_probabilities(extractor_, features.tail(quant::kForensicInput))(1);
}

double HeadClassifier::gflops() const {
  return network_gflops(extractor_.trunk()) + network_gflops(extractor_.head());
}

TableClassifier::TableClassifier(std::map<std::string, double> scores, double gflops)
    : scores_(std::move(scores)), gflops_(gflops) {}

double TableClassifier::score(const std::string& id, const Eigen::Ref<const Eigen::VectorXd>&) const {
  const auto it = scores_.find(id);
  require(it != scores_.end(), ErrorKind::Dependency, "no classifier score for '" + id + "'");
  return it->second;
}

double network_gflops(const nn::Network& net) { return 2.0 * net.macs() / 1e9; }

double fanet_gflops(const forensic::ForensicExtractor& extractor, const quant::FanetModel& model) {
  return network_gflops(extractor.trunk()) + network_gflops(model.smap_q) + network_gflops(model.smap_f);
}

GateReport evaluate(const std::vector<EvalSample>& samples, const Eigen::MatrixXd& features,
                    const quant::FanetModel& model, const DownstreamClassifier& classifier,
                    const EvalConfig& cfg) {
  cfg.gate.validate();
  require(!samples.empty(), ErrorKind::InvalidInput, "nothing to evaluate");
  require(features.rows() == quant::kInputDim, ErrorKind::InvalidInput,
          "dimension contract: evaluation features must be 222-dim, got " + std::to_string(features.rows()));
  require(static_cast<std::size_t>(features.cols()) == samples.size(), ErrorKind::InvalidInput,
          "features and samples are not aligned");

  const Eigen::VectorXd f = quant::forensicability_scores(model, features);
  std::vector<double> c(samples.size());
  parallel_for(samples.size(), cfg.jobs, [&](std::size_t i) {
    c[i] = classifier.score(samples[i].id, features.col(static_cast<Eigen::Index>(i)));
  });

  GateReport r;
  r.gate = cfg.gate;
  std::map<std::string, std::size_t> unit_of;
  std::vector<std::vector<double>> unit_f, unit_c;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const EvalSample& s = samples[i];
    require(s.label == 0 || s.label == 1, ErrorKind::Format, "sample '" + s.id + "' has no genuine/spoof label");
    const std::string key = s.group.empty() ? s.id : s.group;
    auto [it, fresh] = unit_of.try_emplace(key, r.records.size());
    if (fresh) {
      r.records.push_back({key, s.label, 0, 0, 0, false});
      unit_f.emplace_back();
      unit_c.emplace_back();
    }
    UnitRecord& u = r.records[it->second];
    require(u.label == s.label, ErrorKind::Format, "video '" + key + "' mixes genuine and spoof frames");
    ++u.frames;
    unit_f[it->second].push_back(f(static_cast<Eigen::Index>(i)));
    unit_c[it->second].push_back(c[i]);
  }

  std::vector<std::string> ids;
  std::vector<double> uf, uc;
  std::vector<int> labels;
  for (std::size_t k = 0; k < r.records.size(); ++k) {
    UnitRecord& u = r.records[k];
    u.f = quant::video_score(unit_f[k]);
    u.score = quant::video_score(unit_c[k]);
    ids.push_back(u.id);
    uf.push_back(u.f);
    uc.push_back(u.score);
    labels.push_back(u.label);
  }
  const Partition p = gate(ids, uf, cfg.gate);
  for (std::size_t i : p.rejected) r.records[i].rejected = true;

  std::vector<std::size_t> all(r.records.size());
  std::iota(all.begin(), all.end(), 0);
  r.genuine = count_label(labels, all, 1);
  r.spoof = count_label(labels, all, 0);
  r.rejected_genuine = count_label(labels, p.rejected, 1);
  r.rejected_spoof = count_label(labels, p.rejected, 0);
  try {
    r.eer_all = eer(uc, labels);
    std::tie(r.r_rg, r.r_rs) = remaining_ratios(p, labels);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("evaluation set: ") + e.what());
  }
  r.eer_remaining = partition_eer(uc, labels, p.accepted);
  r.eer_rejected = partition_eer(uc, labels, p.rejected);
  r.o_fa = cfg.o_fa;
  r.o_fi = cfg.o_fi;
  r.flops_system = system_flops(cfg.o_fa, cfg.o_fi,
                                static_cast<double>(p.rejected.size()) / static_cast<double>(r.records.size()));
  return r;
}

std::string report_table(const GateReport& r) {
  std::ostringstream o;
  const auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << 100 * v << "%";
    return s.str();
  };
  const auto opt = [&](const std::optional<double>& v) { return v ? pct(*v) : std::string("n/a"); };
  o << "gate            " << (r.gate.mode == GateConfig::Mode::Fraction ? "T_F = " + pct(r.gate.t_f)
                                                                       : "F < " + format_double(r.gate.threshold))
    << "\n";
  o << "units           " << r.genuine << " genuine, " << r.spoof << " spoof\n";
  o << "rejected        " << r.rejected_genuine << " genuine, " << r.rejected_spoof << " spoof\n";
  o << "EER all         " << pct(r.eer_all) << "\n";
  o << "EER remaining   " << opt(r.eer_remaining) << "\n";
  o << "EER rejected    " << opt(r.eer_rejected) << "\n";
  o << "R_rg / R_rs     " << pct(r.r_rg) << " / " << pct(r.r_rs) << "\n";
  std::ostringstream g;
  g.setf(std::ios::fixed);
  g.precision(4);
  g << r.flops_system << " G-FLOPs (O_FA " << r.o_fa << ", O_FI " << r.o_fi << ")";
  o << "system cost     " << g.str() << "\n";
  return o.str();
}

std::string report_tsv(const GateReport& r) {
  std::ostringstream o;
  o << kReportHeader << "\n";
  o << "mode\t" << mode_name(r.gate.mode) << "\n";
  o << "t_f\t" << format_double(r.gate.t_f) << "\n";
  o << "threshold\t" << format_double(r.gate.threshold) << "\n";
  o << "genuine\t" << r.genuine << "\n";
  o << "spoof\t" << r.spoof << "\n";
  o << "rejected_genuine\t" << r.rejected_genuine << "\n";
  o << "rejected_spoof\t" << r.rejected_spoof << "\n";
  o << "eer_all\t" << format_double(r.eer_all) << "\n";
  o << "eer_remaining\t" << optional_text(r.eer_remaining) << "\n";
  o << "eer_rejected\t" << optional_text(r.eer_rejected) << "\n";
  o << "r_rg\t" << format_double(r.r_rg) << "\n";
  o << "r_rs\t" << format_double(r.r_rs) << "\n";
  o << "o_fa\t" << format_double(r.o_fa) << "\n";
  o << "o_fi\t" << format_double(r.o_fi) << "\n";
  o << "flops_system\t" << format_double(r.flops_system) << "\n";
  o << kUnitsHeader << "\n";
  o << "id\tlabel\tframes\tF\tscore\trejected\n";
  for (const UnitRecord& u : r.records)
    o << nn::percent_encode(u.id) << "\t" << (u.label == 1 ? "genuine" : "spoof") << "\t" << u.frames << "\t"
      << format_double(u.f) << "\t" << format_double(u.score) << "\t" << (u.rejected ? 1 : 0) << "\n";
  return o.str();
}

GateReport parse_report_tsv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 1;
  const auto where = [&] { return name + ":" + std::to_string(lineno); };
  require(std::getline(in, line) && line == kReportHeader, ErrorKind::Format, name + ": not a gate report");
  GateReport r;
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == kUnitsHeader) break;
    const auto parts = split(line, '\t');
    require(parts.size() == 2, ErrorKind::Format, where() + ": expected key<TAB>value");
    require(fields.emplace(parts[0], parts[1]).second, ErrorKind::Format, where() + ": duplicate key " + parts[0]);
  }
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    require(it != fields.end(), ErrorKind::Format, name + ": missing field " + key);
    return it->second;
  };
  const auto real = [&](const std::string& key) { return parse_double(get(key), name + " " + key); };
  const auto count = [&](const std::string& key) {
    const long long v = parse_integer(get(key), name + " " + key);
    require(v >= 0, ErrorKind::Format, name + ": negative " + key);
    return static_cast<std::size_t>(v);
  };
  const auto optional = [&](const std::string& key) -> std::optional<double> {
    if (get(key) == "absent") return std::nullopt;
    return real(key);
  };
  const std::string& mode = get("mode");
  require(mode == "fraction" || mode == "threshold", ErrorKind::Format, name + ": unknown gate mode " + mode);
  r.gate.mode = mode == "fraction" ? GateConfig::Mode::Fraction : GateConfig::Mode::Threshold;
  r.gate.t_f = real("t_f");
  r.gate.threshold = real("threshold");
  r.genuine = count("genuine");
  r.spoof = count("spoof");
  r.rejected_genuine = count("rejected_genuine");
  r.rejected_spoof = count("rejected_spoof");
  r.eer_all = real("eer_all");
  r.eer_remaining = optional("eer_remaining");
  r.eer_rejected = optional("eer_rejected");
  r.r_rg = real("r_rg");
  r.r_rs = real("r_rs");
  r.o_fa = real("o_fa");
  r.o_fi = real("o_fi");
  r.flops_system = real("flops_system");
  require(std::getline(in, line) && line == "id\tlabel\tframes\tF\tscore\trejected", ErrorKind::Format,
          name + ": missing unit table header");
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto parts = split(line, '\t');
    require(parts.size() == 6, ErrorKind::Format, where() + ": expected 6 columns");
    require(parts[1] == "genuine" || parts[1] == "spoof", ErrorKind::Format, where() + ": bad label " + parts[1]);
    require(parts[5] == "0" || parts[5] == "1", ErrorKind::Format, where() + ": bad rejected flag");
    UnitRecord u;
    u.id = nn::percent_decode(parts[0]);
    u.label = parts[1] == "genuine" ? 1 : 0;
    u.frames = static_cast<std::size_t>(parse_integer(parts[2], where()));
    u.f = parse_double(parts[3], where());
    u.score = parse_double(parts[4], where());
    u.rejected = parts[5] == "1";
    r.records.push_back(u);
  }
  std::size_t g = 0, s = 0, rg = 0, rs = 0;
  for (const UnitRecord& u : r.records) {
    (u.label == 1 ? g : s) += 1;
    if (u.rejected) (u.label == 1 ? rg : rs) += 1;
  }
  require(g == r.genuine && s == r.spoof && rg == r.rejected_genuine && rs == r.rejected_spoof, ErrorKind::Format,
          name + ": unit table disagrees with the summary counts");
  return r;
}

std::string plot_data(const std::vector<GateReport>& reports, int bins) {
  require(bins > 0, ErrorKind::InvalidInput, "histogram needs at least one bin");
  std::ostringstream o;
  o << "#histogram\nbin_lo\tbin_hi\tgenuine\tspoof\n";
  if (!reports.empty() && !reports.front().records.empty()) {
    const auto& rec = reports.front().records;
    double lo = rec.front().f, hi = rec.front().f;
    for (const auto& u : rec) {
      lo = std::min(lo, u.f);
      hi = std::max(hi, u.f);
    }
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    std::vector<std::size_t> gen(static_cast<std::size_t>(bins)), spf(static_cast<std::size_t>(bins));
    for (const auto& u : rec) {
      const auto b = std::min(static_cast<std::size_t>(bins - 1), static_cast<std::size_t>((u.f - lo) / width));
      (u.label == 1 ? gen : spf)[b] += 1;
    }
    for (int b = 0; b < bins; ++b)
      o << format_double(lo + b * width) << "\t" << format_double(lo + (b + 1) * width) << "\t"
        << gen[static_cast<std::size_t>(b)] << "\t" << spf[static_cast<std::size_t>(b)] << "\n";
  }
  o << "#curve\nt_f\teer_all\teer_remaining\teer_rejected\tr_rg\tr_rs\tflops_system\n";
  for (const GateReport& r : reports) {
    const double n = static_cast<double>(r.genuine + r.spoof);
    const double t = n > 0 ? static_cast<double>(r.rejected_genuine + r.rejected_spoof) / n : 0.0;
    o << format_double(r.gate.mode == GateConfig::Mode::Fraction ? r.gate.t_f : t) << "\t"
      << format_double(r.eer_all) << "\t" << optional_text(r.eer_remaining) << "\t" << optional_text(r.eer_rejected)
      << "\t" << format_double(r.r_rg) << "\t" << format_double(r.r_rs) << "\t" << format_double(r.flops_system)
      << "\n";
  }
  return o.str();
}

}  // namespace fanet::gate
