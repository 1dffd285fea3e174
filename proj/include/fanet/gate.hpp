#ifndef FANET_GATE_HPP
#define FANET_GATE_HPP

#include "fanet/forensic/extractor.hpp"
#include "fanet/quantifier.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fanet::gate {

/// Linear-interpolation t_f-quantile of the reference scores; -inf for t_f = 0.
double calibrate_threshold(std::vector<double> reference, double t_f);

struct GateConfig {
  enum class Mode { Fraction, Threshold };
  Mode mode = Mode::Fraction;
  double t_f = 0;        // fraction mode, in [0, 1)
  double threshold = 0;  // threshold mode: reject F < threshold

  static GateConfig fraction(double t_f);
  static GateConfig absolute(double threshold);
  void validate() const;
  bool operator==(const GateConfig&) const = default;
};

/// Indices into the gated list, ascending.
struct Partition {
  std::vector<std::size_t> accepted;
  std::vector<std::size_t> rejected;
};

/// Fraction mode rejects exactly floor(t_f n) lowest scores (ties by id, then
/// position); threshold mode rejects every score below the threshold.
Partition gate(const std::vector<std::string>& ids, const std::vector<double>& f, const GateConfig& cfg);

/// Labels are 1 genuine, 0 spoof; a sample is accepted as genuine when its score
/// reaches the threshold. EER is read at the FAR = FRR crossing, interpolated
/// between the two bracketing operating points.
double eer(const std::vector<double>& scores, const std::vector<int>& labels);

/// (remaining genuine / all genuine, remaining spoof / all spoof).
std::pair<double, double> remaining_ratios(const Partition& p, const std::vector<int>& labels);

/// O_FA + (1 - t_f) O_FI.
double system_flops(double o_fa, double o_fi, double t_f);

/// Second-stage classifier: higher score = more genuine. `features` is the
/// 222-dim model input of the sample.
class DownstreamClassifier {
 public:
  virtual ~DownstreamClassifier() = default;
  virtual double score(const std::string& id, const Eigen::Ref<const Eigen::VectorXd>& features) const = 0;
  /// Declared cost of one forward pass, in G-FLOPs.
  virtual double gflops() const = 0;
};

/// Genuine probability from the forensic extractor's 2-way head.
class HeadClassifier : public DownstreamClassifier {
 public:
  explicit HeadClassifier(forensic::ForensicExtractor extractor);
  double score(const std::string& id, const Eigen::Ref<const Eigen::VectorXd>& features) const override;
  double gflops() const override;

 private:
  forensic::ForensicExtractor extractor_;
};

/// Precomputed scores looked up by id.
class TableClassifier : public DownstreamClassifier {
 public:
  TableClassifier(std::map<std::string, double> scores, double gflops);
  double score(const std::string& id, const Eigen::Ref<const Eigen::VectorXd>& features) const override;
  double gflops() const override { return gflops_; }

 private:
  std::map<std::string, double> scores_;
  double gflops_;
};

/// Two multiply-adds per MAC, in G-FLOPs.
double network_gflops(const nn::Network& net);
/// Extractor trunk plus both score-mapping branches.
double fanet_gflops(const forensic::ForensicExtractor& extractor, const quant::FanetModel& model);

struct EvalSample {
  std::string id;
  std::string group;  // frames sharing a non-empty group form one video
  int label = 0;      // 1 genuine, 0 spoof
};

struct EvalConfig {
  GateConfig gate;
  double o_fa = 0;  // G-FLOPs
  double o_fi = 0;
  unsigned jobs = 1;
};

struct UnitRecord {
  std::string id;
  int label = 0;
  std::size_t frames = 1;
  double f = 0;
  double score = 0;
  bool rejected = false;

  bool operator==(const UnitRecord&) const = default;
};

struct GateReport {
  GateConfig gate;
  std::size_t genuine = 0, spoof = 0;
  std::size_t rejected_genuine = 0, rejected_spoof = 0;
  double eer_all = 0;
  std::optional<double> eer_remaining;  // absent when the remaining set lacks a class
  std::optional<double> eer_rejected;   // absent when the rejected set is empty or lacks a class
  double r_rg = 1, r_rs = 1;
  double o_fa = 0, o_fi = 0, flops_system = 0;
  std::vector<UnitRecord> records;

  bool operator==(const GateReport&) const = default;
};

/// Units are videos (samples sharing a group; frame F and classifier scores are
/// averaged) or single samples. Gates units by F, then scores each partition
/// with the classifier. System FLOPs use the realised rejected fraction.
GateReport evaluate(const std::vector<EvalSample>& samples, const Eigen::MatrixXd& features,
                    const quant::FanetModel& model, const DownstreamClassifier& classifier,
                    const EvalConfig& cfg);

std::string report_table(const GateReport& r);
std::string report_tsv(const GateReport& r);
GateReport parse_report_tsv(const std::string& text, const std::string& name);
/// F histogram of the first report and one EER-vs-t_f row per report.
std::string plot_data(const std::vector<GateReport>& reports, int bins = 20);

}  // namespace fanet::gate

#endif  // FANET_GATE_HPP
