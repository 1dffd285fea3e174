#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fanet/error.hpp"
#include "fanet/gate.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace fanet;
using namespace fanet::gate;
using Eigen::MatrixXd;

namespace {

std::vector<std::string> numbered(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("u" + std::to_string(1000 + i));
  return ids;
}

// Quality branch reads feature 0 only (y_q = sigmoid(feature 0)), forensic
// branch outputs 0.5: feature 0 = -20 lands on e3 (F = 0), +20 on (1, 0.5)
// (F = 0.5).
quant::FanetModel steered_model() {
  quant::FanetModel m = quant::make_model({});
  for (auto* net : {&m.smap_q, &m.smap_f})
    net->for_each_parameter([](Eigen::MatrixXd& w, Eigen::VectorXd& b) {
      w.setZero();
      b.setZero();
    });
  m.smap_q.for_each_parameter([](Eigen::MatrixXd& w, Eigen::VectorXd&) { w(0, 0) = 1; });
  return m;
}

struct Constructed {
  std::vector<EvalSample> samples;
  MatrixXd features;
  std::map<std::string, double> scores;
};

// The classifier is right on clean samples and wrong on degraded ones, and the
// degraded ones sit on the low-forensicability center.
Constructed constructed(std::size_t per_class, double degraded_fraction, std::uint64_t seed) {
  Constructed c;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> hi(0.6, 1.0), lo(0.0, 0.4);
  const std::size_t n = 2 * per_class;
  c.features = MatrixXd::Zero(quant::kInputDim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < per_class ? 1 : 0;
    const bool degraded = (i % per_class) < static_cast<std::size_t>(degraded_fraction * per_class);
    const std::string id = (label ? "g" : "s") + std::to_string(10000 + i);
    c.samples.push_back({id, "", label});
    c.features(0, static_cast<Eigen::Index>(i)) = degraded ? -20 : 20;
    const bool correct = !degraded;
    c.scores[id] = (label == 1) == correct ? hi(rng) : lo(rng);
  }
  return c;
}

}  // namespace

TEST_CASE("calibrated threshold is the interpolated quantile") {
  std::vector<double> s;
  for (int i = 10; i >= 1; --i) s.push_back(i);
  CHECK(std::abs(calibrate_threshold(s, 0.3) - 3.7) <= 1e-12);
  CHECK(calibrate_threshold(s, 0) == -std::numeric_limits<double>::infinity());
  CHECK(calibrate_threshold(std::vector<double>(7, 0.42), 0.3) == 0.42);
  CHECK_THROWS_AS(calibrate_threshold({}, 0.3), Error);
  CHECK_THROWS_AS(calibrate_threshold(s, 1.0), Error);
}

TEST_CASE("gate rejects floor(t_f n) in fraction mode and F < threshold otherwise") {
  const std::vector<double> f = {0.5, 0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6, 0.05};
  const auto ids = numbered(f.size());
  CHECK(gate::gate(ids, f, GateConfig::fraction(0)).rejected.empty());
  const Partition p = gate::gate(ids, f, GateConfig::fraction(0.3));
  CHECK(p.rejected == std::vector<std::size_t>{1, 5, 9});
  CHECK(p.accepted.size() == 7);
  CHECK(gate::gate(ids, f, GateConfig::absolute(0.05 - 1)).rejected.empty());
  CHECK(gate::gate(ids, f, GateConfig::absolute(0.3)).rejected == std::vector<std::size_t>{1, 5, 9});
  CHECK(gate::gate(ids, f, GateConfig::absolute(calibrate_threshold(f, 0))).rejected.empty());
  CHECK_THROWS_AS(GateConfig::fraction(1.0), Error);
}

TEST_CASE("fraction gating breaks ties by id") {
  const std::vector<double> f(6, 0.5);
  const std::vector<std::string> ids = {"f", "c", "a", "e", "b", "d"};
  CHECK(gate::gate(ids, f, GateConfig::fraction(0.5)).rejected == std::vector<std::size_t>{1, 2, 4});
}

TEST_CASE("rejected sets are nested across t_f and exactly sized") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> level(0, 20);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 120;
    std::vector<double> f(n);
    for (double& v : f) v = level(rng) / 20.0;
    const auto ids = numbered(n);
    std::vector<std::size_t> prev;
    for (double tf : {0.1, 0.2, 0.3}) {
      auto r = gate::gate(ids, f, GateConfig::fraction(tf)).rejected;
      CHECK(r.size() == static_cast<std::size_t>(std::floor(tf * n + 1e-9)));
      CHECK(std::includes(r.begin(), r.end(), prev.begin(), prev.end()));
      prev = r;
    }
  }
}

TEST_CASE("EER hand cases") {
  CHECK(eer({0.9, 0.8, 0.7, 0.3, 0.2, 0.1}, {1, 1, 1, 0, 0, 0}) == 0.0);
  CHECK(eer({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
  CHECK(std::abs(eer({0.9, 0.8, 0.4, 0.6, 0.3, 0.2}, {1, 1, 1, 0, 0, 0}) - 1.0 / 3.0) <= 1e-12);
  CHECK(eer({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 1.0);
  try {
    eer({0.1, 0.2}, {1, 1});
    FAIL("expected an undefined metric");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedMetric);
  }
}

TEST_CASE("EER matches the brute-force sweep on 1000 random sets") {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 49;
    const bool coarse = t % 3 == 0;
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? std::floor(u(rng) * 5) / 5 : u(rng);
      l[i] = static_cast<int>(rng() % 2);
    }
    l[0] = 1;
    l[1] = 0;
    const double d = std::abs(eer(s, l) - oracle::brute_force_eer(s, l));
    worst = std::max(worst, d);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("remaining ratios") {
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 100; ++i) labels[i] = 1;
  Partition none;
  for (std::size_t i = 0; i < 200; ++i) none.accepted.push_back(i);
  CHECK(remaining_ratios(none, labels) == std::pair<double, double>(1, 1));
  Partition p;
  for (std::size_t i = 0; i < 200; ++i) (i < 30 || i >= 100 ? p.rejected : p.accepted).push_back(i);
  const auto [rg, rs] = remaining_ratios(p, labels);
  CHECK(rg == 0.7);
  CHECK(rs == 0.0);
  CHECK_THROWS_AS(remaining_ratios(none, std::vector<int>(200, 1)), Error);
}

TEST_CASE("system cost with O_FA 0.90 and O_FI 1.82") {
  CHECK(std::abs(system_flops(0.90, 1.82, 0.1) - 2.54) <= 0.01);
  CHECK(std::abs(system_flops(0.90, 1.82, 0.2) - 2.36) <= 0.01);
  CHECK(std::abs(system_flops(0.90, 1.82, 0.3) - 2.17) <= 0.01);
  CHECK(system_flops(0.90, 1.82, 1.0) == 0.90);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    const double v = system_flops(0.9, 1.82, t);
    CHECK(v < prev);
    CHECK(std::abs(v - (0.9 + 1.82 - 1.82 * t)) <= 1e-12);
    prev = v;
  }
  CHECK_THROWS_AS(system_flops(-1, 1, 0.1), Error);
}

TEST_CASE("network cost counts two operations per multiply-accumulate") {
  nn::Network net;
  net.add(nn::DenseLayer(10, 5, nn::Activation::Relu));
  CHECK(network_gflops(net) == 2.0 * 50 / 1e9);
}

TEST_CASE("evaluation on a constructed corpus ranks rejected > all > remaining") {
  const Constructed c = constructed(100, 0.3, 1);
  const TableClassifier cls(c.scores, 1.82);
  const quant::FanetModel m = steered_model();
  EvalConfig cfg;
  cfg.gate = GateConfig::fraction(0.3);
  cfg.o_fa = 0.9;
  cfg.o_fi = 1.82;
  const GateReport r = evaluate(c.samples, c.features, m, cls, cfg);
  REQUIRE(r.eer_remaining);
  REQUIRE(r.eer_rejected);
  CHECK(*r.eer_rejected > r.eer_all);
  CHECK(r.eer_all > *r.eer_remaining);
  CHECK(*r.eer_remaining == 0.0);
  CHECK(*r.eer_rejected == 1.0);
  CHECK(r.rejected_genuine == 30);
  CHECK(r.rejected_spoof == 30);
  CHECK(r.rejected_genuine + static_cast<std::size_t>(std::lround(r.r_rg * r.genuine)) == r.genuine);
  CHECK(r.rejected_spoof + static_cast<std::size_t>(std::lround(r.r_rs * r.spoof)) == r.spoof);
  CHECK(std::abs(r.flops_system - 2.174) <= 1e-12);
  for (const UnitRecord& u : r.records) CHECK(u.rejected == (c.features(0, std::stoi(u.id.substr(1)) - 10000) < 0));
}

TEST_CASE("t_f = 0 keeps everything and leaves the rejected EER absent") {
  const Constructed c = constructed(40, 0.3, 2);
  const GateReport r = evaluate(c.samples, c.features, steered_model(), TableClassifier(c.scores, 1), {});
  REQUIRE(r.eer_remaining);
  CHECK(*r.eer_remaining == r.eer_all);
  CHECK(!r.eer_rejected);
  CHECK(r.r_rg == 1.0);
  CHECK(r.r_rs == 1.0);
}

TEST_CASE("frames of a video are scored and gated together") {
  Constructed c = constructed(30, 0.3, 3);
  for (std::size_t i = 0; i < c.samples.size(); ++i) c.samples[i].group = "v" + std::to_string(i / 3);
  EvalConfig cfg;
  cfg.gate = GateConfig::fraction(0.3);
  const GateReport r = evaluate(c.samples, c.features, steered_model(), TableClassifier(c.scores, 1), cfg);
  CHECK(r.records.size() == 20);
  CHECK(r.rejected_genuine + r.rejected_spoof == 6);
  for (const UnitRecord& u : r.records) {
    CHECK(u.frames == 3);
    const auto v = static_cast<Eigen::Index>(std::stoi(u.id.substr(1)));
    double mean = 0;
    for (Eigen::Index k = 0; k < 3; ++k) mean += c.scores.at(c.samples[static_cast<std::size_t>(3 * v + k)].id);
    CHECK(std::abs(u.score - mean / 3) <= 1e-12);
  }
  c.samples[1].label = 0;
  CHECK_THROWS_AS(evaluate(c.samples, c.features, steered_model(), TableClassifier(c.scores, 1), cfg), Error);
}

TEST_CASE("evaluation errors name the partition") {
  Constructed c = constructed(10, 0.3, 4);
  for (auto& s : c.samples) s.label = 1;
  try {
    evaluate(c.samples, c.features, steered_model(), TableClassifier(c.scores, 1), {});
    FAIL("expected an undefined metric");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedMetric);
    CHECK(std::string(e.what()).find("evaluation set") != std::string::npos);
  }
  CHECK_THROWS_AS(evaluate(c.samples, MatrixXd::Zero(221, 20), steered_model(), TableClassifier(c.scores, 1), {}),
                  Error);
}

TEST_CASE("reports round trip and render") {
  Constructed c = constructed(25, 0.3, 5);
  c.samples[3].id = "name with space";
  c.scores["name with space"] = 0.5;
  EvalConfig cfg;
  cfg.gate = GateConfig::fraction(0.2);
  cfg.o_fa = 0.9;
  cfg.o_fi = 1.82;
  std::vector<GateReport> reports;
  reports.push_back(evaluate(c.samples, c.features, steered_model(), TableClassifier(c.scores, 1.82), {}));
  reports.push_back(evaluate(c.samples, c.features, steered_model(), TableClassifier(c.scores, 1.82), cfg));
  for (const GateReport& r : reports) {
    const GateReport back = parse_report_tsv(report_tsv(r), "mem");
    CHECK(back == r);
    CHECK(report_tsv(back) == report_tsv(r));
  }
  const std::string table = report_table(reports[1]);
  CHECK(table.find("EER remaining") != std::string::npos);
  CHECK(report_table(reports[0]).find("n/a") != std::string::npos);
  const std::string plot = plot_data(reports);
  CHECK(std::count(plot.begin(), plot.end(), '\n') == 2 + 20 + 2 + 2);
  std::string broken = report_tsv(reports[1]);
  broken.replace(broken.find("rejected_spoof\t"), 16, "rejected_spoof\t9");
  CHECK_THROWS_AS(parse_report_tsv(broken, "mem"), Error);
  CHECK_THROWS_AS(parse_report_tsv("nonsense\n", "mem"), Error);
}

TEST_CASE("stub classifier scores with the extractor head") {
  forensic::ExtractorConfig arch;
  arch.input_size = 16;
  arch.channels = {2, 2, 2, 2, 2};
  arch.hidden = 8;
  const HeadClassifier zero(forensic::ForensicExtractor::zeros(arch));
  CHECK(zero.score("x", Eigen::VectorXd::Zero(222)) == 0.5);
  CHECK(zero.gflops() > 0);
  CHECK_THROWS_AS(zero.score("x", Eigen::VectorXd::Zero(128)), Error);
  const forensic::ForensicExtractor rnd = forensic::ForensicExtractor::random(arch, 3);
  const HeadClassifier head(rnd);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(222, -1, 1);
  CHECK(head.score("x", x) == forensic::class_probabilities(rnd, x.tail(128))(1));
  CHECK_THROWS_AS(HeadClassifier(forensic::ForensicExtractor()), Error);
}
