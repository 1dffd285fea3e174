#include "cli.hpp"

#include "fanet/feature_file.hpp"
#include "fanet/forensic/extractor.hpp"
#include "fanet/gate.hpp"
#include "fanet/image.hpp"
#include "fanet/nn/checkpoint.hpp"
#include "fanet/pipeline.hpp"
#include "fanet/quantifier.hpp"
#include "fanet/supervision.hpp"
#include "fanet/synth.hpp"
#include "fanet/text_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

namespace fanet::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string content_hash(const fs::path& p) {
  const fs::path file = fs::is_directory(p) ? p / "manifest.tsv" : p;
  return hex(fnv1a(read_file(file)));
}

fs::path metadata_path(const fs::path& artifact) {
  return fs::is_directory(artifact) ? artifact / "run.json" : fs::path(artifact.string() + ".run.json");
}

struct Stage {
  std::string command;
  std::uint64_t seed = 0;
  json config = json::object();
  std::vector<std::pair<std::string, fs::path>> inputs;
};

// Run metadata: seed, effective configuration and its hash, input content
// hashes and versions. Paths and times are left out so reruns match byte for byte.
std::string metadata_text(const Stage& s) {
  json j;
  j["command"] = s.command;
  j["seed"] = s.seed;
  j["config"] = s.config;
  j["config_hash"] = hex(fnv1a(s.config.dump()));
  json in = json::object();
  for (const auto& [role, path] : s.inputs) in[role] = content_hash(path);
  j["inputs"] = in;
  j["versions"] = {{"fanet", FANET_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"checkpoint_format", nn::kCheckpointVersion}};
  return j.dump(2) + "\n";
}

void write_metadata(const fs::path& artifact, const Stage& s) {
  write_file_atomic(metadata_path(artifact), metadata_text(s));
}

void require_input(const fs::path& p, const std::string& what) {
  require(fs::exists(p), ErrorKind::Dependency, "missing " + what + ": " + p.string());
}

void require_corpus(const fs::path& dir) {
  require_input(dir, "corpus directory");
  require_input(dir / "manifest.tsv", "corpus manifest");
}

// An upstream artifact built from a different version of an input this stage
// also reads is stale.
void check_fresh(const fs::path& artifact, const std::string& role, const fs::path& input) {
  const fs::path meta = metadata_path(artifact);
  if (!fs::exists(meta)) return;
  json j;
  try {
    j = json::parse(read_file(meta));
  } catch (const json::exception&) {
    fail(ErrorKind::Format, "unreadable run metadata " + meta.string());
  }
  if (!j.contains("inputs") || !j["inputs"].contains(role)) return;
  require(j["inputs"][role].get<std::string>() == content_hash(input), ErrorKind::Dependency,
          "stale upstream artifact " + artifact.string() + ": built from a different " + role + " than " +
              input.string());
}

// Writes a directory artifact next to its destination, then swaps it in.
template <typename F>
void write_directory(const fs::path& out, F&& fill) {
  const fs::path tmp = out.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    fill(tmp);
  } catch (...) {
    fs::remove_all(tmp);
    throw;
  }
  fs::remove_all(out);
  fs::rename(tmp, out);
}

void save_checkpoint_atomic(const fs::path& path, const nn::Checkpoint& ck) {
  std::ostringstream buf;
  nn::write_checkpoint(buf, ck);
  write_file_atomic(path, buf.str());
}

nn::Checkpoint load_input_checkpoint(const fs::path& path, const std::string& what) {
  require_input(path, what);
  return nn::load_checkpoint(path);
}

std::vector<synth::NamedImage> read_image_dir(const fs::path& dir, const std::string& what) {
  require(fs::is_directory(dir), ErrorKind::Dependency, "missing " + what + " directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::InvalidInput, "no .pgm or .ppm images in " + dir.string());
  std::vector<synth::NamedImage> out;
  for (const auto& f : files) out.push_back({f.stem().string(), read_pnm(f)});
  return out;
}

std::vector<synth::Degradation> parse_levels(const std::string& spec) {
  std::vector<synth::Degradation> out;
  for (const auto& item : split(spec, ',')) {
    const auto parts = split(item, ':');
    require(parts.size() == 2, ErrorKind::InvalidInput, "degrade level '" + item + "' is not blur:noise");
    out.push_back({parse_double(parts[0], "degrade blur"), parse_double(parts[1], "degrade noise")});
  }
  require(!out.empty(), ErrorKind::InvalidInput, "no degrade levels given");
  return out;
}

std::vector<double> parse_list(const std::string& spec, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split(spec, ',')) out.push_back(parse_double(item, what));
  require(!out.empty(), ErrorKind::InvalidInput, "empty " + what + " list");
  return out;
}

std::vector<std::string> record_ids(const std::vector<FeatureRecord>& records) {
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  return ids;
}

std::vector<std::string> corpus_ids(const std::vector<synth::CorpusEntry>& entries) {
  std::vector<std::string> ids;
  for (const auto& e : entries) ids.push_back(e.id);
  return ids;
}

std::vector<synth::CorpusEntry> read_manifest(const fs::path& dir) {
  require_corpus(dir);
  const fs::path m = dir / "manifest.tsv";
  return synth::parse_manifest(read_file(m), m.string());
}

struct Common {
  unsigned jobs = 0;
  bool quiet = false;
};

struct DemoCorpusOpts {
  fs::path out;
  std::size_t genuine = 40, backgrounds = 10;
  Eigen::Index size = 128;
  std::uint64_t seed = 1;
};

struct SynthOpts {
  fs::path genuine, backgrounds, out;
  std::size_t n = 100;
  Eigen::Index patch_size = 0;
  double degrade_fraction = 0.3;
  std::string degrade_levels = "1:0.01,2:0.02,4:0.04";
  bool no_crop = false;
  std::uint64_t seed = 1;
};

struct ExtractorOpts {
  fs::path corpus, out;
  int epochs = 20;
  Eigen::Index batch = 32, input_size = 128, hidden = 4096;
  double lr = 0.01;
  int decay_every = 10;
  bool include_degraded = false;
  std::uint64_t seed = 1;
};

struct ExtractOpts {
  fs::path corpus, extractor, import, out;
  std::string format = "text";
};

struct SuperviseOpts {
  fs::path corpus, features, extractor, out;
  int head_epochs = 300;
  std::uint64_t seed = 1;
};

struct TrainOpts {
  fs::path features, scores, out;
  std::string ablation = "full";
  double beta = 0.5, sigma = 0.1, eta = 0.9, low_fraction = 0.3, lr = 0.01;
  int epochs = 50;
  Eigen::Index batch = 128, hidden = 0;
  std::uint64_t seed = 1;
};

struct ScoreOpts {
  fs::path features, model, out;
};

struct GateOpts {
  fs::path scores, calibrate_on, out;
  double tf = -1;
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

struct EvalOpts {
  fs::path corpus, features, model, extractor, classifier_scores, out;
  std::string tf = "0,0.1,0.2,0.3";
  double classifier_gflops = -1, o_fa = -1, o_fi = -1;
};

class Logger {
 public:
  Logger(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void operator()(const std::string& msg) const {
    if (!quiet_) err_ << msg << "\n";
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

void cmd_demo_corpus(const DemoCorpusOpts& o, const Logger& log) {
  require(o.genuine > 0 && o.backgrounds > 0, ErrorKind::InvalidInput, "demo corpus needs images");
  require(o.size >= 32, ErrorKind::InvalidInput, "demo images must be at least 32 pixels");
  write_directory(o.out, [&](const fs::path& dir) {
    fs::create_directories(dir / "genuine");
    fs::create_directories(dir / "backgrounds");
    char name[32];
    for (std::size_t i = 0; i < o.genuine; ++i) {
      std::snprintf(name, sizeof(name), "g%03zu.pgm", i);
      write_pgm(dir / "genuine" / name, synth::procedural_genuine(o.size, o.size, o.seed * 1000003 + i));
    }
    for (std::size_t i = 0; i < o.backgrounds; ++i) {
      std::snprintf(name, sizeof(name), "b%03zu.pgm", i);
      write_pgm(dir / "backgrounds" / name,
                synth::procedural_background(o.size, o.size, o.seed * 1000003 + 500000 + i));
    }
    Stage s{"demo-corpus", o.seed, {{"genuine", o.genuine}, {"backgrounds", o.backgrounds}, {"size", o.size}}, {}};
    write_file_atomic(dir / "run.json", metadata_text(s));
  });
  log("wrote " + std::to_string(o.genuine + o.backgrounds) + " images to " + o.out.string());
}

void cmd_synth(const SynthOpts& o, unsigned, const Logger& log) {
  const auto genuine = read_image_dir(o.genuine, "genuine");
  const auto backgrounds = read_image_dir(o.backgrounds, "background");
  synth::CorpusConfig cfg;
  cfg.n_spoof = o.n;
  cfg.patch_mode = o.patch_size > 0;
  if (cfg.patch_mode) cfg.patch_size = o.patch_size;
  cfg.crop = !o.no_crop;
  cfg.degrade_fraction = o.degrade_fraction;
  cfg.degrade_levels = parse_levels(o.degrade_levels);
  cfg.seed = o.seed;
  const synth::Corpus corpus = synth::build_corpus(genuine, backgrounds, cfg);
  Stage s{"synth", o.seed,
          {{"n", o.n},
           {"patch_size", o.patch_size},
           {"degrade_fraction", o.degrade_fraction},
           {"degrade_levels", o.degrade_levels},
           {"crop", !o.no_crop}},
          {}};
  std::string sources;
  for (const auto* set : {&genuine, &backgrounds})
    for (const auto& img : *set) {
      std::ostringstream pix;
      pix << img.id;
      pix.write(reinterpret_cast<const char*>(img.pixels.data()),
                static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
      sources += pix.str();
    }
  s.config["sources_hash"] = hex(fnv1a(sources));
  write_directory(o.out, [&](const fs::path& dir) {
    synth::write_corpus(dir, corpus);
    write_file_atomic(dir / "run.json", metadata_text(s));
  });
  std::size_t spoofs = 0;
  for (const auto& e : corpus.entries) spoofs += e.label == 0;
  log("corpus " + o.out.string() + ": " + std::to_string(corpus.entries.size() - spoofs) + " genuine, " +
      std::to_string(spoofs) + " spoof");
}

void cmd_train_extractor(const ExtractorOpts& o, const Logger& log) {
  require_corpus(o.corpus);
  const synth::Corpus corpus = synth::read_corpus(o.corpus);
  forensic::ExtractorTrainConfig cfg;
  cfg.arch.input_size = o.input_size;
  cfg.arch.hidden = o.hidden;
  cfg.sgd.learning_rate = o.lr;
  cfg.sgd.decay_every = o.decay_every;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  const auto result = forensic::train_extractor(pipeline::labeled_images(corpus, !o.include_degraded), cfg);
  save_checkpoint_atomic(o.out, result.model.to_checkpoint());
  write_metadata(o.out, {"train-extractor", o.seed,
                         {{"epochs", o.epochs},
                          {"batch", o.batch},
                          {"input_size", o.input_size},
                          {"hidden", o.hidden},
                          {"lr", o.lr},
                          {"decay_every", o.decay_every},
                          {"include_degraded", o.include_degraded}},
                         {{"corpus", o.corpus}}});
  std::ostringstream msg;
  msg << "extractor " << o.out.string() << ": training accuracy " << result.train_accuracy;
  log(msg.str());
}

void cmd_extract(const ExtractOpts& o, unsigned jobs, const Logger& log) {
  require_corpus(o.corpus);
  const FeatureFormat format = feature_format_from_string(o.format);
  const synth::Corpus corpus = synth::read_corpus(o.corpus);
  std::vector<FeatureRecord> records;
  Stage s{"extract", 0, {{"format", o.format}}, {{"corpus", o.corpus}}};
  if (!o.import.empty()) {
    require_input(o.import, "forensic feature file");
    const auto imported = import_features(o.import);
    records = pipeline::quality_features(corpus, jobs);
    std::vector<std::string> missing;
    for (auto& r : records) {
      const auto it = imported.find(r.id);
      if (it == imported.end())
        missing.push_back(r.id);
      else
        r.forensic = it->second;
    }
    require(missing.empty(), ErrorKind::Dependency,
            o.import.string() + " has no forensic features for " + std::to_string(missing.size()) +
                " corpus ids, first '" + (missing.empty() ? "" : missing.front()) + "'");
    s.inputs.emplace_back("forensic", o.import);
  } else {
    require(!o.extractor.empty(), ErrorKind::InvalidInput, "extract needs --extractor or --import-forensic");
    const auto extractor = forensic::ForensicExtractor::from_checkpoint(load_input_checkpoint(o.extractor, "extractor"));
    records = pipeline::extract_features(corpus, extractor, jobs);
    s.inputs.emplace_back("extractor", o.extractor);
  }
  write_feature_file(o.out, records, format);
  write_metadata(o.out, s);
  log("features " + o.out.string() + ": " + std::to_string(records.size()) + " x (94 + 128)");
}

void cmd_supervise(const SuperviseOpts& o, unsigned jobs, const Logger& log) {
  require_corpus(o.corpus);
  require_input(o.features, "feature file");
  check_fresh(o.features, "corpus", o.corpus);
  const auto extractor = forensic::ForensicExtractor::from_checkpoint(load_input_checkpoint(o.extractor, "extractor"));
  const synth::Corpus corpus = synth::read_corpus(o.corpus);
  const auto bases = pipeline::ladder_bases(corpus);
  require(!bases.empty(), ErrorKind::InvalidInput, "corpus has no undegraded genuine images for the quality ladder");
  supervision::LadderConfig ladder;
  ladder.seed = o.seed;
  supervision::QualityHeadTrainConfig head_cfg;
  head_cfg.epochs = o.head_epochs;
  head_cfg.seed = o.seed;
  const auto head = supervision::train_quality_head(supervision::build_quality_ladder(bases, ladder, jobs), head_cfg);
  const auto records =
      supervision::build_supervision(pipeline::labeled_ids(corpus), read_feature_file(o.features), head, extractor);
  supervision::write_scores(o.out, records);
  write_metadata(o.out, {"supervise", o.seed,
                         {{"head_epochs", o.head_epochs}, {"ladder_bases", bases.size()}},
                         {{"corpus", o.corpus}, {"features", o.features}, {"extractor", o.extractor}}});
  log("supervision " + o.out.string() + ": " + std::to_string(records.size()) + " score pairs");
}

void cmd_train(const TrainOpts& o, const Logger& log) {
  require_input(o.features, "feature file");
  require_input(o.scores, "supervision scores");
  check_fresh(o.scores, "features", o.features);
  quant::FanetConfig cfg;
  cfg.ablation = quant::ablation_from_string(o.ablation);
  cfg.beta = o.beta;
  cfg.sigma = o.sigma;
  cfg.eta = o.eta;
  cfg.low_fraction = o.low_fraction;
  cfg.hidden = o.hidden;
  cfg.sgd.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  cfg.validate();
  const auto sup = supervision::read_scores(o.scores);
  std::vector<std::string> ids;
  for (const auto& r : sup) ids.push_back(r.id);
  const Eigen::MatrixXd x = pipeline::model_inputs(ids, read_feature_file(o.features));
  const auto result = quant::train_fanet(x, pipeline::score_pairs(ids, sup), cfg);
  save_checkpoint_atomic(o.out, result.model.to_checkpoint());
  write_metadata(o.out, {"train", o.seed,
                         {{"ablation", o.ablation},
                          {"beta", o.beta},
                          {"sigma", o.sigma},
                          {"eta", o.eta},
                          {"low_fraction", o.low_fraction},
                          {"hidden", o.hidden},
                          {"lr", o.lr},
                          {"epochs", o.epochs},
                          {"batch", o.batch}},
                         {{"features", o.features}, {"scores", o.scores}}});
  std::ostringstream msg;
  msg << "model " << o.out.string() << ": classes " << result.class_counts[0] << "/" << result.class_counts[1] << "/"
      << result.class_counts[2] << ", final loss " << result.final_loss;
  log(msg.str());
}

void cmd_score(const ScoreOpts& o, const Logger& log) {
  require_input(o.features, "feature file");
  const auto model = quant::FanetModel::from_checkpoint(load_input_checkpoint(o.model, "FANet model"));
  check_fresh(o.model, "features", o.features);
  const auto features = read_feature_file(o.features);
  const auto ids = record_ids(features);
  const Eigen::MatrixXd x = pipeline::model_inputs(ids, features);
  const Eigen::Matrix2Xd y = quant::predict(model, x);
  std::vector<quant::ScoreRecord> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Eigen::Index c = static_cast<Eigen::Index>(i);
    rows.push_back({ids[i], quant::forensicability_score(y.col(c), model.centers, model.beta, model.ablation), y.col(c)});
  }
  write_file_atomic(o.out, quant::score_records_text(rows));
  write_metadata(o.out, {"score", 0, json::object(), {{"features", o.features}, {"model", o.model}}});
  log("scores " + o.out.string() + ": " + std::to_string(rows.size()) + " rows");
}

void cmd_gate(const GateOpts& o, const Logger& log) {
  require_input(o.scores, "score file");
  const auto rows = quant::parse_score_records(read_file(o.scores), o.scores.string());
  std::vector<std::string> ids;
  std::vector<double> f;
  for (const auto& r : rows) {
    ids.push_back(r.id);
    f.push_back(r.f);
  }
  gate::GateConfig cfg;
  Stage s{"gate", 0, json::object(), {{"scores", o.scores}}};
  const bool by_threshold = !std::isnan(o.threshold);
  require(by_threshold != (o.tf >= 0), ErrorKind::InvalidInput, "give exactly one of --tf and --threshold");
  if (by_threshold) {
    cfg = gate::GateConfig::absolute(o.threshold);
  } else if (!o.calibrate_on.empty()) {
    require_input(o.calibrate_on, "calibration score file");
    std::vector<double> ref;
    for (const auto& r : quant::parse_score_records(read_file(o.calibrate_on), o.calibrate_on.string()))
      ref.push_back(r.f);
    cfg = gate::GateConfig::absolute(gate::calibrate_threshold(ref, o.tf));
    s.inputs.emplace_back("calibration", o.calibrate_on);
    s.config["t_f"] = o.tf;
  } else {
    cfg = gate::GateConfig::fraction(o.tf);
    s.config["t_f"] = o.tf;
  }
  s.config["mode"] = cfg.mode == gate::GateConfig::Mode::Fraction ? "fraction" : "threshold";
  if (cfg.mode == gate::GateConfig::Mode::Threshold) s.config["threshold"] = format_double(cfg.threshold);
  const gate::Partition p = gate::gate(ids, f, cfg);
  std::vector<bool> rejected(ids.size(), false);
  for (std::size_t i : p.rejected) rejected[i] = true;
  std::ostringstream text;
  text << "id\tF\tdecision\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    text << nn::percent_encode(ids[i]) << "\t" << format_double(f[i]) << "\t" << (rejected[i] ? "reject" : "accept")
         << "\n";
  write_file_atomic(o.out, text.str());
  write_metadata(o.out, s);
  log("gate " + o.out.string() + ": rejected " + std::to_string(p.rejected.size()) + " of " +
      std::to_string(ids.size()));
}

std::string tf_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

void cmd_eval(const EvalOpts& o, unsigned jobs, std::ostream& out, const Logger& log) {
  const auto entries = read_manifest(o.corpus);
  require_input(o.features, "feature file");
  check_fresh(o.features, "corpus", o.corpus);
  check_fresh(o.model, "features", o.features);
  const auto model = quant::FanetModel::from_checkpoint(load_input_checkpoint(o.model, "FANet model"));
  const auto thresholds = parse_list(o.tf, "t_f");

  std::unique_ptr<gate::DownstreamClassifier> classifier;
  double o_fa = o.o_fa;
  Stage s{"eval", 0, {{"tf", o.tf}}, {{"corpus", o.corpus}, {"features", o.features}, {"model", o.model}}};
  if (!o.classifier_scores.empty()) {
    require_input(o.classifier_scores, "classifier score file");
    std::map<std::string, double> table;
    std::istringstream in(read_file(o.classifier_scores));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#' || (lineno == 1 && line.rfind("id\t", 0) == 0)) continue;
      const auto parts = split(line, '\t');
      const std::string where = o.classifier_scores.string() + ":" + std::to_string(lineno);
      require(parts.size() == 2, ErrorKind::Format, where + ": expected id<TAB>score");
      table[nn::percent_decode(parts[0])] = parse_double(parts[1], where);
    }
    require(o.classifier_gflops >= 0, ErrorKind::InvalidInput, "--classifier-scores needs --classifier-gflops");
    classifier = std::make_unique<gate::TableClassifier>(std::move(table), o.classifier_gflops);
    s.inputs.emplace_back("classifier_scores", o.classifier_scores);
    require(o_fa >= 0 || !o.extractor.empty(), ErrorKind::InvalidInput,
            "give --o-fa or --extractor to declare the assessment cost");
  }
  if (!o.extractor.empty() && (!classifier || o_fa < 0)) {
    auto extractor = forensic::ForensicExtractor::from_checkpoint(load_input_checkpoint(o.extractor, "extractor"));
    if (o_fa < 0) o_fa = gate::fanet_gflops(extractor, model);
    if (!classifier) classifier = std::make_unique<gate::HeadClassifier>(std::move(extractor));
    s.inputs.emplace_back("extractor", o.extractor);
  }
  require(classifier != nullptr, ErrorKind::InvalidInput, "eval needs --extractor or --classifier-scores");
  const double o_fi = o.o_fi >= 0 ? o.o_fi : classifier->gflops();
  s.config["o_fa"] = o_fa;
  s.config["o_fi"] = o_fi;

  const auto features = read_feature_file(o.features);
  const Eigen::MatrixXd x = pipeline::model_inputs(corpus_ids(entries), features);
  std::vector<gate::EvalSample> samples;
  for (const auto& e : entries) samples.push_back({e.id, e.group, e.label});

  std::vector<gate::GateReport> reports;
  for (double t : thresholds) {
    gate::EvalConfig cfg;
    cfg.gate = gate::GateConfig::fraction(t);
    cfg.o_fa = o_fa;
    cfg.o_fi = o_fi;
    cfg.jobs = jobs;
    reports.push_back(gate::evaluate(samples, x, model, *classifier, cfg));
  }
  std::string summary;
  for (const auto& r : reports) summary += report_table(r) + "\n";
  write_directory(o.out, [&](const fs::path& dir) {
    for (const auto& r : reports) write_file_atomic(dir / ("report_tf" + tf_tag(r.gate.t_f) + ".tsv"), report_tsv(r));
    write_file_atomic(dir / "summary.txt", summary);
    write_file_atomic(dir / "plot.tsv", gate::plot_data(reports));
    write_file_atomic(dir / "run.json", metadata_text(s));
  });
  out << summary;
  log("reports " + o.out.string() + ": " + std::to_string(reports.size()) + " thresholds");
}

template <typename T>
CLI::Option* path_opt(CLI::App* app, const std::string& name, T& target, const std::string& help, bool required) {
  auto* opt = app->add_option(name, target, help)->group("Paths");
  if (required) opt->required();
  return opt;
}

}  // namespace

int exit_code(ErrorKind kind) { return kind == ErrorKind::Numerical ? 3 : 2; }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forensicability assessment pipeline: synthesize, extract, supervise, train, score, gate, evaluate.",
               "fanet"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; [subcommand] sections set that subcommand's options")
      ->envname("FANET_CONFIG");
  Common common;
  app.add_option("--jobs", common.jobs, "worker threads for per-sample work (0 = all cores)")->capture_default_str();
  app.add_flag("-q,--quiet", common.quiet, "no progress messages");

  DemoCorpusOpts demo;
  auto* c_demo = app.add_subcommand("demo-corpus", "write procedural genuine and background images");
  path_opt(c_demo, "--out", demo.out, "output directory (genuine/, backgrounds/)", true);
  c_demo->add_option("--genuine", demo.genuine, "genuine images")->capture_default_str();
  c_demo->add_option("--backgrounds", demo.backgrounds, "background images")->capture_default_str();
  c_demo->add_option("--size", demo.size, "side length in pixels")->capture_default_str();
  c_demo->add_option("--seed", demo.seed)->capture_default_str();

  SynthOpts syn;
  auto* c_synth = app.add_subcommand("synth", "build a labeled genuine/spoof corpus");
  path_opt(c_synth, "--genuine", syn.genuine, "directory of genuine .pgm/.ppm images", true);
  path_opt(c_synth, "--backgrounds", syn.backgrounds, "directory of background images", true);
  path_opt(c_synth, "--out", syn.out, "corpus directory (manifest.tsv, images/)", true);
  c_synth->add_option("--n", syn.n, "spoof samples")->capture_default_str();
  c_synth->add_option("--patch-size", syn.patch_size, "tile sources into square patches (0 = whole images)")
      ->capture_default_str();
  c_synth->add_option("--degrade-fraction", syn.degrade_fraction, "share of samples degraded")->capture_default_str();
  c_synth->add_option("--degrade-levels", syn.degrade_levels, "comma-separated blur:noise levels")
      ->capture_default_str();
  c_synth->add_flag("--no-crop", syn.no_crop, "keep the full warped frame");
  c_synth->add_option("--seed", syn.seed)->capture_default_str();

  ExtractorOpts ext;
  auto* c_ext = app.add_subcommand("train-extractor", "train the forensic CNN and its 2-way head");
  path_opt(c_ext, "--corpus", ext.corpus, "corpus directory", true);
  path_opt(c_ext, "--out", ext.out, "extractor checkpoint", true);
  c_ext->add_option("--epochs", ext.epochs)->capture_default_str();
  c_ext->add_option("--batch", ext.batch)->capture_default_str();
  c_ext->add_option("--input-size", ext.input_size, "network input side")->capture_default_str();
  c_ext->add_option("--hidden", ext.hidden, "width of the wide dense layer")->capture_default_str();
  c_ext->add_option("--lr", ext.lr)->capture_default_str();
  c_ext->add_option("--decay-every", ext.decay_every, "epochs between learning-rate divisions by 5")
      ->capture_default_str();
  c_ext->add_flag("--include-degraded", ext.include_degraded, "also train on degraded samples");
  c_ext->add_option("--seed", ext.seed)->capture_default_str();

  ExtractOpts exo;
  auto* c_extract = app.add_subcommand("extract", "compute 94 quality + 128 forensic features per sample");
  path_opt(c_extract, "--corpus", exo.corpus, "corpus directory", true);
  path_opt(c_extract, "--extractor", exo.extractor, "extractor checkpoint", false);
  path_opt(c_extract, "--import-forensic", exo.import, "feature file with externally computed forensic features",
           false);
  path_opt(c_extract, "--out", exo.out, "feature file", true);
  c_extract->add_option("--format", exo.format, "text or binary")->capture_default_str();

  SuperviseOpts sup;
  auto* c_sup = app.add_subcommand("supervise", "derive (y_q, y_f) targets for every sample");
  path_opt(c_sup, "--corpus", sup.corpus, "corpus directory", true);
  path_opt(c_sup, "--features", sup.features, "feature file", true);
  path_opt(c_sup, "--extractor", sup.extractor, "extractor checkpoint (forensic head)", true);
  path_opt(c_sup, "--out", sup.out, "supervision score file", true);
  c_sup->add_option("--head-epochs", sup.head_epochs, "quality head training epochs")->capture_default_str();
  c_sup->add_option("--seed", sup.seed)->capture_default_str();

  TrainOpts tr;
  auto* c_train = app.add_subcommand("train", "train the forensicability network");
  path_opt(c_train, "--features", tr.features, "feature file", true);
  path_opt(c_train, "--scores", tr.scores, "supervision score file", true);
  path_opt(c_train, "--out", tr.out, "model checkpoint", true);
  c_train->add_option("--ablation", tr.ablation, "full, no_low_class, random_centers or quality_only")
      ->capture_default_str();
  c_train->add_option("--beta", tr.beta)->capture_default_str();
  c_train->add_option("--sigma", tr.sigma, "kernel size")->capture_default_str();
  c_train->add_option("--eta", tr.eta, "center momentum")->capture_default_str();
  c_train->add_option("--low-fraction", tr.low_fraction)->capture_default_str();
  c_train->add_option("--hidden", tr.hidden, "hidden units per branch (0 = none)")->capture_default_str();
  c_train->add_option("--lr", tr.lr)->capture_default_str();
  c_train->add_option("--epochs", tr.epochs)->capture_default_str();
  c_train->add_option("--batch", tr.batch)->capture_default_str();
  c_train->add_option("--seed", tr.seed)->capture_default_str();

  ScoreOpts sc;
  auto* c_score = app.add_subcommand("score", "forensicability score per sample");
  path_opt(c_score, "--features", sc.features, "feature file", true);
  path_opt(c_score, "--model", sc.model, "model checkpoint", true);
  path_opt(c_score, "--out", sc.out, "score file", true);

  GateOpts gt;
  auto* c_gate = app.add_subcommand("gate", "accept or reject samples by forensicability");
  path_opt(c_gate, "--scores", gt.scores, "score file", true);
  path_opt(c_gate, "--calibrate-on", gt.calibrate_on, "reference score file; --tf becomes its F quantile", false);
  path_opt(c_gate, "--out", gt.out, "decision file", true);
  c_gate->add_option("--tf", gt.tf, "rejection fraction in [0, 1)");
  c_gate->add_option("--threshold", gt.threshold, "reject F below this value");

  EvalOpts ev;
  auto* c_eval = app.add_subcommand("eval", "gate a labeled corpus and report EERs, ratios and cost");
  path_opt(c_eval, "--corpus", ev.corpus, "corpus directory", true);
  path_opt(c_eval, "--features", ev.features, "feature file", true);
  path_opt(c_eval, "--model", ev.model, "model checkpoint", true);
  path_opt(c_eval, "--extractor", ev.extractor, "extractor checkpoint (stub classifier)", false);
  path_opt(c_eval, "--classifier-scores", ev.classifier_scores, "id<TAB>score file of another classifier", false);
  path_opt(c_eval, "--out", ev.out, "report directory", true);
  c_eval->add_option("--tf", ev.tf, "comma-separated rejection fractions")->capture_default_str();
  c_eval->add_option("--classifier-gflops", ev.classifier_gflops, "declared cost of --classifier-scores");
  c_eval->add_option("--o-fa", ev.o_fa, "assessment cost override, G-FLOPs");
  c_eval->add_option("--o-fi", ev.o_fi, "inspection cost override, G-FLOPs");

  std::vector<std::string> argv_store;
  argv_store.push_back("fanet");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    if (const char* env = std::getenv("FANET_CONFIG"); env && *env && !fs::exists(env))
      throw CLI::FileError("FANET_CONFIG names a missing file: " + std::string(env));
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const Logger log(err, common.quiet);
  try {
    if (*c_demo) cmd_demo_corpus(demo, log);
    if (*c_synth) cmd_synth(syn, common.jobs, log);
    if (*c_ext) cmd_train_extractor(ext, log);
    if (*c_extract) cmd_extract(exo, common.jobs, log);
    if (*c_sup) cmd_supervise(sup, common.jobs, log);
    if (*c_train) cmd_train(tr, log);
    if (*c_score) cmd_score(sc, log);
    if (*c_gate) cmd_gate(gt, log);
    if (*c_eval) cmd_eval(ev, common.jobs, out, log);
  } catch (const Error& e) {
    err << "fanet: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "fanet: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace fanet::cli
