#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "sesame/checkpoint.hpp"
#include "sesame/corpus.hpp"
#include "sesame/embednet.hpp"
#include "sesame/error.hpp"
#include "sesame/gnn.hpp"
#include "sesame/metrics.hpp"
#include "sesame/sampler.hpp"
#include "sesame/simgraph.hpp"

namespace sesame {

namespace fs = std::filesystem;

/// Error raised inside a pipeline stage; keeps the original category.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage " + stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
auto run_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, DataError(e.what()));
  }
}

// ---------------------------------------------------------------------------
// Configuration.

struct PipelineConfig {
  std::string corpus;
  std::string embeddings;
  std::string holdout_corpus;
  std::string holdout_embeddings;
  std::string output_dir = "sesame-out";
  BucketSpec buckets;
  GraphOptions graph;
  std::optional<IndexMode> index_mode;  // unset: exact below 5000 nodes, approximate above
  bool refine = true;
  RefinerConfig refiner;
  GnnConfig gnn;
  std::size_t sample_size = 900;
  std::uint64_t seed = 42;

  /// Applies one key=value setting. Unknown keys are usage errors.
  void set(const std::string& key, const std::string& value);

  /// Copies the global seed into every stochastic stage.
  void propagate_seed() {
    graph.seed = seed;
    refiner.seed = seed;
    gnn.seed = seed;
  }

  nlohmann::json to_json() const {
    return {{"corpus", corpus},
            {"embeddings", embeddings},
            {"holdout_corpus", holdout_corpus},
            {"holdout_embeddings", holdout_embeddings},
            {"output_dir", output_dir},
            {"buckets", buckets.upper_bounds()},
            {"graph", {{"k", graph.k}, {"threshold", graph.threshold},
                       {"mode", index_mode ? to_string(*index_mode) : "auto"}}},
            {"refine", refine},
            {"refiner", {{"temperature", refiner.temperature}, {"batch_size", refiner.batch_size},
                         {"epochs", refiner.epochs}, {"learning_rate", refiner.learning_rate}}},
            {"gnn", gnn.to_json()},
            {"sample_size", sample_size},
            {"seed", seed}};
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  N out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) throw UsageError("invalid value for " + key + ": \"" + value + "\"");
  if constexpr (std::is_unsigned_v<N>) {
    if (value.find('-') != std::string::npos) throw UsageError("invalid value for " + key + ": \"" + value + "\"");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("invalid boolean for " + key + ": \"" + value + "\"");
}

inline std::vector<double> parse_bounds(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  return out;
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "corpus") corpus = value;
  else if (key == "embeddings") embeddings = value;
  else if (key == "holdout_corpus") holdout_corpus = value;
  else if (key == "holdout_embeddings") holdout_embeddings = value;
  else if (key == "output_dir") output_dir = value;
  else if (key == "buckets") buckets = BucketSpec(detail::parse_bounds(key, value));
  else if (key == "graph.k") graph.k = parse_number<std::size_t>(key, value);
  else if (key == "graph.threshold") graph.threshold = parse_number<double>(key, value);
  else if (key == "graph.mode") {
    if (value == "auto") index_mode.reset();
    else index_mode = parse_index_mode(value);
  }
  else if (key == "refine") refine = detail::parse_bool(key, value);
  else if (key == "refine.temperature") refiner.temperature = parse_number<double>(key, value);
  else if (key == "refine.batch_size") refiner.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "refine.epochs") refiner.epochs = parse_number<std::size_t>(key, value);
  else if (key == "refine.lr") refiner.learning_rate = parse_number<double>(key, value);
  else if (key == "gnn.architecture") gnn.architecture = parse_architecture(value);
  else if (key == "gnn.layers") gnn.layers = parse_number<std::size_t>(key, value);
  else if (key == "gnn.hidden") gnn.hidden_dim = parse_number<std::size_t>(key, value);
  else if (key == "gnn.activation") gnn.activation = parse_activation(value);
  else if (key == "gnn.drop_edge") gnn.drop_edge_p = parse_number<double>(key, value);
  else if (key == "gnn.epochs") gnn.epochs = parse_number<std::size_t>(key, value);
  else if (key == "gnn.lr") gnn.learning_rate = parse_number<double>(key, value);
  else if (key == "gnn.weight_decay") gnn.weight_decay = parse_number<double>(key, value);
  else if (key == "gnn.val_fraction") gnn.val_fraction = parse_number<double>(key, value);
  else if (key == "gnn.gat_heads") gnn.gat_heads = parse_number<std::size_t>(key, value);
  else if (key == "gnn.gin_hidden") gnn.gin_hidden = parse_number<std::size_t>(key, value);
  else if (key == "sample_size") sample_size = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else throw UsageError("unknown configuration key \"" + key + "\"");
}

/// Parses `key = value` lines; '#' starts a comment.
inline void apply_config_text(PipelineConfig& config, const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      config.set(detail::trim(stripped.substr(0, eq)), detail::trim(stripped.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

inline void apply_config_file(PipelineConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_config_text(config, buffer.str(), path);
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  PipelineConfig config;
  apply_config_file(config, path);
  return config;
}

// ---------------------------------------------------------------------------
// Digests, manifests and the output-directory lock.

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file for digest: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buffer;
  while (in) {
    in.read(buffer.data(), buffer.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

class Manifest {
 public:
  void add(nlohmann::json record) { records_.push_back(std::move(record)); }

  void add_file(const std::string& role, const std::string& path, const std::string& display) {
    add({{"record", role}, {"path", display}, {"sha256", sha256_file(path)}});
  }

  const std::vector<nlohmann::json>& records() const { return records_; }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path);
    for (const auto& r : records_) out << r.dump() << '\n';
  }

 private:
  std::vector<nlohmann::json> records_;
};

inline std::vector<nlohmann::json> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

/// Exclusive lock on an output directory, held for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::string& dir) : path_((fs::path(dir) / ".sesame.lock").string()) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw UsageError("output directory " + dir + " is locked by another run (remove " + path_ +
                       " if no run is active)");
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() {
    ::close(fd_);
    ::unlink(path_.c_str());
  }

 private:
  std::string path_;
  int fd_ = -1;
};

namespace artifacts {
inline constexpr const char* labeled_corpus = "labeled.jsonl";
inline constexpr const char* refiner = "refiner.sckp";
inline constexpr const char* features = "features.sesm";
inline constexpr const char* graph = "graph.sgrf";
inline constexpr const char* model = "model.sckp";
inline constexpr const char* history = "history.jsonl";
inline constexpr const char* report = "report.json";
inline constexpr const char* train_manifest = "manifest.jsonl";
inline constexpr const char* extended_graph = "extended.sgrf";
inline constexpr const char* predictions = "labels.jsonl";
inline constexpr const char* sample = "sample.jsonl";
inline constexpr const char* finetune_manifest = "finetune-manifest.jsonl";
}  // namespace artifacts

using LogSink = std::function<void(const std::string&)>;

namespace detail {

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " path is not set");
  if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path);
}

inline void check_no_collisions(const PipelineConfig& config) {
  const std::vector<std::pair<std::string, std::string>> inputs{{"corpus", config.corpus},
                                                                {"embeddings", config.embeddings},
                                                                {"holdout_corpus", config.holdout_corpus},
                                                                {"holdout_embeddings", config.holdout_embeddings}};
  const char* outputs[] = {artifacts::labeled_corpus, artifacts::refiner,       artifacts::features,
                           artifacts::graph,          artifacts::model,         artifacts::history,
                           artifacts::report,         artifacts::train_manifest, artifacts::extended_graph,
                           artifacts::predictions,    artifacts::sample,        artifacts::finetune_manifest};
  for (const auto& [key, path] : inputs) {
    if (path.empty()) continue;
    const auto in = fs::weakly_canonical(path);
    for (const char* name : outputs) {
      if (in == fs::weakly_canonical(fs::path(config.output_dir) / name)) {
        throw UsageError(key + " path " + path + " would be overwritten by output artifact " + name);
      }
    }
  }
}

inline GraphOptions resolve_graph_options(const PipelineConfig& config, std::size_t nodes) {
  GraphOptions g = config.graph;
  g.mode = config.index_mode.value_or(nodes < 5000 ? IndexMode::exact : IndexMode::approximate);
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Train pass.

struct TrainPassResult {
  SemanticGraph graph;
  EvalReport validation;
  EvalReport random_baseline;
  std::size_t best_epoch = 0;
  fs::path manifest;
};

/// bucketize -> (refine) -> build_graph -> train_gnn -> eval, persisting
/// every artifact in config.output_dir.
inline TrainPassResult run_train_pass(PipelineConfig config, const LogSink& log = {}) {
  config.propagate_seed();
  detail::require_file(config.corpus, "corpus");
  detail::require_file(config.embeddings, "embeddings file");
  detail::check_no_collisions(config);
  if (config.gnn.classes != config.buckets.classes()) config.gnn.classes = config.buckets.classes();

  fs::create_directories(config.output_dir);
  DirectoryLock lock(config.output_dir);
  const fs::path out = config.output_dir;
  auto note = [&](const std::string& msg) {
    if (log) log(msg);
  };

  Corpus corpus;
  EmbeddingMatrix embeddings;
  run_stage("load", [&] {
    corpus = load_corpus(config.corpus);
    embeddings = load_embeddings(config.embeddings, corpus.size());
  });

  std::vector<int> labels;
  run_stage("bucketize", [&] {
    assign_labels(corpus, config.buckets);
    for (const auto& u : corpus) labels.push_back(*u.class_label);
    save_corpus((out / artifacts::labeled_corpus).string(), corpus);
  });

  config.gnn.input_dim = embeddings.dim;
  const DataSplit split = run_stage("split", [&] {
    auto s = validation_split(labels, std::vector<bool>(labels.size(), false), config.gnn.val_fraction, config.seed);
    if (s.train.empty()) throw DataError("no training nodes after the validation split");
    return s;
  });

  EmbeddingMatrix features = embeddings;
  if (config.refine) {
    run_stage("refine", [&] {
      std::vector<int> train_labels(labels.size(), -1);
      for (std::size_t i : split.train) train_labels[i] = labels[i];
      RefinerResult refined = refine_embeddings(embeddings, train_labels, config.refiner);
      save_checkpoint((out / artifacts::refiner).string(), refined.model.to_checkpoint());
      features = std::move(refined.refined);
      note("refiner trained for " + std::to_string(config.refiner.epochs) + " epochs");
    });
  } else {
    fs::remove(out / artifacts::refiner);
  }

  TrainPassResult result;
  run_stage("build-graph", [&] {
    save_embeddings((out / artifacts::features).string(), features);
    result.graph = build_graph(features, labels, detail::resolve_graph_options(config, features.count));
    save_graph((out / artifacts::graph).string(), result.graph);
    note("graph: " + std::to_string(result.graph.node_count()) + " nodes, " +
         std::to_string(result.graph.edge_count()) + " edges");
  });

  TrainResult trained = run_stage("train", [&] {
    auto r = train_gnn(result.graph, features, config.gnn, split);
    save_checkpoint((out / artifacts::model).string(), r.model.to_checkpoint());
    std::ofstream history(out / artifacts::history, std::ios::binary);
    for (const auto& rec : r.history) history << rec.to_json().dump() << '\n';
    return r;
  });
  result.best_epoch = trained.best_epoch;

  nlohmann::json report;
  run_stage("eval", [&] {
    const auto pred = predict_all(trained.model, result.graph, features);
    const auto& eval_nodes = split.validation.empty() ? split.train : split.validation;
    std::vector<int> p, t;
    for (std::size_t i : eval_nodes) {
      p.push_back(pred[i]);
      t.push_back(labels[i]);
    }
    result.validation = evaluate(p, t, config.gnn.classes);
    result.random_baseline = expected_random_baseline(t, config.gnn.classes);
    report = {{"split", split.validation.empty() ? "train" : "validation"},
              {"model", result.validation.to_json()},
              {"random", result.random_baseline.to_json()},
              {"best_epoch", trained.best_epoch},
              {"best_val_loss", trained.best_loss}};
    if (result.graph.edge_count() > 0) {
      report["edge_homophily"] = edge_homophily(result.graph);
      report["neighborhood_homophily"] = neighborhood_homophily(result.graph).to_json();
    }
    std::ofstream(out / artifacts::report, std::ios::binary) << report.dump(2) << '\n';
    note("validation accuracy " + std::to_string(result.validation.accuracy) + " (random " +
         std::to_string(result.random_baseline.accuracy) + ")");
  });

  run_stage("manifest", [&] {
    Manifest m;
    m.add({{"record", "run"}, {"pass", "train"}, {"seed", config.seed}});
    auto settings = config.to_json();
    settings.erase("output_dir");  // artifact paths are recorded relative to it
    m.add({{"record", "config"}, {"config", settings}});
    m.add_file("input", config.corpus, config.corpus);
    m.add_file("input", config.embeddings, config.embeddings);
    for (const char* name : {artifacts::labeled_corpus, artifacts::refiner, artifacts::features, artifacts::graph,
                             artifacts::model, artifacts::history, artifacts::report}) {
      if (fs::exists(out / name)) m.add_file("output", (out / name).string(), name);
    }
    m.add({{"record", "metrics"}, {"metrics", report}});
    result.manifest = out / artifacts::train_manifest;
    m.write(result.manifest.string());
  });
  return result;
}

// ---------------------------------------------------------------------------
// Fine-tune pass.

struct LabeledPrediction {
  std::string id;
  int predicted_class = 0;
  std::vector<double> scores;
  bool isolated = false;
};

struct FinetunePassResult {
  std::vector<LabeledPrediction> predictions;
  SampleResult sample;
  std::size_t isolated = 0;
  std::vector<std::size_t> histogram;  // predicted class counts
  std::vector<std::string> warnings;
  fs::path manifest;
};

/// extend_graph -> predict -> sample_difficult on the holdout set, using
/// the train-pass artifacts in config.output_dir.
inline FinetunePassResult run_finetune_pass(PipelineConfig config, const LogSink& log = {}) {
  config.propagate_seed();
  if (config.sample_size == 0) throw UsageError("sample size must be at least 1");
  detail::require_file(config.holdout_corpus, "holdout corpus");
  detail::require_file(config.holdout_embeddings, "holdout embeddings file");
  detail::check_no_collisions(config);
  const fs::path out = config.output_dir;
  for (const char* name : {artifacts::graph, artifacts::model, artifacts::features}) {
    detail::require_file((out / name).string(), std::string("train-pass artifact ") + name);
  }
  DirectoryLock lock(config.output_dir);
  auto note = [&](const std::string& msg) {
    if (log) log(msg);
  };

  Corpus holdout_corpus;
  EmbeddingMatrix holdout;
  SemanticGraph graph;
  EmbeddingMatrix features;
  GnnModel<float> model;
  run_stage("load", [&] {
    holdout_corpus = load_corpus(config.holdout_corpus);
    holdout = load_embeddings(config.holdout_embeddings, holdout_corpus.size());
    graph = load_graph((out / artifacts::graph).string());
    features = load_embeddings((out / artifacts::features).string(), graph.node_count());
    model = GnnModel<float>::from_checkpoint(load_checkpoint((out / artifacts::model).string()));
    if (fs::exists(out / artifacts::refiner)) {
      const auto refiner = RefinerModel<float>::from_checkpoint(load_checkpoint((out / artifacts::refiner).string()));
      if (refiner.dim() != holdout.dim) {
        throw DataError("refiner dimension " + std::to_string(refiner.dim()) + " does not match holdout dimension " +
                        std::to_string(holdout.dim));
      }
      holdout = refiner.apply(holdout);
    }
    if (model.config().input_dim != features.dim || features.dim != holdout.dim) {
      throw DataError("dimension mismatch: model expects " + std::to_string(model.config().input_dim) +
                      ", graph features have " + std::to_string(features.dim) + ", holdout has " +
                      std::to_string(holdout.dim));
    }
  });

  FinetunePassResult result;
  SemanticGraph extended;
  run_stage("extend-graph", [&] {
    auto ext = extend_graph(graph, features, holdout,
                            detail::resolve_graph_options(config, graph.node_count() + holdout.count));
    extended = std::move(ext.graph);
    result.isolated = ext.isolated_holdout;
    save_graph((out / artifacts::extended_graph).string(), extended);
    if (result.isolated > 0) {
      const std::string msg = "warning: " + std::to_string(result.isolated) + " of " + std::to_string(holdout.count) +
                              " holdout nodes are isolated (no training neighbor above the similarity threshold)";
      result.warnings.push_back(msg);
      note(msg);
    }
  });

  run_stage("predict", [&] {
    const auto all = concat_rows(features, holdout);
    const auto preds = predict(model, extended, all);
    result.histogram.assign(model.config().classes, 0);
    std::ofstream labels_out(out / artifacts::predictions, std::ios::binary);
    for (const auto& p : preds) {
      LabeledPrediction lp;
      lp.id = holdout_corpus[p.node - graph.node_count()].id;
      lp.predicted_class = p.predicted_class;
      lp.scores = p.scores;
      lp.isolated = extended.degree(p.node) == 0;
      ++result.histogram[static_cast<std::size_t>(lp.predicted_class)];
      labels_out << nlohmann::json{{"id", lp.id}, {"predicted_class", lp.predicted_class}, {"scores", lp.scores},
                                   {"isolated", lp.isolated}}
                        .dump()
                 << '\n';
      result.predictions.push_back(std::move(lp));
    }
  });

  run_stage("sample", [&] {
    std::vector<std::pair<std::string, int>> pairs;
    std::map<std::string, const LabeledPrediction*> by_id;
    for (const auto& p : result.predictions) {
      pairs.emplace_back(p.id, p.predicted_class);
      by_id[p.id] = &p;
    }
    result.sample = sample_difficult(pairs, config.sample_size, config.seed);
    if (result.sample.shortage) {
      const std::string msg = "warning: only " + std::to_string(result.sample.selected.size()) +
                              " holdout utterances available for a sample of " + std::to_string(config.sample_size);
      result.warnings.push_back(msg);
      note(msg);
    }
    std::ofstream sample_out(out / artifacts::sample, std::ios::binary);
    for (std::size_t rank = 0; rank < result.sample.selected.size(); ++rank) {
      const auto& p = *by_id.at(result.sample.selected[rank]);
      sample_out << nlohmann::json{{"id", p.id},
                                   {"predicted_class", p.predicted_class},
                                   {"rank", rank},
                                   {"boundary", p.predicted_class == result.sample.boundary_bucket},
                                   {"seed", config.seed},
                                   {"source", config.holdout_corpus}}
                        .dump()
                 << '\n';
    }
  });

  run_stage("manifest", [&] {
    Manifest m;
    m.add({{"record", "run"}, {"pass", "finetune"}, {"seed", config.seed}});
    auto settings = config.to_json();
    settings.erase("output_dir");  // artifact paths are recorded relative to it
    settings["gnn"] = model.config().to_json();
    m.add({{"record", "config"}, {"config", settings}});
    m.add_file("input", config.holdout_corpus, config.holdout_corpus);
    m.add_file("input", config.holdout_embeddings, config.holdout_embeddings);
    for (const char* name : {artifacts::graph, artifacts::model, artifacts::features, artifacts::refiner}) {
      if (fs::exists(out / name)) m.add_file("input", (out / name).string(), name);
    }
    for (const char* name : {artifacts::extended_graph, artifacts::predictions, artifacts::sample}) {
      m.add_file("output", (out / name).string(), name);
    }
    nlohmann::json taken = nlohmann::json::object();
    for (const auto& [bucket, count] : result.sample.taken) taken[std::to_string(bucket)] = count;
    m.add({{"record", "diagnostics"},
           {"holdout", result.predictions.size()},
           {"isolated", result.isolated},
           {"predicted_histogram", result.histogram},
           {"sample_size", result.sample.selected.size()},
           {"boundary_bucket", result.sample.boundary_bucket},
           {"taken", taken},
           {"shortage", result.sample.shortage}});
    result.manifest = out / artifacts::finetune_manifest;
    m.write(result.manifest.string());
  });
  return result;
}

}  // namespace sesame
