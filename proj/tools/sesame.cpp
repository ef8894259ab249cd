// sesame command-line tool: one subcommand per pipeline stage plus the two
// end-to-end passes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sesame/sesame.hpp"

namespace {

using namespace sesame;
using nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 42;

std::uint64_t env_seed() {
  const char* env = std::getenv("SESAME_SEED");
  if (!env || !*env) return kDefaultSeed;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("SESAME_SEED is not an unsigned integer: ") + env);
  }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) { return flag ? *flag : env_seed(); }

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(number) + ": malformed JSON: " + e.what());
    }
  }
  return out;
}

BucketSpec parse_buckets(const std::string& text) {
  if (text.empty()) return BucketSpec();
  PipelineConfig scratch;
  scratch.set("buckets", text);
  return scratch.buckets;
}

/// Class labels of a corpus: stored class, else bucketized WER, else unlabeled.
std::vector<int> corpus_labels(const Corpus& corpus, const BucketSpec& buckets) {
  std::vector<int> labels;
  for (const auto& u : corpus) {
    if (u.class_label) labels.push_back(*u.class_label);
    else if (u.wer) labels.push_back(bucketize(*u.wer, buckets));
    else labels.push_back(kUnlabeled);
  }
  return labels;
}

GraphOptions graph_options(std::size_t k, double threshold, const std::string& mode, std::uint64_t seed) {
  GraphOptions g;
  g.k = k;
  g.threshold = threshold;
  g.mode = parse_index_mode(mode);
  g.seed = seed;
  return g;
}

void write_prediction_lines(std::ostream& out, const std::vector<Prediction>& preds,
                            const std::vector<std::string>& ids) {
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out << json{{"id", ids[i]}, {"predicted_class", preds[i].predicted_class}, {"scores", preds[i].scores}}.dump()
        << '\n';
  }
}

struct GnnFlags {
  std::string arch = "gcn";
  std::size_t epochs = 2100;
  std::size_t layers = 4;
  std::size_t hidden = 128;
  std::string activation = "tanh";
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double drop_edge = 0.25;
  double val_fraction = 0.1;
  std::size_t gat_heads = 1;

  void attach(CLI::App* app) {
    app->add_option("--arch", arch, "gcn, gin, sage or gat")->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--layers", layers)->capture_default_str();
    app->add_option("--hidden", hidden)->capture_default_str();
    app->add_option("--activation", activation, "tanh or relu")->capture_default_str();
    app->add_option("--lr", lr)->capture_default_str();
    app->add_option("--weight-decay", weight_decay)->capture_default_str();
    app->add_option("--drop-edge", drop_edge)->capture_default_str();
    app->add_option("--val-fraction", val_fraction)->capture_default_str();
    app->add_option("--gat-heads", gat_heads)->capture_default_str();
  }

  GnnConfig config(std::size_t input_dim, std::size_t classes, std::uint64_t seed) const {
    GnnConfig c;
    c.architecture = parse_architecture(arch);
    c.epochs = epochs;
    c.layers = layers;
    c.hidden_dim = hidden;
    c.activation = parse_activation(activation);
    c.learning_rate = lr;
    c.weight_decay = weight_decay;
    c.drop_edge_p = drop_edge;
    c.val_fraction = val_fraction;
    c.gat_heads = gat_heads;
    c.input_dim = input_dim;
    c.classes = classes;
    c.seed = seed;
    return c;
  }
};

int cmd_wer(const std::string& ref_path, const std::string& hyp_path) {
  const auto refs = read_lines(ref_path);
  const auto hyps = read_lines(hyp_path);
  if (refs.size() != hyps.size()) {
    throw DataError("reference has " + std::to_string(refs.size()) + " lines, hypothesis has " +
                    std::to_string(hyps.size()));
  }
  WerScore total;
  std::cout << "line\tS\tD\tI\tN\tWER\n";
  for (std::size_t i = 0; i < refs.size(); ++i) {
    WerScore s;
    try {
      s = compute_wer(refs[i], hyps[i]);
    } catch (const DataError& e) {
      throw DataError(ref_path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    std::cout << i + 1 << '\t' << s.substitutions << '\t' << s.deletions << '\t' << s.insertions << '\t'
              << s.reference_length << '\t' << s.value() << '\n';
    total.substitutions += s.substitutions;
    total.deletions += s.deletions;
    total.insertions += s.insertions;
    total.hits += s.hits;
    total.reference_length += s.reference_length;
  }
  if (total.reference_length > 0) {
    std::cout << "total\t" << total.substitutions << '\t' << total.deletions << '\t' << total.insertions << '\t'
              << total.reference_length << '\t' << total.value() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sesame: difficulty prediction on semantic similarity graphs"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed (falls back to SESAME_SEED, then 42)");
  };

  // wer
  std::string ref_path, hyp_path;
  auto* wer = app.add_subcommand("wer", "word error rate per line pair and in aggregate");
  wer->add_option("--ref", ref_path, "reference transcripts, one per line")->required();
  wer->add_option("--hyp", hyp_path, "hypothesis transcripts, one per line")->required();

  // build-graph
  std::string corpus_path, emb_path, out_path, buckets_text, mode = "exact";
  std::size_t graph_k = 10;
  double threshold = 0.7;
  auto* build = app.add_subcommand("build-graph", "kNN similarity graph over labeled utterances");
  build->add_option("--corpus", corpus_path)->required();
  build->add_option("--embeddings", emb_path)->required();
  build->add_option("--k", graph_k)->capture_default_str();
  build->add_option("--threshold", threshold)->capture_default_str();
  build->add_option("--mode", mode, "exact or ann")->capture_default_str();
  build->add_option("--buckets", buckets_text, "comma-separated WER upper bounds");
  build->add_option("--out", out_path)->required();
  add_seed(build);

  // extend-graph
  std::string graph_path, holdout_corpus, holdout_emb;
  auto* extend = app.add_subcommand("extend-graph", "attach holdout utterances to a training graph");
  extend->add_option("--graph", graph_path)->required();
  extend->add_option("--embeddings", emb_path, "features of the existing graph nodes")->required();
  extend->add_option("--holdout-corpus", holdout_corpus)->required();
  extend->add_option("--holdout-embeddings", holdout_emb)->required();
  extend->add_option("--k", graph_k)->capture_default_str();
  extend->add_option("--threshold", threshold)->capture_default_str();
  extend->add_option("--mode", mode)->capture_default_str();
  extend->add_option("--out", out_path)->required();
  add_seed(extend);

  // refine-embeddings
  RefinerConfig refiner;
  std::string refiner_model;
  auto* refine = app.add_subcommand("refine-embeddings", "contrastive MLP refinement of embeddings");
  refine->add_option("--corpus", corpus_path)->required();
  refine->add_option("--embeddings", emb_path)->required();
  refine->add_option("--epochs", refiner.epochs)->capture_default_str();
  refine->add_option("--temperature", refiner.temperature)->capture_default_str();
  refine->add_option("--batch-size", refiner.batch_size)->capture_default_str();
  refine->add_option("--lr", refiner.learning_rate)->capture_default_str();
  refine->add_option("--buckets", buckets_text);
  refine->add_option("--model-out", refiner_model, "also save the refiner checkpoint");
  refine->add_option("--out", out_path)->required();
  add_seed(refine);

  // train
  GnnFlags gnn_flags;
  std::string history_path;
  auto* train = app.add_subcommand("train", "train a GNN on a labeled graph");
  train->add_option("--graph", graph_path)->required();
  train->add_option("--embeddings", emb_path, "node features, one row per graph node")->required();
  train->add_option("--history", history_path, "per-epoch metrics as JSON lines");
  train->add_option("--out", out_path)->required();
  gnn_flags.attach(train);
  add_seed(train);

  // predict
  std::string model_path;
  auto* pred = app.add_subcommand("predict", "predict difficulty classes of holdout nodes");
  pred->add_option("--model", model_path)->required();
  pred->add_option("--graph", graph_path, "graph with holdout nodes appended")->required();
  pred->add_option("--embeddings", emb_path, "features of the training nodes")->required();
  pred->add_option("--holdout-embeddings", holdout_emb, "features of the holdout nodes")->required();
  pred->add_option("--holdout-corpus", holdout_corpus, "holdout ids (default: node-<index>)");
  pred->add_option("--out", out_path)->required();

  // eval
  std::string pred_path, truth_path, records_path;
  std::size_t classes = 7;
  auto* eval = app.add_subcommand("eval", "score predictions against a labeled corpus");
  eval->add_option("--pred", pred_path)->required();
  eval->add_option("--truth", truth_path)->required();
  eval->add_option("--buckets", buckets_text);
  eval->add_option("--records", records_path, "write the report as JSON lines");

  // sample
  std::string labels_path;
  std::size_t sample_k = 900;
  auto* sample = app.add_subcommand("sample", "pick the k hardest predicted utterances");
  sample->add_option("--labels", labels_path)->required();
  sample->add_option("--k", sample_k)->capture_default_str();
  sample->add_option("--out", out_path)->required();
  add_seed(sample);

  // synth
  PlantedSpec planted;
  std::string prefix;
  auto* synth = app.add_subcommand("synth", "generate a planted synthetic corpus");
  synth->add_option("--n", planted.n)->capture_default_str();
  synth->add_option("--k", planted.k)->capture_default_str();
  synth->add_option("--dim", planted.dim)->capture_default_str();
  synth->add_option("--separation", planted.separation, "pairwise cosine of cluster centers")->capture_default_str();
  synth->add_option("--noise", planted.noise, "within-cluster noise")->capture_default_str();
  synth->add_option("--label-noise", planted.label_noise)->capture_default_str();
  synth->add_option("--out-prefix", prefix)->required();
  add_seed(synth);

  // run-train-pass / run-finetune-pass
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::size_t> sample_size;
  auto add_pipeline = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--set", overrides, "override one setting, key=value (repeatable)");
    sub->add_option("--corpus", corpus_path);
    sub->add_option("--embeddings", emb_path);
    sub->add_option("--holdout-corpus", holdout_corpus);
    sub->add_option("--holdout-embeddings", holdout_emb);
    sub->add_option("--out-dir", out_dir);
    sub->add_option("--sample-size", sample_size);
    add_seed(sub);
  };
  auto* train_pass = app.add_subcommand("run-train-pass", "bucketize, refine, build graph, train and evaluate");
  add_pipeline(train_pass);
  auto* finetune_pass = app.add_subcommand("run-finetune-pass", "extend graph, predict holdout and sample");
  add_pipeline(finetune_pass);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorKind::usage);
  }

  auto log = [](const std::string& msg) { std::cerr << msg << '\n'; };

  try {
    if (*wer) return cmd_wer(ref_path, hyp_path);

    if (*build) {
      const auto buckets = parse_buckets(buckets_text);
      const Corpus corpus = load_corpus(corpus_path);
      const auto embeddings = load_embeddings(emb_path, corpus.size());
      const auto graph = build_graph(embeddings, corpus_labels(corpus, buckets),
                                     graph_options(graph_k, threshold, mode, resolve_seed(seed)));
      save_graph(out_path, graph);
      log("graph: " + std::to_string(graph.node_count()) + " nodes, " + std::to_string(graph.edge_count()) + " edges");
      return 0;
    }

    if (*extend) {
      const auto graph = load_graph(graph_path);
      const auto embeddings = load_embeddings(emb_path, graph.node_count());
      const Corpus corpus = load_corpus(holdout_corpus);
      const auto holdout = load_embeddings(holdout_emb, corpus.size());
      const auto ext = extend_graph(graph, embeddings, holdout, graph_options(graph_k, threshold, mode, resolve_seed(seed)));
      save_graph(out_path, ext.graph);
      if (ext.isolated_holdout > 0) {
        log("warning: " + std::to_string(ext.isolated_holdout) + " of " + std::to_string(holdout.count) +
            " holdout nodes are isolated");
      }
      return 0;
    }

    if (*refine) {
      const auto buckets = parse_buckets(buckets_text);
      const Corpus corpus = load_corpus(corpus_path);
      const auto embeddings = load_embeddings(emb_path, corpus.size());
      refiner.seed = resolve_seed(seed);
      const auto result = refine_embeddings(embeddings, corpus_labels(corpus, buckets), refiner);
      save_embeddings(out_path, result.refined);
      if (!refiner_model.empty()) save_checkpoint(refiner_model, result.model.to_checkpoint());
      for (int c : result.excluded_classes) log("class " + std::to_string(c) + " has fewer than 2 members; excluded");
      if (!result.epoch_loss.empty()) log("final loss " + std::to_string(result.epoch_loss.back()));
      return 0;
    }

    if (*train) {
      const auto graph = load_graph(graph_path);
      const auto features = load_embeddings(emb_path, graph.node_count());
      int max_label = 0;
      for (int l : graph.labels()) max_label = std::max(max_label, l);
      const GnnConfig config =
          gnn_flags.config(features.dim, std::max<std::size_t>(7, static_cast<std::size_t>(max_label) + 1),
                           resolve_seed(seed));
      const auto result = train_gnn(graph, features, config);
      save_checkpoint(out_path, result.model.to_checkpoint());
      if (!history_path.empty()) {
        std::ofstream h(history_path);
        for (const auto& rec : result.history) h << rec.to_json().dump() << '\n';
      }
      if (!result.history.empty()) {
        const auto& best = result.history[result.best_epoch];
        log("best epoch " + std::to_string(best.epoch) + ": val loss " + std::to_string(best.val_loss) +
            ", val accuracy " + std::to_string(best.val_accuracy));
      }
      return 0;
    }

    if (*pred) {
      auto model = GnnModel<float>::from_checkpoint(load_checkpoint(model_path));
      const auto graph = load_graph(graph_path);
      const std::size_t holdout_n = graph.holdout_count();
      const auto train_features = load_embeddings(emb_path, graph.node_count() - holdout_n);
      const auto holdout_features = load_embeddings(holdout_emb, holdout_n);
      const auto preds = predict(model, graph, concat_rows(train_features, holdout_features));
      std::vector<std::string> ids;
      if (!holdout_corpus.empty()) {
        const Corpus corpus = load_corpus(holdout_corpus);
        if (corpus.size() != holdout_n) {
          throw CountMismatchError("holdout corpus has " + std::to_string(corpus.size()) + " entries, graph has " +
                                   std::to_string(holdout_n) + " holdout nodes");
        }
        for (const auto& u : corpus) ids.push_back(u.id);
      } else {
        for (const auto& p : preds) ids.push_back("node-" + std::to_string(p.node));
      }
      std::ofstream out(out_path);
      if (!out) throw DataError("cannot write " + out_path);
      write_prediction_lines(out, preds, ids);
      return 0;
    }

    if (*eval) {
      const auto buckets = parse_buckets(buckets_text);
      classes = buckets.classes();
      const Corpus truth_corpus = load_corpus(truth_path);
      std::map<std::string, int> truth_by_id;
      const auto truth_labels = corpus_labels(truth_corpus, buckets);
      for (std::size_t i = 0; i < truth_corpus.size(); ++i) truth_by_id[truth_corpus[i].id] = truth_labels[i];
      std::vector<int> p, t;
      for (const auto& rec : read_jsonl(pred_path)) {
        const auto id = rec.at("id").get<std::string>();
        const auto it = truth_by_id.find(id);
        if (it == truth_by_id.end()) throw DataError("prediction for unknown id " + id);
        if (it->second < 0) throw DataError("truth corpus has no label for id " + id);
        p.push_back(rec.at("predicted_class").get<int>());
        t.push_back(it->second);
      }
      const auto report = evaluate(p, t, classes);
      std::cout << report.to_text();
      if (!records_path.empty()) {
        std::ofstream out(records_path);
        out << json{{"record", "eval"}, {"report", report.to_json()}}.dump() << '\n';
        out << json{{"record", "random"}, {"report", expected_random_baseline(t, classes).to_json()}}.dump() << '\n';
      }
      return 0;
    }

    if (*sample) {
      if (sample_k == 0) throw UsageError("--k must be at least 1");
      std::vector<std::pair<std::string, int>> predictions;
      for (const auto& rec : read_jsonl(labels_path)) {
        predictions.emplace_back(rec.at("id").get<std::string>(), rec.at("predicted_class").get<int>());
      }
      const auto s = sample_difficult(predictions, sample_k, resolve_seed(seed));
      std::map<std::string, int> cls(predictions.begin(), predictions.end());
      std::ofstream out(out_path);
      if (!out) throw DataError("cannot write " + out_path);
      for (std::size_t rank = 0; rank < s.selected.size(); ++rank) {
        out << json{{"id", s.selected[rank]},
                    {"predicted_class", cls[s.selected[rank]]},
                    {"rank", rank},
                    {"boundary", cls[s.selected[rank]] == s.boundary_bucket},
                    {"seed", resolve_seed(seed)},
                    {"source", labels_path}}
                   .dump()
            << '\n';
      }
      if (s.shortage) log("warning: only " + std::to_string(s.selected.size()) + " utterances available");
      return 0;
    }

    if (*synth) {
      planted.seed = resolve_seed(seed);
      if (planted.k != planted.buckets.classes()) planted.buckets = uniform_buckets(planted.k);
      const auto data = generate_planted(planted);
      save_corpus(prefix + ".jsonl", data.corpus);
      save_embeddings(prefix + ".sesm", data.embeddings);
      log("wrote " + prefix + ".jsonl and " + prefix + ".sesm");
      return 0;
    }

    if (*train_pass || *finetune_pass) {
      PipelineConfig config;
      config.seed = env_seed();
      if (!config_path.empty()) apply_config_file(config, config_path);
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got \"" + o + "\"");
        config.set(o.substr(0, eq), o.substr(eq + 1));
      }
      if (!corpus_path.empty()) config.corpus = corpus_path;
      if (!emb_path.empty()) config.embeddings = emb_path;
      if (!holdout_corpus.empty()) config.holdout_corpus = holdout_corpus;
      if (!holdout_emb.empty()) config.holdout_embeddings = holdout_emb;
      if (!out_dir.empty()) config.output_dir = out_dir;
      if (sample_size) config.sample_size = *sample_size;
      if (seed) config.seed = *seed;

      if (*train_pass) {
        const auto r = run_train_pass(config, log);
        std::cout << "validation\n" << r.validation.to_text() << "manifest " << r.manifest.string() << '\n';
      } else {
        const auto r = run_finetune_pass(config, log);
        std::cout << "holdout " << r.predictions.size() << "\nisolated " << r.isolated << "\nsampled "
                  << r.sample.selected.size() << "\nboundary bucket " << r.sample.boundary_bucket << "\nmanifest "
                  << r.manifest.string() << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::data);
  }
  return exit_code(ErrorKind::usage);
}
