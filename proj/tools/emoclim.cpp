// emoclim: split, train, evaluate and probe image/music emotion embeddings.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "emoclim/emoclim.hpp"

namespace fs = std::filesystem;
using namespace emoclim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitFormat = 2;
constexpr int kExitConfig = 3;

// Fills `target` from `flag` when given, else from the config value.
template <typename T>
void prefer(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

std::string require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing ") + what + " (pass the flag or set it in --config)");
  return value;
}

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig{} : read_run_config(path); }

// --splits DIR expands to DIR/image_split.json and DIR/audio_split.json.
void expand_splits(RunConfig& cfg, const std::string& dir) {
  if (dir.empty()) return;
  cfg.image_split = (fs::path(dir) / "image_split.json").string();
  cfg.audio_split = (fs::path(dir) / "audio_split.json").string();
}

// ---------------------------------------------------------------- split

struct SplitArgs {
  std::string features, out;
  std::uint64_t seed = 0;
};

int run_split(const SplitArgs& a) {
  const auto data = load_dataset(a.features);
  const auto split = stratified_split(data, a.seed);
  write_split(a.out, split);
  std::printf("%s: %zu train, %zu val, %zu test -> %s\n", a.features.c_str(), split.train.size(), split.val.size(),
              split.test.size(), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, image_features, audio_features, image_split, audio_split, splits, out, log;
  std::optional<std::size_t> epochs, batch_size, embed_dim, hidden_dim;
  std::optional<double> lr, weight_decay, temperature, dropout;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  auto cfg = load_config(a.config);
  expand_splits(cfg, a.splits);
  auto set = [](std::string& target, const std::string& flag) {
    if (!flag.empty()) target = flag;
  };
  set(cfg.image_features, a.image_features);
  set(cfg.audio_features, a.audio_features);
  set(cfg.image_split, a.image_split);
  set(cfg.audio_split, a.audio_split);
  set(cfg.checkpoint_path, a.out);
  set(cfg.log_path, a.log);
  prefer(cfg.train.epochs, a.epochs);
  prefer(cfg.train.batch_size, a.batch_size);
  prefer(cfg.train.embed_dim, a.embed_dim);
  prefer(cfg.train.hidden_dim, a.hidden_dim);
  prefer(cfg.train.lr, a.lr);
  prefer(cfg.train.weight_decay, a.weight_decay);
  prefer(cfg.train.temperature, a.temperature);
  prefer(cfg.train.dropout, a.dropout);
  prefer(cfg.train.seed, a.seed);

  const fs::path ckpt_path = require(cfg.checkpoint_path, "--out");
  const fs::path log_path = cfg.log_path.empty() ? fs::path(ckpt_path.string() + ".log.jsonl") : fs::path(cfg.log_path);
  cfg.train.validate();
  if (cfg.train.epochs == 0) throw ConfigError("epochs must be positive: no checkpoint can be selected");

  const auto image = load_dataset(require(cfg.image_features, "--image-features"));
  const auto audio = load_dataset(require(cfg.audio_features, "--audio-features"));
  const auto image_split = read_split(require(cfg.image_split, "--image-split"));
  const auto audio_split = read_split(require(cfg.audio_split, "--audio-split"));

  std::string log_text;
  auto result = train(image, audio, image_split, audio_split, cfg.train,
                      [&](const EpochLog& e) { log_text += to_json(e).dump() + "\n"; });
  save_checkpoint(ckpt_path, result.best);
  write_file_atomic(log_path, log_text);
  std::printf("best epoch %zu, val loss %.6f -> %s\n", result.best.best_epoch, result.best.best_val_loss,
              ckpt_path.string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- eval-retrieval

struct EvalArgs {
  std::string config, ckpt, image_features, audio_features, image_split, audio_split, splits, out, csv;
  std::optional<std::size_t> k, threads;
};

int run_eval(const EvalArgs& a) {
  auto cfg = load_config(a.config);
  expand_splits(cfg, a.splits);
  auto set = [](std::string& target, const std::string& flag) {
    if (!flag.empty()) target = flag;
  };
  set(cfg.image_features, a.image_features);
  set(cfg.audio_features, a.audio_features);
  set(cfg.image_split, a.image_split);
  set(cfg.audio_split, a.audio_split);
  set(cfg.checkpoint_path, a.ckpt);
  prefer(cfg.k, a.k);
  prefer(cfg.threads, a.threads);
  if (cfg.k == 0) throw ConfigError("k must be positive");

  const auto ckpt = load_checkpoint(require(cfg.checkpoint_path, "--ckpt"));
  const auto image = load_dataset(require(cfg.image_features, "--image-features"));
  const auto audio = load_dataset(require(cfg.audio_features, "--audio-features"));
  const auto image_test = select(image, read_split(require(cfg.image_split, "--image-split")).test);
  const auto audio_test = select(audio, read_split(require(cfg.audio_split, "--audio-split")).test);

  const auto report = evaluate_retrieval(ckpt.model, image_test, audio_test, cfg.k, cfg.threads);
  if (!a.out.empty()) write_file_atomic(a.out, to_json(report).dump(2) + "\n");
  if (!a.csv.empty()) write_file_atomic(a.csv, to_csv(report));
  std::printf("%-16s %8s %8s\n", "direction", ("P@" + std::to_string(cfg.k)).c_str(), "MRR");
  for (const auto& d : report.directions) {
    std::printf("%-16s %8.2f %8.2f\n", d.name.c_str(), 100.0 * d.precision, 100.0 * d.mrr);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- embed

struct EmbedArgs {
  std::string ckpt, features, out;
};

int run_embed(const EmbedArgs& a) {
  const auto ckpt = load_checkpoint(a.ckpt);
  const auto data = load_dataset(a.features);
  const auto& head = data.modality == Modality::Image ? ckpt.model.image : ckpt.model.audio;
  if (data.dim != head.in_dim()) {
    throw ConfigError("feature dimension " + std::to_string(data.dim) + " does not match the checkpoint's " +
                      std::to_string(head.in_dim()));
  }
  FeatureFile out;
  out.modality = data.modality;
  out.taxonomy = data.taxonomy;
  out.feature_dim = static_cast<std::uint32_t>(head.embed_dim());
  for (const auto& rec : data.records) {
    out.records.push_back({rec.item_id, rec.source_label, Tensor2<float>(1, head.embed_dim(), embed_chunks(head, rec))});
  }
  write_feature_file(a.out, out);
  std::printf("%zu embeddings of width %zu -> %s\n", out.records.size(), head.embed_dim(), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- probe-tagging

struct ProbeArgs {
  std::string config, ckpt, tagged_features, tags, split, out;
  std::optional<std::size_t> hidden_dim, epochs, batch_size;
  std::optional<double> lr, weight_decay;
  std::optional<std::uint64_t> seed;
};

int run_probe(const ProbeArgs& a) {
  auto cfg = load_config(a.config);
  ProbeConfig pc = cfg.probe;
  pc.seed = cfg.train.seed;
  prefer(pc.hidden_dim, a.hidden_dim);
  prefer(pc.epochs, a.epochs);
  prefer(pc.batch_size, a.batch_size);
  prefer(pc.lr, a.lr);
  prefer(pc.weight_decay, a.weight_decay);
  prefer(pc.seed, a.seed);

  const auto features = read_feature_file(a.tagged_features);
  const fs::path tags_path = a.tags.empty() ? fs::path(a.tagged_features).replace_extension(".emot") : fs::path(a.tags);
  const auto tags = read_tag_file(tags_path);
  const auto split = read_split(a.split);

  std::optional<Checkpoint> ckpt;
  if (!a.ckpt.empty()) ckpt = load_checkpoint(a.ckpt);
  const ProjectionHead<float>* head = nullptr;
  if (ckpt) head = features.modality == Modality::Image ? &ckpt->model.image : &ckpt->model.audio;
  const ProbeInputs inputs(features, tags, head);
  const auto train_set = inputs.gather(split.train);
  const auto val_set = inputs.gather(split.val);
  const auto test_set = inputs.gather(split.test);

  const auto result = train_tag_probe(train_set.x, train_set.y, pc, &val_set.x, &val_set.y);
  const auto metrics = tag_metrics(result.probe.infer(test_set.x), test_set.y);
  nlohmann::json j = to_json(metrics);
  j["input"] = head ? "joint_embedding" : "raw_features";
  j["best_epoch"] = result.best_epoch;
  j["test_items"] = split.test.size();
  j["train_loss"] = result.train_loss;
  j["val_loss"] = result.val_loss;
  write_file_atomic(a.out, j.dump(2) + "\n");
  auto show = [](const std::optional<double>& v) { return v ? *v : std::nan(""); };
  std::printf("macro ROC-AUC %.4f  macro PR-AUC %.4f  (%zu of %u tags) -> %s\n", show(metrics.macro_roc_auc),
              show(metrics.macro_pr_auc), metrics.included_tags, unsigned(tags.num_tags), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t seeds = 20;
  double perturb = 0.0;
  double tolerance = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
  const auto started = std::chrono::steady_clock::now();
  const auto entries = run_gradcheck_suite({a.seed, a.seeds, 0.07, a.perturb});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::map<std::string, double> per_check;
  const GradCheckEntry* worst = nullptr;
  std::size_t failures = 0;
  for (const auto& e : entries) {
    auto& m = per_check[e.name];
    m = std::max(m, e.result.max_rel_error);
    if (!worst || e.result.max_rel_error > worst->result.max_rel_error) worst = &e;
    if (!(e.result.max_rel_error < a.tolerance)) ++failures;
  }
  for (const auto& [name, err] : per_check) std::printf("%-40s max rel error %.3e\n", name.c_str(), err);
  if (worst) {
    std::printf("worst: %s (seed %llu, %s) rel error %.6e\n", worst->name.c_str(),
                static_cast<unsigned long long>(worst->seed), worst->result.worst.c_str(),
                worst->result.max_rel_error);
  }
  std::printf("max_rel_error %.6e over %zu checks, %zu seeds, %.2fs\n", worst ? worst->result.max_rel_error : 0.0,
              entries.size(), a.seeds, seconds);
  std::printf("%s\n", failures == 0 ? "gradcheck OK" : "gradcheck FAILED");
  return failures == 0 ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out_dir;
  SyntheticConfig cfg;
  bool tags = false;
  std::size_t tag_items = 2000;
  std::uint16_t tag_count = 50;
};

int run_synth(const SynthArgs& a) {
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const auto pair = generate_synthetic(a.cfg);
  const auto image_path = dir / "image.emof";
  const auto audio_path = dir / "audio.emof";
  write_feature_file(image_path, pair.image);
  write_feature_file(audio_path, pair.audio);
  write_split(dir / "image_split.json", stratified_split(unify(pair.image), a.cfg.seed));
  write_split(dir / "audio_split.json", stratified_split(unify(pair.audio), a.cfg.seed));

  RunConfig run;
  run.train.seed = a.cfg.seed;
  run.image_features = image_path.string();
  run.audio_features = audio_path.string();
  run.image_split = (dir / "image_split.json").string();
  run.audio_split = (dir / "audio_split.json").string();
  run.checkpoint_path = (dir / "model.ckpt").string();
  run.log_path = (dir / "train.log.jsonl").string();
  write_file_atomic(dir / "config.json", to_json(run).dump(2) + "\n");

  if (a.tags) {
    SyntheticTagConfig tc;
    tc.items = a.tag_items;
    tc.dim = a.cfg.audio_dim;
    tc.tags = a.tag_count;
    tc.seed = a.cfg.seed;
    const auto tagged = generate_synthetic_tags(tc);
    write_feature_file(dir / "tagged.emof", tagged.features);
    write_tag_file(dir / "tagged.emot", tagged.tags);
    write_split(dir / "tagged_split.json", stratified_split(unify(tagged.features), a.cfg.seed));
  }
  std::printf("wrote %zu image and %zu audio items to %s\n", pair.image.records.size(), pair.audio.records.size(),
              dir.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emoclim: joint image/music emotion embeddings"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Stratified 80/10/10 split of an EMOF feature file");
  split->add_option("--features", split_args.features, "EMOF feature file")->required();
  split->add_option("--seed", split_args.seed, "split seed");
  split->add_option("--out", split_args.out, "output split JSON")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train both projection heads; keeps the best-validation checkpoint");
  train_cmd->add_option("--config", train_args.config, "run config JSON (flags override it)");
  train_cmd->add_option("--image-features", train_args.image_features, "image EMOF file");
  train_cmd->add_option("--audio-features", train_args.audio_features, "audio EMOF file");
  train_cmd->add_option("--image-split", train_args.image_split, "image split JSON");
  train_cmd->add_option("--audio-split", train_args.audio_split, "audio split JSON");
  train_cmd->add_option("--splits", train_args.splits, "directory holding image_split.json and audio_split.json");
  train_cmd->add_option("--out", train_args.out, "checkpoint path");
  train_cmd->add_option("--log", train_args.log, "JSON-lines epoch log (default: <out>.log.jsonl)");
  train_cmd->add_option("--epochs", train_args.epochs, "epochs (config default 15)");
  train_cmd->add_option("--batch-size", train_args.batch_size, "batch size (config default 64)");
  train_cmd->add_option("--embed-dim", train_args.embed_dim, "joint embedding width (config default 128)");
  train_cmd->add_option("--hidden-dim", train_args.hidden_dim, "hidden width, 0 = input width (config default 0)");
  train_cmd->add_option("--lr", train_args.lr, "learning rate (config default 1e-4)");
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "AdamW weight decay (config default 0.01)");
  train_cmd->add_option("--temperature", train_args.temperature, "contrastive temperature (config default 0.07)");
  train_cmd->add_option("--dropout", train_args.dropout, "dropout rate (config default 0.5)");
  train_cmd->add_option("--seed", train_args.seed, "run seed (config default 0)");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval-retrieval", "Precision@K and MRR in all four retrieval directions");
  eval->add_option("--config", eval_args.config, "run config JSON (flags override it)");
  eval->add_option("--ckpt", eval_args.ckpt, "checkpoint");
  eval->add_option("--image-features", eval_args.image_features, "image EMOF file");
  eval->add_option("--audio-features", eval_args.audio_features, "audio EMOF file");
  eval->add_option("--splits", eval_args.splits, "directory holding image_split.json and audio_split.json");
  eval->add_option("--image-split", eval_args.image_split, "image split JSON");
  eval->add_option("--audio-split", eval_args.audio_split, "audio split JSON");
  eval->add_option("--k", eval_args.k, "cutoff for precision (config default 5)");
  eval->add_option("--threads", eval_args.threads, "worker threads (config default 1)");
  eval->add_option("--out", eval_args.out, "report JSON");
  eval->add_option("--csv", eval_args.csv, "one-row CSV summary in percent");

  EmbedArgs embed_args;
  auto* embed = app.add_subcommand("embed", "Write joint embeddings as an EMOF file (one chunk per item)");
  embed->add_option("--ckpt", embed_args.ckpt, "checkpoint")->required();
  embed->add_option("--features", embed_args.features, "EMOF feature file")->required();
  embed->add_option("--out", embed_args.out, "output EMOF file")->required();

  ProbeArgs probe_args;
  auto* probe = app.add_subcommand("probe-tagging", "Train and score a multi-label tagging probe");
  probe->add_option("--config", probe_args.config, "run config JSON (probe_* keys, seed)");
  probe->add_option("--ckpt", probe_args.ckpt, "checkpoint; omit to probe raw chunk-mean features");
  probe->add_option("--tagged-features", probe_args.tagged_features, "EMOF feature file")->required();
  probe->add_option("--tags", probe_args.tags, "EMOT tag file (default: features path with .emot)");
  probe->add_option("--split", probe_args.split, "split JSON over the tagged items")->required();
  probe->add_option("--out", probe_args.out, "metrics JSON")->required();
  probe->add_option("--hidden-dim", probe_args.hidden_dim, "probe hidden width (config default 512)");
  probe->add_option("--epochs", probe_args.epochs, "probe epochs (config default 30)");
  probe->add_option("--batch-size", probe_args.batch_size, "probe batch size (config default 64)");
  probe->add_option("--lr", probe_args.lr, "probe learning rate (config default 1e-3)");
  probe->add_option("--weight-decay", probe_args.weight_decay, "probe weight decay (config default 0.01)");
  probe->add_option("--seed", probe_args.seed, "probe seed (config default 0)");

  GradcheckArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "Check every analytic gradient against central differences");
  grad->add_option("--seed", grad_args.seed, "first seed");
  grad->add_option("--seeds", grad_args.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", grad_args.tolerance, "pass threshold on relative error");
  grad->add_option("--perturb-gradient", grad_args.perturb, "test hook: offset added to one analytic gradient entry")
      ->group("");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a paired synthetic dataset, splits and a quickstart config");
  synth->add_option("--out-dir", synth_args.out_dir, "output directory")->required();
  synth->add_option("--seed", synth_args.cfg.seed, "generator and split seed");
  synth->add_option("--per-class", synth_args.cfg.per_class, "items per emotion per modality");
  synth->add_option("--image-dim", synth_args.cfg.image_dim, "image feature width");
  synth->add_option("--audio-dim", synth_args.cfg.audio_dim, "audio feature width");
  synth->add_option("--audio-chunks", synth_args.cfg.audio_chunks, "chunks per audio item");
  synth->add_option("--separation", synth_args.cfg.separation, "norm of class means");
  synth->add_option("--sigma", synth_args.cfg.sigma, "item spread around class means");
  synth->add_option("--dropped-per-label", synth_args.cfg.dropped_per_label,
                    "items per unmappable source label");
  synth->add_flag("--tags", synth_args.tags, "also write tagged.emof, tagged.emot and tagged_split.json");
  synth->add_option("--tag-items", synth_args.tag_items, "tagged items");
  synth->add_option("--tag-count", synth_args.tag_count, "tags per item");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*split) return run_split(split_args);
    if (*train_cmd) return run_train(train_args);
    if (*eval) return run_eval(eval_args);
    if (*embed) return run_embed(embed_args);
    if (*probe) return run_probe(probe_args);
    if (*grad) return run_gradcheck(grad_args);
    if (*synth) return run_synth(synth_args);
  } catch (const FormatError& e) {
    logger().error("format error: {}", e.what());
    return kExitFormat;
  } catch (const IntegrityError& e) {
    logger().error("integrity error: {}", e.what());
    return kExitFormat;
  } catch (const ConfigError& e) {
    logger().error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const TaxonomyError& e) {
    logger().error("taxonomy error: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    logger().error("{}", e.what());
    return kExitVerification;
  }
  return kExitOk;
}
