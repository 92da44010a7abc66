#include "pmcqa/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "pmcqa/corpus.hpp"
#include "pmcqa/diagnostics.hpp"
#include "pmcqa/errors.hpp"
#include "pmcqa/evaluator.hpp"
#include "pmcqa/kvconfig.hpp"
#include "pmcqa/manifest.hpp"
#include "pmcqa/model.hpp"
#include "pmcqa/synth.hpp"
#include "pmcqa/trainer.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {
namespace {

namespace fs = std::filesystem;

std::string timestamp_run_dir() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "pmcqa-run-%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t get_size_or(const KvConfig& cfg, const std::string& key, std::size_t fallback) {
  long long v = cfg.get_int_or(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError(cfg.origin() + ": key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> values;
  for (const std::string& field : split_char(text, ',')) {
    std::string token = trimmed(field);
    if (token.empty()) throw ArgumentError(what + ": empty entry in list '" + text + "'");
    long long v = parse_int(token, what);
    if (v < 0) throw ArgumentError(what + ": negative entry in list '" + text + "'");
    values.push_back(static_cast<std::size_t>(v));
  }
  if (values.empty()) throw ArgumentError(what + ": empty list");
  return values;
}

// One normalized answer per line, first occurrence kept.
std::vector<std::string> read_answer_list(const std::string& path) {
  std::vector<std::string> answers;
  std::set<std::string> seen;
  for (const std::string& line : split_char(read_file(path), '\n')) {
    std::string a = normalize_answer(line);
    if (a.empty() || !seen.insert(a).second) continue;
    answers.push_back(std::move(a));
  }
  if (answers.empty()) throw FormatError("answer list '" + path + "' holds no answers");
  return answers;
}

// Flag values shared across subcommands. Empty string / npos mean "not given".
struct Invocation {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  std::string checkpoint;
  std::string mode;
  std::string target;
  std::string candidates;
  std::string m_list;
};

struct RunContext {
  KvConfig cfg;
  std::uint64_t seed = 1;
  fs::path out;
  ManifestBuilder manifest;
  std::ostream& stream;
};

RunContext make_context(const std::string& name, const Invocation& inv, std::ostream& out) {
  KvConfig cfg = inv.config_path.empty() ? KvConfig::parse_string("", "<defaults>")
                                         : KvConfig::parse_file(inv.config_path);
  std::uint64_t seed = cfg.get_seed_or("seed", 1);
  if (inv.seed_given) seed = inv.seed_flag;
  fs::path dir = inv.out_dir.empty() ? fs::path(timestamp_run_dir()) : fs::path(inv.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
  RunContext ctx{std::move(cfg), seed, std::move(dir), ManifestBuilder(name, seed), out};
  ctx.manifest.set_config(ctx.cfg);
  return ctx;
}

std::string dataset_name(const std::string& triplet_path) {
  std::string stem = fs::path(triplet_path).stem().string();
  return stem.empty() ? "dataset" : stem;
}

// --- subcommand: gen-synth ---------------------------------------------------

void cmd_gen_synth(RunContext& ctx) {
  SynthSpec spec;
  spec.num_attributes = get_size_or(ctx.cfg, "num_attributes", spec.num_attributes);
  spec.values_per_attribute =
      get_size_or(ctx.cfg, "values_per_attribute", spec.values_per_attribute);
  spec.words_per_value = get_size_or(ctx.cfg, "words_per_value", spec.words_per_value);
  spec.train_vocab = get_size_or(ctx.cfg, "train_vocab", spec.train_vocab);
  spec.target_vocab = get_size_or(ctx.cfg, "target_vocab", spec.target_vocab);
  spec.overlap_fraction = ctx.cfg.get_double_or("overlap_fraction", spec.overlap_fraction);
  spec.train_triplets = get_size_or(ctx.cfg, "train_triplets", spec.train_triplets);
  spec.target_triplets = get_size_or(ctx.cfg, "target_triplets", spec.target_triplets);
  spec.num_incorrect = get_size_or(ctx.cfg, "num_incorrect", spec.num_incorrect);
  spec.feature_noise = ctx.cfg.get_double_or("feature_noise", spec.feature_noise);
  spec.word_dim = get_size_or(ctx.cfg, "word_dim", spec.word_dim);
  spec.feature_dim = get_size_or(ctx.cfg, "feature_dim", spec.feature_dim);
  ctx.cfg.finish();

  SynthData data = generate_synthetic(spec, ctx.seed);
  write_synthetic(data, ctx.out.string());
  ctx.manifest.write((ctx.out / "manifest.txt").string());

  ctx.stream << "wrote synthetic corpus under " << ctx.out.string() << " ("
             << data.train.triplets.size() << " train / " << data.target.triplets.size()
             << " target records, " << data.words.size() << " words)\n";
}

// --- subcommand: train / sweep-negatives --------------------------------------

// Loaded training inputs. The similarity table lives here so the weighting
// rule's pointer stays valid for as long as the setup does.
struct TrainSetup {
  WordEmbeddingTable table;
  Dataset dataset;
  FeatureStore features;
  std::optional<SimilarityTable> similarity;
  TrainConfig config;
  std::string triplets_path;
  std::string features_path;
  std::string words_path;
  std::string similarity_path;
};

void load_train_setup(RunContext& ctx, TrainSetup& s) {
  const KvConfig& cfg = ctx.cfg;
  s.triplets_path = cfg.require_string("triplets");
  s.features_path = cfg.require_string("features");
  s.words_path = cfg.require_string("word_vectors");
  s.similarity_path = cfg.get_string_or("similarity", "");

  TrainConfig& tc = s.config;
  tc.model.family = family_from_name(cfg.get_string_or("family", "fpmc"));
  tc.model.hidden_dim = get_size_or(cfg, "hidden_dim", tc.model.hidden_dim);
  tc.model.embed_dim = get_size_or(cfg, "embed_dim", tc.model.embed_dim);
  tc.model.dropout_rate = cfg.get_double_or("dropout", tc.model.dropout_rate);
  tc.model.output_scale = cfg.get_double_or("output_scale", tc.model.output_scale);
  tc.model.g_mode = g_mode_from_name(cfg.get_string_or("g_mode", "learned_mlp"));
  tc.model.finetune_question = cfg.get_bool_or("finetune_question", true);
  tc.model.top_k = get_size_or(cfg, "top_k", tc.model.top_k);
  tc.batch_size = get_size_or(cfg, "batch_size", tc.batch_size);
  tc.negatives = cfg.get_int_or("negatives", tc.negatives);
  tc.epochs = static_cast<int>(cfg.get_int_or("epochs", tc.epochs));
  tc.schedule.base_lr = cfg.get_double_or("base_lr", tc.schedule.base_lr);
  tc.schedule.decay_epochs =
      static_cast<int>(cfg.get_int_or("decay_epochs", tc.schedule.decay_epochs));
  tc.weighting.kind = weight_kind_from_name(cfg.get_string_or("alpha", "one_hot"));
  tc.weighting.wups_threshold =
      cfg.get_double_or("wups_threshold", tc.weighting.wups_threshold);
  tc.weighting.exact_match_weight =
      cfg.get_double_or("exact_match_weight", tc.weighting.exact_match_weight);
  tc.negatives_by_frequency =
      cfg.get_bool_or("negatives_by_frequency", tc.negatives_by_frequency);
  tc.seed = ctx.seed;

  s.table = load_word_embeddings(s.words_path);
  auto [dataset, features] = load_dataset(s.triplets_path, s.features_path,
                                          dataset_name(s.triplets_path), Split::train);
  s.dataset = std::move(dataset);
  s.features = std::move(features);
  tc.model.word_dim = s.table.dim();
  tc.model.feature_dim = s.features.dim();
  if (!s.similarity_path.empty()) {
    s.similarity = load_similarity_table(s.similarity_path);
    tc.weighting.similarity = &*s.similarity;
  }

  ctx.manifest.add_input("triplets", s.triplets_path);
  ctx.manifest.add_input("features", s.features_path);
  ctx.manifest.add_input("word_vectors", s.words_path);
  if (!s.similarity_path.empty()) ctx.manifest.add_input("similarity", s.similarity_path);
}

void write_train_artifacts(const TrainResult& result, const fs::path& dir) {
  save_checkpoint(result.params, (dir / "checkpoint.txt").string());
  write_file((dir / "train_log.csv").string(), result.log.to_csv());
}

void cmd_train(RunContext& ctx) {
  TrainSetup setup;
  load_train_setup(ctx, setup);
  ctx.cfg.finish();

  TrainResult result = train(setup.dataset, setup.features, setup.table, setup.config);
  write_train_artifacts(result, ctx.out);
  ctx.manifest.write((ctx.out / "manifest.txt").string());

  ctx.stream << "trained " << family_name(setup.config.model.family) << " on "
             << setup.dataset.triplets.size() << " records for " << setup.config.epochs
             << " epochs";
  if (!result.log.epochs.empty())
    ctx.stream << ", final mean loss "
               << format_double(result.log.epochs.back().mean_loss);
  ctx.stream << "\nwrote " << (ctx.out / "checkpoint.txt").string() << "\n";
}

void cmd_sweep_negatives(RunContext& ctx, const Invocation& inv) {
  std::string m_text = ctx.cfg.get_string_or("m_list", "");
  if (!inv.m_list.empty()) m_text = inv.m_list;
  if (m_text.empty())
    throw ConfigError("sweep-negatives needs --m-list or an m_list config key");
  std::vector<std::size_t> ms = parse_size_list(m_text, "m-list");

  TrainSetup setup;
  load_train_setup(ctx, setup);
  std::string eval_triplets = ctx.cfg.get_string_or("eval_triplets", setup.triplets_path);
  std::string eval_features = ctx.cfg.get_string_or("eval_features", setup.features_path);
  EvalMode mode = eval_mode_from_name(ctx.cfg.get_string_or("eval_mode", "open_ended"));
  ctx.cfg.finish();

  Dataset eval_set;
  FeatureStore eval_store;
  if (eval_triplets == setup.triplets_path && eval_features == setup.features_path) {
    eval_set = setup.dataset;
    eval_store = setup.features;
  } else {
    auto [d, f] = load_dataset(eval_triplets, eval_features, dataset_name(eval_triplets),
                               Split::val);
    eval_set = std::move(d);
    eval_store = std::move(f);
    ctx.manifest.add_input("eval_triplets", eval_triplets);
    ctx.manifest.add_input("eval_features", eval_features);
  }

  std::ostringstream csv;
  csv << "m,accuracy,final_loss\n";
  for (std::size_t m : ms) {
    TrainConfig config = setup.config;
    config.negatives = static_cast<long long>(m);
    TrainResult result = train(setup.dataset, setup.features, setup.table, config);

    fs::path subdir = ctx.out / ("m_" + std::to_string(m));
    std::error_code ec;
    fs::create_directories(subdir, ec);
    if (ec) throw IoError("cannot create sweep directory '" + subdir.string() + "'");
    write_train_artifacts(result, subdir);

    std::span<const std::string> universe;
    if (mode == EvalMode::open_ended) universe = result.params.vocab.answers;
    EvalReport report =
        evaluate(result.params, eval_set, eval_store, setup.table, mode, universe);
    double final_loss =
        result.log.epochs.empty() ? 0.0 : result.log.epochs.back().mean_loss;
    csv << m << "," << format_double(report.overall) << "," << format_double(final_loss)
        << "\n";
    ctx.stream << "m = " << m << "  accuracy = " << format_double(report.overall) << "\n";
  }
  write_file((ctx.out / "sweep.csv").string(), csv.str());
  ctx.manifest.write((ctx.out / "manifest.txt").string());
  ctx.stream << "wrote " << (ctx.out / "sweep.csv").string() << "\n";
}

// --- subcommand: eval / transfer ----------------------------------------------

std::string resolve_flag(const KvConfig& cfg, const std::string& key,
                         const std::string& flag_value, const std::string& fallback) {
  std::string value = cfg.get_string_or(key, fallback);
  if (!flag_value.empty()) value = flag_value;
  return value;
}

// The checkpoint key must be consumed before finish(), so callers resolve the
// path first and hand it in.
ModelParams load_checked_model(RunContext& ctx, const std::string& path,
                               const WordEmbeddingTable& table) {
  if (path.empty())
    throw ConfigError("a checkpoint is required (--checkpoint or checkpoint key)");
  ModelParams params = load_checkpoint(path);
  if (params.config.word_dim != table.dim())
    throw ArgumentError("checkpoint expects word dimension " +
                        std::to_string(params.config.word_dim) + ", word vectors have " +
                        std::to_string(table.dim()));
  ctx.manifest.add_input("checkpoint", path);
  return params;
}

void check_feature_dim(const ModelParams& params, const FeatureStore& features) {
  if (params.config.feature_dim != features.dim())
    throw ArgumentError("checkpoint expects feature dimension " +
                        std::to_string(params.config.feature_dim) + ", feature file has " +
                        std::to_string(features.dim()));
}

void write_eval_artifacts(RunContext& ctx, const EvalReport& report) {
  write_file((ctx.out / "report.txt").string(), report.to_text());
  write_file((ctx.out / "predictions.csv").string(), report.to_csv());
  ctx.manifest.write((ctx.out / "manifest.txt").string());
  ctx.stream << report.to_text();
  ctx.stream << "wrote " << (ctx.out / "report.txt").string() << "\n";
}

void cmd_eval(RunContext& ctx, const Invocation& inv) {
  std::string triplets_path = ctx.cfg.require_string("triplets");
  std::string features_path = ctx.cfg.require_string("features");
  std::string words_path = ctx.cfg.require_string("word_vectors");
  EvalMode mode =
      eval_mode_from_name(resolve_flag(ctx.cfg, "mode", inv.mode, "multiple_choice"));
  std::string candidates_path = resolve_flag(ctx.cfg, "candidates", inv.candidates, "");
  std::string checkpoint_path = resolve_flag(ctx.cfg, "checkpoint", inv.checkpoint, "");
  ctx.cfg.finish();

  WordEmbeddingTable table = load_word_embeddings(words_path);
  ModelParams params = load_checked_model(ctx, checkpoint_path, table);
  auto [dataset, features] = load_dataset(triplets_path, features_path,
                                          dataset_name(triplets_path), Split::test);
  check_feature_dim(params, features);
  ctx.manifest.add_input("triplets", triplets_path);
  ctx.manifest.add_input("features", features_path);
  ctx.manifest.add_input("word_vectors", words_path);

  std::vector<std::string> universe;
  if (mode == EvalMode::open_ended) {
    if (!candidates_path.empty()) {
      universe = read_answer_list(candidates_path);
      ctx.manifest.add_input("candidates", candidates_path);
    } else {
      universe = params.vocab.answers;
    }
  } else if (!candidates_path.empty()) {
    throw ConfigError("--candidates applies to open_ended evaluation only");
  }

  EvalReport report = evaluate(params, dataset, features, table, mode, universe);
  write_eval_artifacts(ctx, report);
}

void cmd_transfer(RunContext& ctx, const Invocation& inv) {
  std::string target_triplets = resolve_flag(ctx.cfg, "target_triplets", inv.target, "");
  if (target_triplets.empty())
    throw ConfigError("transfer needs --target or a target_triplets config key");
  std::string target_features = ctx.cfg.require_string("target_features");
  std::string words_path = ctx.cfg.require_string("word_vectors");
  EvalMode mode =
      eval_mode_from_name(resolve_flag(ctx.cfg, "mode", inv.mode, "multiple_choice"));
  std::string source_name = ctx.cfg.get_string_or("candidate_source", "union_with_target");
  CandidateSource source;
  if (source_name == "union_with_target") source = CandidateSource::union_with_target;
  else if (source_name == "source_only") source = CandidateSource::source_only;
  else
    throw ConfigError("candidate_source must be union_with_target or source_only, got '" +
                      source_name + "'");
  std::string checkpoint_path = resolve_flag(ctx.cfg, "checkpoint", inv.checkpoint, "");
  ctx.cfg.finish();

  WordEmbeddingTable table = load_word_embeddings(words_path);
  ModelParams params = load_checked_model(ctx, checkpoint_path, table);
  auto [target, features] = load_dataset(target_triplets, target_features,
                                         dataset_name(target_triplets), Split::test);
  check_feature_dim(params, features);
  ctx.manifest.add_input("target_triplets", target_triplets);
  ctx.manifest.add_input("target_features", target_features);
  ctx.manifest.add_input("word_vectors", words_path);

  EvalReport report =
      transfer_evaluate(params, params.vocab, target, features, table, mode, source);
  write_eval_artifacts(ctx, report);
}

// --- subcommand: benchmark -----------------------------------------------------

void cmd_benchmark(RunContext& ctx) {
  std::size_t vocab_size = get_size_or(ctx.cfg, "vocab_size", 1000);
  std::size_t batch_size = get_size_or(ctx.cfg, "batch_size", 128);
  std::size_t repetitions = get_size_or(ctx.cfg, "repetitions", 20);
  ModelConfig base;
  base.word_dim = get_size_or(ctx.cfg, "word_dim", 16);
  base.feature_dim = get_size_or(ctx.cfg, "feature_dim", 32);
  base.hidden_dim = get_size_or(ctx.cfg, "hidden_dim", 64);
  base.embed_dim = get_size_or(ctx.cfg, "embed_dim", 32);
  ctx.cfg.finish();

  // benchmark models are freshly initialized; the stub table only fixes dims
  base.finetune_question = false;
  WordEmbeddingTable stub(base.word_dim);
  stub.put("w", Vec(base.word_dim, 0.0));
  AnswerVocabulary vocab;
  vocab.answers = {"w"};
  vocab.frequency = {1};
  vocab.index = {{"w", 0}};

  ModelConfig fpmc_config = base;
  fpmc_config.family = ModelFamily::fpmc;
  ModelConfig upmc_config = base;
  upmc_config.family = ModelFamily::upmc;
  ModelParams fpmc = init_params(fpmc_config, vocab, stub, ctx.seed);
  ModelParams upmc = init_params(upmc_config, vocab, stub, ctx.seed);

  BenchmarkReport report =
      benchmark_inference(fpmc, upmc, vocab_size, batch_size, repetitions, ctx.seed);

  std::ostringstream text;
  text << "vocab_size = " << report.vocab_size << "\n";
  text << "batch_size = " << report.batch_size << "\n";
  text << "repetitions = " << report.repetitions << "\n";
  text << "fpmc_ms_per_batch = " << format_double(report.fpmc_ms_per_batch) << "\n";
  text << "upmc_ms_per_batch = " << format_double(report.upmc_ms_per_batch) << "\n";
  text << "speedup = " << format_double(report.speedup) << "\n";
  write_file((ctx.out / "benchmark.txt").string(), text.str());
  ctx.manifest.write((ctx.out / "manifest.txt").string());
  ctx.stream << text.str();
}

// --- subcommand: gradcheck -------------------------------------------------------

void cmd_gradcheck(RunContext& ctx) {
  double step = ctx.cfg.get_double_or("step", 1e-5);
  double tolerance = ctx.cfg.get_double_or("tolerance", 1e-4);
  ctx.cfg.finish();

  struct Case {
    ModelFamily family;
    WeightKind kind;
  };
  std::vector<Case> cases;
  for (ModelFamily family : {ModelFamily::fpmc, ModelFamily::upmc})
    for (WeightKind kind :
         {WeightKind::one_hot, WeightKind::multi_hot, WeightKind::soft, WeightKind::wups})
      cases.push_back({family, kind});
  cases.push_back({ModelFamily::cls, WeightKind::one_hot});

  double worst = 0.0;
  std::ostringstream text;
  text << "family,alpha,max_rel_error\n";
  for (const Case& c : cases) {
    double err = gradcheck_model(c.family, c.kind, ctx.seed, step);
    worst = std::max(worst, err);
    text << family_name(c.family) << "," << weight_kind_name(c.kind) << ","
         << format_double(err) << "\n";
  }
  text << "worst = " << format_double(worst) << "\n";
  text << "tolerance = " << format_double(tolerance) << "\n";
  text << "status = " << (worst <= tolerance ? "pass" : "fail") << "\n";
  write_file((ctx.out / "gradcheck.txt").string(), text.str());
  ctx.manifest.write((ctx.out / "manifest.txt").string());
  ctx.stream << text.str();
  if (worst > tolerance)
    throw NumericError("gradient check failed: worst relative error " +
                       format_double(worst) + " exceeds " + format_double(tolerance));
}

// --- subcommand: export-embeddings ---------------------------------------------

void cmd_export_embeddings(RunContext& ctx, const Invocation& inv) {
  std::string words_path = ctx.cfg.require_string("word_vectors");
  std::string candidates_path = resolve_flag(ctx.cfg, "candidates", inv.candidates, "");
  std::string checkpoint_path = resolve_flag(ctx.cfg, "checkpoint", inv.checkpoint, "");
  ctx.cfg.finish();

  WordEmbeddingTable table = load_word_embeddings(words_path);
  ModelParams params = load_checked_model(ctx, checkpoint_path, table);
  ctx.manifest.add_input("word_vectors", words_path);

  std::vector<std::string> answers;
  if (!candidates_path.empty()) {
    answers = read_answer_list(candidates_path);
    ctx.manifest.add_input("candidates", candidates_path);
  } else {
    answers = params.vocab.answers;
  }

  export_embeddings(params, answers, table, (ctx.out / "embeddings.tsv").string());
  ctx.manifest.write((ctx.out / "manifest.txt").string());
  ctx.stream << "wrote " << answers.size() << " embeddings to "
             << (ctx.out / "embeddings.tsv").string() << "\n";
}

// --- subcommand: overlap ----------------------------------------------------------

void cmd_overlap(RunContext& ctx) {
  std::string a_path = ctx.cfg.require_string("a_triplets");
  std::string b_path = ctx.cfg.require_string("b_triplets");
  std::vector<std::size_t> ks =
      parse_size_list(ctx.cfg.get_string_or("k_list", "10,100,1000"), "k_list");
  ctx.cfg.finish();

  Dataset a = load_triplets(a_path, dataset_name(a_path), Split::train);
  Dataset b = load_triplets(b_path, dataset_name(b_path), Split::train);
  AnswerVocabulary va = build_answer_vocabulary(a);
  AnswerVocabulary vb = build_answer_vocabulary(b);
  OverlapStats stats = answer_overlap_stats(va, vb, ks);
  ctx.manifest.add_input("a_triplets", a_path);
  ctx.manifest.add_input("b_triplets", b_path);

  std::ostringstream text;
  text << "a_answers = " << va.size() << "\n";
  text << "b_answers = " << vb.size() << "\n";
  text << "full_overlap = " << stats.full_overlap << "\n";
  text << "[at_k]\n";
  for (const auto& [k, common] : stats.at_k) text << k << "\t" << common << "\n";
  write_file((ctx.out / "overlap.txt").string(), text.str());
  ctx.manifest.write((ctx.out / "manifest.txt").string());
  ctx.stream << text.str();
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"probabilistic compatibility models for question answering"};
  app.name("pmcqa");
  app.require_subcommand(1);

  Invocation inv;
  struct Sub {
    CLI::App* app = nullptr;
    std::string name;
  };
  std::vector<Sub> subs;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config_path, "key = value configuration file");
    sub->add_option("--seed", inv.seed_flag, "seed override (beats the config file)");
    sub->add_option("--out", inv.out_dir, "output directory (default: timestamped)");
  };
  auto add_sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    add_common(sub);
    subs.push_back({sub, name});
    return sub;
  };

  add_sub("gen-synth", "generate a deterministic synthetic corpus");
  add_sub("train", "train a model and write its checkpoint");
  CLI::App* eval_sub = add_sub("eval", "evaluate a checkpoint on a dataset");
  CLI::App* transfer_sub =
      add_sub("transfer", "evaluate a checkpoint on another dataset with seen/unseen splits");
  CLI::App* sweep_sub =
      add_sub("sweep-negatives", "train across negative-sample counts and tabulate accuracy");
  add_sub("benchmark", "compare factorized vs unfactorized inference speed");
  add_sub("gradcheck", "verify analytic gradients against finite differences");
  CLI::App* export_sub = add_sub("export-embeddings", "dump answer embeddings as text");
  add_sub("overlap", "answer-vocabulary overlap between two triplet files");

  eval_sub->add_option("--checkpoint", inv.checkpoint, "trained checkpoint path");
  eval_sub->add_option("--mode", inv.mode, "open_ended or multiple_choice");
  eval_sub->add_option("--candidates", inv.candidates, "answer-list file for the open universe");
  transfer_sub->add_option("--checkpoint", inv.checkpoint, "trained checkpoint path");
  transfer_sub->add_option("--mode", inv.mode, "open_ended or multiple_choice");
  transfer_sub->add_option("--target", inv.target, "target triplet file");
  sweep_sub->add_option("--m-list", inv.m_list, "comma-separated negative counts");
  export_sub->add_option("--checkpoint", inv.checkpoint, "trained checkpoint path");
  export_sub->add_option("--candidates", inv.candidates, "answer-list file to embed");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("pmcqa");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(argv_storage.size());
  for (const std::string& s : argv_storage) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "pmcqa: config: " << e.what() << "\n";
    return 2;
  }

  std::string name;
  for (const Sub& sub : subs) {
    if (sub.app->parsed()) {
      name = sub.name;
      inv.seed_given = sub.app->count("--seed") > 0;
    }
  }

  try {
    RunContext ctx = make_context(name, inv, out);
    if (name == "gen-synth") cmd_gen_synth(ctx);
    else if (name == "train") cmd_train(ctx);
    else if (name == "eval") cmd_eval(ctx, inv);
    else if (name == "transfer") cmd_transfer(ctx, inv);
    else if (name == "sweep-negatives") cmd_sweep_negatives(ctx, inv);
    else if (name == "benchmark") cmd_benchmark(ctx);
    else if (name == "gradcheck") cmd_gradcheck(ctx);
    else if (name == "export-embeddings") cmd_export_embeddings(ctx, inv);
    else if (name == "overlap") cmd_overlap(ctx);
    else throw ContractError("unroutable subcommand '" + name + "'");
    return 0;
  } catch (const ConfigError& e) {
    err << "pmcqa: config: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    err << "pmcqa: argument: " << e.what() << "\n";
    return 2;
  } catch (const FamilyError& e) {
    err << "pmcqa: family: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "pmcqa: format: " << e.what() << "\n";
    return 3;
  } catch (const LinkError& e) {
    err << "pmcqa: link: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    err << "pmcqa: io: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    err << "pmcqa: numeric: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "pmcqa: error: " << e.what() << "\n";
    return 1;
  }
}

int cli_run(const std::vector<std::string>& args) {
  return cli_run(args, std::cout, std::cerr);
}

}  // namespace pmcqa
