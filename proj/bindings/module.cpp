#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pmcqa/cli.hpp"
#include "pmcqa/corpus.hpp"
#include "pmcqa/diagnostics.hpp"
#include "pmcqa/errors.hpp"
#include "pmcqa/evaluator.hpp"
#include "pmcqa/model.hpp"
#include "pmcqa/objective.hpp"
#include "pmcqa/schedule.hpp"
#include "pmcqa/synth.hpp"
#include "pmcqa/trainer.hpp"

namespace py = pybind11;
using namespace pmcqa;

namespace {

std::vector<std::vector<double>> matrix_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    rows[r].assign(row.begin(), row.end());
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "compatibility-model question answering: training, inference, evaluation";

  auto base = py::register_exception<Error>(m, "PmcError");
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<LinkError>(m, "LinkError", base.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<FamilyError>(m, "FamilyError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());

  py::enum_<Split>(m, "Split")
      .value("train", Split::train)
      .value("val", Split::val)
      .value("test", Split::test);
  py::enum_<ModelFamily>(m, "ModelFamily")
      .value("fpmc", ModelFamily::fpmc)
      .value("upmc", ModelFamily::upmc)
      .value("cls", ModelFamily::cls);
  py::enum_<GMode>(m, "GMode")
      .value("learned_mlp", GMode::learned_mlp)
      .value("fixed_average", GMode::fixed_average);
  py::enum_<WeightKind>(m, "WeightKind")
      .value("one_hot", WeightKind::one_hot)
      .value("multi_hot", WeightKind::multi_hot)
      .value("soft", WeightKind::soft)
      .value("wups", WeightKind::wups);
  py::enum_<EvalMode>(m, "EvalMode")
      .value("open_ended", EvalMode::open_ended)
      .value("multiple_choice", EvalMode::multiple_choice);
  py::enum_<CandidateSource>(m, "CandidateSource")
      .value("source_only", CandidateSource::source_only)
      .value("union_with_target", CandidateSource::union_with_target);

  py::class_<Triplet>(m, "Triplet")
      .def(py::init<>())
      .def_readwrite("image_id", &Triplet::image_id)
      .def_readwrite("question_tokens", &Triplet::question_tokens)
      .def_readwrite("correct", &Triplet::correct)
      .def_readwrite("incorrect", &Triplet::incorrect);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("name", &Dataset::name)
      .def_readwrite("split", &Dataset::split)
      .def_readwrite("triplets", &Dataset::triplets)
      .def("__len__", [](const Dataset& d) { return d.triplets.size(); });

  py::class_<WordEmbeddingTable>(m, "WordEmbeddingTable")
      .def(py::init<std::size_t>(), py::arg("dim") = 0)
      .def("dim", &WordEmbeddingTable::dim)
      .def("__len__", &WordEmbeddingTable::size)
      .def("__contains__", &WordEmbeddingTable::contains)
      .def("tokens", &WordEmbeddingTable::tokens)
      .def("put", &WordEmbeddingTable::put)
      .def("find",
           [](const WordEmbeddingTable& t, const std::string& token)
               -> std::optional<Vec> {
             const Vec* v = t.find(token);
             if (!v) return std::nullopt;
             return *v;
           });

  py::class_<FeatureStore>(m, "FeatureStore")
      .def(py::init<std::size_t>(), py::arg("dim") = 0)
      .def("dim", &FeatureStore::dim)
      .def("__len__", &FeatureStore::size)
      .def("__contains__", &FeatureStore::contains)
      .def("ids", &FeatureStore::ids)
      .def("put", &FeatureStore::put)
      .def("get", [](const FeatureStore& f, const std::string& id) {
        auto v = f.get(id);
        return Vec(v.begin(), v.end());
      });

  py::class_<AnswerVocabulary>(m, "AnswerVocabulary")
      .def(py::init<>())
      .def_readonly("answers", &AnswerVocabulary::answers)
      .def_readonly("frequency", &AnswerVocabulary::frequency)
      .def("__len__", &AnswerVocabulary::size)
      .def("__contains__", &AnswerVocabulary::contains)
      .def("find", &AnswerVocabulary::find);

  py::class_<SimilarityTable>(m, "SimilarityTable")
      .def(py::init<>())
      .def("value", &SimilarityTable::value)
      .def("put", &SimilarityTable::put)
      .def("__len__", &SimilarityTable::size);

  py::class_<LrSchedule>(m, "LrSchedule")
      .def(py::init<>())
      .def_readwrite("base_lr", &LrSchedule::base_lr)
      .def_readwrite("decay_epochs", &LrSchedule::decay_epochs);

  py::class_<WeightingRule>(m, "WeightingRule")
      .def(py::init<>())
      .def_readwrite("kind", &WeightingRule::kind)
      .def_readwrite("wups_threshold", &WeightingRule::wups_threshold)
      .def_readwrite("exact_match_weight", &WeightingRule::exact_match_weight);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("family", &ModelConfig::family)
      .def_readwrite("word_dim", &ModelConfig::word_dim)
      .def_readwrite("feature_dim", &ModelConfig::feature_dim)
      .def_readwrite("hidden_dim", &ModelConfig::hidden_dim)
      .def_readwrite("embed_dim", &ModelConfig::embed_dim)
      .def_readwrite("dropout_rate", &ModelConfig::dropout_rate)
      .def_readwrite("output_scale", &ModelConfig::output_scale)
      .def_readwrite("g_mode", &ModelConfig::g_mode)
      .def_readwrite("finetune_question", &ModelConfig::finetune_question)
      .def_readwrite("top_k", &ModelConfig::top_k);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("model", &TrainConfig::model)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("negatives", &TrainConfig::negatives)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("schedule", &TrainConfig::schedule)
      .def_readwrite("weighting", &TrainConfig::weighting)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("negatives_by_frequency", &TrainConfig::negatives_by_frequency);

  py::class_<ModelParams>(m, "ModelParams")
      .def_readonly("config", &ModelParams::config)
      .def_readonly("vocab", &ModelParams::vocab);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("lr", &EpochRecord::lr)
      .def_readonly("mean_loss", &EpochRecord::mean_loss)
      .def_readonly("skipped", &EpochRecord::skipped)
      .def_readonly("seconds", &EpochRecord::seconds);

  py::class_<TrainLog>(m, "TrainLog")
      .def_readonly("epochs", &TrainLog::epochs)
      .def("to_csv", &TrainLog::to_csv, py::arg("include_seconds") = true);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("log", &TrainResult::log);

  py::class_<GroupStat>(m, "GroupStat")
      .def_readonly("accuracy", &GroupStat::accuracy)
      .def_readonly("count", &GroupStat::count);

  py::class_<PredictionRecord>(m, "PredictionRecord")
      .def_readonly("record_id", &PredictionRecord::record_id)
      .def_readonly("prediction", &PredictionRecord::prediction)
      .def_readonly("correct", &PredictionRecord::correct)
      .def_readonly("seen", &PredictionRecord::seen);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("mode", &EvalReport::mode)
      .def_readonly("overall", &EvalReport::overall)
      .def_readonly("count", &EvalReport::count)
      .def_readonly("per_type", &EvalReport::per_type)
      .def_readonly("seen_records", &EvalReport::seen_records)
      .def_readonly("unseen_records", &EvalReport::unseen_records)
      .def_readonly("records", &EvalReport::records)
      .def("to_text", &EvalReport::to_text)
      .def("to_csv", &EvalReport::to_csv);

  py::class_<Prediction>(m, "Prediction")
      .def_readonly("answer", &Prediction::answer)
      .def_readonly("score", &Prediction::score)
      .def_readonly("ordinal", &Prediction::ordinal);

  py::class_<AnswerIndex>(m, "AnswerIndex")
      .def_readonly("answers", &AnswerIndex::answers)
      .def("__len__", &AnswerIndex::size)
      .def("embeddings", [](const AnswerIndex& idx) { return matrix_rows(idx.embeddings); });

  py::class_<BenchmarkReport>(m, "BenchmarkReport")
      .def_readonly("vocab_size", &BenchmarkReport::vocab_size)
      .def_readonly("batch_size", &BenchmarkReport::batch_size)
      .def_readonly("repetitions", &BenchmarkReport::repetitions)
      .def_readonly("fpmc_ms_per_batch", &BenchmarkReport::fpmc_ms_per_batch)
      .def_readonly("upmc_ms_per_batch", &BenchmarkReport::upmc_ms_per_batch)
      .def_readonly("speedup", &BenchmarkReport::speedup);

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("num_attributes", &SynthSpec::num_attributes)
      .def_readwrite("values_per_attribute", &SynthSpec::values_per_attribute)
      .def_readwrite("words_per_value", &SynthSpec::words_per_value)
      .def_readwrite("train_vocab", &SynthSpec::train_vocab)
      .def_readwrite("target_vocab", &SynthSpec::target_vocab)
      .def_readwrite("overlap_fraction", &SynthSpec::overlap_fraction)
      .def_readwrite("train_triplets", &SynthSpec::train_triplets)
      .def_readwrite("target_triplets", &SynthSpec::target_triplets)
      .def_readwrite("num_incorrect", &SynthSpec::num_incorrect)
      .def_readwrite("feature_noise", &SynthSpec::feature_noise)
      .def_readwrite("word_dim", &SynthSpec::word_dim)
      .def_readwrite("feature_dim", &SynthSpec::feature_dim);

  py::class_<SynthData>(m, "SynthData")
      .def_readonly("words", &SynthData::words)
      .def_readonly("train", &SynthData::train)
      .def_readonly("train_features", &SynthData::train_features)
      .def_readonly("target", &SynthData::target)
      .def_readonly("target_features", &SynthData::target_features);

  // --- corpus ---------------------------------------------------------------
  m.def("load_word_embeddings", &load_word_embeddings, py::arg("path"));
  m.def("load_features", &load_features, py::arg("path"));
  m.def("load_triplets", &load_triplets, py::arg("path"), py::arg("name") = "dataset",
        py::arg("split") = Split::train);
  m.def("load_dataset", &load_dataset, py::arg("triplet_path"), py::arg("feature_path"),
        py::arg("name") = "", py::arg("split") = Split::train);
  m.def("load_similarity_table", &load_similarity_table, py::arg("path"));
  m.def("write_triplets", &write_triplets, py::arg("dataset"), py::arg("path"));
  m.def("write_features", &write_features, py::arg("features"), py::arg("path"));
  m.def("write_word_embeddings", &write_word_embeddings, py::arg("table"), py::arg("path"));
  m.def("dominant_answer", &dominant_answer, py::arg("correct"));
  m.def("build_answer_vocabulary", &build_answer_vocabulary, py::arg("dataset"),
        py::arg("top_k") = static_cast<std::size_t>(SIZE_MAX));
  m.def(
      "answer_overlap_stats",
      [](const AnswerVocabulary& a, const AnswerVocabulary& b, std::vector<std::size_t> ks) {
        OverlapStats s = answer_overlap_stats(a, b, ks);
        return py::make_tuple(s.at_k, s.full_overlap);
      },
      py::arg("a"), py::arg("b"), py::arg("ks"));

  // --- synthetic corpus -------------------------------------------------------
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"), py::arg("seed"));
  m.def("write_synthetic", &write_synthetic, py::arg("data"), py::arg("dir"));

  // --- training ---------------------------------------------------------------
  m.def(
      "train",
      [](const Dataset& dataset, const FeatureStore& features,
         const WordEmbeddingTable& table, TrainConfig config,
         const SimilarityTable* similarity) {
        if (similarity) config.weighting.similarity = similarity;
        return train(dataset, features, table, config);
      },
      py::arg("dataset"), py::arg("features"), py::arg("table"), py::arg("config"),
      py::arg("similarity") = nullptr,
      "Deterministic minibatch training; pass a similarity table for the wups rule.");
  m.def("init_params", &init_params, py::arg("config"), py::arg("vocab"), py::arg("table"),
        py::arg("seed"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("lr_at_epoch", &lr_at_epoch, py::arg("schedule"), py::arg("epoch"));
  m.def("gradcheck_model", &gradcheck_model, py::arg("family"), py::arg("kind"),
        py::arg("seed"), py::arg("step") = 1e-5,
        "Max relative error of analytic against finite-difference gradients on a tiny task.");

  // --- inference and evaluation ------------------------------------------------
  m.def(
      "pmc_posterior",
      [](std::vector<double> f, std::vector<Vec> answers) {
        return pmc_posterior(f, answers);
      },
      py::arg("f_embedding"), py::arg("answer_embeddings"));
  m.def("precompute_answer_index",
        [](const ModelParams& p, std::vector<std::string> answers,
           const WordEmbeddingTable& t) { return precompute_answer_index(p, answers, t); },
        py::arg("params"), py::arg("answers"), py::arg("table"));
  m.def("predict_open_ended",
        [](const ModelParams& p, const AnswerIndex& idx, std::vector<double> image,
           std::vector<std::string> question, const WordEmbeddingTable& t) {
          return predict_open_ended(p, idx, image, question, t);
        },
        py::arg("params"), py::arg("index"), py::arg("image"), py::arg("question"),
        py::arg("table"));
  m.def("predict_mc",
        [](const ModelParams& p, std::vector<double> image,
           std::vector<std::string> question, std::vector<std::string> candidates,
           const WordEmbeddingTable& t) {
          return predict_mc(p, image, question, candidates, t);
        },
        py::arg("params"), py::arg("image"), py::arg("question"), py::arg("candidates"),
        py::arg("table"));
  m.def(
      "encode_iq",
      [](const ModelParams& p, std::vector<double> image, std::vector<std::string> question,
         const WordEmbeddingTable& t) {
        if (!p.f) throw FamilyError("checkpoint has no f tower");
        return encode_iq(*p.f, t, image, question);
      },
      py::arg("params"), py::arg("image"), py::arg("question"), py::arg("table"));
  m.def(
      "encode_answer",
      [](const ModelParams& p, const std::string& answer, const WordEmbeddingTable& t) {
        if (!p.g) throw FamilyError("checkpoint has no g tower");
        return encode_answer(*p.g, t, answer);
      },
      py::arg("params"), py::arg("answer"), py::arg("table"));
  m.def("vqa_accuracy", &vqa_accuracy, py::arg("predicted"), py::arg("annotations"));
  m.def("evaluate",
        [](const ModelParams& p, const Dataset& d, const FeatureStore& f,
           const WordEmbeddingTable& t, EvalMode mode, std::vector<std::string> universe) {
          return evaluate(p, d, f, t, mode, universe);
        },
        py::arg("params"), py::arg("dataset"), py::arg("features"), py::arg("table"),
        py::arg("mode"), py::arg("universe") = std::vector<std::string>{});
  m.def("transfer_evaluate", &transfer_evaluate, py::arg("params"), py::arg("source_vocab"),
        py::arg("target"), py::arg("features"), py::arg("table"), py::arg("mode"),
        py::arg("candidates") = CandidateSource::union_with_target);
  m.def("benchmark_inference", &benchmark_inference, py::arg("fpmc"), py::arg("upmc"),
        py::arg("vocab_size"), py::arg("batch_size"), py::arg("repetitions"),
        py::arg("seed"));
  m.def("export_embeddings",
        [](const ModelParams& p, std::vector<std::string> answers,
           const WordEmbeddingTable& t, const std::string& path) {
          export_embeddings(p, answers, t, path);
        },
        py::arg("params"), py::arg("answers"), py::arg("table"), py::arg("path"));
  m.def("load_embedding_export", &load_embedding_export, py::arg("path"));

  // --- command line -------------------------------------------------------------
  m.def(
      "cli_run", [](std::vector<std::string> args) { return cli_run(args); },
      py::arg("args"), "Run the pmcqa command line in-process; returns its exit code.");
}
