#include "pmcqa/model.hpp"

#include <cmath>
#include <sstream>

#include "pmcqa/errors.hpp"
#include "pmcqa/rng.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {

std::string family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::fpmc: return "fpmc";
    case ModelFamily::upmc: return "upmc";
    case ModelFamily::cls: return "cls";
  }
  throw ContractError("family_name: bad enum value");
}

ModelFamily family_from_name(const std::string& name) {
  if (name == "fpmc") return ModelFamily::fpmc;
  if (name == "upmc") return ModelFamily::upmc;
  if (name == "cls") return ModelFamily::cls;
  throw ArgumentError("unknown model family '" + name + "' (expected fpmc, upmc or cls)");
}

std::string g_mode_name(GMode m) {
  return m == GMode::learned_mlp ? "learned_mlp" : "fixed_average";
}

GMode g_mode_from_name(const std::string& name) {
  if (name == "learned_mlp") return GMode::learned_mlp;
  if (name == "fixed_average") return GMode::fixed_average;
  throw ArgumentError("unknown g mode '" + name + "' (expected learned_mlp or fixed_average)");
}

namespace {

void glorot_init(DenseLayer& layer, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
  for (double& w : layer.weight.data) w = rng.uniform(-limit, limit);
  // biases stay zero
}

void validate_config(const ModelConfig& c) {
  if (c.word_dim == 0 || c.feature_dim == 0 || c.hidden_dim == 0 || c.embed_dim == 0)
    throw ArgumentError("model dimensions must be positive");
  if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0)
    throw ArgumentError("dropout_rate must lie in [0, 1)");
  if (c.output_scale <= 0.0) throw ArgumentError("output_scale must be positive");
  if (c.top_k == 0) throw ArgumentError("top_k must be positive");
}

}  // namespace

ModelParams init_params(const ModelConfig& config, const AnswerVocabulary& vocab,
                        const WordEmbeddingTable& table, std::uint64_t seed) {
  validate_config(config);
  if (table.dim() != config.word_dim)
    throw ArgumentError("word table dimension " + std::to_string(table.dim()) +
                        " does not match config word_dim " + std::to_string(config.word_dim));

  ModelParams p;
  p.config = config;
  p.config.embed_dim = config.effective_embed_dim();
  p.vocab = vocab;

  Rng rng(Rng::fold(seed, "init"));
  const double scale = config.output_scale;

  switch (config.family) {
    case ModelFamily::fpmc: {
      FTower f;
      if (config.finetune_question) f.question.table = TrainableWordTable::copy_of(table);
      f.fuse = MlpParams(config.f_input_dim(), config.hidden_dim, p.config.embed_dim,
                         config.dropout_rate, scale);
      glorot_init(f.fuse.hidden, rng);
      glorot_init(f.fuse.output, rng);
      p.f = std::move(f);

      GTower g;
      g.mode = config.g_mode;
      if (config.g_mode == GMode::learned_mlp) {
        g.mlp = MlpParams(config.word_dim, config.hidden_dim, p.config.embed_dim,
                          config.dropout_rate, scale);
        glorot_init(g.mlp->hidden, rng);
        glorot_init(g.mlp->output, rng);
      }
      p.g = std::move(g);
      break;
    }
    case ModelFamily::cls: {
      FTower f;
      if (config.finetune_question) f.question.table = TrainableWordTable::copy_of(table);
      f.fuse = MlpParams(config.f_input_dim(), config.hidden_dim, p.config.embed_dim,
                         config.dropout_rate, scale);
      glorot_init(f.fuse.hidden, rng);
      glorot_init(f.fuse.output, rng);
      p.f = std::move(f);

      if (vocab.size() == 0) throw ArgumentError("cls family requires a non-empty vocabulary");
      std::size_t classes = std::min(config.top_k, vocab.size());
      DenseLayer head(classes, p.config.embed_dim);
      glorot_init(head, rng);
      p.cls_head = std::move(head);
      break;
    }
    case ModelFamily::upmc: {
      UTower u;
      if (config.finetune_question) u.question.table = TrainableWordTable::copy_of(table);
      u.scorer = MlpParams(config.u_input_dim(), config.hidden_dim, 1,
                           config.dropout_rate, 1.0);
      glorot_init(u.scorer.hidden, rng);
      glorot_init(u.scorer.output, rng);
      p.u = std::move(u);
      break;
    }
  }
  return p;
}

ModelParams zero_like(const ModelParams& params) {
  ModelParams z = params;
  for (ParamBlock& b : collect_param_blocks(z))
    std::fill(b.data, b.data + b.size, 0.0);
  return z;
}

namespace {

void add_dense(std::vector<ParamBlock>& out, const std::string& prefix, DenseLayer& d) {
  out.push_back({prefix + ".weight", d.weight.data.data(), d.weight.data.size()});
  out.push_back({prefix + ".bias", d.bias.data(), d.bias.size()});
}

void add_mlp(std::vector<ParamBlock>& out, const std::string& prefix, MlpParams& m) {
  add_dense(out, prefix + ".hidden", m.hidden);
  add_dense(out, prefix + ".output", m.output);
}

void add_question(std::vector<ParamBlock>& out, const std::string& prefix, QuestionEncoder& q) {
  if (q.table)
    out.push_back({prefix + ".table", q.table->vectors.data.data(),
                   q.table->vectors.data.size()});
}

}  // namespace

std::vector<ParamBlock> collect_param_blocks(ModelParams& params) {
  std::vector<ParamBlock> out;
  if (params.f) {
    add_question(out, "f.question", params.f->question);
    add_mlp(out, "f.fuse", params.f->fuse);
  }
  if (params.g && params.g->mlp) add_mlp(out, "g.mlp", *params.g->mlp);
  if (params.cls_head) add_dense(out, "cls.head", *params.cls_head);
  if (params.u) {
    add_question(out, "u.question", params.u->question);
    add_mlp(out, "u.scorer", params.u->scorer);
  }
  return out;
}

void zero_blocks(const std::vector<ParamBlock>& blocks) {
  for (const ParamBlock& b : blocks) std::fill(b.data, b.data + b.size, 0.0);
}

void scale_blocks(const std::vector<ParamBlock>& blocks, double factor) {
  for (const ParamBlock& b : blocks)
    for (std::size_t i = 0; i < b.size; ++i) b.data[i] *= factor;
}

// --- checkpoint io -----------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "pmcqa-checkpoint v1";

struct TensorShape {
  std::size_t rows;
  std::size_t cols;
};

// Shapes and token lists are structural; values travel through the block
// registry so the file order always equals the canonical block order.
void write_tokens(std::ostringstream& out, const std::string& name,
                  const TrainableWordTable& t) {
  out << "tokens " << name << " " << t.tokens.size() << "\n";
  for (const std::string& tok : t.tokens) out << tok << "\n";
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  // collect_param_blocks needs mutability; checkpoints never modify values.
  ModelParams& p = const_cast<ModelParams&>(params);
  std::ostringstream out;
  out << kCheckpointMagic << "\n";
  out << "[config]\n";
  out << "family = " << family_name(p.config.family) << "\n";
  out << "word_dim = " << p.config.word_dim << "\n";
  out << "feature_dim = " << p.config.feature_dim << "\n";
  out << "hidden_dim = " << p.config.hidden_dim << "\n";
  out << "embed_dim = " << p.config.embed_dim << "\n";
  out << "dropout_rate = " << format_double(p.config.dropout_rate) << "\n";
  out << "output_scale = " << format_double(p.config.output_scale) << "\n";
  out << "g_mode = " << g_mode_name(p.config.g_mode) << "\n";
  out << "finetune_question = " << (p.config.finetune_question ? "true" : "false") << "\n";
  out << "top_k = " << p.config.top_k << "\n";
  out << "[vocab]\n";
  out << "count = " << p.vocab.size() << "\n";
  for (std::size_t i = 0; i < p.vocab.size(); ++i)
    out << p.vocab.answers[i] << "\t" << p.vocab.frequency[i] << "\n";

  if (p.f && p.f->question.table) write_tokens(out, "f.question.table", *p.f->question.table);
  if (p.u && p.u->question.table) write_tokens(out, "u.question.table", *p.u->question.table);

  for (const ParamBlock& b : collect_param_blocks(p)) {
    out << "tensor " << b.name << " " << b.size << "\n";
    for (std::size_t i = 0; i < b.size; ++i)
      out << (i ? " " : "") << format_double(b.data[i]);
    out << "\n";
  }
  write_file(path, out.str());
}

namespace {

class LineReader {
 public:
  LineReader(const std::string& content, const std::string& path)
      : content_(content), path_(path) {}

  bool next(std::string& line) {
    if (pos_ > content_.size()) return false;
    std::size_t end = content_.find('\n', pos_);
    if (end == std::string::npos) {
      if (pos_ == content_.size()) return false;
      line = content_.substr(pos_);
      pos_ = content_.size() + 1;
    } else {
      line = content_.substr(pos_, end - pos_);
      pos_ = end + 1;
    }
    ++lineno_;
    return true;
  }

  std::string where() const { return path_ + ":" + std::to_string(lineno_); }

 private:
  const std::string& content_;
  std::string path_;
  std::size_t pos_ = 0;
  std::size_t lineno_ = 0;
};

std::pair<std::string, std::string> parse_kv(const std::string& line, const std::string& where) {
  std::size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw FormatError("expected 'key = value' at " + where);
  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t");
    std::size_t b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return std::string();
    return s.substr(a, b - a + 1);
  };
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

}  // namespace

ModelParams load_checkpoint(const std::string& path) {
  std::string content = read_file(path);
  LineReader reader(content, path);
  std::string line;
  if (!reader.next(line) || line != kCheckpointMagic)
    throw FormatError("'" + path + "' is not a pmcqa checkpoint");
  if (!reader.next(line) || line != "[config]")
    throw FormatError("expected [config] at " + reader.where());

  ModelConfig config;
  while (true) {
    if (!reader.next(line)) throw FormatError("checkpoint truncated in [config]");
    if (line == "[vocab]") break;
    auto [key, value] = parse_kv(line, reader.where());
    // name parsers throw ArgumentError for callers; on file content that is a format problem
    if (key == "family") {
      try {
        config.family = family_from_name(value);
      } catch (const ArgumentError& e) {
        throw FormatError(std::string(e.what()) + " at " + reader.where());
      }
    }
    else if (key == "word_dim") config.word_dim = static_cast<std::size_t>(parse_int(value, reader.where()));
    else if (key == "feature_dim") config.feature_dim = static_cast<std::size_t>(parse_int(value, reader.where()));
    else if (key == "hidden_dim") config.hidden_dim = static_cast<std::size_t>(parse_int(value, reader.where()));
    else if (key == "embed_dim") config.embed_dim = static_cast<std::size_t>(parse_int(value, reader.where()));
    else if (key == "dropout_rate") config.dropout_rate = parse_double(value, reader.where());
    else if (key == "output_scale") config.output_scale = parse_double(value, reader.where());
    else if (key == "g_mode") {
      try {
        config.g_mode = g_mode_from_name(value);
      } catch (const ArgumentError& e) {
        throw FormatError(std::string(e.what()) + " at " + reader.where());
      }
    }
    else if (key == "finetune_question") config.finetune_question = (value == "true");
    else if (key == "top_k") config.top_k = static_cast<std::size_t>(parse_int(value, reader.where()));
    else throw FormatError("unknown config key '" + key + "' at " + reader.where());
  }

  if (!reader.next(line)) throw FormatError("checkpoint truncated before vocab count");
  auto [ckey, cvalue] = parse_kv(line, reader.where());
  if (ckey != "count") throw FormatError("expected vocab count at " + reader.where());
  std::size_t vocab_count = static_cast<std::size_t>(parse_int(cvalue, reader.where()));

  AnswerVocabulary vocab;
  for (std::size_t i = 0; i < vocab_count; ++i) {
    if (!reader.next(line)) throw FormatError("checkpoint truncated in vocab");
    std::vector<std::string> fields = split_char(line, '\t');
    if (fields.size() != 2) throw FormatError("bad vocab line at " + reader.where());
    vocab.index.emplace(fields[0], vocab.answers.size());
    vocab.answers.push_back(fields[0]);
    vocab.frequency.push_back(parse_int(fields[1], reader.where()));
  }

  // Rebuild the parameter skeleton, then overwrite values from tensor blocks.
  ModelParams params;
  params.config = config;
  params.vocab = std::move(vocab);
  switch (config.family) {
    case ModelFamily::fpmc: {
      FTower f;
      f.fuse = MlpParams(config.f_input_dim(), config.hidden_dim, config.embed_dim,
                         config.dropout_rate, config.output_scale);
      params.f = std::move(f);
      GTower g;
      g.mode = config.g_mode;
      if (config.g_mode == GMode::learned_mlp)
        g.mlp = MlpParams(config.word_dim, config.hidden_dim, config.embed_dim,
                          config.dropout_rate, config.output_scale);
      params.g = std::move(g);
      break;
    }
    case ModelFamily::cls: {
      FTower f;
      f.fuse = MlpParams(config.f_input_dim(), config.hidden_dim, config.embed_dim,
                         config.dropout_rate, config.output_scale);
      params.f = std::move(f);
      params.cls_head = DenseLayer(std::min(config.top_k, params.vocab.size()),
                                   config.embed_dim);
      break;
    }
    case ModelFamily::upmc: {
      UTower u;
      u.scorer = MlpParams(config.u_input_dim(), config.hidden_dim, 1,
                           config.dropout_rate, 1.0);
      params.u = std::move(u);
      break;
    }
  }

  // Token lists precede tensors; materialize trainable tables as they appear.
  std::string pending;
  bool have_pending = false;
  auto next_line = [&](std::string& l) {
    if (have_pending) {
      l = pending;
      have_pending = false;
      return true;
    }
    return reader.next(l);
  };

  while (next_line(line)) {
    std::vector<std::string> head = split_whitespace(line);
    if (head.empty()) continue;
    if (head[0] == "tokens") {
      if (head.size() != 3) throw FormatError("bad tokens header at " + reader.where());
      std::size_t count = static_cast<std::size_t>(parse_int(head[2], reader.where()));
      TrainableWordTable t;
      t.tokens.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        if (!reader.next(line)) throw FormatError("checkpoint truncated in tokens");
        t.tokens.push_back(line);
        t.index.emplace(line, i);
      }
      t.vectors = Matrix(count, config.word_dim);
      if (head[1] == "f.question.table" && params.f) {
        if (!config.finetune_question)
          throw FormatError("checkpoint carries a question table but finetune_question is false");
        params.f->question.table = std::move(t);
      } else if (head[1] == "u.question.table" && params.u) {
        if (!config.finetune_question)
          throw FormatError("checkpoint carries a question table but finetune_question is false");
        params.u->question.table = std::move(t);
      } else {
        throw FormatError("unexpected tokens block '" + head[1] + "' at " + reader.where());
      }
    } else if (head[0] == "tensor") {
      pending = line;
      have_pending = true;
      break;
    } else {
      throw FormatError("unexpected line in checkpoint at " + reader.where());
    }
  }

  std::vector<ParamBlock> blocks = collect_param_blocks(params);
  std::size_t bi = 0;
  while (next_line(line)) {
    if (line.empty()) continue;
    std::vector<std::string> head = split_whitespace(line);
    if (head.size() != 3 || head[0] != "tensor")
      throw FormatError("expected tensor header at " + reader.where());
    if (bi >= blocks.size())
      throw FormatError("extra tensor '" + head[1] + "' at " + reader.where());
    const ParamBlock& b = blocks[bi];
    if (head[1] != b.name)
      throw FormatError("tensor '" + head[1] + "' out of order, expected '" + b.name + "'");
    std::size_t count = static_cast<std::size_t>(parse_int(head[2], reader.where()));
    if (count != b.size)
      throw FormatError("tensor '" + b.name + "' holds " + std::to_string(count) +
                        " values, expected " + std::to_string(b.size));
    if (!reader.next(line)) throw FormatError("checkpoint truncated in tensor '" + b.name + "'");
    std::vector<std::string> values = split_whitespace(line);
    if (values.size() != b.size)
      throw FormatError("tensor '" + b.name + "' line holds " +
                        std::to_string(values.size()) + " values, expected " +
                        std::to_string(b.size));
    for (std::size_t i = 0; i < b.size; ++i)
      b.data[i] = parse_double(values[i], reader.where());
    ++bi;
  }
  if (bi != blocks.size())
    throw FormatError("checkpoint is missing tensors (got " + std::to_string(bi) + " of " +
                      std::to_string(blocks.size()) + ")");
  return params;
}

}  // namespace pmcqa
