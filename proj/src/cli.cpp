#include "akde/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "akde/checkpoint.hpp"
#include "akde/corpus.hpp"
#include "akde/errors.hpp"
#include "akde/metrics.hpp"
#include "akde/model.hpp"
#include "akde/train.hpp"

namespace akde::cli {

namespace {

namespace fs = std::filesystem;

void require(const std::string& value, const char* flag, const std::string& command) {
  if (value.empty()) throw ConfigError(command + ": missing required flag " + flag);
}

void require_file(const std::string& value, const char* flag, const std::string& command) {
  require(value, flag, command);
  if (!fs::exists(value)) throw ConfigError(command + ": " + flag + " " + value + " does not exist");
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return numeric_failure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return usage_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return usage_error;
  }
}

std::vector<std::string_view> split_tabs(std::string_view text) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = text.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(text.substr(start));
      return fields;
    }
    fields.push_back(text.substr(start, tab - start));
    start = tab + 1;
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Output stream that is either a file or the given fallback.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigError("cannot write " + path);
    }
    stream_ = path.empty() ? &fallback : &file_;
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

std::string format_score(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << std::fixed << v;
  return os.str();
}

}  // namespace

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string cmd = "train";
    ModelConfig model_cfg = build_variant(cfg.variant);
    require_file(cfg.train_path, "--train", cmd);
    require_file(cfg.val_path, "--val", cmd);
    require(cfg.checkpoint_path, "--checkpoint", cmd);
    if (model_cfg.knowledge != KnowledgeMode::none) {
      if (cfg.kb_path.empty())
        throw ConfigError(cmd + ": variant " + cfg.variant + " needs a knowledge base; pass --kb");
      require_file(cfg.kb_path, "--kb", cmd);
    }
    if (!cfg.embeddings_path.empty()) require_file(cfg.embeddings_path, "--embeddings", cmd);
    if (!cfg.test_path.empty()) require_file(cfg.test_path, "--test", cmd);

    model_cfg.embed_dim = cfg.embed_dim;
    model_cfg.hidden = cfg.hidden;
    model_cfg.limits.max_context = cfg.max_ctx;
    model_cfg.limits.max_response = cfg.max_resp;
    model_cfg.literal_gate = cfg.literal_eq9;
    model_cfg.validate();

    TrainConfig train_cfg;
    train_cfg.adam.lr = cfg.lr;
    train_cfg.batch_size = cfg.batch;
    train_cfg.max_epochs = cfg.epochs;
    train_cfg.patience = cfg.patience;
    train_cfg.seed = cfg.seed;
    train_cfg.stop_metric = cfg.eval_n >= 10 ? StopMetric::r10_at_1 : StopMetric::r2_at_1;
    train_cfg.validate();

    Vocabulary vocab;
    extend_vocabulary(fs::path(cfg.train_path), vocab);
    KnowledgeBase kb;
    if (model_cfg.knowledge != KnowledgeMode::none) {
      std::vector<std::string> warnings;
      kb = load_knowledge(fs::path(cfg.kb_path), vocab, model_cfg.limits.max_description, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << "\n";
    }
    const auto data = load_triples(fs::path(cfg.train_path), vocab, model_cfg.limits);
    const auto val = load_groups(fs::path(cfg.val_path), vocab, cfg.eval_n, model_cfg.limits);
    if (data.empty()) throw ConfigError(cmd + ": " + cfg.train_path + " has no triples");
    if (val.empty()) throw ConfigError(cmd + ": " + cfg.val_path + " has no groups");

    std::mt19937_64 rng(cfg.seed);
    ModelParams params(model_cfg, vocab.size(), rng);
    if (!cfg.embeddings_path.empty())
      params.embedding.value = load_embeddings(fs::path(cfg.embeddings_path), vocab, model_cfg.embed_dim, rng);
    DualEncoder model(model_cfg, std::move(params), std::move(kb));
    const UnigramModel unigram = UnigramModel::fit(data, vocab.size());

    const std::string history_path = cfg.out_path.empty() ? cfg.checkpoint_path + ".history.jsonl" : cfg.out_path;
    std::ofstream history(history_path, std::ios::binary);
    if (!history) throw ConfigError(cmd + ": cannot write " + history_path);

    out << "variant=" << model_cfg.variant_name() << " vocab=" << vocab.size() << " triples=" << data.size()
        << " val_groups=" << val.size() << " keywords=" << model.knowledge().size() << "\n";
    const TrainResult result = train(model, data, val, train_cfg, [&](const EpochRecord& r) {
      history << r.to_json_line() << "\n";
      history.flush();
      out << "epoch " << r.epoch << " loss=" << format_score(r.loss) << " "
          << metric_name(train_cfg.stop_metric) << "="
          << format_score(metric_value(r.metrics, train_cfg.stop_metric).value_or(0.0)) << "\n";
    });
    save_checkpoint(fs::path(cfg.checkpoint_path), model, vocab, unigram);
    out << "best_epoch=" << result.best_epoch << " checkpoint=" << cfg.checkpoint_path << "\n";

    if (result.diverged) {
      err << "error: training diverged (" << result.divergence_reason << "); kept the last good checkpoint\n";
      return static_cast<int>(numeric_failure);
    }
    if (!cfg.test_path.empty()) {
      const auto test = load_groups(fs::path(cfg.test_path), vocab, cfg.eval_n, model_cfg.limits);
      out << evaluate(model, test, unigram).to_text();
    }
    return static_cast<int>(ok);
  });
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string cmd = "eval";
    require_file(cfg.checkpoint_path, "--checkpoint", cmd);
    require_file(cfg.test_path, "--test", cmd);
    Checkpoint cp = load_checkpoint(fs::path(cfg.checkpoint_path));
    const auto groups = load_groups(fs::path(cfg.test_path), cp.vocabulary, cfg.eval_n, cp.model->config().limits);
    const MetricReport report = evaluate(*cp.model, groups, cp.unigram);
    if (!report.monotone()) throw NumericError("eval: recall is not monotone in k");
    out << report.to_text();
    if (!cfg.out_path.empty()) {
      std::ofstream f(cfg.out_path, std::ios::binary);
      if (!f) throw ConfigError(cmd + ": cannot write " + cfg.out_path);
      f << report.to_text();
    }
    return static_cast<int>(ok);
  });
}

int cmd_rank(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string cmd = "rank";
    require_file(cfg.checkpoint_path, "--checkpoint", cmd);
    require_file(cfg.test_path, "--test", cmd);
    Checkpoint cp = load_checkpoint(fs::path(cfg.checkpoint_path));
    const Limits& limits = cp.model->config().limits;
    const auto lines = read_lines(cfg.test_path);

    // Validate the whole input before scoring anything.
    struct Block {
      std::vector<TokenSeq> context;
      std::vector<std::string> texts;
      std::vector<TokenSeq> candidates;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto fields = split_tabs(lines[i]);
      const std::string where = cfg.test_path + ":" + std::to_string(i + 1);
      Block b;
      for (const auto& u : split_utterances(fields[0])) b.context.push_back(cp.vocabulary.encode(u));
      truncate_context(b.context, limits.max_context);
      if (b.context.empty()) throw ConfigError(where + ": empty context");
      for (std::size_t f = 1; f < fields.size(); ++f) {
        auto toks = tokenize(fields[f]);
        if (toks.empty()) throw ConfigError(where + ": empty candidate " + std::to_string(f));
        b.texts.push_back(detokenize(toks));
        if (toks.size() > limits.max_response) toks.resize(limits.max_response);
        b.candidates.push_back(cp.vocabulary.encode(toks));
      }
      if (b.candidates.empty()) throw ConfigError(where + ": context has no candidates");
      blocks.push_back(std::move(b));
    }
    if (blocks.empty()) throw ConfigError(cmd + ": " + cfg.test_path + " has no contexts");

    Sink sink(cfg.out_path, out);
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const Block& b = blocks[bi];
      TokenSeq flat;
      for (std::size_t u = 0; u < b.context.size(); ++u) {
        if (u) flat.push_back(token::eot);
        flat.insert(flat.end(), b.context[u].begin(), b.context[u].end());
      }
      const auto scores = cp.model->score_candidates(flat, b.candidates);
      std::vector<std::size_t> order(scores.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
      if (bi) sink.get() << "\n";
      for (std::size_t j : order) sink.get() << format_score(scores[j]) << "\t" << j << "\t" << b.texts[j] << "\n";
    }
    return static_cast<int>(ok);
  });
}

int cmd_attn_export(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string cmd = "attn-export";
    require_file(cfg.checkpoint_path, "--checkpoint", cmd);
    require_file(cfg.test_path, "--test", cmd);
    Checkpoint cp = load_checkpoint(fs::path(cfg.checkpoint_path));
    const ModelConfig& mc = cp.model->config();
    if (!mc.use_attention)
      throw ConfigError(cmd + ": variant " + mc.variant_name() + " has no attention, so there are no weights to export");
    const bool gated = mc.knowledge == KnowledgeMode::gated;

    struct Pair {
      std::vector<std::string> context, response;
    };
    std::vector<Pair> pairs;
    const auto lines = read_lines(cfg.test_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto fields = split_tabs(lines[i]);
      const std::string where = cfg.test_path + ":" + std::to_string(i + 1);
      if (fields.size() == 3) fields.erase(fields.begin());  // labelled triple line
      if (fields.size() != 2) throw ParseError(cfg.test_path, i + 1, "expected context<TAB>response");
      Pair p;
      p.context = flatten_context(split_utterances(fields[0]), mc.limits.max_context);
      p.response = tokenize(fields[1]);
      if (p.response.size() > mc.limits.max_response) p.response.resize(mc.limits.max_response);
      if (p.context.empty() || p.response.empty()) throw ConfigError(where + ": empty context or response");
      pairs.push_back(std::move(p));
    }

    Sink sink(cfg.out_path, out);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Pair& p = pairs[i];
      const auto scored = cp.model->score(cp.vocabulary.encode(p.context), cp.vocabulary.encode(p.response));
      const Diagnostics& d = scored.diagnostics;
      nlohmann::ordered_json rec;
      rec["index"] = i;
      rec["context_tokens"] = p.context;
      rec["response_tokens"] = p.response;
      rec["alpha_context"] = std::vector<double>(d.context_attention.data(),
                                                 d.context_attention.data() + d.context_attention.size());
      rec["alpha_response"] = std::vector<double>(d.response_attention.data(),
                                                  d.response_attention.data() + d.response_attention.size());
      if (gated) {
        nlohmann::ordered_json means = nlohmann::ordered_json::array();
        nlohmann::ordered_json full = nlohmann::ordered_json::array();
        for (const auto& beta : d.gates) {
          if (beta) {
            means.push_back(beta->mean());
            full.push_back(std::vector<double>(beta->data(), beta->data() + beta->size()));
          } else {
            means.push_back(nullptr);
            full.push_back(nullptr);
          }
        }
        rec["beta_mean"] = std::move(means);
        rec["beta"] = std::move(full);
      }
      rec["score"] = scored.probability;
      sink.get() << rec.dump() << "\n";
    }
    return static_cast<int>(ok);
  });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention and knowledge augmented dual-encoder response selection", "akde"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&cfg](CLI::App* sub) {
    sub->add_option("--checkpoint", cfg.checkpoint_path, "Model checkpoint (written by train, read otherwise)");
    sub->add_option("--out", cfg.out_path, "Output file");
    sub->add_option("--test", cfg.test_path, "Test / input file");
    sub->add_option("--eval-n", cfg.eval_n, "Candidates per evaluation group")->check(CLI::Range(2, 1000000));
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write the best checkpoint");
  common(train_cmd);
  train_cmd->add_option("--train", cfg.train_path, "Training triples");
  train_cmd->add_option("--val", cfg.val_path, "Validation groups");
  train_cmd->add_option("--kb", cfg.kb_path, "Keyword knowledge base");
  train_cmd->add_option("--embeddings", cfg.embeddings_path, "Pre-trained word vectors");
  train_cmd->add_option("--variant", cfg.variant, "Model variant")->capture_default_str();
  train_cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", cfg.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--epochs", cfg.epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--patience", cfg.patience, "Early-stopping patience")->capture_default_str();
  train_cmd->add_option("--hidden", cfg.hidden, "GRU hidden size")->capture_default_str();
  train_cmd->add_option("--embed-dim", cfg.embed_dim, "Word embedding size")->capture_default_str();
  train_cmd->add_option("--max-ctx", cfg.max_ctx, "Maximum context tokens")->capture_default_str();
  train_cmd->add_option("--max-resp", cfg.max_resp, "Maximum response tokens")->capture_default_str();
  train_cmd->add_flag("--literal-eq9", cfg.literal_eq9, "Gate non-keywords too, with a zero description");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Report Recall@k on grouped evaluation data");
  common(eval_cmd);
  CLI::App* rank_cmd = app.add_subcommand("rank", "Rank candidate responses per context");
  common(rank_cmd);
  CLI::App* export_cmd = app.add_subcommand("attn-export", "Export attention and gate weights as JSON lines");
  common(export_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(ok) : static_cast<int>(usage_error);
  }

  if (train_cmd->parsed()) return cmd_train(cfg, out, err);
  if (eval_cmd->parsed()) return cmd_eval(cfg, out, err);
  if (rank_cmd->parsed()) return cmd_rank(cfg, out, err);
  return cmd_attn_export(cfg, out, err);
}

}  // namespace akde::cli
