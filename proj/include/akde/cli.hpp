#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace akde::cli {

enum ExitCode : int { ok = 0, usage_error = 1, numeric_failure = 2 };

struct RunConfig {
  std::string command;
  std::string train_path, val_path, test_path, kb_path, embeddings_path, checkpoint_path, out_path;
  std::string variant = "AK-DE-biGRU";
  std::uint64_t seed = 0;
  double lr = 1e-4;
  std::size_t batch = 32;
  std::size_t epochs = 20;
  std::size_t patience = 3;
  long hidden = 300;
  long embed_dim = 200;
  std::size_t max_ctx = 320;
  std::size_t max_resp = 160;
  bool literal_eq9 = false;
  std::size_t eval_n = 10;
};

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_rank(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_attn_export(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Parses `args` (program name excluded) and dispatches to a command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace akde::cli
