#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "akde/corpus.hpp"

namespace akde {

// 0-based rank of the correct candidate by descending score. Equal scores
// rank the lower candidate index first.
std::size_t rank_of(std::span<const double> scores, std::size_t correct_index);

// Fraction of groups whose correct candidate ranks within the top k.
double recall_at_k(std::span<const std::vector<double>> scores, std::span<const std::size_t> correct, std::size_t k);
double recall_at_k(std::span<const EvaluationGroup> groups, std::span<const std::vector<double>> scores,
                   std::size_t k);

// Add-one smoothed unigram distribution over a fixed vocabulary.
class UnigramModel {
 public:
  UnigramModel() = default;
  UnigramModel(std::vector<std::uint64_t> counts);

  // Counts context and response tokens of `data`.
  static UnigramModel fit(std::span<const Triple> data, std::size_t vocab_size);
  static UnigramModel fit(std::span<const TokenSeq> sequences, std::size_t vocab_size);

  double probability(TokenId token) const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  bool empty() const { return counts_.empty(); }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Mean per-token surprisal in bits: (1/T) Σ -log2 p(w_t).
double information_content(std::span<const TokenId> utterance, const UnigramModel& unigram);

struct MetricReport {
  std::optional<double> r2_at_1;
  std::optional<double> r10_at_1;
  std::optional<double> r10_at_3;
  std::optional<double> r10_at_5;
  std::size_t n_groups = 0;
  std::optional<double> info_predicted;  // bits, top-ranked candidate
  std::optional<double> info_correct;    // bits, correct candidate

  // R10@1 <= R10@3 <= R10@5 wherever present.
  bool monotone() const;
  // `key=value` lines; absent metrics print as NA.
  std::string to_text() const;
};

// R2@1 uses the first two candidates of every group (correct vs the first
// negative); R10@k use the first ten and are absent for groups of fewer than
// ten. `unigram` may be empty, in which case no information content is given.
MetricReport make_report(std::span<const EvaluationGroup> groups, std::span<const std::vector<double>> scores,
                         const UnigramModel& unigram = {});

struct TTestResult {
  double t = 0.0;
  double degrees_of_freedom = 0.0;
  double p_greater = 1.0;  // one-tailed, H1: mean > mu0
};

// One-sample t-test of `samples` against `mu0`.
TTestResult one_sample_t_test(std::span<const double> samples, double mu0);

}  // namespace akde
