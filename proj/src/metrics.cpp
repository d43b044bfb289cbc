#include "akde/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "akde/errors.hpp"

namespace akde {

std::size_t rank_of(std::span<const double> scores, std::size_t correct_index) {
  if (correct_index >= scores.size())
    throw DimensionError("correct index " + std::to_string(correct_index) + " outside " +
                         std::to_string(scores.size()) + " scores");
  const double s = scores[correct_index];
  std::size_t rank = 0;
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] > s || (scores[j] == s && j < correct_index)) ++rank;
  return rank;
}

double recall_at_k(std::span<const std::vector<double>> scores, std::span<const std::size_t> correct, std::size_t k) {
  if (scores.size() != correct.size())
    throw DimensionError("recall_at_k: " + std::to_string(scores.size()) + " score lists vs " +
                         std::to_string(correct.size()) + " groups");
  if (scores.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (k > scores[i].size())
      throw DimensionError("recall_at_k: k = " + std::to_string(k) + " exceeds group size " +
                           std::to_string(scores[i].size()));
    if (rank_of(scores[i], correct[i]) < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double recall_at_k(std::span<const EvaluationGroup> groups, std::span<const std::vector<double>> scores,
                   std::size_t k) {
  if (groups.size() != scores.size())
    throw DimensionError("recall_at_k: " + std::to_string(scores.size()) + " score lists vs " +
                         std::to_string(groups.size()) + " groups");
  std::vector<std::size_t> correct;
  correct.reserve(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].candidates.size() != scores[i].size())
      throw DimensionError("recall_at_k: group " + std::to_string(i) + " has " +
                           std::to_string(groups[i].candidates.size()) + " candidates but " +
                           std::to_string(scores[i].size()) + " scores");
    correct.push_back(groups[i].correct_index);
  }
  return recall_at_k(scores, correct, k);
}

UnigramModel::UnigramModel(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
  for (auto c : counts_) total_ += c;
}

UnigramModel UnigramModel::fit(std::span<const TokenSeq> sequences, std::size_t vocab_size) {
  std::vector<std::uint64_t> counts(vocab_size, 0);
  for (const auto& s : sequences)
    for (TokenId t : s) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
        throw DimensionError("token id " + std::to_string(t) + " outside vocabulary of size " +
                             std::to_string(vocab_size));
      ++counts[static_cast<std::size_t>(t)];
    }
  return UnigramModel(std::move(counts));
}

UnigramModel UnigramModel::fit(std::span<const Triple> data, std::size_t vocab_size) {
  std::vector<TokenSeq> sequences;
  for (const auto& t : data) {
    sequences.insert(sequences.end(), t.context.begin(), t.context.end());
    sequences.push_back(t.response);
  }
  return fit(sequences, vocab_size);
}

double UnigramModel::probability(TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= counts_.size())
    throw DimensionError("token id " + std::to_string(token) + " outside unigram vocabulary");
  return (static_cast<double>(counts_[static_cast<std::size_t>(token)]) + 1.0) /
         (static_cast<double>(total_) + static_cast<double>(counts_.size()));
}

double information_content(std::span<const TokenId> utterance, const UnigramModel& unigram) {
  if (utterance.empty()) throw ContractError("information_content: empty utterance");
  double bits = 0.0;
  for (TokenId t : utterance) bits -= std::log2(unigram.probability(t));
  return bits / static_cast<double>(utterance.size());
}

bool MetricReport::monotone() const {
  const double at1 = r10_at_1.value_or(-std::numeric_limits<double>::infinity());
  const double at3 = r10_at_3.value_or(at1);
  const double at5 = r10_at_5.value_or(at3);
  return at1 <= at3 && at3 <= at5;
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  auto put = [&os](const char* key, const std::optional<double>& v) {
    os << key << "=";
    if (v)
      os << *v;
    else
      os << "NA";
    os << "\n";
  };
  os << "n_groups=" << n_groups << "\n";
  put("R2@1", r2_at_1);
  put("R10@1", r10_at_1);
  put("R10@3", r10_at_3);
  put("R10@5", r10_at_5);
  put("info_bits_predicted", info_predicted);
  put("info_bits_correct", info_correct);
  return os.str();
}

MetricReport make_report(std::span<const EvaluationGroup> groups, std::span<const std::vector<double>> scores,
                         const UnigramModel& unigram) {
  if (groups.size() != scores.size())
    throw DimensionError("make_report: " + std::to_string(scores.size()) + " score lists vs " +
                         std::to_string(groups.size()) + " groups");
  MetricReport report;
  report.n_groups = groups.size();
  if (groups.empty()) return report;

  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].candidates.size() != scores[i].size())
      throw DimensionError("make_report: group " + std::to_string(i) + " size mismatch");
    smallest = std::min(smallest, scores[i].size());
  }

  auto recall_over_first = [&](std::size_t n, std::size_t k) -> std::optional<double> {
    if (smallest < n) return std::nullopt;
    std::vector<std::vector<double>> head;
    std::vector<std::size_t> correct;
    head.reserve(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      // The correct candidate must survive the cut.
      if (groups[i].correct_index >= n) return std::nullopt;
      head.emplace_back(scores[i].begin(), scores[i].begin() + static_cast<std::ptrdiff_t>(n));
      correct.push_back(groups[i].correct_index);
    }
    return recall_at_k(head, correct, k);
  };
  report.r2_at_1 = recall_over_first(2, 1);
  report.r10_at_1 = recall_over_first(10, 1);
  report.r10_at_3 = recall_over_first(10, 3);
  report.r10_at_5 = recall_over_first(10, 5);

  if (!unigram.empty()) {
    double predicted = 0.0;
    double correct = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < scores[i].size(); ++j)
        if (scores[i][j] > scores[i][best]) best = j;
      predicted += information_content(groups[i].candidates[best], unigram);
      correct += information_content(groups[i].candidates[groups[i].correct_index], unigram);
    }
    report.info_predicted = predicted / static_cast<double>(groups.size());
    report.info_correct = correct / static_cast<double>(groups.size());
  }
  return report;
}

TTestResult one_sample_t_test(std::span<const double> samples, double mu0) {
  if (samples.size() < 2) throw ContractError("t-test needs at least two samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  TTestResult r;
  r.degrees_of_freedom = n - 1.0;
  if (sd == 0.0) {
    r.t = mean > mu0 ? std::numeric_limits<double>::infinity()
                     : (mean < mu0 ? -std::numeric_limits<double>::infinity() : 0.0);
    r.p_greater = mean > mu0 ? 0.0 : (mean < mu0 ? 1.0 : 0.5);
    return r;
  }
  r.t = (mean - mu0) / (sd / std::sqrt(n));
  boost::math::students_t dist(r.degrees_of_freedom);
  r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace akde
