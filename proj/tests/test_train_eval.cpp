#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

#include "akde/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace akde;

TEST_CASE("Adam: first step moves each component by about lr") {
  Parameter p("p", Matrix::Constant(2, 2, 1.0));
  p.grad = Matrix::Constant(2, 2, 0.37);
  p.grad(1, 1) = -5.0;
  AdamState state;
  std::vector<Parameter*> params{&p};
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(state, params, cfg);
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p.value(1, 1) == doctest::Approx(1.0 + 0.01).epsilon(1e-6));
  CHECK(state.t == 1);
}

TEST_CASE("Adam: zero gradients leave parameters unchanged") {
  Parameter p("p", Matrix::Constant(3, 1, 2.5));
  p.zero_grad();
  AdamState state;
  std::vector<Parameter*> params{&p};
  for (int i = 0; i < 5; ++i) adam_step(state, params, AdamConfig{});
  CHECK(p.value == Matrix::Constant(3, 1, 2.5));
}

TEST_CASE("Adam matches the scalar oracle") {
  const std::vector<double> grads{0.3, 0.3};
  Parameter p("p", Matrix::Constant(1, 1, 1.0));
  AdamState state;
  std::vector<Parameter*> params{&p};
  AdamConfig cfg;
  cfg.lr = 0.1;
  for (double g : grads) {
    p.grad = Matrix::Constant(1, 1, g);
    adam_step(state, params, cfg);
  }
  const double expected = testing::scalar_adam(1.0, grads, 0.1, cfg.beta1, cfg.beta2, cfg.eps);
  CHECK(std::abs(p.value(0, 0) - expected) <= 1e-12);

  // A longer run with varying gradients.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> seq(50);
  for (auto& g : seq) g = n(rng);
  Parameter q("q", Matrix::Constant(1, 1, -0.5));
  AdamState s2;
  std::vector<Parameter*> qs{&q};
  for (double g : seq) {
    q.grad = Matrix::Constant(1, 1, g);
    adam_step(s2, qs, cfg);
  }
  CHECK(std::abs(q.value(0, 0) - testing::scalar_adam(-0.5, seq, 0.1, cfg.beta1, cfg.beta2, cfg.eps)) <= 1e-12);
}

TEST_CASE("Adam refuses non-finite gradients and names the parameter") {
  Parameter a("first", Matrix::Ones(1, 1)), b("second", Matrix::Ones(1, 1));
  a.grad = Matrix::Constant(1, 1, 0.5);
  b.grad = Matrix::Constant(1, 1, std::numeric_limits<double>::quiet_NaN());
  AdamState state;
  std::vector<Parameter*> params{&a, &b};
  try {
    adam_step(state, params, AdamConfig{});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("second") != std::string::npos);
  }
  CHECK(a.value(0, 0) == 1.0);
}

TEST_CASE("early stopping trace") {
  EarlyStopping stop(3);
  const double metric[] = {0.5, 0.6, 0.6, 0.6, 0.6};
  std::size_t stopped_after = 0;
  for (std::size_t epoch = 1; epoch <= 5; ++epoch) {
    stop.observe(metric[epoch - 1]);
    if (stop.should_stop()) {
      stopped_after = epoch;
      break;
    }
  }
  CHECK(stopped_after == 5);
  CHECK(stop.best_epoch() == 2);
  CHECK(stop.best() == 0.6);
  CHECK_THROWS_AS(EarlyStopping(0), ConfigError);
}

TEST_CASE("recall examples") {
  std::vector<std::vector<double>> scores{{0.9, 0.5, 0.1, 0.2, 0.3, 0.4, 0.5, 0.0, 0.1, 0.2}};
  std::vector<std::size_t> correct{0};
  CHECK(recall_at_k(scores, correct, 1) == 1.0);

  // Correct candidate ranked 4th.
  std::vector<std::vector<double>> fourth{{0.6, 0.9, 0.8, 0.7, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1}};
  CHECK(rank_of(fourth[0], 0) == 3);
  CHECK(recall_at_k(fourth, correct, 3) == 0.0);
  CHECK(recall_at_k(fourth, correct, 5) == 1.0);
}

TEST_CASE("recall ties favour the lower index") {
  const std::vector<double> s{0.5, 0.5, 0.5};
  CHECK(rank_of(s, 0) == 0);
  CHECK(rank_of(s, 2) == 2);
}

TEST_CASE("recall input validation") {
  std::vector<std::vector<double>> scores{{0.1, 0.2}};
  std::vector<std::size_t> correct{0, 1};
  CHECK_THROWS_AS(recall_at_k(scores, correct, 1), DimensionError);
  std::vector<std::size_t> one{0};
  CHECK_THROWS_AS(recall_at_k(scores, one, 3), DimensionError);
}

TEST_CASE("recall matches the brute-force oracle") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(0, 4);  // coarse scores force ties
  std::uniform_int_distribution<std::size_t> pick(0, 9);
  std::vector<std::vector<double>> scores(1000, std::vector<double>(10));
  std::vector<std::size_t> correct(1000);
  for (std::size_t g = 0; g < 1000; ++g) {
    for (auto& s : scores[g]) s = level(rng) * 0.25;
    correct[g] = pick(rng);
  }
  for (std::size_t k : {1, 2, 3, 5, 10}) {
    double hits = 0;
    for (std::size_t g = 0; g < 1000; ++g) hits += testing::brute_force_hit(scores[g], correct[g], k);
    CHECK(recall_at_k(scores, correct, k) == hits / 1000.0);
  }
}

TEST_CASE("reports: group sizes decide which metrics exist") {
  auto groups_of = [](std::size_t n, std::size_t count) {
    std::vector<EvaluationGroup> gs(count);
    for (auto& g : gs) {
      g.context = {{6}};
      g.candidates.assign(n, TokenSeq{7});
    }
    return gs;
  };
  const auto ten = groups_of(10, 5);
  std::vector<std::vector<double>> perfect(5, std::vector<double>(10, 0.1));
  for (auto& s : perfect) s[0] = 0.9;
  const MetricReport all = make_report(ten, perfect);
  CHECK(all.r2_at_1 == 1.0);
  CHECK(all.r10_at_1 == 1.0);
  CHECK(all.r10_at_3 == 1.0);
  CHECK(all.r10_at_5 == 1.0);
  CHECK(all.n_groups == 5);
  CHECK(all.monotone());

  const auto two = groups_of(2, 3);
  std::vector<std::vector<double>> s2(3, std::vector<double>{0.2, 0.8});
  const MetricReport pairs = make_report(two, s2);
  CHECK(pairs.r2_at_1 == 0.0);
  CHECK_FALSE(pairs.r10_at_1.has_value());
  CHECK_FALSE(pairs.r10_at_5.has_value());
  const std::string text = pairs.to_text();
  CHECK(text.find("R10@1=NA") != std::string::npos);
  CHECK(text.find("n_groups=3") != std::string::npos);
}

TEST_CASE("R2@1 compares the correct candidate with the first negative only") {
  std::vector<EvaluationGroup> gs(1);
  gs[0].context = {{6}};
  gs[0].candidates.assign(10, TokenSeq{7});
  std::vector<std::vector<double>> s{{0.5, 0.1, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9}};
  const MetricReport r = make_report(gs, s);
  CHECK(r.r2_at_1 == 1.0);
  CHECK(r.r10_at_1 == 0.0);
  CHECK(r.r10_at_5 == 0.0);
}

TEST_CASE("monotonicity holds on random reports") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvaluationGroup> gs(20);
    std::vector<std::vector<double>> s(20, std::vector<double>(10));
    for (std::size_t g = 0; g < 20; ++g) {
      gs[g].context = {{6}};
      gs[g].candidates.assign(10, TokenSeq{7});
      for (auto& x : s[g]) x = u(rng);
    }
    CHECK(make_report(gs, s).monotone());
  }
}

TEST_CASE("information content") {
  std::vector<std::uint64_t> counts(1024, 0);
  const UnigramModel uniform(counts);
  const TokenSeq utterance{1, 2, 3, 500, 1023};
  CHECK(information_content(utterance, uniform) == doctest::Approx(10.0).epsilon(1e-12));

  std::vector<std::uint64_t> single(2, 0);
  single[1] = 1000000000;
  const UnigramModel dominated(single);
  CHECK(information_content(TokenSeq{1, 1}, dominated) < 1e-8);
  CHECK_THROWS_AS(information_content(TokenSeq{}, uniform), ContractError);
}

TEST_CASE("unigram fitting counts context and response tokens") {
  Triple t;
  t.context = {{6, 7}, {7}};
  t.response = {8};
  const std::vector<Triple> data{t};
  const UnigramModel m = UnigramModel::fit(data, 10);
  CHECK(m.counts()[7] == 2);
  CHECK(m.counts()[8] == 1);
  CHECK(m.total() == 4);
  CHECK(m.probability(7) == doctest::Approx(3.0 / 14.0));
}

TEST_CASE("one-sample t-test") {
  const std::vector<double> samples{0.2, 0.25, 0.3, 0.22, 0.28};
  const auto r = one_sample_t_test(samples, 0.1);
  CHECK(r.degrees_of_freedom == 4.0);
  // mean 0.25, sd 0.0412311, t = 0.15 / (0.0412311 / sqrt 5)
  CHECK(r.t == doctest::Approx(8.1349).epsilon(1e-4));
  CHECK(r.p_greater < 0.001);
  const auto flat = one_sample_t_test(samples, 0.25);
  CHECK(flat.p_greater == doctest::Approx(0.5));
}

namespace {

DualEncoder tiny_model(const std::string& variant, std::size_t vocab, const KnowledgeBase& kb = {}) {
  ModelConfig c = build_variant(variant);
  c.embed_dim = 8;
  c.hidden = 6;
  std::mt19937_64 rng(2);
  ModelParams p(c, vocab, rng);
  return DualEncoder(c, std::move(p), kb);
}

}  // namespace

TEST_CASE("a single triple is memorized") {
  DualEncoder m = tiny_model("DE-GRU", 20);
  Triple t;
  t.context = {{6, 7, 8}};
  t.response = {9, 10};
  t.label = 1;
  const std::vector<Triple> data{t};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 0.01;
  double loss = 1.0;
  for (int step = 0; step < 200; ++step) loss = train_step(m, state, data, cfg);
  CHECK(loss < 0.01);
}

TEST_CASE("training is deterministic and restores the best epoch") {
  const auto task = [] {
    testing::KeywordTaskConfig c;
    c.topics = 4;
    c.seen_synonyms = 1;
    c.unseen_synonyms = 0;
    c.context_length = 6;
    c.train_groups = 40;
    c.validation_groups = 10;
    c.eval_groups = 10;
    return testing::make_keyword_task(c, 1);
  }();
  TrainConfig cfg;
  cfg.adam.lr = 0.01;
  cfg.batch_size = 8;
  cfg.max_epochs = 4;
  cfg.patience = 2;
  cfg.seed = 9;
  auto run = [&] {
    DualEncoder m = tiny_model("AK-DE-biGRU", task.vocab.size(), task.kb);
    std::string log;
    const TrainResult r = train(m, task.train, task.validation, cfg, [&](const EpochRecord& e) {
      log += e.to_json_line() + "\n";
    });
    return std::make_tuple(log, r.best_epoch, m.params().bilinear.value, r);
  };
  const auto [log_a, best_a, m_a, result] = run();
  const auto [log_b, best_b, m_b, unused] = run();
  CHECK(log_a == log_b);
  CHECK(m_a == m_b);
  CHECK(best_a == best_b);
  REQUIRE_FALSE(result.history.empty());
  CHECK(result.history.size() <= 4);
  CHECK(best_a >= 1);
  CHECK(log_a.find("\"R10@1\":") != std::string::npos);
  for (const auto& e : result.history) CHECK(e.metrics.monotone());
}

TEST_CASE("epoch records print absent metrics as null") {
  EpochRecord r;
  r.epoch = 3;
  r.loss = 0.5;
  r.metrics.r2_at_1 = 0.75;
  CHECK(r.to_json_line() == "{\"epoch\":3,\"loss\":0.5,\"R2@1\":0.75,\"R10@1\":null,\"R10@3\":null,\"R10@5\":null}");
}

TEST_CASE("training rejects unusable configurations") {
  DualEncoder m = tiny_model("DE-GRU", 20);
  Triple t;
  t.context = {{6}};
  t.response = {7};
  std::vector<Triple> data{t};
  std::vector<EvaluationGroup> val(1);
  val[0].context = {{6}};
  val[0].candidates = {{7}, {8}};
  TrainConfig cfg;
  cfg.adam.lr = 0.0;
  CHECK_THROWS_AS(train(m, data, val, cfg), ConfigError);
  cfg = TrainConfig{};
  CHECK_THROWS_AS(train(m, {}, val, cfg), ConfigError);
  // Two-candidate validation cannot drive an R10@1 stop rule.
  CHECK_THROWS_AS(train(m, data, val, cfg), ConfigError);
  cfg.stop_metric = StopMetric::r2_at_1;
  cfg.max_epochs = 1;
  CHECK(train(m, data, val, cfg).history.size() == 1);
}

TEST_CASE("divergence stops training and keeps the last good parameters") {
  DualEncoder m = tiny_model("DE-GRU", 20);
  Triple t;
  t.context = {{6}};
  t.response = {7};
  t.label = 1;
  std::vector<Triple> data{t};
  std::vector<EvaluationGroup> val(1);
  val[0].context = {{6}};
  val[0].candidates = {{7}, {8}};
  TrainConfig cfg;
  cfg.stop_metric = StopMetric::r2_at_1;
  const Matrix before = m.params().bilinear.value;
  m.params().embedding.value(6, 0) = std::numeric_limits<double>::infinity();
  const TrainResult r = train(m, data, val, cfg);
  CHECK(r.diverged);
  CHECK(r.history.empty());
  CHECK(r.divergence_reason.find("epoch 1") != std::string::npos);
  CHECK(m.params().bilinear.value == before);
}
