#include <doctest.h>

#include <cmath>
#include <vector>

#include "tem/diagnostics.hpp"
#include "tem/experiments.hpp"
#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/rng.hpp"

using namespace tem;

namespace {

GenerationParams tiny_case1(std::uint64_t seed, int k = 5, int n = 80, int d = 400) {
  GenerationParams p;
  p.num_topics = k;
  p.num_words = n;
  p.num_docs = d;
  p.max_doc_topics = 3;
  p.rho = 0.1;
  p.overlap_mass = 0.02;
  p.topics_per_word_max = 2;
  p.minor_floor = 0.12;
  p.exact_docs = true;
  p.seed = seed;
  return p;
}

Document doc_from_dense(const std::vector<double>& freqs) {
  Document doc;
  doc.vocab_size = static_cast<int>(freqs.size());
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    if (freqs[j] > 0.0) doc.freqs.push_back({static_cast<int>(j), freqs[j]});
  }
  return doc;
}

}  // namespace

TEST_CASE("E-step with a singleton support is forced to that topic") {
  const TopicWordMatrix beta(2, 2, {0.5, 0.5, 0.1, 0.9});
  const Document doc = doc_from_dense({0.3, 0.7});
  EStepSettings settings;
  const auto r = estep_multiplicative(doc, beta, TopicProportions({0.0, 1.0}), {1}, settings,
                                      EStepMode::kOneStep);
  CHECK(r.gamma[1] == doctest::Approx(1.0));
  CHECK(r.gamma[0] == 0.0);
}

TEST_CASE("E-step under identity beta recovers the frequencies in one step") {
  const TopicWordMatrix beta(2, 2, {1.0, 0.0, 0.0, 1.0});
  const Document doc = doc_from_dense({0.3, 0.7});
  EStepSettings settings;
  const auto r = estep_multiplicative(doc, beta, TopicProportions({0.5, 0.5}), {0, 1}, settings,
                                      EStepMode::kOneStep);
  CHECK(r.gamma[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(r.gamma[1] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("E-step matches the grid oracle on random instances") {
  Rng rng(23);
  EStepSettings settings;
  settings.convergence_tol = 1e-12;
  settings.max_inner_iters = 20000;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3;
    const int n = 5;
    std::vector<double> values(k * n);
    for (double& v : values) v = rng.uniform(0.05, 1.0);
    TopicWordMatrix beta(k, n, std::move(values));
    beta.normalize_rows();
    std::vector<double> g(k);
    double sum = 0.0;
    for (double& v : g) {
      v = rng.uniform(0.05, 1.0);
      sum += v;
    }
    for (double& v : g) v /= sum;
    const Document doc = doc_from_dense(predicted_freqs(TopicProportions(g), beta));

    const auto solved = estep_kl(doc, beta, {0, 1, 2}, settings);
    const auto oracle = oracle_estep(doc, beta, {0, 1, 2}, 0.05);
    CHECK(std::abs(solved.objective - estep_objective(doc, beta, oracle)) < 1e-6);
  }
}

TEST_CASE("E-step objective is monotone nonincreasing across inner sweeps") {
  Rng rng(29);
  EStepSettings settings;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(3));
    const int n = 4 + static_cast<int>(rng.uniform_int(8));
    std::vector<double> values(static_cast<std::size_t>(k) * n);
    for (double& v : values) v = rng.uniform(0.05, 1.0);
    TopicWordMatrix beta(k, n, std::move(values));
    beta.normalize_rows();
    std::vector<double> f(n);
    double sum = 0.0;
    for (double& v : f) {
      v = rng.uniform(0.01, 1.0);
      sum += v;
    }
    for (double& v : f) v /= sum;
    const Document doc = doc_from_dense(f);

    std::vector<int> support(k);
    for (int i = 0; i < k; ++i) support[i] = i;
    TopicProportions gamma(std::vector<double>(k, 1.0 / k));
    double prev = estep_objective(doc, beta, gamma);
    for (int step = 0; step < 25; ++step) {
      gamma = estep_multiplicative(doc, beta, gamma, support, settings, EStepMode::kOneStep).gamma;
      const double cur = estep_objective(doc, beta, gamma);
      CHECK(cur <= prev + 1e-10);
      prev = cur;
    }
  }
}

TEST_CASE("E-step KKT certificate at convergence") {
  const Instance inst = gen_case1(tiny_case1(41));
  EStepSettings settings;
  for (int d = 0; d < 50; ++d) {
    const auto& doc = inst.docs[d];
    const auto r = estep_kl(doc, inst.beta_true, doc.truth->support(), settings);
    CHECK(r.kkt_residual <= settings.kkt_tol);
  }
}

TEST_CASE("E-step recovers gamma star from exact frequencies with correct supports") {
  const Instance inst = gen_case1(tiny_case1(43));
  EStepSettings settings;
  settings.convergence_tol = 1e-13;
  settings.max_inner_iters = 30000;
  for (int d = 0; d < 100; ++d) {
    const auto& doc = inst.docs[d];
    const auto r = estep_kl(doc, inst.beta_true, doc.truth->support(), settings);
    double l1 = 0.0;
    for (int i = 0; i < inst.num_topics(); ++i) l1 += std::abs(r.gamma[i] - (*doc.truth)[i]);
    CHECK(l1 <= 1e-6);
  }
}

TEST_CASE("E-step reports a support mismatch on an observed lone word") {
  // Word 2 is generated only by topic 1; excluding topic 1 from the support
  // leaves zero predicted mass there and an infinite objective.
  const TopicWordMatrix beta(2, 3, {0.5, 0.5, 0.0, 0.2, 0.3, 0.5});
  const Document doc = doc_from_dense({0.3, 0.4, 0.3});
  EStepSettings settings;
  CHECK_THROWS_WITH_AS(estep_kl(doc, beta, {0}, settings),
                       doctest::Contains("zero predicted mass"), std::runtime_error);
}

TEST_CASE("E-step rejects an init outside the document support") {
  const TopicWordMatrix beta(2, 2, {0.5, 0.5, 0.1, 0.9});
  const Document doc = doc_from_dense({0.3, 0.7});
  EStepSettings settings;
  CHECK_THROWS_AS(estep_multiplicative(doc, beta, TopicProportions({0.5, 0.5}), {0}, settings,
                                       EStepMode::kOneStep),
                  std::invalid_argument);
}

TEST_CASE("M-step on a single pure document is proportional to its frequencies") {
  const TopicWordMatrix prev(1, 3, {0.2, 0.3, 0.5});
  const std::vector<Document> docs{doc_from_dense({0.6, 0.1, 0.3})};
  const std::vector<TopicProportions> gammas{TopicProportions({1.0})};
  const auto next = mstep_thresholded(docs, gammas, prev, true);
  CHECK(next(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(next(0, 1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(next(0, 2) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("ground truth is a fixed point of the M-step") {
  const Instance inst = gen_case1(tiny_case1(47));
  std::vector<TopicProportions> gammas;
  gammas.reserve(inst.docs.size());
  for (const auto& doc : inst.docs) gammas.push_back(*doc.truth);
  for (bool thresholded : {true, false}) {
    const auto next = thresholded ? mstep_thresholded(inst.docs, gammas, inst.beta_true, true)
                                  : mstep_vanilla(inst.docs, gammas, inst.beta_true, true);
    double dev = 0.0;
    for (int i = 0; i < inst.num_topics(); ++i) {
      for (int j = 0; j < inst.num_words(); ++j) {
        dev = std::max(dev, std::abs(next(i, j) - inst.beta_true(i, j)));
      }
    }
    CHECK(dev <= 1e-9);
  }
}

TEST_CASE("vanilla and thresholded M-steps coincide on pure documents") {
  GenerationParams p = tiny_case1(53);
  p.max_doc_topics = 1;  // every document pure
  const Instance inst = gen_case1(p);
  std::vector<TopicProportions> gammas;
  for (const auto& doc : inst.docs) gammas.push_back(*doc.truth);
  // Perturbed beta so the update is not a no-op.
  TopicWordMatrix prev = inst.beta_true;
  Rng rng(1);
  for (int i = 0; i < prev.num_topics(); ++i) {
    for (int j = 0; j < prev.num_words(); ++j) {
      if (prev(i, j) > 0.0) prev(i, j) *= rng.uniform(0.5, 2.0);
    }
  }
  prev.normalize_rows();
  const auto a = mstep_thresholded(inst.docs, gammas, prev, true);
  const auto b = mstep_vanilla(inst.docs, gammas, prev, true);
  for (int i = 0; i < a.num_topics(); ++i) {
    for (int j = 0; j < a.num_words(); ++j) CHECK(a(i, j) == doctest::Approx(b(i, j)));
  }
}

TEST_CASE("M-step reports a topic with an empty D_i") {
  const TopicWordMatrix prev(2, 2, {0.5, 0.5, 0.5, 0.5});
  const std::vector<Document> docs{doc_from_dense({0.5, 0.5})};
  const std::vector<TopicProportions> gammas{TopicProportions({1.0, 0.0})};
  CHECK_THROWS_WITH_AS(mstep_thresholded(docs, gammas, prev, true), doctest::Contains("topic 1"),
                       std::runtime_error);
}

TEST_CASE("ties assign a document to no D_i") {
  const TopicWordMatrix prev(2, 2, {0.6, 0.4, 0.4, 0.6});
  const std::vector<Document> docs{doc_from_dense({0.5, 0.5}), doc_from_dense({0.6, 0.4}),
                                   doc_from_dense({0.4, 0.6})};
  const std::vector<TopicProportions> gammas{TopicProportions({0.5, 0.5}),
                                             TopicProportions({0.9, 0.1}),
                                             TopicProportions({0.1, 0.9})};
  // The tied document contributes to neither topic; the other two documents
  // keep both D_i nonempty.
  const auto next = mstep_thresholded(docs, gammas, prev, false);
  const auto only = mstep_thresholded({docs[1], docs[2]}, {gammas[1], gammas[2]}, prev, false);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(next(i, j) == doctest::Approx(only(i, j)));
  }
}

TEST_CASE("run_tem with one topic converges immediately to the average document") {
  GenerationParams p = tiny_case1(59, 1, 30, 50);
  p.max_doc_topics = 1;
  const Instance inst = gen_case1(p);
  RunOptions options;
  options.outer_iters = 1;
  options.epsilon_prime = 0.01;
  const auto result = run_tem(inst, experiments::oracle_support_state(inst), Variant::kKlTem,
                              options, EStepSettings{});
  CHECK(result.reached_target);
  CHECK(result.trace.rows.back().c_beta <= 1.01);
}

TEST_CASE("supports never widen across a run") {
  const Instance inst = gen_case1(tiny_case1(61));
  RunOptions options;
  options.outer_iters = 5;
  options.epsilon_prime = 0.0;  // run all iterations
  bool ok = true;
  auto observer = [&](const IterationRecord& rec) {
    for (int i = 0; i < rec.state.beta.num_topics(); ++i) {
      for (int j = 0; j < rec.state.beta.num_words(); ++j) {
        if (rec.state.beta(i, j) > 0.0 && inst.beta_true(i, j) == 0.0) ok = false;
      }
    }
    for (std::size_t d = 0; d < rec.state.gammas.size(); ++d) {
      for (int i = 0; i < rec.state.beta.num_topics(); ++i) {
        if (rec.state.gammas[d][i] > 0.0 && (*inst.docs[d].truth)[i] == 0.0) ok = false;
      }
    }
  };
  run_tem(inst, experiments::oracle_support_state(inst), Variant::kKlTem, options, EStepSettings{},
          nullptr, observer);
  CHECK(ok);
}

TEST_CASE("all three tEM variants contract to the truth on a small instance") {
  const Instance inst = gen_case1(tiny_case1(67, 6, 120, 1500));
  for (Variant variant : {Variant::kKlTem, Variant::kIterativeTem, Variant::kIncompleteTem}) {
    RunOptions options;
    options.outer_iters = 40;
    options.epsilon_prime = 0.1;
    const auto result = run_tem(inst, experiments::oracle_support_state(inst), variant, options,
                                EStepSettings{});
    INFO("variant ", variant_name(variant));
    CHECK(result.reached_target);
    for (const auto& row : result.trace.rows) CHECK(row.dominant_acc == 1.0);
  }
}

TEST_CASE("vanilla variant emits a trace without a convergence claim") {
  const Instance inst = gen_case1(tiny_case1(71, 4, 80, 600));
  RunOptions options;
  options.outer_iters = 10;
  options.epsilon_prime = 0.0;
  const auto result = run_tem(inst, experiments::oracle_support_state(inst), Variant::kVanilla,
                              options, EStepSettings{});
  CHECK(result.trace.rows.size() == 11);  // rows 0..10, no early stop
}

TEST_CASE("E-step is reproducible across thread counts") {
  const Instance inst = gen_case1(tiny_case1(73));
  RunOptions one;
  one.outer_iters = 3;
  one.epsilon_prime = 0.0;
  one.threads = 1;
  RunOptions four = one;
  four.threads = 4;
  const auto a = run_tem(inst, experiments::oracle_support_state(inst), Variant::kIterativeTem, one,
                         EStepSettings{});
  const auto b = run_tem(inst, experiments::oracle_support_state(inst), Variant::kIterativeTem,
                         four, EStepSettings{});
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t r = 0; r < a.trace.rows.size(); ++r) {
    CHECK(a.trace.rows[r].c_beta == b.trace.rows[r].c_beta);
    CHECK(a.trace.rows[r].c_gamma == b.trace.rows[r].c_gamma);
    CHECK(a.trace.rows[r].estep_objective_mean == b.trace.rows[r].estep_objective_mean);
  }
}
