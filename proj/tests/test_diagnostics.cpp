#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tem/diagnostics.hpp"
#include "tem/experiments.hpp"
#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/rng.hpp"
#include "tem/serialization.hpp"

using namespace tem;

namespace {

TopicWordMatrix random_stochastic(Rng& rng, int k, int n) {
  std::vector<double> values(static_cast<std::size_t>(k) * n);
  for (double& v : values) v = rng.uniform(0.05, 1.0);
  TopicWordMatrix m(k, n, std::move(values));
  m.normalize_rows();
  return m;
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

TEST_CASE("multiplicative_error basics") {
  const TopicWordMatrix truth(2, 2, {0.25, 0.75, 0.5, 0.5});
  const auto perm = identity_permutation(2);
  CHECK(multiplicative_error(truth, truth, perm) == doctest::Approx(1.0));

  TopicWordMatrix scaled = truth;
  scaled(0, 0) = 0.5;  // 2x off on one entry
  CHECK(multiplicative_error(scaled, truth, perm) == doctest::Approx(2.0));

  TopicWordMatrix zeroed = truth;
  zeroed(0, 0) = 0.0;
  CHECK(multiplicative_error(zeroed, truth, perm) == kInfinity);

  // Mass appearing where the truth is zero (beyond 1e-12) is also infinite.
  const TopicWordMatrix sparse_truth(1, 2, {1.0, 0.0});
  const TopicWordMatrix wide(1, 2, {0.999, 0.001});
  CHECK(multiplicative_error(wide, sparse_truth, identity_permutation(1)) == kInfinity);
  const TopicWordMatrix tiny(1, 2, {1.0 - 1e-13, 1e-13});
  CHECK(multiplicative_error(tiny, sparse_truth, identity_permutation(1)) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("multiplicative_error is invariant under a shared permutation") {
  Rng rng(3);
  const TopicWordMatrix est = random_stochastic(rng, 4, 9);
  const TopicWordMatrix truth = random_stochastic(rng, 4, 9);
  const double direct = multiplicative_error(est, truth, identity_permutation(4));

  // Apply the same row shuffle to both matrices.
  const std::vector<int> shuffle{2, 0, 3, 1};
  std::vector<double> ev, tv;
  for (int i : shuffle) {
    ev.insert(ev.end(), est.row(i).begin(), est.row(i).end());
    tv.insert(tv.end(), truth.row(i).begin(), truth.row(i).end());
  }
  const TopicWordMatrix est2(4, 9, ev);
  const TopicWordMatrix truth2(4, 9, tv);
  CHECK(multiplicative_error(est2, truth2, identity_permutation(4)) == doctest::Approx(direct));
}

TEST_CASE("match_topics on identity, swapped and random instances") {
  Rng rng(5);
  const TopicWordMatrix truth = random_stochastic(rng, 2, 6);
  CHECK(match_topics(truth, truth) == std::vector<int>{0, 1});

  std::vector<double> swapped(truth.row(1).begin(), truth.row(1).end());
  swapped.insert(swapped.end(), truth.row(0).begin(), truth.row(0).end());
  const TopicWordMatrix est(2, 6, swapped);
  CHECK(match_topics(est, truth) == std::vector<int>{1, 0});

  // K=6: agree with exhaustive search over all 720 permutations.
  const int k = 6, n = 12;
  const TopicWordMatrix t6 = random_stochastic(rng, k, n);
  const TopicWordMatrix e6 = random_stochastic(rng, k, n);
  const auto perm = match_topics(e6, t6);
  auto cost_of = [&](const std::vector<int>& p) {
    double c = 0.0;
    for (int i = 0; i < k; ++i) c += total_variation(e6.row(i), t6.row(p[i]));
    return c;
  };
  std::vector<int> brute(k);
  std::iota(brute.begin(), brute.end(), 0);
  double best = kInfinity;
  std::vector<int> best_perm;
  do {
    const double c = cost_of(brute);
    if (c < best) {
      best = c;
      best_perm = brute;
    }
  } while (std::next_permutation(brute.begin(), brute.end()));
  CHECK(cost_of(perm) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("oracle_estep corner cases") {
  const TopicWordMatrix beta(2, 3, {0.6, 0.3, 0.1, 0.1, 0.2, 0.7});
  SUBCASE("singleton support") {
    const Document doc = doc_from_dense({0.5, 0.25, 0.25});
    const auto g = oracle_estep(doc, beta, {1}, 0.05);
    CHECK(g[1] == doctest::Approx(1.0));
  }
  SUBCASE("document equal to a row lands on that corner") {
    const Document doc = doc_from_dense({0.6, 0.3, 0.1});
    const auto g = oracle_estep(doc, beta, {0, 1}, 0.01);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("support larger than four is rejected") {
    Rng rng(7);
    const TopicWordMatrix wide = random_stochastic(rng, 5, 6);
    const Document doc = doc_from_dense({0.2, 0.2, 0.2, 0.2, 0.1, 0.1});
    CHECK_THROWS_AS(oracle_estep(doc, wide, {0, 1, 2, 3, 4}, 0.05), std::invalid_argument);
  }
}

TEST_CASE("oracle_estep agrees with a fine 1-D grid search at K=2") {
  Rng rng(11);
  const TopicWordMatrix beta = random_stochastic(rng, 2, 8);
  std::vector<double> g{0.37, 0.63};
  const Document doc = doc_from_dense(predicted_freqs(TopicProportions(g), beta));

  double best_obj = kInfinity;
  for (int i = 0; i <= 1000000; ++i) {
    const double a = static_cast<double>(i) * 1e-6;
    const TopicProportions cand({a, 1.0 - a});
    best_obj = std::min(best_obj, estep_objective(doc, beta, cand));
  }
  const auto oracle = oracle_estep(doc, beta, {0, 1}, 0.01);
  CHECK(estep_objective(doc, beta, oracle) == doctest::Approx(best_obj).epsilon(1e-9));

  EStepSettings settings;
  settings.convergence_tol = 1e-12;
  const auto solved = estep_kl(doc, beta, {0, 1}, settings);
  CHECK(std::abs(solved.objective - best_obj) < 1e-6);
}

TEST_CASE("support_metrics") {
  const std::vector<std::vector<int>> truth{{0, 1, 2}, {3, 4}};
  CHECK(support_metrics(truth, truth, identity_permutation(2)).exact_match);

  const std::vector<std::vector<int>> extra{{0, 1, 2, 5}, {3, 4}};
  const auto m = support_metrics(extra, truth, identity_permutation(2));
  CHECK_FALSE(m.exact_match);
  CHECK(m.per_topic[0].precision == doctest::Approx(0.75));
  CHECK(m.per_topic[0].recall == doctest::Approx(1.0));
}

TEST_CASE("record_trace is pure and exact states give the unit row") {
  const Instance inst = [] {
    GenerationParams p;
    p.num_topics = 4;
    p.num_words = 60;
    p.num_docs = 200;
    p.max_doc_topics = 3;
    p.rho = 0.1;
    p.overlap_mass = 0.02;
    p.topics_per_word_max = 2;
    p.minor_floor = 0.12;
    p.seed = 13;
    return gen_case1(p);
  }();
  InferenceState state;
  state.beta = inst.beta_true;
  for (const auto& doc : inst.docs) state.gammas.push_back(*doc.truth);
  state.iteration = 0;

  const auto perm = identity_permutation(4);
  const auto row1 = record_trace(state, inst, perm, nullptr);
  const auto row2 = record_trace(state, inst, perm, nullptr);
  CHECK(row1.c_beta == row2.c_beta);
  CHECK(row1.c_gamma == row2.c_gamma);
  CHECK(row1.c_beta == doctest::Approx(1.0));
  CHECK(row1.c_gamma == doctest::Approx(1.0));
  CHECK(row1.kl_beta_max == doctest::Approx(0.0));
  CHECK(row1.dominant_acc == 1.0);
  CHECK(row1.estep_objective_mean == doctest::Approx(0.0).epsilon(1e-12));

  ErrorTrace trace;
  for (int t = 0; t < 10; ++t) {
    state.iteration = t;
    record_trace(state, inst, perm, &trace);
  }
  REQUIRE(trace.rows.size() == 10);
  for (int t = 0; t < 10; ++t) CHECK(trace.rows[t].t == t);
}

TEST_CASE("check_error_evolution accepts a square-root chain and flags violations") {
  ErrorTrace good;
  for (double c : {16.0, 4.0, 2.0}) {
    ErrorTraceRow row;
    row.t = static_cast<int>(good.rows.size());
    row.c_beta = c;
    row.c_gamma = std::cbrt(c);
    good.rows.push_back(row);
  }
  // 16 lies outside the default [lower, 10] window; use a wider window so the
  // full chain is checked.
  CHECK(check_error_evolution(good, 0.0, 0.05, 20.0).pass);

  ErrorTrace bad = good;
  bad.rows[1].c_beta = 9.0;  // 16 -> 9 violates sqrt(16)*1.05
  const auto report = check_error_evolution(bad, 0.0, 0.05, 20.0);
  CHECK_FALSE(report.pass);
  CHECK(report.first_violation_t == 0);

  ErrorTrace gamma_bad = good;
  gamma_bad.rows[1].c_gamma = 3.0;  // above 4^{1/3} * 1.05
  CHECK_FALSE(check_error_evolution(gamma_bad, 0.0, 0.05, 20.0).pass);
}

TEST_CASE("trace CSV round-trips, serializing infinity as inf") {
  ErrorTrace trace;
  ErrorTraceRow row;
  row.t = 0;
  row.c_beta = kInfinity;
  row.c_gamma = 2.5;
  row.kl_beta_max = 0.125;
  row.dominant_acc = 1.0;
  row.estep_objective_mean = 1e-9;
  trace.rows.push_back(row);
  row.t = 1;
  row.c_beta = 1.5;
  trace.rows.push_back(row);

  const std::string csv = trace_to_csv(trace);
  CHECK(csv.find("inf") != std::string::npos);
  const ErrorTrace back = trace_from_csv(csv);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].c_beta == kInfinity);
  CHECK(back.rows[1].c_beta == 1.5);
  CHECK(back.rows[0].estep_objective_mean == 1e-9);
}

TEST_CASE("instance JSON round-trip preserves every field") {
  GenerationParams p;
  p.num_topics = 3;
  p.num_words = 40;
  p.num_docs = 25;
  p.max_doc_topics = 2;
  p.rho = 0.1;
  p.overlap_mass = 0.02;
  p.topics_per_word_max = 2;
  p.minor_floor = 0.15;
  p.exact_docs = true;
  p.seed = 17;
  const Instance inst = gen_case1(p);
  const Instance back = instance_from_json(instance_to_json(inst));
  back.validate();
  CHECK(back.beta_true.values() == inst.beta_true.values());
  CHECK(back.params.seed == inst.params.seed);
  CHECK(back.epsilon_achieved == inst.epsilon_achieved);
  REQUIRE(back.docs.size() == inst.docs.size());
  for (std::size_t d = 0; d < inst.docs.size(); ++d) {
    CHECK(back.docs[d].truth->weights() == inst.docs[d].truth->weights());
    REQUIRE(back.docs[d].freqs.size() == inst.docs[d].freqs.size());
    for (std::size_t e = 0; e < inst.docs[d].freqs.size(); ++e) {
      CHECK(back.docs[d].freqs[e].freq == inst.docs[d].freqs[e].freq);
    }
  }
  // Byte determinism of the serialized form.
  CHECK(instance_to_json(inst) == instance_to_json(back));
}

TEST_CASE("state JSON round-trip") {
  const Instance inst = [] {
    GenerationParams p;
    p.num_topics = 3;
    p.num_words = 30;
    p.num_docs = 10;
    p.max_doc_topics = 2;
    p.rho = 0.1;
    p.seed = 19;
    return gen_case1(p);
  }();
  const InferenceState state = experiments::oracle_support_state(inst);
  const InferenceState back = state_from_json(state_to_json(state));
  CHECK(back.beta.values() == state.beta.values());
  CHECK(back.doc_supports == state.doc_supports);
  CHECK(back.topic_supports == state.topic_supports);
  REQUIRE(back.gammas.size() == state.gammas.size());
  for (std::size_t d = 0; d < state.gammas.size(); ++d) {
    CHECK(back.gammas[d].weights() == state.gammas[d].weights());
  }
}
