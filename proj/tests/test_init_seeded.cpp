#include <doctest.h>

#include <cmath>
#include <vector>

#include "tem/diagnostics.hpp"
#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/init_seeded.hpp"

using namespace tem;

namespace {

GenerationParams seeded_params(std::uint64_t seed) {
  GenerationParams p;
  p.num_topics = 4;
  p.num_words = 120;
  p.num_docs = 2000;
  p.max_doc_topics = 3;
  p.rho = 0.1;
  // At K=4 every other topic rides along in ~40% of documents, which makes
  // the off-support decay slow; a lower inclusion rate keeps this small
  // instance inside the iteration budget.
  p.extra_topic_prob = 0.1;
  p.topics_per_word_max = 2;
  p.exact_docs = true;
  p.seed = seed;
  Case2Params c2;
  c2.anchor_mass_p = 0.8;
  c2.dynamic_range_b = 2.0;
  c2.c_l = 0.95;
  c2.c_s = 0.01;
  c2.delta = 1.0 - std::sqrt(0.95);
  c2.anchor_words_per_topic = 10;
  p.case2 = c2;
  return p;
}

}  // namespace

TEST_CASE("select_seed_docs picks qualifying documents, preferring the largest") {
  const Instance inst = gen_case2(seeded_params(3));
  const auto seeds = select_seed_docs(inst, inst.params.case2->c_l);
  REQUIRE(seeds.size() == static_cast<std::size_t>(inst.num_topics()));
  for (int i = 0; i < inst.num_topics(); ++i) {
    const auto& g = *inst.docs[seeds[i]].truth;
    CHECK(g[i] >= inst.params.case2->c_l);
    CHECK(g.dominant_topic() == i);
  }
  CHECK_THROWS_AS(select_seed_docs(inst, 1.01), std::runtime_error);
}

TEST_CASE("seeded_init rows are the seed documents' frequency vectors") {
  const Instance inst = gen_case2(seeded_params(5));
  const auto seeds = select_seed_docs(inst, inst.params.case2->c_l);
  const InferenceState state = seeded_init(seeds, inst.docs);

  for (int i = 0; i < inst.num_topics(); ++i) {
    double sum = 0.0;
    for (double v : state.beta.row(i)) {
      CHECK(v > 0.0);  // floored, never exactly zero
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // Observed words keep (renormalized) seed frequencies.
    for (const auto& e : inst.docs[seeds[i]].freqs) {
      CHECK(state.beta(i, e.word) == doctest::Approx(e.freq).epsilon(1e-6));
    }
  }
  CHECK(state.doc_supports.empty());   // no support enforcement
  CHECK(state.topic_supports.empty());
}

TEST_CASE("a pure seed document reproduces its topic row exactly") {
  // Hand-built: one pure document per topic with exact frequencies.
  const TopicWordMatrix beta(2, 4, {0.4, 0.6, 0.0, 0.0, 0.0, 0.0, 0.3, 0.7});
  std::vector<Document> corpus(2);
  for (int i = 0; i < 2; ++i) {
    corpus[i].vocab_size = 4;
    for (int j = 0; j < 4; ++j) {
      if (beta(i, j) > 0.0) corpus[i].freqs.push_back({j, beta(i, j)});
    }
  }
  const InferenceState state = seeded_init({0, 1}, corpus, 0.0);
  for (int j = 0; j < 4; ++j) {
    CHECK(state.beta(0, j) == doctest::Approx(beta(0, j)));
    CHECK(state.beta(1, j) == doctest::Approx(beta(1, j)));
  }
}

TEST_CASE("phase monitor declares phase one complete at t=0 for an exact state") {
  const Instance inst = gen_case2(seeded_params(7));
  InferenceState state;
  state.beta = inst.beta_true;
  for (const auto& doc : inst.docs) state.gammas.push_back(*doc.truth);
  state.iteration = 0;

  PhaseMonitor monitor(inst, identity_permutation(inst.num_topics()));
  monitor.observe(state);
  const PhaseReport& report = monitor.report();
  CHECK(report.phase1_iteration == 0);
  CHECK(report.phase2_iteration == 0);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].max_offanchor_ratio == 0.0);
  CHECK(report.rows[0].min_anchor_ratio == doctest::Approx(1.0));
  CHECK(report.rows[0].dominant_acc == 1.0);
}

TEST_CASE("seeded run: dominant sandwich, gamma error bound and anchor decay") {
  const Instance inst = gen_case2(seeded_params(11));
  const Case2Params& c2 = *inst.params.case2;
  const auto seeds = select_seed_docs(inst, c2.c_l);
  InferenceState init = seeded_init(seeds, inst.docs);
  const auto perm = match_topics(init.beta, inst.beta_true);

  PhaseMonitor monitor(inst, perm);
  const double inv_p = 1.0 / c2.anchor_mass_p;
  int klestimate_violations = 0;
  int sandwich_violations = 0;

  auto observer = [&](const IterationRecord& rec) {
    monitor.observe(rec.state);
    const double beta_term = std::sqrt(0.5 * rec.trace_row->kl_beta_max);
    for (std::size_t d = 0; d < rec.state.gammas.size(); ++d) {
      const auto& est = rec.state.gammas[d];
      const auto& tru = *inst.docs[d].truth;
      double l1 = 0.0;
      for (int i = 0; i < est.num_topics(); ++i) l1 += std::abs(est[i] - tru[perm[i]]);
      const double bound =
          inv_p * (beta_term + std::sqrt(0.5 * rec.estep_objectives[d])) + inst.epsilon_achieved;
      if (l1 > bound + 1e-12) ++klestimate_violations;

      const int true_dom = tru.dominant_topic();
      int est_dom = -1;
      for (int i = 0; i < est.num_topics(); ++i) {
        if (perm[i] == true_dom) est_dom = i;
      }
      const double w = est[est_dom];
      if (w < 0.5 * tru[true_dom] - 1e-12 || w > 1.5 * tru[true_dom] + 1e-12) {
        ++sandwich_violations;
      }
    }
  };

  RunOptions options;
  options.outer_iters = 100;
  options.epsilon_prime = 0.1;
  options.threads = 2;
  const auto result =
      run_tem(inst, std::move(init), Variant::kKlTem, options, EStepSettings{}, nullptr, observer);

  CHECK(result.reached_target);
  CHECK(klestimate_violations == 0);
  CHECK(sandwich_violations == 0);
  for (const auto& row : result.trace.rows) CHECK(row.dominant_acc == 1.0);

  const PhaseReport& phases = monitor.report();
  CHECK(phases.offanchor_decay_ok);
  bool identified = false;
  for (const auto& row : phases.rows) {
    if (row.max_offanchor_ratio < 1e-8) identified = true;
  }
  CHECK(identified);
  // No negative entries anywhere along the run.
  for (double v : result.state.beta.values()) CHECK(v >= 0.0);
}
