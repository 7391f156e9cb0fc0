#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/init_support.hpp"
#include "tem/rng.hpp"

using namespace tem;

namespace {

Document doc_from_dense(const std::vector<double>& freqs) {
  Document doc;
  doc.vocab_size = static_cast<int>(freqs.size());
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    if (freqs[j] > 0.0) doc.freqs.push_back({static_cast<int>(j), freqs[j]});
  }
  return doc;
}

GenerationParams recovery_params(std::uint64_t seed) {
  GenerationParams p;
  p.num_topics = 5;
  p.num_words = 150;
  p.num_docs = 4000;
  p.max_doc_topics = 2;
  p.rho = 0.1;
  p.overlap_mass = 0.02;
  p.topics_per_word_max = 2;
  p.dominant_floor = 0.55;
  p.minor_floor = 0.15;
  p.exact_docs = true;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("pair_test basics") {
  const Document a = doc_from_dense({0.5, 0.5, 0.0, 0.0});
  const Document b = doc_from_dense({0.0, 0.0, 0.5, 0.5});
  CHECK(pair_test(a, a, 1));          // identical documents: statistic 1 >= 1/2
  CHECK_FALSE(pair_test(a, b, 1));    // disjoint supports: statistic 0
  // Two documents sharing topic mass >= 1/T each on the same words.
  const Document c = doc_from_dense({0.6, 0.0, 0.2, 0.2});
  const Document d = doc_from_dense({0.5, 0.1, 0.2, 0.2});
  CHECK(pair_test_statistic(c, d) == doctest::Approx(0.9));
  CHECK(pair_test(c, d, 2));
}

TEST_CASE("pair_test never fires on documents with disjoint topic sets") {
  const Instance inst = gen_case1(recovery_params(3));
  int checked = 0;
  for (std::size_t a = 0; a < 400; ++a) {
    for (std::size_t b = a + 1; b < 400; ++b) {
      const auto& ga = *inst.docs[a].truth;
      const auto& gb = *inst.docs[b].truth;
      bool intersect = false;
      for (int i : ga.support()) {
        if (gb[i] > 0.0) intersect = true;
      }
      if (!intersect) {
        ++checked;
        CHECK_FALSE(pair_test(inst.docs[a], inst.docs[b], inst.params.max_doc_topics));
      }
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("weedout with only the pair itself keeps the raw intersection") {
  const Document a = doc_from_dense({0.3, 0.3, 0.4, 0.0});
  const Document b = doc_from_dense({0.4, 0.0, 0.3, 0.3});
  const std::vector<Document> corpus{a, b};
  const auto s = weedout(corpus[0], corpus[1], corpus, 2);
  CHECK(s == std::vector<int>{0, 2});
}

TEST_CASE("weedout recovers the shared topic's exact support on a planted instance") {
  const Instance inst = gen_case1(recovery_params(7));
  const auto true_supports = inst.beta_true.supports();
  int recovered = 0;
  for (std::size_t a = 0; a < inst.docs.size() && recovered < 10; ++a) {
    const auto& ga = *inst.docs[a].truth;
    if (ga.support().size() != 1) continue;
    const int topic = ga.support()[0];
    for (std::size_t b = a + 1; b < inst.docs.size() && recovered < 10; ++b) {
      const auto& gb = *inst.docs[b].truth;
      if (gb.support().size() != 1 || gb.support()[0] != topic) continue;
      const auto s = weedout(inst.docs[a], inst.docs[b], inst.docs, inst.params.max_doc_topics);
      CHECK(s == true_supports[topic]);
      ++recovered;
    }
  }
  CHECK(recovered == 10);
}

TEST_CASE("weedout never removes support words of the shared topic") {
  const Instance inst = gen_case1(recovery_params(11));
  const auto true_supports = inst.beta_true.supports();
  int pairs = 0;
  for (std::size_t a = 0; a < 200; ++a) {
    for (std::size_t b = a + 1; b < 200 && pairs < 40; ++b) {
      if (!pair_test(inst.docs[a], inst.docs[b], inst.params.max_doc_topics)) continue;
      // Find a topic shared by both documents.
      const auto& ga = *inst.docs[a].truth;
      const auto& gb = *inst.docs[b].truth;
      int shared = -1;
      for (int i : ga.support()) {
        if (gb[i] > 0.0) shared = i;
      }
      if (shared < 0) continue;
      ++pairs;
      const auto s = weedout(inst.docs[a], inst.docs[b], inst.docs, inst.params.max_doc_topics);
      CHECK(std::includes(s.begin(), s.end(), true_supports[shared].begin(),
                          true_supports[shared].end()));
    }
  }
  CHECK(pairs == 40);
}

TEST_CASE("find_topic_supports on a single-topic corpus") {
  GenerationParams p = recovery_params(13);
  p.num_topics = 1;
  p.num_docs = 50;
  p.max_doc_topics = 1;
  const Instance inst = gen_case1(p);
  SupportInitOptions options;
  options.seed = 1;
  const auto result = find_topic_supports(inst.docs, 1, 1, options);
  REQUIRE(result.supports.size() == 1);
  CHECK(result.supports[0] == inst.beta_true.supports()[0]);
}

TEST_CASE("find_topic_supports recovers all supports on a planted instance") {
  const Instance inst = gen_case1(recovery_params(17));
  SupportInitOptions options;
  options.seed = 99;
  options.threads = 2;
  const auto result =
      find_topic_supports(inst.docs, inst.params.num_topics, inst.params.max_doc_topics, options);
  auto recovered = result.supports;
  auto truth = inst.beta_true.supports();
  std::sort(recovered.begin(), recovered.end());
  std::sort(truth.begin(), truth.end());
  CHECK(recovered == truth);
}

TEST_CASE("union pruning removes a two-topic candidate set") {
  // Hand-built corpus over three disjoint two-word topics. Documents that mix
  // topics 0 and 1 produce the union candidate; pure documents of each topic
  // produce the true supports, and the union rule removes the mixed set.
  std::vector<Document> corpus;
  auto pure = [&](int topic) {
    std::vector<double> f(6, 0.0);
    f[2 * topic] = 0.6;
    f[2 * topic + 1] = 0.4;
    return doc_from_dense(f);
  };
  auto mixed01 = [&]() {
    std::vector<double> f(6, 0.0);
    f[0] = 0.35;
    f[1] = 0.25;
    f[2] = 0.25;
    f[3] = 0.15;
    return doc_from_dense(f);
  };
  for (int r = 0; r < 6; ++r) {
    corpus.push_back(pure(0));
    corpus.push_back(pure(1));
    corpus.push_back(pure(2));
    corpus.push_back(mixed01());
  }
  SupportInitOptions options;
  options.seed = 5;
  options.num_pairs = static_cast<std::int64_t>(corpus.size() * (corpus.size() - 1) / 2);
  const auto result = find_topic_supports(corpus, 3, 2, options);
  const std::vector<std::vector<int>> expected{{0, 1}, {2, 3}, {4, 5}};
  CHECK(result.supports == expected);
}

TEST_CASE("find_document_support") {
  const std::vector<std::vector<int>> supports{{0, 1, 2}, {3, 4, 5}, {6, 7}};
  SUBCASE("pure document yields exactly its topic") {
    const Document doc = doc_from_dense({0.5, 0.3, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0});
    CHECK(find_document_support(doc, supports) == std::vector<int>{0});
  }
  SUBCASE("empty document yields the empty set") {
    Document doc;
    doc.vocab_size = 8;
    CHECK(find_document_support(doc, supports).empty());
  }
  SUBCASE("multi-topic documents on a generated instance") {
    const Instance inst = gen_case1(recovery_params(19));
    const auto true_supports = inst.beta_true.supports();
    for (int d = 0; d < 500; ++d) {
      const auto est = find_document_support(inst.docs[d], true_supports);
      CHECK(est == inst.docs[d].truth->support());
    }
  }
}

TEST_CASE("build_initial_state uniform values and stable ordering") {
  const std::vector<Document> corpus{doc_from_dense({0.5, 0.5, 0.0, 0.0}),
                                     doc_from_dense({0.0, 0.0, 0.4, 0.6})};
  // Supports given out of order; ordering is by smallest contained word.
  const std::vector<std::vector<int>> supports{{2, 3}, {0, 1}};
  const std::vector<std::vector<int>> doc_supports{{1}, {0}};
  const InferenceState state = build_initial_state(corpus, supports, doc_supports);
  CHECK(state.beta(0, 0) == doctest::Approx(0.5));
  CHECK(state.beta(0, 1) == doctest::Approx(0.5));
  CHECK(state.beta(1, 2) == doctest::Approx(0.5));
  CHECK(state.gammas[0][0] == doctest::Approx(1.0));  // support {1} maps to sorted rank 0
  CHECK(state.gammas[1][1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(build_initial_state(corpus, supports, {{2}, {0}}), std::invalid_argument);
}

TEST_CASE("full support pipeline feeds the inference preconditions") {
  const Instance inst = gen_case1(recovery_params(23));
  SupportInitOptions options;
  options.seed = 41;
  options.threads = 2;
  const auto recovery =
      find_topic_supports(inst.docs, inst.params.num_topics, inst.params.max_doc_topics, options);
  std::vector<std::vector<int>> doc_supports;
  doc_supports.reserve(inst.docs.size());
  for (const auto& doc : inst.docs) {
    doc_supports.push_back(find_document_support(doc, recovery.supports));
  }
  const InferenceState state = build_initial_state(inst.docs, recovery.supports, doc_supports);
  // No zero predicted mass on observed words anywhere.
  EStepSettings settings;
  for (std::size_t d = 0; d < inst.docs.size(); ++d) {
    CHECK_NOTHROW(estep_multiplicative(inst.docs[d], state.beta, state.gammas[d],
                                       state.support_of(static_cast<int>(d)), settings,
                                       EStepMode::kOneStep));
  }
}
