#pragma once

#include <cstdint>
#include <vector>

#include "tem/inference.hpp"
#include "tem/model.hpp"

namespace tem {

// YES iff sum_j min(f_d,j, f_d2,j) >= 1/(2T): detects a shared topic with no
// false positives on conforming instances.
bool pair_test(const Document& d, const Document& d2, int max_doc_topics);

double pair_test_statistic(const Document& d, const Document& d2);

// Intersection of the two documents' word sets, refined by removing words
// absent from any third document that passes the pair test against both.
// corpus entries equal to d or d2 (by index) are skipped via the pointers.
std::vector<int> weedout(const Document& d, const Document& d2,
                         const std::vector<Document>& corpus, int max_doc_topics);

struct SupportInitOptions {
  // <= 0 means the K^4 ln^2 K default, capped at D(D-1)/2.
  std::int64_t num_pairs = 0;
  double count_threshold_exponent = 2.5;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct PairRecord {
  int d1 = 0;
  int d2 = 0;
  bool test_yes = false;
};

struct SupportRecoveryResult {
  std::vector<std::vector<int>> supports;  // sorted by smallest contained word
  std::vector<PairRecord> sampled_pairs;
  std::int64_t candidate_sets = 0;
};

// Recovers candidate topic supports from sampled document pairs: pair test,
// weedout refinement, duplicate counting, count-threshold pruning, union
// pruning, and strict-subset pruning. Throws when fewer than K sets survive.
SupportRecoveryResult find_topic_supports(const std::vector<Document>& corpus, int num_topics,
                                          int max_doc_topics, const SupportInitOptions& options);

// Greedy per-document topic selection by residual support scores. Stops when
// the best score drops to score_floor (0 for exact frequencies; use
// 2/sqrt(N_d) for sampled documents).
std::vector<int> find_document_support(const Document& doc,
                                       const std::vector<std::vector<int>>& topic_supports,
                                       double score_floor = 0.0);

// Uniform beta on each topic support and uniform gamma on each document
// support; topics ordered by smallest contained word index.
InferenceState build_initial_state(const std::vector<Document>& corpus,
                                   const std::vector<std::vector<int>>& topic_supports,
                                   const std::vector<std::vector<int>>& doc_supports);

}  // namespace tem
