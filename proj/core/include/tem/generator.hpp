#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tem/model.hpp"
#include "tem/rng.hpp"

namespace tem {

enum class CaseId { kCase1 = 1, kCase2 = 2, kCommon = 3 };

struct AssumptionEntry {
  std::string name;
  bool holds = false;
  std::string witness;
  double measured_value = 0.0;
};

struct AssumptionReport {
  std::vector<AssumptionEntry> entries;
  bool all_hold() const;
  const AssumptionEntry* find(const std::string& name) const;
};

struct DirichletCheckResult {
  int num_samples = 0;
  double sparsity_violation_rate = 0.0;
  double max_tail_prob_ratio = 0.0;
  double correlation_deviation = 0.0;
};

enum class SampleMode { kExact, kMultinomial };

// Case Study 1 synthesis: near-disjoint topic supports, sparse gapped
// documents with a uniformly chosen dominant topic.
Instance gen_case1(const GenerationParams& params);

// Case Study 2 synthesis: anchor mass >= p per topic, bounded dynamic range
// B on shared words, level-gapped documents (dominant >= C_l, minors <= C_s)
// and a forced fraction of near-pure documents.
Instance gen_case2(const GenerationParams& params);

// Appends common words (present in every topic, per-word ratio <= kappa,
// per-topic mass <= kappa^-mass_exponent) and re-weights documents so a
// 1 - kappa^-heavy_exponent fraction of each topic's documents have dominant
// proportion >= 1 - kappa^-heavy_exponent.
Instance add_common_words(const Instance& instance, double kappa, int mass_exponent,
                          int heavy_exponent, int num_words = 4);

// Draws one document. Exact mode stores the expected frequencies; multinomial
// mode draws doc_length words. epsilon_out (optional) receives the max
// relative deviation of observed from expected frequency over f* > 0.
Document sample_document(const TopicProportions& gamma, const TopicWordMatrix& beta,
                         SampleMode mode, std::int64_t doc_length, Rng& rng,
                         double* epsilon_out = nullptr);

// Checks every bullet assumption of the requested case study against the
// instance, literally, using the finite thresholds recorded in params.
// Reports failures through the entries; never throws on a failed assumption.
AssumptionReport verify_assumptions(const Instance& instance, CaseId which);

// Monte-Carlo surrogate checks of the Dirichlet prior lemmas with
// alpha_i = C_i / K^c.
DirichletCheckResult dirichlet_property_check(int num_topics, double c,
                                              const std::vector<double>& C_i, int num_samples,
                                              double c0, double x0, Rng& rng);

// Right-hand side of the Case Study 2 gap requirement
// (1/p)(sqrt(2(p log(1/C_l) + (1-p) log(B C_l))) + sqrt(log(1+eps))) + eps.
double case2_gap_requirement(const Case2Params& p, double epsilon);

// delta = min(C_l^2/(2B^3) - gap_requirement_core - eps, 1 - sqrt(C_l));
// may be negative at small B, in which case generation clamps it to 0.
double case2_delta_formula(const Case2Params& p, double epsilon);

// Effective values used during generation and verification.
double case2_effective_delta(const Case2Params& p);
double case2_effective_heavy_frac(const Case2Params& p);

// Word indices counted as common words (appended block), empty when the
// instance has no common extension.
std::vector<int> common_word_indices(const Instance& instance);

}  // namespace tem
