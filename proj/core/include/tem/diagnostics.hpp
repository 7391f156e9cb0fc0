#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tem/model.hpp"

namespace tem {

struct InferenceState;  // inference.hpp

// One per-iteration row of ground-truth error metrics.
struct ErrorTraceRow {
  int t = 0;
  double c_beta = 0.0;   // max over beta*>0 of max(beta*/beta, beta/beta*); inf sentinel
  double c_gamma = 0.0;  // same over all documents' gamma
  double kl_beta_max = 0.0;
  double dominant_acc = 0.0;
  double estep_objective_mean = 0.0;
};

struct ErrorTrace {
  std::vector<ErrorTraceRow> rows;
};

// Worst-case multiplicative error of est against truth under the topic
// permutation perm (perm[i_est] = i_truth). Returns the +inf sentinel when
// est is zero on a true-support entry, or nonzero (beyond zero_tol) where
// the truth is zero.
double multiplicative_error(const TopicWordMatrix& est, const TopicWordMatrix& truth,
                            const std::vector<int>& perm, double zero_tol = kZeroTol);
double multiplicative_error(const TopicProportions& est, const TopicProportions& truth,
                            const std::vector<int>& perm, double zero_tol = kZeroTol);

// Restricted to the given word subset (used to score beta on
// discriminative+anchor entries only).
double multiplicative_error_on_words(const TopicWordMatrix& est, const TopicWordMatrix& truth,
                                     const std::vector<int>& perm, const std::vector<bool>& words,
                                     double zero_tol = kZeroTol);

// Minimum-cost bipartite assignment between estimated and true topics under
// total-variation row distance. Returns perm with perm[i_est] = i_truth.
std::vector<int> match_topics(const TopicWordMatrix& est, const TopicWordMatrix& truth);

// Identity permutation helper.
std::vector<int> identity_permutation(int k);

// Independent E-step verifier: exhaustive simplex grid search at the given
// resolution over the supported coordinates, refined by pairwise coordinate
// descent. Rejects supports larger than 4 in grid mode.
TopicProportions oracle_estep(const Document& doc, const TopicWordMatrix& beta,
                              const std::vector<int>& support, double resolution);

// Objective value used by oracle_estep and the E-step: KL(f_tilde || f(gamma)).
double estep_objective(const Document& doc, const TopicWordMatrix& beta,
                       const TopicProportions& gamma);

struct TopicSupportMetrics {
  double precision = 0.0;
  double recall = 0.0;
};

struct SupportMetrics {
  std::vector<TopicSupportMetrics> per_topic;
  double min_precision = 0.0;
  double min_recall = 0.0;
  bool exact_match = false;
};

SupportMetrics support_metrics(const std::vector<std::vector<int>>& est_sets,
                               const std::vector<std::vector<int>>& true_sets,
                               const std::vector<int>& perm);

// Computes all ErrorTrace fields for the current state and appends the row
// to trace (if non-null). Pure in its inputs.
ErrorTraceRow record_trace(const InferenceState& state, const Instance& instance,
                           const std::vector<int>& perm, ErrorTrace* trace);

struct EvolutionReport {
  bool pass = true;
  int first_violation_t = -1;
  std::string detail;
  int pairs_checked = 0;
};

// Verifies the per-iteration error-evolution laws along a trace: for
// consecutive rows with finite C_beta in [(1-epsilon)^-7, upper_window],
// C_beta^{t+1} <= sqrt(C_beta^t) (1+tol) and C_gamma^t <= (C_beta^t)^{1/3} (1+tol).
EvolutionReport check_error_evolution(const ErrorTrace& trace, double epsilon,
                                      double tol = 0.05, double upper_window = 10.0);

}  // namespace tem
