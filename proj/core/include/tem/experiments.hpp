#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/init_seeded.hpp"
#include "tem/init_support.hpp"
#include "tem/model.hpp"

namespace tem::experiments {

// Pinned desk-scale configurations for the scripted suites.
GenerationParams case1_tem_params(std::uint64_t seed);
GenerationParams case1_support_params(std::uint64_t seed);
GenerationParams case2_seeded_params(std::uint64_t seed);

// Initial state with the ground-truth supports (uniform values).
InferenceState oracle_support_state(const Instance& instance);

struct EStepEquivalenceResult {
  int trials = 0;
  double max_objective_gap = 0.0;
  double max_kkt_residual = 0.0;
  double wall_seconds = 0.0;
};
// Random small instances; compares the multiplicative KL E-step against the
// grid-search oracle and collects KKT residuals.
EStepEquivalenceResult run_estep_oracle_equivalence(int trials, std::uint64_t seed);

struct FixedPointResult {
  int instances = 0;
  double max_beta_dev = 0.0;
  double max_gamma_dev = 0.0;
};
// One full KL-tEM outer iteration started at the ground truth with exact
// frequencies; measures entrywise drift.
FixedPointResult run_fixed_point_check(int instances, std::uint64_t seed);

struct TemRunSummary {
  std::uint64_t seed = 0;
  Variant variant = Variant::kKlTem;
  bool reached_target = false;
  int iters_to_target = -1;
  double final_c_beta = 0.0;
  bool dominant_all = true;  // dominant_acc == 1 at every recorded row
  EvolutionReport evolution;
  ErrorTrace trace;
  double wall_seconds = 0.0;
};
TemRunSummary run_case1_tem_once(const Instance& instance, Variant variant, int threads,
                                 double epsilon_prime = 0.1, int outer_iters = 60);

struct SupportRecoverySummary {
  std::uint64_t seed = 0;
  bool topics_exact = false;
  bool docs_exact = false;
  std::int64_t false_positive_pairs = 0;
  std::int64_t yes_pairs = 0;
  std::int64_t docs_checked = 0;
  double wall_seconds = 0.0;
};
SupportRecoverySummary run_case1_support_once(std::uint64_t seed, int threads);

struct SeededRunSummary {
  std::uint64_t seed = 0;
  bool reached_target = false;
  int iters_to_target = -1;
  double final_c_beta = 0.0;
  bool dominant_all = true;
  PhaseReport phases;
  int offanchor_identified_t = -1;  // first t with off-anchor ratio < 1e-8
  std::int64_t klestimate_checks = 0;
  std::int64_t klestimate_violations = 0;
  ErrorTrace trace;
  double wall_seconds = 0.0;
};
SeededRunSummary run_case2_seeded_once(std::uint64_t seed, int threads, int outer_iters = 80);

struct CommonRunSummary {
  std::uint64_t seed = 0;
  Variant variant = Variant::kKlTem;
  bool reached_restricted_target = false;
  int iters_to_restricted_target = -1;
  double final_restricted_c_beta = 0.0;
  ErrorTrace trace;
  double wall_seconds = 0.0;
};
CommonRunSummary run_common_words_once(std::uint64_t seed, Variant variant, int threads,
                                       int outer_iters = 80);

DirichletCheckResult run_dirichlet_checks(std::uint64_t seed, int num_samples = 100000);

// Seeds used by the scripted suites (five each).
std::vector<std::uint64_t> case1_tem_seeds();
std::vector<std::uint64_t> case1_support_seeds();
std::vector<std::uint64_t> case2_seeded_seeds();
std::vector<std::uint64_t> common_words_seeds();

}  // namespace tem::experiments
