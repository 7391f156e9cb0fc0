#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tem/diagnostics.hpp"
#include "tem/model.hpp"

namespace tem {

enum class Variant { kKlTem, kIterativeTem, kIncompleteTem, kVanilla };

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

struct EStepSettings {
  int max_inner_iters = 10000;
  double kkt_tol = 1e-8;
  double convergence_tol = 1e-10;  // max relative change of gamma per sweep
  // KL-tEM only: start each outer E-step from the previous gamma instead of
  // uniform-on-support.
  bool warm_start = false;
};

enum class EStepMode { kOneStep, kToConvergence };

struct InferenceState {
  TopicWordMatrix beta;
  std::vector<TopicProportions> gammas;
  int iteration = 0;
  Variant variant = Variant::kKlTem;
  // Per-document allowed topics; empty outer vector means unconstrained.
  std::vector<std::vector<int>> doc_supports;
  // Per-topic allowed words; empty outer vector means unconstrained.
  std::vector<std::vector<int>> topic_supports;

  std::vector<int> support_of(int doc) const;
};

struct EStepResult {
  TopicProportions gamma;
  double objective = 0.0;      // attained KL(f_tilde || f)
  double kkt_residual = 0.0;   // max |sum_j (f~/f) beta_ij - 1| over positive coords
  int inner_iters = 0;
};

// Multiplicative E-step updates gamma_i <- gamma_i sum_j (f~_j/f_j) beta_ij,
// renormalized each sweep, restricted to the given support. kOneStep runs a
// single sweep; kToConvergence iterates until the relative change drops
// below settings.convergence_tol or max_inner_iters is hit.
EStepResult estep_multiplicative(const Document& doc, const TopicWordMatrix& beta,
                                 const TopicProportions& gamma_init,
                                 const std::vector<int>& support, const EStepSettings& settings,
                                 EStepMode mode);

// Support-restricted KL minimizer: multiplicative updates run to convergence
// from uniform-on-support.
EStepResult estep_kl(const Document& doc, const TopicWordMatrix& beta,
                     const std::vector<int>& support, const EStepSettings& settings);

// Thresholded M-step: averages each topic over D_i, the documents where that
// topic's gamma is the strict maximum. Ties assign the document to no D_i.
TopicWordMatrix mstep_thresholded(const std::vector<Document>& docs,
                                  const std::vector<TopicProportions>& gammas,
                                  const TopicWordMatrix& beta_prev, bool renormalize);

// Plain update: D_i = all documents with gamma_{d,i} > 0.
TopicWordMatrix mstep_vanilla(const std::vector<Document>& docs,
                              const std::vector<TopicProportions>& gammas,
                              const TopicWordMatrix& beta_prev, bool renormalize);

struct RunOptions {
  int outer_iters = 100;
  double epsilon_prime = 0.0;  // stop once C_beta <= 1 + epsilon_prime (needs truth)
  bool renormalize = true;
  int threads = 1;
};

// Per-iteration snapshot passed to observers: beta/gammas are the coherent
// (beta^t, gamma^t) pair after the E-step of iteration t.
struct IterationRecord {
  const InferenceState& state;
  const ErrorTraceRow* trace_row;  // null when the instance has no ground truth
  const std::vector<double>& estep_objectives;
};

using IterationObserver = std::function<void(const IterationRecord&)>;
using TraceSink = std::function<void(const ErrorTraceRow&)>;

struct RunResult {
  InferenceState state;
  ErrorTrace trace;
  std::vector<int> permutation;  // est topic -> true topic used for metrics
  bool reached_target = false;
  int iterations_run = 0;  // number of recorded E-step rounds
};

// Outer tEM loop. Alternates the variant's E-step with the thresholded
// (or vanilla) M-step, recording an ErrorTrace row per E-step round while
// ground truth is available. Stops at the target accuracy or after
// outer_iters (E,M) pairs plus a final E-step. On an inference error the
// partial trace is flushed to the sink before the exception propagates.
RunResult run_tem(const Instance& instance, InferenceState init, Variant variant,
                  const RunOptions& options, const EStepSettings& settings,
                  const TraceSink& sink = nullptr, const IterationObserver& observer = nullptr);

}  // namespace tem
