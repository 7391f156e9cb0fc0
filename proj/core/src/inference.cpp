#include "tem/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tem/parallel.hpp"

namespace tem {

namespace {

constexpr double kGammaFloor = 1e-300;  // keeps multiplicative updates alive in-support
constexpr double kActiveTol = 1e-14;    // coords below this do not gate convergence
constexpr double kPositiveTol = 1e-12;  // KKT: treat smaller coords as zero

std::vector<int> full_support(int k) {
  std::vector<int> s(k);
  for (int i = 0; i < k; ++i) s[i] = i;
  return s;
}

TopicProportions uniform_on_support(int k, const std::vector<int>& support) {
  std::vector<double> w(k, 0.0);
  for (int i : support) w[i] = 1.0 / static_cast<double>(support.size());
  return TopicProportions(w);
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kKlTem: return "kl_tem";
    case Variant::kIterativeTem: return "iterative";
    case Variant::kIncompleteTem: return "incomplete";
    case Variant::kVanilla: return "vanilla";
  }
  return "unknown";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  if (name == "kl_tem") return Variant::kKlTem;
  if (name == "iterative") return Variant::kIterativeTem;
  if (name == "incomplete") return Variant::kIncompleteTem;
  if (name == "vanilla") return Variant::kVanilla;
  return std::nullopt;
}

std::vector<int> InferenceState::support_of(int doc) const {
  if (doc_supports.empty()) return full_support(beta.num_topics());
  return doc_supports[doc];
}

EStepResult estep_multiplicative(const Document& doc, const TopicWordMatrix& beta,
                                 const TopicProportions& gamma_init,
                                 const std::vector<int>& support, const EStepSettings& settings,
                                 EStepMode mode) {
  if (gamma_init.num_topics() != beta.num_topics()) {
    throw std::invalid_argument("estep: gamma length does not match topic count");
  }
  if (support.empty()) throw std::invalid_argument("estep: empty document support");
  std::vector<char> in_support(beta.num_topics(), 0);
  for (int i : support) in_support[i] = 1;
  for (int i : gamma_init.support()) {
    if (!in_support[i]) {
      throw std::invalid_argument("estep: gamma_init has mass outside the document support (topic " +
                                  std::to_string(i) + ")");
    }
  }

  const int m = static_cast<int>(support.size());
  std::vector<double> g(m);
  for (int s = 0; s < m; ++s) g[s] = gamma_init[support[s]];

  const std::size_t nnz = doc.freqs.size();
  std::vector<double> f(nnz);
  std::vector<double> factor(m);

  auto compute_predicted = [&]() {
    for (std::size_t e = 0; e < nnz; ++e) {
      double acc = 0.0;
      const int j = doc.freqs[e].word;
      for (int s = 0; s < m; ++s) acc += g[s] * beta(support[s], j);
      f[e] = acc;
    }
  };
  auto compute_factors = [&]() {
    std::fill(factor.begin(), factor.end(), 0.0);
    for (std::size_t e = 0; e < nnz; ++e) {
      const double ft = doc.freqs[e].freq;
      if (ft <= 0.0) continue;
      const double ratio = ft / std::max(f[e], kGammaFloor);
      const int j = doc.freqs[e].word;
      for (int s = 0; s < m; ++s) factor[s] += ratio * beta(support[s], j);
    }
  };

  compute_predicted();
  for (std::size_t e = 0; e < nnz; ++e) {
    if (doc.freqs[e].freq > 0.0 && f[e] <= 0.0) {
      throw std::runtime_error("estep: zero predicted mass on observed word " +
                               std::to_string(doc.freqs[e].word) +
                               " (support mismatch, objective is infinite)");
    }
  }

  const int max_iters = mode == EStepMode::kOneStep ? 1 : settings.max_inner_iters;
  int iters = 0;
  for (; iters < max_iters; ++iters) {
    compute_factors();
    double sum = 0.0;
    double max_rel_change = 0.0;
    for (int s = 0; s < m; ++s) {
      double next = g[s] * factor[s];
      if (next < kGammaFloor) next = kGammaFloor;
      sum += next;
      factor[s] = next;  // reuse as scratch for the new values
    }
    for (int s = 0; s < m; ++s) {
      const double next = factor[s] / sum;
      if (next > kActiveTol || g[s] > kActiveTol) {
        const double rel = std::abs(next - g[s]) / std::max(g[s], kGammaFloor);
        if (next > kActiveTol) max_rel_change = std::max(max_rel_change, rel);
      }
      g[s] = next;
    }
    if (mode == EStepMode::kToConvergence && max_rel_change < settings.convergence_tol) {
      ++iters;
      break;
    }
    if (iters + 1 < max_iters) compute_predicted();
  }

  // Fresh KKT residual and objective at the final point.
  compute_predicted();
  compute_factors();
  double kkt = 0.0;
  for (int s = 0; s < m; ++s) {
    if (g[s] > kPositiveTol) kkt = std::max(kkt, std::abs(factor[s] - 1.0));
  }
  double objective = 0.0;
  for (std::size_t e = 0; e < nnz; ++e) {
    const double ft = doc.freqs[e].freq;
    if (ft <= 0.0) continue;
    objective += f[e] > 0.0 ? ft * std::log(ft / f[e]) : kInfinity;
  }

  std::vector<double> full(beta.num_topics(), 0.0);
  double total = 0.0;
  for (int s = 0; s < m; ++s) total += g[s];
  for (int s = 0; s < m; ++s) full[support[s]] = g[s] / total;

  EStepResult result;
  result.gamma = TopicProportions(std::move(full));
  result.objective = objective;
  result.kkt_residual = kkt;
  result.inner_iters = iters;
  return result;
}

EStepResult estep_kl(const Document& doc, const TopicWordMatrix& beta,
                     const std::vector<int>& support, const EStepSettings& settings) {
  if (support.empty()) throw std::invalid_argument("estep_kl: empty document support");
  return estep_multiplicative(doc, beta, uniform_on_support(beta.num_topics(), support), support,
                              settings, EStepMode::kToConvergence);
}

namespace {

TopicWordMatrix mstep_impl(const std::vector<Document>& docs,
                           const std::vector<TopicProportions>& gammas,
                           const TopicWordMatrix& beta_prev, bool renormalize, bool thresholded) {
  if (docs.size() != gammas.size()) {
    throw std::invalid_argument("mstep: document and gamma counts differ");
  }
  const int k = beta_prev.num_topics();
  const int n = beta_prev.num_words();
  std::vector<double> numerator(static_cast<std::size_t>(k) * n, 0.0);
  std::vector<double> denominator(k, 0.0);
  std::vector<char> in_di(k, 0);

  for (std::size_t d = 0; d < docs.size(); ++d) {
    const TopicProportions& gamma = gammas[d];
    const Document& doc = docs[d];

    std::vector<int> update_topics;
    if (thresholded) {
      const int dom = gamma.dominant_topic();
      if (dom < 0) continue;  // tie: document belongs to no D_i
      update_topics.push_back(dom);
    } else {
      update_topics = gamma.support();
    }

    for (int i : update_topics) {
      const double gi = gamma[i];
      if (gi <= 0.0) continue;
      denominator[i] += gi;
      in_di[i] = 1;
      double* num_row = numerator.data() + static_cast<std::size_t>(i) * n;
      for (const auto& e : doc.freqs) {
        if (e.freq <= 0.0) continue;
        double f = 0.0;
        for (int i2 : gamma.support()) f += gamma[i2] * beta_prev(i2, e.word);
        if (f <= 0.0) {
          throw std::runtime_error("mstep: zero predicted mass on observed word " +
                                   std::to_string(e.word) + " in document " + std::to_string(d));
        }
        num_row[e.word] += e.freq / f * gi;
      }
    }
  }

  for (int i = 0; i < k; ++i) {
    if (!in_di[i] || denominator[i] <= 0.0) {
      throw std::runtime_error(thresholded
                                   ? "mstep_thresholded: topic " + std::to_string(i) +
                                         " has empty D_i (no document with strict-argmax gamma)"
                                   : "mstep_vanilla: topic " + std::to_string(i) +
                                         " has zero total gamma mass");
    }
  }

  TopicWordMatrix next(k, n);
  for (int i = 0; i < k; ++i) {
    const double* num_row = numerator.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double prev = beta_prev(i, j);
      next(i, j) = prev > 0.0 ? prev * num_row[j] / denominator[i] : 0.0;
    }
  }
  if (renormalize) next.normalize_rows();
  return next;
}

}  // namespace

TopicWordMatrix mstep_thresholded(const std::vector<Document>& docs,
                                  const std::vector<TopicProportions>& gammas,
                                  const TopicWordMatrix& beta_prev, bool renormalize) {
  return mstep_impl(docs, gammas, beta_prev, renormalize, /*thresholded=*/true);
}

TopicWordMatrix mstep_vanilla(const std::vector<Document>& docs,
                              const std::vector<TopicProportions>& gammas,
                              const TopicWordMatrix& beta_prev, bool renormalize) {
  return mstep_impl(docs, gammas, beta_prev, renormalize, /*thresholded=*/false);
}

RunResult run_tem(const Instance& instance, InferenceState init, Variant variant,
                  const RunOptions& options, const EStepSettings& settings, const TraceSink& sink,
                  const IterationObserver& observer) {
  const std::size_t n_docs = instance.docs.size();
  if (init.gammas.size() != n_docs) {
    throw std::invalid_argument("run_tem: init state gamma count does not match corpus");
  }
  if (init.beta.num_words() != instance.beta_true.num_words() ||
      init.beta.num_topics() != instance.beta_true.num_topics()) {
    throw std::invalid_argument("run_tem: init state dimensions do not match instance");
  }

  RunResult result;
  result.permutation = match_topics(init.beta, instance.beta_true);
  InferenceState state = std::move(init);
  state.variant = variant;

  std::vector<TopicProportions> new_gammas(n_docs);
  std::vector<double> objectives(n_docs, 0.0);

  auto estep_round = [&](bool first_round) {
    parallel_for(n_docs, options.threads, [&](std::size_t d) {
      const std::vector<int> support = state.support_of(static_cast<int>(d));
      EStepResult r;
      if (variant == Variant::kIncompleteTem) {
        r = estep_multiplicative(instance.docs[d], state.beta, state.gammas[d], support, settings,
                                 EStepMode::kOneStep);
      } else {
        const bool warm = variant == Variant::kKlTem && settings.warm_start && !first_round;
        const TopicProportions start =
            warm ? state.gammas[d] : uniform_on_support(state.beta.num_topics(), support);
        r = estep_multiplicative(instance.docs[d], state.beta, start, support, settings,
                                 EStepMode::kToConvergence);
      }
      new_gammas[d] = std::move(r.gamma);
      objectives[d] = r.objective;
    });
    state.gammas.swap(new_gammas);
  };

  for (int t = 0;; ++t) {
    estep_round(t == 0);
    state.iteration = t;
    const ErrorTraceRow row = record_trace(state, instance, result.permutation, &result.trace);
    if (sink) sink(row);
    if (observer) observer(IterationRecord{state, &row, objectives});
    result.iterations_run = t + 1;

    if (options.epsilon_prime > 0.0 && row.c_beta <= 1.0 + options.epsilon_prime) {
      result.reached_target = true;
      break;
    }
    if (t >= options.outer_iters) break;

    // M-step; a failure here propagates after the trace was already flushed
    // row-by-row through the sink.
    state.beta = variant == Variant::kVanilla
                     ? mstep_vanilla(instance.docs, state.gammas, state.beta, options.renormalize)
                     : mstep_thresholded(instance.docs, state.gammas, state.beta,
                                         options.renormalize);
  }

  result.state = std::move(state);
  return result;
}

}  // namespace tem
