#include "tem/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tem/inference.hpp"

namespace tem {

namespace {

// Ratio error for one (estimate, truth) entry pair, or the inf sentinel.
inline double entry_error(double est, double truth, double zero_tol) {
  if (truth > 0.0) {
    if (est <= 0.0) return kInfinity;
    return std::max(truth / est, est / truth);
  }
  if (est > zero_tol) return kInfinity;
  return 1.0;
}

}  // namespace

double multiplicative_error(const TopicWordMatrix& est, const TopicWordMatrix& truth,
                            const std::vector<int>& perm, double zero_tol) {
  if (est.num_topics() != truth.num_topics() || est.num_words() != truth.num_words()) {
    throw std::invalid_argument("multiplicative_error: dimension mismatch");
  }
  double worst = 1.0;
  for (int i = 0; i < est.num_topics(); ++i) {
    const int it = perm[i];
    for (int j = 0; j < est.num_words(); ++j) {
      worst = std::max(worst, entry_error(est(i, j), truth(it, j), zero_tol));
      if (worst == kInfinity) return kInfinity;
    }
  }
  return worst;
}

double multiplicative_error(const TopicProportions& est, const TopicProportions& truth,
                            const std::vector<int>& perm, double zero_tol) {
  if (est.num_topics() != truth.num_topics()) {
    throw std::invalid_argument("multiplicative_error: dimension mismatch");
  }
  double worst = 1.0;
  for (int i = 0; i < est.num_topics(); ++i) {
    worst = std::max(worst, entry_error(est[i], truth[perm[i]], zero_tol));
    if (worst == kInfinity) return kInfinity;
  }
  return worst;
}

double multiplicative_error_on_words(const TopicWordMatrix& est, const TopicWordMatrix& truth,
                                     const std::vector<int>& perm, const std::vector<bool>& words,
                                     double zero_tol) {
  if (static_cast<int>(words.size()) != est.num_words()) {
    throw std::invalid_argument("multiplicative_error_on_words: mask length mismatch");
  }
  double worst = 1.0;
  for (int i = 0; i < est.num_topics(); ++i) {
    const int it = perm[i];
    for (int j = 0; j < est.num_words(); ++j) {
      if (!words[j]) continue;
      worst = std::max(worst, entry_error(est(i, j), truth(it, j), zero_tol));
      if (worst == kInfinity) return kInfinity;
    }
  }
  return worst;
}

std::vector<int> identity_permutation(int k) {
  std::vector<int> perm(k);
  for (int i = 0; i < k; ++i) perm[i] = i;
  return perm;
}

// Hungarian algorithm (Jonker-Volgenant style shortest augmenting paths),
// O(K^3). Cost (i, k) = total-variation distance between est row i and truth
// row k; TV keeps all costs finite before convergence.
std::vector<int> match_topics(const TopicWordMatrix& est, const TopicWordMatrix& truth) {
  if (est.num_topics() != truth.num_topics() || est.num_words() != truth.num_words()) {
    throw std::invalid_argument("match_topics: dimension mismatch");
  }
  const int n = est.num_topics();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) cost[i][k] = total_variation(est.row(i), truth.row(k));
  }

  const double inf = kInfinity;
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) perm[p[j] - 1] = j - 1;
  }
  return perm;
}

double estep_objective(const Document& doc, const TopicWordMatrix& beta,
                       const TopicProportions& gamma) {
  double kl = 0.0;
  for (const auto& e : doc.freqs) {
    if (e.freq <= 0.0) continue;
    double f = 0.0;
    for (int i : gamma.support()) f += gamma[i] * beta(i, e.word);
    if (f <= 0.0) return kInfinity;
    kl += e.freq * std::log(e.freq / f);
  }
  return kl;
}

namespace {

double objective_at(const Document& doc, const TopicWordMatrix& beta,
                    const std::vector<int>& support, const std::vector<double>& w) {
  double kl = 0.0;
  for (const auto& e : doc.freqs) {
    if (e.freq <= 0.0) continue;
    double f = 0.0;
    for (std::size_t s = 0; s < support.size(); ++s) f += w[s] * beta(support[s], e.word);
    if (f <= 0.0) return kInfinity;
    kl += e.freq * std::log(e.freq / f);
  }
  return kl;
}

void enumerate_grid(int coords, int ticks, std::vector<int>& partial,
                    const std::function<void(const std::vector<int>&)>& visit) {
  if (coords == 1) {
    partial.push_back(ticks);
    visit(partial);
    partial.pop_back();
    return;
  }
  for (int t = 0; t <= ticks; ++t) {
    partial.push_back(t);
    enumerate_grid(coords - 1, ticks - t, partial, visit);
    partial.pop_back();
  }
}

}  // namespace

TopicProportions oracle_estep(const Document& doc, const TopicWordMatrix& beta,
                              const std::vector<int>& support, double resolution) {
  if (support.empty()) throw std::invalid_argument("oracle_estep: empty support");
  if (support.size() > 4) {
    throw std::invalid_argument(
        "oracle_estep: support larger than 4 is out of grid range; use the multiplicative solver");
  }
  if (resolution <= 0.0 || resolution >= 1.0) {
    throw std::invalid_argument("oracle_estep: resolution must be in (0,1)");
  }
  const int m = static_cast<int>(support.size());
  const int ticks = std::max(1, static_cast<int>(std::lround(1.0 / resolution)));

  // Grid stage: lexicographically first strict improvement wins, which makes
  // the argmin tie-break the lexicographically smallest grid point.
  std::vector<double> best(m, 0.0);
  double best_obj = kInfinity;
  std::vector<int> partial;
  std::vector<double> w(m);
  enumerate_grid(m, ticks, partial, [&](const std::vector<int>& point) {
    for (int s = 0; s < m; ++s) w[s] = static_cast<double>(point[s]) / ticks;
    const double obj = objective_at(doc, beta, support, w);
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  });
  if (best_obj == kInfinity) {
    // Every grid point hit a zero predicted mass; fall back to uniform.
    for (int s = 0; s < m; ++s) best[s] = 1.0 / m;
    best_obj = objective_at(doc, beta, support, best);
  }

  // Local refinement: pairwise mass transfers with a shrinking step. The
  // objective is convex over the simplex, so this converges to the optimum.
  double step = 1.0 / ticks;
  while (step > 1e-10) {
    bool improved = false;
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        if (a == b || best[b] < step) continue;
        std::vector<double> cand = best;
        cand[a] += step;
        cand[b] -= step;
        const double obj = objective_at(doc, beta, support, cand);
        if (obj < best_obj - 1e-18) {
          best_obj = obj;
          best = cand;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }

  std::vector<double> full(beta.num_topics(), 0.0);
  double sum = 0.0;
  for (int s = 0; s < m; ++s) sum += best[s];
  for (int s = 0; s < m; ++s) full[support[s]] = best[s] / sum;
  return TopicProportions(full);
}

SupportMetrics support_metrics(const std::vector<std::vector<int>>& est_sets,
                               const std::vector<std::vector<int>>& true_sets,
                               const std::vector<int>& perm) {
  if (est_sets.size() != true_sets.size()) {
    throw std::invalid_argument("support_metrics: set count mismatch");
  }
  SupportMetrics out;
  out.per_topic.resize(est_sets.size());
  out.min_precision = 1.0;
  out.min_recall = 1.0;
  out.exact_match = true;
  for (std::size_t i = 0; i < est_sets.size(); ++i) {
    std::vector<int> est = est_sets[i];
    std::vector<int> tru = true_sets[perm[i]];
    std::sort(est.begin(), est.end());
    std::sort(tru.begin(), tru.end());
    std::vector<int> inter;
    std::set_intersection(est.begin(), est.end(), tru.begin(), tru.end(),
                          std::back_inserter(inter));
    TopicSupportMetrics& m = out.per_topic[i];
    m.precision = est.empty() ? 1.0 : static_cast<double>(inter.size()) / est.size();
    m.recall = tru.empty() ? 1.0 : static_cast<double>(inter.size()) / tru.size();
    out.min_precision = std::min(out.min_precision, m.precision);
    out.min_recall = std::min(out.min_recall, m.recall);
    if (est != tru) out.exact_match = false;
  }
  return out;
}

ErrorTraceRow record_trace(const InferenceState& state, const Instance& instance,
                           const std::vector<int>& perm, ErrorTrace* trace) {
  ErrorTraceRow row;
  row.t = state.iteration;
  row.c_beta = multiplicative_error(state.beta, instance.beta_true, perm);

  double c_gamma = 1.0;
  int dominant_hits = 0;
  double objective_sum = 0.0;
  const std::size_t n_docs = instance.docs.size();
  for (std::size_t d = 0; d < n_docs; ++d) {
    const TopicProportions& est = state.gammas[d];
    const TopicProportions& tru = *instance.docs[d].truth;
    c_gamma = std::max(c_gamma, multiplicative_error(est, tru, perm));
    const int est_dom = est.dominant_topic();
    const int true_dom = tru.dominant_topic();
    if (est_dom >= 0 && true_dom >= 0 && perm[est_dom] == true_dom) ++dominant_hits;
    objective_sum += estep_objective(instance.docs[d], state.beta, est);
  }
  row.c_gamma = c_gamma;
  row.dominant_acc = n_docs == 0 ? 1.0 : static_cast<double>(dominant_hits) / n_docs;
  row.estep_objective_mean = n_docs == 0 ? 0.0 : objective_sum / n_docs;

  double kl_max = 0.0;
  for (int i = 0; i < state.beta.num_topics(); ++i) {
    kl_max = std::max(kl_max, kl_divergence(instance.beta_true.row(perm[i]), state.beta.row(i)));
  }
  row.kl_beta_max = kl_max;

  if (trace) trace->rows.push_back(row);
  return row;
}

EvolutionReport check_error_evolution(const ErrorTrace& trace, double epsilon, double tol,
                                      double upper_window) {
  EvolutionReport report;
  const double lower = std::pow(1.0 - epsilon, -7.0);
  for (std::size_t r = 0; r < trace.rows.size(); ++r) {
    const ErrorTraceRow& row = trace.rows[r];
    if (!std::isfinite(row.c_beta)) continue;
    if (row.c_beta < lower || row.c_beta > upper_window) continue;

    if (std::isfinite(row.c_gamma) &&
        row.c_gamma > std::cbrt(row.c_beta) * (1.0 + tol)) {
      report.pass = false;
      report.first_violation_t = row.t;
      report.detail = "C_gamma = " + std::to_string(row.c_gamma) + " exceeds C_beta^{1/3} bound " +
                      std::to_string(std::cbrt(row.c_beta) * (1.0 + tol)) + " at t=" +
                      std::to_string(row.t);
      return report;
    }
    if (!std::isfinite(row.c_gamma)) {
      report.pass = false;
      report.first_violation_t = row.t;
      report.detail = "C_gamma is infinite inside the contraction window at t=" +
                      std::to_string(row.t);
      return report;
    }

    if (r + 1 < trace.rows.size()) {
      const ErrorTraceRow& next = trace.rows[r + 1];
      ++report.pairs_checked;
      if (!(next.c_beta <= std::sqrt(row.c_beta) * (1.0 + tol))) {
        report.pass = false;
        report.first_violation_t = row.t;
        report.detail = "C_beta went " + std::to_string(row.c_beta) + " -> " +
                        std::to_string(next.c_beta) + " above sqrt bound " +
                        std::to_string(std::sqrt(row.c_beta) * (1.0 + tol)) + " at t=" +
                        std::to_string(row.t);
        return report;
      }
    }
  }
  return report;
}

}  // namespace tem
