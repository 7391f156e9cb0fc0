#include "tem/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tem {

namespace {

constexpr std::uint64_t kBetaStream = 1;
constexpr std::uint64_t kDocStream = 2;
constexpr std::uint64_t kCommonStream = 3;

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// Scales values[first..last) so they sum to target.
void scale_to(std::vector<double>& values, double target) {
  double sum = std::accumulate(values.begin(), values.end(), 0.0);
  if (sum <= 0.0) throw std::runtime_error("generator: cannot scale empty mass block");
  for (double& v : values) v *= target / sum;
}

struct ProportionDraw {
  int dominant = 0;
  std::vector<int> minors;
  std::vector<double> minor_masses;
};

TopicProportions to_proportions(int num_topics, const ProportionDraw& draw) {
  std::vector<double> w(num_topics, 0.0);
  double total_minor = 0.0;
  for (std::size_t s = 0; s < draw.minors.size(); ++s) {
    w[draw.minors[s]] = draw.minor_masses[s];
    total_minor += draw.minor_masses[s];
  }
  w[draw.dominant] = 1.0 - total_minor;
  return TopicProportions(std::move(w));
}

// Rejection draw of document proportions: dominant weight uniform in
// [dominant_floor, 1 - minors*minor_floor], remaining mass split by a uniform
// stick, resampled until the rho gap and the minor floor hold. Minor topics
// are dropped one at a time if the constraints are unsatisfiable.
ProportionDraw draw_case1_proportions(int dominant, std::vector<int> extras,
                                      const GenerationParams& params, Rng& rng) {
  ProportionDraw draw;
  draw.dominant = dominant;
  while (!extras.empty()) {
    const int m = static_cast<int>(extras.size());
    const double hi = 1.0 - m * params.minor_floor;
    if (hi > params.dominant_floor) {
      for (int attempt = 0; attempt < 1000; ++attempt) {
        const double dom = rng.uniform(params.dominant_floor, hi);
        std::vector<double> stick(m);
        for (double& u : stick) u = rng.u01() + 1e-12;
        scale_to(stick, 1.0 - dom);
        double max_minor = 0.0, min_minor = kInfinity;
        for (double v : stick) {
          max_minor = std::max(max_minor, v);
          min_minor = std::min(min_minor, v);
        }
        if (min_minor >= params.minor_floor && dom - max_minor > params.rho) {
          draw.minors = extras;
          draw.minor_masses = std::move(stick);
          return draw;
        }
      }
    }
    extras.pop_back();  // unsatisfiable at this sparsity; drop a minor topic
  }
  return draw;  // pure document
}

void append_doc(std::vector<Document>& docs, const TopicProportions& gamma,
                const TopicWordMatrix& beta, const GenerationParams& params, Rng& rng,
                double& epsilon) {
  double doc_eps = 0.0;
  Document doc = sample_document(gamma, beta,
                                 params.exact_docs ? SampleMode::kExact : SampleMode::kMultinomial,
                                 params.doc_length, rng, &doc_eps);
  doc.truth = gamma;
  epsilon = std::max(epsilon, doc_eps);
  docs.push_back(std::move(doc));
}

void check_common_params(const GenerationParams& params) {
  if (!params.common) return;
  if (params.common->kappa < 2.0) {
    throw std::invalid_argument("common words: kappa must be at least 2, got " +
                                format_double(params.common->kappa));
  }
}

}  // namespace

bool AssumptionReport::all_hold() const {
  for (const auto& e : entries) {
    if (!e.holds) return false;
  }
  return true;
}

const AssumptionEntry* AssumptionReport::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

double case2_gap_requirement(const Case2Params& p, double epsilon) {
  const double r_beta = p.anchor_mass_p * std::log(1.0 / p.c_l) +
                        (1.0 - p.anchor_mass_p) * std::log(p.dynamic_range_b * p.c_l);
  return (std::sqrt(2.0 * r_beta) + std::sqrt(std::log1p(epsilon))) / p.anchor_mass_p + epsilon;
}

double case2_delta_formula(const Case2Params& p, double epsilon) {
  const double b3 = p.dynamic_range_b * p.dynamic_range_b * p.dynamic_range_b;
  const double arm1 = p.c_l * p.c_l / (2.0 * b3) - case2_gap_requirement(p, epsilon);
  const double arm2 = 1.0 - std::sqrt(p.c_l);
  return std::min(arm1, arm2);
}

double case2_effective_delta(const Case2Params& p) {
  const double delta = p.delta > 0.0 ? p.delta : case2_delta_formula(p, 0.0);
  return std::clamp(delta, 0.0, 1.0);
}

double case2_effective_heavy_frac(const Case2Params& p) {
  if (p.heavy_frac > 0.0) return std::min(p.heavy_frac, 1.0);
  return std::min(8.0 / p.dynamic_range_b, 1.0);
}

Document sample_document(const TopicProportions& gamma, const TopicWordMatrix& beta,
                         SampleMode mode, std::int64_t doc_length, Rng& rng,
                         double* epsilon_out) {
  const std::vector<double> expected = predicted_freqs(gamma, beta);
  Document doc;
  doc.vocab_size = beta.num_words();
  if (mode == SampleMode::kExact) {
    for (int j = 0; j < beta.num_words(); ++j) {
      if (expected[j] > 0.0) doc.freqs.push_back({j, expected[j]});
    }
    if (epsilon_out) *epsilon_out = 0.0;
    return doc;
  }

  if (doc_length <= 0) {
    throw std::invalid_argument("sample_document: multinomial mode needs a positive word count");
  }
  std::vector<double> cdf(expected.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < expected.size(); ++j) {
    acc += expected[j];
    cdf[j] = acc;
  }
  std::vector<std::int64_t> counts(expected.size(), 0);
  for (std::int64_t s = 0; s < doc_length; ++s) {
    const double u = rng.u01() * acc;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const std::size_t j = std::min(static_cast<std::size_t>(it - cdf.begin()), expected.size() - 1);
    ++counts[j];
  }
  double eps = 0.0;
  for (std::size_t j = 0; j < expected.size(); ++j) {
    const double freq = static_cast<double>(counts[j]) / static_cast<double>(doc_length);
    if (counts[j] > 0) doc.freqs.push_back({static_cast<int>(j), freq});
    if (expected[j] > 0.0) eps = std::max(eps, std::abs(freq / expected[j] - 1.0));
  }
  doc.length = doc_length;
  if (epsilon_out) *epsilon_out = eps;
  return doc;
}

Instance gen_case1(const GenerationParams& params) {
  const int k = params.num_topics;
  const int n = params.num_words;
  const int d = params.num_docs;
  const int t = params.max_doc_topics;
  if (k < 1 || n < 1 || d < 1 || t < 1) {
    throw std::invalid_argument("gen_case1: K, N, D, T must be positive");
  }
  if (params.rho <= 0.0) throw std::invalid_argument("gen_case1: rho must be positive");
  if (params.overlap_mass < 0.0 || params.overlap_mass >= 1.0) {
    throw std::invalid_argument("gen_case1: overlap_mass must lie in [0, 1)");
  }
  if (params.dominant_floor <= 0.0 || params.dominant_floor > 1.0) {
    throw std::invalid_argument("gen_case1: dominant_floor must lie in (0, 1]");
  }
  check_common_params(params);

  const int tpm = std::min(params.effective_topics_per_word(), k);
  const double min_entry = params.effective_min_entry();

  const bool want_shared = k >= 2 && tpm >= 2 && params.overlap_mass > 0.0;
  const int n_shared = want_shared ? static_cast<int>(std::lround(n * params.shared_vocab_frac)) : 0;
  const int n_excl = n - n_shared;
  if (n_excl < k) {
    throw std::invalid_argument(
        "gen_case1: vocabulary too small to give each of the " + std::to_string(k) +
        " topics an exclusive block (need K*support_size <= N*topics_per_word_max; got N=" +
        std::to_string(n) + ", shared pool " + std::to_string(n_shared) + ")");
  }

  Rng beta_rng(derive_seed(params.seed, kBetaStream));

  // Exclusive blocks: contiguous word ranges, one per topic.
  std::vector<int> block_begin(k + 1, 0);
  {
    const int base = n_excl / k, rem = n_excl % k;
    for (int i = 0; i < k; ++i) block_begin[i + 1] = block_begin[i] + base + (i < rem ? 1 : 0);
  }
  // Shared pool: each word joins 2..tpm uniformly chosen topics.
  std::vector<std::vector<int>> shared_words(k);
  for (int w = 0; w < n_shared; ++w) {
    const int word = n_excl + w;
    const int m = 2 + static_cast<int>(beta_rng.uniform_int(static_cast<std::uint64_t>(tpm - 1)));
    for (int topic : beta_rng.sample_without_replacement(k, std::min(m, k))) {
      shared_words[topic].push_back(word);
    }
  }

  TopicWordMatrix beta(k, n);
  for (int i = 0; i < k; ++i) {
    std::vector<double> excl_vals(block_begin[i + 1] - block_begin[i]);
    for (double& v : excl_vals) v = beta_rng.uniform(1.0, 3.0);
    const bool has_shared = !shared_words[i].empty();
    const double r_i = has_shared ? params.overlap_mass * beta_rng.uniform(0.5, 1.0) : 0.0;
    scale_to(excl_vals, 1.0 - r_i);
    for (std::size_t s = 0; s < excl_vals.size(); ++s) {
      beta(i, block_begin[i] + static_cast<int>(s)) = excl_vals[s];
    }
    if (has_shared) {
      std::vector<double> shared_vals(shared_words[i].size());
      for (double& v : shared_vals) v = beta_rng.uniform(1.0, 3.0);
      scale_to(shared_vals, r_i);
      for (std::size_t s = 0; s < shared_vals.size(); ++s) {
        beta(i, shared_words[i][s]) = shared_vals[s];
      }
    }
  }
  beta.validate(min_entry);

  Rng doc_rng(derive_seed(params.seed, kDocStream));
  const double extra_prob = params.effective_extra_topic_prob();
  Instance instance;
  instance.params = params;
  instance.docs.reserve(d);
  double epsilon = 0.0;
  for (int doc_id = 0; doc_id < d; ++doc_id) {
    const int dominant = static_cast<int>(doc_rng.uniform_int(static_cast<std::uint64_t>(k)));
    std::vector<int> extras;
    for (int i = 0; i < k && static_cast<int>(extras.size()) < t - 1; ++i) {
      if (i == dominant) continue;
      if (doc_rng.u01() < extra_prob) extras.push_back(i);
    }
    const ProportionDraw draw = draw_case1_proportions(dominant, std::move(extras), params, doc_rng);
    append_doc(instance.docs, to_proportions(k, draw), beta, params, doc_rng, epsilon);
  }
  instance.beta_true = std::move(beta);
  instance.epsilon_achieved = epsilon;
  return instance;
}

Instance gen_case2(const GenerationParams& params) {
  if (!params.case2) throw std::invalid_argument("gen_case2: case2 parameters missing");
  const Case2Params& c2 = *params.case2;
  const int k = params.num_topics;
  const int n = params.num_words;
  const int d = params.num_docs;
  const int t = std::max(params.max_doc_topics, 1);
  if (k < 1 || n < 1 || d < 1) throw std::invalid_argument("gen_case2: K, N, D must be positive");
  if (!(c2.c_s > 0.0 && c2.c_s < c2.c_l && c2.c_l <= 1.0)) {
    throw std::invalid_argument("gen_case2: need 0 < C_s < C_l <= 1");
  }
  if (c2.dynamic_range_b < 1.0) throw std::invalid_argument("gen_case2: need B >= 1");
  if (!(c2.anchor_mass_p > 0.0 && c2.anchor_mass_p <= 1.0)) {
    throw std::invalid_argument("gen_case2: need 0 < p <= 1");
  }
  check_common_params(params);

  const double gap_rhs = case2_gap_requirement(c2, 0.0);
  if (c2.c_l - c2.c_s < gap_rhs) {
    throw std::invalid_argument(
        "gen_case2: gap inequality violated: C_l - C_s = " + format_double(c2.c_l - c2.c_s) +
        " < " + format_double(gap_rhs) +
        " = (1/p)(sqrt(2(p log(1/C_l) + (1-p) log(B C_l))) + sqrt(log(1+eps))) + eps  (eps=0)");
  }
  if (c2.c_l + (t - 1) * c2.c_s > 1.0 + kSimplexTol) {
    throw std::invalid_argument("gen_case2: C_l + (T-1) C_s exceeds 1; reduce C_s or T");
  }

  GenerationParams resolved = params;
  if (resolved.case2->delta <= 0.0) resolved.case2->delta = case2_delta_formula(c2, 0.0);
  const double delta_eff = case2_effective_delta(*resolved.case2);
  const double heavy_frac = case2_effective_heavy_frac(*resolved.case2);
  const double min_entry = params.effective_min_entry();
  const double minor_min = c2.c_s / 2.0;
  if (minor_min < min_entry) {
    throw std::invalid_argument("gen_case2: C_s/2 falls below min_entry");
  }

  const int n_anchor = c2.anchor_words_per_topic > 0
                           ? c2.anchor_words_per_topic
                           : std::max(1, static_cast<int>(std::lround(0.4 * n / k)));
  const int n_shared = n - n_anchor * k;
  const bool pure_topics = c2.anchor_mass_p >= 1.0;
  if (n_shared < 0 || (!pure_topics && n_shared < k)) {
    throw std::invalid_argument("gen_case2: vocabulary too small for " + std::to_string(n_anchor) +
                                " anchors per topic plus a shared pool");
  }

  Rng beta_rng(derive_seed(params.seed, kBetaStream));
  TopicWordMatrix beta(k, n);

  for (int i = 0; i < k; ++i) {
    std::vector<double> vals(n_anchor);
    for (double& v : vals) v = beta_rng.uniform(1.0, 3.0);
    scale_to(vals, pure_topics ? 1.0 : c2.anchor_mass_p);
    for (int a = 0; a < n_anchor; ++a) beta(i, i * n_anchor + a) = vals[a];
  }

  if (!pure_topics && n_shared > 0) {
    const int tpm = std::max(2, std::min(params.effective_topics_per_word(), k));
    // Cyclic balanced assignment keeps per-row shared mass comparable; the
    // compression pass below then enforces the per-word B range exactly.
    std::vector<std::vector<int>> word_topics(n_shared);
    std::vector<double> word_base(n_shared);
    std::vector<std::map<int, double>> word_mult(n_shared);
    for (int w = 0; w < n_shared; ++w) {
      const int m = 2 + static_cast<int>(beta_rng.uniform_int(static_cast<std::uint64_t>(tpm - 1)));
      const int start = static_cast<int>(beta_rng.uniform_int(static_cast<std::uint64_t>(k)));
      word_base[w] = beta_rng.uniform(1.0, 2.0);
      for (int s = 0; s < std::min(m, k); ++s) {
        const int topic = (start + s) % k;
        word_topics[w].push_back(topic);
        word_mult[w][topic] = beta_rng.uniform(1.0, std::pow(c2.dynamic_range_b, 0.25));
      }
    }
    for (int pass = 0; pass < 60; ++pass) {
      for (int i = 0; i < k; ++i) {
        std::vector<int> words;
        std::vector<double> vals;
        for (int w = 0; w < n_shared; ++w) {
          auto it = word_mult[w].find(i);
          if (it == word_mult[w].end()) continue;
          words.push_back(w);
          vals.push_back(word_base[w] * it->second);
        }
        if (words.empty()) {
          throw std::runtime_error("gen_case2: topic " + std::to_string(i) +
                                   " received no shared words; increase N or shared pool");
        }
        scale_to(vals, 1.0 - c2.anchor_mass_p);
        for (std::size_t s = 0; s < words.size(); ++s) {
          beta(i, k * n_anchor + words[s]) = vals[s];
        }
      }
      double worst_ratio = 1.0;
      for (int w = 0; w < n_shared; ++w) {
        double lo = kInfinity, hi = 0.0;
        for (int i : word_topics[w]) {
          const double v = beta(i, k * n_anchor + w);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        worst_ratio = std::max(worst_ratio, hi / lo);
      }
      if (worst_ratio <= c2.dynamic_range_b * (1.0 - 1e-9)) break;
      if (pass == 59) {
        throw std::runtime_error("gen_case2: could not fit shared words inside dynamic range B");
      }
      // Compress each word's realized values toward their geometric mean.
      for (int w = 0; w < n_shared; ++w) {
        double log_gm = 0.0;
        for (int i : word_topics[w]) log_gm += std::log(beta(i, k * n_anchor + w));
        log_gm /= static_cast<double>(word_topics[w].size());
        for (int i : word_topics[w]) {
          const double v = beta(i, k * n_anchor + w);
          word_mult[w][i] = std::exp(0.5 * (std::log(v) - log_gm));
        }
        word_base[w] = std::exp(log_gm);
      }
    }
  }
  beta.validate(min_entry);

  // Documents: dominants first, so each topic's heavy quota can be assigned
  // deterministically before proportions are drawn.
  Rng doc_rng(derive_seed(params.seed, kDocStream));
  std::vector<int> dominants(d);
  std::vector<std::vector<int>> docs_of_topic(k);
  for (int doc_id = 0; doc_id < d; ++doc_id) {
    dominants[doc_id] = static_cast<int>(doc_rng.uniform_int(static_cast<std::uint64_t>(k)));
    docs_of_topic[dominants[doc_id]].push_back(doc_id);
  }
  std::vector<char> heavy(d, 0);
  for (int i = 0; i < k; ++i) {
    const auto& list = docs_of_topic[i];
    const int quota = static_cast<int>(
        std::ceil(heavy_frac * static_cast<double>(list.size()) - 1e-12));
    for (int s = 0; s < quota && s < static_cast<int>(list.size()); ++s) heavy[list[s]] = 1;
  }

  const double extra_prob = params.effective_extra_topic_prob();
  Instance instance;
  instance.params = resolved;
  instance.docs.reserve(d);
  double epsilon = 0.0;
  for (int doc_id = 0; doc_id < d; ++doc_id) {
    const int dominant = dominants[doc_id];
    const double budget =
        heavy[doc_id] ? std::min(delta_eff, (t - 1) * c2.c_s) : std::min(1.0 - c2.c_l, (t - 1) * c2.c_s);
    int max_minors = std::min(t - 1, static_cast<int>(budget / minor_min));
    int want_minors = 1;
    for (int s = 1; s < t - 1; ++s) {
      if (doc_rng.u01() < extra_prob) ++want_minors;
    }
    const int n_minors = std::min(want_minors, max_minors);

    ProportionDraw draw;
    draw.dominant = dominant;
    if (n_minors > 0) {
      std::vector<int> others = doc_rng.sample_without_replacement(k - 1, n_minors);
      for (int& o : others) {
        if (o >= dominant) ++o;  // skip the dominant topic index
      }
      draw.minors = others;
      const double cap = std::min(c2.c_s, budget / n_minors);
      draw.minor_masses.resize(n_minors);
      for (double& m : draw.minor_masses) m = doc_rng.uniform(minor_min, cap);
    }
    append_doc(instance.docs, to_proportions(k, draw), beta, params, doc_rng, epsilon);
  }
  instance.beta_true = std::move(beta);
  instance.epsilon_achieved = epsilon;
  return instance;
}

std::vector<int> common_word_indices(const Instance& instance) {
  if (!instance.params.common) return {};
  const int nc = instance.params.common->num_words;
  std::vector<int> out;
  for (int j = instance.num_words() - nc; j < instance.num_words(); ++j) out.push_back(j);
  return out;
}

Instance add_common_words(const Instance& instance, double kappa, int mass_exponent,
                          int heavy_exponent, int num_words) {
  if (kappa < 2.0) {
    throw std::invalid_argument("add_common_words: kappa must be at least 2, got " +
                                format_double(kappa));
  }
  if (num_words < 1 || mass_exponent < 1 || heavy_exponent < 1) {
    throw std::invalid_argument("add_common_words: exponents and word count must be positive");
  }
  if (instance.params.common) {
    throw std::invalid_argument("add_common_words: instance already has common words");
  }
  const int k = instance.num_topics();
  const int n = instance.num_words();
  const double common_mass_cap = std::pow(kappa, -static_cast<double>(mass_exponent));
  const double heavy_level = 1.0 - std::pow(kappa, -static_cast<double>(heavy_exponent));

  Rng rng(derive_seed(instance.params.seed, kCommonStream));

  // Per-topic common-word values: base value per word, per-topic multiplier,
  // rows scaled to a common total mass. Compression enforces the kappa range
  // after scaling, as in the case-2 shared block.
  std::vector<double> base(num_words);
  std::vector<std::vector<double>> mult(k, std::vector<double>(num_words));
  for (int w = 0; w < num_words; ++w) base[w] = rng.uniform(1.0, 2.0);
  for (int i = 0; i < k; ++i) {
    for (int w = 0; w < num_words; ++w) mult[i][w] = rng.uniform(1.0, std::sqrt(kappa));
  }
  const double common_mass = common_mass_cap * 0.9;
  std::vector<std::vector<double>> common_vals(k, std::vector<double>(num_words));
  for (int pass = 0; pass < 60; ++pass) {
    for (int i = 0; i < k; ++i) {
      for (int w = 0; w < num_words; ++w) common_vals[i][w] = base[w] * mult[i][w];
      scale_to(common_vals[i], common_mass);
    }
    double worst = 1.0;
    for (int w = 0; w < num_words; ++w) {
      double lo = kInfinity, hi = 0.0;
      for (int i = 0; i < k; ++i) {
        lo = std::min(lo, common_vals[i][w]);
        hi = std::max(hi, common_vals[i][w]);
      }
      worst = std::max(worst, hi / lo);
    }
    if (worst <= kappa * (1.0 - 1e-9)) break;
    if (pass == 59) throw std::runtime_error("add_common_words: could not fit kappa range");
    for (int w = 0; w < num_words; ++w) {
      double log_gm = 0.0;
      for (int i = 0; i < k; ++i) log_gm += std::log(common_vals[i][w]);
      log_gm /= k;
      for (int i = 0; i < k; ++i) {
        mult[i][w] = std::exp(0.5 * (std::log(common_vals[i][w]) - log_gm));
      }
      base[w] = std::exp(log_gm);
    }
  }

  Instance out;
  out.params = instance.params;
  out.params.num_words = n + num_words;
  out.params.common = CommonWordsParams{kappa, mass_exponent, heavy_exponent, num_words};

  TopicWordMatrix beta(k, n + num_words);
  for (int i = 0; i < k; ++i) {
    double total_common = 0.0;
    for (int w = 0; w < num_words; ++w) total_common += common_vals[i][w];
    for (int j = 0; j < n; ++j) beta(i, j) = instance.beta_true(i, j) * (1.0 - total_common);
    for (int w = 0; w < num_words; ++w) beta(i, n + w) = common_vals[i][w];
  }
  beta.validate(out.params.effective_min_entry());

  // Re-weight documents: per topic, the first ceil((1-kappa^-he) |D_i|)
  // dominated documents are forced to dominant proportion >= heavy_level.
  std::vector<std::vector<int>> docs_of_topic(k);
  for (std::size_t doc_id = 0; doc_id < instance.docs.size(); ++doc_id) {
    const int dom = instance.docs[doc_id].truth->dominant_topic();
    if (dom >= 0) docs_of_topic[dom].push_back(static_cast<int>(doc_id));
  }
  std::vector<char> force_heavy(instance.docs.size(), 0);
  for (int i = 0; i < k; ++i) {
    const auto& list = docs_of_topic[i];
    const int quota =
        static_cast<int>(std::ceil(heavy_level * static_cast<double>(list.size()) - 1e-12));
    for (int s = 0; s < quota && s < static_cast<int>(list.size()); ++s) force_heavy[list[s]] = 1;
  }

  out.docs.reserve(instance.docs.size());
  double epsilon = 0.0;
  for (std::size_t doc_id = 0; doc_id < instance.docs.size(); ++doc_id) {
    const TopicProportions& old_gamma = *instance.docs[doc_id].truth;
    std::vector<double> w = old_gamma.weights();
    const int dom = old_gamma.dominant_topic();
    if (force_heavy[doc_id] && dom >= 0 && w[dom] < heavy_level) {
      const double target_dom = rng.uniform(heavy_level, 0.5 * (1.0 + heavy_level));
      const double minor_scale = (1.0 - target_dom) / (1.0 - w[dom]);
      for (int i = 0; i < k; ++i) {
        if (i != dom) w[i] *= minor_scale;
      }
      w[dom] = target_dom;
    }
    TopicProportions gamma(std::move(w));
    GenerationParams sample_params = out.params;
    sample_params.doc_length = instance.docs[doc_id].length.value_or(out.params.doc_length);
    append_doc(out.docs, gamma, beta, sample_params, rng, epsilon);
  }
  out.beta_true = std::move(beta);
  out.epsilon_achieved = epsilon;
  return out;
}

namespace {

void check_min_entries(const Instance& instance, AssumptionReport& report) {
  const double min_entry = instance.params.effective_min_entry();
  double worst = kInfinity;
  std::string witness = "all nonzero entries clear the floor";
  for (int i = 0; i < instance.num_topics(); ++i) {
    for (int j = 0; j < instance.num_words(); ++j) {
      const double v = instance.beta_true(i, j);
      if (v > 0.0 && v < worst) {
        worst = v;
        witness = "smallest beta entry at topic " + std::to_string(i) + ", word " + std::to_string(j);
      }
    }
  }
  for (std::size_t d = 0; d < instance.docs.size(); ++d) {
    for (int i : instance.docs[d].truth->support()) {
      const double v = (*instance.docs[d].truth)[i];
      if (v < worst) {
        worst = v;
        witness = "smallest gamma entry at doc " + std::to_string(d) + ", topic " + std::to_string(i);
      }
    }
  }
  report.entries.push_back(
      {"min_entries", worst >= min_entry, witness + " (floor " + format_double(min_entry) + ")",
       worst});
}

void check_frequency_error(const Instance& instance, AssumptionReport& report) {
  const double eps = instance.epsilon_achieved;
  report.entries.push_back({"frequency_error", eps <= 0.5,
                            instance.params.exact_docs ? "exact frequencies" : "sampled documents",
                            eps});
}

void check_equidistribution(const Instance& instance, AssumptionReport& report) {
  const int k = instance.num_topics();
  std::vector<int> counts(k, 0);
  int with_dominant = 0;
  for (const auto& doc : instance.docs) {
    const int dom = doc.truth->dominant_topic();
    if (dom >= 0) {
      ++counts[dom];
      ++with_dominant;
    }
  }
  double worst = 1.0;
  int worst_topic = 0;
  for (int i = 0; i < k; ++i) {
    const double freq = with_dominant > 0 ? static_cast<double>(counts[i]) / with_dominant : 0.0;
    const double factor = freq > 0.0 ? std::max(freq * k, 1.0 / (freq * k)) : kInfinity;
    if (factor > worst) {
      worst = factor;
      worst_topic = i;
    }
  }
  report.entries.push_back({"dominant_equidistribution", worst <= 2.0,
                            "worst topic " + std::to_string(worst_topic) +
                                " (dominance frequency vs 1/K, factor-2 window)",
                            worst});
}

void check_case1(const Instance& instance, AssumptionReport& report,
                 const std::vector<char>& excluded_words) {
  const GenerationParams& p = instance.params;
  const int k = instance.num_topics();
  const int n = instance.num_words();
  const int tpm = std::min(p.effective_topics_per_word(), k);

  int max_topics_per_word = 0;
  int worst_word = 0;
  for (int j = 0; j < n; ++j) {
    if (excluded_words[j]) continue;
    int c = 0;
    for (int i = 0; i < k; ++i) {
      if (instance.beta_true(i, j) > 0.0) ++c;
    }
    if (c > max_topics_per_word) {
      max_topics_per_word = c;
      worst_word = j;
    }
  }
  report.entries.push_back({"words_discriminative", max_topics_per_word <= tpm,
                            "word " + std::to_string(worst_word) + " appears in " +
                                std::to_string(max_topics_per_word) + " topics (cap " +
                                std::to_string(tpm) + ")",
                            static_cast<double>(max_topics_per_word)});

  double worst_overlap = 0.0;
  std::string overlap_witness = "no overlapping pair";
  for (int i = 0; i < k; ++i) {
    for (int i2 = 0; i2 < k; ++i2) {
      if (i == i2) continue;
      double mass = 0.0;
      for (int j = 0; j < n; ++j) {
        if (excluded_words[j]) continue;
        if (instance.beta_true(i, j) > 0.0 && instance.beta_true(i2, j) > 0.0) {
          mass += instance.beta_true(i, j);
        }
      }
      if (mass > worst_overlap) {
        worst_overlap = mass;
        overlap_witness = "topics (" + std::to_string(i) + "," + std::to_string(i2) + ")";
      }
    }
  }
  report.entries.push_back({"almost_disjoint_supports", worst_overlap <= p.overlap_mass + 1e-9,
                            overlap_witness, worst_overlap});

  double min_gap = kInfinity;
  std::size_t worst_doc = 0;
  bool sparse_ok = true;
  for (std::size_t d = 0; d < instance.docs.size(); ++d) {
    const TopicProportions& g = *instance.docs[d].truth;
    if (static_cast<int>(g.support().size()) > p.max_doc_topics) {
      sparse_ok = false;
      worst_doc = d;
      min_gap = 0.0;
      break;
    }
    double top1 = 0.0, top2 = 0.0;
    for (int i : g.support()) {
      const double v = g[i];
      if (v > top1) {
        top2 = top1;
        top1 = v;
      } else if (v > top2) {
        top2 = v;
      }
    }
    const double gap = top1 - top2;
    if (gap < min_gap) {
      min_gap = gap;
      worst_doc = d;
    }
  }
  report.entries.push_back({"sparse_gapped_documents", sparse_ok && min_gap > p.rho,
                            "worst document " + std::to_string(worst_doc), min_gap});

  check_equidistribution(instance, report);

  // Weak topic correlations: conditioning on one topic being absent moves the
  // dominant-proportion mean by at most 20%, for every ordered topic pair
  // with enough samples (the o(1) clause pinned to a finite threshold).
  {
    double worst_dev = 0.0;
    std::string witness = "insufficient samples for every pair";
    for (int i = 0; i < k; ++i) {
      double sum_all = 0.0;
      int n_all = 0;
      std::vector<double> sum_without(k, 0.0);
      std::vector<int> n_without(k, 0);
      for (const auto& doc : instance.docs) {
        const TopicProportions& g = *doc.truth;
        if (g.dominant_topic() != i) continue;
        sum_all += g[i];
        ++n_all;
        for (int i2 = 0; i2 < k; ++i2) {
          if (i2 != i && g[i2] == 0.0) {
            sum_without[i2] += g[i];
            ++n_without[i2];
          }
        }
      }
      if (n_all < 30) continue;
      const double mean_all = sum_all / n_all;
      for (int i2 = 0; i2 < k; ++i2) {
        if (i2 == i || n_without[i2] < 30) continue;
        const double dev = std::abs(sum_without[i2] / n_without[i2] / mean_all - 1.0);
        if (dev > worst_dev) {
          worst_dev = dev;
          witness = "E[gamma_dom] shift conditioning topic " + std::to_string(i2) +
                    " out of documents dominated by " + std::to_string(i);
        }
      }
    }
    report.entries.push_back({"weak_topic_correlations", worst_dev <= 0.2, witness, worst_dev});
  }

  // Independent topic inclusion: each topic's minor-inclusion rate within a
  // factor 2 of the configured Theta(1/K) probability.
  {
    const double q = p.effective_extra_topic_prob();
    double worst_factor = 1.0;
    std::string witness = "minor-topic inclusion rate vs configured probability";
    bool any_possible = p.max_doc_topics > 1 && k > 1;
    if (any_possible) {
      for (int i = 0; i < k; ++i) {
        int included = 0, eligible = 0;
        for (const auto& doc : instance.docs) {
          const TopicProportions& g = *doc.truth;
          if (g.dominant_topic() == i) continue;
          ++eligible;
          if (g[i] > 0.0) ++included;
        }
        if (eligible < 30) continue;
        const double rate = static_cast<double>(included) / eligible;
        const double factor = rate > 0.0 ? std::max(rate / q, q / rate) : kInfinity;
        if (factor > worst_factor) {
          worst_factor = factor;
          witness = "topic " + std::to_string(i) + " inclusion rate " + format_double(rate) +
                    " vs q=" + format_double(q);
        }
      }
    } else {
      witness = "T=1: documents have no minor topics";
    }
    report.entries.push_back(
        {"independent_topic_inclusion", !any_possible || worst_factor <= 2.0, witness,
         worst_factor});
  }
}

void check_case2(const Instance& instance, AssumptionReport& report,
                 const std::vector<char>& excluded_words) {
  const Case2Params& c2 = *instance.params.case2;
  const int k = instance.num_topics();
  const int n = instance.num_words();

  // Anchor mass per topic.
  {
    std::vector<double> anchor_mass(k, 0.0);
    for (int j = 0; j < n; ++j) {
      if (excluded_words[j]) continue;
      int owner = -1, count = 0;
      for (int i = 0; i < k && count < 2; ++i) {
        if (instance.beta_true(i, j) > 0.0) {
          owner = i;
          ++count;
        }
      }
      if (count == 1) anchor_mass[owner] += instance.beta_true(owner, j);
    }
    double worst = kInfinity;
    int worst_topic = 0;
    for (int i = 0; i < k; ++i) {
      if (anchor_mass[i] < worst) {
        worst = anchor_mass[i];
        worst_topic = i;
      }
    }
    report.entries.push_back({"anchor_topic_mass", worst >= c2.anchor_mass_p - 1e-9,
                              "topic " + std::to_string(worst_topic) + " (target p=" +
                                  format_double(c2.anchor_mass_p) + ")",
                              worst});
  }

  // Dynamic range over shared words.
  {
    double worst = 1.0;
    int worst_word = -1;
    for (int j = 0; j < n; ++j) {
      if (excluded_words[j]) continue;
      double lo = kInfinity, hi = 0.0;
      int count = 0;
      for (int i = 0; i < k; ++i) {
        const double v = instance.beta_true(i, j);
        if (v > 0.0) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
          ++count;
        }
      }
      if (count >= 2 && hi / lo > worst) {
        worst = hi / lo;
        worst_word = j;
      }
    }
    report.entries.push_back({"dynamic_range",
                              worst <= c2.dynamic_range_b * (1.0 + 1e-9),
                              worst_word < 0 ? "no shared words"
                                             : "word " + std::to_string(worst_word),
                              worst});
  }

  // Gapped documents at levels C_l / C_s.
  {
    double worst_dom = 1.0, worst_minor = 0.0;
    std::size_t worst_doc = 0;
    for (std::size_t d = 0; d < instance.docs.size(); ++d) {
      const TopicProportions& g = *instance.docs[d].truth;
      const int dom = g.dominant_topic();
      const double dom_w = dom >= 0 ? g[dom] : 0.0;
      if (dom_w < worst_dom) {
        worst_dom = dom_w;
        worst_doc = d;
      }
      for (int i : g.support()) {
        if (i != dom && g[i] > worst_minor) worst_minor = g[i];
      }
    }
    const bool ok = worst_dom >= c2.c_l - kZeroTol && worst_minor <= c2.c_s + kZeroTol;
    report.entries.push_back({"gapped_documents", ok,
                              "min dominant " + format_double(worst_dom) + ", max minor " +
                                  format_double(worst_minor) + " (doc " +
                                  std::to_string(worst_doc) + ")",
                              worst_dom - worst_minor});
  }

  // The C_l - C_s gap inequality at the achieved epsilon.
  {
    const double rhs = case2_gap_requirement(c2, instance.epsilon_achieved);
    const double lhs = c2.c_l - c2.c_s;
    report.entries.push_back({"gap_inequality", lhs >= rhs,
                              "C_l - C_s = " + format_double(lhs) + " vs required " +
                                  format_double(rhs),
                              lhs - rhs});
  }

  // Heavy documents: fraction of each topic's dominated documents at
  // gamma >= 1 - delta must reach min(8/B, 1) (clamped for small B).
  {
    const double delta_eff = case2_effective_delta(c2);
    const double needed = std::min(8.0 / c2.dynamic_range_b, 1.0);
    double worst_frac = 1.0;
    int worst_topic = 0;
    std::vector<int> total(k, 0), heavy(k, 0);
    for (const auto& doc : instance.docs) {
      const TopicProportions& g = *doc.truth;
      const int dom = g.dominant_topic();
      if (dom < 0) continue;
      ++total[dom];
      if (g[dom] >= 1.0 - delta_eff - kZeroTol) ++heavy[dom];
    }
    for (int i = 0; i < k; ++i) {
      const double frac = total[i] > 0 ? static_cast<double>(heavy[i]) / total[i] : 0.0;
      if (frac < worst_frac) {
        worst_frac = frac;
        worst_topic = i;
      }
    }
    std::string witness = "topic " + std::to_string(worst_topic) + " at delta_eff " +
                          format_double(delta_eff);
    if (8.0 / c2.dynamic_range_b > 1.0) witness += " (8/B > 1 clamped to 1)";
    report.entries.push_back({"heavy_documents", worst_frac >= needed - 1e-12, witness, worst_frac});
  }

  check_equidistribution(instance, report);
}

void check_common(const Instance& instance, AssumptionReport& report) {
  const CommonWordsParams& cw = *instance.params.common;
  const int k = instance.num_topics();
  const std::vector<int> commons = common_word_indices(instance);

  bool everywhere = true;
  int missing_word = -1;
  for (int j : commons) {
    for (int i = 0; i < k; ++i) {
      if (instance.beta_true(i, j) <= 0.0) {
        everywhere = false;
        missing_word = j;
      }
    }
  }
  report.entries.push_back({"common_words_in_all_topics", everywhere,
                            everywhere ? std::to_string(commons.size()) + " common words"
                                       : "word " + std::to_string(missing_word) + " missing",
                            static_cast<double>(commons.size())});

  double worst_ratio = 1.0;
  for (int j : commons) {
    double lo = kInfinity, hi = 0.0;
    for (int i = 0; i < k; ++i) {
      lo = std::min(lo, instance.beta_true(i, j));
      hi = std::max(hi, instance.beta_true(i, j));
    }
    if (lo > 0.0) worst_ratio = std::max(worst_ratio, hi / lo);
  }
  report.entries.push_back({"common_dynamic_range", worst_ratio <= cw.kappa * (1.0 + 1e-9),
                            "max per-word ratio across topics (kappa " + format_double(cw.kappa) +
                                ")",
                            worst_ratio});

  const double mass_cap = std::pow(cw.kappa, -static_cast<double>(cw.mass_exponent));
  double worst_mass = 0.0;
  for (int i = 0; i < k; ++i) {
    double mass = 0.0;
    for (int j : commons) mass += instance.beta_true(i, j);
    worst_mass = std::max(worst_mass, mass);
  }
  report.entries.push_back({"common_mass", worst_mass <= mass_cap + kZeroTol,
                            "max per-topic common mass (cap kappa^-" +
                                std::to_string(cw.mass_exponent) + " = " + format_double(mass_cap) +
                                ")",
                            worst_mass});

  const double heavy_level = 1.0 - std::pow(cw.kappa, -static_cast<double>(cw.heavy_exponent));
  std::vector<int> total(k, 0), heavy(k, 0);
  for (const auto& doc : instance.docs) {
    const TopicProportions& g = *doc.truth;
    const int dom = g.dominant_topic();
    if (dom < 0) continue;
    ++total[dom];
    if (g[dom] >= heavy_level - kZeroTol) ++heavy[dom];
  }
  double worst_frac = 1.0;
  for (int i = 0; i < k; ++i) {
    if (total[i] > 0) worst_frac = std::min(worst_frac, static_cast<double>(heavy[i]) / total[i]);
  }
  report.entries.push_back({"common_heavy_documents", worst_frac >= heavy_level - 1e-12,
                            "fraction of dominated docs at >= " + format_double(heavy_level),
                            worst_frac});
}

}  // namespace

AssumptionReport verify_assumptions(const Instance& instance, CaseId which) {
  AssumptionReport report;
  std::vector<char> excluded(instance.num_words(), 0);
  if (which == CaseId::kCommon) {
    if (!instance.params.common) {
      report.entries.push_back({"common_words_present", false, "instance has no common extension", 0.0});
      return report;
    }
    // Common words are a separate word class; the base-case support and
    // range checks apply to the rest of the vocabulary.
    for (int j : common_word_indices(instance)) excluded[j] = 1;
  }

  const CaseId base = which == CaseId::kCommon
                          ? (instance.params.case2 ? CaseId::kCase2 : CaseId::kCase1)
                          : which;
  if (base == CaseId::kCase2 && !instance.params.case2) {
    report.entries.push_back({"case2_params_present", false, "instance lacks case2 parameters", 0.0});
    return report;
  }
  if (base == CaseId::kCase1) {
    check_case1(instance, report, excluded);
  } else {
    check_case2(instance, report, excluded);
  }
  if (which == CaseId::kCommon) check_common(instance, report);
  check_min_entries(instance, report);
  check_frequency_error(instance, report);
  return report;
}

DirichletCheckResult dirichlet_property_check(int num_topics, double c,
                                              const std::vector<double>& C_i, int num_samples,
                                              double c0, double x0, Rng& rng) {
  if (num_topics < 2) throw std::invalid_argument("dirichlet_property_check: need K >= 2");
  if (num_samples < 1000) {
    throw std::invalid_argument("dirichlet_property_check: need at least 1000 samples");
  }
  if (C_i.size() != 1 && static_cast<int>(C_i.size()) != num_topics) {
    throw std::invalid_argument("dirichlet_property_check: C_i must have length 1 or K");
  }
  std::vector<double> alpha(num_topics);
  const double scale = std::pow(static_cast<double>(num_topics), c);
  for (int i = 0; i < num_topics; ++i) {
    alpha[i] = (C_i.size() == 1 ? C_i[0] : C_i[i]) / scale;
    if (!(alpha[i] > 0.0)) throw std::invalid_argument("dirichlet_property_check: degenerate alpha");
  }

  const double coord_threshold = std::pow(static_cast<double>(num_topics), -c0);
  const double count_limit = c0 * std::log(static_cast<double>(num_topics));
  const int cond_set = std::min(3, num_topics - 1);

  int violations = 0;
  std::vector<std::int64_t> tail_hits(num_topics, 0);
  std::vector<double> sum_uncond(num_topics, 0.0);
  std::vector<double> sum_cond(num_topics, 0.0);
  std::int64_t cond_count = 0;

  for (int s = 0; s < num_samples; ++s) {
    const std::vector<double> y = rng.dirichlet(alpha);
    int big = 0;
    bool cond = true;
    for (int i = 0; i < num_topics; ++i) {
      if (y[i] >= coord_threshold) ++big;
      if (y[i] > x0) ++tail_hits[i];
      sum_uncond[i] += y[i];
      if (i < cond_set && y[i] >= coord_threshold) cond = false;
    }
    if (static_cast<double>(big) > count_limit) ++violations;
    if (cond) {
      ++cond_count;
      for (int i = 0; i < num_topics; ++i) sum_cond[i] += y[i];
    }
  }

  DirichletCheckResult result;
  result.num_samples = num_samples;
  result.sparsity_violation_rate = static_cast<double>(violations) / num_samples;

  double max_tail = 0.0, min_tail = kInfinity;
  for (int i = 0; i < num_topics; ++i) {
    const double p = static_cast<double>(tail_hits[i]) / num_samples;
    max_tail = std::max(max_tail, p);
    min_tail = std::min(min_tail, p);
  }
  result.max_tail_prob_ratio = min_tail > 0.0 ? max_tail / min_tail : kInfinity;

  double worst_dev = 0.0;
  if (cond_count > 100) {
    for (int i = cond_set; i < num_topics; ++i) {
      const double uncond = sum_uncond[i] / num_samples;
      const double cond_mean = sum_cond[i] / static_cast<double>(cond_count);
      if (uncond > 0.0) worst_dev = std::max(worst_dev, std::abs(cond_mean / uncond - 1.0));
    }
  }
  result.correlation_deviation = worst_dev;
  return result;
}

}  // namespace tem
