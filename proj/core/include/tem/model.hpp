#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tem {

inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kEqualityTol = 1e-12;
inline constexpr double kZeroTol = 1e-12;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Row-stochastic K x N matrix; row i is the word distribution of topic i.
class TopicWordMatrix {
 public:
  TopicWordMatrix() = default;
  TopicWordMatrix(int num_topics, int num_words);
  TopicWordMatrix(int num_topics, int num_words, std::vector<double> values);

  int num_topics() const { return num_topics_; }
  int num_words() const { return num_words_; }

  double operator()(int topic, int word) const {
    return values_[static_cast<std::size_t>(topic) * num_words_ + word];
  }
  double& operator()(int topic, int word) {
    return values_[static_cast<std::size_t>(topic) * num_words_ + word];
  }
  std::span<const double> row(int topic) const {
    return {values_.data() + static_cast<std::size_t>(topic) * num_words_,
            static_cast<std::size_t>(num_words_)};
  }
  std::span<double> row(int topic) {
    return {values_.data() + static_cast<std::size_t>(topic) * num_words_,
            static_cast<std::size_t>(num_words_)};
  }
  const std::vector<double>& values() const { return values_; }

  // Scales every row to sum to one. Throws if a row has no mass.
  void normalize_rows();

  // Checks row sums (1e-9) and that nonzero entries are >= min_entry.
  // Throws std::invalid_argument naming the offending row on failure.
  void validate(double min_entry = 0.0) const;

  // Words with nonzero probability, per topic, sorted.
  std::vector<std::vector<int>> supports() const;

  // Words that appear in exactly one topic, grouped by that topic.
  std::vector<std::vector<int>> anchor_sets() const;

 private:
  int num_topics_ = 0;
  int num_words_ = 0;
  std::vector<double> values_;
};

// Simplex vector of topic weights for one document.
class TopicProportions {
 public:
  TopicProportions() = default;
  explicit TopicProportions(std::vector<double> weights);

  int num_topics() const { return static_cast<int>(weights_.size()); }
  double operator[](int topic) const { return weights_[topic]; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<int>& support() const { return support_; }

  // Strict argmax, or -1 on a tie for the maximum.
  int dominant_topic() const;

 private:
  std::vector<double> weights_;
  std::vector<int> support_;
};

struct WordFreq {
  int word = 0;
  double freq = 0.0;
};

// Observed word-frequency vector, stored sparse (sorted by word index).
// length is the sampled word count N_d; empty means exact expected
// frequencies rather than an empirical sample.
struct Document {
  int vocab_size = 0;
  std::vector<WordFreq> freqs;
  std::optional<std::int64_t> length;
  std::optional<TopicProportions> truth;

  double freq_at(int word) const;
  double freq_sum() const;
  std::vector<double> dense() const;
  void validate() const;  // freqs sorted, in range, sum to 1 (or all-zero)
};

struct Case2Params {
  double anchor_mass_p = 0.0;
  double dynamic_range_b = 1.0;
  double c_l = 0.0;
  double c_s = 0.0;
  double delta = 0.0;       // <= 0 means: evaluate the closed-form expression
  double heavy_frac = 0.0;  // <= 0 means: min(8/B, 1)
  int anchor_words_per_topic = 0;  // 0 means: auto from vocab size
};

struct CommonWordsParams {
  double kappa = 0.0;
  int mass_exponent = 4;
  int heavy_exponent = 4;
  int num_words = 4;
};

struct GenerationParams {
  int num_topics = 0;      // K
  int num_words = 0;       // N
  int num_docs = 0;        // D
  int max_doc_topics = 1;  // T
  double rho = 0.0;        // dominant-topic gap
  double overlap_mass = 0.05;
  int topics_per_word_max = 0;  // 0 means: ceil(sqrt(K))
  double min_entry = 0.0;       // 0 means: 1/N^2
  double extra_topic_prob = 0.0;  // 0 means: 1/K
  double dominant_floor = 0.5;
  double minor_floor = 0.1;
  double shared_vocab_frac = 0.1;
  bool exact_docs = true;
  std::int64_t doc_length = 0;  // multinomial N_d when exact_docs is false
  std::uint64_t seed = 0;
  std::optional<Case2Params> case2;
  std::optional<CommonWordsParams> common;

  int effective_topics_per_word() const;
  double effective_min_entry() const;
  double effective_extra_topic_prob() const;
};

// A synthetic corpus together with its ground truth.
struct Instance {
  TopicWordMatrix beta_true;
  std::vector<Document> docs;
  GenerationParams params;
  double epsilon_achieved = 0.0;

  int num_topics() const { return beta_true.num_topics(); }
  int num_words() const { return beta_true.num_words(); }
  void validate() const;
};

// f_j = sum_i gamma_i beta_{i,j}.
std::vector<double> predicted_freqs(const TopicProportions& gamma, const TopicWordMatrix& beta);

// sum_j p_j log(p_j/q_j), with 0 log(0/.) = 0 and +infinity when p_j > 0,
// q_j = 0. Natural log.
double kl_divergence(std::span<const double> p, std::span<const double> q);

double l1_distance(std::span<const double> a, std::span<const double> b);
double total_variation(std::span<const double> a, std::span<const double> b);

// p_hat = min_i sum_{j in anchor_sets[i]} beta(i, j). Every listed word must
// be an anchor of its topic (zero in all other rows); certifies
// ||beta^T v||_1 >= p_hat ||v||_1 for all v.
double anchor_expansion_lower_bound(const TopicWordMatrix& beta,
                                    const std::vector<std::vector<int>>& anchor_sets);

// ||beta^T v||_1 where (beta^T v)_j = sum_i beta(i,j) v_i.
double expansion_image_l1(const TopicWordMatrix& beta, std::span<const double> v);

}  // namespace tem
