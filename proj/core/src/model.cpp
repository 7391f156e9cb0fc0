#include "tem/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tem {

TopicWordMatrix::TopicWordMatrix(int num_topics, int num_words)
    : num_topics_(num_topics),
      num_words_(num_words),
      values_(static_cast<std::size_t>(num_topics) * num_words, 0.0) {
  if (num_topics <= 0 || num_words <= 0) {
    throw std::invalid_argument("TopicWordMatrix: dimensions must be positive");
  }
}

TopicWordMatrix::TopicWordMatrix(int num_topics, int num_words, std::vector<double> values)
    : num_topics_(num_topics), num_words_(num_words), values_(std::move(values)) {
  if (num_topics <= 0 || num_words <= 0) {
    throw std::invalid_argument("TopicWordMatrix: dimensions must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(num_topics) * num_words) {
    throw std::invalid_argument("TopicWordMatrix: value count does not match dimensions");
  }
}

void TopicWordMatrix::normalize_rows() {
  for (int i = 0; i < num_topics_; ++i) {
    auto r = row(i);
    double sum = 0.0;
    for (double x : r) sum += x;
    if (sum <= 0.0) {
      throw std::runtime_error("TopicWordMatrix: row " + std::to_string(i) + " has no mass");
    }
    for (double& x : r) x /= sum;
  }
}

void TopicWordMatrix::validate(double min_entry) const {
  for (int i = 0; i < num_topics_; ++i) {
    double sum = 0.0;
    for (double x : row(i)) {
      if (x < 0.0) {
        throw std::invalid_argument("TopicWordMatrix: negative entry in row " + std::to_string(i));
      }
      if (x > 0.0 && x < min_entry) {
        throw std::invalid_argument("TopicWordMatrix: entry below min_entry in row " +
                                    std::to_string(i));
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
      throw std::invalid_argument("TopicWordMatrix: row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
    }
  }
}

std::vector<std::vector<int>> TopicWordMatrix::supports() const {
  std::vector<std::vector<int>> out(num_topics_);
  for (int i = 0; i < num_topics_; ++i) {
    for (int j = 0; j < num_words_; ++j) {
      if ((*this)(i, j) > 0.0) out[i].push_back(j);
    }
  }
  return out;
}

std::vector<std::vector<int>> TopicWordMatrix::anchor_sets() const {
  std::vector<std::vector<int>> out(num_topics_);
  for (int j = 0; j < num_words_; ++j) {
    int owner = -1;
    int count = 0;
    for (int i = 0; i < num_topics_ && count < 2; ++i) {
      if ((*this)(i, j) > 0.0) {
        owner = i;
        ++count;
      }
    }
    if (count == 1) out[owner].push_back(j);
  }
  return out;
}

TopicProportions::TopicProportions(std::vector<double> weights) : weights_(std::move(weights)) {
  double sum = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (w < 0.0) throw std::invalid_argument("TopicProportions: negative weight");
    if (w > 0.0) support_.push_back(static_cast<int>(i));
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw std::invalid_argument("TopicProportions: weights sum to " + std::to_string(sum));
  }
}

int TopicProportions::dominant_topic() const {
  int best = -1;
  double best_w = -1.0;
  bool tie = false;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] > best_w) {
      best_w = weights_[i];
      best = static_cast<int>(i);
      tie = false;
    } else if (weights_[i] == best_w) {
      tie = true;
    }
  }
  return tie ? -1 : best;
}

double Document::freq_at(int word) const {
  auto it = std::lower_bound(freqs.begin(), freqs.end(), word,
                             [](const WordFreq& e, int w) { return e.word < w; });
  if (it != freqs.end() && it->word == word) return it->freq;
  return 0.0;
}

double Document::freq_sum() const {
  double sum = 0.0;
  for (const auto& e : freqs) sum += e.freq;
  return sum;
}

std::vector<double> Document::dense() const {
  std::vector<double> out(vocab_size, 0.0);
  for (const auto& e : freqs) out[e.word] = e.freq;
  return out;
}

void Document::validate() const {
  int prev = -1;
  double sum = 0.0;
  for (const auto& e : freqs) {
    if (e.word <= prev || e.word >= vocab_size) {
      throw std::invalid_argument("Document: word indices must be sorted, unique and in range");
    }
    if (e.freq < 0.0) throw std::invalid_argument("Document: negative frequency");
    prev = e.word;
    sum += e.freq;
  }
  // All-zero documents are permitted (an empty observation).
  if (!freqs.empty() && std::abs(sum - 1.0) > kSimplexTol) {
    throw std::invalid_argument("Document: frequencies sum to " + std::to_string(sum));
  }
  if (length && *length <= 0) {
    throw std::invalid_argument("Document: sampled length must be positive");
  }
}

int GenerationParams::effective_topics_per_word() const {
  if (topics_per_word_max > 0) return topics_per_word_max;
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_topics))));
}

double GenerationParams::effective_min_entry() const {
  if (min_entry > 0.0) return min_entry;
  return 1.0 / (static_cast<double>(num_words) * num_words);
}

double GenerationParams::effective_extra_topic_prob() const {
  if (extra_topic_prob > 0.0) return extra_topic_prob;
  return 1.0 / num_topics;
}

void Instance::validate() const {
  beta_true.validate();
  const int k = beta_true.num_topics();
  for (std::size_t d = 0; d < docs.size(); ++d) {
    docs[d].validate();
    if (docs[d].vocab_size != beta_true.num_words()) {
      throw std::invalid_argument("Instance: document " + std::to_string(d) +
                                  " vocabulary does not match beta");
    }
    if (!docs[d].truth) {
      throw std::invalid_argument("Instance: document " + std::to_string(d) + " lacks ground truth");
    }
    if (docs[d].truth->num_topics() != k) {
      throw std::invalid_argument("Instance: document " + std::to_string(d) +
                                  " truth has wrong topic count");
    }
  }
  if (epsilon_achieved < 0.0) {
    throw std::invalid_argument("Instance: epsilon_achieved must be nonnegative");
  }
}

std::vector<double> predicted_freqs(const TopicProportions& gamma, const TopicWordMatrix& beta) {
  if (gamma.num_topics() != beta.num_topics()) {
    throw std::invalid_argument("predicted_freqs: gamma length does not match topic count");
  }
  std::vector<double> f(beta.num_words(), 0.0);
  for (int i : gamma.support()) {
    const double g = gamma[i];
    auto r = beta.row(i);
    for (int j = 0; j < beta.num_words(); ++j) f[j] += g * r[j];
  }
  return f;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    if (q[j] <= 0.0) return kInfinity;
    kl += p[j] * std::log(p[j] / q[j]);
  }
  return kl;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("l1_distance: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  return 0.5 * l1_distance(a, b);
}

double anchor_expansion_lower_bound(const TopicWordMatrix& beta,
                                    const std::vector<std::vector<int>>& anchor_sets) {
  if (static_cast<int>(anchor_sets.size()) != beta.num_topics()) {
    throw std::invalid_argument("anchor_expansion_lower_bound: one anchor set per topic required");
  }
  std::vector<int> owner(beta.num_words(), -1);
  for (int i = 0; i < beta.num_topics(); ++i) {
    for (int j : anchor_sets[i]) {
      if (j < 0 || j >= beta.num_words()) {
        throw std::invalid_argument("anchor_expansion_lower_bound: word index out of range");
      }
      if (owner[j] != -1) {
        throw std::invalid_argument("anchor_expansion_lower_bound: anchor sets must be disjoint");
      }
      owner[j] = i;
      for (int i2 = 0; i2 < beta.num_topics(); ++i2) {
        if (i2 != i && beta(i2, j) != 0.0) {
          throw std::invalid_argument("anchor_expansion_lower_bound: word " + std::to_string(j) +
                                      " is not an anchor of topic " + std::to_string(i));
        }
      }
    }
  }
  double p_hat = kInfinity;
  for (int i = 0; i < beta.num_topics(); ++i) {
    double mass = 0.0;
    for (int j : anchor_sets[i]) mass += beta(i, j);
    p_hat = std::min(p_hat, mass);
  }
  return p_hat;
}

double expansion_image_l1(const TopicWordMatrix& beta, std::span<const double> v) {
  if (static_cast<int>(v.size()) != beta.num_topics()) {
    throw std::invalid_argument("expansion_image_l1: vector length must equal topic count");
  }
  double norm = 0.0;
  for (int j = 0; j < beta.num_words(); ++j) {
    double x = 0.0;
    for (int i = 0; i < beta.num_topics(); ++i) x += beta(i, j) * v[i];
    norm += std::abs(x);
  }
  return norm;
}

}  // namespace tem
