#include "tem/init_support.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "tem/parallel.hpp"
#include "tem/rng.hpp"

namespace tem {

double pair_test_statistic(const Document& d, const Document& d2) {
  double sum = 0.0;
  std::size_t a = 0, b = 0;
  while (a < d.freqs.size() && b < d2.freqs.size()) {
    const int wa = d.freqs[a].word;
    const int wb = d2.freqs[b].word;
    if (wa == wb) {
      sum += std::min(d.freqs[a].freq, d2.freqs[b].freq);
      ++a;
      ++b;
    } else if (wa < wb) {
      ++a;
    } else {
      ++b;
    }
  }
  return sum;
}

bool pair_test(const Document& d, const Document& d2, int max_doc_topics) {
  return pair_test_statistic(d, d2) >= 1.0 / (2.0 * max_doc_topics);
}

std::vector<int> weedout(const Document& d, const Document& d2,
                         const std::vector<Document>& corpus, int max_doc_topics) {
  std::vector<char> keep(d.vocab_size, 0);
  int remaining = 0;
  {
    std::size_t a = 0, b = 0;
    while (a < d.freqs.size() && b < d2.freqs.size()) {
      const int wa = d.freqs[a].word;
      const int wb = d2.freqs[b].word;
      if (wa == wb) {
        if (d.freqs[a].freq > 0.0 && d2.freqs[b].freq > 0.0) {
          keep[wa] = 1;
          ++remaining;
        }
        ++a;
        ++b;
      } else if (wa < wb) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  for (const Document& d3 : corpus) {
    if (remaining == 0) break;
    if (&d3 == &d || &d3 == &d2) continue;
    if (!pair_test(d, d3, max_doc_topics) || !pair_test(d2, d3, max_doc_topics)) continue;
    std::vector<char> present(d.vocab_size, 0);
    for (const auto& e : d3.freqs) {
      if (e.freq > 0.0) present[e.word] = 1;
    }
    for (int j = 0; j < d.vocab_size; ++j) {
      if (keep[j] && !present[j]) {
        keep[j] = 0;
        --remaining;
      }
    }
  }
  std::vector<int> out;
  out.reserve(remaining);
  for (int j = 0; j < d.vocab_size; ++j) {
    if (keep[j]) out.push_back(j);
  }
  return out;
}

namespace {

bool is_strict_subset(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() >= b.size()) return false;
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

bool is_union_of(const std::vector<int>& s, const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() > s.size() || b.size() > s.size()) return false;
  std::vector<int> u;
  u.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u == s;
}

}  // namespace

SupportRecoveryResult find_topic_supports(const std::vector<Document>& corpus, int num_topics,
                                          int max_doc_topics, const SupportInitOptions& options) {
  const std::int64_t n_docs = static_cast<std::int64_t>(corpus.size());
  if (n_docs < 2) throw std::invalid_argument("find_topic_supports: need at least two documents");
  const std::int64_t total_pairs = n_docs * (n_docs - 1) / 2;
  std::int64_t num_pairs = options.num_pairs;
  if (num_pairs <= 0) {
    const double lk = std::log(static_cast<double>(std::max(num_topics, 2)));
    num_pairs = static_cast<std::int64_t>(
        std::ceil(std::pow(static_cast<double>(num_topics), 4.0) * lk * lk));
  }
  num_pairs = std::min(num_pairs, total_pairs);

  // Sample distinct pair indices without replacement; the triangular decode
  // maps an index p to the pair (row, col).
  Rng rng(options.seed);
  std::vector<std::int64_t> pair_ids;
  pair_ids.reserve(num_pairs);
  {
    std::set<std::int64_t> seen;
    while (static_cast<std::int64_t>(pair_ids.size()) < num_pairs) {
      std::int64_t p = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(total_pairs)));
      if (seen.insert(p).second) pair_ids.push_back(p);
    }
  }

  SupportRecoveryResult result;
  result.sampled_pairs.resize(pair_ids.size());
  std::vector<std::vector<int>> refined(pair_ids.size());
  parallel_for(pair_ids.size(), options.threads, [&](std::size_t idx) {
    std::int64_t p = pair_ids[idx];
    // Decode p into 0 <= d2 < d1 < n_docs.
    std::int64_t d1 = static_cast<std::int64_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(p))) / 2.0);
    while (d1 * (d1 - 1) / 2 > p) --d1;
    while ((d1 + 1) * d1 / 2 <= p) ++d1;
    const std::int64_t d2 = p - d1 * (d1 - 1) / 2;
    PairRecord rec;
    rec.d1 = static_cast<int>(d1);
    rec.d2 = static_cast<int>(d2);
    rec.test_yes = pair_test(corpus[d1], corpus[d2], max_doc_topics);
    if (rec.test_yes) {
      refined[idx] = weedout(corpus[d1], corpus[d2], corpus, max_doc_topics);
    }
    result.sampled_pairs[idx] = rec;
  });

  // Count duplicates of the refined sets, then prune.
  std::map<std::vector<int>, std::int64_t> counts;
  for (auto& s : refined) {
    if (!s.empty()) ++counts[std::move(s)];
  }
  result.candidate_sets = static_cast<std::int64_t>(counts.size());

  const double full_threshold =
      static_cast<double>(n_docs) /
      std::pow(static_cast<double>(num_topics), options.count_threshold_exponent);
  const double sampling_ratio = static_cast<double>(num_pairs) / static_cast<double>(total_pairs);
  const std::int64_t count_threshold =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(sampling_ratio * full_threshold)));

  std::vector<std::vector<int>> sets;
  for (const auto& [words, count] : counts) {
    if (count >= count_threshold) sets.push_back(words);
  }

  // Remove sets expressible as the union of two incomparable survivors,
  // repeating until stable so removals cascade deterministically.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      bool removable = false;
      for (std::size_t a = 0; a < sets.size() && !removable; ++a) {
        if (a == s) continue;
        for (std::size_t b = a + 1; b < sets.size() && !removable; ++b) {
          if (b == s) continue;
          if (is_strict_subset(sets[a], sets[b]) || is_strict_subset(sets[b], sets[a])) continue;
          if (is_union_of(sets[s], sets[a], sets[b])) removable = true;
        }
      }
      if (removable) {
        sets.erase(sets.begin() + static_cast<std::ptrdiff_t>(s));
        changed = true;
        break;
      }
    }
  }

  // Keep maximal sets: survivors at this point are topic supports or pairwise
  // intersections, and the intersections are the strict subsets.
  std::vector<std::vector<int>> maximal;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    bool subset = false;
    for (std::size_t o = 0; o < sets.size() && !subset; ++o) {
      if (o != s && is_strict_subset(sets[s], sets[o])) subset = true;
    }
    if (!subset) maximal.push_back(sets[s]);
  }

  std::sort(maximal.begin(), maximal.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              if (a.front() != b.front()) return a.front() < b.front();
              return a < b;
            });

  if (static_cast<int>(maximal.size()) < num_topics) {
    throw std::runtime_error(
        "find_topic_supports: insufficient identifying pairs (" + std::to_string(maximal.size()) +
        " candidate supports for " + std::to_string(num_topics) +
        " topics); increase the corpus size or num_pairs");
  }
  result.supports = std::move(maximal);
  return result;
}

std::vector<int> find_document_support(const Document& doc,
                                       const std::vector<std::vector<int>>& topic_supports,
                                       double score_floor) {
  const int k = static_cast<int>(topic_supports.size());
  std::vector<char> covered(doc.vocab_size, 0);
  std::vector<char> selected(k, 0);
  std::vector<int> out;
  for (;;) {
    int best = -1;
    double best_score = score_floor;
    for (int i = 0; i < k; ++i) {
      if (selected[i]) continue;
      double score = 0.0;
      for (int j : topic_supports[i]) {
        if (!covered[j]) score += doc.freq_at(j);
      }
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    if (best < 0) break;
    selected[best] = 1;
    out.push_back(best);
    for (int j : topic_supports[best]) covered[j] = 1;
  }
  std::sort(out.begin(), out.end());
  return out;
}

InferenceState build_initial_state(const std::vector<Document>& corpus,
                                   const std::vector<std::vector<int>>& topic_supports,
                                   const std::vector<std::vector<int>>& doc_supports) {
  if (topic_supports.empty()) throw std::invalid_argument("build_initial_state: no topic supports");
  if (doc_supports.size() != corpus.size()) {
    throw std::invalid_argument("build_initial_state: one support set per document required");
  }
  const int k = static_cast<int>(topic_supports.size());
  const int n = corpus.empty() ? 0 : corpus.front().vocab_size;

  // Stable topic ordering: sort recovered sets by smallest contained word.
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) {
    if (topic_supports[i].empty()) {
      throw std::invalid_argument("build_initial_state: empty topic support " + std::to_string(i));
    }
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (topic_supports[a].front() != topic_supports[b].front()) {
      return topic_supports[a].front() < topic_supports[b].front();
    }
    return topic_supports[a] < topic_supports[b];
  });
  std::vector<int> rank(k);
  for (int pos = 0; pos < k; ++pos) rank[order[pos]] = pos;

  InferenceState state;
  state.beta = TopicWordMatrix(k, n);
  state.topic_supports.resize(k);
  for (int i = 0; i < k; ++i) {
    const auto& words = topic_supports[order[i]];
    state.topic_supports[i] = words;
    for (int j : words) {
      if (j < 0 || j >= n) throw std::invalid_argument("build_initial_state: word index out of range");
      state.beta(i, j) = 1.0 / static_cast<double>(words.size());
    }
  }

  state.doc_supports.resize(corpus.size());
  state.gammas.resize(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (doc_supports[d].empty()) {
      throw std::invalid_argument("build_initial_state: document " + std::to_string(d) +
                                  " has an empty support");
    }
    std::vector<int> mapped;
    mapped.reserve(doc_supports[d].size());
    for (int i : doc_supports[d]) {
      if (i < 0 || i >= k) {
        throw std::invalid_argument("build_initial_state: document " + std::to_string(d) +
                                    " references unknown topic set " + std::to_string(i));
      }
      mapped.push_back(rank[i]);
    }
    std::sort(mapped.begin(), mapped.end());
    state.doc_supports[d] = mapped;
    std::vector<double> w(k, 0.0);
    for (int i : mapped) w[i] = 1.0 / static_cast<double>(mapped.size());
    state.gammas[d] = TopicProportions(std::move(w));
  }
  return state;
}

}  // namespace tem
