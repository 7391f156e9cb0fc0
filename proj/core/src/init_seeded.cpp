#include "tem/init_seeded.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tem {

std::vector<int> select_seed_docs(const Instance& instance, double c_l) {
  const int k = instance.num_topics();
  std::vector<int> seeds(k, -1);
  std::vector<double> best(k, 0.0);
  for (std::size_t d = 0; d < instance.docs.size(); ++d) {
    const TopicProportions& g = *instance.docs[d].truth;
    for (int i : g.support()) {
      if (g[i] >= c_l && g[i] > best[i]) {
        best[i] = g[i];
        seeds[i] = static_cast<int>(d);
      }
    }
  }
  for (int i = 0; i < k; ++i) {
    if (seeds[i] < 0) {
      throw std::runtime_error("select_seed_docs: no document with proportion >= " +
                               std::to_string(c_l) + " for topic " + std::to_string(i));
    }
  }
  return seeds;
}

InferenceState seeded_init(const std::vector<int>& seed_docs, const std::vector<Document>& corpus,
                           double zero_floor) {
  if (seed_docs.empty()) throw std::invalid_argument("seeded_init: no seed documents");
  const int k = static_cast<int>(seed_docs.size());
  const int n = corpus.empty() ? 0 : corpus.front().vocab_size;

  InferenceState state;
  state.beta = TopicWordMatrix(k, n);
  for (int i = 0; i < k; ++i) {
    const int d = seed_docs[i];
    if (d < 0 || d >= static_cast<int>(corpus.size())) {
      throw std::invalid_argument("seeded_init: seed document index out of range");
    }
    auto row = state.beta.row(i);
    // Words absent from the seed document would freeze at zero under
    // multiplicative updates; floor them instead.
    for (int j = 0; j < n; ++j) row[j] = zero_floor;
    for (const auto& e : corpus[d].freqs) {
      if (e.freq > 0.0) row[e.word] = e.freq;
    }
  }
  state.beta.normalize_rows();

  state.gammas.resize(corpus.size());
  std::vector<double> uniform(k, 1.0 / static_cast<double>(k));
  for (std::size_t d = 0; d < corpus.size(); ++d) state.gammas[d] = TopicProportions(uniform);
  // doc_supports / topic_supports stay empty: no enforcement in seeded mode.
  return state;
}

PhaseMonitor::PhaseMonitor(const Instance& instance, std::vector<int> permutation,
                           double zero_threshold, double decay_slack, double decay_floor)
    : instance_(&instance),
      perm_(std::move(permutation)),
      anchors_(instance.beta_true.anchor_sets()),
      zero_threshold_(zero_threshold),
      decay_slack_(decay_slack),
      decay_floor_(decay_floor) {}

void PhaseMonitor::observe(const InferenceState& state) {
  const Instance& inst = *instance_;
  const int k = state.beta.num_topics();
  PhaseReportRow row;
  row.t = state.iteration;
  row.min_anchor_ratio = kInfinity;

  std::vector<char> is_anchor(inst.num_words(), 0);
  for (const auto& set : anchors_) {
    for (int j : set) is_anchor[j] = 1;
  }

  for (int i_est = 0; i_est < k; ++i_est) {
    const int i_true = perm_[i_est];
    for (int j : anchors_[i_true]) {
      row.min_anchor_ratio =
          std::min(row.min_anchor_ratio, state.beta(i_est, j) / inst.beta_true(i_true, j));
    }
    // Off-anchor: this estimated row's mass on anchors of other true topics.
    for (int other = 0; other < k; ++other) {
      if (other == i_true) continue;
      for (int j : anchors_[other]) {
        row.max_offanchor_ratio =
            std::max(row.max_offanchor_ratio, state.beta(i_est, j) / inst.beta_true(other, j));
      }
    }
    // Off-support discriminative words: beta* zero, not an anchor of anyone.
    for (int j = 0; j < inst.num_words(); ++j) {
      if (is_anchor[j] || inst.beta_true(i_true, j) > 0.0) continue;
      row.max_offsupport_entry = std::max(row.max_offsupport_entry, state.beta(i_est, j));
    }
  }

  int dominant_hits = 0;
  for (std::size_t d = 0; d < inst.docs.size(); ++d) {
    const int est_dom = state.gammas[d].dominant_topic();
    const int true_dom = inst.docs[d].truth->dominant_topic();
    if (est_dom >= 0 && true_dom >= 0 && perm_[est_dom] == true_dom) ++dominant_hits;
  }
  row.dominant_acc =
      inst.docs.empty() ? 1.0 : static_cast<double>(dominant_hits) / inst.docs.size();

  // Phase transitions: all tracked entries below zero_threshold * row max.
  double row_max = 0.0;
  for (int i = 0; i < k; ++i) {
    for (double v : state.beta.row(i)) row_max = std::max(row_max, v);
  }
  const double identified_zero = zero_threshold_ * row_max;
  if (report_.phase1_iteration < 0 && row.max_offanchor_ratio * 1.0 <= zero_threshold_) {
    report_.phase1_iteration = row.t;
  }
  if (report_.phase2_iteration < 0 && row.max_offsupport_entry <= identified_zero) {
    report_.phase2_iteration = row.t;
  }

  // The 2^-t anchor decay law with multiplicative slack, checked per step
  // until the ratio falls below the decay floor.
  if (prev_offanchor_ >= 0.0 && prev_offanchor_ > decay_floor_) {
    const double allowed = std::max(0.5 * decay_slack_ * prev_offanchor_, decay_floor_);
    if (row.max_offanchor_ratio > allowed && report_.offanchor_decay_ok) {
      report_.offanchor_decay_ok = false;
      report_.first_decay_violation_t = row.t;
    }
  }
  prev_offanchor_ = row.max_offanchor_ratio;

  report_.rows.push_back(row);
}

PhaseReport phase_monitor(const Instance& instance, const std::vector<int>& permutation,
                          const std::vector<InferenceState>& history) {
  PhaseMonitor monitor(instance, permutation);
  for (const auto& state : history) monitor.observe(state);
  return monitor.report();
}

}  // namespace tem
