#pragma once

#include <vector>

#include "tem/inference.hpp"
#include "tem/model.hpp"

namespace tem {

// For each topic, the index of a document with true proportion >= c_l on that
// topic, preferring the largest. Stands in for the user-supplied seed
// documents on synthetic instances. Throws naming the first topic with no
// qualifying document.
std::vector<int> select_seed_docs(const Instance& instance, double c_l);

// beta^0 row i = word frequencies of seed document i; words absent from the
// seed document are floored at zero_floor and the row renormalized, so every
// predicted frequency stays positive. No support enforcement: supports are
// expected to emerge over the run.
InferenceState seeded_init(const std::vector<int>& seed_docs, const std::vector<Document>& corpus,
                           double zero_floor = 1e-12);

struct PhaseReportRow {
  int t = 0;
  // max over topics i, anchors j of i, i' != i of beta^t(i', j) / beta*(i, j)
  double max_offanchor_ratio = 0.0;
  // min over topics i, anchors j of i of beta^t(i, j) / beta*(i, j)
  double min_anchor_ratio = 0.0;
  // max over entries with beta* = 0 at non-anchor words of beta^t(i, j)
  double max_offsupport_entry = 0.0;
  double dominant_acc = 0.0;
};

struct PhaseReport {
  std::vector<PhaseReportRow> rows;
  int phase1_iteration = -1;  // first t with every off-anchor entry "identified zero"
  int phase2_iteration = -1;  // first t with every off-support entry "identified zero"
  // Off-anchor ratio at most halves per step within this slack factor, up to
  // the decay floor (the 2^-t law).
  bool offanchor_decay_ok = true;
  int first_decay_violation_t = -1;
};

// Tracks anchor and discriminative word identification along a seeded run.
// Entries below zero_threshold * row max count as identified zeros.
class PhaseMonitor {
 public:
  PhaseMonitor(const Instance& instance, std::vector<int> permutation,
               double zero_threshold = 1e-8, double decay_slack = 1.2,
               double decay_floor = 1e-10);

  void observe(const InferenceState& state);
  const PhaseReport& report() const { return report_; }

 private:
  const Instance* instance_;
  std::vector<int> perm_;                  // est topic -> true topic
  std::vector<std::vector<int>> anchors_;  // per true topic
  double zero_threshold_;
  double decay_slack_;
  double decay_floor_;
  double prev_offanchor_ = -1.0;
  PhaseReport report_;
};

// Convenience wrapper over PhaseMonitor for a recorded state history.
PhaseReport phase_monitor(const Instance& instance, const std::vector<int>& permutation,
                          const std::vector<InferenceState>& history);

}  // namespace tem
