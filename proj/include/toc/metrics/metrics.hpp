#ifndef TOC_METRICS_METRICS_HPP
#define TOC_METRICS_METRICS_HPP

#include <string>
#include <vector>

#include "toc/core/types.hpp"

namespace toc::metrics {

// Lowercases, trims, and collapses internal whitespace runs to single spaces.
std::string normalize_label(const std::string& s);

struct TedOptions {
  // When set, relabel cost is the normalized character edit distance between
  // the two labels instead of the 0/1 exact-match cost.
  bool graded_relabel = false;
};

// Ordered tree edit distance (delete / insert / relabel, unit costs) over
// normalized labels. Integral under the default 0/1 relabel cost.
double tree_edit_distance(const toc::ToCTree& a, const toc::ToCTree& b,
                          const TedOptions& opts = {});

// 1 - dist / max(|a|, |b|) with the root included in the node counts.
double teds(const toc::ToCTree& a, const toc::ToCTree& b, const TedOptions& opts = {});

struct PairTuple {
  int current = 0;    // doc_order of the current heading entity
  int reference = 0;  // doc_order of the reference entity, -1 for the root
  toc::Relation relation = toc::Relation::Parent;
  bool operator==(const PairTuple&) const = default;
};

// Maps relation steps into doc_order space. heading_doc_orders[k-1] is the
// doc_order of heading k.
std::vector<PairTuple> steps_to_pairs(const std::vector<toc::RelationStep>& steps,
                                      const std::vector<int>& heading_doc_orders);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Exact-match F1 over (current, reference, relation) tuples.
Prf pair_f1(const std::vector<PairTuple>& predicted, const std::vector<PairTuple>& gold);

// Binary detection scores over aligned per-entity flags. An empty positive
// prediction set scores precision 0.
Prf detection_prf(const std::vector<bool>& predicted, const std::vector<bool>& gold);

// Word error rate: token-level edit distance divided by the reference token
// count. Throws std::invalid_argument when the reference has no tokens.
double wer(const std::string& hyp, const std::string& ref);

struct ScoreReport {
  double teds = 0.0;
  Prf pair;
  Prf detection;
  int documents = 0;
};

}  // namespace toc::metrics

#endif
