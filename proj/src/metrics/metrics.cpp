#include "toc/metrics/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace toc::metrics {
namespace {

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

// Levenshtein over any sequence with equality, two-row DP.
template <class Seq>
int edit_distance(const Seq& a, const Seq& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  std::vector<int> prev(m + 1), cur(m + 1);
  for (int j = 0; j <= m; ++j) prev[j] = j;
  for (int i = 1; i <= n; ++i) {
    cur[0] = i;
    for (int j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Flattened postorder view of a tree for the Zhang-Shasha recurrence.
struct PostOrder {
  std::vector<std::string> label;  // 1-based
  std::vector<int> lml;            // leftmost leaf descendant, 1-based
  std::vector<int> keyroots;
  int n = 0;
};

PostOrder flatten(const toc::ToCTree& tree) {
  PostOrder po;
  po.label.emplace_back();  // slot 0 unused
  po.lml.push_back(0);
  std::vector<int> lml_of;  // parallel to postorder indices
  // Iterative postorder to avoid depth limits on degenerate chains.
  struct Frame {
    const toc::ToCNode* node;
    size_t next_child = 0;
    int first_leaf = -1;
  };
  std::vector<Frame> stack{{&tree.root}};
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.node->children.size()) {
      const toc::ToCNode* child = &f.node->children[f.next_child];
      ++f.next_child;
      stack.push_back({child});  // invalidates f
      continue;
    }
    ++po.n;
    const int id = po.n;
    const int leaf = f.first_leaf < 0 ? id : f.first_leaf;
    po.label.push_back(normalize_label(f.node->text));
    po.lml.push_back(leaf);
    stack.pop_back();
    if (!stack.empty() && stack.back().first_leaf < 0) stack.back().first_leaf = leaf;
  }
  for (int i = 1; i <= po.n; ++i) {
    bool keyroot = true;
    for (int j = i + 1; j <= po.n && keyroot; ++j)
      if (po.lml[j] == po.lml[i]) keyroot = false;
    if (keyroot) po.keyroots.push_back(i);
  }
  return po;
}

double relabel_cost(const std::string& a, const std::string& b, const TedOptions& opts) {
  if (a == b) return 0.0;
  if (!opts.graded_relabel) return 1.0;
  const int denom = static_cast<int>(std::max(a.size(), b.size()));
  if (denom == 0) return 0.0;
  return static_cast<double>(edit_distance(a, b)) / denom;
}

}  // namespace

std::string normalize_label(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

double tree_edit_distance(const toc::ToCTree& a, const toc::ToCTree& b,
                          const TedOptions& opts) {
  const PostOrder ta = flatten(a), tb = flatten(b);
  std::vector<std::vector<double>> td(ta.n + 1, std::vector<double>(tb.n + 1, 0.0));

  // Forest distance scratch; indices are postorder positions offset so that
  // fd[0][*] / fd[*][0] denote the empty forest.
  std::vector<std::vector<double>> fd(ta.n + 2, std::vector<double>(tb.n + 2, 0.0));

  for (int x : ta.keyroots) {
    for (int y : tb.keyroots) {
      const int li = ta.lml[x], lj = tb.lml[y];
      const int ni = x - li + 1, nj = y - lj + 1;
      fd[0][0] = 0.0;
      for (int i = 1; i <= ni; ++i) fd[i][0] = fd[i - 1][0] + 1.0;
      for (int j = 1; j <= nj; ++j) fd[0][j] = fd[0][j - 1] + 1.0;
      for (int i = 1; i <= ni; ++i) {
        const int pi = li + i - 1;
        for (int j = 1; j <= nj; ++j) {
          const int pj = lj + j - 1;
          if (ta.lml[pi] == li && tb.lml[pj] == lj) {
            // Both prefixes are whole trees rooted at pi / pj.
            fd[i][j] = std::min({fd[i - 1][j] + 1.0, fd[i][j - 1] + 1.0,
                                 fd[i - 1][j - 1] +
                                     relabel_cost(ta.label[pi], tb.label[pj], opts)});
            td[pi][pj] = fd[i][j];
          } else {
            const int ii = ta.lml[pi] - li;  // forest prefix excluding subtree(pi)
            const int jj = tb.lml[pj] - lj;
            fd[i][j] = std::min({fd[i - 1][j] + 1.0, fd[i][j - 1] + 1.0,
                                 fd[ii][jj] + td[pi][pj]});
          }
        }
      }
    }
  }
  return td[ta.n][tb.n];
}

double teds(const toc::ToCTree& a, const toc::ToCTree& b, const TedOptions& opts) {
  const double dist = tree_edit_distance(a, b, opts);
  const double denom = static_cast<double>(std::max(toc::node_count(a), toc::node_count(b)));
  return 1.0 - dist / denom;
}

std::vector<PairTuple> steps_to_pairs(const std::vector<toc::RelationStep>& steps,
                                      const std::vector<int>& heading_doc_orders) {
  toc::validate_steps(steps);
  if (steps.size() != heading_doc_orders.size())
    throw std::invalid_argument("steps_to_pairs: doc_order list does not match step count");
  std::vector<PairTuple> out;
  out.reserve(steps.size());
  for (const auto& s : steps) {
    PairTuple t;
    t.current = heading_doc_orders[s.current - 1];
    t.reference = s.reference == 0 ? -1 : heading_doc_orders[s.reference - 1];
    t.relation = s.relation;
    out.push_back(t);
  }
  return out;
}

Prf pair_f1(const std::vector<PairTuple>& predicted, const std::vector<PairTuple>& gold) {
  std::map<std::tuple<int, int, int>, int> want;
  for (const auto& t : gold) ++want[{t.current, t.reference, static_cast<int>(t.relation)}];
  int hits = 0;
  for (const auto& t : predicted) {
    auto it = want.find({t.current, t.reference, static_cast<int>(t.relation)});
    if (it != want.end() && it->second > 0) {
      --it->second;
      ++hits;
    }
  }
  Prf r;
  r.precision = predicted.empty() ? 0.0 : static_cast<double>(hits) / predicted.size();
  r.recall = gold.empty() ? 0.0 : static_cast<double>(hits) / gold.size();
  if (predicted.empty() && gold.empty()) r.precision = r.recall = 1.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

Prf detection_prf(const std::vector<bool>& predicted, const std::vector<bool>& gold) {
  if (predicted.size() != gold.size())
    throw std::invalid_argument("detection_prf: prediction and gold lengths differ");
  int tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && gold[i]) ++tp;
    else if (predicted[i]) ++fp;
    else if (gold[i]) ++fn;
  }
  Prf r;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 1.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

double wer(const std::string& hyp, const std::string& ref) {
  const auto h = tokens(hyp), r = tokens(ref);
  if (r.empty()) throw std::invalid_argument("wer: reference has no tokens");
  return static_cast<double>(edit_distance(h, r)) / static_cast<double>(r.size());
}

}  // namespace toc::metrics
