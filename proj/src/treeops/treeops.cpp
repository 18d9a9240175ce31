#include "toc/treeops/treeops.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace toc::treeops {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct ArenaNode {
  std::string text;
  std::vector<int> children;
  std::vector<int> entity_refs;
  int parent = -1;
};

toc::ToCNode materialize(const std::vector<ArenaNode>& arena, int idx) {
  toc::ToCNode out;
  out.text = arena[idx].text;
  out.entity_refs = arena[idx].entity_refs;
  out.children.reserve(arena[idx].children.size());
  for (int c : arena[idx].children) out.children.push_back(materialize(arena, c));
  return out;
}

}  // namespace

toc::ToCTree tree_from_steps(const std::vector<toc::RelationStep>& steps,
                             const std::vector<std::string>& texts,
                             const std::vector<int>& doc_orders) {
  toc::validate_steps(steps);
  const int c = static_cast<int>(steps.size());
  if (static_cast<int>(texts.size()) != c)
    throw toc::DataError("tree_from_steps: texts size does not match step count");
  if (!doc_orders.empty() && static_cast<int>(doc_orders.size()) != c)
    throw toc::DataError("tree_from_steps: doc_orders size does not match step count");

  std::vector<ArenaNode> arena(1);  // index 0 is the root
  std::vector<int> node_of(c + 1, -1);
  node_of[0] = 0;

  for (int s = 1; s <= c; ++s) {
    const auto& step = steps[s - 1];
    if (step.current != s)
      throw toc::DataError("tree_from_steps: step " + std::to_string(s) +
                           " carries current index " + std::to_string(step.current));
    const int ref_node = node_of[step.reference];
    if (ref_node < 0)
      throw toc::DataError("tree_from_steps: reference " + std::to_string(step.reference) +
                           " of heading " + std::to_string(s) + " was never placed");
    const std::string text = trim(texts[s - 1]);
    const int entity_ref = doc_orders.empty() ? s - 1 : doc_orders[s - 1];

    switch (step.relation) {
      case toc::Relation::Parent: {
        arena.push_back({text, {}, {entity_ref}, ref_node});
        const int idx = static_cast<int>(arena.size()) - 1;
        arena[ref_node].children.push_back(idx);
        node_of[s] = idx;
        break;
      }
      case toc::Relation::Sibling: {
        const int parent = arena[ref_node].parent;
        if (parent < 0)
          throw toc::DataError("tree_from_steps: heading " + std::to_string(s) +
                               " declared sibling of the root");
        arena.push_back({text, {}, {entity_ref}, parent});
        const int idx = static_cast<int>(arena.size()) - 1;
        arena[parent].children.push_back(idx);
        node_of[s] = idx;
        break;
      }
      case toc::Relation::Identity: {
        ArenaNode& target = arena[ref_node];
        if (!text.empty()) {
          if (!target.text.empty()) target.text += " ";
          target.text += text;
        }
        target.entity_refs.push_back(entity_ref);
        node_of[s] = ref_node;
        break;
      }
    }
  }

  toc::ToCTree tree;
  tree.root = materialize(arena, 0);
  return tree;
}

std::vector<toc::RelationStep> steps_from_ids(const toc::Document& doc) {
  const std::vector<int> heads = toc::heading_indices(doc);
  const int c = static_cast<int>(heads.size());
  std::vector<std::vector<int>> path(c + 1);
  for (int k = 1; k <= c; ++k) {
    const toc::Entity& e = doc.entities[heads[k - 1]];
    if (!e.id)
      throw toc::DataError("heading entity " + std::to_string(heads[k - 1]) + " in " +
                           doc.doc_id + " carries no id");
    path[k] = toc::parse_dotted_id(*e.id);
  }

  // canon[k]: first fragment of k's identity group.
  std::vector<int> canon(c + 1, 0);
  for (int k = 1; k <= c; ++k)
    canon[k] = (k > 1 && path[k] == path[k - 1]) ? canon[k - 1] : k;

  auto is_parent_of = [](const std::vector<int>& pa, const std::vector<int>& pb) {
    return pb.size() == pa.size() + 1 && std::equal(pa.begin(), pa.end(), pb.begin());
  };
  auto is_earlier_sibling = [](const std::vector<int>& pa, const std::vector<int>& pb) {
    return pa.size() == pb.size() && !pa.empty() &&
           std::equal(pa.begin(), pa.end() - 1, pb.begin()) && pa.back() < pb.back();
  };

  std::vector<toc::RelationStep> steps;
  steps.reserve(c);
  for (int k = 1; k <= c; ++k) {
    if (canon[k] != k) {
      steps.push_back({k, k - 1, toc::Relation::Identity});
      continue;
    }
    int ref = -1;
    toc::Relation rel = toc::Relation::Parent;
    for (int j = k - 1; j >= 1 && ref < 0; --j) {
      if (path[j] == path[k])
        throw toc::DataError("duplicate heading id " + toc::format_dotted_id(path[k]) +
                             " in " + doc.doc_id + " does not form a split heading");
      if (is_parent_of(path[j], path[k])) {
        ref = canon[j];
        rel = toc::Relation::Parent;
      } else if (is_earlier_sibling(path[j], path[k])) {
        ref = canon[j];
        rel = toc::Relation::Sibling;
      }
    }
    if (ref < 0) {
      if (path[k].size() == 1) {
        ref = 0;  // top-level heading hangs off the root
        rel = toc::Relation::Parent;
      } else {
        throw toc::DataError("heading id " + toc::format_dotted_id(path[k]) + " in " +
                             doc.doc_id + " has no preceding parent or sibling");
      }
    }
    steps.push_back({k, ref, rel});
  }
  return steps;
}

std::vector<int> depths_from_ids(const toc::Document& doc, int c_max) {
  if (c_max < 1) throw std::invalid_argument("depths_from_ids: c_max must be positive");
  std::vector<int> out;
  for (int idx : toc::heading_indices(doc)) {
    const toc::Entity& e = doc.entities[idx];
    if (!e.id)
      throw toc::DataError("heading entity " + std::to_string(idx) + " in " + doc.doc_id +
                           " carries no id");
    const auto p = toc::parse_dotted_id(*e.id);
    out.push_back(std::min<int>(static_cast<int>(p.size()), c_max));
  }
  return out;
}

toc::ToCTree tree_from_depths(const std::vector<int>& depths,
                              const std::vector<std::string>& texts, int c_max,
                              std::vector<std::string>* warnings) {
  if (depths.size() != texts.size())
    throw toc::DataError("tree_from_depths: depths and texts differ in length");
  std::vector<ArenaNode> arena(1);
  // Stack of (depth, arena index); the root sits at depth 0.
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int prev_depth = 0;
  for (int k = 0; k < static_cast<int>(depths.size()); ++k) {
    int d = std::clamp(depths[k], 1, c_max);
    if (d > prev_depth + 1) {
      if (warnings)
        warnings->push_back("heading " + std::to_string(k + 1) + ": depth " +
                            std::to_string(d) + " clamped to " +
                            std::to_string(prev_depth + 1));
      d = prev_depth + 1;
    }
    while (stack.back().first >= d) stack.pop_back();
    const int parent = stack.back().second;
    arena.push_back({trim(texts[k]), {}, {k}, parent});
    const int idx = static_cast<int>(arena.size()) - 1;
    arena[parent].children.push_back(idx);
    stack.emplace_back(d, idx);
    prev_depth = d;
  }
  toc::ToCTree tree;
  tree.root = materialize(arena, 0);
  return tree;
}

int tree_depth(const toc::ToCTree& tree) {
  std::function<int(const toc::ToCNode&)> rec = [&](const toc::ToCNode& n) {
    int best = 0;
    for (const auto& c : n.children) best = std::max(best, 1 + rec(c));
    return best;
  };
  return rec(tree.root);
}

}  // namespace toc::treeops
