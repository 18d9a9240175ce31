#ifndef TOC_TREEOPS_TREEOPS_HPP
#define TOC_TREEOPS_TREEOPS_HPP

#include <string>
#include <vector>

#include "toc/core/types.hpp"

namespace toc::treeops {

// Builds a ToC tree from per-heading relation steps. texts[k-1] is the
// trimmed text of heading k; doc_orders[k-1] its entity index (optional,
// defaults to k-1). PARENT attaches under the reference node, SIBLING after
// it under the same parent, IDENTITY appends the text to the reference's
// node (space-joined split heading).
toc::ToCTree tree_from_steps(const std::vector<toc::RelationStep>& steps,
                             const std::vector<std::string>& texts,
                             const std::vector<int>& doc_orders = {});

// Derives gold relation steps from the dotted ids carried by heading
// entities. Consecutive heading entities with equal ids form an identity
// group; parent/sibling references point at the first fragment of the
// referenced group. Throws DataError on inconsistent annotations.
std::vector<toc::RelationStep> steps_from_ids(const toc::Document& doc);

// Per-heading depth labels (id path length), clamped to c_max.
std::vector<int> depths_from_ids(const toc::Document& doc, int c_max = 5);

// Depth-stack baseline: each heading attaches under the nearest preceding
// heading of smaller depth. Depth jumps greater than +1 are clamped to
// previous depth + 1; a note is appended to *warnings when provided.
toc::ToCTree tree_from_depths(const std::vector<int>& depths,
                              const std::vector<std::string>& texts, int c_max = 5,
                              std::vector<std::string>* warnings = nullptr);

// Maximum node depth below the root (root itself is depth 0).
int tree_depth(const toc::ToCTree& tree);

}  // namespace toc::treeops

#endif
