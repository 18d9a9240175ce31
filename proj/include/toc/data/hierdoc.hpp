#ifndef TOC_DATA_HIERDOC_HPP
#define TOC_DATA_HIERDOC_HPP

#include <optional>
#include <string>
#include <vector>

#include "toc/core/types.hpp"

namespace toc::data {

// On-disk document layout, one directory per document:
//   meta.json      format_version, doc_id, pages (width/height, optional image)
//   page PNGs      referenced from meta.json, 8-bit grayscale, ink on black
//   entities.jsonl one text line per row: page, content, box, heading, id
//   toc.json       optional gold tree {text, children}
struct LabeledDocument {
  toc::Document doc;
  std::optional<toc::ToCTree> tree;
};

void save_document(const std::string& dir, const toc::Document& doc,
                   const toc::ToCTree* tree);
LabeledDocument load_document(const std::string& dir);

// Immediate subdirectories of root that contain meta.json, sorted by name.
std::vector<std::string> list_documents(const std::string& root);

// Assigns heading flags and dotted ids to entities by aligning gold tree
// node texts against entity contents in reading order. A node may match one
// entity or the concatenation of two consecutive ones (split heading); a
// match requires word error rate <= max_wer. Unmatched nodes throw, or skip
// the node's subtree with a warning when lenient is set.
struct AlignResult {
  toc::Document doc;
  std::vector<std::string> warnings;
};

AlignResult align_tree(const toc::Document& doc, const toc::ToCTree& tree,
                       double max_wer = 0.2, bool lenient = false);

}  // namespace toc::data

#endif
