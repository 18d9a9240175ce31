#ifndef TOC_DATA_SYNTH_HPP
#define TOC_DATA_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "toc/core/types.hpp"

namespace toc::data {

// Synthetic paged documents with numbered section headings, rendered as
// pseudo-glyph word blocks. Heading depth controls font size, ink, and
// indentation so the hierarchy is recoverable from vision and layout alone;
// heading and body text draw from distinct vocabularies for the text signal.
struct SynthConfig {
  std::uint64_t seed = 1;
  int docs = 10;
  int page_width = 360;
  int page_height = 480;
  int max_depth = 3;
  int min_sections = 3;   // top-level sections per document
  int max_sections = 5;
  int max_children = 3;   // subsections per node
  int max_headings = 24;  // hard cap per document
  double child_prob = 0.55;
  double split_prob = 0.15;  // heading rendered as two lines sharing an id
  int min_body_lines = 1;
  int max_body_lines = 4;
};

struct SynthDocument {
  toc::Document doc;
  toc::ToCTree tree;
};

// Pure function of (config, index): regenerating any document individually
// gives byte-identical pages and entities.
SynthDocument make_document(const SynthConfig& cfg, int index);

// Writes cfg.docs documents under out_dir ("synth-0000", ...), returns ids.
std::vector<std::string> write_corpus(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace toc::data

#endif
