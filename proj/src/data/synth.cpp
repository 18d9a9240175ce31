#include "toc/data/synth.hpp"

#include <algorithm>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

#include "toc/data/hierdoc.hpp"
#include "toc/data/raster.hpp"
#include "toc/treeops/treeops.hpp"

namespace toc::data {
namespace {

const std::vector<std::string> kHeadingWords = {
    "overview",  "design",   "analysis", "results",  "method",   "baseline",
    "training",  "encoding", "decoding", "pipeline", "datasets", "features",
    "structure", "ranking",  "fusion",   "context",  "budget",   "sampling",
    "metrics",   "ablation", "variants", "history",  "outlook",  "summary",
    "appendix"};

const std::vector<std::string> kBodyWords = {
    "the",     "a",       "of",      "and",    "to",      "in",     "is",
    "that",    "with",    "for",     "are",    "this",    "on",     "by",
    "be",      "from",    "these",   "each",   "between", "values", "lines",
    "process", "further", "section", "shown"};

struct HeadingSpec {
  std::vector<int> path;
  std::vector<std::string> words;  // includes the dotted id as the first word
};

void build_specs(std::mt19937_64& rng, const SynthConfig& cfg, std::vector<int>& path,
                 std::vector<HeadingSpec>& out) {
  const int depth = static_cast<int>(path.size());
  int count = 0;
  if (depth == 0) {
    count = std::uniform_int_distribution<int>(cfg.min_sections, cfg.max_sections)(rng);
  } else if (depth < cfg.max_depth && std::bernoulli_distribution(cfg.child_prob)(rng)) {
    count = std::uniform_int_distribution<int>(1, cfg.max_children)(rng);
  }
  for (int i = 1; i <= count; ++i) {
    if (static_cast<int>(out.size()) >= cfg.max_headings) return;
    path.push_back(i);
    HeadingSpec spec;
    spec.path = path;
    spec.words.push_back(toc::format_dotted_id(path));
    const int nwords = std::uniform_int_distribution<int>(2, 3)(rng);
    for (int w = 0; w < nwords; ++w)
      spec.words.push_back(kHeadingWords[std::uniform_int_distribution<size_t>(
          0, kHeadingWords.size() - 1)(rng)]);
    out.push_back(spec);
    build_specs(rng, cfg, path, out);
    path.pop_back();
  }
}

struct Renderer {
  const SynthConfig& cfg;
  static constexpr int kMargin = 20;

  std::vector<toc::PageMeta> pages;
  std::vector<toc::Entity> entities;
  std::shared_ptr<toc::GrayImage> raster;
  int y = kMargin;

  explicit Renderer(const SynthConfig& c) : cfg(c) { new_page(); }

  void new_page() {
    raster = std::make_shared<toc::GrayImage>(
        toc::GrayImage::blank(cfg.page_width, cfg.page_height));
    toc::PageMeta pm;
    pm.width = cfg.page_width;
    pm.height = cfg.page_height;
    pm.raster = raster;
    pages.push_back(pm);
    y = kMargin;
  }

  void ensure_room(int line_h) {
    if (y + line_h > cfg.page_height - kMargin) new_page();
  }

  void advance(int gap) {
    // Inter-block gaps never spill onto a fresh page by themselves.
    y = std::min(y + gap, cfg.page_height - kMargin);
  }

  // Draws one text line as word blocks; words that do not fit are dropped
  // (the first always fits). Returns the emitted entity index.
  size_t draw_line(const std::vector<std::string>& words, int x0, int font_h,
                   std::uint8_t ink, bool heading, const std::string* id) {
    ensure_room(font_h);
    const int cw = std::max(2, font_h * 11 / 20);
    int x = x0;
    std::string content;
    for (const auto& w : words) {
      const int bw = static_cast<int>(std::min<size_t>(w.size(), 12)) * cw;
      if (x + bw > cfg.page_width - kMargin && !content.empty()) break;
      fill_rect(*raster, x, y, x + bw, y + font_h, ink);
      if (!content.empty()) content += ' ';
      content += w;
      x += bw + cw;
    }
    toc::Entity e;
    e.content = content;
    e.page = static_cast<int>(pages.size()) - 1;
    e.box = {static_cast<double>(x0), static_cast<double>(y),
             static_cast<double>(x - cw), static_cast<double>(y + font_h)};
    e.heading = heading;
    if (id) e.id = *id;
    entities.push_back(std::move(e));
    y += font_h + 5;
    return entities.size() - 1;
  }
};

int heading_font(int depth) { return std::max(9, 16 - 2 * depth); }
std::uint8_t heading_ink(int depth) {
  return static_cast<std::uint8_t>(std::max(180, 255 - 25 * (depth - 1)));
}

}  // namespace

SynthDocument make_document(const SynthConfig& cfg, int index) {
  if (cfg.page_width < 80 || cfg.page_height < 80)
    throw DataError("synth: page smaller than 80x80");
  std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1));

  std::vector<HeadingSpec> specs;
  std::vector<int> path;
  build_specs(rng, cfg, path, specs);
  if (specs.empty()) {
    specs.push_back({{1}, {"1", kHeadingWords[0], kHeadingWords[1]}});
  }

  Renderer r(cfg);
  auto body_paragraph = [&](int min_lines, int max_lines) {
    const int lines = std::uniform_int_distribution<int>(min_lines, max_lines)(rng);
    for (int l = 0; l < lines; ++l) {
      std::vector<std::string> words;
      const int n = std::uniform_int_distribution<int>(4, 8)(rng);
      for (int w = 0; w < n; ++w)
        words.push_back(kBodyWords[std::uniform_int_distribution<size_t>(
            0, kBodyWords.size() - 1)(rng)]);
      r.draw_line(words, Renderer::kMargin + 10, 8, 120, false, nullptr);
      r.advance(2);
    }
  };

  body_paragraph(1, 2);
  for (const auto& spec : specs) {
    const int depth = static_cast<int>(spec.path.size());
    const int font = heading_font(depth);
    const std::uint8_t ink = heading_ink(depth);
    const int x0 = Renderer::kMargin + (depth - 1) * 16;
    const std::string id = toc::format_dotted_id(spec.path);

    r.advance(14 - 2 * depth);
    const bool split =
        spec.words.size() >= 3 && std::bernoulli_distribution(cfg.split_prob)(rng);
    if (split) {
      const size_t cut =
          std::uniform_int_distribution<size_t>(1, spec.words.size() - 1)(rng);
      r.draw_line({spec.words.begin(), spec.words.begin() + cut}, x0, font, ink, true, &id);
      r.draw_line({spec.words.begin() + cut, spec.words.end()}, x0, font, ink, true, &id);
    } else {
      r.draw_line(spec.words, x0, font, ink, true, &id);
    }
    r.advance(3);
    body_paragraph(cfg.min_body_lines, cfg.max_body_lines);
  }

  std::ostringstream name;
  name << "synth-" << std::setw(4) << std::setfill('0') << index;

  SynthDocument out;
  out.doc = toc::order_entities(std::move(r.entities), std::move(r.pages), name.str());

  const auto steps = toc::treeops::steps_from_ids(out.doc);
  std::vector<std::string> texts;
  std::vector<int> orders;
  for (int i : toc::heading_indices(out.doc)) {
    texts.push_back(out.doc.entities[i].content);
    orders.push_back(i);
  }
  out.tree = toc::treeops::tree_from_steps(steps, texts, orders);
  return out;
}

std::vector<std::string> write_corpus(const SynthConfig& cfg, const std::string& out_dir) {
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.docs; ++i) {
    const SynthDocument sd = make_document(cfg, i);
    save_document(out_dir + "/" + sd.doc.doc_id, sd.doc, &sd.tree);
    ids.push_back(sd.doc.doc_id);
  }
  return ids;
}

}  // namespace toc::data
