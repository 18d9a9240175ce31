#ifndef TOC_CORE_TYPES_HPP
#define TOC_CORE_TYPES_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace toc {

// Raised for malformed or inconsistent input data. The CLI maps this to
// exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// 8-bit grayscale raster, row-major. 0 = background (white page),
// 255 = full ink. Stored inverted relative to screen convention so that
// an empty page is all zeros.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width

  std::uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }

  static GrayImage blank(int w, int h) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<size_t>(w) * h, 0);
    return img;
  }
};

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool well_formed() const { return x0 < x1 && y0 < y1; }
};

// One text line of a document. `heading` is true iff the line is (part of)
// a section heading, in which case `id` holds its dotted hierarchy path
// (e.g. "2.2.1"). `doc_order` is assigned by order_entities.
struct Entity {
  std::string content;
  int page = 0;
  Box box;
  bool heading = false;
  std::optional<std::string> id;
  int doc_order = -1;
};

struct PageMeta {
  double width = 0;
  double height = 0;
  std::shared_ptr<const GrayImage> raster;  // may be null (no image supplied)
};

struct Document {
  std::string doc_id;
  std::vector<PageMeta> pages;
  std::vector<Entity> entities;  // sorted by (page, y0, x0), doc_order 0..N-1
};

enum class Relation { Parent, Sibling, Identity };

const char* to_string(Relation r);
Relation relation_from_string(const std::string& s);

// One decoder output step: heading `current` (1-based position in the
// heading sequence) attaches to heading `reference` (0 = virtual root)
// with the given relation.
struct RelationStep {
  int current = 0;
  int reference = 0;
  Relation relation = Relation::Parent;
  bool operator==(const RelationStep&) const = default;
};

// Checks reference < current and that identity never points at the root.
void validate_steps(const std::vector<RelationStep>& steps);

struct ToCNode {
  std::string text;
  std::vector<ToCNode> children;
  std::vector<int> entity_refs;  // doc_order of merged heading entities
};

struct ToCTree {
  ToCNode root;  // virtual document node; text empty, no entity_refs
};

// Number of nodes including the root.
int node_count(const ToCTree& tree);
int node_count(const ToCNode& node);

// Structural + label equality (exact texts, exact child order).
bool trees_equal(const ToCNode& a, const ToCNode& b);
bool trees_equal(const ToCTree& a, const ToCTree& b);

// Parses a dotted hierarchy path such as "2.2.1" into {2, 2, 1}.
// Throws DataError on empty segments, non-digits or non-positive parts.
std::vector<int> parse_dotted_id(const std::string& id);
std::string format_dotted_id(const std::vector<int>& path);

// Validates every entity (well-formed box inside its page, heading <=> id,
// parsable ids), sorts by (page, y0, x0) keeping input order for exact
// ties, and assigns doc_order 0..N-1.
Document order_entities(std::vector<Entity> entities, std::vector<PageMeta> pages,
                        std::string doc_id = "");

// Indices (into doc.entities) of heading entities, in document order.
std::vector<int> heading_indices(const Document& doc);

}  // namespace toc

#endif
