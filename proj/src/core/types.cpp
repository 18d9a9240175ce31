#include "toc/core/types.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace toc {

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Parent: return "parent";
    case Relation::Sibling: return "sibling";
    case Relation::Identity: return "identity";
  }
  return "?";
}

Relation relation_from_string(const std::string& s) {
  if (s == "parent") return Relation::Parent;
  if (s == "sibling") return Relation::Sibling;
  if (s == "identity") return Relation::Identity;
  throw DataError("unknown relation: '" + s + "'");
}

void validate_steps(const std::vector<RelationStep>& steps) {
  for (const auto& st : steps) {
    if (st.current < 1)
      throw DataError("relation step has non-positive current index " + std::to_string(st.current));
    if (st.reference >= st.current)
      throw DataError("relation step " + std::to_string(st.current) +
                      " references a non-preceding heading " + std::to_string(st.reference));
    if (st.reference < 0)
      throw DataError("relation step " + std::to_string(st.current) + " has negative reference");
    if (st.relation == Relation::Identity && st.reference < 1)
      throw DataError("relation step " + std::to_string(st.current) +
                      " marks identity with the root");
  }
}

int node_count(const ToCNode& node) {
  int n = 1;
  for (const auto& c : node.children) n += node_count(c);
  return n;
}

int node_count(const ToCTree& tree) { return node_count(tree.root); }

bool trees_equal(const ToCNode& a, const ToCNode& b) {
  if (a.text != b.text || a.children.size() != b.children.size()) return false;
  for (size_t i = 0; i < a.children.size(); ++i)
    if (!trees_equal(a.children[i], b.children[i])) return false;
  return true;
}

bool trees_equal(const ToCTree& a, const ToCTree& b) { return trees_equal(a.root, b.root); }

std::vector<int> parse_dotted_id(const std::string& id) {
  if (id.empty()) throw DataError("empty heading id");
  std::vector<int> path;
  size_t pos = 0;
  while (pos <= id.size()) {
    size_t dot = id.find('.', pos);
    if (dot == std::string::npos) dot = id.size();
    if (dot == pos) throw DataError("malformed heading id '" + id + "': empty segment");
    for (size_t i = pos; i < dot; ++i)
      if (!std::isdigit(static_cast<unsigned char>(id[i])))
        throw DataError("malformed heading id '" + id + "': non-digit segment");
    int v = 0;
    try {
      v = std::stoi(id.substr(pos, dot - pos));
    } catch (const std::exception&) {
      throw DataError("malformed heading id '" + id + "': segment out of range");
    }
    if (v <= 0) throw DataError("malformed heading id '" + id + "': non-positive segment");
    path.push_back(v);
    if (dot == id.size()) break;
    pos = dot + 1;
  }
  return path;
}

std::string format_dotted_id(const std::vector<int>& path) {
  std::ostringstream os;
  for (size_t i = 0; i < path.size(); ++i) {
    if (i) os << '.';
    os << path[i];
  }
  return os.str();
}

namespace {

std::string describe_entity(const Entity& e, size_t input_idx) {
  std::ostringstream os;
  os << "entity #" << input_idx << " (page " << e.page << ", \""
     << e.content.substr(0, 40) << "\")";
  return os.str();
}

}  // namespace

Document order_entities(std::vector<Entity> entities, std::vector<PageMeta> pages,
                        std::string doc_id) {
  for (size_t i = 0; i < entities.size(); ++i) {
    const Entity& e = entities[i];
    if (!e.box.well_formed())
      throw DataError("degenerate box for " + describe_entity(e, i));
    if (e.page < 0 || static_cast<size_t>(e.page) >= pages.size())
      throw DataError("page index out of range for " + describe_entity(e, i));
    const PageMeta& pg = pages[e.page];
    if (e.box.x0 < 0 || e.box.y0 < 0 || e.box.x1 > pg.width || e.box.y1 > pg.height)
      throw DataError("box outside page bounds for " + describe_entity(e, i));
    if (e.heading != e.id.has_value())
      throw DataError("heading flag and id disagree for " + describe_entity(e, i));
    if (e.id) parse_dotted_id(*e.id);  // malformed ids fail at load time
  }

  std::stable_sort(entities.begin(), entities.end(), [](const Entity& a, const Entity& b) {
    if (a.page != b.page) return a.page < b.page;
    if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
    return a.box.x0 < b.box.x0;
  });
  for (size_t i = 0; i < entities.size(); ++i) entities[i].doc_order = static_cast<int>(i);

  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.pages = std::move(pages);
  doc.entities = std::move(entities);
  return doc;
}

std::vector<int> heading_indices(const Document& doc) {
  std::vector<int> idx;
  for (size_t i = 0; i < doc.entities.size(); ++i)
    if (doc.entities[i].heading) idx.push_back(static_cast<int>(i));
  return idx;
}

}  // namespace toc
