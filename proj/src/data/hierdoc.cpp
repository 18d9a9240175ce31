#include "toc/data/hierdoc.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "toc/data/raster.hpp"
#include "toc/metrics/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace toc::data {
namespace {

constexpr int kFormatVersion = 1;

json tree_to_json(const toc::ToCNode& node) {
  json j;
  j["text"] = node.text;
  j["children"] = json::array();
  for (const auto& c : node.children) j["children"].push_back(tree_to_json(c));
  return j;
}

toc::ToCNode tree_from_json(const json& j) {
  if (!j.is_object() || !j.contains("text"))
    throw toc::DataError("toc tree node must be an object with text");
  toc::ToCNode node;
  node.text = j.at("text").get<std::string>();
  if (j.contains("children")) {
    if (!j.at("children").is_array())
      throw toc::DataError("toc tree children must be an array");
    for (const auto& c : j.at("children")) node.children.push_back(tree_from_json(c));
  }
  return node;
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw toc::DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw toc::DataError("malformed json in " + path.string() + ": " + e.what());
  }
  return j;
}

void check_version(const json& j, const fs::path& path) {
  if (!j.contains("format_version") || !j.at("format_version").is_number_integer())
    throw toc::DataError("missing format_version in " + path.string());
  const int v = j.at("format_version").get<int>();
  if (v != kFormatVersion)
    throw toc::DataError("unsupported format_version " + std::to_string(v) + " in " +
                         path.string());
}

}  // namespace

void save_document(const std::string& dir, const toc::Document& doc,
                   const toc::ToCTree* tree) {
  fs::create_directories(dir);
  const fs::path base(dir);

  json meta;
  meta["format_version"] = kFormatVersion;
  meta["doc_id"] = doc.doc_id;
  meta["pages"] = json::array();
  for (size_t p = 0; p < doc.pages.size(); ++p) {
    json pg;
    pg["width"] = doc.pages[p].width;
    pg["height"] = doc.pages[p].height;
    if (doc.pages[p].raster) {
      const std::string name = "page-" + std::to_string(p) + ".png";
      write_png((base / name).string(), *doc.pages[p].raster);
      pg["image"] = name;
    }
    meta["pages"].push_back(pg);
  }
  std::ofstream(base / "meta.json") << meta.dump(2) << "\n";

  std::ofstream ents(base / "entities.jsonl");
  for (const auto& e : doc.entities) {
    json je;
    je["page"] = e.page;
    je["content"] = e.content;
    je["box"] = {e.box.x0, e.box.y0, e.box.x1, e.box.y1};
    je["heading"] = e.heading;
    if (e.id) je["id"] = *e.id;
    ents << je.dump() << "\n";
  }

  if (tree) {
    json jt;
    jt["format_version"] = kFormatVersion;
    jt["tree"] = tree_to_json(tree->root);
    std::ofstream(base / "toc.json") << jt.dump(2) << "\n";
  }
}

LabeledDocument load_document(const std::string& dir) {
  const fs::path base(dir);
  const json meta = load_json_file(base / "meta.json");
  check_version(meta, base / "meta.json");
  if (!meta.contains("doc_id") || !meta.contains("pages"))
    throw toc::DataError("meta.json missing doc_id or pages in " + dir);

  std::vector<toc::PageMeta> pages;
  for (const auto& pg : meta.at("pages")) {
    toc::PageMeta pm;
    pm.width = pg.at("width").get<double>();
    pm.height = pg.at("height").get<double>();
    if (pg.contains("image")) {
      auto img = std::make_shared<toc::GrayImage>(
          read_png((base / pg.at("image").get<std::string>()).string()));
      pm.raster = std::move(img);
    }
    pages.push_back(std::move(pm));
  }

  std::vector<toc::Entity> entities;
  std::ifstream ents(base / "entities.jsonl");
  if (!ents) throw toc::DataError("cannot open " + (base / "entities.jsonl").string());
  std::string line;
  int lineno = 0;
  while (std::getline(ents, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json je;
    try {
      je = json::parse(line);
    } catch (const json::exception& e) {
      throw toc::DataError("malformed entity on line " + std::to_string(lineno) + " of " +
                           (base / "entities.jsonl").string() + ": " + e.what());
    }
    toc::Entity e;
    e.page = je.at("page").get<int>();
    e.content = je.at("content").get<std::string>();
    const auto& b = je.at("box");
    if (!b.is_array() || b.size() != 4)
      throw toc::DataError("entity box must have four numbers, line " +
                           std::to_string(lineno));
    e.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    e.heading = je.value("heading", false);
    if (je.contains("id")) e.id = je.at("id").get<std::string>();
    entities.push_back(std::move(e));
  }

  LabeledDocument out;
  out.doc = toc::order_entities(std::move(entities), std::move(pages),
                                meta.at("doc_id").get<std::string>());

  if (fs::exists(base / "toc.json")) {
    const json jt = load_json_file(base / "toc.json");
    check_version(jt, base / "toc.json");
    toc::ToCTree tree;
    tree.root = tree_from_json(jt.at("tree"));
    out.tree = std::move(tree);
  }
  return out;
}

std::vector<std::string> list_documents(const std::string& root) {
  if (!fs::is_directory(root)) throw toc::DataError("not a dataset directory: " + root);
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json"))
      ids.push_back(entry.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

struct Aligner {
  const toc::ToCTree& tree;
  double max_wer;
  bool lenient;
  std::vector<toc::Entity>& entities;
  std::vector<std::string>& warnings;
  size_t cursor = 0;

  void walk(const toc::ToCNode& node, std::vector<int>& path) {
    if (!path.empty() && !try_match(node, path)) {
      const std::string msg =
          "toc entry '" + node.text + "' (" + toc::format_dotted_id(path) +
          ") has no matching entity";
      if (!lenient) throw toc::DataError(msg);
      warnings.push_back(msg + "; subtree skipped");
      return;
    }
    for (size_t i = 0; i < node.children.size(); ++i) {
      path.push_back(static_cast<int>(i) + 1);
      walk(node.children[i], path);
      path.pop_back();
    }
  }

  bool try_match(const toc::ToCNode& node, const std::vector<int>& path) {
    if (toc::metrics::normalize_label(node.text).empty())
      throw toc::DataError("empty heading text in toc tree");
    for (size_t j = cursor; j < entities.size(); ++j) {
      if (accept(entities[j].content, node.text)) {
        mark(j, path);
        cursor = j + 1;
        return true;
      }
      if (j + 1 < entities.size() &&
          accept(entities[j].content + " " + entities[j + 1].content, node.text)) {
        mark(j, path);
        mark(j + 1, path);
        cursor = j + 2;
        return true;
      }
    }
    return false;
  }

  bool accept(const std::string& hyp, const std::string& ref) const {
    return toc::metrics::wer(toc::metrics::normalize_label(hyp),
                             toc::metrics::normalize_label(ref)) <= max_wer;
  }

  void mark(size_t j, const std::vector<int>& path) {
    entities[j].heading = true;
    entities[j].id = toc::format_dotted_id(path);
  }
};

}  // namespace

AlignResult align_tree(const toc::Document& doc, const toc::ToCTree& tree, double max_wer,
                       bool lenient) {
  AlignResult res;
  res.doc = doc;
  for (auto& e : res.doc.entities) {
    e.heading = false;
    e.id.reset();
  }
  std::vector<int> path;
  Aligner aligner{tree, max_wer, lenient, res.doc.entities, res.warnings};
  aligner.walk(tree.root, path);
  return res;
}

}  // namespace toc::data
