#include "toc/encoder/layout.hpp"

namespace toc::encoder {

LayoutStats compute_layout_stats(const toc::Document& doc) {
  LayoutStats st;
  if (doc.entities.empty()) return st;
  double w = 0.0, h = 0.0;
  for (const auto& e : doc.entities) {
    w += e.box.x1 - e.box.x0;
    h += e.box.y1 - e.box.y0;
  }
  st.mean_width = w / static_cast<double>(doc.entities.size());
  st.mean_height = h / static_cast<double>(doc.entities.size());
  if (st.mean_width <= 0.0 || st.mean_height <= 0.0)
    throw toc::DataError("layout stats degenerate for " + doc.doc_id);
  return st;
}

Eigen::MatrixXd layout_features(const toc::Document& doc, const LayoutStats& stats) {
  const int n = static_cast<int>(doc.entities.size());
  Eigen::MatrixXd f(8, n);
  for (int i = 0; i < n; ++i) {
    const toc::Entity& e = doc.entities[i];
    const toc::PageMeta& pg = doc.pages[e.page];
    if (pg.width <= 0.0 || pg.height <= 0.0)
      throw toc::DataError("non-positive page size in " + doc.doc_id);

    const bool first_on_page = i == 0 || doc.entities[i - 1].page != e.page;
    const bool last_on_page = i == n - 1 || doc.entities[i + 1].page != e.page;
    const double prev_bottom = first_on_page ? 0.0 : doc.entities[i - 1].box.y1;
    const double next_top = last_on_page ? pg.height : doc.entities[i + 1].box.y0;

    f(0, i) = e.box.x0 / pg.width;
    f(1, i) = e.box.y0 / pg.height;
    f(2, i) = e.box.x1 / pg.width;
    f(3, i) = e.box.y1 / pg.height;
    f(4, i) = (e.box.x1 - e.box.x0) / stats.mean_width;
    f(5, i) = (e.box.y1 - e.box.y0) / stats.mean_height;
    f(6, i) = (e.box.y0 - prev_bottom) / stats.mean_height;
    f(7, i) = (next_top - e.box.y1) / stats.mean_height;
  }
  return f;
}

}  // namespace toc::encoder
