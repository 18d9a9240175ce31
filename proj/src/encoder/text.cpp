#include "toc/encoder/text.hpp"

#include <sstream>

namespace toc::encoder {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

HashBagEmbedder::HashBagEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 2) throw std::invalid_argument("HashBagEmbedder: dim must be at least 2");
}

Eigen::VectorXd HashBagEmbedder::embed(const std::string& content) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  std::istringstream in(content);
  bool any = false;
  std::string tok;
  while (in >> tok) {
    any = true;
    const std::uint64_t h = fnv1a64(tok.data(), tok.size(), seed_);
    const int bucket = static_cast<int>(h % static_cast<std::uint64_t>(dim_));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v(bucket) += sign;
  }
  if (!any) {
    const std::uint64_t h = fnv1a64("<empty>", 7, seed_);
    v(static_cast<int>(h % static_cast<std::uint64_t>(dim_))) += 1.0;
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

std::string HashBagEmbedder::fingerprint() const {
  std::ostringstream os;
  os << "hashbag:v1:dim=" << dim_ << ":seed=" << seed_;
  return os.str();
}

Eigen::MatrixXd embed_entities(const TextEmbedder& embedder, const toc::Document& doc) {
  Eigen::MatrixXd out(embedder.dim(), static_cast<int>(doc.entities.size()));
  for (int i = 0; i < out.cols(); ++i) out.col(i) = embedder.embed(doc.entities[i].content);
  return out;
}

}  // namespace toc::encoder
