#ifndef TOC_ENCODER_TEXT_HPP
#define TOC_ENCODER_TEXT_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>

#include "toc/core/types.hpp"

namespace toc::encoder {

// Produces a fixed-width raw text vector per entity. Implementations must be
// deterministic; the fingerprint keys cached features.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd embed(const std::string& content) const = 0;
  virtual std::string fingerprint() const = 0;
};

// Signed hash-bucket bag of tokens: each whitespace token hashes to a bucket
// and a sign, the result is L2-normalized. Empty content maps to a sentinel
// token so it still produces a unit vector.
class HashBagEmbedder : public TextEmbedder {
 public:
  explicit HashBagEmbedder(int dim = 256, std::uint64_t seed = 0x746f63ULL);

  int dim() const override { return dim_; }
  Eigen::VectorXd embed(const std::string& content) const override;
  std::string fingerprint() const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

// One column per entity in document order.
Eigen::MatrixXd embed_entities(const TextEmbedder& embedder, const toc::Document& doc);

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed);

}  // namespace toc::encoder

#endif
