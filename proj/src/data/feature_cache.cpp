#include "toc/data/feature_cache.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "toc/encoder/text.hpp"

namespace toc::data {
namespace {

constexpr char kMagic[8] = {'T', 'O', 'C', 'F', 'E', 'A', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

bool read_u32(std::istream& is, std::uint32_t& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return is.good();
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

bool read_matrix(std::istream& is, Eigen::MatrixXd& m) {
  std::uint32_t rows = 0, cols = 0;
  if (!read_u32(is, rows) || !read_u32(is, cols)) return false;
  if (rows > 1'000'000 || cols > 1'000'000) return false;
  m.resize(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  return is.good() || (m.size() == 0 && !is.bad());
}

}  // namespace

std::string cache_filename(const std::string& doc_id, const std::string& fingerprint) {
  const std::uint64_t h =
      toc::encoder::fnv1a64(fingerprint.data(), fingerprint.size(), 0);
  std::ostringstream name;
  name << doc_id << "-" << std::hex << std::setw(16) << std::setfill('0') << h << ".feat";
  return name.str();
}

void save_features(const std::string& path, const std::string& fingerprint,
                   const FeatureBundle& bundle) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("feature cache: cannot write " + path);
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(fingerprint.size()));
  os.write(fingerprint.data(), static_cast<std::streamsize>(fingerprint.size()));
  write_matrix(os, bundle.layout);
  write_matrix(os, bundle.text);
  write_matrix(os, bundle.vision);
  if (!os) throw std::runtime_error("feature cache: short write to " + path);
}

std::optional<FeatureBundle> load_features(const std::string& path,
                                           const std::string& fingerprint) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is.good() || std::memcmp(magic, kMagic, sizeof kMagic) != 0) return std::nullopt;
  std::uint32_t version = 0, fp_len = 0;
  if (!read_u32(is, version) || version != kVersion) return std::nullopt;
  if (!read_u32(is, fp_len) || fp_len > 4096) return std::nullopt;
  std::string fp(fp_len, '\0');
  is.read(fp.data(), fp_len);
  if (!is.good() || fp != fingerprint) return std::nullopt;

  FeatureBundle bundle;
  if (!read_matrix(is, bundle.layout) || !read_matrix(is, bundle.text) ||
      !read_matrix(is, bundle.vision))
    return std::nullopt;
  if (bundle.layout.cols() != bundle.text.cols() ||
      bundle.layout.cols() != bundle.vision.cols())
    return std::nullopt;
  return bundle;
}

}  // namespace toc::data
