#ifndef TOC_DATA_FEATURE_CACHE_HPP
#define TOC_DATA_FEATURE_CACHE_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace toc::data {

// Per-document precomputed encoder inputs, one column per entity.
struct FeatureBundle {
  Eigen::MatrixXd layout;  // 8 x N
  Eigen::MatrixXd text;    // text_dim x N
  Eigen::MatrixXd vision;  // pooled_dim x N
};

// Cache file name for a document under a given extractor fingerprint.
// The fingerprint covers everything the features depend on (embedder
// config, frozen backbone weights), so a stale file simply misses.
std::string cache_filename(const std::string& doc_id, const std::string& fingerprint);

void save_features(const std::string& path, const std::string& fingerprint,
                   const FeatureBundle& bundle);

// Returns nullopt when the file is absent, corrupt, or was written under a
// different fingerprint; callers then recompute.
std::optional<FeatureBundle> load_features(const std::string& path,
                                           const std::string& fingerprint);

}  // namespace toc::data

#endif
