#ifndef TOC_TRAIN_PLOTS_HPP
#define TOC_TRAIN_PLOTS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace toc::train {

// Bar histogram of values in [lo, hi] written as a grayscale PNG.
void plot_histogram(const std::vector<double>& values, int bins, double lo, double hi,
                    const std::string& path);

// Decoder attention as a heatmap PNG: one row per step, one column per
// memory slot (column 0 is the root), brightness proportional to weight.
void plot_attention(const std::vector<Eigen::VectorXd>& attention,
                    const std::string& path);

}  // namespace toc::train

#endif
