#ifndef SACNET_METRICS_HPP_
#define SACNET_METRICS_HPP_

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet {

inline constexpr int kThresholds = 256;
inline constexpr double kBetaSquared = 0.3;
// Balance between the object-aware and region-aware S-measure terms.
inline constexpr double kStructureBalance = 0.5;

// F_beta = (1 + b2) P R / (b2 P + R); 0 when P + R = 0.
double f_beta(double precision, double recall);

struct FMeasure {
  // Threshold k is k / 255; a pixel is predicted positive iff pred > k/255.
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  double max_f = 0;
  // Threshold min(2 mean(pred), 1); positive iff pred >= thr and pred > 0.
  double adaptive_f = 0;
  // Empty ground-truth foreground: recall is undefined.
  bool undefined = false;
};

// All maps are (1, 1, H, W); pred in [0, 1], gt binary.
FMeasure f_measure(const Tensor& pred, const Tensor& gt);
double mae(const Tensor& pred, const Tensor& gt);
double s_measure(const Tensor& pred, const Tensor& gt);

struct BerResult {
  double ber = 0;  // percent
  // A class is absent from gt; its rate term was taken as 1.
  bool class_absent = false;
};
BerResult ber(const Tensor& pred, const Tensor& gt, double threshold = 0.5);

struct ImageScores {
  std::string id;
  double fbeta_max = 0;
  double fbeta_adaptive = 0;
  double smeasure = 0;
  double mae = 0;
  double ber = 0;
  bool f_undefined = false;
  bool ber_class_absent = false;
};

ImageScores score_image(const std::string& id, const Tensor& pred,
                        const Tensor& gt);

struct EvalReport {
  std::vector<ImageScores> images;
  // Means over images; F-measures skip images with undefined recall.
  double fbeta_max = 0;
  double fbeta_adaptive = 0;
  double smeasure = 0;
  double mae = 0;
  double ber = 0;
  int f_undefined = 0;
  int ber_class_absent = 0;
  // Mean precision / recall curves over images with defined recall.
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};

  // Header image,fbeta_max,fbeta_adaptive,smeasure,mae,ber.
  std::string csv() const;
  std::string summary_json() const;
};

struct EvalItem {
  std::string id;
  Tensor pred;
  Tensor gt;
};

EvalReport evaluate(const std::vector<EvalItem>& items);

}  // namespace sacnet

#endif  // SACNET_METRICS_HPP_
