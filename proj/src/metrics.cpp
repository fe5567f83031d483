#include "sacnet/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "sacnet/error.hpp"

namespace sacnet {

namespace {

void require_map_pair(const Tensor& pred, const Tensor& gt, const char* what) {
  require_same_shape(pred.shape(), gt.shape(), what);
  if (pred.n() != 1 || pred.c() != 1) {
    throw ShapeError(std::string(what) + ": expected (1,1,H,W), got " +
                     pred.shape().str());
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// MATLAB's eps, used by the reference S-measure implementation.
constexpr double kEps = DBL_EPSILON;

// Object score of the values on one side of the mask: 2x / (x^2 + 1 +
// sigma + eps) with x the mean and sigma the sample standard deviation.
double object_score(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double x = mean_of(values);
  double sq = 0;
  for (double v : values) sq += (v - x) * (v - x);
  const double sigma =
      values.size() > 1 ? std::sqrt(sq / static_cast<double>(values.size() - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double object_term(const Tensor& pred, const Tensor& gt) {
  std::vector<double> fg, bg;
  for (int64_t i = 0; i < gt.numel(); ++i) {
    if (gt[i] > 0.5f) {
      fg.push_back(pred[i]);
    } else {
      bg.push_back(1.0 - pred[i]);
    }
  }
  const double u = static_cast<double>(fg.size()) / static_cast<double>(gt.numel());
  return u * object_score(fg) + (1 - u) * object_score(bg);
}

// SSIM-style similarity of one block, with the reference's special cases.
double block_similarity(const Tensor& pred, const Tensor& gt, int64_t y0,
                        int64_t y1, int64_t x0, int64_t x1) {
  const double n = static_cast<double>((y1 - y0) * (x1 - x0));
  double sx = 0, sy = 0;
  for (int64_t y = y0; y < y1; ++y) {
    for (int64_t x = x0; x < x1; ++x) {
      sx += pred.at(0, 0, y, x);
      sy += gt.at(0, 0, y, x);
    }
  }
  const double mx = sx / n, my = sy / n;
  double vx = 0, vy = 0, cxy = 0;
  for (int64_t y = y0; y < y1; ++y) {
    for (int64_t x = x0; x < x1; ++x) {
      const double dx = pred.at(0, 0, y, x) - mx;
      const double dy = gt.at(0, 0, y, x) - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  }
  vx /= n - 1 + kEps;
  vy /= n - 1 + kEps;
  cxy /= n - 1 + kEps;
  const double alpha = 4 * mx * my * cxy;
  const double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0) return alpha / (beta + kEps);
  if (beta == 0) return 1.0;
  return 0.0;
}

double region_term(const Tensor& pred, const Tensor& gt) {
  const int64_t h = gt.h(), w = gt.w();
  // Rounded 1-based centroid; the split puts rows 1..Y and columns 1..X in
  // the top-left block.
  double total = 0, sum_x = 0, sum_y = 0;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const double g = gt.at(0, 0, y, x);
      total += g;
      sum_x += g * static_cast<double>(x + 1);
      sum_y += g * static_cast<double>(y + 1);
    }
  }
  int64_t cx, cy;
  if (total == 0) {
    cx = std::llround(static_cast<double>(w) / 2);
    cy = std::llround(static_cast<double>(h) / 2);
  } else {
    cx = std::llround(sum_x / total);
    cy = std::llround(sum_y / total);
  }
  const double area = static_cast<double>(w * h);
  const double w1 = static_cast<double>(cx * cy) / area;
  const double w2 = static_cast<double>((w - cx) * cy) / area;
  const double w3 = static_cast<double>(cx * (h - cy)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  // An empty block has zero weight; it contributes nothing.
  auto block = [&](double weight, int64_t y0, int64_t y1, int64_t x0, int64_t x1) {
    if (y1 <= y0 || x1 <= x0) return 0.0;
    return weight * block_similarity(pred, gt, y0, y1, x0, x1);
  };
  return block(w1, 0, cy, 0, cx) + block(w2, 0, cy, cx, w) +
         block(w3, cy, h, 0, cx) + block(w4, cy, h, cx, w);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

double f_beta(double precision, double recall) {
  const double denom = kBetaSquared * precision + recall;
  if (denom <= 0) return 0.0;
  return (1 + kBetaSquared) * precision * recall / denom;
}

FMeasure f_measure(const Tensor& pred, const Tensor& gt) {
  require_map_pair(pred, gt, "f_measure");
  // bucket = #{k : pred > k/255}, found by binary search over the
  // thresholds so the comparison is exactly pred > k/255.
  std::array<double, kThresholds> thresholds{};
  for (int k = 0; k < kThresholds; ++k) thresholds[k] = k / 255.0;
  std::array<int64_t, kThresholds + 1> fg_hist{}, bg_hist{};
  int64_t positives = 0;
  double sum = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const double p = pred[i];
    sum += p;
    const auto bucket = std::lower_bound(thresholds.begin(), thresholds.end(), p) -
                        thresholds.begin();
    const bool fg = gt[i] > 0.5f;
    positives += fg ? 1 : 0;
    (fg ? fg_hist : bg_hist)[bucket] += 1;
  }
  FMeasure out;
  out.undefined = positives == 0;
  // tp(k) = #fg with bucket > k; accumulate from the top.
  int64_t tp = 0, fp = 0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    tp += fg_hist[k + 1];
    fp += bg_hist[k + 1];
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = positives > 0 ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
    out.precision[k] = p;
    out.recall[k] = r;
    out.max_f = std::max(out.max_f, f_beta(p, r));
  }
  const double thr = std::min(2.0 * sum / static_cast<double>(pred.numel()), 1.0);
  int64_t atp = 0, afp = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    if (pred[i] >= thr && pred[i] > 0) {
      (gt[i] > 0.5f ? atp : afp) += 1;
    }
  }
  const double ap = atp + afp > 0 ? static_cast<double>(atp) / static_cast<double>(atp + afp) : 0.0;
  const double ar = positives > 0 ? static_cast<double>(atp) / static_cast<double>(positives) : 0.0;
  out.adaptive_f = f_beta(ap, ar);
  return out;
}

double mae(const Tensor& pred, const Tensor& gt) {
  require_map_pair(pred, gt, "mae");
  double s = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    s += std::abs(static_cast<double>(pred[i]) - static_cast<double>(gt[i]));
  }
  return s / static_cast<double>(pred.numel());
}

double s_measure(const Tensor& pred, const Tensor& gt) {
  require_map_pair(pred, gt, "s_measure");
  double gt_mean = 0, pred_mean = 0;
  for (int64_t i = 0; i < gt.numel(); ++i) {
    gt_mean += gt[i];
    pred_mean += pred[i];
  }
  gt_mean /= static_cast<double>(gt.numel());
  pred_mean /= static_cast<double>(gt.numel());
  if (gt_mean == 0) return 1.0 - pred_mean;
  if (gt_mean == 1) return pred_mean;
  const double q = kStructureBalance * object_term(pred, gt) +
                   (1 - kStructureBalance) * region_term(pred, gt);
  return std::max(q, 0.0);
}

BerResult ber(const Tensor& pred, const Tensor& gt, double threshold) {
  require_map_pair(pred, gt, "ber");
  int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool g = gt[i] > 0.5f;
    if (g) {
      (p ? tp : fn) += 1;
    } else {
      (p ? fp : tn) += 1;
    }
  }
  BerResult out;
  double tpr = 1.0, tnr = 1.0;
  if (tp + fn > 0) {
    tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    out.class_absent = true;
  }
  if (tn + fp > 0) {
    tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
  } else {
    out.class_absent = true;
  }
  out.ber = 100.0 * (1.0 - 0.5 * (tpr + tnr));
  return out;
}

ImageScores score_image(const std::string& id, const Tensor& pred,
                        const Tensor& gt) {
  for (int64_t i = 0; i < gt.numel(); ++i) {
    if (gt[i] != 0.0f && gt[i] != 1.0f) {
      throw DataError("ground truth for " + id + " is not binary");
    }
  }
  ImageScores s;
  s.id = id;
  const FMeasure f = f_measure(pred, gt);
  s.fbeta_max = f.max_f;
  s.fbeta_adaptive = f.adaptive_f;
  s.f_undefined = f.undefined;
  s.smeasure = s_measure(pred, gt);
  s.mae = mae(pred, gt);
  const BerResult b = ber(pred, gt);
  s.ber = b.ber;
  s.ber_class_absent = b.class_absent;
  return s;
}

EvalReport evaluate(const std::vector<EvalItem>& items) {
  EvalReport r;
  int defined = 0;
  for (const auto& item : items) {
    ImageScores s = score_image(item.id, item.pred, item.gt);
    r.smeasure += s.smeasure;
    r.mae += s.mae;
    r.ber += s.ber;
    r.ber_class_absent += s.ber_class_absent ? 1 : 0;
    if (s.f_undefined) {
      ++r.f_undefined;
    } else {
      const FMeasure f = f_measure(item.pred, item.gt);
      for (int k = 0; k < kThresholds; ++k) {
        r.precision[k] += f.precision[k];
        r.recall[k] += f.recall[k];
      }
      r.fbeta_max += s.fbeta_max;
      r.fbeta_adaptive += s.fbeta_adaptive;
      ++defined;
    }
    r.images.push_back(std::move(s));
  }
  const double n = static_cast<double>(items.size());
  if (!items.empty()) {
    r.smeasure /= n;
    r.mae /= n;
    r.ber /= n;
  }
  if (defined > 0) {
    r.fbeta_max /= defined;
    r.fbeta_adaptive /= defined;
    for (int k = 0; k < kThresholds; ++k) {
      r.precision[k] /= defined;
      r.recall[k] /= defined;
    }
  }
  return r;
}

std::string EvalReport::csv() const {
  std::string out = "image,fbeta_max,fbeta_adaptive,smeasure,mae,ber\n";
  for (const auto& s : images) {
    out += s.id + "," + format_double(s.fbeta_max) + "," +
           format_double(s.fbeta_adaptive) + "," + format_double(s.smeasure) +
           "," + format_double(s.mae) + "," + format_double(s.ber) + "\n";
  }
  return out;
}

std::string EvalReport::summary_json() const {
  nlohmann::json j;
  j["images"] = images.size();
  j["fbeta_max"] = fbeta_max;
  j["fbeta_adaptive"] = fbeta_adaptive;
  j["smeasure"] = smeasure;
  j["mae"] = mae;
  j["ber"] = ber;
  j["fbeta_undefined_images"] = f_undefined;
  j["ber_class_absent_images"] = ber_class_absent;
  j["precision"] = precision;
  j["recall"] = recall;
  return j.dump(2);
}

}  // namespace sacnet
