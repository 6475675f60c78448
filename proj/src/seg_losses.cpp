#include "sflow/seg_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace sflow {

namespace {

constexpr double kClamp = 1e-7;

void check_pair(const PredPair& p) {
  if (p.pred.shape() != p.gt.shape())
    throw ShapeError("PredPair: pred " + p.pred.shape().str() + " vs gt " +
                     p.gt.shape().str());
  if (p.pred.rank() != 2) throw ShapeError("PredPair: expected [H,W] tensors");
}

}  // namespace

Var dice_bce_loss(Tape& tape, const Var& pred, const Tensor& gt, double smooth) {
  if (smooth <= 0.0) throw ContractError("dice_bce_loss: smooth must be positive");
  const double n = static_cast<double>(gt.size());
  Var inter = sum_all(mul(pred, gt));
  Var psum = sum_all(pred);
  const double gsum = sum(gt);
  Var dice_num = affine(inter, 2.0, smooth);
  Var dice_den = affine(psum, 1.0, gsum + smooth);
  Var dice_loss = affine(divide(dice_num, dice_den), -1.0, 1.0);

  Var pc = clamp(pred, kClamp, 1.0 - kClamp);
  Var bce_terms = add(mul(log(pc), gt),
                      mul(log(affine(pc, -1.0, 1.0)), affine(gt, -1.0, 1.0)));
  Var bce = affine(sum_all(bce_terms), -1.0 / n, 0.0);

  return add(affine(dice_loss, 0.5, 0.0), affine(bce, 0.5, 0.0));
}

double dice_bce_loss(const PredPair& p, double smooth) {
  check_pair(p);
  Tape tape;
  return dice_bce_loss(tape, vconst(p.pred), p.gt, smooth).value.item();
}

Var boundary_loss(Tape& tape, const Var& pred, const Tensor& gt) {
  Var bp = abs(sub(pred, local_mean3(pred)));
  Tensor bg = abs(sub(gt, local_mean3(gt)));
  return mean_all(square(sub(bp, vconst(bg))));
}

double boundary_loss(const PredPair& p) {
  check_pair(p);
  Tape tape;
  return boundary_loss(tape, vconst(p.pred), p.gt).value.item();
}

Var stage2_loss(Tape& tape, const Var& pred, const Tensor& gt, double beta,
                double smooth) {
  if (beta < 0.0) throw ContractError("stage2_loss: beta must be >= 0");
  return add(dice_bce_loss(tape, pred, gt, smooth),
             affine(boundary_loss(tape, pred, gt), beta, 0.0));
}

double stage2_loss(const PredPair& p, double beta, double smooth) {
  check_pair(p);
  Tape tape;
  return stage2_loss(tape, vconst(p.pred), p.gt, beta, smooth).value.item();
}

RegionMetrics region_metrics(const PredPair& p) {
  check_pair(p);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.pred.size(); ++i) {
    const bool pr = p.pred[i] > p.threshold;
    const bool gt = p.gt[i] > 0.5;
    tp += pr && gt;
    fp += pr && !gt;
    fn += !pr && gt;
  }
  auto ratio = [](double num, double den) { return den == 0.0 ? 1.0 : num / den; };
  RegionMetrics m;
  m.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  m.iou = ratio(static_cast<double>(tp), static_cast<double>(tp + fp + fn));
  m.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  m.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  return m;
}

namespace {

struct Pixel {
  int y, x;
};

// foreground pixel is boundary iff any 4-neighbor is background or it lies
// on the image edge
std::vector<Pixel> boundary_pixels(const Tensor& mask, double threshold) {
  const int h = static_cast<int>(mask.shape()[0]);
  const int w = static_cast<int>(mask.shape()[1]);
  auto fg = [&](int y, int x) { return mask.data()[y * w + x] > threshold; };
  std::vector<Pixel> out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!fg(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y == h - 1 || x == w - 1;
      const bool bg_nb = (y > 0 && !fg(y - 1, x)) || (y < h - 1 && !fg(y + 1, x)) ||
                         (x > 0 && !fg(y, x - 1)) || (x < w - 1 && !fg(y, x + 1));
      if (edge || bg_nb) out.push_back({y, x});
    }
  return out;
}

void directed_distances(const std::vector<Pixel>& from, const std::vector<Pixel>& to,
                        std::vector<double>& pool) {
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double dy = a.y - b.y, dx = a.x - b.x;
      best = std::min(best, dy * dy + dx * dx);
    }
    pool.push_back(std::sqrt(best));
  }
}

double percentile_interp(std::vector<double>& v, double pct) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

double hd95(const PredPair& p, double percentile) {
  check_pair(p);
  auto bp = boundary_pixels(p.pred, p.threshold);
  auto bg = boundary_pixels(p.gt, 0.5);
  const double h = static_cast<double>(p.pred.shape()[0]);
  const double w = static_cast<double>(p.pred.shape()[1]);
  if (bp.empty() && bg.empty()) return 0.0;
  if (bp.empty() || bg.empty()) return std::sqrt(h * h + w * w);  // sentinel
  std::vector<double> pool;
  pool.reserve(bp.size() + bg.size());
  directed_distances(bp, bg, pool);
  directed_distances(bg, bp, pool);
  return percentile_interp(pool, percentile);
}

std::string metrics_json(const SampleMetrics& m) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"sample-id\":" << m.id << ",\"dice\":" << m.dice << ",\"iou\":" << m.iou
     << ",\"precision\":" << m.precision << ",\"recall\":" << m.recall
     << ",\"hd95\":" << m.hd95 << "}";
  return os.str();
}

}  // namespace sflow
