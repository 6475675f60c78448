#pragma once

#include <string>

#include "sflow/autodiff.hpp"
#include "sflow/tensor.hpp"

// Stage-2 training losses (Dice+BCE region term, soft-boundary term, and the
// composite) plus evaluation metrics with the empty-mask conventions pinned:
// both masks empty -> every region metric is 1; empty prediction against a
// nonempty target -> dice = iou = recall = 0 but precision = 1 (no false
// positives). HD95 uses 4-connectivity boundaries and linear interpolation
// between order statistics; one-sided empties return the image diagonal.

namespace sflow {

struct PredPair {
  Tensor pred;  // [H,W] probabilities in [0,1]
  Tensor gt;    // [H,W] binary {0,1}
  double threshold = 0.5;
};

// 0.5 * DiceLoss + 0.5 * BCE, probabilities clamped to [1e-7, 1-1e-7] in BCE
Var dice_bce_loss(Tape& tape, const Var& pred, const Tensor& gt, double smooth);
double dice_bce_loss(const PredPair& p, double smooth);

// mean squared difference of soft boundary maps b(x) = |x - mean3x3(x)|
Var boundary_loss(Tape& tape, const Var& pred, const Tensor& gt);
double boundary_loss(const PredPair& p);

// dice_bce + beta * boundary
Var stage2_loss(Tape& tape, const Var& pred, const Tensor& gt, double beta,
                double smooth);
double stage2_loss(const PredPair& p, double beta, double smooth);

struct RegionMetrics {
  double dice;
  double iou;
  double precision;
  double recall;
};

RegionMetrics region_metrics(const PredPair& p);

// 95th percentile (by default) of the pooled directed boundary distances
double hd95(const PredPair& p, double percentile = 95.0);

struct SampleMetrics {
  int id = 0;
  double dice = 0, iou = 0, precision = 0, recall = 0, hd95 = 0;
};

// one JSON record per line: {"sample-id":..,"dice":..,...}
std::string metrics_json(const SampleMetrics& m);

}  // namespace sflow
