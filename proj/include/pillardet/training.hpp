#pragma once

#include "pillardet/decoder.hpp"
#include "pillardet/scene.hpp"

namespace pillardet {

// Minimum-cost injective assignment of min(n, m) rows to columns. Returns
// one entry per row, -1 for rows left unassigned when n > m.
std::vector<int> hungarian(const DenseArray& cost);

// Binary focal loss term on one class score. p is clamped to
// [1e-7, 1 - 1e-7].
double focal_term(double p, int y, double alpha = 0.25, double gamma = 2.0);

// Weighted L1 over the 9 box dims: weight 2 on x and y, 1 elsewhere; the yaw
// difference is wrapped to [-pi, pi) first.
double box_l1(const std::array<double, 9>& pred, const std::array<double, 9>& gt);

struct SetLossBreakdown {
  std::vector<double> per_layer;
  double total = 0.0;
};

// Hungarian matching per layer on lambda_cls * focal + lambda_reg * L1 cost;
// matched queries incur both losses, unmatched ones only negative-class
// focal. Per-layer losses are summed (auxiliary supervision).
SetLossBreakdown set_loss(const Detections& dets, const GroundTruthFrame& gt,
                          double lambda_cls = 2.0, double lambda_reg = 0.25);

struct FitResult {
  ModelParams params;
  std::vector<double> trace;  // loss at the start of each step
};

// Simultaneous-perturbation stochastic approximation on the flat parameter
// vector; forward passes only, deterministic per seed.
FitResult spsa_fit(const ModelParams& params, const Scene& scene, std::size_t steps,
                   double step_size, double perturb, uint64_t seed);

}  // namespace pillardet
