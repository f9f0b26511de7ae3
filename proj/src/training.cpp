#include "pillardet/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pillardet {

std::vector<int> hungarian(const DenseArray& cost) {
  if (cost.rank() != 2) throw ConfigError("hungarian expects a rank-2 cost matrix");
  if (!cost.all_finite()) throw ConfigError("hungarian: cost matrix has non-finite entries");
  const std::size_t rows = cost.shape[0], cols = cost.shape[1];
  const std::size_t k = std::max(rows, cols);
  const double kInf = std::numeric_limits<double>::infinity();

  // Square padding with zero-cost dummies keeps the optimal assignment of the
  // real rows unchanged (the dummy cost is uniform over columns).
  auto at = [&](std::size_t i, std::size_t j) -> double {
    return (i < rows && j < cols) ? cost(i, j) : 0.0;
  };

  // Shortest augmenting path assignment, 1-based internals.
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0), minv(k + 1, 0.0);
  std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
  std::vector<bool> used(k + 1, false);
  for (std::size_t i = 1; i <= k; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assign(rows, -1);
  for (std::size_t j = 1; j <= k; ++j) {
    const std::size_t i = p[j];
    if (i >= 1 && i <= rows && j <= cols) assign[i - 1] = static_cast<int>(j - 1);
  }
  return assign;
}

double focal_term(double p, int y, double alpha, double gamma) {
  p = std::clamp(p, 1e-7, 1.0 - 1e-7);
  if (y == 1) return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

double box_l1(const std::array<double, 9>& pred, const std::array<double, 9>& gt) {
  static constexpr std::array<double, 9> kWeights = {2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  double loss = 0.0;
  for (std::size_t d = 0; d < 9; ++d) {
    const double diff = d == 6 ? wrap_angle(pred[d] - gt[d]) : pred[d] - gt[d];
    loss += kWeights[d] * std::abs(diff);
  }
  return loss;
}

SetLossBreakdown set_loss(const Detections& dets, const GroundTruthFrame& gt, double lambda_cls,
                          double lambda_reg) {
  SetLossBreakdown out;
  const std::size_t m = gt.boxes.size();
  for (const LayerOutput& layer : dets.layers) {
    const std::size_t n = layer.boxes.size();
    const std::size_t classes = layer.scores.shape[1];
    std::vector<int> matched_gt(n, -1);
    double reg = 0.0;
    if (m > 0) {
      DenseArray cost({n, m});
      std::vector<std::array<double, 9>> pred_vecs(n);
      for (std::size_t i = 0; i < n; ++i) pred_vecs[i] = box_to_vector(layer.boxes[i]);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t g = 0; g < m; ++g) {
          const double cls_cost =
              focal_term(layer.scores(i, gt.boxes[g].class_id), 1);
          cost(i, g) = lambda_cls * cls_cost + lambda_reg * box_l1(pred_vecs[i], gt.boxes[g].box);
        }
      }
      const std::vector<int> assign = hungarian(cost);
      for (std::size_t i = 0; i < n; ++i) {
        matched_gt[i] = assign[i];
        if (assign[i] >= 0)
          reg += box_l1(pred_vecs[i], gt.boxes[static_cast<std::size_t>(assign[i])].box);
      }
    }
    double cls = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int target_class = matched_gt[i] >= 0
                                   ? gt.boxes[static_cast<std::size_t>(matched_gt[i])].class_id
                                   : -1;
      for (std::size_t c = 0; c < classes; ++c)
        cls += focal_term(layer.scores(i, c), static_cast<int>(c) == target_class ? 1 : 0);
    }
    out.per_layer.push_back(lambda_cls * cls + lambda_reg * reg);
  }
  for (double l : out.per_layer) out.total += l;
  return out;
}

FitResult spsa_fit(const ModelParams& params, const Scene& scene, std::size_t steps,
                   double step_size, double perturb, uint64_t seed) {
  if (perturb <= 0.0) throw ConfigError("spsa_fit: perturbation scale must be > 0");
  const ModelConfig& cfg = params.config;
  const SceneFeatures features = render_for(scene, cfg.sampling);
  const GroundTruthFrame gt = gt_at(scene, 0);
  const uint64_t query_seed = hash_combine(seed, 0x0E51ull);

  ModelParams work = params;
  std::size_t current_step = 0;
  auto loss_at = [&](const std::vector<double>& theta) {
    unflatten_params(work, theta);
    double loss;
    try {
      const Detections dets = run_decoder(work, scene, features, cfg.layers, query_seed);
      loss = set_loss(dets, gt).total;
    } catch (const ContractViolation&) {
      loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(loss))
      throw ContractViolation("spsa_fit diverged at step " + std::to_string(current_step) +
                              " (non-finite loss); reduce step_size or perturb");
    return loss;
  };

  std::vector<double> theta = flatten_params(params);
  const std::size_t dim = theta.size();
  Rng rng(hash_combine(seed, 0x5B5Aull));
  FitResult out;
  out.trace.reserve(steps);

  std::vector<double> delta(dim), probe(dim);
  for (std::size_t step = 0; step < steps; ++step) {
    current_step = step;
    out.trace.push_back(loss_at(theta));
    for (std::size_t i = 0; i < dim; ++i) delta[i] = (rng.next() & 1) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < dim; ++i) probe[i] = theta[i] + perturb * delta[i];
    const double loss_plus = loss_at(probe);
    for (std::size_t i = 0; i < dim; ++i) probe[i] = theta[i] - perturb * delta[i];
    const double loss_minus = loss_at(probe);
    const double slope = (loss_plus - loss_minus) / (2.0 * perturb);
    for (std::size_t i = 0; i < dim; ++i) theta[i] -= step_size * slope * delta[i];
  }

  out.params = params;
  unflatten_params(out.params, theta);
  return out;
}

}  // namespace pillardet
