#include "probout/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace probout {
namespace {

constexpr std::size_t kMaxStackK = 64;

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("inverse temperature must be positive");
}

}  // namespace

void ProboutConfig::validate() const { require_positive_lambda(lambda); }

SubspaceActivations linear_subspace(const Tensor64& input, const Tensor64& weights,
                                    const Tensor64& bias) {
  const Tensor64 z = affine(weights, input, bias);
  return SubspaceActivations{z.values()};
}

Selection maxout_forward(std::span<const double> z) {
  if (z.empty()) throw DimensionError("maxout_forward: empty subspace");
  int best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = static_cast<int>(i);
  }
  return {best, z[best]};
}

void boltzmann_probs(std::span<const double> z, double lambda, std::span<double> out) {
  require_positive_lambda(lambda);
  if (z.empty() || out.size() != z.size()) throw DimensionError("boltzmann_probs: size mismatch");
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(lambda * (z[i] - zmax));
    total += out[i];
  }
  for (double& p : out) p /= total;
}

std::vector<double> boltzmann_probs(const SubspaceActivations& a, double lambda) {
  std::vector<double> p(a.k());
  boltzmann_probs(a.z, lambda, p);
  return p;
}

void dropout_probs(std::span<const double> z, double lambda, std::span<double> out) {
  if (out.size() != z.size() + 1) throw DimensionError("dropout_probs: output must hold k+1 entries");
  boltzmann_probs(z, lambda, out.subspan(1));
  out[0] = 0.5;
  for (std::size_t i = 1; i < out.size(); ++i) out[i] *= 0.5;
}

std::vector<double> dropout_probs(const SubspaceActivations& a, double lambda) {
  std::vector<double> p(a.k() + 1);
  dropout_probs(a.z, lambda, p);
  return p;
}

std::vector<double> inference_rescale(std::span<const double> p_hat) {
  if (p_hat.size() < 2) throw DimensionError("inference_rescale: need at least one sub-unit");
  const double keep = 1.0 - p_hat[0];
  if (!(keep > 0.0)) throw ProbabilityError("inference_rescale: dropout probability is 1");
  std::vector<double> out(p_hat.size() - 1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p_hat[i + 1] / keep;
  return out;
}

Selection probout_select(std::span<const double> z, const ProboutConfig& cfg, RngStream& rng) {
  const std::size_t k = z.size();
  if (k == 0) throw DimensionError("probout_select: empty subspace");
  if (k + 1 > kMaxStackK) throw DimensionError("probout_select: subspace too large");
  std::array<double, kMaxStackK> buffer;
  switch (cfg.mode) {
    case ProboutMode::InferMax:
      return maxout_forward(z);
    case ProboutMode::TrainSample:
    case ProboutMode::InferSample: {
      std::span<double> p(buffer.data(), k);
      boltzmann_probs(z, cfg.lambda, p);
      const auto i = multinomial_draw(p, rng);
      return {static_cast<int>(i), z[i]};
    }
    case ProboutMode::TrainSampleDropout: {
      std::span<double> p(buffer.data(), k + 1);
      dropout_probs(z, cfg.lambda, p);
      const auto i = multinomial_draw(p, rng);
      if (i == 0) return {Selection::kDropped, 0.0};
      return {static_cast<int>(i - 1), z[i - 1]};
    }
    case ProboutMode::InferProbWeight:
      break;
  }
  throw ModeError("probout_select: probability weighting does not select a sub-unit");
}

double probability_weighted_value(std::span<const double> z, double lambda) {
  const std::size_t k = z.size();
  if (k == 0 || k > kMaxStackK) throw DimensionError("probability_weighted_value: bad subspace size");
  std::array<double, kMaxStackK> buffer;
  std::span<double> p(buffer.data(), k);
  boltzmann_probs(z, lambda, p);
  double value = 0.0;
  for (std::size_t i = 0; i < k; ++i) value += p[i] * z[i];
  return value;
}

std::vector<double> subspace_backward(double grad_out, const Selection& sel, std::size_t k) {
  std::vector<double> grad(k, 0.0);
  if (sel.dropped()) return grad;
  if (sel.index < 0 || static_cast<std::size_t>(sel.index) >= k) {
    throw DimensionError("subspace_backward: index " + std::to_string(sel.index) +
                         " out of range for k=" + std::to_string(k));
  }
  grad[sel.index] = grad_out;
  return grad;
}

}  // namespace probout
