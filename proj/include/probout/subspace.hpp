#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "probout/rng.hpp"
#include "probout/tensor.hpp"

namespace probout {

/// The k linear responses of one subspace unit.
struct SubspaceActivations {
  std::vector<double> z;

  std::size_t k() const noexcept { return z.size(); }
};

enum class ProboutMode {
  TrainSample,         // draw from the Boltzmann distribution
  TrainSampleDropout,  // draw from the (k+1)-way distribution with a dropout outcome
  InferSample,         // draw from the rescaled distribution (dropout removed)
  InferMax,            // behave like maxout
  InferProbWeight,     // expected activation; not a selection
};

/// Inverse temperature plus sampling mode for one layer of probout units.
struct ProboutConfig {
  double lambda = 1.0;
  ProboutMode mode = ProboutMode::TrainSample;

  /// Throws std::invalid_argument unless lambda > 0.
  void validate() const;
};

/// Cross-validation grid for the per-layer inverse temperature.
inline constexpr std::array<double, 6> kLambdaGrid{0.1, 0.5, 1.0, 2.0, 3.0, 4.0};

/// Outcome of one subspace unit. `index` is the selected sub-unit in [0, k),
/// or kDropped when the dropout outcome was sampled (value is then 0).
struct Selection {
  static constexpr int kDropped = -1;

  int index = 0;
  double value = 0.0;

  bool dropped() const noexcept { return index == kDropped; }
};

SubspaceActivations linear_subspace(const Tensor64& input, const Tensor64& weights,
                                    const Tensor64& bias);

Selection maxout_forward(std::span<const double> z);
inline Selection maxout_forward(const SubspaceActivations& a) { return maxout_forward(a.z); }

/// p_i = exp(lambda (z_i - max z)) / sum_j exp(lambda (z_j - max z)).
void boltzmann_probs(std::span<const double> z, double lambda, std::span<double> out);
std::vector<double> boltzmann_probs(const SubspaceActivations& a, double lambda);

/// (k+1)-way distribution: out[0] = 0.5 is dropout, out[i+1] = 0.5 p_i.
void dropout_probs(std::span<const double> z, double lambda, std::span<double> out);
std::vector<double> dropout_probs(const SubspaceActivations& a, double lambda);

/// Removes the dropout outcome from a (k+1)-way distribution and renormalizes.
std::vector<double> inference_rescale(std::span<const double> p_hat);

/// Draws a selection according to cfg.mode. Sampling modes consume exactly one
/// multinomial draw; InferMax consumes none. InferProbWeight throws ModeError.
Selection probout_select(std::span<const double> z, const ProboutConfig& cfg, RngStream& rng);
inline Selection probout_select(const SubspaceActivations& a, const ProboutConfig& cfg,
                                RngStream& rng) {
  return probout_select(a.z, cfg, rng);
}

/// sum_i p_i z_i under the Boltzmann distribution.
double probability_weighted_value(std::span<const double> z, double lambda);
inline double probability_weighted_value(const SubspaceActivations& a, double lambda) {
  return probability_weighted_value(a.z, lambda);
}

/// Routes grad_out to the selected sub-unit; the selection is a constant of
/// the forward pass, so no gradient reaches the probabilities.
std::vector<double> subspace_backward(double grad_out, const Selection& sel, std::size_t k);

}  // namespace probout
