#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string_view>

namespace dkflab {

/// Deterministic random stream. Streams are derived from
/// (master_seed, role, trial, index) so that e.g. adding sensors to a model
/// never perturbs the truth stream of the same trial. Gaussian variates use
/// an explicit Box-Muller transform on top of mt19937_64 so sequences are
/// identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t master_seed, std::string_view role, std::uint64_t trial = 0,
                    std::uint64_t index = 0);

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, bound), rejection-sampled (unbiased).
  std::uint64_t uniform_int(std::uint64_t bound);

  /// Standard normal variate.
  double normal();

  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dkflab
