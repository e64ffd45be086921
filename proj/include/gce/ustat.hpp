#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gce/contrast.hpp"
#include "gce/dataset.hpp"
#include "gce/estimate.hpp"
#include "gce/parallel.hpp"

namespace gce {

/// Position of the unordered pair i<k in row-major upper-triangle order.
inline std::size_t pair_index(std::size_t i, std::size_t k, std::size_t m) {
  return i * (2 * m - i - 1) / 2 + (k - i - 1);
}

inline std::size_t pair_count(std::size_t m) { return m * (m - 1) / 2; }

/// Symmetrized pair kernel that is affine in λ:
/// ψ_a(i,k; λ) = h_a(i,k) − d_a(i,k)·λ_a, stored for every unordered pair.
struct PairKernel {
  std::size_t m = 0;
  std::vector<double> h1, d1, h0, d0;

  explicit PairKernel(std::size_t m_ = 0)
      : m(m_), h1(pair_count(m_)), d1(pair_count(m_)), h0(pair_count(m_)), d0(pair_count(m_)) {}

  Eigen::Vector2d psi(std::size_t i, std::size_t k, const Eigen::Vector2d& lambda) const {
    const std::size_t p = i < k ? pair_index(i, k, m) : pair_index(k, i, m);
    return {h1[p] - d1[p] * lambda(0), h0[p] - d0[p] * lambda(1)};
  }
};

struct UStatSolution {
  Eigen::Vector2d lambda = Eigen::Vector2d::Zero();
  Eigen::Matrix2d bread = Eigen::Matrix2d::Zero();  // B̂
  Eigen::Matrix2d meat = Eigen::Matrix2d::Zero();   // Σ̂
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();    // B̂⁻¹ Σ̂ B̂⁻ᵀ
  std::vector<Eigen::Vector2d> projections;
  double residual = 0.0;  // max-norm of Σ ψ(λ̂)
};

/// Observed average contrasts for cross-arm pairs: fwd[p] = w̄(Y_i, Y_k),
/// bwd[p] = w̄(Y_k, Y_i) for the pair p = (i<k). Same-arm pairs hold 0.
struct ContrastTable {
  std::size_t m = 0;
  std::vector<double> fwd, bwd;
};

ContrastTable contrast_table(const TrialDataset& data, const Contrast& w, Parallelism par = {});

/// N_i·N_k per pair.
std::vector<double> size_products(const TrialDataset& data);

/// (m−1)⁻¹ Σ_{k≠i} ψ(i,k; λ) for every cluster.
std::vector<Eigen::Vector2d> hajek_projection(const PairKernel& kernel,
                                              const Eigen::Vector2d& lambda, Parallelism par = {});

/// Σ̂ = 4(m−1)⁻¹ Σ_i ψ̂_i ψ̂_iᵀ.
Eigen::Matrix2d projection_meat(const std::vector<Eigen::Vector2d>& projections);

/// B̂ = C(m,2)⁻¹ Σ_{i<k} ∇_λ ψ(i,k).
Eigen::Matrix2d kernel_bread(const PairKernel& kernel);

/// Solves Σ_{i<k} ψ(i,k; λ) = 0 in closed form and builds the sandwich.
/// Throws DegenerateDesignError when an arm has no informative pair.
UStatSolution solve_ustat(const PairKernel& kernel, Parallelism par = {});

/// Wraps a solution into a GceEstimate: range check, summary, DF correction.
GceEstimate assemble_estimate(UStatSolution sol, Target target, EstimatorKind kind,
                              const Range& range, const EstimateOptions& options);

}  // namespace gce
