#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtrl/types.hpp"

namespace mtrl::erm {

/// Output of the first stage: one head per source task plus the shared
/// representation, with the pooled objective the solver actually reached.
struct FirstStageFit {
  std::vector<LinearHead> heads;
  Representation rep = Representation::linear(Matrix::Identity(1, 1));
  std::vector<double> per_task_residual;  // mean squared residual per task
  double objective = 0.0;                 // (1/T) sum_t per_task_residual[t]
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // best restart, one entry per round
  std::optional<std::size_t> dictionary_index;
};

struct SecondStageFit {
  LinearHead head;
  double residual = 0.0;  // mean squared residual on the target sample
};

/// Minimum-Frobenius-norm least-squares head: argmin_F sum_i ||y_i - F z_i||^2.
/// Z is N x r, Y is N x d_y; columns of Z that are identically zero get
/// exactly-zero head columns.
LinearHead ls_head(const Matrix& z, const Matrix& y);

/// (1/T) sum_t (1/N_t) ||Y_t - g(X_t) F_t^T||_F^2.
double pooled_objective(const std::vector<TaskDataset>& data, const std::vector<LinearHead>& heads,
                        const Representation& rep);

struct LinearFitOptions {
  int max_iters = 500;
  double tol = 1e-10;  // relative objective decrease that counts as converged
  int restarts = 5;
  std::uint64_t seed = 0;
};

/// Alternating least squares over (heads, G) with G re-orthonormalised
/// (heads counter-rotated) after every round; best of `restarts` random
/// orthonormal initialisations. Throws DegenerateData if every covariate is 0.
FirstStageFit fit_first_stage_linear(const std::vector<TaskDataset>& data, int r,
                                     const LinearFitOptions& opts = {});

/// Exhaustive search over a finite dictionary; ties go to the lowest index.
FirstStageFit fit_first_stage_finite(const std::vector<TaskDataset>& data,
                                     const std::vector<Representation>& dictionary,
                                     const std::string& dictionary_id = "dictionary");

enum class ParametricFamily { TanhFeatures };

struct ParametricFitOptions {
  ParametricFamily family = ParametricFamily::TanhFeatures;
  int r = 1;
  double lr = 0.5;  // initial step; backtracking halves it on failure
  int max_iters = 3000;
  int restarts = 5;
  std::uint64_t seed = 0;
  double init_scale = 1.0;  // W entries ~ N(0, init_scale^2 / d_x)
  double tol = 1e-14;       // relative loss decrease that counts as converged
};

struct LossGradient {
  double loss = 0.0;
  Matrix grad;  // same shape as W
};

/// Pooled squared loss of tanh(W x) features with the given heads held fixed,
/// and its analytic gradient in W.
LossGradient tanh_loss_gradient(const std::vector<TaskDataset>& data, const Matrix& w,
                                const std::vector<LinearHead>& heads);

/// Pooled loss with every head refit by ls_head on tanh(W x).
double tanh_profile_loss(const std::vector<TaskDataset>& data, const Matrix& w);

/// Block-coordinate fit of the tanh family: heads by least squares, W by
/// full-batch gradient descent with backtracking. Throws DivergedOptimization
/// on a non-finite loss.
FirstStageFit fit_first_stage_parametric(const std::vector<TaskDataset>& data,
                                         const ParametricFitOptions& opts);

/// Target head by least squares through the frozen representation.
SecondStageFit fit_second_stage(const TaskDataset& target, const Representation& rep);

/// Constant c with sup_F 4<W, Z F^T> - ||Z F^T||_F^2 = c ||(Z^T Z)^{+/2} Z^T W||_F^2.
inline constexpr double kOffsetConstant = 4.0;

/// ||(Z^T Z)^{+/2} Z^T W||_F^2.
double offset_projection_norm(const Matrix& z, const Matrix& w);

/// (1/NT) sum_t sup_F [4<W_t, Z_t F^T> - ||Z_t F^T||_F^2] with Z_t = g(X_t),
/// evaluated in closed form. N T is the total sample count.
double offset_complexity_stat(const std::vector<TaskDataset>& data, const Representation& rep,
                              const std::vector<Matrix>& noise);

}  // namespace mtrl::erm
