#include "mtrl/erm.hpp"

#include <cmath>
#include <limits>

#include "mtrl/error.hpp"
#include "mtrl/rng.hpp"

namespace mtrl::erm {

namespace {

void check_tasks(const std::vector<TaskDataset>& data) {
  require(!data.empty(), ErrorCode::InvalidArgument, "first stage needs at least one task");
  const Eigen::Index dx = data.front().covariates.cols();
  const Eigen::Index dy = data.front().labels.cols();
  for (const auto& task : data) {
    task.validate();
    require(task.covariates.cols() == dx && task.labels.cols() == dy, ErrorCode::InvalidArgument,
            "tasks disagree on d_x or d_y");
  }
}

double mean_sq_residual(const Matrix& z, const Matrix& y, const Matrix& f) {
  return (y - z * f.transpose()).squaredNorm() / static_cast<double>(y.rows());
}

double label_energy(const std::vector<TaskDataset>& data) {
  double e = 0.0;
  for (const auto& task : data) e += task.labels.squaredNorm() / static_cast<double>(task.size());
  return e / static_cast<double>(data.size());
}

struct LinearState {
  Matrix g;  // r x d_x, orthonormal rows
  std::vector<Matrix> heads;
  std::vector<double> residuals;
  double objective = 0.0;
};

// Per-task sufficient statistics for the G step.
struct GramCache {
  std::vector<Matrix> xtx;  // d_x x d_x
  std::vector<Matrix> xty;  // d_x x d_y
  std::vector<double> weight;
};

GramCache build_cache(const std::vector<TaskDataset>& data) {
  GramCache c;
  for (const auto& task : data) {
    c.xtx.push_back(task.covariates.transpose() * task.covariates);
    c.xty.push_back(task.covariates.transpose() * task.labels);
    c.weight.push_back(1.0 / static_cast<double>(task.size()));
  }
  return c;
}

void refit_heads(const std::vector<TaskDataset>& data, LinearState& s) {
  s.heads.resize(data.size());
  s.residuals.resize(data.size());
  double total = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Matrix z = data[t].covariates * s.g.transpose();
    s.heads[t] = ls_head(z, data[t].labels).F;
    s.residuals[t] = mean_sq_residual(z, data[t].labels, s.heads[t]);
    total += s.residuals[t];
  }
  s.objective = total / static_cast<double>(data.size());
}

// Pooled least squares in vec(G^T) given the heads:
//   sum_t w_t (F_t^T F_t kron X_t^T X_t) vec(G^T) = sum_t w_t vec(X_t^T Y_t F_t).
Matrix solve_representation(const GramCache& c, const std::vector<Matrix>& heads, Eigen::Index r,
                            Eigen::Index dx) {
  const Eigen::Index n = r * dx;
  Matrix lhs = Matrix::Zero(n, n);
  Matrix rhs = Matrix::Zero(dx, r);
  for (std::size_t t = 0; t < heads.size(); ++t) {
    const Matrix ftf = heads[t].transpose() * heads[t];
    for (Eigen::Index a = 0; a < r; ++a) {
      for (Eigen::Index b = 0; b < r; ++b) {
        const double coeff = c.weight[t] * ftf(a, b);
        if (coeff != 0.0) lhs.block(a * dx, b * dx, dx, dx).noalias() += coeff * c.xtx[t];
      }
    }
    rhs.noalias() += c.weight[t] * c.xty[t] * heads[t];
  }
  const Vector b = Eigen::Map<const Vector>(rhs.data(), n);
  Vector sol;
  Eigen::LDLT<Matrix> ldlt(lhs);
  const double diag_max = lhs.diagonal().cwiseAbs().maxCoeff();
  const Vector d = ldlt.vectorD();
  const bool well_posed = ldlt.info() == Eigen::Success && diag_max > 0.0 &&
                          d.minCoeff() > 1e-12 * diag_max;
  sol = well_posed ? Vector(ldlt.solve(b)) : Vector(pinv(lhs) * b);
  const Matrix gt = Eigen::Map<const Matrix>(sol.data(), dx, r);
  return gt.transpose();
}

// Rotate G onto orthonormal rows and push the inverse rotation into the heads,
// so that every prediction F_t G x is unchanged.
void orthonormalize(Matrix& g, std::vector<Matrix>& heads) {
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix us = svd.matrixU() * svd.singularValues().asDiagonal();
  for (auto& f : heads) f = f * us;
  g = svd.matrixV().transpose();
}

}  // namespace

LinearHead ls_head(const Matrix& z, const Matrix& y) {
  require(z.rows() == y.rows() && z.rows() >= 1, ErrorCode::InvalidArgument,
          "ls_head: Z and Y need the same positive row count");
  require(all_finite(z) && all_finite(y), ErrorCode::InvalidMatrix, "ls_head: non-finite input");
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (z.col(j).cwiseAbs().maxCoeff() > 0.0) active.push_back(j);
  }
  Matrix f = Matrix::Zero(y.cols(), z.cols());
  if (active.empty()) return LinearHead(std::move(f));
  Matrix za(z.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) za.col(static_cast<Eigen::Index>(k)) = z.col(active[k]);
  const Matrix fa = (pinv(za) * y).transpose();
  for (std::size_t k = 0; k < active.size(); ++k) f.col(active[k]) = fa.col(static_cast<Eigen::Index>(k));
  return LinearHead(std::move(f));
}

double pooled_objective(const std::vector<TaskDataset>& data, const std::vector<LinearHead>& heads,
                        const Representation& rep) {
  require(data.size() == heads.size(), ErrorCode::InvalidArgument, "pooled_objective: one head per task");
  double total = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    total += mean_sq_residual(rep.apply(data[t].covariates), data[t].labels, heads[t].F);
  }
  return total / static_cast<double>(data.size());
}

FirstStageFit fit_first_stage_linear(const std::vector<TaskDataset>& data, int r, const LinearFitOptions& opts) {
  check_tasks(data);
  const Eigen::Index dx = data.front().covariates.cols();
  require(r >= 1 && r <= dx, ErrorCode::InvalidArgument, "fit_first_stage_linear: need 1 <= r <= d_x");
  require(opts.restarts >= 1 && opts.max_iters >= 1, ErrorCode::InvalidArgument,
          "fit_first_stage_linear: restarts and max_iters must be >= 1");
  bool any_signal = false;
  for (const auto& task : data) any_signal = any_signal || task.covariates.cwiseAbs().maxCoeff() > 0.0;
  require(any_signal, ErrorCode::DegenerateData, "fit_first_stage_linear: all covariates are zero");

  const GramCache cache = build_cache(data);
  const double floor = 1e-26 * std::max(label_energy(data), std::numeric_limits<double>::min());

  FirstStageFit best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opts.restarts; ++restart) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(restart)));
    LinearState s;
    s.g = rng.orthonormal_rows(r, dx);
    refit_heads(data, s);
    std::vector<double> trace{s.objective};
    bool converged = s.objective <= floor;
    int iter = 0;
    while (!converged && iter < opts.max_iters) {
      ++iter;
      LinearState next = s;
      next.g = solve_representation(cache, s.heads, r, dx);
      orthonormalize(next.g, next.heads);
      refit_heads(data, next);
      // Both blocks are exact minimisers, so the objective cannot increase
      // beyond round-off; a larger increase means the step went wrong.
      if (next.objective > s.objective * (1.0 + 1e-9) + floor) break;
      const double prev = s.objective;
      s = std::move(next);
      trace.push_back(s.objective);
      converged = s.objective <= floor || (prev - s.objective) <= opts.tol * prev;
    }
    if (s.objective < best.objective) {
      best.objective = s.objective;
      best.rep = Representation::linear(s.g);
      best.heads.clear();
      for (auto& f : s.heads) best.heads.emplace_back(f);
      best.per_task_residual = s.residuals;
      best.iterations = iter;
      best.converged = converged;
      best.objective_trace = std::move(trace);
    }
  }
  return best;
}

FirstStageFit fit_first_stage_finite(const std::vector<TaskDataset>& data,
                                     const std::vector<Representation>& dictionary,
                                     const std::string& dictionary_id) {
  require(!dictionary.empty(), ErrorCode::EmptyDictionary, "fit_first_stage_finite: empty dictionary");
  check_tasks(data);
  FirstStageFit best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < dictionary.size(); ++k) {
    const Representation& g = dictionary[k];
    std::vector<LinearHead> heads;
    std::vector<double> residuals;
    double total = 0.0;
    for (const auto& task : data) {
      const Matrix z = g.apply(task.covariates);
      heads.push_back(ls_head(z, task.labels));
      residuals.push_back(mean_sq_residual(z, task.labels, heads.back().F));
      total += residuals.back();
    }
    const double objective = total / static_cast<double>(data.size());
    if (objective < best.objective) {
      best.objective = objective;
      best.heads = std::move(heads);
      best.per_task_residual = std::move(residuals);
      best.rep = Representation::finite_member(dictionary_id, k, g);
      best.dictionary_index = k;
    }
  }
  best.iterations = static_cast<int>(dictionary.size());
  best.converged = true;
  best.objective_trace = {best.objective};
  return best;
}

LossGradient tanh_loss_gradient(const std::vector<TaskDataset>& data, const Matrix& w,
                                const std::vector<LinearHead>& heads) {
  require(data.size() == heads.size(), ErrorCode::InvalidArgument, "tanh_loss_gradient: one head per task");
  LossGradient out;
  out.grad = Matrix::Zero(w.rows(), w.cols());
  const double inv_t = 1.0 / static_cast<double>(data.size());
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Matrix& x = data[t].covariates;
    const Matrix h = (x * w.transpose()).array().tanh().matrix();
    const Matrix resid = data[t].labels - h * heads[t].F.transpose();
    const double scale = inv_t / static_cast<double>(x.rows());
    out.loss += scale * resid.squaredNorm();
    // d/dW of ||Y - tanh(X W^T) F^T||^2 = -2 [(R F) .* (1 - H^2)]^T X
    const Matrix dh = ((resid * heads[t].F).array() * (1.0 - h.array().square())).matrix();
    out.grad.noalias() -= 2.0 * scale * dh.transpose() * x;
  }
  return out;
}

namespace {

std::vector<LinearHead> tanh_heads(const std::vector<TaskDataset>& data, const Matrix& w) {
  std::vector<LinearHead> heads;
  heads.reserve(data.size());
  for (const auto& task : data) {
    heads.push_back(ls_head((task.covariates * w.transpose()).array().tanh().matrix(), task.labels));
  }
  return heads;
}

}  // namespace

double tanh_profile_loss(const std::vector<TaskDataset>& data, const Matrix& w) {
  return tanh_loss_gradient(data, w, tanh_heads(data, w)).loss;
}

FirstStageFit fit_first_stage_parametric(const std::vector<TaskDataset>& data, const ParametricFitOptions& opts) {
  check_tasks(data);
  require(opts.family == ParametricFamily::TanhFeatures, ErrorCode::InvalidArgument,
          "fit_first_stage_parametric: unsupported family");
  const Eigen::Index dx = data.front().covariates.cols();
  require(opts.r >= 1, ErrorCode::InvalidArgument, "fit_first_stage_parametric: need r >= 1");
  require(opts.lr > 0.0 && opts.restarts >= 1 && opts.max_iters >= 1, ErrorCode::InvalidArgument,
          "fit_first_stage_parametric: lr, restarts, max_iters must be positive");

  FirstStageFit best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opts.restarts; ++restart) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(restart)));
    Matrix w = (opts.init_scale / std::sqrt(static_cast<double>(dx))) * rng.normal_matrix(opts.r, dx);
    std::vector<LinearHead> heads = tanh_heads(data, w);
    LossGradient cur = tanh_loss_gradient(data, w, heads);
    require(std::isfinite(cur.loss), ErrorCode::DivergedOptimization, "non-finite initial loss");
    std::vector<double> trace{cur.loss};
    double step = opts.lr;
    bool converged = false;
    int iter = 0;
    while (iter < opts.max_iters && !converged) {
      ++iter;
      const double gnorm2 = cur.grad.squaredNorm();
      if (gnorm2 <= 1e-30) {
        converged = true;
        break;
      }
      // Armijo backtracking on the fixed-head loss, then refit the heads.
      bool accepted = false;
      Matrix w_next;
      LossGradient trial;
      for (int halving = 0; halving < 60; ++halving) {
        w_next = w - step * cur.grad;
        trial = tanh_loss_gradient(data, w_next, heads);
        require(std::isfinite(trial.loss), ErrorCode::DivergedOptimization, "non-finite loss during descent");
        if (trial.loss <= cur.loss - 0.5 * step * gnorm2) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        converged = true;
        break;
      }
      w = std::move(w_next);
      heads = tanh_heads(data, w);
      const double prev = cur.loss;
      cur = tanh_loss_gradient(data, w, heads);
      require(std::isfinite(cur.loss), ErrorCode::DivergedOptimization, "non-finite loss after head refit");
      trace.push_back(cur.loss);
      step = std::min(step * 2.0, 1e3 * opts.lr);
      converged = (prev - cur.loss) <= opts.tol * prev;
    }
    if (cur.loss < best.objective) {
      best.objective = cur.loss;
      best.rep = Representation::tanh_features(w);
      best.heads = heads;
      best.per_task_residual.clear();
      for (std::size_t t = 0; t < data.size(); ++t) {
        const Matrix z = best.rep.apply(data[t].covariates);
        best.per_task_residual.push_back(mean_sq_residual(z, data[t].labels, heads[t].F));
      }
      best.iterations = iter;
      best.converged = converged;
      best.objective_trace = std::move(trace);
    }
  }
  return best;
}

SecondStageFit fit_second_stage(const TaskDataset& target, const Representation& rep) {
  target.validate();
  const Matrix z = rep.apply(target.covariates);
  SecondStageFit out;
  out.head = ls_head(z, target.labels);
  out.residual = mean_sq_residual(z, target.labels, out.head.F);
  return out;
}

double offset_projection_norm(const Matrix& z, const Matrix& w) {
  require(z.rows() == w.rows(), ErrorCode::InvalidArgument, "offset_projection_norm: row mismatch");
  return (pinv_sqrt_psd(symmetrize(z.transpose() * z)) * (z.transpose() * w)).squaredNorm();
}

double offset_complexity_stat(const std::vector<TaskDataset>& data, const Representation& rep,
                              const std::vector<Matrix>& noise) {
  require(data.size() == noise.size(), ErrorCode::InvalidArgument, "offset_complexity_stat: one noise matrix per task");
  double total = 0.0;
  double count = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    require(noise[t].rows() == data[t].size() && noise[t].cols() == data[t].labels.cols(),
            ErrorCode::InvalidArgument, "offset_complexity_stat: noise shape mismatch");
    total += kOffsetConstant * offset_projection_norm(rep.apply(data[t].covariates), noise[t]);
    count += static_cast<double>(data[t].size());
  }
  return total / count;
}

}  // namespace mtrl::erm
