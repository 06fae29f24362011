#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mtrl/linalg.hpp"

namespace mtrl {

/// Covariate, label and representation dimensions.
struct Dims {
  int d_x = 1;
  int d_y = 1;
  int r = 1;

  /// Throws InvalidArgument unless all dims >= 1 and r <= d_x.
  void validate() const;
  friend bool operator==(const Dims&, const Dims&) = default;
};

enum class SampleKind { IidDraw, Trajectory };

const char* to_string(SampleKind kind) noexcept;

/// One task's sample: row i of `covariates` / `labels` is (x_i, y_i).
struct TaskDataset {
  int task_id = 0;
  Matrix covariates;  // N x d_x
  Matrix labels;      // N x d_y
  SampleKind kind = SampleKind::IidDraw;

  Eigen::Index size() const noexcept { return covariates.rows(); }
  void validate() const;
};

/// Linear task head F (d_y x r). A zero frobenius_bound means unconstrained.
struct LinearHead {
  Matrix F;
  double frobenius_bound = 0.0;

  LinearHead() = default;
  explicit LinearHead(Matrix f, double bound = 0.0);

  int d_y() const noexcept { return static_cast<int>(F.rows()); }
  int r() const noexcept { return static_cast<int>(F.cols()); }
};

/// Representation hypothesis g : R^{d_x} -> R^r.
///
/// Three kinds are supported: a linear map x -> G x (G must have full row
/// rank), the tanh feature family x -> tanh(W x) with parameters theta = vec(W),
/// and a member of a finite dictionary, which evaluates through the member it
/// refers to.
class Representation {
 public:
  enum class Kind { Linear, FiniteMember, Parametric };

  struct LinearMap {
    Matrix G;  // r x d_x
  };
  struct TanhFeatures {
    Matrix W;  // r x d_x, theta = vec(W) (column-major)
  };
  struct Member {
    std::string dictionary_id;
    std::size_t index = 0;
    std::shared_ptr<const Representation> target;
  };

  /// Throws InvalidMatrix if G is rank deficient (singular value ratio < 1e-10).
  static Representation linear(Matrix g, double sup_bound = 0.0);
  static Representation tanh_features(Matrix w);
  static Representation finite_member(std::string dictionary_id, std::size_t index,
                                      Representation member);

  Kind kind() const noexcept;
  int input_dim() const noexcept;
  int output_dim() const noexcept;
  double sup_bound() const noexcept { return sup_bound_; }

  /// Evaluate on a batch: X is N x d_x, result N x r.
  Matrix apply(const Matrix& x) const;

  /// Follows FiniteMember indirection to the concrete map.
  const Representation& resolved() const noexcept;

  /// Non-null iff the resolved representation is linear.
  const Matrix* linear_map() const noexcept;
  /// Non-null iff the resolved representation is a tanh feature map.
  const Matrix* tanh_weights() const noexcept;
  const Member* member() const noexcept;

  bool is_linear() const noexcept { return linear_map() != nullptr; }

 private:
  using Storage = std::variant<LinearMap, Member, TanhFeatures>;
  Representation(Storage storage, double sup_bound)
      : storage_(std::move(storage)), sup_bound_(sup_bound) {}

  Storage storage_;
  double sup_bound_ = 0.0;
};

struct GaussianLaw {
  Matrix sigma;  // d_x x d_x, symmetric PSD
};

/// x_{i+1} = A x_i + w_i with w_i ~ N(0, I).
struct LdsLaw {
  Matrix A;
};

/// Finite Markov chain on S states, embedded in R^{d_x} through the rows of
/// `embedding` (S x d_x), centred under the stationary law.
struct MarkovChainLaw {
  Matrix P;
  Matrix embedding;
  Vector stationary;

  /// e_s padded/truncated to d_x, then centred to zero stationary mean.
  static MarkovChainLaw with_centred_basis(const Matrix& p, int d_x);
};

using CovariateLaw = std::variant<GaussianLaw, LdsLaw, MarkovChainLaw>;

int covariate_dim(const CovariateLaw& law);
bool is_trajectory_law(const CovariateLaw& law) noexcept;
std::string law_name(const CovariateLaw& law);
void validate_law(const CovariateLaw& law);

struct TaskSpec {
  CovariateLaw law;
  LinearHead head;
};

/// Generative description of T + 1 tasks; tasks[0] is the target.
struct PopulationSpec {
  Dims dims;
  std::vector<TaskSpec> tasks;
  Representation rep_star = Representation::linear(Matrix::Identity(1, 1));
  double noise_sigma = 0.0;

  std::size_t num_sources() const noexcept { return tasks.empty() ? 0 : tasks.size() - 1; }
  void validate() const;
};

/// Stationary distribution of a row-stochastic matrix. Throws NotErgodic when
/// the eigenvalue 1 is not simple (no unique stationary law).
Vector stationary_distribution(const Matrix& p);

/// Throws InvalidMatrix unless P is square, non-negative, rows sum to 1 (1e-12).
void validate_row_stochastic(const Matrix& p);

}  // namespace mtrl
