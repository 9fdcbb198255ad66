#pragma once

#include "grasplab/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace grasplab {

/// Squared-exponential ARD kernel: sf2 exp(-1/2 sum_d (x_d - x'_d)^2 / l_d^2),
/// plus observation noise variance on the Gram diagonal.
struct KernelParams {
  double signal_variance = 1.0;
  VecX lengthscales;
  double noise_variance = 1e-2;

  static KernelParams isotropic(int dim, double lengthscale, double signal_variance,
                                double noise_variance);
  void validate() const;
};

double kernel_eval(const KernelParams& p, const VecX& x, const VecX& y);

struct KernelBounds {
  double lengthscale_min = 1e-3;
  double lengthscale_max = 1e3;
  double signal_variance_min = 1e-8;
  double signal_variance_max = 1e4;
  double noise_variance_min = 1e-10;
  double noise_variance_max = 1e2;
};

/// Exact GP regression for one output channel with zero prior mean.
class ScalarGP {
 public:
  ScalarGP() = default;
  /// Factorizes the Gram matrix (with 1e-10 jitter). X holds one sample per row.
  ScalarGP(KernelParams params, MatX inputs, VecX labels);

  double mean(const VecX& x) const;
  double variance(const VecX& x) const;
  /// Mean and variance sharing one kernel vector.
  void predict(const VecX& x, double& mean, double& variance) const;

  double log_marginal_likelihood() const;
  /// 1/2 log det(I + K_ff / sigma^2) of the training set.
  double information_gain() const;
  /// sqrt(a^T K_ff a), the RKHS norm of the posterior mean.
  double rkhs_norm() const;

  const KernelParams& params() const { return params_; }
  int size() const { return static_cast<int>(labels_.size()); }

 private:
  VecX kernel_vector(const VecX& x) const;

  KernelParams params_;
  MatX inputs_;
  VecX labels_;
  Eigen::LLT<MatX> chol_;
  VecX alpha_;
};

/// Log marginal likelihood and its gradient with respect to
/// (log sf2, log l_1..l_d, log sn2).
double log_marginal_likelihood(const KernelParams& p, const MatX& inputs, const VecX& labels,
                               VecX* gradient = nullptr);

struct FitOptions {
  KernelBounds bounds;
  int restarts = 4;
  int max_iterations = 60;
  int max_fit_samples = 100;  // farthest-point subsample used for fitting
  std::uint64_t seed = 1;
};

struct FitResult {
  KernelParams params;
  double initial_log_likelihood = 0.0;
  double log_likelihood = 0.0;
  bool improved = false;
};

/// Multi-start L-BFGS ascent of the log marginal likelihood in log-parameter
/// space, with box bounds enforced by a smooth reparameterization.
FitResult fit_hyperparameters(const MatX& inputs, const VecX& labels, const FitOptions& opts,
                              const KernelParams* initial = nullptr);

/// Heuristic starting point: sf2 = var(y), l_d = spread of feature d, sn2 = var(y) / 10.
KernelParams initial_guess(const MatX& inputs, const VecX& labels, const KernelBounds& bounds);

struct Dataset {
  std::vector<std::string> input_names;
  std::vector<std::string> label_names;
  MatX inputs;  // samples x features
  MatX labels;  // samples x channels
  bool frozen = false;
  double freeze_time = 0.0;

  int size() const { return static_cast<int>(inputs.rows()); }
  void append(const VecX& x, const VecX& y);
  void write_csv(std::ostream& os) const;
  static Dataset read_csv(std::istream& is, int label_count);
};

/// Greedy farthest-point subset (first index = 0), in order of selection.
/// Distances are taken after scaling every feature by its range.
std::vector<int> farthest_point_subset(const MatX& points, int count);

/// Per-channel GP over a shared frozen dataset.
class GPModel {
 public:
  GPModel() = default;
  /// Prior-only model.
  GPModel(int input_dim, int channels, const KernelParams& prior);
  GPModel(const Dataset& data, std::vector<KernelParams> params);

  int input_dimension() const { return input_dim_; }
  int channels() const { return static_cast<int>(params_.size()); }
  bool trained() const { return !gps_.empty(); }
  const std::vector<KernelParams>& params() const { return params_; }
  int size() const { return trained() ? gps_.front().size() : 0; }

  VecX mean(const VecX& x) const;
  VecX variance(const VecX& x) const;
  void predict(const VecX& x, VecX& mean, VecX& variance) const;
  VecX information_gain() const;
  /// max over channels of the posterior-mean RKHS norm.
  double rkhs_norm() const;

 private:
  int input_dim_ = 0;
  std::vector<KernelParams> params_;
  std::vector<ScalarGP> gps_;
};

/// sqrt(2 B^2 + 300 gamma ln^3((N + 1) / (1 - delta^{1/channels}))).
double beta(double delta, double rkhs_bound, double info_gain, int samples, int channels);

/// Per-channel confidence multipliers and the resulting error radius.
struct ConfidenceBound {
  double delta = 0.9;
  double rkhs_bound = 0.0;
  VecX info_gain;
  VecX betas;

  static ConfidenceBound from_model(const GPModel& model, double delta, double rkhs_bound);
};

/// |beta o sigma(x)|_2.
double rho(const GPModel& model, const ConfidenceBound& bound, const VecX& x);
double rho_from_variance(const ConfidenceBound& bound, const VecX& variance);

/// Per-model confidence after splitting a global delta over `models` models.
double split_confidence(double delta, int models);

struct ScheduleOptions {
  std::vector<double> update_times{2.0, 6.0, 10.0};
  int budget = 200;
  FitOptions fit;
  double rkhs_scale = 2.0;  // B = scale x fitted RKHS norm
  double delta = 0.9;       // per-model confidence
  double prior_signal_variance = 1.0;  // model used before the first successful update
  double prior_rkhs_bound = 1.0;
};

/// Freeze-at-update learner: the active model only changes when update() is
/// called at a scheduled time, and never after the last one.
class ScheduledLearner {
 public:
  ScheduledLearner(int input_dim, int channels, ScheduleOptions opts,
                   std::vector<std::string> input_names = {},
                   std::vector<std::string> label_names = {});

  /// Adds to the live stream; the active model is unaffected.
  void record(const VecX& x, const VecX& y);
  /// True when `t` has reached the next pending update time.
  bool due(double t) const;
  /// Freezes the stream at time t, refits and refactorizes.
  void update(double t);

  const GPModel& model() const { return model_; }
  const ConfidenceBound& bound() const { return bound_; }
  const Dataset& frozen() const { return frozen_; }
  const Dataset& stream() const { return stream_; }
  int updates_done() const { return next_; }
  const std::vector<FitResult>& fits() const { return fits_; }

 private:
  ScheduleOptions opts_;
  int channels_;
  Dataset stream_;
  Dataset frozen_;
  GPModel model_;
  ConfidenceBound bound_;
  std::vector<FitResult> fits_;
  int next_ = 0;
};

}  // namespace grasplab
