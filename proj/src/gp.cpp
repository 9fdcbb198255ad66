#include "grasplab/gp.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace grasplab {

namespace {

constexpr double kJitter = 1e-10;

MatX gram(const KernelParams& p, const MatX& x) {
  const int n = static_cast<int>(x.rows());
  const VecX inv_l2 = p.lengthscales.array().square().inverse();
  MatX k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = p.signal_variance;
    for (int j = i + 1; j < n; ++j) {
      const double d2 = ((x.row(i) - x.row(j)).array().square() * inv_l2.transpose().array()).sum();
      k(i, j) = k(j, i) = p.signal_variance * std::exp(-0.5 * d2);
    }
  }
  return k;
}

}  // namespace

KernelParams KernelParams::isotropic(int dim, double lengthscale, double signal_variance,
                                     double noise_variance) {
  KernelParams p;
  p.signal_variance = signal_variance;
  p.lengthscales = VecX::Constant(dim, lengthscale);
  p.noise_variance = noise_variance;
  return p;
}

void KernelParams::validate() const {
  if (!(signal_variance > 0.0) || !(noise_variance > 0.0) || lengthscales.size() == 0 ||
      (lengthscales.array() <= 0.0).any()) {
    throw ConfigError("kernel parameters must be strictly positive");
  }
}

double kernel_eval(const KernelParams& p, const VecX& x, const VecX& y) {
  if (x.size() != y.size() || x.size() != p.lengthscales.size()) {
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  }
  const double d2 = ((x - y).array() / p.lengthscales.array()).square().sum();
  return p.signal_variance * std::exp(-0.5 * d2);
}

ScalarGP::ScalarGP(KernelParams params, MatX inputs, VecX labels)
    : params_(std::move(params)), inputs_(std::move(inputs)), labels_(std::move(labels)) {
  params_.validate();
  if (inputs_.rows() != labels_.size()) throw std::invalid_argument("ScalarGP: size mismatch");
  MatX k = gram(params_, inputs_);
  k.diagonal().array() += params_.noise_variance + kJitter;
  chol_.compute(k);
  if (chol_.info() != Eigen::Success) throw SolverError("GP Gram matrix is not positive definite");
  alpha_ = chol_.solve(labels_);
}

VecX ScalarGP::kernel_vector(const VecX& x) const {
  const int n = static_cast<int>(inputs_.rows());
  const VecX inv_l2 = params_.lengthscales.array().square().inverse();
  VecX k(n);
  for (int i = 0; i < n; ++i) {
    const double d2 = ((inputs_.row(i).transpose() - x).array().square() * inv_l2.array()).sum();
    k(i) = params_.signal_variance * std::exp(-0.5 * d2);
  }
  return k;
}

double ScalarGP::mean(const VecX& x) const {
  if (labels_.size() == 0) return 0.0;
  return kernel_vector(x).dot(alpha_);
}

double ScalarGP::variance(const VecX& x) const {
  double m = 0.0;
  double v = 0.0;
  predict(x, m, v);
  return v;
}

void ScalarGP::predict(const VecX& x, double& mean, double& variance) const {
  if (labels_.size() == 0) {
    mean = 0.0;
    variance = params_.signal_variance;
    return;
  }
  const VecX k = kernel_vector(x);
  mean = k.dot(alpha_);
  const VecX w = chol_.matrixL().solve(k);
  variance = std::clamp(params_.signal_variance - w.squaredNorm(), 0.0, params_.signal_variance);
}

double ScalarGP::log_marginal_likelihood() const {
  const int n = static_cast<int>(labels_.size());
  if (n == 0) return 0.0;
  const double log_det = 2.0 * chol_.matrixLLT().diagonal().array().log().sum();
  return -0.5 * labels_.dot(alpha_) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

double ScalarGP::information_gain() const {
  const int n = static_cast<int>(labels_.size());
  if (n == 0) return 0.0;
  // K = K_ff + sn2 I, so 1/2 log det(K / sn2) = sum log L_ii - n/2 log sn2
  const double sn2 = params_.noise_variance + kJitter;
  return std::max(0.0, chol_.matrixLLT().diagonal().array().log().sum() - 0.5 * n * std::log(sn2));
}

double ScalarGP::rkhs_norm() const {
  if (labels_.size() == 0) return 0.0;
  const double sn2 = params_.noise_variance + kJitter;
  // K_ff a = K a - sn2 a = y - sn2 a
  const double q = alpha_.dot(labels_ - sn2 * alpha_);
  return std::sqrt(std::max(0.0, q));
}

double log_marginal_likelihood(const KernelParams& p, const MatX& x, const VecX& y,
                               VecX* gradient) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const MatX kf = gram(p, x);
  MatX k = kf;
  k.diagonal().array() += p.noise_variance + kJitter;
  Eigen::LLT<MatX> llt(k);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const VecX a = llt.solve(y);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(a) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
  if (gradient) {
    // dL/dth = 1/2 tr((a a^T - K^{-1}) dK/dth)
    const MatX w = a * a.transpose() - llt.solve(MatX::Identity(n, n));
    const MatX wk = w.cwiseProduct(kf);
    gradient->resize(d + 2);
    (*gradient)(0) = 0.5 * wk.sum();
    for (int dim = 0; dim < d; ++dim) {
      const double inv_l2 = 1.0 / (p.lengthscales(dim) * p.lengthscales(dim));
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const double diff = x(i, dim) - x(j, dim);
          s += wk(i, j) * diff * diff;
        }
      }
      (*gradient)(1 + dim) = 0.5 * 2.0 * s * inv_l2;
    }
    (*gradient)(d + 1) = 0.5 * p.noise_variance * w.trace();
  }
  return lml;
}

namespace {

struct LogBox {
  VecX lo;
  VecX hi;

  VecX to_theta(const double* u, int n) const {
    VecX th(n);
    for (int i = 0; i < n; ++i) th(i) = lo(i) + (hi(i) - lo(i)) / (1.0 + std::exp(-u[i]));
    return th;
  }
  double to_u(double theta, int i) const {
    const double s = std::clamp((theta - lo(i)) / (hi(i) - lo(i)), 1e-9, 1.0 - 1e-9);
    return std::log(s / (1.0 - s));
  }
};

KernelParams from_log(const VecX& th) {
  KernelParams p;
  const int d = static_cast<int>(th.size()) - 2;
  p.signal_variance = std::exp(th(0));
  p.lengthscales = th.segment(1, d).array().exp();
  p.noise_variance = std::exp(th(d + 1));
  return p;
}

VecX to_log(const KernelParams& p) {
  const int d = static_cast<int>(p.lengthscales.size());
  VecX th(d + 2);
  th(0) = std::log(p.signal_variance);
  th.segment(1, d) = p.lengthscales.array().log();
  th(d + 1) = std::log(p.noise_variance);
  return th;
}

class NegativeLml final : public ceres::FirstOrderFunction {
 public:
  NegativeLml(const MatX& x, const VecX& y, const LogBox& box) : x_(x), y_(y), box_(box) {}

  bool Evaluate(const double* u, double* cost, double* gradient) const override {
    const int n = NumParameters();
    const VecX th = box_.to_theta(u, n);
    VecX g;
    const double lml = log_marginal_likelihood(from_log(th), x_, y_, gradient ? &g : nullptr);
    if (!std::isfinite(lml)) return false;
    *cost = -lml;
    if (gradient) {
      for (int i = 0; i < n; ++i) {
        const double s = (th(i) - box_.lo(i)) / (box_.hi(i) - box_.lo(i));
        gradient[i] = -g(i) * (box_.hi(i) - box_.lo(i)) * s * (1.0 - s);
      }
    }
    return true;
  }
  int NumParameters() const override { return static_cast<int>(box_.lo.size()); }

 private:
  const MatX& x_;
  const VecX& y_;
  const LogBox& box_;
};

KernelParams clamp_params(KernelParams p, const KernelBounds& b) {
  p.signal_variance = std::clamp(p.signal_variance, b.signal_variance_min, b.signal_variance_max);
  p.noise_variance = std::clamp(p.noise_variance, b.noise_variance_min, b.noise_variance_max);
  for (int i = 0; i < p.lengthscales.size(); ++i) {
    p.lengthscales(i) = std::clamp(p.lengthscales(i), b.lengthscale_min, b.lengthscale_max);
  }
  return p;
}

}  // namespace

KernelParams initial_guess(const MatX& x, const VecX& y, const KernelBounds& bounds) {
  const int d = static_cast<int>(x.cols());
  const double n = std::max<double>(1.0, static_cast<double>(y.size()));
  const double mean = y.sum() / n;
  const double var = std::max((y.array() - mean).square().sum() / n, 1e-6);
  KernelParams p;
  p.signal_variance = var;
  p.noise_variance = 0.1 * var;
  p.lengthscales.resize(d);
  for (int i = 0; i < d; ++i) {
    const double spread = x.rows() > 0 ? x.col(i).maxCoeff() - x.col(i).minCoeff() : 1.0;
    p.lengthscales(i) = spread > 1e-6 ? spread : 1.0;
  }
  return clamp_params(p, bounds);
}

FitResult fit_hyperparameters(const MatX& inputs, const VecX& labels, const FitOptions& opts,
                              const KernelParams* initial) {
  if (inputs.rows() < 5) throw std::invalid_argument("fit_hyperparameters needs >= 5 samples");
  MatX x = inputs;
  VecX y = labels;
  if (opts.max_fit_samples > 0 && inputs.rows() > opts.max_fit_samples) {
    const std::vector<int> idx = farthest_point_subset(inputs, opts.max_fit_samples);
    x.resize(static_cast<int>(idx.size()), inputs.cols());
    y.resize(static_cast<int>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      x.row(static_cast<int>(i)) = inputs.row(idx[i]);
      y(static_cast<int>(i)) = labels(idx[i]);
    }
  }
  const int d = static_cast<int>(x.cols());
  const KernelBounds& b = opts.bounds;
  LogBox box;
  box.lo.resize(d + 2);
  box.hi.resize(d + 2);
  box.lo(0) = std::log(b.signal_variance_min);
  box.hi(0) = std::log(b.signal_variance_max);
  box.lo.segment(1, d).setConstant(std::log(b.lengthscale_min));
  box.hi.segment(1, d).setConstant(std::log(b.lengthscale_max));
  box.lo(d + 1) = std::log(b.noise_variance_min);
  box.hi(d + 1) = std::log(b.noise_variance_max);

  const KernelParams start = clamp_params(initial ? *initial : initial_guess(x, y, b), b);
  FitResult best;
  best.params = start;
  best.initial_log_likelihood = log_marginal_likelihood(start, x, y);
  best.log_likelihood = best.initial_log_likelihood;

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::LBFGS;
  options.max_num_iterations = opts.max_iterations;
  options.logging_type = ceres::SILENT;
  options.minimizer_progress_to_stdout = false;

  const VecX th0 = to_log(start);
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    VecX th = th0;
    if (r > 0) {
      for (int i = 0; i < th.size(); ++i) th(i) += normal(rng);
    }
    std::vector<double> u(th.size());
    for (int i = 0; i < th.size(); ++i) u[i] = box.to_u(std::clamp(th(i), box.lo(i), box.hi(i)), i);
    ceres::GradientProblem problem(new NegativeLml(x, y, box));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, u.data(), &summary);
    const KernelParams p = clamp_params(from_log(box.to_theta(u.data(), d + 2)), b);
    const double lml = log_marginal_likelihood(p, x, y);
    if (std::isfinite(lml) && lml > best.log_likelihood) {
      best.params = p;
      best.log_likelihood = lml;
      best.improved = true;
    }
  }
  return best;
}

void Dataset::append(const VecX& x, const VecX& y) {
  if (frozen) throw std::logic_error("dataset is frozen");
  if (inputs.rows() == 0) {
    inputs.resize(0, x.size());
    labels.resize(0, y.size());
  }
  if (x.size() != inputs.cols() || y.size() != labels.cols()) {
    throw std::invalid_argument("dataset sample has the wrong dimension");
  }
  inputs.conservativeResize(inputs.rows() + 1, Eigen::NoChange);
  labels.conservativeResize(labels.rows() + 1, Eigen::NoChange);
  inputs.row(inputs.rows() - 1) = x.transpose();
  labels.row(labels.rows() - 1) = y.transpose();
}

void Dataset::write_csv(std::ostream& os) const {
  const int nx = static_cast<int>(inputs.cols());
  const int ny = static_cast<int>(labels.cols());
  for (int i = 0; i < nx; ++i) {
    os << (i < static_cast<int>(input_names.size()) ? input_names[i] : "x" + std::to_string(i)) << ',';
  }
  for (int i = 0; i < ny; ++i) {
    os << (i < static_cast<int>(label_names.size()) ? label_names[i] : "y" + std::to_string(i))
       << (i + 1 < ny ? "," : "\n");
  }
  os.precision(17);
  for (int r = 0; r < inputs.rows(); ++r) {
    for (int i = 0; i < nx; ++i) os << inputs(r, i) << ',';
    for (int i = 0; i < ny; ++i) os << labels(r, i) << (i + 1 < ny ? "," : "\n");
  }
}

Dataset Dataset::read_csv(std::istream& is, int label_count) {
  Dataset d;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("dataset CSV is empty");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  const int cols = static_cast<int>(names.size());
  if (label_count < 0 || label_count > cols) throw std::runtime_error("bad label count");
  d.input_names.assign(names.begin(), names.end() - label_count);
  d.label_names.assign(names.end() - label_count, names.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw std::runtime_error("bad number '" + cell + "' in dataset CSV");
      }
      row.push_back(v);
    }
    if (static_cast<int>(row.size()) != cols) throw std::runtime_error("ragged dataset CSV row");
    rows.push_back(std::move(row));
  }
  const int nx = cols - label_count;
  d.inputs.resize(static_cast<int>(rows.size()), nx);
  d.labels.resize(static_cast<int>(rows.size()), label_count);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int i = 0; i < nx; ++i) d.inputs(static_cast<int>(r), i) = rows[r][i];
    for (int i = 0; i < label_count; ++i) d.labels(static_cast<int>(r), i) = rows[r][nx + i];
  }
  return d;
}

std::vector<int> farthest_point_subset(const MatX& points, int count) {
  const int n = static_cast<int>(points.rows());
  std::vector<int> out;
  if (n == 0 || count <= 0) return out;
  count = std::min(count, n);
  // scale features by their spread so no coordinate dominates
  VecX scale(points.cols());
  for (int c = 0; c < points.cols(); ++c) {
    const double s = points.col(c).maxCoeff() - points.col(c).minCoeff();
    scale(c) = s > 1e-12 ? 1.0 / s : 0.0;
  }
  const MatX p = points * scale.asDiagonal();
  VecX dist = VecX::Constant(n, std::numeric_limits<double>::infinity());
  int current = 0;
  for (int k = 0; k < count; ++k) {
    out.push_back(current);
    dist = dist.cwiseMin((p.rowwise() - p.row(current)).rowwise().squaredNorm());
    dist(current) = -1.0;
    Eigen::Index next = 0;
    dist.maxCoeff(&next);
    current = static_cast<int>(next);
  }
  return out;
}

GPModel::GPModel(int input_dim, int channels, const KernelParams& prior)
    : input_dim_(input_dim), params_(channels, prior) {
  if (prior.lengthscales.size() != input_dim) throw std::invalid_argument("prior dimension");
}

GPModel::GPModel(const Dataset& data, std::vector<KernelParams> params)
    : input_dim_(static_cast<int>(data.inputs.cols())), params_(std::move(params)) {
  if (static_cast<int>(params_.size()) != data.labels.cols()) {
    throw std::invalid_argument("one kernel per label channel required");
  }
  for (std::size_t c = 0; c < params_.size(); ++c) {
    gps_.emplace_back(params_[c], data.inputs, data.labels.col(static_cast<int>(c)));
  }
}

VecX GPModel::mean(const VecX& x) const {
  VecX m = VecX::Zero(channels());
  for (std::size_t c = 0; c < gps_.size(); ++c) m(static_cast<int>(c)) = gps_[c].mean(x);
  return m;
}

VecX GPModel::variance(const VecX& x) const {
  VecX m;
  VecX v;
  predict(x, m, v);
  return v;
}

void GPModel::predict(const VecX& x, VecX& mean, VecX& variance) const {
  mean = VecX::Zero(channels());
  variance.resize(channels());
  for (int c = 0; c < channels(); ++c) {
    if (gps_.empty()) {
      variance(c) = params_[c].signal_variance;
    } else {
      gps_[c].predict(x, mean(c), variance(c));
    }
  }
}

VecX GPModel::information_gain() const {
  VecX g = VecX::Zero(channels());
  for (std::size_t c = 0; c < gps_.size(); ++c) g(static_cast<int>(c)) = gps_[c].information_gain();
  return g;
}

double GPModel::rkhs_norm() const {
  double b = 0.0;
  for (const auto& gp : gps_) b = std::max(b, gp.rkhs_norm());
  return b;
}

double beta(double delta, double rkhs_bound, double info_gain, int samples, int channels) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("beta: delta must lie in (0, 1)");
  if (channels <= 0 || samples < 0) throw std::invalid_argument("beta: bad counts");
  const double denom = -std::expm1(std::log(delta) / channels);  // 1 - delta^{1/channels}
  const double l = std::log((samples + 1.0) / denom);
  return std::sqrt(2.0 * rkhs_bound * rkhs_bound + 300.0 * info_gain * l * l * l);
}

ConfidenceBound ConfidenceBound::from_model(const GPModel& model, double delta, double rkhs_bound) {
  ConfidenceBound b;
  b.delta = delta;
  b.rkhs_bound = rkhs_bound;
  b.info_gain = model.information_gain();
  b.betas.resize(model.channels());
  for (int c = 0; c < model.channels(); ++c) {
    b.betas(c) = beta(delta, rkhs_bound, b.info_gain(c), model.size(), model.channels());
  }
  return b;
}

double rho_from_variance(const ConfidenceBound& bound, const VecX& variance) {
  return (bound.betas.array() * variance.array().max(0.0).sqrt()).matrix().norm();
}

double rho(const GPModel& model, const ConfidenceBound& bound, const VecX& x) {
  return rho_from_variance(bound, model.variance(x));
}

double split_confidence(double delta, int models) {
  return 1.0 - (1.0 - delta) / static_cast<double>(models);
}

ScheduledLearner::ScheduledLearner(int input_dim, int channels, ScheduleOptions opts,
                                   std::vector<std::string> input_names,
                                   std::vector<std::string> label_names)
    : opts_(std::move(opts)), channels_(channels) {
  if (!std::is_sorted(opts_.update_times.begin(), opts_.update_times.end()) ||
      std::adjacent_find(opts_.update_times.begin(), opts_.update_times.end()) !=
          opts_.update_times.end()) {
    throw ConfigError("GP update times must be strictly increasing");
  }
  stream_.input_names = input_names;
  stream_.label_names = label_names;
  frozen_ = stream_;
  frozen_.frozen = true;
  model_ = GPModel(input_dim, channels,
                   KernelParams::isotropic(input_dim, 1.0, opts_.prior_signal_variance, 1e-2));
  bound_ = ConfidenceBound::from_model(model_, opts_.delta, opts_.prior_rkhs_bound);
}

void ScheduledLearner::record(const VecX& x, const VecX& y) { stream_.append(x, y); }

bool ScheduledLearner::due(double t) const {
  return next_ < static_cast<int>(opts_.update_times.size()) &&
         t + 1e-12 >= opts_.update_times[next_];
}

void ScheduledLearner::update(double t) {
  if (next_ >= static_cast<int>(opts_.update_times.size())) return;
  ++next_;
  Dataset snap;
  snap.input_names = stream_.input_names;
  snap.label_names = stream_.label_names;
  snap.freeze_time = t;
  if (stream_.size() > opts_.budget) {
    const std::vector<int> idx = farthest_point_subset(stream_.inputs, opts_.budget);
    snap.inputs.resize(static_cast<int>(idx.size()), stream_.inputs.cols());
    snap.labels.resize(static_cast<int>(idx.size()), stream_.labels.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      snap.inputs.row(static_cast<int>(i)) = stream_.inputs.row(idx[i]);
      snap.labels.row(static_cast<int>(i)) = stream_.labels.row(idx[i]);
    }
  } else {
    snap.inputs = stream_.inputs;
    snap.labels = stream_.labels;
  }
  snap.frozen = true;
  if (snap.size() < 5) {
    frozen_ = snap;
    return;  // too little data: stay with the current model
  }
  std::vector<KernelParams> params;
  for (int c = 0; c < channels_; ++c) {
    FitOptions fo = opts_.fit;
    fo.seed = opts_.fit.seed + 7919ULL * static_cast<std::uint64_t>(c) + 104729ULL * next_;
    const FitResult fit = fit_hyperparameters(snap.inputs, snap.labels.col(c), fo);
    fits_.push_back(fit);
    params.push_back(fit.params);
  }
  frozen_ = snap;
  model_ = GPModel(frozen_, std::move(params));
  bound_ = ConfidenceBound::from_model(model_, opts_.delta,
                                       opts_.rkhs_scale * model_.rkhs_norm());
}

}  // namespace grasplab
