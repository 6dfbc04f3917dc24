#include "survival_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "math_utils.hpp"

namespace sace {

namespace {

constexpr double kSeparationNorm = 50.0;     // expit saturates well before this
constexpr double kBoundarySigma2 = 1e-6;     // below this the GLMM collapses
constexpr double kEtaFloor = -9.2103403719;  // 0.5 * log(1e-8)

void require_valid(const CrtDataset& data) {
  const ValidationReport report = validate_dataset(data);
  if (!report.passed()) {
    throw InputError("dataset failed validation: " + report.summary());
  }
}

double glm_loglik(const std::vector<ClusterWork>& work, const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (const auto& c : work) {
    const Eigen::VectorXd eta = c.D * beta;
    for (int j = 0; j < eta.size(); ++j) ll += c.S[j] * eta[j] - log1pexp(eta[j]);
  }
  return ll;
}

Eigen::VectorXd glm_score(const std::vector<ClusterWork>& work, const Eigen::VectorXd& beta) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(beta.size());
  for (const auto& c : work) {
    const Eigen::VectorXd eta = c.D * beta;
    for (int j = 0; j < eta.size(); ++j) {
      g += c.D.row(j).transpose() * (c.S[j] - expit(eta[j]));
    }
  }
  return g;
}

FittedSurvivalModel fit_glm_internal(const std::vector<ClusterWork>& work, const DesignSpec& spec,
                                     const FitOptions& opts) {
  const int p = static_cast<int>(spec.dimension());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double tol = std::min(opts.tol, 1e-9);
  double ll = glm_loglik(work, beta);

  FittedSurvivalModel model;
  model.kind = ModelKind::kMarginal;
  model.design = spec;

  for (int it = 1; it <= opts.max_iter; ++it) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
    for (const auto& c : work) {
      const Eigen::VectorXd eta = c.D * beta;
      for (int j = 0; j < eta.size(); ++j) {
        const double w = expit(eta[j]);
        g += c.D.row(j).transpose() * (c.S[j] - w);
        H.noalias() += std::max(w * (1.0 - w), 1e-12) * (c.D.row(j).transpose() * c.D.row(j));
      }
    }
    model.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      model.converged = true;
      break;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
    if (lu.rank() < p) {
      throw FitError("singular weighted cross-product in logistic regression (rank " +
                     std::to_string(lu.rank()) + " < " + std::to_string(p) + ")");
    }
    Eigen::VectorXd step = lu.solve(g);
    // step halving keeps the likelihood monotone
    double scale = 1.0;
    for (int h = 0; h < 30; ++h) {
      const Eigen::VectorXd candidate = beta + scale * step;
      const double cll = glm_loglik(work, candidate);
      if (cll >= ll - 1e-12) {
        beta = candidate;
        ll = cll;
        break;
      }
      scale *= 0.5;
    }
    if (beta.lpNorm<Eigen::Infinity>() > kSeparationNorm) {
      throw FitError("complete separation detected in logistic regression (|beta|_inf > " +
                     std::to_string(kSeparationNorm) + ")");
    }
  }
  if (!model.converged) {
    throw FitError("logistic regression did not converge in " + std::to_string(opts.max_iter) +
                   " iterations (final score inf-norm " +
                   std::to_string(glm_score(work, beta).lpNorm<Eigen::Infinity>()) + ")");
  }
  model.beta = beta;
  model.sigma2_b = 0.0;
  model.loglik = ll;
  return model;
}

// 0.5 x the variance of per-cluster empirical logits, floored at 0.05.
double initial_sigma2(const std::vector<ClusterWork>& work) {
  std::vector<double> logits;
  logits.reserve(work.size());
  for (const auto& c : work) {
    const double n = static_cast<double>(c.S.size());
    const double rate = (c.S.sum() + 0.5) / (n + 1.0);
    logits.push_back(logit(rate));
  }
  const double mean = std::accumulate(logits.begin(), logits.end(), 0.0) / logits.size();
  double var = 0.0;
  for (double l : logits) var += (l - mean) * (l - mean);
  var /= std::max<std::size_t>(logits.size() - 1, 1);
  return std::max(0.05, 0.5 * var);
}

struct GlmmEval {
  double loglik = 0.0;
  Eigen::VectorXd score;  // (beta, sigma2_b) space, length p+1
};

GlmmEval eval_glmm(const std::vector<ClusterWork>& work, const Eigen::VectorXd& beta, double v,
                   const GhRule& rule, std::vector<double>* modes,
                   std::vector<double>* scales = nullptr) {
  const int p = static_cast<int>(beta.size());
  GlmmEval out;
  out.score = Eigen::VectorXd::Zero(p + 1);
  out.loglik = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const auto& c = work[i];
    const double warm = modes ? (*modes)[i] : 0.0;
    ScoreIntegrals si;
    try {
      si = score_integrals(c.D, c.S, beta, v, rule, warm);
    } catch (const IntegrationError& e) {
      throw FitError("integration failed for cluster '" + c.id + "': " + e.what());
    }
    out.loglik += -0.5 * std::log(2.0 * M_PI * v) + c.S.dot(c.D * beta) + si.log_gmax +
                  std::log(si.i1);
    out.score.head(p) += c.D.transpose() * c.S - si.i4 / si.i1;
    out.score[p] += -0.5 / v + 0.5 * (si.i2 / si.i1) / (v * v);
    if (modes) (*modes)[i] = si.center.mode;
    if (scales) (*scales)[i] = si.center.scale;
  }
  return out;
}

}  // namespace

std::vector<ClusterWork> build_working(const CrtDataset& data, const DesignSpec& spec) {
  const DesignMatrices obs = build_design(data, spec, std::nullopt);
  // counterfactual designs only exist when the treatment column does; the
  // likelihood/score paths never touch D0/D1
  const DesignMatrices d0 = spec.include_treatment ? build_design(data, spec, 0) : obs;
  const DesignMatrices d1 = spec.include_treatment ? build_design(data, spec, 1) : obs;
  std::vector<ClusterWork> work;
  work.reserve(data.clusters.size());
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    const Cluster& c = data.clusters[i];
    ClusterWork w;
    w.id = c.id;
    w.treatment = static_cast<double>(c.treatment);
    w.D = obs.per_cluster[i];
    w.D0 = d0.per_cluster[i];
    w.D1 = d1.per_cluster[i];
    w.S.resize(c.individuals.size());
    w.Y.resize(c.individuals.size());
    for (std::size_t j = 0; j < c.individuals.size(); ++j) {
      w.S[j] = static_cast<double>(c.individuals[j].survival);
      w.Y[j] = c.individuals[j].outcome.value_or(0.0);
    }
    work.push_back(std::move(w));
  }
  return work;
}

double loglik_glmm(const std::vector<ClusterWork>& work, const Eigen::VectorXd& beta,
                   double sigma2_b, const GhRule& rule) {
  if (!(sigma2_b > 0.0)) throw ConfigError("loglik_glmm requires sigma2_b > 0");
  return eval_glmm(work, beta, sigma2_b, rule, nullptr).loglik;
}

double loglik_glmm(const CrtDataset& data, const DesignSpec& spec, const Eigen::VectorXd& beta,
                   double sigma2_b, const GhRule& rule) {
  return loglik_glmm(build_working(data, spec), beta, sigma2_b, rule);
}

Eigen::VectorXd score_glmm(const std::vector<ClusterWork>& work, const Eigen::VectorXd& beta,
                           double sigma2_b, const GhRule& rule) {
  if (!(sigma2_b > 0.0)) throw ConfigError("score_glmm requires sigma2_b > 0");
  return eval_glmm(work, beta, sigma2_b, rule, nullptr).score;
}

Eigen::VectorXd score_glmm(const CrtDataset& data, const DesignSpec& spec,
                           const Eigen::VectorXd& beta, double sigma2_b, const GhRule& rule) {
  return score_glmm(build_working(data, spec), beta, sigma2_b, rule);
}

FittedSurvivalModel fit_glm(const CrtDataset& data, const DesignSpec& spec,
                            const FitOptions& opts) {
  require_valid(data);
  return fit_glm_internal(build_working(data, spec), spec, opts);
}

FittedSurvivalModel fit_glmm(const CrtDataset& data, const DesignSpec& spec, const GhRule& rule,
                             const FitOptions& opts) {
  require_valid(data);
  const std::vector<ClusterWork> work = build_working(data, spec);
  const int p = static_cast<int>(spec.dimension());

  Eigen::VectorXd beta;
  double v0;
  FittedSurvivalModel glm_fallback;
  if (opts.warm_start) {
    beta = opts.warm_start->first;
    v0 = std::max(opts.warm_start->second, 0.05);
    if (beta.size() != p) throw ConfigError("warm start dimension mismatch");
  } else {
    glm_fallback = fit_glm_internal(work, spec, opts);
    beta = glm_fallback.beta;
    v0 = initial_sigma2(work);
  }

  // optimize phi = (beta, eta) with sigma2_b = exp(2 eta); eta floored so the
  // objective stays finite while the boundary is approached
  Eigen::VectorXd phi(p + 1);
  phi.head(p) = beta;
  phi[p] = std::max(0.5 * std::log(v0), kEtaFloor);

  std::vector<double> modes(work.size(), 0.0);
  std::vector<double> scales(work.size(), 1.0);

  auto unpack_v = [&](const Eigen::VectorXd& ph) { return std::exp(2.0 * ph[p]); };
  auto objective = [&](const Eigen::VectorXd& ph, Eigen::VectorXd& grad_phi,
                       Eigen::VectorXd& score_theta) {
    const double v = unpack_v(ph);
    const GlmmEval ev = eval_glmm(work, ph.head(p), v, rule, &modes, &scales);
    score_theta = ev.score;
    grad_phi.resize(p + 1);
    grad_phi.head(p) = -ev.score.head(p);
    grad_phi[p] = -2.0 * v * ev.score[p];  // chain rule through sigma2 = exp(2 eta)
    return -ev.loglik;
  };

  Eigen::VectorXd grad(p + 1), score(p + 1);
  double f = objective(phi, grad, score);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p + 1, p + 1);

  FittedSurvivalModel model;
  model.kind = ModelKind::kConditional;
  model.design = spec;
  model.quad_order = rule.order;

  bool boundary = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double v = unpack_v(phi);
    if (score.lpNorm<Eigen::Infinity>() <= opts.tol) break;
    if (phi[p] <= kEtaFloor + 1e-12 && score.head(p).lpNorm<Eigen::Infinity>() <= opts.tol &&
        score[p] < 0.0) {
      boundary = true;  // variance pinned at the floor, likelihood pushes down
      break;
    }

    Eigen::VectorXd direction = -(hinv * grad);
    if (direction.dot(grad) >= 0.0) {
      hinv = Eigen::MatrixXd::Identity(p + 1, p + 1);
      direction = -grad;
    }

    // Armijo backtracking
    double step = 1.0;
    const double slope = grad.dot(direction);
    Eigen::VectorXd phi_new = phi, grad_new = grad, score_new = score;
    double f_new = f;
    bool moved = false;
    for (int h = 0; h < 40; ++h) {
      phi_new = phi + step * direction;
      if (phi_new[p] < kEtaFloor) phi_new[p] = kEtaFloor;
      f_new = objective(phi_new, grad_new, score_new);
      if (f_new <= f + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      // line search stalled: accept if the score is already small, else fail below
      break;
    }

    const Eigen::VectorXd s = phi_new - phi;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const Eigen::VectorXd hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    phi = phi_new;
    f = f_new;
    grad = grad_new;
    score = score_new;

    if (phi.head(p).lpNorm<Eigen::Infinity>() > kSeparationNorm) {
      throw FitError("complete separation detected in mixed-model fit (|beta|_inf > " +
                     std::to_string(kSeparationNorm) + ")");
    }
    (void)v;
  }

  const double v_hat = unpack_v(phi);
  if (!boundary && v_hat < kBoundarySigma2 &&
      score.head(p).lpNorm<Eigen::Infinity>() <= 10.0 * opts.tol) {
    boundary = true;
  }

  if (boundary) {
    FittedSurvivalModel collapsed =
        opts.warm_start ? fit_glm_internal(work, spec, opts) : glm_fallback;
    if (collapsed.beta.size() == 0) collapsed = fit_glm_internal(work, spec, opts);
    collapsed.kind = ModelKind::kConditional;
    collapsed.boundary = true;
    collapsed.sigma2_b = 0.0;
    collapsed.quad_order = rule.order;
    collapsed.iterations += it;
    return collapsed;
  }

  if (score.lpNorm<Eigen::Infinity>() > opts.tol) {
    std::ostringstream msg;
    msg << "mixed-model fit did not converge in " << opts.max_iter
        << " iterations: score inf-norm " << score.lpNorm<Eigen::Infinity>() << ", sigma2_b "
        << v_hat << ", |beta|_inf " << phi.head(p).lpNorm<Eigen::Infinity>();
    throw FitError(msg.str());
  }

  model.beta = phi.head(p);
  model.sigma2_b = v_hat;
  model.converged = true;
  model.iterations = it;
  model.cluster_modes = modes;
  model.cluster_scales = scales;
  model.loglik = -f;
  return model;
}

std::vector<Eigen::VectorXd> predict_survival(const FittedSurvivalModel& model,
                                              const std::vector<ClusterWork>& work, int a) {
  if (a != 0 && a != 1) throw ConfigError("predict_survival: arm must be 0 or 1");
  if (work.empty()) return {};
  const bool conditional_modes =
      model.kind == ModelKind::kConditional && !model.boundary && model.sigma2_b > 0.0;
  if (conditional_modes && model.cluster_modes.size() != work.size()) {
    throw ConfigError("predict_survival: model cluster modes do not match dataset");
  }
  if (work.front().D.cols() != model.beta.size()) {
    throw ConfigError("predict_survival: design dimension " +
                      std::to_string(work.front().D.cols()) + " does not match model dimension " +
                      std::to_string(model.beta.size()));
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    const Eigen::MatrixXd& D = (a == 0) ? work[i].D0 : work[i].D1;
    const double b = conditional_modes ? model.cluster_modes[i] : 0.0;
    Eigen::VectorXd lp = D * model.beta;
    Eigen::VectorXd probs(lp.size());
    for (int j = 0; j < lp.size(); ++j) {
      probs[j] = expit(clamp_linear_predictor(lp[j] + b));
    }
    out.push_back(std::move(probs));
  }
  return out;
}

std::vector<Eigen::VectorXd> predict_survival(const FittedSurvivalModel& model,
                                              const CrtDataset& data, const DesignSpec& spec,
                                              int a) {
  return predict_survival(model, build_working(data, spec), a);
}

}  // namespace sace
