#include "tsln/density.hpp"

#include <cmath>

#include "tsln/util.hpp"

namespace tsln {

int Model::add_param(const std::string& name) {
  names.push_back(name);
  return dim++;
}

std::vector<int> Model::add_params(const std::string& prefix, int count) {
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = add_param(prefix + "[" + std::to_string(i) + "]");
  return out;
}

int Model::add_predictor(int rows) {
  predictors.push_back(Predictor{rows, {}});
  return static_cast<int>(predictors.size()) - 1;
}

static double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// forward pass over one predictor
static void eval_effects(const Predictor& pr, const Vec& p, Vec& out) {
  out.setZero(pr.rows);
  for (const auto& eff : pr.effects) {
    if (const auto* e = std::get_if<LinearEffect>(&eff)) {
      Vec coef(e->coef.size());
      for (std::size_t k = 0; k < e->coef.size(); ++k) coef[k] = p[e->coef[k]];
      out.noalias() += e->X * coef;
    } else if (const auto* e = std::get_if<IndexedEffect>(&eff)) {
      double s = e->const_scale;
      if (e->log_scale >= 0) s *= std::exp(p[e->log_scale]);
      for (int r = 0; r < pr.rows; ++r)
        if (e->idx[r] >= 0) out[r] += s * p[e->idx[r]];
    } else if (const auto* e = std::get_if<ParamProductEffect>(&eff)) {
      double a = p[e->coef];
      for (int r = 0; r < pr.rows; ++r)
        if (e->idx[r] >= 0) out[r] += a * p[e->idx[r]];
    } else if (const auto* e = std::get_if<Bym2Effect>(&eff)) {
      double sigma = std::exp(p[e->log_sigma]);
      double rho = inv_logit(p[e->logit_rho]);
      double a = std::sqrt(rho / e->kappa);
      double b = std::sqrt(1.0 - rho);
      for (int r = 0; r < pr.rows; ++r)
        out[r] += sigma * (p[e->s_idx[r]] * a + p[e->v_idx[r]] * b);
    }
  }
}

// backward pass: dlogp/drow accumulated in dout, parameter grads in g
static void backprop_effects(const Predictor& pr, const Vec& p, const Vec& dout,
                             Vec& g) {
  for (const auto& eff : pr.effects) {
    if (const auto* e = std::get_if<LinearEffect>(&eff)) {
      Vec gc = e->X.transpose() * dout;
      for (std::size_t k = 0; k < e->coef.size(); ++k) g[e->coef[k]] += gc[k];
    } else if (const auto* e = std::get_if<IndexedEffect>(&eff)) {
      double s = e->const_scale;
      double es = (e->log_scale >= 0) ? std::exp(p[e->log_scale]) : 1.0;
      s *= es;
      double gsig = 0.0;
      for (int r = 0; r < pr.rows; ++r) {
        if (e->idx[r] < 0) continue;
        g[e->idx[r]] += s * dout[r];
        gsig += dout[r] * s * p[e->idx[r]];
      }
      if (e->log_scale >= 0) g[e->log_scale] += gsig;  // d/du of e^u x = e^u x
    } else if (const auto* e = std::get_if<ParamProductEffect>(&eff)) {
      double a = p[e->coef];
      for (int r = 0; r < pr.rows; ++r) {
        if (e->idx[r] < 0) continue;
        g[e->idx[r]] += a * dout[r];
        g[e->coef] += p[e->idx[r]] * dout[r];
      }
    } else if (const auto* e = std::get_if<Bym2Effect>(&eff)) {
      double u = p[e->log_sigma];
      double t = p[e->logit_rho];
      double sigma = std::exp(u);
      double rho = inv_logit(t);
      double a = std::sqrt(rho / e->kappa);
      double b = std::sqrt(1.0 - rho);
      double da = 1.0 / (2.0 * std::sqrt(rho * e->kappa));
      double db = -1.0 / (2.0 * b);
      double drho_dt = rho * (1.0 - rho);
      for (int r = 0; r < pr.rows; ++r) {
        double s_r = p[e->s_idx[r]];
        double v_r = p[e->v_idx[r]];
        g[e->s_idx[r]] += dout[r] * sigma * a;
        g[e->v_idx[r]] += dout[r] * sigma * b;
        g[e->log_sigma] += dout[r] * sigma * (s_r * a + v_r * b);
        g[e->logit_rho] += dout[r] * sigma * (s_r * da + v_r * db) * drho_dt;
      }
    }
  }
}

void Model::eval_predictor(int pred, const Vec& params, Vec& out) const {
  eval_effects(predictors[pred], params, out);
}

double Model::log_density_grad(const Vec& params, Vec& grad) const {
  if (params.size() != dim) throw ModelError("DimensionMismatch");
  grad.setZero(dim);
  std::vector<Vec> pv(predictors.size());
  std::vector<Vec> pd(predictors.size());
  for (std::size_t k = 0; k < predictors.size(); ++k) {
    eval_effects(predictors[k], params, pv[k]);
    pd[k].setZero(predictors[k].rows);
  }
  double lp = 0.0;

  for (const auto& term : terms) {
    if (const auto* t = std::get_if<BernoulliLogitTerm>(&term)) {
      const Vec& eta = pv[t->pred];
      Vec& de = pd[t->pred];
      for (std::size_t j = 0; j < t->y.size(); ++j) {
        double w = t->scale * t->weight[j];
        double e = eta[j];
        lp += w * (t->y[j] * e - softplus(e));
        de[j] += w * (t->y[j] - inv_logit(e));
      }
    } else if (const auto* t = std::get_if<GaussianObsTerm>(&term)) {
      const Vec& m = pv[t->pred];
      Vec& dm = pd[t->pred];
      for (std::size_t j = 0; j < t->ybar.size(); ++j) {
        double V = t->var[j];
        double r = t->ybar[j] - m[t->row[j]];
        lp += t->weight[j] * (-0.5 * std::log(V) - (r * r + t->msq[j]) / (2.0 * V));
        dm[t->row[j]] += t->weight[j] * r / V;
      }
    } else if (const auto* t = std::get_if<GvfGaussianObsTerm>(&term)) {
      const Vec& m = pv[t->pred];
      Vec& dm = pd[t->pred];
      double u = params[t->log_sigma];
      double s2 = std::exp(2.0 * u);
      Vec om(t->omega.size());
      for (std::size_t k = 0; k < t->omega.size(); ++k) om[k] = params[t->omega[k]];
      for (std::size_t j = 0; j < t->ybar.size(); ++j) {
        double lin = t->L.row(j).dot(om);
        double ev = std::exp(2.0 * lin + s2);
        double V = t->base_var[j] + t->c[j] * ev;
        double r = t->ybar[j] - m[t->row[j]];
        double w = t->weight[j];
        lp += w * (-0.5 * std::log(V) - (r * r + t->msq[j]) / (2.0 * V));
        dm[t->row[j]] += w * r / V;
        double dV = w * (-0.5 / V + (r * r + t->msq[j]) / (2.0 * V * V));
        double dVdlin = 2.0 * t->c[j] * ev;
        for (std::size_t k = 0; k < t->omega.size(); ++k)
          grad[t->omega[k]] += dV * dVdlin * t->L(j, k);
        grad[t->log_sigma] += dV * t->c[j] * ev * 2.0 * s2;
      }
    } else if (const auto* t = std::get_if<GaussianRegressionTerm>(&term)) {
      double u = params[t->log_sigma];
      double V = std::exp(2.0 * u);
      Vec om(t->omega.size());
      for (std::size_t k = 0; k < t->omega.size(); ++k) om[k] = params[t->omega[k]];
      for (std::size_t j = 0; j < t->y.size(); ++j) {
        double r = t->y[j] - t->L.row(j).dot(om);
        lp += -u - r * r / (2.0 * V);
        for (std::size_t k = 0; k < t->omega.size(); ++k)
          grad[t->omega[k]] += r / V * t->L(j, k);
        grad[t->log_sigma] += -1.0 + r * r / V;
      }
    } else if (const auto* t = std::get_if<GaussianPriorTerm>(&term)) {
      double inv_v = 1.0 / (t->sd * t->sd);
      for (int k : t->params) {
        double r = params[k] - t->mean;
        lp += -0.5 * r * r * inv_v;
        grad[k] += -r * inv_v;
      }
    } else if (const auto* t = std::get_if<HalfNormalLogScaleTerm>(&term)) {
      double inv_v = 1.0 / (t->sd * t->sd);
      for (int k : t->params) {
        double e2 = std::exp(2.0 * params[k]);
        lp += -0.5 * e2 * inv_v + params[k];
        grad[k] += -e2 * inv_v + 1.0;
      }
    } else if (const auto* t = std::get_if<StudentTPriorTerm>(&term)) {
      for (int k : t->params) {
        double z = (params[k] - t->mean) / t->sd;
        lp += -0.5 * (t->df + 1.0) * std::log1p(z * z / t->df);
        grad[k] += -(t->df + 1.0) * z / ((t->df + z * z) * t->sd);
      }
    } else if (const auto* t = std::get_if<UniformLogitTerm>(&term)) {
      double x = params[t->param];
      lp += -softplus(x) - softplus(-x);
      grad[t->param] += 1.0 - 2.0 * inv_logit(x);
    } else if (const auto* t = std::get_if<IcarPairwiseTerm>(&term)) {
      for (auto [a, b] : t->edges) {
        double d = params[a] - params[b];
        lp += -0.5 * d * d;
        grad[a] += -d;
        grad[b] += d;
      }
    } else if (const auto* t = std::get_if<SoftSumToZeroTerm>(&term)) {
      double m = 0.0;
      for (int k : t->params) m += params[k];
      double n = static_cast<double>(t->params.size());
      m /= n;
      double inv_v = 1.0 / (t->sd * t->sd);
      lp += -0.5 * m * m * inv_v;
      for (int k : t->params) grad[k] += -m * inv_v / n;
    } else if (const auto* t = std::get_if<BenchmarkTerm>(&term)) {
      const Vec& th = pv[t->pred];
      Vec& dth = pd[t->pred];
      for (const auto& gr : t->groups) {
        double c = 0.0;
        for (std::size_t j = 0; j < gr.rows.size(); ++j)
          c += gr.wpop[j] * inv_logit(th[gr.rows[j]]);
        double r = c - gr.target;
        double inv_v = 1.0 / (gr.sd * gr.sd);
        lp += -0.5 * r * r * inv_v;
        for (std::size_t j = 0; j < gr.rows.size(); ++j) {
          double mu = inv_logit(th[gr.rows[j]]);
          dth[gr.rows[j]] += -r * inv_v * gr.wpop[j] * mu * (1.0 - mu);
        }
      }
    }
  }

  for (std::size_t k = 0; k < predictors.size(); ++k)
    backprop_effects(predictors[k], params, pd[k], grad);
  return lp;
}

}  // namespace tsln
