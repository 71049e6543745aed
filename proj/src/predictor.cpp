#include "invlab/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace invlab {

namespace {

void check_dim(const Vec& z, int d, const char* what) {
    if (static_cast<int>(z.size()) != d) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch, expected " +
                                    std::to_string(d) + ", got " +
                                    std::to_string(z.size()));
    }
}

void check_step(int t, int total, const char* what) {
    if (t < 0 || t > total) {
        throw std::out_of_range(std::string(what) + ": step " + std::to_string(t) +
                                " outside 0.." + std::to_string(total));
    }
}

}  // namespace

Vec cfg_combine(const Vec& eps_uncond, const Vec& eps_cond, double w) {
    if (eps_uncond.size() != eps_cond.size()) {
        throw std::invalid_argument("cfg_combine: dimension mismatch");
    }
    Vec out(eps_uncond.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = eps_uncond[i] + w * (eps_cond[i] - eps_uncond[i]);
    }
    return out;
}

Vec guided_predict(const EpsilonPredictor& model, const Vec& z, int t, Condition c,
                   double w, long* calls) {
    if (c.is_null() || w == 1.0) {
        if (calls) *calls += 1;
        return model.predict(z, t, c.is_null() ? Condition::null() : c);
    }
    if (w == 0.0) {
        if (calls) *calls += 1;
        return model.predict(z, t, Condition::null());
    }
    if (calls) *calls += 2;
    const Vec eps_u = model.predict(z, t, Condition::null());
    const Vec eps_c = model.predict(z, t, c);
    return cfg_combine(eps_u, eps_c, w);
}

Vec guided_vjp(const EpsilonPredictor& model, const Vec& z, int t, Condition c,
               const Vec& v, double w, long* calls) {
    if (c.is_null() || w == 1.0) {
        if (calls) *calls += 1;
        return model.vjp(z, t, c.is_null() ? Condition::null() : c, v);
    }
    if (w == 0.0) {
        if (calls) *calls += 1;
        return model.vjp(z, t, Condition::null(), v);
    }
    if (calls) *calls += 2;
    const Vec ju = model.vjp(z, t, Condition::null(), v);
    const Vec jc = model.vjp(z, t, c, v);
    Vec out(v.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = ju[i] + w * (jc[i] - ju[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// GaussianMixture

GaussianMixture::GaussianMixture(std::vector<GmComponent> components, double sigma0_sq,
                                 NoiseSchedule schedule, Exec exec)
    : components_(std::move(components)),
      sigma0_sq_(sigma0_sq),
      schedule_(std::move(schedule)),
      exec_(exec) {
    if (components_.empty()) {
        throw std::invalid_argument("gaussian_mixture: needs at least one component");
    }
    if (!(sigma0_sq_ >= 0.0) || !std::isfinite(sigma0_sq_)) {
        throw std::invalid_argument("gaussian_mixture: sigma0_sq must be >= 0");
    }
    dim_ = static_cast<int>(components_.front().mean.size());
    double total_weight = 0.0;
    for (const auto& comp : components_) {
        if (static_cast<int>(comp.mean.size()) != dim_) {
            throw std::invalid_argument("gaussian_mixture: component dim mismatch");
        }
        if (!kernels::all_finite(comp.mean)) {
            throw std::invalid_argument("gaussian_mixture: non-finite component mean");
        }
        if (!(comp.weight > 0.0)) {
            throw std::invalid_argument("gaussian_mixture: weights must be positive");
        }
        total_weight += comp.weight;
        if (comp.label != Condition::null_id &&
            std::find(labels_.begin(), labels_.end(), comp.label) == labels_.end()) {
            labels_.push_back(comp.label);
        }
    }
    for (auto& comp : components_) comp.weight /= total_weight;
    std::sort(labels_.begin(), labels_.end());
}

void GaussianMixture::check_condition(Condition c) const {
    if (c.is_null()) return;
    if (std::find(labels_.begin(), labels_.end(), c.id) == labels_.end()) {
        throw std::invalid_argument("gaussian_mixture: unknown condition label " +
                                    std::to_string(c.id));
    }
}

std::vector<std::size_t> GaussianMixture::subset_for(Condition c) const {
    check_condition(c);
    std::vector<std::size_t> subset;
    for (std::size_t k = 0; k < components_.size(); ++k) {
        if (c.is_null() || components_[k].label == c.id) subset.push_back(k);
    }
    return subset;
}

GaussianMixture::Posterior GaussianMixture::posterior(const Vec& z, int t,
                                                      Condition c) const {
    check_dim(z, dim_, "gaussian_mixture");
    check_step(t, schedule_.total_steps(), "gaussian_mixture");
    const double ab = schedule_.alpha_bar(t);
    Posterior post;
    post.variance = ab * sigma0_sq_ + (1.0 - ab);
    if (!(post.variance > 0.0)) {
        throw std::domain_error("gaussian_mixture: marginal variance is zero at t=" +
                                std::to_string(t) + " (sigma0_sq = 0 with alpha_bar = 1)");
    }
    post.subset = subset_for(c);

    const double scale = std::sqrt(ab);
    std::vector<double> log_resp(post.subset.size());
    double max_log = -1e300;
    for (std::size_t j = 0; j < post.subset.size(); ++j) {
        const auto& comp = components_[post.subset[j]];
        double sq = 0.0;
        for (int i = 0; i < dim_; ++i) {
            const double d = z[static_cast<std::size_t>(i)] -
                             scale * comp.mean[static_cast<std::size_t>(i)];
            sq += d * d;
        }
        log_resp[j] = std::log(comp.weight) - 0.5 * sq / post.variance;
        max_log = std::max(max_log, log_resp[j]);
    }
    double denom = 0.0;
    for (double& lr : log_resp) {
        lr = std::exp(lr - max_log);
        denom += lr;
    }
    post.responsibility.resize(log_resp.size());
    post.mean.assign(static_cast<std::size_t>(dim_), 0.0);
    for (std::size_t j = 0; j < post.subset.size(); ++j) {
        post.responsibility[j] = log_resp[j] / denom;
        const auto& mean = components_[post.subset[j]].mean;
        for (int i = 0; i < dim_; ++i) {
            post.mean[static_cast<std::size_t>(i)] +=
                post.responsibility[j] * scale * mean[static_cast<std::size_t>(i)];
        }
    }
    return post;
}

Vec GaussianMixture::predict(const Vec& z, int t, Condition c) const {
    const Posterior post = posterior(z, t, c);
    const double ab = schedule_.alpha_bar(t);
    const double factor = std::sqrt(1.0 - ab) / post.variance;
    Vec eps(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        eps[i] = factor * (z[i] - post.mean[i]);
    }
    return eps;
}

Vec GaussianMixture::vjp(const Vec& z, int t, Condition c, const Vec& v) const {
    check_dim(v, dim_, "gaussian_mixture vjp");
    const Posterior post = posterior(z, t, c);
    const double ab = schedule_.alpha_bar(t);
    const double scale = std::sqrt(ab);
    const double factor = std::sqrt(1.0 - ab) / post.variance;

    // J = factor * (I - Cov_r(m) / variance) with Cov_r the responsibility
    // covariance of the scaled means; J is symmetric, so vjp(v) = J v.
    Vec cov_v(z.size(), 0.0);
    const double mbar_dot_v = kernels::dot(post.mean, v, exec_);
    for (std::size_t j = 0; j < post.subset.size(); ++j) {
        const auto& mean = components_[post.subset[j]].mean;
        double m_dot_v = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) m_dot_v += scale * mean[i] * v[i];
        const double coeff = post.responsibility[j] * m_dot_v;
        for (std::size_t i = 0; i < z.size(); ++i) cov_v[i] += coeff * scale * mean[i];
    }
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double cov_term = (cov_v[i] - post.mean[i] * mbar_dot_v) / post.variance;
        out[i] = factor * (v[i] - cov_term);
    }
    return out;
}

double GaussianMixture::log_marginal(const Vec& z, int t, Condition c) const {
    check_dim(z, dim_, "gaussian_mixture");
    check_step(t, schedule_.total_steps(), "gaussian_mixture");
    const double ab = schedule_.alpha_bar(t);
    const double variance = ab * sigma0_sq_ + (1.0 - ab);
    if (!(variance > 0.0)) {
        throw std::domain_error("gaussian_mixture: marginal variance is zero at t=" +
                                std::to_string(t));
    }
    const auto subset = subset_for(c);
    const double scale = std::sqrt(ab);
    double subset_weight = 0.0;
    for (std::size_t k : subset) subset_weight += components_[k].weight;

    double max_log = -1e300;
    std::vector<double> logs(subset.size());
    for (std::size_t j = 0; j < subset.size(); ++j) {
        const auto& comp = components_[subset[j]];
        double sq = 0.0;
        for (int i = 0; i < dim_; ++i) {
            const double d = z[static_cast<std::size_t>(i)] -
                             scale * comp.mean[static_cast<std::size_t>(i)];
            sq += d * d;
        }
        logs[j] = std::log(comp.weight / subset_weight) - 0.5 * sq / variance;
        max_log = std::max(max_log, logs[j]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - max_log);
    const double two_pi = 6.283185307179586476925286766559;
    return max_log + std::log(acc) -
           0.5 * static_cast<double>(dim_) * std::log(two_pi * variance);
}

// ---------------------------------------------------------------------------
// LinearModel

LinearModel::LinearModel(std::vector<double> matrix, Vec offset, NoiseSchedule schedule)
    : a_(std::move(matrix)), b_(std::move(offset)), schedule_(std::move(schedule)) {
    dim_ = static_cast<int>(b_.size());
    if (dim_ < 1) throw std::invalid_argument("linear_model: empty offset");
    if (a_.size() != static_cast<std::size_t>(dim_) * static_cast<std::size_t>(dim_)) {
        throw std::invalid_argument("linear_model: matrix must be dim x dim");
    }
    if (!kernels::all_finite(a_) || !kernels::all_finite(b_)) {
        throw std::invalid_argument("linear_model: non-finite parameters");
    }

    // Operator 2-norm via power iteration on A^T A (deterministic start).
    const auto d = static_cast<std::size_t>(dim_);
    Vec x(d, 1.0), ax(d), atax(d);
    double norm_estimate = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (std::size_t col = 0; col < d; ++col) acc += a_[r * d + col] * x[col];
            ax[r] = acc;
        }
        for (std::size_t col = 0; col < d; ++col) {
            double acc = 0.0;
            for (std::size_t r = 0; r < d; ++r) acc += a_[r * d + col] * ax[r];
            atax[col] = acc;
        }
        const double len = std::sqrt(kernels::squared_norm(atax, Exec::Serial));
        if (len == 0.0) {
            norm_estimate = 0.0;
            break;
        }
        for (std::size_t i = 0; i < d; ++i) x[i] = atax[i] / len;
        norm_estimate = std::sqrt(len);
    }
    op_norm_ = norm_estimate;

    margin_.resize(static_cast<std::size_t>(schedule_.total_steps()));
    for (int t = 1; t <= schedule_.total_steps(); ++t) {
        const auto k = schedule_.coefficients(t);
        margin_[static_cast<std::size_t>(t) - 1] = 1.0 - std::fabs(k.c2) * op_norm_;
    }
}

double LinearModel::contraction_margin(int t) const {
    if (t < 1 || t > schedule_.total_steps()) {
        throw std::out_of_range("linear_model: margin step out of range");
    }
    return margin_[static_cast<std::size_t>(t) - 1];
}

Vec LinearModel::predict(const Vec& z, int t, Condition) const {
    check_dim(z, dim_, "linear_model");
    check_step(t, schedule_.total_steps(), "linear_model");
    const auto d = static_cast<std::size_t>(dim_);
    Vec out(d);
    for (std::size_t r = 0; r < d; ++r) {
        double acc = b_[r];
        for (std::size_t c = 0; c < d; ++c) acc += a_[r * d + c] * z[c];
        out[r] = acc;
    }
    return out;
}

Vec LinearModel::vjp(const Vec& z, int t, Condition, const Vec& v) const {
    check_dim(z, dim_, "linear_model");
    check_dim(v, dim_, "linear_model vjp");
    check_step(t, schedule_.total_steps(), "linear_model");
    const auto d = static_cast<std::size_t>(dim_);
    Vec out(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) out[c] += a_[r * d + c] * v[r];
    }
    return out;
}

Vec LinearModel::solve_fixed_point(const Vec& z_prev, int t) const {
    check_dim(z_prev, dim_, "linear_model solve");
    const auto k = schedule_.coefficients(t);
    const auto d = static_cast<std::size_t>(dim_);

    // Dense solve of (I - c2 A) z = c1 z_prev + c2 b with partial pivoting.
    std::vector<double> m(d * d);
    Vec rhs(d);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            m[r * d + c] = (r == c ? 1.0 : 0.0) - k.c2 * a_[r * d + c];
        }
        rhs[r] = k.c1 * z_prev[r] + k.c2 * b_[r];
    }
    for (std::size_t col = 0; col < d; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < d; ++r) {
            if (std::fabs(m[r * d + col]) > std::fabs(m[pivot * d + col])) pivot = r;
        }
        if (std::fabs(m[pivot * d + col]) < 1e-12) {
            throw std::domain_error("linear_model: I - c2*A is singular at step t=" +
                                    std::to_string(t) + " (contraction margin " +
                                    std::to_string(contraction_margin(t)) + ")");
        }
        if (pivot != col) {
            for (std::size_t c = 0; c < d; ++c) std::swap(m[pivot * d + c], m[col * d + c]);
            std::swap(rhs[pivot], rhs[col]);
        }
        for (std::size_t r = col + 1; r < d; ++r) {
            const double f = m[r * d + col] / m[col * d + col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < d; ++c) m[r * d + c] -= f * m[col * d + c];
            rhs[r] -= f * rhs[col];
        }
    }
    Vec z(d, 0.0);
    for (std::size_t ri = d; ri-- > 0;) {
        double acc = rhs[ri];
        for (std::size_t c = ri + 1; c < d; ++c) acc -= m[ri * d + c] * z[c];
        z[ri] = acc / m[ri * d + ri];
    }
    return z;
}

}  // namespace invlab
