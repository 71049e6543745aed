#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "invlab/kernels.hpp"
#include "invlab/schedule.hpp"

namespace invlab {

// Discrete condition label; the null condition selects the unconditional
// distribution / embedding.
struct Condition {
    static constexpr int null_id = -1;
    int id = null_id;

    static Condition null() { return {}; }
    static Condition label(int id) { return {id}; }
    bool is_null() const { return id == null_id; }
    bool operator==(const Condition&) const = default;
};

// Noise-prediction model eps(z, t, c) with a vector-Jacobian product
// contract: vjp(z, t, c, v) = (d eps / d z)^T v. Implementations are
// immutable after construction; predict and vjp are pure.
class EpsilonPredictor {
public:
    virtual ~EpsilonPredictor() = default;

    virtual int dim() const = 0;
    virtual Vec predict(const Vec& z, int t, Condition c) const = 0;
    virtual Vec vjp(const Vec& z, int t, Condition c, const Vec& v) const = 0;

    // Throws for labels outside the model's declared set.
    virtual void check_condition(Condition c) const = 0;

    // Schedule the model is bound to, when it has one.
    virtual std::optional<std::uint64_t> schedule_hash() const { return std::nullopt; }
};

// eps = eps_uncond + w * (eps_cond - eps_uncond)
Vec cfg_combine(const Vec& eps_uncond, const Vec& eps_cond, double w);

// Guided evaluation helpers. w == 1 (or a null condition) costs a single
// model call; anything else evaluates both branches. `calls` counts
// underlying model evaluations.
Vec guided_predict(const EpsilonPredictor& model, const Vec& z, int t, Condition c,
                   double w, long* calls = nullptr);
Vec guided_vjp(const EpsilonPredictor& model, const Vec& z, int t, Condition c,
               const Vec& v, double w, long* calls = nullptr);

struct GmComponent {
    Vec mean;
    double weight = 1.0;
    int label = Condition::null_id;  // null_id: belongs to no labeled subset
};

// Mixture of isotropic gaussians with shared data variance sigma0_sq.
// Under the schedule, the time-t marginal of component k is a gaussian with
// mean sqrt(ab_t) * mu_k and variance v_t = ab_t * sigma0_sq + (1 - ab_t),
// so the posterior-optimal noise estimate has the closed form
//   eps(z, t, c) = sqrt(1 - ab_t) * (z - m_bar(z)) / v_t,
// with m_bar the responsibility-weighted mean of the scaled component means.
// A condition restricts the mixture to components carrying that label.
class GaussianMixture : public EpsilonPredictor {
public:
    GaussianMixture(std::vector<GmComponent> components, double sigma0_sq,
                    NoiseSchedule schedule, Exec exec = Exec::Serial);

    int dim() const override { return dim_; }
    Vec predict(const Vec& z, int t, Condition c) const override;
    Vec vjp(const Vec& z, int t, Condition c, const Vec& v) const override;
    void check_condition(Condition c) const override;
    std::optional<std::uint64_t> schedule_hash() const override {
        return schedule_.hash();
    }

    // Normalized log-density of the time-t marginal under condition c.
    double log_marginal(const Vec& z, int t, Condition c) const;

    const std::vector<GmComponent>& components() const { return components_; }
    double sigma0_sq() const { return sigma0_sq_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const std::vector<int>& labels() const { return labels_; }

private:
    struct Posterior {
        double variance = 0.0;
        std::vector<double> responsibility;  // over the condition's subset
        std::vector<std::size_t> subset;     // component indices
        Vec mean;                            // responsibility-weighted scaled mean
    };
    Posterior posterior(const Vec& z, int t, Condition c) const;
    std::vector<std::size_t> subset_for(Condition c) const;

    std::vector<GmComponent> components_;
    double sigma0_sq_;
    NoiseSchedule schedule_;
    Exec exec_;
    int dim_ = 0;
    std::vector<int> labels_;
};

// Time- and condition-independent affine predictor eps = A z + b, used as a
// closed-form fixed-point oracle: the inversion step's fixed point solves
// (I - c2 A) z = c1 z_prev + c2 b directly.
class LinearModel : public EpsilonPredictor {
public:
    // matrix is d x d row-major.
    LinearModel(std::vector<double> matrix, Vec offset, NoiseSchedule schedule);

    int dim() const override { return dim_; }
    Vec predict(const Vec& z, int t, Condition c) const override;
    Vec vjp(const Vec& z, int t, Condition c, const Vec& v) const override;
    void check_condition(Condition) const override {}
    std::optional<std::uint64_t> schedule_hash() const override {
        return schedule_.hash();
    }

    // 1 - |c2(t)| * ||A||_2, recorded at construction for every step.
    double contraction_margin(int t) const;
    double operator_norm() const { return op_norm_; }

    // Direct solve of the step-t fixed point given z_{t-1}; throws when
    // I - c2 A is numerically singular.
    Vec solve_fixed_point(const Vec& z_prev, int t) const;

    const std::vector<double>& matrix() const { return a_; }
    const Vec& offset() const { return b_; }
    const NoiseSchedule& schedule() const { return schedule_; }

private:
    std::vector<double> a_;
    Vec b_;
    NoiseSchedule schedule_;
    int dim_ = 0;
    double op_norm_ = 0.0;
    std::vector<double> margin_;  // index t-1
};

}  // namespace invlab
