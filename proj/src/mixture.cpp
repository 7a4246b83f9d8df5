#include "mixture.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "errors.hpp"

namespace grassmix {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Vector residual_column(const Matrix& X, const Matrix& basis, const Vector& theta) {
    Matrix centered = X.rowwise() - theta.transpose();
    Vector full = centered.rowwise().squaredNorm();
    Vector along = (centered * basis).rowwise().squaredNorm();
    return (full - along).cwiseMax(0.0);
}

double loss_from_cache(const Matrix& residuals, const std::vector<ComponentParams>& comps) {
    const Eigen::Index n = residuals.rows();
    const Eigen::Index K = residuals.cols();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = residuals(i, 0) + comps[0].subspace.dim;
        for (Eigen::Index k = 1; k < K; ++k)
            best = std::min(best, residuals(i, k) + comps[k].subspace.dim);
        total += best;
    }
    return total / static_cast<double>(n);
}

// Loss with column `idx` of the cache replaced by `cand` at dimension `cand_dim`.
double loss_with_candidate(const Matrix& residuals, const std::vector<ComponentParams>& comps,
                           int idx, const Vector& cand, int cand_dim) {
    const Eigen::Index n = residuals.rows();
    const Eigen::Index K = residuals.cols();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < K; ++k) {
            double v = (k == idx) ? cand[i] + cand_dim : residuals(i, k) + comps[k].subspace.dim;
            best = std::min(best, v);
        }
        total += best;
    }
    return total / static_cast<double>(n);
}

void resize_on_dim_change(ComponentParams& comp, int new_dim, const GibbsHyper& h, RngHandle& rng) {
    const int old_dim = static_cast<int>(comp.mu.size());
    if (new_dim == old_dim) return;
    if (new_dim < old_dim) {
        comp.mu = comp.mu.head(new_dim).eval();
        comp.sigma_diag = comp.sigma_diag.head(new_dim).eval();
        return;
    }
    Vector mu(new_dim), sigma(new_dim);
    mu.head(old_dim) = comp.mu;
    sigma.head(old_dim) = comp.sigma_diag;
    for (int j = old_dim; j < new_dim; ++j) {
        mu[j] = std::sqrt(h.lambda) * rng.normal();
        sigma[j] = 1.0 / rng.gamma_draw(h.a, h.b);
    }
    comp.mu = mu;
    comp.sigma_diag = sigma;
}

// Rewrites the stored basis and anchor as the canonical representative of the
// current subspace: axes ordered by the variance of the member observations
// along them, anchor rebuilt from an eigenvalue profile decreasing in that
// order. The span, the loss, and every density are unchanged; the point of
// the canonical form is that rounding a cooled-down proposal drops the least
// supported axis first instead of a random one.
void canonicalize_anchor(ComponentParams& comp, const Matrix& X,
                         const Eigen::VectorXi& assignments, int idx, const SphereSpec& sphere) {
    const int m = comp.subspace.ambient;
    const int d = comp.subspace.dim;

    Vector axis_var;
    if (assignments.size() == X.rows()) {
        std::vector<int> members;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            if (assignments[i] == idx) members.push_back(static_cast<int>(i));

        if (static_cast<int>(members.size()) >= d + 1) {
            if (d > 1) {
                // Rotate the basis to the principal axes of the member scatter
                // within the span (descending variance). The span is untouched.
                Vector sums = Vector::Zero(d);
                Matrix scatter = Matrix::Zero(d, d);
                for (int i : members) {
                    Vector along = comp.subspace.basis.transpose() * X.row(i).transpose();
                    sums += along;
                    scatter += along * along.transpose();
                }
                Vector mean = sums / double(members.size());
                Matrix cov = scatter / double(members.size()) - mean * mean.transpose();
                auto [vals, vecs] = sym_eig_descending(cov);
                comp.subspace.basis = (comp.subspace.basis * vecs).eval();
                comp.mu = (vecs.transpose() * comp.mu).eval();
                Vector rotated_sigma =
                    (vecs.transpose() * comp.sigma_diag.asDiagonal() * vecs).diagonal();
                comp.sigma_diag = rotated_sigma.cwiseMax(1e-12);
            }
            // Robust per-axis scale: a few stray members from another
            // component must not make a noise-level axis look supported.
            axis_var.resize(d);
            std::vector<double> coords(members.size());
            for (int j = 0; j < d; ++j) {
                for (size_t i = 0; i < members.size(); ++i)
                    coords[i] = comp.subspace.basis.col(j).dot(X.row(members[i]));
                auto mid = coords.begin() + coords.size() / 2;
                std::nth_element(coords.begin(), mid, coords.end());
                double med = *mid;
                for (auto& c : coords) c = std::fabs(c - med);
                std::nth_element(coords.begin(), mid, coords.end());
                double mad = *mid;
                axis_var[j] = 1.4826 * 1.4826 * mad * mad;
            }
        }
    }

    // Eigenvalue profile of the anchor: an axis carrying only noise-level
    // variance sits at the rounding boundary (lambda 1/2), a supported axis
    // sits near 1. Without member information fall back to a fixed ramp.
    Matrix q = Matrix::Zero(m, m);
    for (int j = 0; j < d; ++j) {
        double lambda;
        if (axis_var.size() == d) {
            lambda = axis_var[j] / (axis_var[j] + comp.noise_var);
            lambda = std::clamp(lambda, 0.05, 1.0);
        } else {
            lambda = 1.0 - std::min(0.15, 0.8 / std::max(1, d)) * (j + 1) / double(d);
        }
        q += lambda * comp.subspace.basis.col(j) * comp.subspace.basis.col(j).transpose();
    }
    Vector dir = encode(q).coords - sphere.center.coords;
    double norm = dir.norm();
    if (norm > 1e-12) comp.z_anchor = dir / norm;
}

ComponentParams draw_component_from_prior(int m, const GibbsConfig& cfg, const SphereSpec& sphere,
                                          RngHandle& rng) {
    ComponentParams comp;
    const int len = conway_length(m);
    Vector z = std::sqrt(cfg.tau) * rng.standard_normal_vector(len);
    double zn = z.norm();
    while (zn < 1e-300) {
        z = std::sqrt(cfg.tau) * rng.standard_normal_vector(len);
        zn = z.norm();
    }
    ConwayCoord s;
    s.ambient = m;
    s.coords = sphere.center.coords + sphere.radius * z / zn;
    comp.subspace = nearest_subspace(s, cfg.d_min, cfg.effective_d_max(m));
    // The anchor is stored as a unit direction: only z's direction survives
    // the spherical recentering, so an unnormalized anchor would grow with
    // the walk and silently shrink the angular step no matter what the
    // proposal variance is.
    comp.z_anchor = z / zn;

    Vector beta = rng.standard_normal_vector(m);
    comp.beta_anchor = beta;
    comp.theta = beta - comp.subspace.projection * beta;

    const int d = comp.subspace.dim;
    comp.mu = rng.gaussian_vector(Vector::Zero(d), cfg.hyper.lambda);
    comp.sigma_diag.resize(d);
    for (int j = 0; j < d; ++j) comp.sigma_diag[j] = 1.0 / rng.gamma_draw(cfg.hyper.a, cfg.hyper.b);
    comp.noise_var = 1.0 / rng.gamma_draw(cfg.hyper.a, cfg.hyper.b);
    return comp;
}

} // namespace

void ComponentParams::validate() const {
    subspace.validate();
    const int d = subspace.dim;
    const int m = subspace.ambient;
    if (mu.size() != d || sigma_diag.size() != d)
        throw ValidationError("ComponentParams: mu/sigma length mismatch with dim");
    if (theta.size() != m) throw ValidationError("ComponentParams: theta length mismatch");
    if ((sigma_diag.array() <= 0.0).any() || noise_var <= 0.0)
        throw ValidationError("ComponentParams: variances must be > 0");
    if ((subspace.basis.transpose() * theta).cwiseAbs().maxCoeff() > 1e-8)
        throw ValidationError("ComponentParams: theta not orthogonal to the subspace");
}

void GibbsConfig::validate(int m) const {
    if (K < 1) throw ValidationError("GibbsConfig: K must be >= 1");
    if (kappa <= 0.0) throw ValidationError("GibbsConfig: kappa must be > 0");
    if (tau <= 0.0 || theta_scale <= 0.0)
        throw ValidationError("GibbsConfig: proposal scales must be > 0");
    if (thin < 1) throw ValidationError("GibbsConfig: thin must be >= 1");
    if (iters < 0 || burn_in < 0 || burn_in > iters)
        throw ValidationError("GibbsConfig: need 0 <= burn_in <= iters");
    const int dmax = effective_d_max(m);
    if (!(1 <= d_min && d_min <= dmax && dmax <= m - 1))
        throw ValidationError("GibbsConfig: need 1 <= d_min <= d_max <= m-1 (m >= 2)");
    if (hyper.a <= 0 || hyper.b <= 0 || hyper.lambda <= 0 || hyper.phi_var <= 0 || hyper.alpha <= 0)
        throw ValidationError("GibbsConfig: hyperparameters must be > 0");
    if (!tune && psi <= 0.0)
        throw ValidationError("GibbsConfig: psi must be > 0 when tuning is disabled");
}

SphereSpec GibbsConfig::sphere(int m) const {
    return identity_center ? SphereSpec::identity_centered(m) : SphereSpec::standard(m);
}

double component_log_density(const Vector& x, const ComponentParams& p) {
    const int m = p.subspace.ambient;
    const int d = p.subspace.dim;
    if (x.size() != m) throw ValidationError("component_log_density: dimension mismatch");
    Vector along = p.subspace.basis.transpose() * x;
    double lp = 0.0;
    for (int j = 0; j < d; ++j) {
        double diff = along[j] - p.mu[j];
        lp += -0.5 * std::log(kTwoPi * p.sigma_diag[j]) - 0.5 * diff * diff / p.sigma_diag[j];
    }
    Vector null_part = x - p.subspace.projection * x - p.theta;
    lp += -0.5 * (m - d) * std::log(kTwoPi * p.noise_var) -
          0.5 * null_part.squaredNorm() / p.noise_var;
    return lp;
}

double residual(const Vector& x, const ComponentParams& p) {
    if (x.size() != p.subspace.ambient) throw ValidationError("residual: dimension mismatch");
    Vector centered = x - p.theta;
    Vector r = centered - p.subspace.projection * centered;
    return r.squaredNorm();
}

double loss(const std::vector<ComponentParams>& components, const Matrix& X) {
    if (X.rows() < 1) throw ValidationError("loss: empty data");
    if (components.empty()) throw ValidationError("loss: no components");
    double total = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Vector x = X.row(i);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& comp : components)
            best = std::min(best, residual(x, comp) + comp.subspace.dim);
        total += best;
    }
    return total / static_cast<double>(X.rows());
}

double gibbs_log_ratio(double new_loss, double old_loss, Eigen::Index n, double psi) {
    if (psi <= 0.0) throw ValidationError("gibbs_log_ratio: psi must be > 0");
    return -static_cast<double>(n) * psi * (new_loss - old_loss);
}

GammaParams noise_precision_conditional(long n_k, double residual_sum, int m, int d,
                                        const GibbsHyper& h) {
    return {h.a + 0.5 * static_cast<double>(n_k) * (m - d), h.b + 0.5 * residual_sum};
}

GammaParams axis_precision_conditional(long n_k, double centered_sq_sum, const GibbsHyper& h) {
    return {h.a + 0.5 * static_cast<double>(n_k), h.b + 0.5 * centered_sq_sum};
}

DiagGaussParams mu_conditional(long n_k, const Vector& proj_sum, const Vector& sigma_diag,
                               const GibbsHyper& h) {
    const Eigen::Index d = sigma_diag.size();
    DiagGaussParams out;
    out.mean.resize(d);
    out.var.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double precision_j = 1.0 / sigma_diag[j];
        double post_var = 1.0 / (static_cast<double>(n_k) * precision_j + 1.0 / h.lambda);
        out.var[j] = post_var;
        out.mean[j] = post_var * precision_j * proj_sum[j];
    }
    return out;
}

void refresh_residuals(ChainState& state, const Matrix& X) {
    const int K = static_cast<int>(state.components.size());
    state.residuals.resize(X.rows(), K);
    for (int k = 0; k < K; ++k)
        state.residuals.col(k) =
            residual_column(X, state.components[k].subspace.basis, state.components[k].theta);
    state.current_loss = loss_from_cache(state.residuals, state.components);
}

ChainState initialize_chain(const Matrix& X, const GibbsConfig& cfg, RngHandle& rng) {
    const int m = static_cast<int>(X.cols());
    const int n = static_cast<int>(X.rows());
    cfg.validate(m);
    if (n < 1) throw ValidationError("initialize_chain: empty data");

    const SphereSpec sphere = cfg.sphere(m);
    ChainState state;
    state.components.resize(cfg.K);
    std::vector<int> order = rng.permutation(cfg.K);
    for (int idx : order) state.components[idx] = draw_component_from_prior(m, cfg, sphere, rng);

    state.assignments = Eigen::VectorXi::Zero(n);
    state.weights = Vector::Constant(cfg.K, 1.0 / cfg.K);
    refresh_residuals(state, X);
    return state;
}

MoveStats update_subspaces(ChainState& state, const Matrix& X, const GibbsConfig& cfg,
                           RngHandle& rng) {
    if (cfg.psi <= 0.0) throw ValidationError("update_subspaces: psi must be > 0");
    const int m = static_cast<int>(X.cols());
    const Eigen::Index n = X.rows();
    const SphereSpec sphere = cfg.sphere(m);
    MoveStats stats;

    std::vector<int> order = rng.permutation(static_cast<int>(state.components.size()));
    for (int idx : order) {
        ComponentParams& comp = state.components[idx];

        // Mean of the currently assigned observations, when any.
        Vector member_mean;
        if (state.assignments.size() == n) {
            Vector acc = Vector::Zero(m);
            long count = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (state.assignments[i] == idx) {
                    acc += X.row(i).transpose();
                    ++count;
                }
            }
            if (count > 0) member_mean = acc / static_cast<double>(count);
        }

        canonicalize_anchor(comp, X, state.assignments, idx, sphere);

        // Subspace move: random walk on the anchor, spherical recentering,
        // rounding to the nearest subspace, offset reprojected to the
        // candidate null space.
        Vector z = comp.z_anchor + std::sqrt(cfg.tau) * rng.standard_normal_vector(conway_length(m));
        double zn = z.norm();
        if (zn > 1e-300) {
            z /= zn; // keep the anchor on the unit shell
            ConwayCoord s;
            s.ambient = m;
            s.coords = sphere.center.coords + sphere.radius * z;
            SubspacePoint cand = nearest_subspace(s, cfg.d_min, cfg.effective_d_max(m));
            Vector theta_cand;
            if (cand.dim != comp.subspace.dim && cfg.anchor_offset_on_dim_change &&
                member_mean.size() == m) {
                // A dimension change opens or closes null directions the old
                // offset knows nothing about; anchor the candidate offset on
                // the members instead of carrying a stale projection.
                theta_cand = member_mean - cand.projection * member_mean;
            } else {
                theta_cand = comp.theta - cand.projection * comp.theta;
            }
            Vector resid_cand = residual_column(X, cand.basis, theta_cand);
            double new_loss =
                loss_with_candidate(state.residuals, state.components, idx, resid_cand, cand.dim);
            double log_ratio = gibbs_log_ratio(new_loss, state.current_loss, n, cfg.psi);
            ++stats.subspace_proposals;
            bool material = cand.dim != comp.subspace.dim ||
                            (cand.projection - comp.subspace.projection).cwiseAbs().maxCoeff() > 1e-9;
            if (material) ++stats.material_proposals;
            if (std::exp(log_ratio) > rng.uniform()) {
                ++stats.subspace_accepts;
                if (material) ++stats.material_accepts;
                if (cand.dim != comp.subspace.dim) ++stats.dim_flip_accepts;
                comp.subspace = cand;
                comp.theta = theta_cand;
                comp.z_anchor = z;
                // Re-anchor the offset walk so (I-P) beta_anchor equals the
                // stored theta again; a stale anchor would turn every tuned
                // offset proposal into a jump.
                comp.beta_anchor = theta_cand;
                resize_on_dim_change(comp, cand.dim, cfg.hyper, rng);
                state.residuals.col(idx) = resid_cand;
                state.current_loss = new_loss;
            }
        }

        // Offset move in the current null space.
        Vector beta =
            comp.beta_anchor + std::sqrt(cfg.theta_scale) * rng.standard_normal_vector(m);
        Vector theta_cand = beta - comp.subspace.projection * beta;
        Vector resid_cand = residual_column(X, comp.subspace.basis, theta_cand);
        double new_loss = loss_with_candidate(state.residuals, state.components, idx, resid_cand,
                                              comp.subspace.dim);
        double log_ratio = gibbs_log_ratio(new_loss, state.current_loss, n, cfg.psi);
        ++stats.theta_proposals;
        if (std::exp(log_ratio) > rng.uniform()) {
            ++stats.theta_accepts;
            comp.theta = theta_cand;
            comp.beta_anchor = beta;
            state.residuals.col(idx) = resid_cand;
            state.current_loss = new_loss;
        }
    }
    ++state.iteration;
    return stats;
}

Matrix assignment_weights(const ChainState& state, const GibbsConfig& cfg) {
    const Eigen::Index n = state.residuals.rows();
    const Eigen::Index K = state.residuals.cols();
    Matrix w(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
        double lo = state.residuals.row(i).minCoeff();
        double total = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) {
            double v = std::exp(-cfg.kappa * (state.residuals(i, k) - lo));
            w(i, k) = v;
            total += v;
        }
        w.row(i) /= total;
    }
    return w;
}

void assign_latents(ChainState& state, const Matrix& X, const GibbsConfig& cfg, RngHandle& rng) {
    (void)X;
    Matrix w = assignment_weights(state, cfg);
    const Eigen::Index n = w.rows();
    state.assignments.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        state.assignments[i] = rng.multinomial_draw(w.row(i).transpose());
}

void update_component_params(ChainState& state, const Matrix& X, const GibbsConfig& cfg,
                             RngHandle& rng) {
    const int m = static_cast<int>(X.cols());
    const int K = static_cast<int>(state.components.size());
    const GibbsHyper& h = cfg.hyper;

    Vector counts = Vector::Zero(K);
    for (Eigen::Index i = 0; i < state.assignments.size(); ++i)
        counts[state.assignments[i]] += 1.0;

    for (int k = 0; k < K; ++k) {
        ComponentParams& comp = state.components[k];
        const int d = comp.subspace.dim;
        const long n_k = static_cast<long>(counts[k]);

        if (n_k == 0) {
            comp.mu = rng.gaussian_vector(Vector::Zero(d), h.lambda);
            comp.noise_var = 1.0 / rng.gamma_draw(h.a, h.b);
            for (int j = 0; j < d; ++j) comp.sigma_diag[j] = 1.0 / rng.gamma_draw(h.a, h.b);
            continue;
        }

        // Projected member sums.
        Vector proj_sum = Vector::Zero(d);
        double resid_sum = 0.0;
        for (Eigen::Index i = 0; i < state.assignments.size(); ++i) {
            if (state.assignments[i] != k) continue;
            proj_sum += comp.subspace.basis.transpose() * X.row(i).transpose();
            resid_sum += state.residuals(i, k);
        }

        DiagGaussParams mu_post = mu_conditional(n_k, proj_sum, comp.sigma_diag, h);
        comp.mu = rng.gaussian_vector(mu_post.mean, mu_post.var);

        GammaParams gamma_post = noise_precision_conditional(n_k, resid_sum, m, d, h);
        comp.noise_var = 1.0 / rng.gamma_draw(gamma_post.shape, gamma_post.rate);

        for (int j = 0; j < d; ++j) {
            double sq = 0.0;
            for (Eigen::Index i = 0; i < state.assignments.size(); ++i) {
                if (state.assignments[i] != k) continue;
                double v = comp.subspace.basis.col(j).dot(X.row(i)) - comp.mu[j];
                sq += v * v;
            }
            GammaParams axis_post = axis_precision_conditional(n_k, sq, h);
            comp.sigma_diag[j] = 1.0 / rng.gamma_draw(axis_post.shape, axis_post.rate);
        }
    }

    if (cfg.sample_weights) {
        Vector alpha = counts.array() + h.alpha;
        state.weights = rng.dirichlet_draw(alpha);
    } else {
        state.weights = counts / static_cast<double>(state.assignments.size());
    }
}

namespace {

ComponentDraw snapshot_component(const ComponentParams& comp, double weight) {
    ComponentDraw d;
    d.basis = comp.subspace.basis;
    d.theta = comp.theta;
    d.mu = comp.mu;
    d.sigma_diag = comp.sigma_diag;
    d.noise_var = comp.noise_var;
    d.dim = comp.subspace.dim;
    d.weight = weight;
    return d;
}

void run_sweep(ChainState& state, const Matrix& X, const GibbsConfig& live, RngHandle& rng,
               MoveStats& stats) {
    assign_latents(state, X, live, rng);
    update_component_params(state, X, live, rng);
    stats += update_subspaces(state, X, live, rng);
}

} // namespace

int PosteriorDraws::map_index() const {
    if (draws.empty()) throw ValidationError("PosteriorDraws: no stored draws");
    int best = 0;
    for (int i = 1; i < static_cast<int>(draws.size()); ++i)
        if (draws[i].loss_value < draws[best].loss_value) best = i;
    return best;
}

PosteriorDraws run_chain(const Matrix& X, const GibbsConfig& cfg, RngHandle& rng) {
    const int m = static_cast<int>(X.cols());
    const int n = static_cast<int>(X.rows());
    cfg.validate(m);
    if (n < cfg.K) throw ValidationError("run_chain: need at least K observations");

    ChainState state = initialize_chain(X, cfg, rng);

    GibbsConfig live = cfg;
    const bool tune_psi = cfg.tune && cfg.psi <= 0.0;
    const bool tune_scales = cfg.tune;
    if (tune_psi) {
        live.psi = 1e-20;
        live.tau = 1.0;
    }
    if (cfg.psi <= 0.0 && !cfg.tune)
        throw ValidationError("run_chain: psi must be set when tuning is disabled");

    PosteriorDraws out;
    out.m = m;
    out.K = cfg.K;
    out.dim_histogram = Eigen::MatrixXi::Zero(cfg.K, m + 1);

    // Burn-in schedule. The temperature line search walks the log grid from
    // the hot end so the chain anneals as it cools. Each decade gets a short
    // window judged on proposals that materially change a subspace (null
    // re-roundings accept at any temperature and would mask the signal); a
    // decade whose rate falls below the floor gets its proposal variance
    // halved and is re-measured, so the walk can keep cooling with steps
    // matched to the temperature. Cooling stops at the first decade where
    // accepted dimension changes die out (the posterior over dimensions has
    // concentrated) or the step floor is hit. The scale phase then adapts
    // both proposal variances multiplicatively in their own windows; a
    // material rate pinned below the floor there warms one decade back and
    // starts the scales over.
    enum class Phase { PsiSearch, Scales, Done };
    Phase phase = tune_psi ? Phase::PsiSearch : (tune_scales ? Phase::Scales : Phase::Done);
    int psi_exponent = -20;
    int last_ok_exponent = -999;
    double last_ok_tau = 1.0;
    double decade_entry_tau = 1.0;
    const double scan_tau_floor = 1e-5;
    const int discard_per_candidate = 5;
    int discard_left = discard_per_candidate;
    MoveStats window;
    int window_sweeps = 0;
    const double inset = (cfg.scale_accept_hi - cfg.scale_accept_lo > 0.1) ? 0.03 : 0.0;
    bool tau_locked = false, theta_locked = false;

    const bool tune_debug = std::getenv("GRASSMIX_TUNE_DEBUG") != nullptr;

    for (int t = 1; t <= cfg.iters; ++t) {
        const bool in_burn_in = t <= cfg.burn_in;
        MoveStats sweep_stats;
        run_sweep(state, X, live, rng, sweep_stats);

        if (in_burn_in) {
            switch (phase) {
            case Phase::PsiSearch: {
                if (discard_left > 0) {
                    --discard_left;
                    break;
                }
                window += sweep_stats;
                ++window_sweeps;
                const bool saturated = window_sweeps >= 10 && window.material_proposals >= 15 &&
                                       window.material_rate() >= 0.98;
                const bool full = window_sweeps >= cfg.psi_window &&
                                  (window.material_proposals >= 20 ||
                                   window_sweeps >= 3 * cfg.psi_window);
                if (!saturated && !full) break;
                double rate = window.material_rate();
                double theta_rate = window.theta_rate();
                long flips = window.dim_flip_accepts;
                window = MoveStats{};
                window_sweeps = 0;
                if (tune_debug)
                    std::fprintf(stderr,
                                 "[tune] t=%d psi=1e%d tau=%g material=%.2f theta=%.2f flips=%ld\n",
                                 t, psi_exponent, live.tau, rate, theta_rate, flips);

                // Keep the offset step roughly matched to the cooling so the
                // scale phase starts near its window.
                if (theta_rate < cfg.scale_accept_lo)
                    live.theta_scale = std::max(live.theta_scale / cfg.scale_factor, 1e-9);
                else if (theta_rate > cfg.scale_accept_hi)
                    live.theta_scale = std::min(live.theta_scale * cfg.scale_factor, 4096.0);

                auto lock_back = [&]() {
                    if (last_ok_exponent != -999) {
                        psi_exponent = last_ok_exponent;
                        live.psi = std::pow(10.0, psi_exponent);
                        live.tau = last_ok_tau;
                    }
                    phase = tune_scales ? Phase::Scales : Phase::Done;
                };

                if (rate < cfg.accept_lo) {
                    // Too cold for the current step size: shrink the step up
                    // to six times within the decade before giving up on it.
                    if (live.tau > decade_entry_tau / 4096.0 + 1e-300 &&
                        live.tau / cfg.scale_factor >= scan_tau_floor) {
                        live.tau /= cfg.scale_factor;
                        discard_left = discard_per_candidate;
                        break;
                    }
                    if (last_ok_exponent == -999) {
                        std::ostringstream msg;
                        msg << "temperature grid: material acceptance collapsed below "
                            << cfg.accept_lo * 100 << "% at psi=1e" << psi_exponent
                            << " without ever entering the " << cfg.accept_lo * 100 << "%-"
                            << cfg.accept_hi * 100 << "% window";
                        throw TuningError(msg.str());
                    }
                    lock_back();
                    break;
                }

                if (rate <= cfg.accept_hi) {
                    // In the window: remember this decade and keep cooling.
                    last_ok_exponent = psi_exponent;
                    last_ok_tau = live.tau;
                    if (psi_exponent >= 20) {
                        lock_back();
                        break;
                    }
                } else if (psi_exponent >= 20) {
                    std::ostringstream msg;
                    msg << "temperature grid exhausted above the " << cfg.accept_hi * 100
                        << "% ceiling (last material rate " << rate * 100 << "%)";
                    throw TuningError(msg.str());
                }
                ++psi_exponent;
                live.psi = std::pow(10.0, psi_exponent);
                decade_entry_tau = live.tau;
                discard_left = discard_per_candidate;
                break;
            }
            case Phase::Scales: {
                window += sweep_stats;
                ++window_sweeps;
                if (window_sweeps < cfg.scale_window ||
                    (window.material_proposals < 30 && window_sweeps < 3 * cfg.scale_window))
                    break;
                double sub_rate = window.material_rate();
                double theta_rate = window.theta_rate();
                // Far outside the window, move in bigger multiplicative steps.
                double tau_step = (sub_rate < 0.5 * cfg.scale_accept_lo || sub_rate > 0.98)
                                      ? cfg.scale_factor * cfg.scale_factor
                                      : cfg.scale_factor;
                double theta_step = (theta_rate < 0.5 * cfg.scale_accept_lo || theta_rate > 0.98)
                                        ? cfg.scale_factor * cfg.scale_factor
                                        : cfg.scale_factor;
                if (sub_rate < cfg.scale_accept_lo + inset && !tau_locked)
                    live.tau /= tau_step;
                else if (sub_rate > cfg.scale_accept_hi - inset && !tau_locked)
                    live.tau *= tau_step;
                else
                    tau_locked = true;
                if (theta_rate < cfg.scale_accept_lo + inset && !theta_locked)
                    live.theta_scale /= theta_step;
                else if (theta_rate > cfg.scale_accept_hi - inset && !theta_locked)
                    live.theta_scale *= theta_step;
                else
                    theta_locked = true;
                if (live.tau <= 1e-9 || live.tau >= 4096.0) {
                    live.tau = std::clamp(live.tau, 1e-9, 4096.0);
                    tau_locked = true;
                }
                if (live.theta_scale <= 1e-9 || live.theta_scale >= 4096.0) {
                    live.theta_scale = std::clamp(live.theta_scale, 1e-9, 4096.0);
                    theta_locked = true;
                }
                // Re-open a locked scale that drifts out of the full window.
                if (tau_locked && (sub_rate < cfg.scale_accept_lo || sub_rate > cfg.scale_accept_hi))
                    tau_locked = false;
                if (theta_locked &&
                    (theta_rate < cfg.scale_accept_lo || theta_rate > cfg.scale_accept_hi))
                    theta_locked = false;
                if (tau_locked && theta_locked) phase = Phase::Done;
                window = MoveStats{};
                window_sweeps = 0;
                break;
            }
            case Phase::Done:
                break;
            }
        } else {
            out.post_burn_in += sweep_stats;
            int post = t - cfg.burn_in;
            if (post % cfg.thin == 0) {
                Draw draw;
                draw.loss_value = state.current_loss;
                draw.components.reserve(cfg.K);
                for (int k = 0; k < cfg.K; ++k) {
                    draw.components.push_back(snapshot_component(state.components[k],
                                                                 state.weights[k]));
                    out.dim_histogram(k, state.components[k].subspace.dim) += 1;
                }
                out.losses.push_back(draw.loss_value);
                out.draws.push_back(std::move(draw));
            }
        }
    }

    if (tune_psi && phase == Phase::PsiSearch)
        throw TuningError("burn-in ended during the temperature line search; increase burn_in");

    out.tuned_psi = live.psi;
    out.tuned_tau = live.tau;
    out.tuned_theta_scale = live.theta_scale;
    return out;
}

std::vector<ChainResult> run_chains(const Matrix& X, const GibbsConfig& cfg,
                                    std::uint64_t base_seed, int n_chains, int max_threads) {
    if (n_chains < 1) throw ValidationError("run_chains: need at least one chain");
    if (max_threads <= 0) {
        if (const char* env = std::getenv("GRASSMIX_THREADS")) max_threads = std::atoi(env);
        if (max_threads <= 0) max_threads = static_cast<int>(std::thread::hardware_concurrency());
        if (max_threads <= 0) max_threads = 1;
    }

    std::vector<ChainResult> results(n_chains);
    std::vector<std::exception_ptr> failures(n_chains);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int idx = next.fetch_add(1);
            if (idx >= n_chains) return;
            results[idx].chain_index = idx;
            results[idx].seed = base_seed + static_cast<std::uint64_t>(idx);
            try {
                RngHandle rng(results[idx].seed);
                results[idx].draws = run_chain(X, cfg, rng);
            } catch (...) {
                failures[idx] = std::current_exception();
            }
        }
    };

    int n_workers = std::min(max_threads, n_chains);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    for (int i = 0; i < n_chains; ++i)
        if (failures[i]) std::rethrow_exception(failures[i]);
    return results;
}

int classify(const PosteriorDraws& draws, const Vector& x) {
    const Draw& map = draws.map_draw();
    int best = 0;
    double best_resid = std::numeric_limits<double>::infinity();
    for (int k = 0; k < static_cast<int>(map.components.size()); ++k) {
        const ComponentDraw& c = map.components[k];
        Vector centered = x - c.theta;
        Vector along = c.basis.transpose() * centered;
        double r = centered.squaredNorm() - along.squaredNorm();
        if (r < best_resid) {
            best_resid = r;
            best = k;
        }
    }
    return best;
}

} // namespace grassmix
