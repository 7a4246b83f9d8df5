#pragma once

#include <vector>

#include "geometry.hpp"
#include "randcore.hpp"

namespace grassmix {

/// One mixture component: the subspace, the within-subspace Gaussian, the
/// isotropic null-space noise, the affine offset, and the random-walk anchors
/// the proposals are centered on.
struct ComponentParams {
    SubspacePoint subspace;
    Vector mu;          // length dim
    Vector sigma_diag;  // length dim, entries > 0
    double noise_var = 1.0;
    Vector theta;       // length ambient, orthogonal to the basis
    Vector z_anchor;    // length m(m+1)/2
    Vector beta_anchor; // length ambient

    void validate() const;
};

struct GibbsHyper {
    double a = 1.0;       // gamma shape (both precisions)
    double b = 1.0;       // gamma rate
    double lambda = 1.0;  // prior variance of mu entries
    double phi_var = 1.0; // prior variance of theta entries
    double alpha = 1.0;   // Dirichlet concentration for the mixture weights
};

struct GibbsConfig {
    int K = 2;
    double psi = 0.0;         // Gibbs temperature; <= 0 selects it during burn-in
    double tau = 1.0;         // variance of the coordinate-space random walk
    double theta_scale = 1.0; // variance of the offset random walk
    double kappa = 1e6;       // assignment sharpness
    int iters = 5000;         // total sweeps, burn-in included
    int burn_in = 2000;
    int thin = 3;
    GibbsHyper hyper;
    int d_min = 1;
    int d_max = 0; // 0 means m-1
    bool tune = true;
    bool sample_weights = false;   // conjugate Dirichlet draw of w | assignments
    bool identity_center = false;  // recentre the proposal sphere at encode(I_m)
    // Dimension-changing proposals anchor the candidate offset on the mean of
    // the member observations instead of carrying the reprojected old offset;
    // the stale offset blocks every dimension move on affine data.
    bool anchor_offset_on_dim_change = true;

    // Burn-in adaptation windows.
    double accept_lo = 0.10;
    double accept_hi = 0.90;
    double scale_accept_lo = 0.25;
    double scale_accept_hi = 0.45;
    int psi_window = 25;
    int scale_window = 100;
    double scale_factor = 2.0;

    int effective_d_max(int m) const { return d_max > 0 ? d_max : m - 1; }
    void validate(int m) const;
    SphereSpec sphere(int m) const;
};

struct MoveStats {
    long subspace_proposals = 0;
    long subspace_accepts = 0;
    // Proposals whose rounded subspace actually differs from the current one;
    // the rounding map sends many nearby coordinates to the same projection,
    // and those null proposals always accept regardless of the temperature.
    long material_proposals = 0;
    long material_accepts = 0;
    long dim_flip_accepts = 0; // accepted moves that changed a dimension
    long theta_proposals = 0;
    long theta_accepts = 0;

    double subspace_rate() const {
        return subspace_proposals ? double(subspace_accepts) / double(subspace_proposals) : 0.0;
    }
    double material_rate() const {
        return material_proposals ? double(material_accepts) / double(material_proposals) : 1.0;
    }
    double theta_rate() const {
        return theta_proposals ? double(theta_accepts) / double(theta_proposals) : 0.0;
    }
    MoveStats& operator+=(const MoveStats& o) {
        subspace_proposals += o.subspace_proposals;
        subspace_accepts += o.subspace_accepts;
        material_proposals += o.material_proposals;
        material_accepts += o.material_accepts;
        dim_flip_accepts += o.dim_flip_accepts;
        theta_proposals += o.theta_proposals;
        theta_accepts += o.theta_accepts;
        return *this;
    }
};

/// Full sweep state: components, latent assignments, the residual cache
/// e_ik = ||(I - P_k)(x_i - theta_k)||^2, and the current loss value.
struct ChainState {
    std::vector<ComponentParams> components;
    Eigen::VectorXi assignments;
    int iteration = 0;
    double current_loss = 0.0;
    Matrix residuals; // n x K
    Vector weights;   // length K

    int n() const { return static_cast<int>(residuals.rows()); }
};

double component_log_density(const Vector& x, const ComponentParams& p);
double residual(const Vector& x, const ComponentParams& p);

/// Mean over observations of min_k (e_ik + d_k).
double loss(const std::vector<ComponentParams>& components, const Matrix& X);

/// Log Metropolis ratio -n * psi * (new_loss - old_loss).
double gibbs_log_ratio(double new_loss, double old_loss, Eigen::Index n, double psi);

// Conjugate conditional parameters, exposed so tests can check the sampled
// draws against the analytic laws.
struct GammaParams {
    double shape;
    double rate;
};
struct DiagGaussParams {
    Vector mean;
    Vector var;
};
GammaParams noise_precision_conditional(long n_k, double residual_sum, int m, int d,
                                        const GibbsHyper& h);
GammaParams axis_precision_conditional(long n_k, double centered_sq_sum, const GibbsHyper& h);
DiagGaussParams mu_conditional(long n_k, const Vector& proj_sum, const Vector& sigma_diag,
                               const GibbsHyper& h);

ChainState initialize_chain(const Matrix& X, const GibbsConfig& cfg, RngHandle& rng);

/// One random-permutation sweep of subspace and offset moves. cfg.psi, cfg.tau
/// and cfg.theta_scale are read as the live values.
MoveStats update_subspaces(ChainState& state, const Matrix& X, const GibbsConfig& cfg,
                           RngHandle& rng);

/// Softmax assignment weights, one row per observation, rows sum to 1.
Matrix assignment_weights(const ChainState& state, const GibbsConfig& cfg);

void assign_latents(ChainState& state, const Matrix& X, const GibbsConfig& cfg, RngHandle& rng);

void update_component_params(ChainState& state, const Matrix& X, const GibbsConfig& cfg,
                             RngHandle& rng);

/// Recomputes the residual cache and loss from scratch.
void refresh_residuals(ChainState& state, const Matrix& X);

struct ComponentDraw {
    Matrix basis;
    Vector theta;
    Vector mu;
    Vector sigma_diag;
    double noise_var = 1.0;
    int dim = 0;
    double weight = 0.0;
};

struct Draw {
    std::vector<ComponentDraw> components;
    double loss_value = 0.0;
};

struct PosteriorDraws {
    int m = 0;
    int K = 0;
    std::vector<Draw> draws;
    std::vector<double> losses;
    double tuned_psi = 0.0;
    double tuned_tau = 0.0;
    double tuned_theta_scale = 0.0;
    MoveStats post_burn_in;
    Eigen::MatrixXi dim_histogram; // K x (m+1), row sums equal draws.size()

    int map_index() const; // stored draw with minimal loss; throws when empty
    const Draw& map_draw() const { return draws.at(map_index()); }
};

/// Initialize, tune psi and the proposal scales during burn-in, then run the
/// remaining sweeps recording every `thin`-th draw.
PosteriorDraws run_chain(const Matrix& X, const GibbsConfig& cfg, RngHandle& rng);

struct ChainResult {
    int chain_index = 0;
    std::uint64_t seed = 0;
    PosteriorDraws draws;
};

/// Independent chains with seeds base_seed + chain index, run in parallel over
/// the shared data. max_threads <= 0 reads GRASSMIX_THREADS, falling back to
/// the hardware concurrency. Results come back ordered by chain index.
std::vector<ChainResult> run_chains(const Matrix& X, const GibbsConfig& cfg,
                                    std::uint64_t base_seed, int n_chains, int max_threads = 0);

/// Component index minimizing the residual of x under the minimum-loss stored
/// draw; ties resolve to the lowest index.
int classify(const PosteriorDraws& draws, const Vector& x);

} // namespace grassmix
