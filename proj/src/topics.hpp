#pragma once

#include <string>
#include <vector>

#include "geometry.hpp"
#include "randcore.hpp"

namespace grassmix {

/// Term-count matrix with its vocabulary and document identifiers.
struct Corpus {
    Matrix counts; // D x V, nonnegative integers stored as doubles
    std::vector<std::string> vocabulary;
    std::vector<std::string> doc_ids;

    int docs() const { return static_cast<int>(counts.rows()); }
    int vocab_size() const { return static_cast<int>(counts.cols()); }
};

struct TopicConfig {
    double tau = 50.0;     // concentration of the document direction likelihood
    double alpha = 1.0;    // Dirichlet concentration over topic proportions
    double psi = 0.0;      // Gibbs temperature; <= 0 selects by held-out random search
    double tau_prop = 0.02; // variance of the coordinate-space random walk
    int iters = 2000;
    int burn_in = 800;
    int thin = 3;
    int k_max = 0;          // 0 means floor(V/2)
    double holdout_frac = 0.1;
    int psi_candidates = 16;
    int pilot_sweeps = 200;
    double prop_c = 100.0;  // Dirichlet proposal sharpness for proportions
    double prop_eps = 0.1;  // Dirichlet proposal floor
    int prop_steps = 1;     // proportion moves per document per sweep

    int effective_k_max(int vocab) const;
    void validate(int vocab) const;
};

/// Sampler state: the embedded topic coordinates, the decoded orthonormal
/// topic matrix with its count, and per-document proportions.
struct TopicState {
    Vector z_anchor; // length V(V+1)/2
    ConwayCoord eta;
    Matrix topics; // V x K, orthonormal columns
    int K = 0;
    std::vector<Vector> proportions; // one simplex vector per document
    double tau = 0.0;
    double psi = 0.0;
    double alpha = 1.0;
};

/// Centers a count row at zero and scales it to unit length. Throws on a
/// constant row (the centered vector would be zero).
Vector doc_vector(const Vector& counts_row);

/// Converts every corpus row; degenerate documents are dropped with a warning
/// on stderr. kept_rows, when given, receives the surviving row indices.
Matrix doc_vectors(const Corpus& corpus, std::vector<int>* kept_rows = nullptr);

/// Normalized convex combination of topics: topics * theta / ||topics * theta||.
Vector spherical_average(const Matrix& topics, const Vector& theta);

/// 2DK/V - sum_d tau * avg(topics, theta_d)^T v_d.
double topic_loss(const Matrix& topics, int K, const Matrix& docvecs,
                  const std::vector<Vector>& proportions, double tau);

TopicState initialize_topics(const Matrix& docvecs, const TopicConfig& cfg, RngHandle& rng);

/// One random-walk proposal of the embedded topics; on acceptance the
/// proportions are resized to the new K (truncate-and-renormalize on
/// shrink, pad with alpha/K mass on growth). Returns whether it accepted.
bool update_topics(TopicState& state, const Matrix& docvecs, const TopicConfig& cfg,
                   RngHandle& rng);

/// One Metropolis step per document on its proportions with a Dirichlet
/// proposal centered on the current value.
void update_proportions(TopicState& state, const Matrix& docvecs, const TopicConfig& cfg,
                        RngHandle& rng);

struct TopicDrawRec {
    Matrix topics;
    int K = 0;
    double loss_value = 0.0;
    std::vector<Vector> proportions;
};

struct TopicDraws {
    int vocab = 0;
    std::vector<TopicDrawRec> draws;
    Eigen::VectorXi k_histogram; // index k counts stored draws with K == k
    double chosen_psi = 0.0;
    double topic_acceptance = 0.0;   // post-burn-in
    double proportion_acceptance = 0.0;

    int map_index() const;
    const TopicDrawRec& map_draw() const { return draws.at(map_index()); }
    int k_mode() const;
};

/// Alternates topic and proportion updates for cfg.iters sweeps; when
/// cfg.psi <= 0 the temperature is first chosen by random search over
/// log(psi) in [-10, 10] scored by held-out loss.
TopicDraws fit_topics(const Matrix& docvecs, const TopicConfig& cfg, RngHandle& rng);

/// Corpus entry point: vectorizes documents (dropping degenerate rows) first.
TopicDraws fit_topics(const Corpus& corpus, const TopicConfig& cfg, RngHandle& rng);

/// Samples D document direction vectors from the generative model with
/// Haar-uniform orthonormal topics; used for self-consistency checks.
struct SampledModel {
    Matrix docvecs;   // D x V
    Matrix topics;    // V x K
    std::vector<Vector> proportions;
};
SampledModel sample_model_documents(int vocab, int k_true, int docs, double tau, double alpha,
                                    RngHandle& rng);

} // namespace grassmix
