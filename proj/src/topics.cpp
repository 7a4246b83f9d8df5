#include "topics.hpp"

#include <cmath>
#include <iostream>
#include <limits>

#include "errors.hpp"

namespace grassmix {

namespace {

Vector resize_simplex(const Vector& theta, int new_k, double alpha) {
    const int old_k = static_cast<int>(theta.size());
    if (new_k == old_k) return theta;
    Vector out;
    if (new_k < old_k) {
        out = theta.head(new_k).eval();
        double s = out.sum();
        if (s < 1e-12) return Vector::Constant(new_k, 1.0 / new_k);
        return out / s;
    }
    out.resize(new_k);
    out.head(old_k) = theta;
    for (int j = old_k; j < new_k; ++j) out[j] = alpha / new_k;
    return out / out.sum();
}

double log_dirichlet_pdf(const Vector& x, const Vector& alpha) {
    double lp = std::lgamma(alpha.sum());
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        lp -= std::lgamma(alpha[j]);
        lp += (alpha[j] - 1.0) * std::log(std::max(x[j], 1e-300));
    }
    return lp;
}

// cos between avg(topics, theta) and a unit doc vector, given proj = topics^T v.
double average_cosine(const Vector& theta, const Vector& proj) {
    double norm = theta.norm(); // equals ||topics * theta|| for orthonormal topics
    if (norm < 1e-12) throw ValidationError("spherical average of a zero combination");
    return theta.dot(proj) / norm;
}

std::vector<Vector> fit_holdout_proportions(const Matrix& topics, int K, const Matrix& docvecs,
                                            const TopicConfig& cfg, RngHandle& rng, int steps) {
    const int D = static_cast<int>(docvecs.rows());
    std::vector<Vector> props(D, Vector::Constant(K, 1.0 / K));
    if (K == 1) return props;
    Vector alpha_prior = Vector::Constant(K, cfg.alpha);
    for (int d = 0; d < D; ++d) {
        Vector proj = topics.transpose() * docvecs.row(d).transpose();
        Vector theta = props[d];
        double lp = log_dirichlet_pdf(theta, alpha_prior) + cfg.tau * average_cosine(theta, proj);
        for (int s = 0; s < steps; ++s) {
            Vector prop_alpha = cfg.prop_c * theta + Vector::Constant(K, cfg.prop_eps);
            Vector cand = rng.dirichlet_draw(prop_alpha);
            Vector cand_alpha = cfg.prop_c * cand + Vector::Constant(K, cfg.prop_eps);
            double lp_cand =
                log_dirichlet_pdf(cand, alpha_prior) + cfg.tau * average_cosine(cand, proj);
            double log_ratio = lp_cand - lp + log_dirichlet_pdf(theta, cand_alpha) -
                               log_dirichlet_pdf(cand, prop_alpha);
            if (std::exp(log_ratio) > rng.uniform()) {
                theta = cand;
                lp = lp_cand;
            }
        }
        props[d] = theta;
    }
    return props;
}

} // namespace

int TopicConfig::effective_k_max(int vocab) const { return k_max > 0 ? k_max : vocab / 2; }

void TopicConfig::validate(int vocab) const {
    if (vocab < 2) throw ValidationError("TopicConfig: vocabulary must have at least 2 terms");
    if (tau <= 0.0) throw ValidationError("TopicConfig: tau must be > 0");
    if (alpha <= 0.0) throw ValidationError("TopicConfig: alpha must be > 0");
    if (tau_prop <= 0.0) throw ValidationError("TopicConfig: tau_prop must be > 0");
    if (thin < 1) throw ValidationError("TopicConfig: thin must be >= 1");
    if (iters < 0 || burn_in < 0 || burn_in > iters)
        throw ValidationError("TopicConfig: need 0 <= burn_in <= iters");
    const int km = effective_k_max(vocab);
    if (km < 1 || km > vocab - 1)
        throw ValidationError("TopicConfig: need 1 <= k_max <= V-1");
    if (prop_c <= 0.0 || prop_eps <= 0.0 || prop_steps < 1)
        throw ValidationError("TopicConfig: invalid proportion proposal parameters");
    if (holdout_frac < 0.0 || holdout_frac >= 1.0)
        throw ValidationError("TopicConfig: holdout fraction must be in [0, 1)");
}

Vector doc_vector(const Vector& counts_row) {
    const Eigen::Index v = counts_row.size();
    if (v < 2) throw ValidationError("doc_vector: need at least 2 terms");
    Vector centered = counts_row.array() - counts_row.mean();
    double norm = centered.norm();
    if (norm < 1e-12)
        throw ValidationError("doc_vector: constant count row has no direction");
    return centered / norm;
}

Matrix doc_vectors(const Corpus& corpus, std::vector<int>* kept_rows) {
    std::vector<int> kept;
    std::vector<Vector> rows;
    for (int d = 0; d < corpus.docs(); ++d) {
        try {
            rows.push_back(doc_vector(corpus.counts.row(d)));
            kept.push_back(d);
        } catch (const ValidationError&) {
            std::cerr << "warning: dropping degenerate document '"
                      << (d < static_cast<int>(corpus.doc_ids.size()) ? corpus.doc_ids[d]
                                                                      : std::to_string(d))
                      << "' (constant term counts)\n";
        }
    }
    Matrix out(static_cast<int>(rows.size()), corpus.vocab_size());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<int>(i)) = rows[i];
    if (kept_rows) *kept_rows = kept;
    return out;
}

Vector spherical_average(const Matrix& topics, const Vector& theta) {
    if (topics.cols() != theta.size())
        throw ValidationError("spherical_average: dimension mismatch");
    Vector combo = topics * theta;
    double norm = combo.norm();
    if (norm < 1e-12)
        throw ValidationError("spherical_average: zero combination");
    return combo / norm;
}

double topic_loss(const Matrix& topics, int K, const Matrix& docvecs,
                  const std::vector<Vector>& proportions, double tau) {
    const int D = static_cast<int>(docvecs.rows());
    const int V = static_cast<int>(docvecs.cols());
    if (static_cast<int>(proportions.size()) != D)
        throw ValidationError("topic_loss: one proportion vector per document required");
    double fit = 0.0;
    for (int d = 0; d < D; ++d) {
        Vector proj = topics.transpose() * docvecs.row(d).transpose();
        fit += tau * average_cosine(proportions[d], proj);
    }
    return 2.0 * static_cast<double>(D) * K / V - fit;
}

TopicState initialize_topics(const Matrix& docvecs, const TopicConfig& cfg, RngHandle& rng) {
    const int V = static_cast<int>(docvecs.cols());
    const int D = static_cast<int>(docvecs.rows());
    cfg.validate(V);
    const SphereSpec sphere = SphereSpec::standard(V);
    const int len = conway_length(V);

    TopicState state;
    state.tau = cfg.tau;
    state.psi = cfg.psi;
    state.alpha = cfg.alpha;
    Vector z = std::sqrt(cfg.tau_prop) * rng.standard_normal_vector(len);
    while (z.norm() < 1e-300) z = std::sqrt(cfg.tau_prop) * rng.standard_normal_vector(len);
    state.z_anchor = z;
    state.eta.ambient = V;
    state.eta.coords = sphere.center.coords + sphere.radius * z / z.norm();
    SubspacePoint sub = nearest_subspace(state.eta, 1, cfg.effective_k_max(V));
    state.topics = sub.basis;
    state.K = sub.dim;
    state.proportions.assign(D, Vector());
    for (int d = 0; d < D; ++d)
        state.proportions[d] = rng.dirichlet_draw(Vector::Constant(state.K, cfg.alpha));
    return state;
}

bool update_topics(TopicState& state, const Matrix& docvecs, const TopicConfig& cfg,
                   RngHandle& rng) {
    const int V = static_cast<int>(docvecs.cols());
    const int D = static_cast<int>(docvecs.rows());
    if (state.psi <= 0.0) throw ValidationError("update_topics: psi must be > 0");
    const SphereSpec sphere = SphereSpec::standard(V);
    const int len = conway_length(V);

    Vector z = state.z_anchor + std::sqrt(cfg.tau_prop) * rng.standard_normal_vector(len);
    if (z.norm() < 1e-300) return false;
    ConwayCoord eta;
    eta.ambient = V;
    eta.coords = sphere.center.coords + sphere.radius * z / z.norm();
    SubspacePoint cand = nearest_subspace(eta, 1, cfg.effective_k_max(V));

    std::vector<Vector> cand_props(state.proportions.size());
    for (size_t d = 0; d < cand_props.size(); ++d)
        cand_props[d] = resize_simplex(state.proportions[d], cand.dim, cfg.alpha);

    double old_loss = topic_loss(state.topics, state.K, docvecs, state.proportions, state.tau);
    double new_loss = topic_loss(cand.basis, cand.dim, docvecs, cand_props, state.tau);
    double log_ratio = -state.psi * static_cast<double>(D) * (new_loss - old_loss);
    if (std::exp(log_ratio) > rng.uniform()) {
        state.topics = cand.basis;
        state.K = cand.dim;
        state.eta = eta;
        state.z_anchor = z;
        state.proportions = std::move(cand_props);
        return true;
    }
    return false;
}

void update_proportions(TopicState& state, const Matrix& docvecs, const TopicConfig& cfg,
                        RngHandle& rng) {
    const int D = static_cast<int>(docvecs.rows());
    const int K = state.K;
    if (K == 1) return; // the single proportion vector is identically (1)
    Vector alpha_prior = Vector::Constant(K, state.alpha);
    for (int d = 0; d < D; ++d) {
        Vector proj = state.topics.transpose() * docvecs.row(d).transpose();
        Vector theta = state.proportions[d];
        double lp = log_dirichlet_pdf(theta, alpha_prior) + state.tau * average_cosine(theta, proj);
        for (int s = 0; s < cfg.prop_steps; ++s) {
            Vector prop_alpha = cfg.prop_c * theta + Vector::Constant(K, cfg.prop_eps);
            Vector cand = rng.dirichlet_draw(prop_alpha);
            Vector cand_alpha = cfg.prop_c * cand + Vector::Constant(K, cfg.prop_eps);
            double lp_cand =
                log_dirichlet_pdf(cand, alpha_prior) + state.tau * average_cosine(cand, proj);
            double log_ratio = lp_cand - lp + log_dirichlet_pdf(theta, cand_alpha) -
                               log_dirichlet_pdf(cand, prop_alpha);
            if (std::exp(log_ratio) > rng.uniform()) {
                theta = cand;
                lp = lp_cand;
            }
        }
        state.proportions[d] = theta;
    }
}

int TopicDraws::map_index() const {
    if (draws.empty()) throw ValidationError("TopicDraws: no stored draws");
    int best = 0;
    for (int i = 1; i < static_cast<int>(draws.size()); ++i)
        if (draws[i].loss_value < draws[best].loss_value) best = i;
    return best;
}

int TopicDraws::k_mode() const {
    if (k_histogram.size() == 0) throw ValidationError("TopicDraws: empty histogram");
    int best = 0;
    for (int k = 1; k < k_histogram.size(); ++k)
        if (k_histogram[k] > k_histogram[best]) best = k;
    return best;
}

TopicDraws fit_topics(const Matrix& docvecs, const TopicConfig& cfg, RngHandle& rng) {
    const int V = static_cast<int>(docvecs.cols());
    const int D = static_cast<int>(docvecs.rows());
    cfg.validate(V);
    if (D < 1) throw ValidationError("fit_topics: no documents");

    TopicConfig live = cfg;
    if (cfg.psi <= 0.0) {
        // Held-out random search for the temperature.
        int n_hold = std::max(1, static_cast<int>(std::lround(cfg.holdout_frac * D)));
        if (n_hold >= D) n_hold = D - 1;
        if (n_hold < 1 || D < 4) {
            live.psi = 1.0;
        } else {
            std::vector<int> perm = rng.permutation(D);
            Matrix train(D - n_hold, V), hold(n_hold, V);
            for (int i = 0; i < D - n_hold; ++i) train.row(i) = docvecs.row(perm[i]);
            for (int i = 0; i < n_hold; ++i) hold.row(i) = docvecs.row(perm[D - n_hold + i]);

            double best_psi = 1.0;
            double best_score = std::numeric_limits<double>::infinity();
            for (int c = 0; c < cfg.psi_candidates; ++c) {
                double log_psi = -10.0 + 20.0 * rng.uniform();
                TopicConfig pilot = cfg;
                pilot.psi = std::exp(log_psi);
                TopicState st = initialize_topics(train, pilot, rng);
                for (int t = 0; t < cfg.pilot_sweeps; ++t) {
                    update_topics(st, train, pilot, rng);
                    update_proportions(st, train, pilot, rng);
                }
                auto hold_props =
                    fit_holdout_proportions(st.topics, st.K, hold, pilot, rng, 100);
                double score = topic_loss(st.topics, st.K, hold, hold_props, cfg.tau);
                if (score < best_score) {
                    best_score = score;
                    best_psi = pilot.psi;
                }
            }
            live.psi = best_psi;
        }
    }

    TopicState state = initialize_topics(docvecs, live, rng);
    TopicDraws out;
    out.vocab = V;
    out.chosen_psi = live.psi;
    out.k_histogram = Eigen::VectorXi::Zero(live.effective_k_max(V) + 1);

    long topic_acc = 0, topic_prop = 0;
    for (int t = 1; t <= live.iters; ++t) {
        bool accepted = update_topics(state, docvecs, live, rng);
        update_proportions(state, docvecs, live, rng);
        if (t > live.burn_in) {
            ++topic_prop;
            topic_acc += accepted ? 1 : 0;
            int post = t - live.burn_in;
            if (post % live.thin == 0) {
                TopicDrawRec rec;
                rec.topics = state.topics;
                rec.K = state.K;
                rec.loss_value =
                    topic_loss(state.topics, state.K, docvecs, state.proportions, state.tau);
                rec.proportions = state.proportions;
                out.k_histogram[state.K] += 1;
                out.draws.push_back(std::move(rec));
            }
        }
    }
    out.topic_acceptance = topic_prop ? double(topic_acc) / double(topic_prop) : 0.0;
    return out;
}

TopicDraws fit_topics(const Corpus& corpus, const TopicConfig& cfg, RngHandle& rng) {
    Matrix vecs = doc_vectors(corpus);
    return fit_topics(vecs, cfg, rng);
}

SampledModel sample_model_documents(int vocab, int k_true, int docs, double tau, double alpha,
                                    RngHandle& rng) {
    if (vocab < 2 || k_true < 1 || k_true > vocab - 1 || docs < 1)
        throw ValidationError("sample_model_documents: invalid sizes");
    SampledModel out;
    out.topics = rng.uniform_stiefel(vocab, k_true);
    out.docvecs.resize(docs, vocab);
    out.proportions.reserve(docs);
    Vector alpha_vec = Vector::Constant(k_true, alpha);
    for (int d = 0; d < docs; ++d) {
        Vector theta = rng.dirichlet_draw(alpha_vec);
        Vector mean = spherical_average(out.topics, theta);
        out.docvecs.row(d) = rng.vmf_draw(mean, tau);
        out.proportions.push_back(theta);
    }
    return out;
}

} // namespace grassmix
