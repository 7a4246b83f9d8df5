#include "grassmix.h"

#include <cstring>
#include <new>
#include <string>

#include "dataio.hpp"
#include "errors.hpp"
#include "kvconfig.hpp"
#include "mixture.hpp"
#include "summary_json.hpp"
#include "topics.hpp"

using namespace grassmix;

struct gm_dataset {
    LabeledDataset ds;
};
struct gm_predictor {
    Predictor p;
};
struct gm_corpus {
    Corpus c;
};

namespace {

thread_local std::string tl_error;

void set_error(const std::string& msg) { tl_error = msg; }

gm_status fail(gm_status code, const std::string& msg) {
    set_error(msg);
    return code;
}

// Maps core exceptions onto status codes; clears the error slot on success.
template <typename Fn>
gm_status guarded(Fn&& fn) {
    try {
        fn();
        tl_error.clear();
        return GM_OK;
    } catch (const ValidationError& e) {
        return fail(GM_ERR_INVALID, e.what());
    } catch (const IoError& e) {
        return fail(GM_ERR_IO, e.what());
    } catch (const TuningError& e) {
        return fail(GM_ERR_TUNING, e.what());
    } catch (const std::bad_alloc&) {
        return fail(GM_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(GM_ERR_INTERNAL, e.what());
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

extern "C" {

const char* gm_last_error(void) { return tl_error.c_str(); }

const char* gm_version(void) { return "0.1.0"; }

void gm_string_free(char* s) { delete[] s; }

gm_status gm_dataset_create(const double* data, int64_t n, int64_t m, const int32_t* labels,
                            gm_dataset** out) {
    return guarded([&] {
        if (!data || !out) throw ValidationError("gm_dataset_create: null pointer");
        if (n < 1 || m < 1) throw ValidationError("gm_dataset_create: need n >= 1, m >= 1");
        auto* h = new gm_dataset;
        h->ds.X.resize(n, m);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j) h->ds.X(i, j) = data[i * m + j];
        if (labels) {
            h->ds.labels.resize(n);
            for (int64_t i = 0; i < n; ++i) h->ds.labels[i] = labels[i];
        }
        *out = h;
    });
}

gm_status gm_dataset_load_csv(const char* path, gm_dataset** out) {
    return guarded([&] {
        if (!path || !out) throw ValidationError("gm_dataset_load_csv: null pointer");
        auto* h = new gm_dataset;
        try {
            h->ds = load_csv(path);
        } catch (...) {
            delete h;
            throw;
        }
        *out = h;
    });
}

gm_status gm_dataset_save_csv(const gm_dataset* ds, const char* path) {
    return guarded([&] {
        if (!ds || !path) throw ValidationError("gm_dataset_save_csv: null pointer");
        save_csv(ds->ds, path);
    });
}

int64_t gm_dataset_rows(const gm_dataset* ds) { return ds ? ds->ds.X.rows() : 0; }

int64_t gm_dataset_cols(const gm_dataset* ds) { return ds ? ds->ds.X.cols() : 0; }

int gm_dataset_has_labels(const gm_dataset* ds) { return ds && ds->ds.has_labels() ? 1 : 0; }

gm_status gm_dataset_get_data(const gm_dataset* ds, double* out) {
    return guarded([&] {
        if (!ds || !out) throw ValidationError("gm_dataset_get_data: null pointer");
        for (int i = 0; i < ds->ds.X.rows(); ++i)
            for (int j = 0; j < ds->ds.X.cols(); ++j) out[i * ds->ds.X.cols() + j] = ds->ds.X(i, j);
    });
}

gm_status gm_dataset_get_labels(const gm_dataset* ds, int32_t* out) {
    return guarded([&] {
        if (!ds || !out) throw ValidationError("gm_dataset_get_labels: null pointer");
        if (!ds->ds.has_labels()) throw ValidationError("dataset has no labels");
        for (int i = 0; i < ds->ds.labels.size(); ++i) out[i] = ds->ds.labels[i];
    });
}

gm_status gm_simulate_line_plane(double nu, int n_per_component, int holdout_per_component,
                                 uint64_t seed, int nu_mode, gm_dataset** train,
                                 gm_dataset** holdout) {
    return guarded([&] {
        if (!train || !holdout) throw ValidationError("gm_simulate_line_plane: null pointer");
        GeneratorSpec spec;
        spec.nu = nu;
        spec.n_per_component = n_per_component;
        spec.holdout_per_component = holdout_per_component;
        spec.seed = seed;
        spec.mode = nu_mode ? GeneratorSpec::NuMode::NoiseScale
                            : GeneratorSpec::NuMode::PrecisionFloor;
        LabeledDataset all = simulate_line_plane(spec);
        auto [tr, ho] = split_by_holdout(all);
        auto* ht = new gm_dataset{std::move(tr)};
        auto* hh = new gm_dataset{std::move(ho)};
        *train = ht;
        *holdout = hh;
    });
}

gm_status gm_fit(const gm_dataset* ds, const char* config_text, uint64_t seed, int n_chains,
                 char** json_out) {
    return guarded([&] {
        if (!ds || !json_out) throw ValidationError("gm_fit: null pointer");
        GibbsConfig cfg = gibbs_config_from_text(config_text ? config_text : "");
        auto chains = run_chains(ds->ds.X, cfg, seed, n_chains);
        *json_out = dup_string(fit_summary_json(chains, cfg, ""));
    });
}

gm_status gm_predictor_from_json_file(const char* path, gm_predictor** out) {
    return guarded([&] {
        if (!path || !out) throw ValidationError("gm_predictor_from_json_file: null pointer");
        auto* h = new gm_predictor{predictor_from_json_file(path)};
        *out = h;
    });
}

int gm_predictor_ambient(const gm_predictor* p) { return p ? p->p.m : 0; }

gm_status gm_predictor_classify(const gm_predictor* p, const gm_dataset* ds, int32_t* out) {
    return guarded([&] {
        if (!p || !ds || !out) throw ValidationError("gm_predictor_classify: null pointer");
        if (ds->ds.X.cols() != p->p.m)
            throw ValidationError("gm_predictor_classify: dataset has " +
                                  std::to_string(ds->ds.X.cols()) + " columns, model expects " +
                                  std::to_string(p->p.m));
        for (int i = 0; i < ds->ds.X.rows(); ++i)
            out[i] = p->p.classify(ds->ds.X.row(i).transpose());
    });
}

gm_status gm_clustering_accuracy(const int32_t* pred, const int32_t* truth, int64_t n,
                                 double* out) {
    return guarded([&] {
        if (!pred || !truth || !out) throw ValidationError("gm_clustering_accuracy: null pointer");
        Eigen::VectorXi p(n), t(n);
        for (int64_t i = 0; i < n; ++i) {
            p[i] = pred[i];
            t[i] = truth[i];
        }
        *out = clustering_accuracy(p, t);
    });
}

gm_status gm_corpus_load(const char* path, gm_corpus** out) {
    return guarded([&] {
        if (!path || !out) throw ValidationError("gm_corpus_load: null pointer");
        auto* h = new gm_corpus{load_corpus(path)};
        *out = h;
    });
}

gm_status gm_corpus_trim(const gm_corpus* corpus, double top_frac, int min_doc_freq,
                         gm_corpus** out) {
    return guarded([&] {
        if (!corpus || !out) throw ValidationError("gm_corpus_trim: null pointer");
        auto* h = new gm_corpus{trim_vocabulary(corpus->c, top_frac, min_doc_freq)};
        *out = h;
    });
}

int64_t gm_corpus_docs(const gm_corpus* corpus) { return corpus ? corpus->c.docs() : 0; }

int64_t gm_corpus_terms(const gm_corpus* corpus) { return corpus ? corpus->c.vocab_size() : 0; }

gm_status gm_fit_topics(const gm_corpus* corpus, const char* config_text, uint64_t seed,
                        char** json_out) {
    return guarded([&] {
        if (!corpus || !json_out) throw ValidationError("gm_fit_topics: null pointer");
        TopicConfig cfg = topic_config_from_text(config_text ? config_text : "");
        RngHandle rng(seed);
        TopicDraws draws = fit_topics(corpus->c, cfg, rng);
        *json_out = dup_string(
            topic_summary_json(draws, cfg, "", corpus->c.vocabulary, corpus->c.doc_ids));
    });
}

void gm_dataset_free(gm_dataset* ds) { delete ds; }
void gm_predictor_free(gm_predictor* p) { delete p; }
void gm_corpus_free(gm_corpus* c) { delete c; }

} // extern "C"
