/* grassmix: mixtures of linear subspaces of differing dimensions, with a
 * spherical-embedding MCMC sampler and an orthogonal spherical topic model.
 *
 * C API over the C++ core. All functions return GM_OK (0) on success or a
 * gm_status code; gm_last_error() describes the most recent failure on the
 * calling thread. Every *_free function accepts NULL.
 */
#ifndef GRASSMIX_H
#define GRASSMIX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gm_status {
    GM_OK = 0,
    GM_ERR_IO = 1,      /* unreadable/unwritable files, malformed input files */
    GM_ERR_INVALID = 2, /* bad arguments or violated preconditions */
    GM_ERR_TUNING = 3,  /* burn-in adaptation failed */
    GM_ERR_INTERNAL = 4
} gm_status;

/* Message for the last failure on this thread; empty string if none. */
const char* gm_last_error(void);

const char* gm_version(void);

/* Frees strings returned through char** out-parameters. */
void gm_string_free(char* s);

/* ---- datasets -------------------------------------------------------- */

typedef struct gm_dataset gm_dataset;

/* data is row-major n x m; labels may be NULL. */
gm_status gm_dataset_create(const double* data, int64_t n, int64_t m, const int32_t* labels,
                            gm_dataset** out);
gm_status gm_dataset_load_csv(const char* path, gm_dataset** out);
gm_status gm_dataset_save_csv(const gm_dataset* ds, const char* path);
int64_t gm_dataset_rows(const gm_dataset* ds);
int64_t gm_dataset_cols(const gm_dataset* ds);
int gm_dataset_has_labels(const gm_dataset* ds);
/* Copies into caller buffers sized rows*cols and rows respectively. */
gm_status gm_dataset_get_data(const gm_dataset* ds, double* out);
gm_status gm_dataset_get_labels(const gm_dataset* ds, int32_t* out);

/* Synthetic line-plus-plane generator in R^3. nu_mode: 0 = every precision
 * gamma-drawn with lower bound nu; 1 = nu is the noise variance scale. */
gm_status gm_simulate_line_plane(double nu, int n_per_component, int holdout_per_component,
                                 uint64_t seed, int nu_mode, gm_dataset** train,
                                 gm_dataset** holdout);

/* ---- mixture fit ------------------------------------------------------ */

/* config_text holds `key = value` lines (same keys as the CLI config file);
 * NULL or empty uses defaults. n_chains chains run in parallel with seeds
 * seed + chain index; GRASSMIX_THREADS caps the parallelism. On success
 * *json_out receives the fit summary document. */
gm_status gm_fit(const gm_dataset* ds, const char* config_text, uint64_t seed, int n_chains,
                 char** json_out);

/* ---- prediction -------------------------------------------------------- */

typedef struct gm_predictor gm_predictor;

gm_status gm_predictor_from_json_file(const char* path, gm_predictor** out);
int gm_predictor_ambient(const gm_predictor* p);
/* Writes one component index per dataset row into out (length rows). */
gm_status gm_predictor_classify(const gm_predictor* p, const gm_dataset* ds, int32_t* out);

/* Best label-permutation agreement between two labelings of length n. */
gm_status gm_clustering_accuracy(const int32_t* pred, const int32_t* truth, int64_t n,
                                 double* out);

/* ---- corpora and topics ------------------------------------------------ */

typedef struct gm_corpus gm_corpus;

gm_status gm_corpus_load(const char* path, gm_corpus** out);
gm_status gm_corpus_trim(const gm_corpus* corpus, double top_frac, int min_doc_freq,
                         gm_corpus** out);
int64_t gm_corpus_docs(const gm_corpus* corpus);
int64_t gm_corpus_terms(const gm_corpus* corpus);

/* config_text keys follow the CLI topic options. *json_out receives the
 * topic summary document. */
gm_status gm_fit_topics(const gm_corpus* corpus, const char* config_text, uint64_t seed,
                        char** json_out);

void gm_dataset_free(gm_dataset* ds);
void gm_predictor_free(gm_predictor* p);
void gm_corpus_free(gm_corpus* c);

#ifdef __cplusplus
}
#endif

#endif /* GRASSMIX_H */
