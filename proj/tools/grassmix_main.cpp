// Command-line front end. Links against the shared C API only.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grassmix.h"

namespace {

int status_to_exit(gm_status s) {
    switch (s) {
    case GM_OK:
        return 0;
    case GM_ERR_IO:
        return 1;
    case GM_ERR_INVALID:
        return 2;
    case GM_ERR_TUNING:
        return 3;
    default:
        return 4;
    }
}

int report(gm_status s) {
    if (s != GM_OK) std::cerr << "error: " << gm_last_error() << "\n";
    return status_to_exit(s);
}

bool write_text_file(const std::string& path, const char* text) {
    std::ofstream out(path);
    if (!out) return false;
    out << text;
    return static_cast<bool>(out);
}

std::string read_text_file(const std::string& path, bool& ok) {
    std::ifstream in(path);
    if (!in) {
        ok = false;
        return "";
    }
    std::stringstream ss;
    ss << in.rdbuf();
    ok = true;
    return ss.str();
}

struct DatasetGuard {
    gm_dataset* h = nullptr;
    ~DatasetGuard() { gm_dataset_free(h); }
};
struct CorpusGuard {
    gm_corpus* h = nullptr;
    ~CorpusGuard() { gm_corpus_free(h); }
};
struct PredictorGuard {
    gm_predictor* h = nullptr;
    ~PredictorGuard() { gm_predictor_free(h); }
};

// Reads integer labels from a CSV: the `label` column when present,
// otherwise the first column.
int read_label_column(const std::string& path, std::vector<int32_t>& out) {
    DatasetGuard ds;
    gm_status s = gm_dataset_load_csv(path.c_str(), &ds.h);
    if (s != GM_OK) return report(s);
    int64_t n = gm_dataset_rows(ds.h);
    out.resize(n);
    if (gm_dataset_has_labels(ds.h)) {
        s = gm_dataset_get_labels(ds.h, out.data());
        if (s != GM_OK) return report(s);
    } else {
        std::vector<double> data(n * gm_dataset_cols(ds.h));
        s = gm_dataset_get_data(ds.h, data.data());
        if (s != GM_OK) return report(s);
        int64_t m = gm_dataset_cols(ds.h);
        for (int64_t i = 0; i < n; ++i) out[i] = static_cast<int32_t>(data[i * m] + 0.5);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian mixtures of linear subspaces of differing dimensions"};
    app.require_subcommand(1);

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "Generate the synthetic line-plus-plane dataset");
    double nu = 1.0;
    int n_per = 500, holdout_per = 50;
    std::uint64_t sim_seed = 0;
    std::string nu_mode = "precision-floor";
    std::string out_train = "train.csv", out_holdout = "holdout.csv";
    sim->add_option("--nu", nu, "Precision/noise parameter of the generator (> 0)")->required();
    sim->add_option("--n-per", n_per, "Training observations per component")->capture_default_str();
    sim->add_option("--holdout-per", holdout_per, "Holdout observations per component")
        ->capture_default_str();
    sim->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
    sim->add_option("--nu-mode", nu_mode, "precision-floor | noise-scale")
        ->check(CLI::IsMember({"precision-floor", "noise-scale"}))
        ->capture_default_str();
    sim->add_option("--out-train", out_train, "Training CSV path")->capture_default_str();
    sim->add_option("--out-holdout", out_holdout, "Holdout CSV path")->capture_default_str();

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "Sample the mixture posterior and write a summary JSON");
    std::string fit_input, fit_out = "model.json", fit_config;
    int fit_K = 2, fit_iters = 5000, fit_burn = 2000, fit_thin = 3, fit_chains = 1;
    std::uint64_t fit_seed = 0;
    double fit_psi = 0, fit_tau = 0, fit_kappa = 0;
    int fit_dmin = 0, fit_dmax = 0;
    fit->add_option("--input", fit_input, "Input CSV")->required();
    auto* oK = fit->add_option("--components,-K", fit_K, "Number of mixture components");
    auto* oIters = fit->add_option("--iters", fit_iters, "Total sweeps including burn-in");
    auto* oBurn = fit->add_option("--burn-in", fit_burn, "Burn-in sweeps");
    auto* oThin = fit->add_option("--thin", fit_thin, "Keep every thin-th post-burn-in draw");
    fit->add_option("--seed", fit_seed, "Base RNG seed")->capture_default_str();
    fit->add_option("--chains", fit_chains, "Independent chains (seeds seed+i)")
        ->capture_default_str();
    fit->add_option("--config", fit_config, "key = value config file; flags override");
    fit->add_option("--out", fit_out, "Output JSON path")->capture_default_str();
    auto* oPsi = fit->add_option("--psi", fit_psi, "Fix the Gibbs temperature (skips its tuning)");
    auto* oTau = fit->add_option("--tau", fit_tau, "Initial proposal variance");
    auto* oKappa = fit->add_option("--kappa", fit_kappa, "Assignment sharpness");
    auto* oDmin = fit->add_option("--d-min", fit_dmin, "Smallest allowed subspace dimension");
    auto* oDmax = fit->add_option("--d-max", fit_dmax, "Largest allowed subspace dimension");

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "Assign rows to components under a fitted model");
    std::string pr_model, pr_input, pr_out = "assignments.csv";
    predict->add_option("--model", pr_model, "Fit summary JSON")->required();
    predict->add_option("--input", pr_input, "Input CSV")->required();
    predict->add_option("--out", pr_out, "Output CSV of assignments")->capture_default_str();

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Print clustering accuracy");
    std::string ev_model, ev_input, ev_pred, ev_truth;
    eval->add_option("--model", ev_model, "Fit summary JSON (with --input)");
    eval->add_option("--input", ev_input, "Labeled CSV to classify and score");
    eval->add_option("--pred", ev_pred, "Predicted assignment CSV (with --truth)");
    eval->add_option("--truth", ev_truth, "Labeled CSV with ground truth");

    // ---- fit-topics ----
    auto* ft = app.add_subcommand("fit-topics", "Fit the orthogonal spherical topic model");
    std::string ft_corpus, ft_out = "topics.json", ft_config;
    double ft_tau = 50.0, ft_alpha = 1.0, ft_top_frac = 0.10, ft_psi = 0;
    int ft_iters = 2000, ft_burn = 800, ft_thin = 3, ft_min_df = 5, ft_kmax = 0, ft_vcap = 64;
    std::uint64_t ft_seed = 0;
    ft->add_option("--corpus", ft_corpus, "doc_id<TAB>term<TAB>count file")->required();
    auto* tTau = ft->add_option("--tau", ft_tau, "Document direction concentration");
    auto* tAlpha = ft->add_option("--alpha", ft_alpha, "Dirichlet concentration");
    auto* tIters = ft->add_option("--iters", ft_iters, "Total sweeps including burn-in");
    auto* tBurn = ft->add_option("--burn-in", ft_burn, "Burn-in sweeps");
    auto* tThin = ft->add_option("--thin", ft_thin, "Thinning stride");
    auto* tPsi = ft->add_option("--psi", ft_psi, "Fix the temperature (skips the random search)");
    auto* tKmax = ft->add_option("--k-max", ft_kmax, "Topic count cap (default floor(V/2))");
    ft->add_option("--top-frac", ft_top_frac, "tf-idf trimming fraction")->capture_default_str();
    ft->add_option("--min-doc-freq", ft_min_df, "Minimum document frequency")
        ->capture_default_str();
    ft->add_option("--v-cap", ft_vcap, "Refuse vocabularies larger than this after trimming")
        ->capture_default_str();
    ft->add_option("--seed", ft_seed, "RNG seed")->capture_default_str();
    ft->add_option("--config", ft_config, "key = value config file; flags override");
    ft->add_option("--out", ft_out, "Output JSON path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (sim->parsed()) {
        if (nu <= 0.0) {
            std::cerr << "error: --nu must be > 0\n";
            return 2;
        }
        DatasetGuard train, holdout;
        gm_status s = gm_simulate_line_plane(nu, n_per, holdout_per, sim_seed,
                                             nu_mode == "noise-scale" ? 1 : 0, &train.h,
                                             &holdout.h);
        if (s != GM_OK) return report(s);
        s = gm_dataset_save_csv(train.h, out_train.c_str());
        if (s != GM_OK) return report(s);
        s = gm_dataset_save_csv(holdout.h, out_holdout.c_str());
        return report(s);
    }

    if (fit->parsed()) {
        std::string config_text;
        if (!fit_config.empty()) {
            bool ok = false;
            config_text = read_text_file(fit_config, ok);
            if (!ok) {
                std::cerr << "error: cannot read config file '" << fit_config << "'\n";
                return 1;
            }
            config_text += "\n";
        }
        std::ostringstream overrides;
        if (oK->count()) overrides << "K = " << fit_K << "\n";
        if (oIters->count()) overrides << "iters = " << fit_iters << "\n";
        if (oBurn->count()) overrides << "burn_in = " << fit_burn << "\n";
        if (oThin->count()) overrides << "thin = " << fit_thin << "\n";
        if (oPsi->count()) overrides << "psi = " << fit_psi << "\n";
        if (oTau->count()) overrides << "tau = " << fit_tau << "\n";
        if (oKappa->count()) overrides << "kappa = " << fit_kappa << "\n";
        if (oDmin->count()) overrides << "d_min = " << fit_dmin << "\n";
        if (oDmax->count()) overrides << "d_max = " << fit_dmax << "\n";
        // Defaults for keys neither flagged nor in the file.
        std::string defaults;
        if (!oK->count() && config_text.find("K") == std::string::npos)
            defaults += "K = " + std::to_string(fit_K) + "\n";
        if (!oIters->count() && config_text.find("iters") == std::string::npos)
            defaults += "iters = " + std::to_string(fit_iters) + "\n";
        if (!oBurn->count() && config_text.find("burn_in") == std::string::npos)
            defaults += "burn_in = " + std::to_string(fit_burn) + "\n";
        config_text = defaults + config_text + overrides.str();

        DatasetGuard ds;
        gm_status s = gm_dataset_load_csv(fit_input.c_str(), &ds.h);
        if (s != GM_OK) return report(s);
        char* json = nullptr;
        s = gm_fit(ds.h, config_text.c_str(), fit_seed, fit_chains, &json);
        if (s != GM_OK) return report(s);
        bool ok = write_text_file(fit_out, json);
        gm_string_free(json);
        if (!ok) {
            std::cerr << "error: cannot write '" << fit_out << "'\n";
            return 1;
        }
        return 0;
    }

    if (predict->parsed()) {
        PredictorGuard p;
        gm_status s = gm_predictor_from_json_file(pr_model.c_str(), &p.h);
        if (s != GM_OK) return report(s);
        DatasetGuard ds;
        s = gm_dataset_load_csv(pr_input.c_str(), &ds.h);
        if (s != GM_OK) return report(s);
        std::vector<int32_t> assign(gm_dataset_rows(ds.h));
        s = gm_predictor_classify(p.h, ds.h, assign.data());
        if (s != GM_OK) return report(s);
        std::ofstream out(pr_out);
        if (!out) {
            std::cerr << "error: cannot write '" << pr_out << "'\n";
            return 1;
        }
        out << "assignment\n";
        for (int32_t a : assign) out << a << "\n";
        return 0;
    }

    if (eval->parsed()) {
        std::vector<int32_t> pred, truth;
        if (!ev_pred.empty() && !ev_truth.empty()) {
            int rc = read_label_column(ev_pred, pred);
            if (rc) return rc;
            rc = read_label_column(ev_truth, truth);
            if (rc) return rc;
        } else if (!ev_model.empty() && !ev_input.empty()) {
            PredictorGuard p;
            gm_status s = gm_predictor_from_json_file(ev_model.c_str(), &p.h);
            if (s != GM_OK) return report(s);
            DatasetGuard ds;
            s = gm_dataset_load_csv(ev_input.c_str(), &ds.h);
            if (s != GM_OK) return report(s);
            if (!gm_dataset_has_labels(ds.h)) {
                std::cerr << "error: eval --input requires a label column\n";
                return 2;
            }
            pred.resize(gm_dataset_rows(ds.h));
            s = gm_predictor_classify(p.h, ds.h, pred.data());
            if (s != GM_OK) return report(s);
            truth.resize(gm_dataset_rows(ds.h));
            s = gm_dataset_get_labels(ds.h, truth.data());
            if (s != GM_OK) return report(s);
        } else {
            std::cerr << "error: eval needs either --pred and --truth, or --model and --input\n";
            return 2;
        }
        if (pred.size() != truth.size()) {
            std::cerr << "error: prediction and truth lengths differ\n";
            return 2;
        }
        double acc = 0.0;
        gm_status s = gm_clustering_accuracy(pred.data(), truth.data(),
                                             static_cast<int64_t>(pred.size()), &acc);
        if (s != GM_OK) return report(s);
        std::printf("%.3f\n", acc);
        return 0;
    }

    if (ft->parsed()) {
        CorpusGuard raw;
        gm_status s = gm_corpus_load(ft_corpus.c_str(), &raw.h);
        if (s != GM_OK) return report(s);
        CorpusGuard trimmed;
        s = gm_corpus_trim(raw.h, ft_top_frac, ft_min_df, &trimmed.h);
        if (s != GM_OK) return report(s);
        if (gm_corpus_terms(trimmed.h) > ft_vcap) {
            std::cerr << "error: vocabulary after trimming has " << gm_corpus_terms(trimmed.h)
                      << " terms, above the cap of " << ft_vcap
                      << " (raise --v-cap or trim harder)\n";
            return 2;
        }

        std::string config_text;
        if (!ft_config.empty()) {
            bool ok = false;
            config_text = read_text_file(ft_config, ok);
            if (!ok) {
                std::cerr << "error: cannot read config file '" << ft_config << "'\n";
                return 1;
            }
            config_text += "\n";
        }
        std::ostringstream overrides;
        if (tTau->count()) overrides << "tau = " << ft_tau << "\n";
        if (tAlpha->count()) overrides << "alpha = " << ft_alpha << "\n";
        if (tIters->count()) overrides << "iters = " << ft_iters << "\n";
        if (tBurn->count()) overrides << "burn_in = " << ft_burn << "\n";
        if (tThin->count()) overrides << "thin = " << ft_thin << "\n";
        if (tPsi->count()) overrides << "psi = " << ft_psi << "\n";
        if (tKmax->count()) overrides << "k_max = " << ft_kmax << "\n";
        std::string defaults;
        if (!tTau->count() && config_text.find("tau") == std::string::npos)
            defaults += "tau = " + std::to_string(ft_tau) + "\n";
        if (!tIters->count() && config_text.find("iters") == std::string::npos)
            defaults += "iters = " + std::to_string(ft_iters) + "\n";
        if (!tBurn->count() && config_text.find("burn_in") == std::string::npos)
            defaults += "burn_in = " + std::to_string(ft_burn) + "\n";
        config_text = defaults + config_text + overrides.str();

        char* json = nullptr;
        s = gm_fit_topics(trimmed.h, config_text.c_str(), ft_seed, &json);
        if (s != GM_OK) return report(s);
        bool ok = write_text_file(ft_out, json);
        gm_string_free(json);
        if (!ok) {
            std::cerr << "error: cannot write '" << ft_out << "'\n";
            return 1;
        }
        return 0;
    }

    return 2;
}
