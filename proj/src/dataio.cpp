#include "dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "special.hpp"

namespace grassmix {

namespace {

double left_truncated_exp_gamma(RngHandle& rng, double floor_at) {
    return rng.truncated_gamma_draw(1.0, 1.0, floor_at);
}

// Ga(1,1) conditioned on the draw being <= cap, by inverse CDF.
double right_truncated_exp_gamma(RngHandle& rng, double cap) {
    double mass = special::gamma_cdf(cap, 1.0, 1.0);
    if (mass <= 0.0) return cap;
    double target = rng.uniform() * mass;
    double lo = 0.0, hi = cap;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (special::gamma_cdf(mid, 1.0, 1.0) < target)
            lo = mid;
        else
            hi = mid;
    }
    return std::max(0.5 * (lo + hi), 1e-300);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end && std::isspace(static_cast<unsigned char>(*end))) ++end;
    return *end == '\0';
}

std::string trimmed(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

void GeneratorSpec::validate() const {
    if (nu <= 0.0) throw ValidationError("GeneratorSpec: nu must be > 0");
    if (n_per_component < 1) throw ValidationError("GeneratorSpec: n_per_component must be >= 1");
    if (holdout_per_component < 0)
        throw ValidationError("GeneratorSpec: holdout_per_component must be >= 0");
}

LabeledDataset simulate_line_plane(const GeneratorSpec& spec) {
    spec.validate();
    RngHandle rng(spec.seed);
    const int m = 3;

    Matrix bases[2] = {rng.uniform_stiefel(m, 1), rng.uniform_stiefel(m, 2)};
    Vector mus[2] = {rng.standard_normal_vector(1), rng.standard_normal_vector(2)};

    auto signal_precision = [&]() {
        return spec.mode == GeneratorSpec::NuMode::PrecisionFloor
                   ? left_truncated_exp_gamma(rng, spec.nu)
                   : right_truncated_exp_gamma(rng, spec.nu);
    };
    Vector axis_vars[2];
    axis_vars[0] = Vector::Constant(1, 0.0);
    axis_vars[0][0] = 1.0 / signal_precision();
    axis_vars[1] = Vector::Constant(2, 0.0);
    axis_vars[1][0] = 1.0 / signal_precision();
    axis_vars[1][1] = 1.0 / signal_precision();

    double noise_precision = spec.mode == GeneratorSpec::NuMode::PrecisionFloor
                                 ? left_truncated_exp_gamma(rng, spec.nu)
                                 : left_truncated_exp_gamma(rng, 1.0 / spec.nu);
    double noise_var = 1.0 / noise_precision;

    Vector thetas[2];
    for (int k = 0; k < 2; ++k) {
        Vector beta = rng.standard_normal_vector(m);
        thetas[k] = beta - bases[k] * (bases[k].transpose() * beta);
    }

    const int per = spec.n_per_component + spec.holdout_per_component;
    LabeledDataset ds;
    ds.X.resize(2 * per, m);
    ds.labels.resize(2 * per);
    ds.holdout.resize(2 * per);

    int row = 0;
    for (int k = 0; k < 2; ++k) {
        const int d = static_cast<int>(bases[k].cols());
        // Null-space basis from the full orthogonal factor.
        Eigen::HouseholderQR<Matrix> qr(bases[k]);
        Matrix full_q = qr.householderQ() * Matrix::Identity(m, m);
        Matrix null_basis = full_q.rightCols(m - d);
        for (int i = 0; i < per; ++i, ++row) {
            Vector s(d);
            for (int j = 0; j < d; ++j)
                s[j] = mus[k][j] + std::sqrt(axis_vars[k][j]) * rng.normal();
            Vector r(m - d);
            for (int j = 0; j < m - d; ++j) r[j] = std::sqrt(noise_var) * rng.normal();
            ds.X.row(row) = (bases[k] * s + thetas[k] + null_basis * r).transpose();
            ds.labels[row] = k;
            ds.holdout[row] = (i >= spec.n_per_component) ? 1 : 0;
        }
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_by_holdout(const LabeledDataset& ds) {
    if (ds.holdout.size() != ds.X.rows())
        throw ValidationError("split_by_holdout: dataset has no holdout mask");
    LabeledDataset train, hold;
    const int n = ds.n();
    const int n_hold = static_cast<int>((ds.holdout.array() != 0).count());
    train.X.resize(n - n_hold, ds.m());
    hold.X.resize(n_hold, ds.m());
    const bool labeled = ds.has_labels();
    if (labeled) {
        train.labels.resize(n - n_hold);
        hold.labels.resize(n_hold);
    }
    int ti = 0, hi = 0;
    for (int i = 0; i < n; ++i) {
        if (ds.holdout[i]) {
            hold.X.row(hi) = ds.X.row(i);
            if (labeled) hold.labels[hi] = ds.labels[i];
            ++hi;
        } else {
            train.X.row(ti) = ds.X.row(i);
            if (labeled) train.labels[ti] = ds.labels[i];
            ++ti;
        }
    }
    return {train, hold};
}

LabeledDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");

    std::vector<std::string> header = split(trimmed(line), ',');
    if (header.empty()) throw IoError(path + ":1: empty header");
    bool all_numeric = true;
    for (const auto& h : header) {
        double v;
        if (!parse_double(trimmed(h), v)) all_numeric = false;
    }
    if (all_numeric) throw IoError(path + ":1: missing header row");

    const bool labeled = trimmed(header.back()) == "label";
    const int m = static_cast<int>(header.size()) - (labeled ? 1 : 0);
    if (m < 1) throw IoError(path + ":1: no feature columns");

    std::vector<Vector> rows;
    std::vector<int> labels;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trimmed(line);
        if (t.empty()) continue;
        std::vector<std::string> fields = split(t, ',');
        if (static_cast<int>(fields.size()) != static_cast<int>(header.size()))
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()));
        Vector row(m);
        for (int j = 0; j < m; ++j) {
            double v;
            if (!parse_double(trimmed(fields[j]), v))
                throw IoError(path + ":" + std::to_string(lineno) + ": non-numeric cell '" +
                              fields[j] + "'");
            row[j] = v;
        }
        if (labeled) {
            double v;
            if (!parse_double(trimmed(fields.back()), v) ||
                std::fabs(v - std::round(v)) > 1e-9)
                throw IoError(path + ":" + std::to_string(lineno) + ": non-integer label '" +
                              fields.back() + "'");
            labels.push_back(static_cast<int>(std::lround(v)));
        }
        rows.push_back(row);
    }

    LabeledDataset ds;
    ds.X.resize(static_cast<int>(rows.size()), m);
    for (size_t i = 0; i < rows.size(); ++i) ds.X.row(static_cast<int>(i)) = rows[i];
    if (labeled) {
        ds.labels.resize(static_cast<int>(labels.size()));
        for (size_t i = 0; i < labels.size(); ++i) ds.labels[static_cast<int>(i)] = labels[i];
    }
    return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    const int m = ds.m();
    for (int j = 0; j < m; ++j) out << (j ? "," : "") << "x" << j;
    if (ds.has_labels()) out << ",label";
    out << "\n";
    char buf[40];
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < m; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.X(i, j));
            out << (j ? "," : "") << buf;
        }
        if (ds.has_labels()) out << "," << ds.labels[i];
        out << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::map<std::string, int> doc_index, term_index;
    std::vector<std::string> doc_ids, vocabulary;
    struct Triplet {
        int doc, term;
        double count;
    };
    std::vector<Triplet> triplets;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trimmed(line);
        if (t.empty()) continue;
        std::vector<std::string> fields;
        if (t.find('\t') != std::string::npos) {
            fields = split(t, '\t');
            for (auto& f : fields) f = trimmed(f);
        } else {
            std::stringstream ss(t);
            std::string tok;
            while (ss >> tok) fields.push_back(tok);
        }
        if (fields.size() != 3)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected 'doc_id term count' triplet");
        double cnt;
        if (!parse_double(fields[2], cnt) || cnt <= 0.0 ||
            std::fabs(cnt - std::round(cnt)) > 1e-9)
            throw IoError(path + ":" + std::to_string(lineno) + ": count must be a positive "
                          "integer, got '" + fields[2] + "'");
        auto [dit, dnew] = doc_index.try_emplace(fields[0], static_cast<int>(doc_ids.size()));
        if (dnew) doc_ids.push_back(fields[0]);
        auto [tit, tnew] = term_index.try_emplace(fields[1], static_cast<int>(vocabulary.size()));
        if (tnew) vocabulary.push_back(fields[1]);
        triplets.push_back({dit->second, tit->second, std::round(cnt)});
    }

    Corpus corpus;
    corpus.doc_ids = std::move(doc_ids);
    corpus.vocabulary = std::move(vocabulary);
    corpus.counts = Matrix::Zero(static_cast<int>(corpus.doc_ids.size()),
                                 static_cast<int>(corpus.vocabulary.size()));
    for (const auto& tr : triplets) corpus.counts(tr.doc, tr.term) += tr.count;
    return corpus;
}

Corpus trim_vocabulary(const Corpus& corpus, double top_frac, int min_doc_freq) {
    if (top_frac <= 0.0 || top_frac > 1.0)
        throw ValidationError("trim_vocabulary: top_frac must be in (0, 1]");
    if (min_doc_freq < 0) throw ValidationError("trim_vocabulary: min_doc_freq must be >= 0");

    Corpus cur = corpus;
    for (int round = 0; round < 100; ++round) {
        const int d_count = cur.docs();
        const int v_count = cur.vocab_size();
        if (d_count == 0 || v_count == 0) return cur;

        Vector score(v_count);
        std::vector<int> df(v_count, 0);
        for (int j = 0; j < v_count; ++j) {
            double tf = 0.0;
            int f = 0;
            for (int i = 0; i < d_count; ++i) {
                if (cur.counts(i, j) > 0) {
                    ++f;
                    tf += cur.counts(i, j);
                }
            }
            df[j] = f;
            score[j] = (f > 0) ? tf * std::log(static_cast<double>(d_count) / f) : 0.0;
        }
        double max_score = score.maxCoeff();
        double threshold = (1.0 - top_frac) * max_score;

        std::vector<int> keep_terms;
        for (int j = 0; j < v_count; ++j)
            if (df[j] >= min_doc_freq && score[j] >= threshold - 1e-12 * std::fabs(max_score))
                keep_terms.push_back(j);

        bool terms_changed = static_cast<int>(keep_terms.size()) != v_count;

        Matrix reduced(d_count, static_cast<int>(keep_terms.size()));
        for (size_t jj = 0; jj < keep_terms.size(); ++jj)
            reduced.col(static_cast<int>(jj)) = cur.counts.col(keep_terms[jj]);

        std::vector<int> keep_docs;
        for (int i = 0; i < d_count; ++i) {
            if (reduced.cols() == 0) continue;
            double lo = reduced.row(i).minCoeff();
            double hi = reduced.row(i).maxCoeff();
            if (hi > lo) keep_docs.push_back(i); // non-constant, non-empty row
        }
        bool docs_changed = static_cast<int>(keep_docs.size()) != d_count;

        Corpus next;
        next.vocabulary.reserve(keep_terms.size());
        for (int j : keep_terms) next.vocabulary.push_back(cur.vocabulary[j]);
        next.doc_ids.reserve(keep_docs.size());
        for (int i : keep_docs) next.doc_ids.push_back(cur.doc_ids[i]);
        next.counts.resize(static_cast<int>(keep_docs.size()), static_cast<int>(keep_terms.size()));
        for (size_t ii = 0; ii < keep_docs.size(); ++ii)
            next.counts.row(static_cast<int>(ii)) = reduced.row(keep_docs[ii]);

        if (!terms_changed && !docs_changed) return next;
        cur = std::move(next);
    }
    return cur;
}

namespace {

// Max-agreement assignment on a square matrix via the Hungarian algorithm
// (potentials formulation, minimizing the negated counts).
long hungarian_best_agreement(const Eigen::MatrixXi& conf) {
    const int n = static_cast<int>(conf.rows());
    const long big = conf.maxCoeff();
    std::vector<std::vector<long>> cost(n + 1, std::vector<long>(n + 1, 0));
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) cost[i][j] = big - conf(i - 1, j - 1);

    std::vector<long> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<long> minv(n + 1, std::numeric_limits<long>::max());
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = 0;
            long delta = std::numeric_limits<long>::max();
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                long cur = cost[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    long agreement = 0;
    for (int j = 1; j <= n; ++j) agreement += conf(p[j] - 1, j - 1);
    return agreement;
}

} // namespace

double clustering_accuracy(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth) {
    if (pred.size() != truth.size())
        throw ValidationError("clustering_accuracy: length mismatch");
    if (pred.size() == 0) throw ValidationError("clustering_accuracy: empty labels");

    std::map<int, int> pmap, tmap;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        pmap.try_emplace(pred[i], static_cast<int>(pmap.size()));
        tmap.try_emplace(truth[i], static_cast<int>(tmap.size()));
    }
    const int c = std::max(static_cast<int>(pmap.size()), static_cast<int>(tmap.size()));
    Eigen::MatrixXi conf = Eigen::MatrixXi::Zero(c, c);
    for (Eigen::Index i = 0; i < pred.size(); ++i)
        conf(tmap[truth[i]], pmap[pred[i]]) += 1;

    long best = 0;
    if (c <= 10) {
        std::vector<int> perm(c);
        for (int j = 0; j < c; ++j) perm[j] = j;
        do {
            long agree = 0;
            for (int j = 0; j < c; ++j) agree += conf(perm[j], j);
            best = std::max(best, agree);
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        best = hungarian_best_agreement(conf);
    }
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

} // namespace grassmix
