#include "summary_json.hpp"

#include <fstream>
#include <limits>

#include <json.hpp>

#include "errors.hpp"

namespace grassmix {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw IoError("model JSON: expected a non-empty matrix");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw IoError("model JSON: ragged matrix");
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Vector vector_from_json(const json& j) {
    Vector v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json component_to_json(const ComponentDraw& c) {
    json out;
    out["dim"] = c.dim;
    out["basis"] = matrix_to_json(c.basis);
    out["theta"] = vector_to_json(c.theta);
    out["mu"] = vector_to_json(c.mu);
    out["sigma_diag"] = vector_to_json(c.sigma_diag);
    out["noise_var"] = c.noise_var;
    out["weight"] = c.weight;
    return out;
}

} // namespace

std::string fit_summary_json(const std::vector<ChainResult>& chains, const GibbsConfig& cfg,
                             const std::string& input_path) {
    if (chains.empty()) throw ValidationError("fit_summary_json: no chains");

    json doc;
    doc["schema_version"] = 1;
    doc["command"] = "fit";
    doc["input"] = input_path;
    doc["m"] = chains.front().draws.m;
    doc["K"] = chains.front().draws.K;
    doc["iters"] = cfg.iters;
    doc["burn_in"] = cfg.burn_in;
    doc["thin"] = cfg.thin;

    int best_chain = -1, best_draw = -1;
    double best_loss = std::numeric_limits<double>::infinity();

    json chain_arr = json::array();
    for (const auto& cr : chains) {
        const PosteriorDraws& d = cr.draws;
        json cj;
        cj["chain"] = cr.chain_index;
        cj["seed"] = cr.seed;
        cj["tuned_psi"] = d.tuned_psi;
        cj["tuned_tau"] = d.tuned_tau;
        cj["tuned_theta_scale"] = d.tuned_theta_scale;
        cj["acceptance"] = {{"subspace", d.post_burn_in.subspace_rate()},
                            {"theta", d.post_burn_in.theta_rate()}};
        json hist = json::array();
        for (int k = 0; k < d.dim_histogram.rows(); ++k) {
            json row = json::array();
            for (int c = 0; c < d.dim_histogram.cols(); ++c) row.push_back(d.dim_histogram(k, c));
            hist.push_back(std::move(row));
        }
        cj["dim_histogram"] = std::move(hist);
        cj["losses"] = d.losses;
        cj["n_draws"] = d.draws.size();
        chain_arr.push_back(std::move(cj));

        if (!d.draws.empty()) {
            int idx = d.map_index();
            if (d.draws[idx].loss_value < best_loss) {
                best_loss = d.draws[idx].loss_value;
                best_chain = cr.chain_index;
                best_draw = idx;
            }
        }
    }
    doc["chains"] = std::move(chain_arr);

    if (best_chain >= 0) {
        const Draw* map_draw = nullptr;
        for (const auto& cr : chains)
            if (cr.chain_index == best_chain) map_draw = &cr.draws.draws[best_draw];
        json mj;
        mj["chain"] = best_chain;
        mj["draw"] = best_draw;
        mj["loss"] = best_loss;
        json comps = json::array();
        for (const auto& c : map_draw->components) comps.push_back(component_to_json(c));
        mj["components"] = std::move(comps);
        doc["map"] = std::move(mj);
    }
    return doc.dump(2);
}

int Predictor::classify(const Vector& x) const {
    if (components.empty()) throw ValidationError("Predictor: no components");
    if (x.size() != m) throw ValidationError("Predictor: dimension mismatch");
    int best = 0;
    double best_resid = std::numeric_limits<double>::infinity();
    for (int k = 0; k < static_cast<int>(components.size()); ++k) {
        const ComponentDraw& c = components[k];
        Vector centered = x - c.theta;
        double r = centered.squaredNorm() - (c.basis.transpose() * centered).squaredNorm();
        if (r < best_resid) {
            best_resid = r;
            best = k;
        }
    }
    return best;
}

Predictor predictor_from_json_text(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("model JSON parse error: ") + e.what());
    }
    if (!doc.contains("map") || !doc["map"].contains("components"))
        throw IoError("model JSON: no map components found");
    Predictor p;
    for (const auto& cj : doc["map"]["components"]) {
        ComponentDraw c;
        c.basis = matrix_from_json(cj.at("basis"));
        c.theta = vector_from_json(cj.at("theta"));
        c.mu = vector_from_json(cj.at("mu"));
        c.sigma_diag = vector_from_json(cj.at("sigma_diag"));
        c.noise_var = cj.at("noise_var").get<double>();
        c.dim = cj.at("dim").get<int>();
        c.weight = cj.value("weight", 0.0);
        p.components.push_back(std::move(c));
    }
    p.m = static_cast<int>(p.components.front().basis.rows());
    return p;
}

Predictor predictor_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return predictor_from_json_text(text);
}

std::string topic_summary_json(const TopicDraws& draws, const TopicConfig& cfg,
                               const std::string& corpus_path,
                               const std::vector<std::string>& vocabulary,
                               const std::vector<std::string>& doc_ids) {
    json doc;
    doc["schema_version"] = 1;
    doc["command"] = "fit-topics";
    doc["corpus"] = corpus_path;
    doc["V"] = draws.vocab;
    doc["tau"] = cfg.tau;
    doc["alpha"] = cfg.alpha;
    doc["iters"] = cfg.iters;
    doc["burn_in"] = cfg.burn_in;
    doc["thin"] = cfg.thin;
    doc["chosen_psi"] = draws.chosen_psi;
    doc["topic_acceptance"] = draws.topic_acceptance;

    std::vector<int> hist(draws.k_histogram.data(),
                          draws.k_histogram.data() + draws.k_histogram.size());
    doc["k_histogram"] = hist;
    doc["k_mode"] = draws.k_mode();

    const TopicDrawRec& map = draws.map_draw();
    json mj;
    mj["K"] = map.K;
    mj["loss"] = map.loss_value;
    mj["topics"] = matrix_to_json(map.topics);
    json props = json::array();
    for (const auto& th : map.proportions) props.push_back(vector_to_json(th));
    mj["proportions"] = std::move(props);
    doc["map"] = std::move(mj);

    doc["vocabulary"] = vocabulary;
    doc["doc_ids"] = doc_ids;
    return doc.dump(2);
}

} // namespace grassmix
