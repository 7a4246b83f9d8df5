#include "kvconfig.hpp"

#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "errors.hpp"

namespace grassmix {

namespace {

std::string trimmed(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ValidationError("config: bad numeric value for '" + key + "': " + value);
    return v;
}

int to_int(const std::string& key, const std::string& value) {
    double v = to_double(key, value);
    return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw ValidationError("config: bad boolean for '" + key + "': " + value);
}

void parse_lines(const std::string& text,
                 const std::map<std::string, std::function<void(const std::string&,
                                                                const std::string&)>>& setters) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trimmed(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
        std::string key = trimmed(t.substr(0, eq));
        std::string value = trimmed(t.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end())
            throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
        it->second(key, value);
    }
}

} // namespace

GibbsConfig gibbs_config_from_text(const std::string& text) {
    GibbsConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    std::map<std::string, Setter> setters = {
        {"K", [&](const std::string& k, const std::string& v) { cfg.K = to_int(k, v); }},
        {"psi", [&](const std::string& k, const std::string& v) { cfg.psi = to_double(k, v); }},
        {"tau", [&](const std::string& k, const std::string& v) { cfg.tau = to_double(k, v); }},
        {"theta_scale",
         [&](const std::string& k, const std::string& v) { cfg.theta_scale = to_double(k, v); }},
        {"kappa", [&](const std::string& k, const std::string& v) { cfg.kappa = to_double(k, v); }},
        {"iters", [&](const std::string& k, const std::string& v) { cfg.iters = to_int(k, v); }},
        {"burn_in",
         [&](const std::string& k, const std::string& v) { cfg.burn_in = to_int(k, v); }},
        {"thin", [&](const std::string& k, const std::string& v) { cfg.thin = to_int(k, v); }},
        {"a", [&](const std::string& k, const std::string& v) { cfg.hyper.a = to_double(k, v); }},
        {"b", [&](const std::string& k, const std::string& v) { cfg.hyper.b = to_double(k, v); }},
        {"lambda",
         [&](const std::string& k, const std::string& v) { cfg.hyper.lambda = to_double(k, v); }},
        {"phi_var",
         [&](const std::string& k, const std::string& v) { cfg.hyper.phi_var = to_double(k, v); }},
        {"alpha",
         [&](const std::string& k, const std::string& v) { cfg.hyper.alpha = to_double(k, v); }},
        {"d_min", [&](const std::string& k, const std::string& v) { cfg.d_min = to_int(k, v); }},
        {"d_max", [&](const std::string& k, const std::string& v) { cfg.d_max = to_int(k, v); }},
        {"tune", [&](const std::string& k, const std::string& v) { cfg.tune = to_bool(k, v); }},
        {"sample_weights",
         [&](const std::string& k, const std::string& v) { cfg.sample_weights = to_bool(k, v); }},
        {"identity_center",
         [&](const std::string& k, const std::string& v) { cfg.identity_center = to_bool(k, v); }},
        {"accept_lo",
         [&](const std::string& k, const std::string& v) { cfg.accept_lo = to_double(k, v); }},
        {"accept_hi",
         [&](const std::string& k, const std::string& v) { cfg.accept_hi = to_double(k, v); }},
        {"scale_accept_lo",
         [&](const std::string& k, const std::string& v) {
             cfg.scale_accept_lo = to_double(k, v);
         }},
        {"scale_accept_hi",
         [&](const std::string& k, const std::string& v) {
             cfg.scale_accept_hi = to_double(k, v);
         }},
        {"psi_window",
         [&](const std::string& k, const std::string& v) { cfg.psi_window = to_int(k, v); }},
        {"scale_window",
         [&](const std::string& k, const std::string& v) { cfg.scale_window = to_int(k, v); }},
        {"scale_factor",
         [&](const std::string& k, const std::string& v) { cfg.scale_factor = to_double(k, v); }},
    };
    parse_lines(text, setters);
    return cfg;
}

TopicConfig topic_config_from_text(const std::string& text) {
    TopicConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    std::map<std::string, Setter> setters = {
        {"tau", [&](const std::string& k, const std::string& v) { cfg.tau = to_double(k, v); }},
        {"alpha", [&](const std::string& k, const std::string& v) { cfg.alpha = to_double(k, v); }},
        {"psi", [&](const std::string& k, const std::string& v) { cfg.psi = to_double(k, v); }},
        {"tau_prop",
         [&](const std::string& k, const std::string& v) { cfg.tau_prop = to_double(k, v); }},
        {"iters", [&](const std::string& k, const std::string& v) { cfg.iters = to_int(k, v); }},
        {"burn_in",
         [&](const std::string& k, const std::string& v) { cfg.burn_in = to_int(k, v); }},
        {"thin", [&](const std::string& k, const std::string& v) { cfg.thin = to_int(k, v); }},
        {"k_max", [&](const std::string& k, const std::string& v) { cfg.k_max = to_int(k, v); }},
        {"holdout_frac",
         [&](const std::string& k, const std::string& v) { cfg.holdout_frac = to_double(k, v); }},
        {"psi_candidates",
         [&](const std::string& k, const std::string& v) { cfg.psi_candidates = to_int(k, v); }},
        {"pilot_sweeps",
         [&](const std::string& k, const std::string& v) { cfg.pilot_sweeps = to_int(k, v); }},
        {"prop_c",
         [&](const std::string& k, const std::string& v) { cfg.prop_c = to_double(k, v); }},
        {"prop_eps",
         [&](const std::string& k, const std::string& v) { cfg.prop_eps = to_double(k, v); }},
        {"prop_steps",
         [&](const std::string& k, const std::string& v) { cfg.prop_steps = to_int(k, v); }},
    };
    parse_lines(text, setters);
    return cfg;
}

} // namespace grassmix
