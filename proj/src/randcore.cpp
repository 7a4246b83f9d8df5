#include "randcore.hpp"

#include <cmath>
#include <limits>

#include "errors.hpp"
#include "special.hpp"

namespace grassmix {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

RngHandle::RngHandle(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    std::uint64_t sm = seed ^ (0xD1342543DE82EF95ULL * (stream + 1));
    for (auto& s : state_) s = splitmix64(sm);
}

std::uint64_t RngHandle::next_u64() {
    // xoshiro256++
    std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngHandle::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngHandle::uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngHandle::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

Vector RngHandle::standard_normal_vector(int n) {
    Vector out(n);
    for (int i = 0; i < n; ++i) out[i] = normal();
    return out;
}

Vector RngHandle::gaussian_vector(const Vector& mean, const Vector& var_diag) {
    if (mean.size() != var_diag.size())
        throw ValidationError("gaussian_vector: mean/variance length mismatch");
    if ((var_diag.array() <= 0.0).any())
        throw ValidationError("gaussian_vector: variance entries must be > 0");
    Vector out(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i)
        out[i] = mean[i] + std::sqrt(var_diag[i]) * normal();
    return out;
}

Vector RngHandle::gaussian_vector(const Vector& mean, double var) {
    if (var <= 0.0) throw ValidationError("gaussian_vector: variance must be > 0");
    Vector out(mean.size());
    double sd = std::sqrt(var);
    for (Eigen::Index i = 0; i < mean.size(); ++i) out[i] = mean[i] + sd * normal();
    return out;
}

double RngHandle::gamma_draw(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
        throw ValidationError("gamma_draw: shape and rate must be > 0");
    // Marsaglia--Tsang; shape < 1 via the boost draw.
    double boost = 1.0;
    double a = shape;
    if (a < 1.0) {
        boost = std::exp(std::log(uniform_pos()) / a);
        a += 1.0;
    }
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double u = uniform_pos();
        double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) {
            double g = d * v * boost / rate;
            return g > 0.0 ? g : std::numeric_limits<double>::min();
        }
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
            double g = d * v * boost / rate;
            return g > 0.0 ? g : std::numeric_limits<double>::min();
        }
    }
}

double RngHandle::truncated_gamma_draw(double shape, double rate, double lower_bound) {
    if (!(shape > 0.0) || !(rate > 0.0))
        throw ValidationError("truncated_gamma_draw: shape and rate must be > 0");
    if (lower_bound < 0.0)
        throw ValidationError("truncated_gamma_draw: lower bound must be >= 0");
    if (lower_bound == 0.0) return gamma_draw(shape, rate);

    double f_lo = special::gamma_cdf(lower_bound, shape, rate);
    double tail = 1.0 - f_lo;
    if (tail >= 0.01) {
        for (int it = 0; it < 100000; ++it) {
            double x = gamma_draw(shape, rate);
            if (x >= lower_bound) return x;
        }
        throw std::runtime_error("truncated_gamma_draw: rejection stalled");
    }
    if (tail <= 0.0) {
        // Truncation point beyond double resolution of the CDF; the conditional
        // tail decays at rate `rate`.
        return lower_bound - std::log(uniform_pos()) / rate;
    }
    // Inverse CDF restricted to [lower_bound, inf).
    double target = f_lo + uniform() * tail;
    double lo = lower_bound;
    double hi = std::max(lower_bound, shape / rate);
    int guard = 0;
    while (special::gamma_cdf(hi, shape, rate) < target && guard++ < 400) hi = hi * 2.0 + 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (special::gamma_cdf(mid, shape, rate) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-14 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

Vector RngHandle::dirichlet_draw(const Vector& alpha) {
    if (alpha.size() < 1) throw ValidationError("dirichlet_draw: empty alpha");
    if ((alpha.array() <= 0.0).any())
        throw ValidationError("dirichlet_draw: alpha entries must be > 0");
    Vector g(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i)
        g[i] = std::max(gamma_draw(alpha[i], 1.0), 1e-300);
    return g / g.sum();
}

int RngHandle::multinomial_draw(const Vector& weights) {
    if (weights.size() < 1) throw ValidationError("multinomial_draw: empty weights");
    if ((weights.array() < 0.0).any())
        throw ValidationError("multinomial_draw: negative weight");
    if (std::fabs(weights.sum() - 1.0) > 1e-9)
        throw ValidationError("multinomial_draw: weights must sum to 1");
    double u = uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
        if (weights[k] > 0.0) last_positive = static_cast<int>(k);
        acc += weights[k];
        if (u < acc) return static_cast<int>(k);
    }
    return last_positive;
}

Vector RngHandle::vmf_draw(const Vector& mean_direction, double kappa) {
    const int p = static_cast<int>(mean_direction.size());
    if (p < 1) throw ValidationError("vmf_draw: empty mean direction");
    if (kappa < 0.0) throw ValidationError("vmf_draw: kappa must be >= 0");
    if (kappa == 0.0) {
        for (;;) {
            Vector g = standard_normal_vector(p);
            double n = g.norm();
            if (n > 1e-12) return g / n;
        }
    }
    double norm = mean_direction.norm();
    if (std::fabs(norm - 1.0) > 1e-9)
        throw ValidationError("vmf_draw: mean direction must be a unit vector");
    Vector mu = mean_direction / norm;
    if (p == 1) return uniform() < 1.0 / (1.0 + std::exp(-2.0 * kappa)) ? mu : Vector(-mu);

    // Radial component via the standard envelope rejection scheme.
    const double pm1 = static_cast<double>(p - 1);
    const double b = pm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + pm1 * pm1));
    const double x0 = (1.0 - b) / (1.0 + b);
    const double c = kappa * x0 + pm1 * std::log(1.0 - x0 * x0);
    const long max_trials = 10000000L;
    double w = 0.0;
    long trials = 0;
    for (;;) {
        if (++trials > max_trials)
            throw std::runtime_error("vmf_draw: envelope acceptance below 1e-6 for kappa=" +
                                     std::to_string(kappa) + ", p=" + std::to_string(p));
        double g1 = gamma_draw(pm1 / 2.0, 1.0);
        double g2 = gamma_draw(pm1 / 2.0, 1.0);
        double z = g1 / (g1 + g2);
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        double u = uniform_pos();
        if (kappa * w + pm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
    }
    Vector tangent;
    for (;;) {
        Vector g = standard_normal_vector(p);
        tangent = g - mu.dot(g) * mu;
        double n = tangent.norm();
        if (n > 1e-12) {
            tangent /= n;
            break;
        }
    }
    Vector out = w * mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * tangent;
    return out / out.norm();
}

std::vector<int> RngHandle::permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
        int j = uniform_int(i + 1);
        std::swap(p[i], p[j]);
    }
    return p;
}

int RngHandle::uniform_int(int n) {
    if (n <= 0) throw ValidationError("uniform_int: n must be > 0");
    int k = static_cast<int>(uniform() * n);
    return k < n ? k : n - 1;
}

Matrix RngHandle::uniform_stiefel(int rows, int cols) {
    if (rows < 1 || cols < 1 || cols > rows)
        throw ValidationError("uniform_stiefel: need 1 <= cols <= rows");
    Matrix g(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) g(i, j) = normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    Matrix r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
    for (int j = 0; j < cols; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

} // namespace grassmix
