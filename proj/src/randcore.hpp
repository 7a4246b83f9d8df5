#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace grassmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Seeded variate source. Identical (seed, stream) reproduces an identical
/// sequence of draws regardless of platform: all distributions are generated
/// from the raw 64-bit engine output, never from std:: distribution adapters.
///
/// A handle is single-threaded. Create one per chain (or per thread) and
/// never share one concurrently.
class RngHandle {
public:
    explicit RngHandle(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on (0, 1]; safe under log().
    double uniform_pos();
    /// Standard normal (Marsaglia polar; the spare deviate is cached).
    double normal();

    /// Gaussian with diagonal covariance. Entries of var_diag must be > 0.
    Vector gaussian_vector(const Vector& mean, const Vector& var_diag);
    /// Gaussian with isotropic covariance var * I.
    Vector gaussian_vector(const Vector& mean, double var);
    /// Standard normal vector of length n.
    Vector standard_normal_vector(int n);

    /// Gamma(shape a, rate b); mean a/b.
    double gamma_draw(double shape, double rate);
    /// Gamma(shape, rate) conditioned on the draw being >= lower_bound.
    /// Rejection from the untruncated law; switches to inverse-CDF on the
    /// truncated region when the acceptance probability falls below 1%.
    double truncated_gamma_draw(double shape, double rate, double lower_bound);

    /// Dirichlet over the simplex; alpha entries must be > 0.
    Vector dirichlet_draw(const Vector& alpha);
    /// Index k with probability weights[k]; weights must sum to 1 within 1e-9.
    int multinomial_draw(const Vector& weights);

    /// von Mises--Fisher draw on the unit sphere in R^p around mean_direction.
    /// kappa == 0 gives the uniform distribution on the sphere. Rejection
    /// sampling of the radial component (standard envelope scheme) plus a
    /// uniform tangent direction.
    Vector vmf_draw(const Vector& mean_direction, double kappa);

    /// Uniform random permutation of {0, ..., n-1} (Fisher--Yates).
    std::vector<int> permutation(int n);

    /// Uniform integer in [0, n).
    int uniform_int(int n);

    /// Haar-uniform rows x cols matrix with orthonormal columns, via QR of a
    /// Gaussian matrix with the R diagonal signs fixed.
    Matrix uniform_stiefel(int rows, int cols);

private:
    std::uint64_t next_u64();

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t state_[4] = {0, 0, 0, 0}; // xoshiro256++
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace grassmix
