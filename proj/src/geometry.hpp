#pragma once

#include <Eigen/Dense>

namespace grassmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A linear subspace of R^m held three ways at once: an orthonormal basis
/// (m x d), the projection matrix basis * basis^T (the representation every
/// distance works on), and the dimension d = trace(projection).
struct SubspacePoint {
    Matrix basis;      // m x d, orthonormal columns
    Matrix projection; // m x m, symmetric idempotent
    int dim = 0;
    int ambient = 0;

    /// Builds from an orthonormal basis; validates orthonormality within 1e-10.
    static SubspacePoint from_basis(const Matrix& basis);

    /// Checks all representation invariants, throwing ValidationError on failure.
    void validate() const;
};

/// Half-vectorized projection coordinates: the diagonal and strict upper
/// triangle of a symmetric m x m matrix in row-major order, length m(m+1)/2.
struct ConwayCoord {
    Vector coords;
    int ambient = 0;
};

/// The sphere all embedded projection matrices of ambient dimension m lie on.
struct SphereSpec {
    ConwayCoord center;
    double radius = 0.0;

    /// Center encode(I_m / 2), radius sqrt(m(m+1)/8).
    static SphereSpec standard(int m);
    /// Center encode(I_m), same radius; alternative recentred variant.
    static SphereSpec identity_centered(int m);
};

/// Number of half-vectorization coordinates for ambient dimension m.
inline int conway_length(int m) { return m * (m + 1) / 2; }

/// Ambient dimension recovered from a coordinate length; throws if the length
/// is not a triangular number.
int ambient_from_length(Eigen::Index len);

/// Half-vectorizes a symmetric matrix (symmetry checked within 1e-10).
ConwayCoord encode(const Matrix& p);

/// Inverse of encode; exact bitwise round trip both ways.
Matrix decode(const ConwayCoord& c);

/// Rounds a coordinate vector to the nearest subspace: decode, set
/// d = round(trace) clamped to [d_min, d_max], and keep the top-d
/// eigenvectors. Among all rank-d projections the result minimizes the
/// Frobenius distance to the decoded matrix. Ties in the eigenvalues are
/// broken by solver output order; eigenvector signs are fixed so the first
/// entry of significant magnitude is positive.
SubspacePoint nearest_subspace(const ConwayCoord& c, int d_min, int d_max);

/// Principal angles between two subspaces of the same ambient dimension,
/// ascending, length min(dim_a, dim_b), each angle in [0, pi/2].
Vector principal_angles(const SubspacePoint& a, const SubspacePoint& b);

/// Projective (chordal) distance (1/sqrt(2)) * ||P_a - P_b||_F. For equal
/// dimensions this equals sqrt(sum_j sin^2 theta_j) over principal angles.
double projective_distance(const SubspacePoint& a, const SubspacePoint& b);

/// Extracts an orthonormal basis of a rank-d projection matrix
/// (idempotent within 1e-8, trace within 1e-6 of d); B * B^T = P within 1e-8.
Matrix basis_from_projection(const Matrix& p, int d);

/// Symmetric eigendecomposition with eigenvalues sorted descending, ties kept
/// in solver output order, and the sign of each eigenvector fixed. Returns
/// {values, vectors} with vectors in columns.
std::pair<Vector, Matrix> sym_eig_descending(const Matrix& q);

} // namespace grassmix
