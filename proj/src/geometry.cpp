#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace grassmix {

SubspacePoint SubspacePoint::from_basis(const Matrix& basis) {
    SubspacePoint s;
    s.basis = basis;
    s.projection = basis * basis.transpose();
    s.dim = static_cast<int>(basis.cols());
    s.ambient = static_cast<int>(basis.rows());
    Matrix gram = basis.transpose() * basis;
    if ((gram - Matrix::Identity(s.dim, s.dim)).cwiseAbs().maxCoeff() > 1e-10)
        throw ValidationError("SubspacePoint: basis columns are not orthonormal");
    return s;
}

void SubspacePoint::validate() const {
    if (basis.rows() != ambient || basis.cols() != dim)
        throw ValidationError("SubspacePoint: basis shape mismatch");
    if (projection.rows() != ambient || projection.cols() != ambient)
        throw ValidationError("SubspacePoint: projection shape mismatch");
    Matrix gram = basis.transpose() * basis;
    if ((gram - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff() > 1e-10)
        throw ValidationError("SubspacePoint: basis columns are not orthonormal");
    if ((projection - basis * basis.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw ValidationError("SubspacePoint: projection != basis * basis^T");
    if (std::fabs(projection.trace() - dim) > 1e-8)
        throw ValidationError("SubspacePoint: trace(projection) != dim");
    if ((projection * projection - projection).cwiseAbs().maxCoeff() > 1e-8)
        throw ValidationError("SubspacePoint: projection is not idempotent");
}

SphereSpec SphereSpec::standard(int m) {
    SphereSpec s;
    s.center = encode(0.5 * Matrix::Identity(m, m));
    s.radius = std::sqrt(m * (m + 1) / 8.0);
    return s;
}

SphereSpec SphereSpec::identity_centered(int m) {
    SphereSpec s;
    s.center = encode(Matrix::Identity(m, m));
    s.radius = std::sqrt(m * (m + 1) / 8.0);
    return s;
}

int ambient_from_length(Eigen::Index len) {
    int m = static_cast<int>(std::round((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
    if (m < 1 || static_cast<Eigen::Index>(m) * (m + 1) / 2 != len)
        throw ValidationError("coordinate length " + std::to_string(len) + " is not triangular");
    return m;
}

ConwayCoord encode(const Matrix& p) {
    if (p.rows() != p.cols()) throw ValidationError("encode: matrix must be square");
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw ValidationError("encode: matrix must be symmetric within 1e-10");
    const int m = static_cast<int>(p.rows());
    ConwayCoord c;
    c.ambient = m;
    c.coords.resize(conway_length(m));
    int idx = 0;
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) c.coords[idx++] = p(i, j);
    return c;
}

Matrix decode(const ConwayCoord& c) {
    const int m = ambient_from_length(c.coords.size());
    Matrix p(m, m);
    int idx = 0;
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            p(i, j) = c.coords[idx];
            p(j, i) = c.coords[idx];
            ++idx;
        }
    return p;
}

std::pair<Vector, Matrix> sym_eig_descending(const Matrix& q) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(q);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("sym_eig_descending: eigensolver failed to converge");
    const Vector& vals = solver.eigenvalues(); // ascending
    const Matrix& vecs = solver.eigenvectors();
    const int m = static_cast<int>(q.rows());

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return vals[a] > vals[b]; });

    Vector sorted_vals(m);
    Matrix sorted_vecs(m, m);
    for (int k = 0; k < m; ++k) {
        sorted_vals[k] = vals[order[k]];
        Vector v = vecs.col(order[k]);
        double scale = v.cwiseAbs().maxCoeff();
        for (int i = 0; i < m; ++i) {
            if (std::fabs(v[i]) > 1e-12 * scale) {
                if (v[i] < 0.0) v = -v;
                break;
            }
        }
        sorted_vecs.col(k) = v;
    }
    return {sorted_vals, sorted_vecs};
}

SubspacePoint nearest_subspace(const ConwayCoord& c, int d_min, int d_max) {
    const int m = ambient_from_length(c.coords.size());
    if (d_min < 1) throw ValidationError("nearest_subspace: d_min must be >= 1");
    if (d_max > m - 1) throw ValidationError("nearest_subspace: d_max must be <= m-1");
    if (d_min > d_max) throw ValidationError("nearest_subspace: d_min > d_max");

    Matrix q = decode(c);
    int d = static_cast<int>(std::floor(q.trace() + 0.5)); // round half up
    d = std::clamp(d, d_min, d_max);

    auto [vals, vecs] = sym_eig_descending(q);
    SubspacePoint s;
    s.ambient = m;
    s.dim = d;
    s.basis = vecs.leftCols(d);
    s.projection = s.basis * s.basis.transpose();
    return s;
}

Vector principal_angles(const SubspacePoint& a, const SubspacePoint& b) {
    if (a.ambient != b.ambient)
        throw ValidationError("principal_angles: ambient dimensions differ");
    Matrix cross = a.basis.transpose() * b.basis;
    Eigen::JacobiSVD<Matrix> svd(cross);
    Vector sv = svd.singularValues(); // descending
    Vector angles(sv.size());
    for (Eigen::Index j = 0; j < sv.size(); ++j)
        angles[j] = std::acos(std::clamp(sv[j], 0.0, 1.0));
    // Descending cosines give ascending angles already.
    return angles;
}

double projective_distance(const SubspacePoint& a, const SubspacePoint& b) {
    if (a.ambient != b.ambient)
        throw ValidationError("projective_distance: ambient dimensions differ");
    return (a.projection - b.projection).norm() / std::sqrt(2.0);
}

Matrix basis_from_projection(const Matrix& p, int d) {
    if (p.rows() != p.cols()) throw ValidationError("basis_from_projection: matrix must be square");
    if ((p * p - p).cwiseAbs().maxCoeff() > 1e-8)
        throw ValidationError("basis_from_projection: matrix is not idempotent within 1e-8");
    if (std::fabs(p.trace() - d) > 1e-6)
        throw ValidationError("basis_from_projection: trace does not match requested rank");
    auto [vals, vecs] = sym_eig_descending(p);
    Matrix basis = vecs.leftCols(d);
    if ((basis * basis.transpose() - p).cwiseAbs().maxCoeff() > 1e-8)
        throw ValidationError("basis_from_projection: top-d eigenvectors do not reproduce the projection");
    return basis;
}

} // namespace grassmix
