#pragma once

// Symmetric 3x3 matrices and their eigen-decomposition (cyclic Jacobi).

#include <array>
#include <cmath>
#include <utility>

namespace renovor {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Symmetric 3x3 matrix stored as its upper triangle.
struct Sym3 {
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;

  static Sym3 identity(double s = 1.0) { return {s, 0, 0, s, 0, s}; }
  static Sym3 diagonal(double a, double b, double c) { return {a, 0, 0, b, 0, c}; }

  static Sym3 from_matrix(const Mat3 &m)
  {
    return {m[0][0], 0.5 * (m[0][1] + m[1][0]), 0.5 * (m[0][2] + m[2][0]),
            m[1][1], 0.5 * (m[1][2] + m[2][1]), m[2][2]};
  }

  Mat3 matrix() const { return {{{xx, xy, xz}, {xy, yy, yz}, {xz, yz, zz}}}; }

  double frobenius_norm() const
  {
    return std::sqrt(xx * xx + yy * yy + zz * zz + 2.0 * (xy * xy + xz * xz + yz * yz));
  }

  friend Sym3 operator+(const Sym3 &a, const Sym3 &b)
  {
    return {a.xx + b.xx, a.xy + b.xy, a.xz + b.xz, a.yy + b.yy, a.yz + b.yz, a.zz + b.zz};
  }
  friend Sym3 operator-(const Sym3 &a, const Sym3 &b)
  {
    return {a.xx - b.xx, a.xy - b.xy, a.xz - b.xz, a.yy - b.yy, a.yz - b.yz, a.zz - b.zz};
  }
  friend Sym3 operator*(double s, const Sym3 &a)
  {
    return {s * a.xx, s * a.xy, s * a.xz, s * a.yy, s * a.yz, s * a.zz};
  }
};

inline Mat3 matmul(const Mat3 &a, const Mat3 &b)
{
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}

inline Mat3 transpose(const Mat3 &a)
{
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = a[j][i];
  return t;
}

/// a * s * a^T, symmetrised.
inline Sym3 congruence(const Mat3 &a, const Sym3 &s)
{
  return Sym3::from_matrix(matmul(matmul(a, s.matrix()), transpose(a)));
}

struct Eigen3 {
  std::array<double, 3> values; // descending
  Mat3 vectors;                 // column j is the eigenvector of values[j]
};

/// Eigenvalues in descending order with orthonormal eigenvectors.
inline Eigen3 eigen_symmetric3(const Sym3 &s)
{
  Mat3 a = s.matrix();
  Mat3 v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    const double diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
    if (off <= 1e-36 * diag || off == 0.0) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
        a[p][q] = a[q][p] = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - sn * vkq;
          v[k][q] = sn * vkp + c * vkq;
        }
      }
  }

  Eigen3 e;
  std::array<int, 3> idx{0, 1, 2};
  const std::array<double, 3> d{a[0][0], a[1][1], a[2][2]};
  // three-element sort, descending, stable on ties
  if (d[idx[0]] < d[idx[1]]) std::swap(idx[0], idx[1]);
  if (d[idx[1]] < d[idx[2]]) std::swap(idx[1], idx[2]);
  if (d[idx[0]] < d[idx[1]]) std::swap(idx[0], idx[1]);
  for (int j = 0; j < 3; ++j) {
    e.values[j] = d[idx[j]];
    for (int k = 0; k < 3; ++k) e.vectors[k][j] = v[k][idx[j]];
  }
  return e;
}

/// V diag(f(lambda)) V^T.
template <typename Fn>
Sym3 apply_eigen_function(const Eigen3 &e, Fn &&fn)
{
  std::array<double, 3> f{};
  for (int j = 0; j < 3; ++j) f[j] = fn(e.values[j]);
  Mat3 m{};
  for (int r = 0; r < 3; ++r)
    for (int c = r; c < 3; ++c) {
      double s = 0;
      for (int j = 0; j < 3; ++j) s += e.vectors[r][j] * f[j] * e.vectors[c][j];
      m[r][c] = m[c][r] = s;
    }
  return Sym3::from_matrix(m);
}

} // namespace renovor
