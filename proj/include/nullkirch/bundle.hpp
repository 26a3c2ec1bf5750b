#pragma once

// Vector bundles with compatible connection and metric. Fiber components are
// covariant coordinate components for tensor bundles; a connection is given
// by matrices omega_mu with D_mu S = d_mu S + omega_mu S, and the metric by H
// with <S, T> = S^T H T. First-order coefficients P are stored as
// endomorphisms E_mu (second fiber index raised with H).

#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nullkirch/errors.hpp"
#include "nullkirch/geometry.hpp"

namespace nullkirch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Connection = std::array<Matrix, 4>;

struct FiberBundleSpec {
  int N = 0;
  // omega_mu at a point
  std::function<Connection(const PointGeometry&)> connection;
  // result[nu][mu] = d_nu omega_mu
  std::function<std::array<Connection, 4>(const PointGeometry&)> connection_derivative;
  // bundle metric H
  std::function<Matrix(const PointGeometry&)> metric;
  // R_{XY} as a matrix acting on fibers
  std::function<Matrix(const PointGeometry&, const Vec4&, const Vec4&)> curvature_action;
  // tensor ranks of the blocks, when assembled from tensor bundles
  std::vector<int> ranks;
  std::vector<int> offsets;
};

struct FiberElement {
  Vector components;
  SpacetimePoint base;
};

// Endomorphism-valued one-form E_mu(x); optional partials for oracle checks.
class EndomorphismField {
 public:
  virtual ~EndomorphismField() = default;
  virtual int dim() const = 0;
  virtual Connection value(const Vec4& x) const = 0;
  // result[nu][mu] = d_nu E_mu
  virtual std::array<Connection, 4> derivative(const Vec4& x) const = 0;
  virtual bool is_zero() const { return false; }
};

namespace detail {

// Matrix of T -> -sum_k C[lambda][i_k] T_{I|k->lambda}, where C is a 4x4 slot
// operator (lambda, i). Entries are accumulated for every slot.
inline Matrix slotwise_operator(int rank, const Mat4& C) {
  const int n = ipow4(rank);
  Matrix M = Matrix::Zero(n, n);
  for (int I = 0; I < n; ++I)
    for (int k = 0; k < rank; ++k) {
      const int ik = slot_digit(I, k, rank);
      for (int l = 0; l < 4; ++l) M(I, replace_digit(I, k, rank, l)) -= C[l][ik];
    }
  return M;
}

inline Matrix tensor_power_metric(int rank, const Mat4& ginv) {
  const int n = ipow4(rank);
  Matrix H(n, n);
  for (int I = 0; I < n; ++I)
    for (int J = 0; J < n; ++J) {
      double v = 1.0;
      for (int k = 0; k < rank; ++k) v *= ginv[slot_digit(I, k, rank)][slot_digit(J, k, rank)];
      H(I, J) = v;
    }
  return H;
}

}  // namespace detail

inline FiberBundleSpec tensor_bundle(int rank) {
  if (rank < 0) throw Error(ErrorCode::SpecMismatch, "tensor rank must be non-negative");
  FiberBundleSpec spec;
  spec.N = ipow4(rank);
  spec.ranks = {rank};
  spec.offsets = {0};
  spec.connection = [rank](const PointGeometry& geo) {
    Connection w;
    for (int m = 0; m < 4; ++m) {
      Mat4 C{};
      for (int l = 0; l < 4; ++l)
        for (int i = 0; i < 4; ++i) C[l][i] = geo.gamma[l][m][i];
      w[m] = detail::slotwise_operator(rank, C);
    }
    return w;
  };
  spec.connection_derivative = [rank](const PointGeometry& geo) {
    std::array<Connection, 4> dw;
    for (int nu = 0; nu < 4; ++nu)
      for (int m = 0; m < 4; ++m) {
        Mat4 C{};
        for (int l = 0; l < 4; ++l)
          for (int i = 0; i < 4; ++i) C[l][i] = geo.dgamma[nu][l][m][i];
        dw[nu][m] = detail::slotwise_operator(rank, C);
      }
    return dw;
  };
  spec.metric = [rank](const PointGeometry& geo) {
    return detail::tensor_power_metric(rank, geo.ginv);
  };
  spec.curvature_action = [rank](const PointGeometry& geo, const Vec4& X, const Vec4& Y) {
    const Rank4 R = riemann_up(geo);
    Mat4 C{};  // C[lambda][i] = R^lambda_{i X Y}
    for (int l = 0; l < 4; ++l)
      for (int i = 0; i < 4; ++i) {
        double v = 0.0;
        for (int m = 0; m < 4; ++m)
          for (int n = 0; n < 4; ++n) v += R[l][i][m][n] * X[m] * Y[n];
        C[l][i] = v;
      }
    return detail::slotwise_operator(rank, C);
  };
  return spec;
}

namespace detail {
inline Matrix block_diag(const std::vector<Matrix>& blocks, int n) {
  Matrix M = Matrix::Zero(n, n);
  int off = 0;
  for (const auto& b : blocks) {
    M.block(off, off, b.rows(), b.cols()) = b;
    off += static_cast<int>(b.rows());
  }
  return M;
}
}  // namespace detail

inline FiberBundleSpec direct_sum(const std::vector<FiberBundleSpec>& specs) {
  if (specs.empty()) throw Error(ErrorCode::SpecMismatch, "direct sum of no bundles");
  if (specs.size() == 1) return specs.front();
  FiberBundleSpec out;
  out.N = 0;
  for (const auto& s : specs) {
    out.offsets.push_back(out.N);
    out.N += s.N;
    if (s.ranks.size() == 1) out.ranks.push_back(s.ranks[0]);
  }
  if (out.ranks.size() != specs.size()) {
    out.ranks.clear();
    out.offsets.clear();
  }
  const int n = out.N;
  out.connection = [specs, n](const PointGeometry& geo) {
    std::vector<Connection> parts;
    for (const auto& s : specs) parts.push_back(s.connection(geo));
    Connection w;
    for (int m = 0; m < 4; ++m) {
      std::vector<Matrix> blocks;
      for (const auto& p : parts) blocks.push_back(p[m]);
      w[m] = detail::block_diag(blocks, n);
    }
    return w;
  };
  out.connection_derivative = [specs, n](const PointGeometry& geo) {
    std::vector<std::array<Connection, 4>> parts;
    for (const auto& s : specs) parts.push_back(s.connection_derivative(geo));
    std::array<Connection, 4> dw;
    for (int nu = 0; nu < 4; ++nu)
      for (int m = 0; m < 4; ++m) {
        std::vector<Matrix> blocks;
        for (const auto& p : parts) blocks.push_back(p[nu][m]);
        dw[nu][m] = detail::block_diag(blocks, n);
      }
    return dw;
  };
  out.metric = [specs, n](const PointGeometry& geo) {
    std::vector<Matrix> blocks;
    for (const auto& s : specs) blocks.push_back(s.metric(geo));
    return detail::block_diag(blocks, n);
  };
  out.curvature_action = [specs, n](const PointGeometry& geo, const Vec4& X, const Vec4& Y) {
    std::vector<Matrix> blocks;
    for (const auto& s : specs) blocks.push_back(s.curvature_action(geo, X, Y));
    return detail::block_diag(blocks, n);
  };
  return out;
}

// Contraction of the connection one-form with a vector: omega(X) = X^mu omega_mu.
inline Matrix contract(const Connection& w, const Vec4& X) {
  Matrix M = X[0] * w[0];
  for (int m = 1; m < 4; ++m) M += X[m] * w[m];
  return M;
}

inline void check_same_dim(const FiberBundleSpec& spec, Eigen::Index n) {
  if (n != spec.N) throw Error(ErrorCode::SpecMismatch, "fiber dimension mismatch");
}

inline void check_same_base(const FiberElement& a, const FiberElement& b) {
  if (a.base.coords != b.base.coords || a.base.chart_id != b.base.chart_id)
    throw Error(ErrorCode::SpecMismatch, "pairing of elements at different base points");
}

// R_{XY}[T]
inline FiberElement curvature_action_commutator(const FiberBundleSpec& spec, const Spacetime& st,
                                                const SpacetimePoint& x, const Vec4& X,
                                                const Vec4& Y, const FiberElement& T) {
  check_same_dim(spec, T.components.size());
  const PointGeometry geo = evaluate_geometry(st, x.coords);
  return {spec.curvature_action(geo, X, Y) * T.components, x};
}

// The pairings of a bundle at one point, realized with H and endomorphisms.
struct Pairings {
  Matrix H;
  Matrix Hinv;

  Pairings(const FiberBundleSpec& spec, const PointGeometry& geo) : H(spec.metric(geo)) {
    const double det = H.determinant();
    if (!(std::abs(det) > 1e-300)) throw Error(ErrorCode::DegenerateMetric, "bundle metric singular");
    Hinv = H.inverse();
  }

  double inner(const Vector& a, const Vector& b) const { return a.dot(H * b); }
  // |P, T> = E T
  Vector ket(const Matrix& E, const Vector& T) const { return E * T; }
  // <T, P| = E^dagger T with E^dagger = H^{-1} E^T H
  Vector bra(const Vector& T, const Matrix& E) const { return adjoint(E) * T; }
  double sandwich(const Vector& S, const Matrix& E, const Vector& T) const { return inner(S, E * T); }
  // [P, Q]
  Matrix compose(const Matrix& P, const Matrix& Q) const { return P * Q; }
  Matrix adjoint(const Matrix& E) const { return Hinv * E.transpose() * H; }
};

// ---------------------------------------------------------------------------
// Fiber algebra policy backed by a FiberBundleSpec (matrices and callbacks).

class BundleAlgebra {
 public:
  struct Local {
    const PointGeometry* geo = nullptr;
    Connection omega;
    Matrix H;
    Matrix Hinv;
  };

  explicit BundleAlgebra(FiberBundleSpec spec) : spec_(std::move(spec)) {}

  int dim() const { return spec_.N; }
  const FiberBundleSpec& spec() const { return spec_; }

  Local local(const PointGeometry& geo) const {
    Local loc;
    loc.geo = &geo;
    loc.omega = spec_.connection(geo);
    loc.H = spec_.metric(geo);
    loc.Hinv = loc.H.inverse();
    return loc;
  }

  double inner(const Local& loc, const Vector& a, const Vector& b) const { return a.dot(loc.H * b); }

  Vector connection_apply(const Local& loc, const Vec4& X, const Vector& v) const {
    return contract(loc.omega, X) * v;
  }

  // [omega(X), E]
  Matrix connection_commutator(const Local& loc, const Vec4& X, const Matrix& E) const {
    const Matrix w = contract(loc.omega, X);
    return w * E - E * w;
  }

  Vector adjoint_apply(const Local& loc, const Matrix& E, const Vector& v) const {
    return loc.Hinv * (E.transpose() * (loc.H * v));
  }

  Vector curvature_apply(const Local& loc, const Vec4& X, const Vec4& Y, const Vector& v) const {
    return spec_.curvature_action(*loc.geo, X, Y) * v;
  }

  // D_mu Phi, column mu
  Eigen::Matrix<double, Eigen::Dynamic, 4> covariant_derivative(const Local& loc,
                                                                const FieldJet& phi) const {
    const int n = spec_.N;
    Eigen::Matrix<double, Eigen::Dynamic, 4> D(n, 4);
    const Eigen::Map<const Vector> val(phi.value.data(), n);
    for (int m = 0; m < 4; ++m) {
      Vector col = loc.omega[m] * val;
      for (int i = 0; i < n; ++i) col[i] += phi.d[i][m];
      D.col(m) = col;
    }
    return D;
  }

  // g^{mu nu} D_{mu nu} Phi
  Vector wave_operator(const Local& loc, const FieldJet& phi) const {
    const PointGeometry& geo = *loc.geo;
    const int n = spec_.N;
    const auto dw = spec_.connection_derivative(geo);
    const Eigen::Map<const Vector> val(phi.value.data(), n);
    const auto D = covariant_derivative(loc, phi);
    Vector box = Vector::Zero(n);
    for (int m = 0; m < 4; ++m)
      for (int nu = 0; nu < 4; ++nu) {
        const double gi = geo.ginv[m][nu];
        if (gi == 0.0) continue;
        // D_{m nu} Phi = d_m d_nu Phi + (d_m w_nu) Phi + w_nu d_m Phi + w_m D_nu Phi
        //              - Gamma^l_{m nu} D_l Phi
        Vector t = dw[m][nu] * val;
        Vector dmphi(n);
        for (int i = 0; i < n; ++i) {
          t[i] += phi.d2[i][m][nu];
          dmphi[i] = phi.d[i][m];
        }
        t += loc.omega[nu] * dmphi + loc.omega[m] * D.col(nu);
        for (int l = 0; l < 4; ++l) t -= geo.gamma[l][m][nu] * D.col(l);
        box += gi * t;
      }
    return box;
  }

 private:
  FiberBundleSpec spec_;
};

}  // namespace nullkirch
