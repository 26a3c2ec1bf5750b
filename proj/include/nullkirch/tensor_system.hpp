#pragma once

// Fiber algebra for a system of covariant tensor fields, written slotwise
// with Christoffel symbols and the inverse metric. Same interface as
// BundleAlgebra, so the two can be run side by side on tensor systems.

#include <vector>

#include "nullkirch/bundle.hpp"
#include "nullkirch/geometry.hpp"

namespace nullkirch {

class TensorSystemAlgebra {
 public:
  struct Local {
    const PointGeometry* geo = nullptr;
  };

  explicit TensorSystemAlgebra(std::vector<int> ranks) : ranks_(std::move(ranks)) {
    int off = 0;
    for (int r : ranks_) {
      if (r < 0) throw Error(ErrorCode::SpecMismatch, "tensor rank must be non-negative");
      offsets_.push_back(off);
      off += ipow4(r);
    }
    n_ = off;
  }

  int dim() const { return n_; }
  const std::vector<int>& ranks() const { return ranks_; }

  Local local(const PointGeometry& geo) const { return Local{&geo}; }

  // g^{..}-contraction of all slots
  double inner(const Local& loc, const Vector& a, const Vector& b) const { return a.dot(raise(loc, b)); }

  // (omega_X T)_I = -sum_k Gamma^l_{X i_k} T_{I|k->l}
  Vector connection_apply(const Local& loc, const Vec4& X, const Vector& v) const {
    const PointGeometry& geo = *loc.geo;
    Mat4 C{};
    for (int l = 0; l < 4; ++l)
      for (int i = 0; i < 4; ++i)
        for (int m = 0; m < 4; ++m) C[l][i] += geo.gamma[l][m][i] * X[m];
    return slotwise(C, v);
  }

  Matrix connection_commutator(const Local& loc, const Vec4& X, const Matrix& E) const {
    Matrix WE(n_, n_), EW(n_, n_);
    for (int j = 0; j < n_; ++j) {
      WE.col(j) = connection_apply(loc, X, E.col(j));
      EW.col(j) = E * connection_apply(loc, X, Vector::Unit(n_, j));
    }
    return WE - EW;
  }

  // lower(E^T raise(v))
  Vector adjoint_apply(const Local& loc, const Matrix& E, const Vector& v) const {
    return lower(loc, E.transpose() * raise(loc, v));
  }

  // T_I -> -sum_k R^l_{i_k X Y} T_{I|k->l}
  Vector curvature_apply(const Local& loc, const Vec4& X, const Vec4& Y, const Vector& v) const {
    const Rank4 R = riemann_up(*loc.geo);
    Mat4 C{};
    for (int l = 0; l < 4; ++l)
      for (int i = 0; i < 4; ++i)
        for (int m = 0; m < 4; ++m)
          for (int n = 0; n < 4; ++n) C[l][i] += R[l][i][m][n] * X[m] * Y[n];
    return slotwise(C, v);
  }

  Eigen::Matrix<double, Eigen::Dynamic, 4> covariant_derivative(const Local& loc,
                                                                const FieldJet& phi) const {
    Eigen::Matrix<double, Eigen::Dynamic, 4> D(n_, 4);
    for (std::size_t b = 0; b < ranks_.size(); ++b) {
      const int r = ranks_[b], o = offsets_[b], n = ipow4(r);
      const auto cd = nullkirch::covariant_derivative(*loc.geo, block(phi, b), r);
      for (int m = 0; m < 4; ++m)
        for (int I = 0; I < n; ++I) D(o + I, m) = cd[m * n + I];
    }
    return D;
  }

  Vector wave_operator(const Local& loc, const FieldJet& phi) const {
    const PointGeometry& geo = *loc.geo;
    Vector box = Vector::Zero(n_);
    for (std::size_t b = 0; b < ranks_.size(); ++b) {
      const int r = ranks_[b], o = offsets_[b], n = ipow4(r);
      const auto dd = second_covariant_derivative(geo, block(phi, b), r);
      for (int m = 0; m < 4; ++m)
        for (int k = 0; k < 4; ++k)
          for (int I = 0; I < n; ++I) box[o + I] += geo.ginv[m][k] * dd[(m * 4 + k) * n + I];
    }
    return box;
  }

 private:
  FieldJet block(const FieldJet& phi, std::size_t b) const {
    const int o = offsets_[b], n = ipow4(ranks_[b]);
    FieldJet out;
    out.value.assign(phi.value.begin() + o, phi.value.begin() + o + n);
    if (!phi.d.empty()) out.d.assign(phi.d.begin() + o, phi.d.begin() + o + n);
    if (!phi.d2.empty()) out.d2.assign(phi.d2.begin() + o, phi.d2.begin() + o + n);
    return out;
  }

  Vector slotwise(const Mat4& C, const Vector& v) const {
    Vector out = Vector::Zero(n_);
    for (std::size_t b = 0; b < ranks_.size(); ++b) {
      const int r = ranks_[b], o = offsets_[b], n = ipow4(r);
      for (int I = 0; I < n; ++I)
        for (int k = 0; k < r; ++k) {
          const int ik = slot_digit(I, k, r);
          for (int l = 0; l < 4; ++l) out[o + I] -= C[l][ik] * v[o + replace_digit(I, k, r, l)];
        }
    }
    return out;
  }

  // apply g^{-1} (or g) to every slot
  Vector apply_slots(const Mat4& m, const Vector& v) const {
    Vector out = v;
    for (std::size_t b = 0; b < ranks_.size(); ++b) {
      const int r = ranks_[b], o = offsets_[b], n = ipow4(r);
      for (int k = 0; k < r; ++k) {
        Vector tmp = Vector::Zero(n);
        for (int I = 0; I < n; ++I) {
          const int ik = slot_digit(I, k, r);
          for (int l = 0; l < 4; ++l) tmp[I] += m[ik][l] * out[o + replace_digit(I, k, r, l)];
        }
        out.segment(o, n) = tmp;
      }
    }
    return out;
  }
  Vector raise(const Local& loc, const Vector& v) const { return apply_slots(loc.geo->ginv, v); }
  Vector lower(const Local& loc, const Vector& v) const { return apply_slots(loc.geo->g, v); }

  std::vector<int> ranks_;
  std::vector<int> offsets_;
  int n_ = 0;
};

}  // namespace nullkirch
