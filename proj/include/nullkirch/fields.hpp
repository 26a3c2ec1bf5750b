#pragma once

// Manufactured field catalog (sections Phi) and first-order coefficient
// catalog (endomorphism one-forms E_mu). Random coefficients come from a
// seeded mt19937 mapped to [-1, 1) by hand so values are reproducible across
// standard libraries.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nullkirch/bundle.hpp"
#include "nullkirch/errors.hpp"
#include "nullkirch/geometry.hpp"
#include "nullkirch/jet.hpp"

namespace nullkirch {

class SeededUniform {
 public:
  explicit SeededUniform(std::uint32_t seed) : gen_(seed) {}
  double operator()() { return 2.0 * (static_cast<double>(gen_()) / 4294967296.0) - 1.0; }

 private:
  std::mt19937 gen_;
};

struct FieldSpec {
  std::string kind = "trig";  // polynomial | trig | constant | linear
  int dim = 1;
  std::uint32_t seed = 1;
  double amplitude = 1.0;
  double wavenumber = 0.7;
  double damping = 0.05;
  Vec4 center{};
};

// Component c of a catalog field, evaluated on any scalar type.
struct FieldCoefficients {
  std::vector<double> c0;
  std::vector<Vec4> c1;
  std::vector<Mat4> c2;
  std::vector<Vec4> k;
  std::vector<double> phase;
};

class CatalogField final : public SpacetimeField {
 public:
  explicit CatalogField(FieldSpec spec) : spec_(spec) {
    if (spec.dim < 1) throw Error(ErrorCode::ConfigError, "field dimension must be positive");
    if (spec.kind != "polynomial" && spec.kind != "trig" && spec.kind != "constant" &&
        spec.kind != "linear")
      throw Error(ErrorCode::ConfigError, "unknown field kind: " + spec.kind);
    SeededUniform u(spec.seed);
    const int n = spec.dim;
    co_.c0.resize(n);
    co_.c1.resize(n);
    co_.c2.resize(n);
    co_.k.resize(n);
    co_.phase.resize(n);
    for (int c = 0; c < n; ++c) {
      co_.c0[c] = spec.amplitude * u();
      for (int m = 0; m < 4; ++m) co_.c1[c][m] = spec.amplitude * u();
      for (int m = 0; m < 4; ++m)
        for (int q = m; q < 4; ++q) {
          co_.c2[c][m][q] = 0.5 * spec.amplitude * u();
          co_.c2[c][q][m] = co_.c2[c][m][q];
        }
      for (int m = 0; m < 4; ++m) co_.k[c][m] = spec.wavenumber * u();
      co_.phase[c] = 3.0 * u();
    }
  }

  int dim() const override { return spec_.dim; }

  template <class T>
  void components(const std::array<T, 4>& x, std::vector<T>& out) const {
    const int n = spec_.dim;
    out.assign(static_cast<std::size_t>(n), T(0.0));
    std::array<T, 4> y;
    for (int m = 0; m < 4; ++m) y[m] = x[m] - spec_.center[m];
    for (int c = 0; c < n; ++c) {
      if (spec_.kind == "constant") {
        out[c] = T(co_.c0[c]);
        continue;
      }
      T lin = T(co_.c0[c]);
      for (int m = 0; m < 4; ++m) lin = lin + co_.c1[c][m] * y[m];
      if (spec_.kind == "linear") {
        out[c] = lin;
        continue;
      }
      T quad = T(0.0);
      for (int m = 0; m < 4; ++m)
        for (int q = 0; q < 4; ++q) quad = quad + co_.c2[c][m][q] * y[m] * y[q];
      if (spec_.kind == "polynomial") {
        out[c] = lin + quad;
        continue;
      }
      // damped trigonometric profile
      using std::cos;
      using std::exp;
      using std::sin;
      T phase = T(co_.phase[c]);
      T r2 = T(0.0);
      for (int m = 0; m < 4; ++m) {
        phase = phase + co_.k[c][m] * y[m];
        r2 = r2 + y[m] * y[m];
      }
      out[c] = spec_.amplitude * sin(phase) * exp(-spec_.damping * r2) + 0.3 * lin;
    }
  }

  FieldJet evaluate(const Vec4& x) const override {
    const auto xs = seed_coordinates(x);
    std::vector<Jet> comps;
    components(xs, comps);
    FieldJet out;
    const std::size_t n = comps.size();
    out.value.resize(n);
    out.d.resize(n);
    out.d2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.value[i] = comps[i].v;
      out.d[i] = comps[i].d;
      out.d2[i] = comps[i].h;
    }
    return out;
  }

  std::vector<double> value(const Vec4& x) const {
    std::vector<double> out;
    components(x, out);
    return out;
  }

  const FieldSpec& spec() const { return spec_; }

 private:
  FieldSpec spec_;
  FieldCoefficients co_;
};

// ---------------------------------------------------------------------------
// First-order coefficient catalog.

struct CouplingSpec {
  std::string kind = "zero";  // zero | constant | varying
  int dim = 1;
  // constant: E_mu = tau_mu M with M given (row-major, dim x dim) or seeded
  std::vector<double> matrix;
  Vec4 tau{-1.0, 0.0, 0.0, 0.0};
  std::uint32_t seed = 7;
  double amplitude = 0.2;
  double wavenumber = 0.5;
};

class CatalogCoupling final : public EndomorphismField {
 public:
  explicit CatalogCoupling(CouplingSpec spec) : spec_(std::move(spec)) {
    const int n = spec_.dim;
    if (n < 1) throw Error(ErrorCode::ConfigError, "coupling dimension must be positive");
    if (spec_.kind != "zero" && spec_.kind != "constant" && spec_.kind != "varying")
      throw Error(ErrorCode::ConfigError, "unknown coupling kind: " + spec_.kind);
    SeededUniform u(spec_.seed);
    if (spec_.kind == "constant") {
      M_ = Matrix(n, n);
      if (!spec_.matrix.empty()) {
        if (static_cast<int>(spec_.matrix.size()) != n * n)
          throw Error(ErrorCode::ConfigError, "coupling matrix has wrong size");
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) M_(i, j) = spec_.matrix[i * n + j];
      } else {
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) M_(i, j) = spec_.amplitude * u();
      }
    }
    if (spec_.kind == "varying") {
      for (int m = 0; m < 4; ++m) {
        C_[m] = Matrix(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) C_[m](i, j) = spec_.amplitude * u();
        for (int q = 0; q < 4; ++q) k_[m][q] = spec_.wavenumber * u();
        phase_[m] = 3.0 * u();
      }
    }
  }

  int dim() const override { return spec_.dim; }
  bool is_zero() const override { return spec_.kind == "zero"; }
  const Matrix& constant_matrix() const { return M_; }

  Connection value(const Vec4& x) const override {
    const int n = spec_.dim;
    Connection E;
    for (int m = 0; m < 4; ++m) {
      if (spec_.kind == "zero") {
        E[m] = Matrix::Zero(n, n);
      } else if (spec_.kind == "constant") {
        E[m] = spec_.tau[m] * M_;
      } else {
        double ph = phase_[m];
        for (int q = 0; q < 4; ++q) ph += k_[m][q] * x[q];
        E[m] = (1.0 + 0.5 * std::sin(ph)) * C_[m];
      }
    }
    return E;
  }

  std::array<Connection, 4> derivative(const Vec4& x) const override {
    const int n = spec_.dim;
    std::array<Connection, 4> dE;
    for (int nu = 0; nu < 4; ++nu)
      for (int m = 0; m < 4; ++m) {
        if (spec_.kind != "varying") {
          dE[nu][m] = Matrix::Zero(n, n);
          continue;
        }
        double ph = phase_[m];
        for (int q = 0; q < 4; ++q) ph += k_[m][q] * x[q];
        dE[nu][m] = (0.5 * std::cos(ph) * k_[m][nu]) * C_[m];
      }
    return dE;
  }

 private:
  CouplingSpec spec_;
  Matrix M_;
  std::array<Matrix, 4> C_;
  std::array<Vec4, 4> k_{};
  std::array<double, 4> phase_{};
};

}  // namespace nullkirch
