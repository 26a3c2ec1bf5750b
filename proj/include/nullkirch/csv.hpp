#pragma once

// CSV dumps: header row, RFC-4180 quoting, numbers as %.17g so that the
// files round-trip and reruns are byte-identical.

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

#include "nullkirch/harness.hpp"

namespace nullkirch {

inline std::string csv_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& field(const std::string& s) { return raw(csv_quote(s)); }
  CsvWriter& field(const char* s) { return field(std::string(s)); }
  CsvWriter& field(double x) { return raw(csv_number(x)); }
  CsvWriter& field(int x) { return raw(std::to_string(x)); }
  CsvWriter& field(bool x) { return raw(x ? "1" : "0"); }
  void end() {
    os_ << "\r\n";
    first_ = true;
  }
  void header(std::initializer_list<const char*> names) {
    for (const char* n : names) field(n);
    end();
  }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }
  std::ostream& os_;
  bool first_ = true;
};

// Valid nodes only: levels below the generator's failure point.
inline void write_cone_csv(std::ostream& os, const ConeGrid& g) {
  CsvWriter w(os);
  w.header({"i_v", "j_omega", "s", "f", "x0", "x1", "x2", "x3", "L0", "L1", "L2", "L3", "lapse", "density"});
  for (int l = 0; l < g.nlevels(); ++l)
    for (int j = 0; j < g.nsphere(); ++j) {
      if (l >= g.valid_levels[j]) continue;
      const ConeNode& nd = g.node(l, j);
      w.field(l).field(j).field(nd.s).field(nd.f);
      for (double c : nd.x) w.field(c);
      for (double c : nd.L) w.field(c);
      w.field(nd.lapse).field(nd.density);
      w.end();
    }
}

inline void write_scalars_csv(std::ostream& os, const ConeGrid& g, const OpticalScalars& sc) {
  CsvWriter w(os);
  w.header({"i_v", "j_omega", "trchi", "chihat11", "chihat12", "trchib", "chibhat11", "chibhat12", "zeta1", "zeta2",
            "etab1", "etab2", "mu"});
  for (int l = 0; l <= sc.last_level; ++l)
    for (int j = 0; j < g.nsphere(); ++j) {
      const OpticalNode& on = sc.node(g, l, j);
      if (!on.valid) continue;
      w.field(l).field(j).field(on.trchi).field(on.chihat[0][0]).field(on.chihat[0][1]).field(on.trchib);
      w.field(on.chibhat[0][0]).field(on.chibhat[0][1]).field(on.zeta[0]).field(on.zeta[1]);
      w.field(on.etab[0]).field(on.etab[1]).field(on.mu);
      w.end();
    }
}

inline void write_kernel_csv(std::ostream& os, const ConeGrid& g, const TransportKernel& K) {
  CsvWriter w(os);
  w.header({"i_v", "j_omega", "component", "B"});
  for (int l = 0; l < g.nlevels(); ++l)
    for (int j = 0; j < g.nsphere(); ++j) {
      if (l >= K.valid_levels[j]) continue;
      const Vector b = K.b(g, l, j);
      for (int i = 0; i < K.N; ++i) {
        w.field(l).field(j).field(i).field(b[i]);
        w.end();
      }
    }
}

inline void write_breakdown_header(CsvWriter& w) {
  w.header({"case", "ntheta", "nphi", "nv", "F", "E1", "E1_alt", "E2", "I", "lhs", "residual", "error_budget"});
}

inline void write_breakdown_row(CsvWriter& w, const std::string& name, const Rung& r, const ParametrixBreakdown& b) {
  w.field(name).field(r.ntheta).field(r.nphi).field(r.nv);
  w.field(b.F.value).field(b.E1.value).field(b.E1_alt.value).field(b.E2.value).field(b.I.value);
  w.field(b.lhs).field(b.residual).field(b.error_budget);
  w.end();
}

// Per rung and invariant: value, roundoff scale and pass flag (empty when the
// invariant has no tolerance of its own).
inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceReport>& reps) {
  CsvWriter w(os);
  w.header({"case", "ntheta", "nphi", "nv", "h", "invariant", "value", "scale", "pass"});
  for (const auto& rep : reps)
    for (const auto& r : rep.rungs) {
      if (!r.ok) continue;
      for (const auto& [k, v] : r.values) {
        w.field(rep.name).field(r.rung.ntheta).field(r.rung.nphi).field(r.rung.nv).field(r.h).field(k).field(v);
        const auto sc = r.scales.find(k);
        if (sc != r.scales.end())
          w.field(sc->second);
        else
          w.field("");
        const auto fl = r.flags.find(k);
        if (fl != r.flags.end())
          w.field(fl->second);
        else
          w.field("");
        w.end();
      }
      // flags without a value column of their own
      for (const auto& [k, ok] : r.flags)
        if (!r.values.count(k)) {
          w.field(rep.name).field(r.rung.ntheta).field(r.rung.nphi).field(r.rung.nv).field(r.h).field(k);
          w.field("").field("").field(ok);
          w.end();
        }
    }
}

inline void write_orders_csv(std::ostream& os, const std::vector<ConvergenceReport>& reps) {
  CsvWriter w(os);
  w.header({"case", "invariant", "order", "threshold", "status", "pass"});
  for (const auto& rep : reps)
    for (const auto& o : rep.orders) {
      w.field(rep.name).field(o.name);
      if (std::isfinite(o.order))
        w.field(o.order);
      else
        w.field("");
      w.field(o.threshold).field(o.status).field(o.pass);
      w.end();
    }
}

}  // namespace nullkirch
