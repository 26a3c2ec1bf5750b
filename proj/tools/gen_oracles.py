#!/usr/bin/env python3
"""Regenerates tests/oracles/*.json.

Independent of the C++ code: sympy differentiates the metric components and a
sample covector field; Christoffel symbols, curvature and covariant
derivatives are then assembled in mpmath at 30 digits.

    python3 tools/gen_oracles.py
"""
import json
import pathlib

import mpmath as mp
import sympy as sp

X = sp.symbols("x0:4", real=True)
ETA = sp.diag(-1, 1, 1, 1)
DIGITS = 30
R4 = range(4)


def at_point(e, at):
    return mp.mpf(str(sp.N(sp.sympify(e).subs(dict(zip(X, at))), DIGITS)))


def oracle(name, g, at, extra=None):
    mp.mp.dps = DIGITS
    G0 = mp.matrix([[at_point(g[a, b], at) for b in R4] for a in R4])
    dG = [[[at_point(sp.diff(g[a, b], X[k]), at) for b in R4] for a in R4] for k in R4]
    ddG = [[[[at_point(sp.diff(g[a, b], X[k], X[j]), at) for b in R4] for a in R4] for j in R4] for k in R4]
    Gi = G0 ** -1
    # d_j g^{ab} = -g^{ac} d_j g_{cd} g^{db}
    dGi = [[[-sum(Gi[a, c] * dG[j][c][d] * Gi[d, b] for c in R4 for d in R4) for b in R4] for a in R4] for j in R4]

    def low(k, m, n):
        return (dG[n][k][m] + dG[m][k][n] - dG[k][m][n]) / 2

    def dlow(j, k, m, n):
        return (ddG[j][n][k][m] + ddG[j][m][k][n] - ddG[j][k][m][n]) / 2

    gam = [[[sum(Gi[l, k] * low(k, m, n) for k in R4) for n in R4] for m in R4] for l in R4]
    dgam = [[[[sum(dGi[j][l][k] * low(k, m, n) + Gi[l, k] * dlow(j, k, m, n) for k in R4) for n in R4] for m in R4]
              for l in R4] for j in R4]
    # R^r_{s m n} = d_m G^r_{n s} - d_n G^r_{m s} + G^r_{m l} G^l_{n s} - G^r_{n l} G^l_{m s}
    rup = [[[[dgam[m][r][n][s] - dgam[n][r][m][s]
              + sum(gam[r][m][l] * gam[l][n][s] - gam[r][n][l] * gam[l][m][s] for l in R4)
              for n in R4] for m in R4] for s in R4] for r in R4]
    rdown = [[[[sum(G0[a, r] * rup[r][b][m][n] for r in R4) for n in R4] for m in R4] for b in R4] for a in R4]
    ric = [[sum(rup[a][b][a][d] for a in R4) for d in R4] for b in R4]
    scal = sum(Gi[b, d] * ric[b][d] for b in R4 for d in R4)

    # sample covector field w_a
    w = [X[1] * X[2], sp.sin(X[0]) + X[3] ** 2, X[0] * X[3], sp.cos(X[1])]
    w0 = [at_point(e, at) for e in w]
    dw = [[at_point(sp.diff(w[a], X[m]), at) for a in R4] for m in R4]
    ddw = [[[at_point(sp.diff(w[a], X[m], X[n]), at) for a in R4] for n in R4] for m in R4]
    Dw = [[dw[m][a] - sum(gam[l][m][a] * w0[l] for l in R4) for a in R4] for m in R4]

    def dDw(m, n, a):  # d_m (D_n w_a)
        return ddw[m][n][a] - sum(dgam[m][l][n][a] * w0[l] + gam[l][n][a] * dw[m][l] for l in R4)

    DDw = [[[dDw(m, n, a) - sum(gam[l][m][n] * Dw[l][a] + gam[l][m][a] * Dw[n][l] for l in R4) for a in R4]
            for n in R4] for m in R4]
    box = [sum(Gi[m, n] * DDw[m][n][a] for m in R4 for n in R4) for a in R4]

    f = float
    out = {
        "metric": name,
        "point": list(at),
        "g": [[f(G0[a, b]) for b in R4] for a in R4],
        "gamma": [[[f(gam[l][m][n]) for n in R4] for m in R4] for l in R4],
        "riemann_down": [[[[f(rdown[a][b][m][n]) for n in R4] for m in R4] for b in R4] for a in R4],
        "ricci": [[f(ric[b][d]) for d in R4] for b in R4],
        "ricci_scalar": f(scal),
        "covector_D": [[f(Dw[m][a]) for a in R4] for m in R4],
        "covector_box": [f(b) for b in box],
    }
    if extra:
        out.update(extra)
    return out


def main():
    root = pathlib.Path(__file__).resolve().parent.parent / "tests" / "oracles"
    root.mkdir(parents=True, exist_ok=True)

    # Schwarzschild, Cartesian Kerr-Schild, M = 1, at r = 10
    M = 1
    r = sp.sqrt(X[1] ** 2 + X[2] ** 2 + X[3] ** 2)
    l = [1, X[1] / r, X[2] / r, X[3] / r]
    g_ks = sp.Matrix(4, 4, lambda a, b: ETA[a, b] + 2 * M / r * l[a] * l[b])
    ks = oracle("schwarzschild_ks", g_ks, (0.5, 6.0, 0.0, 8.0), {"mass": M, "kretschmann": 48.0 * M ** 2 / 10.0 ** 6})
    (root / "schwarzschild_ks_r10.json").write_text(json.dumps(ks, indent=1) + "\n")

    # conformally flat, Omega = 1 + a.x + sum b_m x_m^2 + c sin(k.x)
    a = [0, sp.Rational(1, 10), 0, 0]
    b = [sp.Rational(2, 100), sp.Rational(5, 100), sp.Rational(-3, 100), sp.Rational(4, 100)]
    c = sp.Rational(5, 100)
    k = [sp.Rational(3, 10), sp.Rational(5, 10), sp.Rational(2, 10), sp.Rational(-4, 10)]
    om = 1 + sum(a[m] * X[m] + b[m] * X[m] ** 2 for m in R4) + c * sp.sin(sum(k[m] * X[m] for m in R4))
    g_cf = om ** 2 * ETA
    cf = oracle("conformally_flat", g_cf, (0.2, 0.1, -0.1, 0.05),
                {"a": [float(v) for v in a], "b": [float(v) for v in b], "c": float(c), "k": [float(v) for v in k]})
    (root / "conformally_flat.json").write_text(json.dumps(cf, indent=1) + "\n")


if __name__ == "__main__":
    main()
