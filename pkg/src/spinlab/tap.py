"""TAP representation of the free energy: the profile
q -> beta E*(q) + 1/2 log(1-q) + F(nu_{q,2}, beta) and its consistency with
the Parisi solution."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import parisi
from .mixture import Mixture, inner_sphere, restrict_two

ATOM_ZERO = 1e-6  # atoms below this count as the origin


@dataclass
class TapOptions:
    nodes: int = 64
    lo: float = 0.01
    hi: float = 0.99
    k: int = 2  # atoms for the inner solve
    argmax_tol: float = 5e-3
    zero_temp: parisi.ZeroTempOptions = field(default_factory=parisi.ZeroTempOptions)
    solve: parisi.SolveOptions = field(default_factory=lambda: parisi.SolveOptions(starts=3))


@dataclass
class TapProfile:
    q: np.ndarray
    energy: np.ndarray  # beta E*(q)
    entropy: np.ndarray  # 1/2 log(1-q)
    f_limit: np.ndarray  # inf of the functional for nu_{q,2}
    flags: list[list[str]]
    argmax_tol: float = 5e-3

    @property
    def total(self) -> np.ndarray:
        return self.energy + self.entropy + self.f_limit

    @property
    def sup(self) -> float:
        return float(np.max(self.total))

    @property
    def argmax(self) -> np.ndarray:
        t = self.total
        return self.q[t >= t.max() - self.argmax_tol]

    def rows(self, beta: float) -> list[dict]:
        return [
            {"q": float(q), "E_star": float(e / beta), "entropy": float(s), "F_limit": float(f),
             "total": float(e + s + f)}
            for q, e, s, f in zip(self.q, self.energy, self.entropy, self.f_limit)
        ]

    def write_csv(self, path, beta: float) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["q", "E_star", "entropy", "F_limit", "total"])
            w.writeheader()
            w.writerows(self.rows(beta))


def chebyshev_grid(n: int, lo: float, hi: float) -> np.ndarray:
    k = np.arange(n)
    x = np.cos(np.pi * (2 * k + 1) / (2 * n))[::-1]
    return lo + (hi - lo) * (x + 1) / 2


def inner_free_energy(m: Mixture, beta: float, q: float, k: int = 2,
                      opts: parisi.SolveOptions | None = None):
    """Minimized functional for the restricted mixture nu_{q,2} (0 if it vanishes)."""
    nu2 = restrict_two(m, q)
    x, v = parisi.solve(nu2, beta, k, opts)
    return x, v


def tap_profile(m: Mixture, beta: float, q_grid=None, opts: TapOptions | None = None,
                extra_points=()) -> TapProfile:
    opts = opts or TapOptions()
    if q_grid is None:
        q_grid = chebyshev_grid(opts.nodes, opts.lo, opts.hi)
    q = np.unique(np.concatenate([np.asarray(q_grid, dtype=float), np.asarray(extra_points, dtype=float)]))
    if np.any(q <= 0) or np.any(q >= 1):
        raise ValueError("profile grid must lie inside (0,1)")
    E = np.empty(q.size)
    S = 0.5 * np.log1p(-q)
    F = np.empty(q.size)
    flags = []
    for i, qi in enumerate(q):
        zt = parisi.zero_temperature_fit(inner_sphere(m, float(qi)), opts.zero_temp)
        E[i] = beta * zt["E_star"]
        x, v = inner_free_energy(m, beta, float(qi), opts.k, opts.solve)
        F[i] = v
        flags.append(list(zt["flags"]) + list(x.meta.get("flags", [])))
    return TapProfile(q, E, S, F, flags, opts.argmax_tol)


def tap_rs_value(m: Mixture, beta: float, q_P: float) -> float:
    """1/2 beta^2 (nu(1) - nu(q_P) - (1 - q_P) nu'(q_P))."""
    if not 0.0 <= q_P < 1.0:
        raise ValueError("q_P must lie in [0,1)")
    return parisi.tap_rs_value(m, beta, q_P)


def tap_rs_value_alpha(m: Mixture, beta: float, q_P: float) -> float:
    """Same quantity through the restricted mixture: 1/2 beta^2 nu_{q_P,2}(1)."""
    if q_P == 0.0:
        return 0.5 * beta * beta * sum(c for p, c in m.coeffs.items() if p >= 2)
    return 0.5 * beta * beta * float(restrict_two(m, q_P)(1.0))


def tap_consistency(m: Mixture, beta: float, opts: TapOptions | None = None, tol: float = 5e-3,
                    k: int = 2) -> dict:
    """Cross-check the profile against the Parisi solution.

    (a) sup of the profile vs the Parisi value; (b) positive solver atoms lie
    in the profile argmax set; (c) at q_P the inner free energy equals the
    replica-symmetric closed form, when the RS condition holds there.
    """
    opts = opts or TapOptions()
    x, value = parisi.solve(m, beta, k, opts.solve)
    pos = [float(a) for a in x.atoms if a > ATOM_ZERO]
    prof = tap_profile(m, beta, opts=opts, extra_points=pos)
    sup = prof.sup
    grid_res = float(np.max(np.diff(prof.q)))
    am = prof.argmax
    in_argmax = [bool(np.any(np.abs(am - a) <= grid_res)) for a in pos]
    q_P = x.q_max
    holds, worst, margin = parisi.rs_condition(m, beta, q_P)
    report = {
        "beta": beta,
        "parisi_value": value,
        "parisi_measure": x.to_json(),
        "profile_sup": sup,
        "profile_argmax": am.tolist(),
        "checks": {
            "sup_matches": {"pass": abs(sup - value) <= tol, "margin": abs(sup - value), "tol": tol},
            "atoms_in_argmax": {"pass": all(in_argmax), "atoms": pos, "grid_resolution": grid_res},
        },
        "rs_condition": {"holds": holds, "worst_t": worst, "margin": margin},
        "flags": sorted({f for fl in prof.flags for f in fl}),
    }
    if q_P > ATOM_ZERO:
        _, f_inner = inner_free_energy(m, beta, q_P, opts.k, opts.solve)
    else:
        f_inner = value
    rs_val = tap_rs_value(m, beta, q_P)
    diff = abs(f_inner - rs_val)
    report["checks"]["rs_value_at_qP"] = {
        "pass": (diff <= tol) if holds else None,
        "margin": diff,
        "tol": tol,
        "applicable": holds,
        "F_limit": f_inner,
        "tap_rs_value": rs_val,
    }
    report["passed"] = all(c["pass"] is not False for c in report["checks"].values())
    report["profile"] = prof
    return report


def profile_total_check(prof: TapProfile) -> float:
    """Largest deviation between the total and the sum of the components."""
    return float(np.max(np.abs(prof.total - (prof.energy + prof.entropy + prof.f_limit))))


__all__ = [
    "TapOptions", "TapProfile", "chebyshev_grid", "tap_profile", "tap_rs_value",
    "tap_rs_value_alpha", "tap_consistency", "inner_free_energy", "profile_total_check",
]
