"""Ground-state search on spheres of radius sqrt(Nq) by projected gradient descent."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import Disorder, energy, gradient, uniform_sphere

RADIUS_TOL = 1e-8


@dataclass
class GroundStateOptions:
    seed: int = 0
    tol: float = 1e-8  # on |P_perp grad H| / sqrt(N)
    max_iter: int = 20000
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0


@dataclass
class GroundStateResult:
    minimizer: np.ndarray
    value_per_site: float
    restarts_used: int
    converged: bool
    q: float = 1.0
    grad_norm: float = float("nan")

    def row(self) -> dict:
        return {"q": self.q, "restarts": self.restarts_used, "value_per_site": self.value_per_site,
                "converged": self.converged}


def tangent_gradient(d: Disorder, x: np.ndarray) -> np.ndarray:
    g = gradient(d, x)
    return g - (g @ x) / (x @ x) * x


def _polish(d: Disorder, x: np.ndarray, step: float, opts: GroundStateOptions, budget: int):
    """Final stage once energy differences drop below rounding: accept moves
    that shrink the tangential gradient."""
    N = d.dim
    R = math.sqrt(x @ x)
    g = tangent_gradient(d, x)
    gn = math.sqrt(g @ g)
    for _ in range(budget):
        if gn / math.sqrt(N) < opts.tol:
            return x, True
        y = x - step * g
        y *= R / np.linalg.norm(y)
        gy = tangent_gradient(d, y)
        gyn = math.sqrt(gy @ gy)
        if gyn < gn:
            x, g, gn = y, gy, gyn
            step *= opts.grow
        else:
            step *= opts.shrink
            if step < 1e-12 / math.sqrt(N):
                break
    return x, gn / math.sqrt(N) < opts.tol


def _descend(d: Disorder, x: np.ndarray, opts: GroundStateOptions):
    N = d.dim
    R = math.sqrt(x @ x)
    step = 1.0 / math.sqrt(N)
    e = energy(d, x)
    it = 0
    while it < opts.max_iter:
        it += 1
        g = tangent_gradient(d, x)
        gn2 = g @ g
        if math.sqrt(gn2 / N) < opts.tol:
            return x, e, True, math.sqrt(gn2 / N)
        stalled = False
        while True:
            y = x - step * g
            y *= R / np.linalg.norm(y)
            ey = energy(d, y)
            if ey <= e - opts.armijo * step * gn2:
                break
            step *= opts.shrink
            if step * gn2 < 1e-15 * max(abs(e), 1.0):
                stalled = True
                break
        if stalled:
            break
        x, e = y, ey
        step *= opts.grow
    x, ok = _polish(d, x, max(step, 1e-3 / math.sqrt(N)), opts, max(opts.max_iter - it, 1000))
    g = tangent_gradient(d, x)
    return x, energy(d, x), ok, math.sqrt((g @ g) / N)


def restart_seed(master: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=master, spawn_key=(7, r))))


def minimize_on_sphere(d: Disorder, q: float = 1.0, restarts: int = 8,
                       opts: GroundStateOptions | None = None) -> GroundStateResult:
    """Best of ``restarts`` projected-gradient descents on S^{N-1}(q)."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0,1]")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    opts = opts or GroundStateOptions()
    best = None
    for r in range(restarts):
        x0 = uniform_sphere(restart_seed(opts.seed, r), d.dim, 1, q)[0]
        x, e, ok, gn = _descend(d, x0, opts)
        if best is None or e < best[1]:
            best = (x, e, ok, gn)
    x, e, ok, gn = best
    return GroundStateResult(x, float(energy(d, x)) / d.dim, restarts, ok, q, gn)


def near_ground_set_membership(d: Disorder, sigma, q: float, tau: float, E_star_q: float) -> bool:
    """sigma in U_N(q, tau) = {H(sigma)/N < -E*(q) + tau} on S^{N-1}(q)."""
    sigma = np.asarray(sigma, dtype=float)
    r = sigma @ sigma / d.dim
    if abs(r - q) > RADIUS_TOL * max(1.0, q):
        raise ValueError(f"sigma has squared radius {r:.12g} * N, expected {q}")
    return bool(energy(d, sigma) / d.dim < -E_star_q + tau)


def write_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["q", "restarts", "value_per_site", "converged"])
        w.writeheader()
        for r in results:
            w.writerow(r.row())
