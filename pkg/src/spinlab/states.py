"""Overlap analytics: overlap matrices and histograms, pure-state clustering,
ultrametricity and Ghirlanda-Guerra defects, ultrametric trees and overlap
supports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

SYM_TOL = 1e-12


@dataclass
class OverlapMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("overlap matrix must be square")
        if not np.allclose(v, v.T, atol=SYM_TOL, rtol=0):
            raise ValueError("overlap matrix must be symmetric")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def off_diagonal(self) -> np.ndarray:
        iu = np.triu_indices(self.n, 1)
        return self.values[iu]


def _points(s) -> np.ndarray:
    pts = getattr(s, "points", s)
    return np.atleast_2d(np.asarray(pts, dtype=float))


def overlap_matrix(s) -> OverlapMatrix:
    """R(s_i, s_j) = <s_i, s_j> / (|s_i| |s_j|) for a SampleSet or array of points."""
    X = _points(s)
    if X.shape[0] == 0:
        raise ValueError("empty sample set")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm point")
    Xn = X / norms[:, None]
    R = np.clip(Xn @ Xn.T, -1.0, 1.0)
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return OverlapMatrix(R)


def overlap_histogram(M: OverlapMatrix, bins=41, range_=(-1.0, 1.0)):
    """Probability mass function of off-diagonal overlaps: (bin edges, pmf)."""
    M = M if isinstance(M, OverlapMatrix) else OverlapMatrix(M)
    if M.n < 2:
        raise ValueError("need at least two points")
    vals = M.off_diagonal()
    counts, edges = np.histogram(vals, bins=bins, range=range_)
    return edges, counts / counts.sum()


# -- pure states ----------------------------------------------------------------

@dataclass
class StateDecomposition:
    clusters: list[np.ndarray]
    weights: np.ndarray
    centers: np.ndarray  # (K, N), each on S^{N-1}(q_star)
    q_star: float
    eps: float
    violation_fraction: float = 0.0
    flags: list[str] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def cluster_states(s, q_star: float, eps: float) -> StateDecomposition:
    """Single-linkage clusters of the graph {R_ij > q_star - eps} with
    magnetization centers rescaled to radius sqrt(N q_star)."""
    if not 0.0 < eps < q_star:
        raise ValueError("eps must lie in (0, q_star)")
    X = _points(s)
    n, N = X.shape
    R = overlap_matrix(X).values
    adj = R > q_star - eps
    ncomp, labels = connected_components(adj, directed=False)
    groups = [np.flatnonzero(labels == c) for c in range(ncomp)]
    groups.sort(key=lambda g: (-g.size, g[0]))
    weights = np.array([g.size / n for g in groups])
    centers = np.zeros((len(groups), N))
    flags = []
    bad_pairs = 0
    same_pairs = 0
    for k, g in enumerate(groups):
        mean = X[g].mean(axis=0)
        nrm = np.linalg.norm(mean)
        if nrm == 0.0:
            flags.append(f"zero-mean-cluster:{k}")
            centers[k] = np.nan
        else:
            centers[k] = mean * math.sqrt(N * q_star) / nrm
        if g.size > 1:
            sub = R[np.ix_(g, g)][np.triu_indices(g.size, 1)]
            same_pairs += sub.size
            bad_pairs += int(np.sum(sub <= q_star - eps))
    frac = bad_pairs / same_pairs if same_pairs else 0.0
    return StateDecomposition(groups, weights, centers, q_star, eps, frac, flags)


# -- ultrametricity ---------------------------------------------------------------

def ultrametricity_defect(M: OverlapMatrix, eps: float, max_exact: int = 200,
                          samples: int = 10**6, seed: int = 0) -> float:
    """Fraction of triples i < j < k with R_ik < min(R_ij, R_jk) - eps.

    Labels follow index order, so for exchangeable samples this estimates
    P(R_13 < min(R_12, R_23) - eps) under the triple product measure.
    """
    R = np.asarray(M, dtype=float)
    n = R.shape[0]
    if n < 3:
        raise ValueError("need at least three points")
    if n <= max_exact:
        bad = 0
        total = 0
        for i in range(n - 2):
            j, k = np.triu_indices(n - i - 1, 1)
            j, k = j + i + 1, k + i + 1
            bad += int(np.sum(R[i, k] < np.minimum(R[i, j], R[j, k]) - eps))
            total += j.size
        return bad / total
    rng = np.random.default_rng(seed)
    i = rng.integers(n, size=samples)
    j = rng.integers(n - 1, size=samples)
    j = j + (j >= i)
    k = rng.integers(n - 2, size=samples)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    k = k + (k >= lo)
    k = k + (k >= hi)
    # i, j, k are distinct; order them so labels follow index order
    a, b, c = np.sort(np.stack([i, j, k]), axis=0)
    return float(np.mean(R[a, c] < np.minimum(R[a, b], R[b, c]) - eps))


# -- Ghirlanda-Guerra ---------------------------------------------------------------

# test functions of the n x n overlap array (f) and of a single overlap (psi)
F_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "one": lambda A: np.ones(A.shape[0]),
    "R12": lambda A: A[:, 0, 1],
    "R12^2": lambda A: A[:, 0, 1] ** 2,
    "R12R23": lambda A: A[:, 0, 1] * A[:, 1, 2],
}
PSI_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "const": lambda x: np.ones_like(x),
    "x": lambda x: x,
    "x^2": lambda x: x**2,
    "x^4": lambda x: x**4,
    "abs": np.abs,
}
_F_MIN_N = {"one": 1, "R12": 2, "R12^2": 2, "R12R23": 3}


def _gg_terms(R: np.ndarray, n: int, f, psi, tuples: int, rng, ordered: bool = False) -> np.ndarray:
    """Per-draw averages over ordered tuples of n+1 distinct replicas:
    [<f>, <psi(R_12)>, <f psi(R_1,n+1)>, sum_k <f psi(R_1k)>].

    Tuples are random relabellings, or with ``ordered`` consecutive blocks in
    the stored replica order."""
    K = R.shape[0]
    if ordered:
        idx = np.arange((K // (n + 1)) * (n + 1)).reshape(-1, n + 1)
    else:
        idx = np.argsort(rng.random((tuples, K)), axis=1)[:, : n + 1]
    A = R[idx[:, :, None], idx[:, None, :]]  # (T, n+1, n+1)
    fv = f(A[:, :n, :n])
    p12 = psi(A[:, 0, 1])
    p1n = psi(A[:, 0, n])
    side = sum((fv * psi(A[:, 0, k])).mean() for k in range(1, n)) if n >= 2 else 0.0
    return np.array([fv.mean(), p12.mean(), (fv * p1n).mean(), side])


def gg_defect(sets: Sequence, n: int, psi: str = "x^2", f: str = "one", tuples: int = 4000,
              seed: int = 0, convention: str = "standard", bootstrap: int = 200,
              return_error: bool = False, ordered: bool = False):
    """|n E<f psi(R_1,n+1)> - E<f> E<psi(R_12)> -/+ sum_{k=2}^n E<f psi(R_1k)>|.

    Each element of ``sets`` is the overlap matrix of replicas from one
    disorder draw; E is the average over draws. ``convention="standard"``
    subtracts the sum (the form under which a constant psi cancels);
    ``"displayed"`` adds it. With ``ordered`` the replicas are read in their
    stored order, which exposes samplers whose replica order is informative.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if f not in F_FUNCTIONS or psi not in PSI_FUNCTIONS:
        raise ValueError(f"unknown test function; f in {sorted(F_FUNCTIONS)}, psi in {sorted(PSI_FUNCTIONS)}")
    if n < _F_MIN_N[f]:
        raise ValueError(f"f={f} needs n >= {_F_MIN_N[f]}")
    sign = {"standard": -1.0, "displayed": 1.0}[convention]
    rng = np.random.default_rng(seed)
    rows = []
    for M in sets:
        R = np.asarray(M, dtype=float)
        if R.shape[0] < n + 1:
            raise ValueError(f"each draw needs at least n+1 = {n + 1} replicas")
        rows.append(_gg_terms(R, n, F_FUNCTIONS[f], PSI_FUNCTIONS[psi], tuples, rng, ordered))
    T = np.array(rows)

    def value(T):
        Ef, Epsi, Efp, Eside = T.mean(axis=0)
        return abs(n * Efp - Ef * Epsi + sign * Eside)

    v = value(T)
    if not return_error:
        return v
    boots = [value(T[rng.integers(len(T), size=len(T))]) for _ in range(bootstrap)]
    return v, float(np.std(boots, ddof=1)) if len(T) > 1 else float("nan")


# -- ultrametric tree -------------------------------------------------------------

@dataclass
class TreeLevel:
    q: float
    theta: float
    classes: list[np.ndarray]  # index sets into the decomposition's centers
    centers: np.ndarray  # (n_classes, N) on S^{N-1}(q)
    parents: np.ndarray  # class index at the previous (lower) level, -1 for the first
    nontransitive_pairs: int
    weights: np.ndarray


@dataclass
class UltraTree:
    levels: list[TreeLevel]
    q_star: float
    leaf_centers: np.ndarray
    leaf_weights: np.ndarray
    report: dict

    def to_json(self) -> dict:
        """Nested nodes {q, center, weight, children}; leaves reference centers by index."""

        def node(li: int, ci: int) -> dict:
            lev = self.levels[li]
            if li + 1 < len(self.levels):
                nxt = self.levels[li + 1]
                kids = [node(li + 1, j) for j in np.flatnonzero(nxt.parents == ci)]
            else:
                kids = [{"q": self.q_star, "center": int(k), "weight": float(self.leaf_weights[k]),
                         "children": []} for k in lev.classes[ci]]
            return {"q": lev.q, "center": f"level{li}:class{ci}", "weight": float(lev.weights[ci]),
                    "children": kids}

        if not self.levels:
            return {"q": 0.0, "center": None, "children": [
                {"q": self.q_star, "center": k, "children": []} for k in range(len(self.leaf_centers))]}
        roots = [node(0, c) for c in range(len(self.levels[0].classes))]
        return {"q": 0.0, "center": None, "children": roots, "report": self.report}


def _theta_default(R: np.ndarray, labels: np.ndarray) -> float:
    vals = []
    for c in np.unique(labels):
        g = np.flatnonzero(labels == c)
        if g.size > 1:
            vals.append(R[np.ix_(g, g)][np.triu_indices(g.size, 1)])
    if not vals:
        return 0.02
    v = np.concatenate(vals)
    mad = float(np.median(np.abs(v - np.median(v))))
    return max(0.02, 2 * mad)


def build_ultratree(dec: StateDecomposition, Q: Sequence[float], theta: float | None = None) -> UltraTree:
    """Equivalence classes of centers at each level q:
    k ~_q k' iff R(center_k, center_k') > q / q_star - theta (transitive closure)."""
    Q = np.asarray(Q, dtype=float)
    if np.any(np.diff(Q) <= 0):
        raise ValueError("levels must be strictly increasing")
    if len(dec.centers) == 0:
        raise ValueError("decomposition has no centers")
    qs = dec.q_star
    if np.any(Q <= 0) or np.any(Q >= qs):
        raise ValueError("levels must lie inside (0, q_star)")
    C = dec.centers
    K, N = C.shape
    R = overlap_matrix(C).values
    levels: list[TreeLevel] = []
    prev_labels = None
    for q in Q:
        th = theta
        if th is None:
            # bandwidth from the spread inside a provisional clustering at 0.02
            _, lab0 = connected_components(R > q / qs - 0.02, directed=False)
            th = _theta_default(R, lab0)
        adj = R > q / qs - th
        np.fill_diagonal(adj, True)
        ncomp, labels = connected_components(adj, directed=False)
        classes = [np.flatnonzero(labels == c) for c in range(ncomp)]
        nontrans = 0
        for g in classes:
            if g.size > 2:
                sub = adj[np.ix_(g, g)]
                nontrans += int((~sub).sum() // 2)
        cen = np.zeros((ncomp, N))
        wts = np.zeros(ncomp)
        for c, g in enumerate(classes):
            mean = C[g].mean(axis=0)
            cen[c] = mean * math.sqrt(N * q) / np.linalg.norm(mean)
            wts[c] = dec.weights[g].sum()
        if prev_labels is None:
            parents = -np.ones(ncomp, dtype=int)
        else:
            parents = np.array([prev_labels[g[0]] for g in classes])
        levels.append(TreeLevel(float(q), float(th), classes, cen, parents, nontrans, wts))
        prev_labels = labels
    report = _tree_report(levels, C, dec.weights, qs)
    return UltraTree(levels, qs, C, dec.weights, report)


def _tree_report(levels: list[TreeLevel], C: np.ndarray, w: np.ndarray, qs: float) -> dict:
    N = C.shape[1]
    nested = True
    for lo, hi in zip(levels[:-1], levels[1:]):
        for c, g in enumerate(hi.classes):
            if not np.isin(g, lo.classes[hi.parents[c]]).all():
                nested = False
    # section membership: members' displacement from their class center is orthogonal to it
    section = 0.0
    for lev in levels:
        for c, g in enumerate(lev.classes):
            s = lev.centers[c]
            section = max(section, float(np.max(np.abs((C[g] - s) @ s)) / N))
    # orthogonality between distinct children of a common class, one level up
    ortho = 0.0
    for li, lev in enumerate(levels):
        if li + 1 < len(levels):
            nxt = levels[li + 1]
            child_sets = [(nxt.centers[np.flatnonzero(nxt.parents == c)]) for c in range(len(lev.classes))]
        else:
            child_sets = [C[g] for g in lev.classes]
        for c, kids in enumerate(child_sets):
            if len(kids) < 2:
                continue
            D = kids - lev.centers[c]
            G = D @ D.T / N
            iu = np.triu_indices(len(kids), 1)
            ortho = max(ortho, float(np.max(np.abs(G[iu]))))
    mass = 0.0
    for lo, hi in zip(levels[:-1], levels[1:]):
        for c in range(len(lo.classes)):
            mass = max(mass, abs(lo.weights[c] - hi.weights[hi.parents == c].sum()))
    return {
        "nested": nested,
        "section_residual": section,
        "orthogonality_residual": ortho,
        "mass_nesting_residual": float(mass),
        "nontransitive_pairs": [lev.nontransitive_pairs for lev in levels],
        "classes_per_level": [len(lev.classes) for lev in levels],
    }


def tree_signature(tree: UltraTree) -> tuple:
    """Canonical nested-partition form, for isomorphism checks."""

    def canon(li: int, members: np.ndarray):
        if li >= len(tree.levels):
            return tuple(sorted(["leaf"] * len(members)))
        lev = tree.levels[li]
        kids = [c for c, g in enumerate(lev.classes) if np.isin(g, members).all()]
        return tuple(sorted(canon(li + 1, lev.classes[c]) for c in kids))

    return canon(0, np.arange(len(tree.leaf_centers)))


# -- overlap supports --------------------------------------------------------------

@dataclass
class SupportReport:
    grid: np.ndarray
    gibbs_frequency: np.ndarray
    ground_frequency: np.ndarray | None
    checked: np.ndarray
    inclusion_pass: bool
    margins: np.ndarray
    flags: list[str]

    def rows(self) -> list[dict]:
        out = []
        for i, q in enumerate(self.grid):
            out.append({
                "q": float(q),
                "gibbs_frequency": float(self.gibbs_frequency[i]),
                "ground_frequency": None if self.ground_frequency is None else float(self.ground_frequency[i]),
                "checked": bool(self.checked[i]),
                "margin": float(self.margins[i]),
            })
        return out


def _as_matrix(obj) -> np.ndarray:
    if isinstance(obj, OverlapMatrix):
        return obj.values
    arr = np.asarray(getattr(obj, "points", obj), dtype=float)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1] and np.allclose(np.diag(arr), 1.0) \
            and np.all(np.abs(arr) <= 1 + 1e-12):
        return arr
    return overlap_matrix(arr).values


def overlap_support(gibbs_sets: Sequence, grid: Sequence[float], eps: float = 0.05,
                    N: int | None = None, delta: float = 0.01, mass_threshold: float | None = None,
                    ground_sets: Sequence | None = None, check_points: Sequence[float] | None = None,
                    majority: float = 0.5) -> SupportReport:
    """Empirical supports of overlap distributions across disorder draws.

    Gibbs side: q is in the support for a draw when the fraction of replica
    pairs with |R - q| < eps exceeds ``mass_threshold`` (default exp(-N delta)).
    Ground side: a pair of near-ground configurations with |R - q| < eps
    exists. The inclusion ground-support in Gibbs-support is checked on
    ``check_points`` (default: grid points where the ground side is supported).
    """
    grid = np.asarray(grid, dtype=float)
    if mass_threshold is None:
        if N is None:
            raise ValueError("give N or mass_threshold")
        mass_threshold = math.exp(-N * delta)
    flags = []
    if len(gibbs_sets) < 10:
        flags.append("low-power")

    def freq(sets, exist: bool):
        hits = np.zeros(grid.size)
        for S in sets:
            R = _as_matrix(S)
            off = R[np.triu_indices(R.shape[0], 1)]
            if off.size == 0:
                continue
            near = np.abs(off[None, :] - grid[:, None]) < eps
            hits += near.any(axis=1) if exist else (near.mean(axis=1) > mass_threshold)
        return hits / max(len(sets), 1)

    g = freq(gibbs_sets, exist=False)
    gr = None
    if ground_sets is not None:
        if len(ground_sets) < 10 and "low-power" not in flags:
            flags.append("low-power")
        gr = freq(ground_sets, exist=True)
    if check_points is not None:
        checked = np.array([np.any(np.abs(np.asarray(check_points) - q) <= eps / 2) for q in grid])
    elif gr is not None:
        checked = gr > majority
    else:
        checked = np.zeros(grid.size, dtype=bool)
    margins = g - majority
    if gr is not None:
        inclusion = bool(np.all(g[checked & (gr > majority)] > majority))
    else:
        inclusion = True
    return SupportReport(grid, g, gr, checked, inclusion, margins, flags)
