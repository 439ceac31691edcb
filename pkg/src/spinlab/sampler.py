"""Metropolis sampling of Gibbs measures on spheres and bands, and free-energy
estimators built on it (thermodynamic integration, band and constrained
free energies)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import BandSpec, band_log_volume, band_mask, sample_uniform_band
from .hamiltonian import Disorder, energy, uniform_sphere

log = logging.getLogger(__name__)

RHAT_LIMIT = 1.1
BAND_REJECT_LIMIT = 0.999


class TuningError(RuntimeError):
    def __init__(self, message: str, suggested_step: float):
        super().__init__(f"{message}; try step <= {suggested_step:.3g}")
        self.suggested_step = suggested_step


@dataclass
class ChainOptions:
    n_chains: int = 4
    n_samples: int = 200  # recorded states per chain
    thin: int = 10  # Metropolis steps between recorded states
    burn_in: int = 2000
    step: float | None = None  # initial proposal scale; tuned during burn-in
    tune: bool = True
    accept_window: tuple[float, float] = (0.3, 0.5)
    swap_interval: int = 10
    seed: int = 0
    backend: str | None = None  # "compiled" | "python" | None (auto)

    def kernel(self):
        return kernels.get(self.backend) if self.backend else kernels


@dataclass
class SampleSet:
    points: np.ndarray  # (n, N)
    energies: np.ndarray  # (n,)
    chain_ids: np.ndarray  # (n,)
    beta: float
    radius_sq: float = 1.0
    band: BandSpec | None = None
    thin: int = 1
    burn_in: int = 0
    seed: int = 0
    acceptance: float = float("nan")
    step: np.ndarray | None = None

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def energy_traces(self) -> np.ndarray:
        """Energies arranged as (chains, draws)."""
        ids = np.unique(self.chain_ids)
        return np.stack([self.energies[self.chain_ids == c] for c in ids])

    def check_constraints(self, tol: float = 1e-8) -> bool:
        r = np.einsum("ij,ij->i", self.points, self.points) / self.dim
        ok = np.all(np.abs(r - self.radius_sq) <= tol)
        if self.band is not None:
            ok = ok and bool(np.all(band_mask(self.points, self.band)))
        return bool(ok)

    def save(self, path) -> None:
        """Binary dump: int64 header (n, N) then little-endian float64 rows."""
        with open(path, "wb") as fh:
            fh.write(np.array(self.points.shape, dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(self.points, dtype="<f8").tobytes())

    @staticmethod
    def load_points(path) -> np.ndarray:
        raw = open(path, "rb").read()
        n, N = np.frombuffer(raw[:16], dtype="<i8")
        return np.frombuffer(raw[16:], dtype="<f8").reshape(int(n), int(N)).copy()


@dataclass
class FreeEnergyEstimate:
    value: float
    std_error: float
    method: str
    grid: np.ndarray = field(default_factory=lambda: np.zeros(1))
    flags: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    def row(self, quantity: str) -> dict:
        return {
            "quantity": quantity,
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method,
            "flags": ";".join(self.flags),
        }


# -- chain machinery -----------------------------------------------------------

def _model(d: Disorder):
    degrees = d.degrees
    return [d.tensor(p) for p in degrees], np.array(degrees), np.array([d.amplitude(p) for p in degrees])


def _initial_step(N: int, beta: float, band: BandSpec | None) -> float:
    eta = 1.0 / (1.0 + 2.0 * beta)
    if band is not None:
        eta = min(eta, band.width)
    return eta


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(chain,))))


class _Ensemble:
    """C chains at per-chain inverse temperatures, advanced in blocks."""

    def __init__(self, d: Disorder, betas: np.ndarray, radius_sq: float, band: BandSpec | None,
                 opts: ChainOptions, start: np.ndarray | None = None):
        self.d = d
        self.N = d.dim
        self.betas = np.ascontiguousarray(betas, dtype=float)
        self.C = len(self.betas)
        self.radius_sq = radius_sq
        self.band = band
        self.opts = opts
        self.kernel = opts.kernel()
        self.model = _model(d)
        self.rngs = [_chain_rng(opts.seed, c) for c in range(self.C)]
        if band is not None:
            if abs(radius_sq - 1.0) > 1e-12:
                raise ValueError("band-restricted chains live on the outer sphere")
            self.band_dir = band.direction
            lo, hi = band.interval
            r = math.sqrt(band.q)
            self.band_lo, self.band_hi = max(lo, r - band.width), min(hi, r + band.width)
        else:
            self.band_dir = None
            self.band_lo, self.band_hi = -2.0, 2.0
        if start is None:
            if band is not None:
                start = np.vstack([sample_uniform_band(band, rng, 1) for rng in self.rngs])
            else:
                start = np.vstack([uniform_sphere(rng, self.N, 1, radius_sq) for rng in self.rngs])
        self.X = np.ascontiguousarray(start, dtype=float).copy()
        self.E = np.ascontiguousarray(self.kernel.energies(*self.model, self.X))
        eta0 = opts.step if opts.step is not None else None
        self.step = np.array([eta0 if eta0 is not None else _initial_step(self.N, b, band) for b in self.betas])
        self.accepted = np.zeros(self.C, dtype=np.int64)
        self.attempted = 0
        self.band_rejected = np.zeros(self.C, dtype=np.int64)
        self.swaps_tried = np.zeros(max(self.C - 1, 1))
        self.swaps_done = np.zeros(max(self.C - 1, 1))

    def advance(self, steps: int):
        noise = np.empty((steps, self.C, self.N))
        unif = np.empty((steps, self.C))
        for c, rng in enumerate(self.rngs):
            noise[:, c, :] = rng.standard_normal((steps, self.N))
            unif[:, c] = rng.random(steps)
        acc, rej = self.kernel.run_chains(
            *self.model, self.X, self.E, self.betas, self.step, noise, unif,
            self.radius_sq, self.band_dir, self.band_lo, self.band_hi,
        )
        self.accepted += acc
        self.band_rejected += rej
        self.attempted += steps
        return acc, rej

    def tune(self, steps: int, window: tuple[float, float], block: int = 50):
        lo, hi = window
        done = 0
        while done < steps:
            n = min(block, steps - done)
            acc, rej = self.advance(n)
            done += n
            if self.band is not None and np.any(rej > BAND_REJECT_LIMIT * n) and n >= block:
                bad = int(np.argmax(rej))
                raise TuningError(
                    f"band rejection rate {rej[bad] / n:.4f} above {BAND_REJECT_LIMIT} for chain {bad}",
                    suggested_step=0.5 * self.band.width,
                )
            rate = acc / n
            self.step = np.where(rate > hi, self.step * 1.25, self.step)
            self.step = np.where(rate < lo, self.step / 1.25, self.step)
            self.step = np.minimum(self.step, 2.0)
        self.accepted[:] = 0
        self.band_rejected[:] = 0
        self.attempted = 0

    def swap(self, groups: list[np.ndarray], parity: int, rng: np.random.Generator):
        """Replica exchange between adjacent temperatures inside each group."""
        for idx in groups:
            for a in range(parity, len(idx) - 1, 2):
                i, j = idx[a], idx[a + 1]
                self.swaps_tried[a] += 1
                arg = (self.betas[i] - self.betas[j]) * (self.E[i] - self.E[j])
                if arg >= 0 or rng.random() < math.exp(arg):
                    self.X[[i, j]] = self.X[[j, i]]
                    self.E[[i, j]] = self.E[[j, i]]
                    self.swaps_done[a] += 1


def run_tempering(d: Disorder, betas: Sequence[float], radius_sq: float = 1.0,
                  band: BandSpec | None = None, opts: ChainOptions | None = None,
                  tempering: bool = True) -> dict:
    """Run ``opts.n_chains`` independent replica sets over a ladder of betas.

    Returns per-beta energy traces (n_chains, n_samples), recorded states and
    diagnostics. With ``tempering`` adjacent temperatures exchange states every
    ``opts.swap_interval`` steps (even/odd alternation).
    """
    opts = opts or ChainOptions()
    betas = np.asarray(betas, dtype=float)
    K = len(betas)
    R = opts.n_chains
    chain_beta = np.tile(betas, R)  # chain index = r*K + k
    groups = [np.arange(r * K, (r + 1) * K) for r in range(R)]
    ens = _Ensemble(d, chain_beta, radius_sq, band, opts)
    swap_rng = _chain_rng(opts.seed, 10**6)

    parity = 0  # even/odd pair alternation persists across sweeps

    def exchange():
        nonlocal parity
        if tempering and K > 1:
            ens.swap(groups, parity, swap_rng)
            parity ^= 1

    def sweep(steps):
        done = 0
        while done < steps:
            n = min(opts.swap_interval if tempering and K > 1 else steps - done, steps - done)
            ens.advance(n)
            done += n
            exchange()

    if opts.tune and opts.burn_in > 0:
        # tune in blocks of >= 50 steps so the acceptance estimate is meaningful
        tune_block = max(50, opts.swap_interval)
        done = 0
        while done < opts.burn_in:
            n = min(tune_block, opts.burn_in - done)
            ens.tune(n, opts.accept_window, block=n)
            done += n
            exchange()
    elif opts.burn_in > 0:
        sweep(opts.burn_in)
    ens.swaps_tried[:] = 0
    ens.swaps_done[:] = 0

    traces = np.empty((opts.n_samples, ens.C))
    states = np.empty((opts.n_samples, ens.C, ens.N))
    for s in range(opts.n_samples):
        sweep(opts.thin)
        traces[s] = ens.E
        states[s] = ens.X
    acc = ens.accepted / max(ens.attempted, 1)
    per_beta = {}
    for k, b in enumerate(betas):
        cols = [r * K + k for r in range(R)]
        per_beta[float(b)] = {
            "energies": traces[:, cols].T.copy(),  # (R, n_samples)
            "states": states[:, cols, :].transpose(1, 0, 2).copy(),  # (R, n_samples, N)
            "acceptance": float(acc[cols].mean()),
            "step": ens.step[cols].copy(),
        }
    pairs = max(K - 1, 1)
    swap_rate = ens.swaps_done[:pairs] / np.maximum(ens.swaps_tried[:pairs], 1)
    return {"betas": betas, "per_beta": per_beta, "swap_rate": swap_rate,
            "band_rejected": ens.band_rejected.copy()}


def mcmc_chain(d: Disorder, beta: float, radius_sq: float = 1.0, band: BandSpec | None = None,
               opts: ChainOptions | None = None, ladder: Sequence[float] | None = None) -> SampleSet:
    """Samples of the Gibbs measure exp(-beta H) on the sphere (optionally a band).

    With ``ladder`` the chains are part of a parallel-tempering run over the
    ladder (beta is inserted if missing) and the beta-level states are returned.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    opts = opts or ChainOptions()
    if ladder is not None:
        betas = np.unique(np.append(np.asarray(ladder, dtype=float), beta))
        run = run_tempering(d, betas, radius_sq, band, opts, tempering=True)
    else:
        run = run_tempering(d, [beta], radius_sq, band, opts, tempering=False)
    node = run["per_beta"][float(beta)]
    R, S, N = node["states"].shape
    return SampleSet(
        points=node["states"].reshape(R * S, N),
        energies=node["energies"].reshape(R * S),
        chain_ids=np.repeat(np.arange(R), S),
        beta=beta, radius_sq=radius_sq, band=band, thin=opts.thin,
        burn_in=opts.burn_in, seed=opts.seed, acceptance=node["acceptance"], step=node["step"],
    )


def geometric_ladder(beta_min: float, beta_max: float, ratio: float = 1.25) -> np.ndarray:
    n = max(2, int(math.ceil(math.log(beta_max / beta_min) / math.log(ratio))) + 1)
    return np.geomspace(beta_min, beta_max, n)


# -- diagnostics ---------------------------------------------------------------

def split_rhat(traces: np.ndarray) -> float:
    """Split-chain potential scale reduction for traces of shape (chains, draws)."""
    traces = np.asarray(traces, dtype=float)
    n = traces.shape[1] // 2
    if n < 2:
        return float("nan")
    halves = np.concatenate([traces[:, :n], traces[:, n:2 * n]], axis=0)
    means = halves.mean(axis=1)
    W = halves.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W == 0.0:
        return 1.0 if B == 0.0 else float("inf")
    var = (n - 1) / n * W + B / n
    return float(math.sqrt(var / W))


def batch_mean_error(traces: np.ndarray, batches_per_chain: int = 4) -> tuple[float, float]:
    """Mean and standard error from batch means over all chains."""
    traces = np.asarray(traces, dtype=float)
    C, S = traces.shape
    b = max(1, min(batches_per_chain, S))
    L = S // b
    bm = traces[:, : b * L].reshape(C, b, L).mean(axis=2).ravel()
    mean = float(traces.mean())
    if bm.size < 2:
        return mean, float("nan")
    return mean, float(bm.std(ddof=1) / math.sqrt(bm.size))


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.zeros_like(grid)
    h = np.diff(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


# -- free energies -------------------------------------------------------------

def _reference_energy(d: Disorder, band: BandSpec | None, count: int, seed: int) -> tuple[float, float]:
    """Mean energy under the beta=0 measure from exact i.i.d. uniform draws."""
    rng = _chain_rng(seed, 2 * 10**6)
    if band is None:
        pts = uniform_sphere(rng, d.dim, count)
    else:
        pts = sample_uniform_band(band, rng, count)
    e = energy(d, pts)
    return float(e.mean()), float(e.std(ddof=1) / math.sqrt(count))


def _integrate(d: Disorder, beta: float, grid_size: int, band: BandSpec | None,
               opts: ChainOptions, tempering: bool, method: str, anchor: float) -> FreeEnergyEstimate:
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta == 0.0:
        return FreeEnergyEstimate(anchor, 0.0, method, np.zeros(1), details={"anchor": anchor})
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    if grid_size % 2 == 0:
        grid_size += 1  # the half grid needs an odd node count
    N = d.dim
    grid = np.linspace(0.0, beta, grid_size)
    run = run_tempering(d, grid[1:], 1.0, band, opts, tempering=tempering)
    e0, se0 = _reference_energy(d, band, max(opts.n_chains * opts.n_samples, 1000), opts.seed)
    means = np.empty(grid_size)
    errs = np.empty(grid_size)
    rhat = np.empty(grid_size)
    means[0], errs[0], rhat[0] = -e0 / N, se0 / N, 1.0
    for i, b in enumerate(grid[1:], start=1):
        tr = run["per_beta"][float(b)]["energies"]
        m, se = batch_mean_error(tr)
        means[i], errs[i] = -m / N, se / N
        rhat[i] = split_rhat(tr)
    w = _trapezoid_weights(grid)
    value = anchor + float(w @ means)
    stat = float(math.sqrt(np.sum((w * errs) ** 2)))
    half = grid[::2]
    value_half = anchor + float(_trapezoid_weights(half) @ means[::2])
    refine = abs(value - value_half)
    flags = []
    if np.nanmax(rhat) > RHAT_LIMIT:
        flags.append("rhat")
    top = run["per_beta"][float(grid[-1])]
    return FreeEnergyEstimate(
        value=value,
        std_error=math.sqrt(stat**2 + refine**2),
        method=method,
        grid=grid,
        flags=flags,
        details={
            "anchor": anchor,
            "mean_minus_energy_per_site": means,
            "node_std_error": errs,
            "rhat": rhat,
            "statistical_error": stat,
            "grid_refinement": refine,
            "swap_rate": run["swap_rate"],
            "top_states": top["states"].reshape(-1, N),
            "top_energies": top["energies"].reshape(-1),
            "acceptance": {float(b): run["per_beta"][float(b)]["acceptance"] for b in grid[1:]},
        },
    )


def free_energy_ti(d: Disorder, beta: float, grid_size: int = 17, opts: ChainOptions | None = None,
                   tempering: bool = True) -> FreeEnergyEstimate:
    """F_N(beta) = (1/N) log Z by trapezoidal integration of <-H/N> from beta = 0."""
    return _integrate(d, beta, grid_size, None, opts or ChainOptions(), tempering, "ti", 0.0)


def band_free_energy(d: Disorder, beta: float, band: BandSpec, grid_size: int = 17,
                     opts: ChainOptions | None = None, tempering: bool = True) -> FreeEnergyEstimate:
    """Band free energy: exact log band volume plus integration over band-restricted chains."""
    anchor = band_log_volume(band.q, band.width, band.dim)
    return _integrate(d, beta, grid_size, band, opts or ChainOptions(), tempering, "band-ti", anchor)


# -- constrained replicas ------------------------------------------------------

def _clique_weights(adj: np.ndarray, m: int, trials: int, rng: np.random.Generator):
    """Sequential-greedy (Knuth) estimates for ordered m-cliques.

    Each trial picks vertices one at a time uniformly among those adjacent to
    every vertex chosen so far. ``prod(c_j / (K - j))`` is an unbiased estimate
    of the fraction of ordered m-tuples that are cliques. Returns the per-trial
    weights and the visited tuples.
    """
    K = adj.shape[0]
    weights = np.zeros(trials)
    tuples = np.full((trials, m), -1, dtype=np.int64)
    for t in range(trials):
        cand = np.ones(K, dtype=bool)
        w = 1.0
        for j in range(m):
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                w = 0.0
                break
            w *= idx.size / (K - j)
            v = idx[rng.integers(idx.size)]
            tuples[t, j] = v
            cand &= adj[v]
            cand[v] = False
        weights[t] = w
    return weights, tuples


def pair_constraint_graph(points: np.ndarray, q: float, rho: float) -> np.ndarray:
    Xn = points / np.linalg.norm(points, axis=1, keepdims=True)
    R = Xn @ Xn.T
    adj = np.abs(R - q) < rho
    np.fill_diagonal(adj, False)
    return adj


def constrained_probability(points: np.ndarray, m: int, rho: float, q: float, trials: int = 4000,
                            groups: int = 8, seed: int = 0) -> dict:
    """Probability that m i.i.d. draws satisfy |R_ij - q| < rho for all pairs,
    estimated from the empirical pool ``points``."""
    rng = np.random.default_rng(seed)
    K = points.shape[0]
    adj = pair_constraint_graph(points, q, rho)
    w, tuples = _clique_weights(adj, m, trials, rng)
    p = float(w.mean())
    # spread between disjoint sub-pools captures the finite-pool variability
    sub = []
    if groups >= 2 and K // groups >= m:
        perm = rng.permutation(K)
        for g in np.array_split(perm, groups):
            wg, _ = _clique_weights(adj[np.ix_(g, g)], m, max(trials // groups, 200), rng)
            sub.append(wg.mean())
    se_trials = float(w.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    se_pool = float(np.std(sub, ddof=1) / math.sqrt(len(sub))) if len(sub) >= 2 else 0.0
    return {"p": p, "se": math.hypot(se_trials, se_pool), "weights": w, "tuples": tuples,
            "adjacency": adj, "pool": K}


def conditional_overlap_prob(d: Disorder, beta: float, band: BandSpec, m: int, rho: float,
                             q: float | None = None, opts: ChainOptions | None = None,
                             samples: np.ndarray | None = None, trials: int = 4000,
                             seed: int = 0) -> FreeEnergyEstimate:
    """(1/(mN)) log P^{(x)m}{all pairs |R - q| < rho | band}, from a pool of
    band-restricted equilibrium draws."""
    if m < 2:
        raise ValueError("m must be >= 2")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0,1]")
    N = d.dim
    q = band.q if q is None else q
    if rho >= 1.0:
        # the constraint is vacuous on the band; the term is zero by definition
        return FreeEnergyEstimate(0.0, 0.0, "conditional-count", np.array([beta]),
                                  details={"vacuous": True})
    if samples is None:
        if beta == 0.0:
            samples = sample_uniform_band(band, _chain_rng(seed, 3 * 10**6), 400)
        else:
            samples = mcmc_chain(d, beta, band=band, opts=opts).points
    res = constrained_probability(samples, m, rho, q, trials=trials, seed=seed)
    p, se = res["p"], res["se"]
    flags = []
    if p <= 0.0:
        # one-sided bound: fewer than ~1 success in the trials
        flags.append("censored")
        value = math.log(1.0 / trials) / (m * N)
        return FreeEnergyEstimate(value, float("inf"), "conditional-count", np.array([beta]), flags,
                                  details={"upper_bound": True, **res})
    value = math.log(p) / (m * N)
    std = (se / p) / (m * N)
    return FreeEnergyEstimate(value, std, "conditional-count", np.array([beta]), flags, details=res)


def centered_constrained_fe(d: Disorder, beta: float, band: BandSpec, m: int, rho: float,
                            q: float | None = None, grid_size: int = 17,
                            opts: ChainOptions | None = None, trials: int = 4000,
                            tempering: bool = True) -> dict:
    """F(sigma_0, m, rho) and its centered version F^c = F(sigma_0,m,rho) + beta H(sigma_0)/N."""
    opts = opts or ChainOptions()
    band_fe = band_free_energy(d, beta, band, grid_size, opts, tempering)
    pool = band_fe.details.get("top_states")
    if beta == 0.0:
        pool = None
    if m == 1:
        # a single replica carries no pair constraint
        cond = FreeEnergyEstimate(0.0, 0.0, "conditional-count", np.array([beta]), details={"vacuous": True})
    else:
        cond = conditional_overlap_prob(d, beta, band, m, rho, q, opts, samples=pool, trials=trials,
                                        seed=opts.seed)
    h0 = energy(d, band.center) / d.dim
    err = math.hypot(band_fe.std_error, cond.std_error)
    flags = sorted(set(band_fe.flags) | set(cond.flags))
    constrained = FreeEnergyEstimate(band_fe.value + cond.value, err, "band-ti+conditional-count",
                                     band_fe.grid, flags)
    centered = FreeEnergyEstimate(constrained.value + beta * h0, err, "band-ti+conditional-count",
                                  band_fe.grid, flags)
    return {"band": band_fe, "conditional": cond, "constrained": constrained,
            "centered": centered, "center_energy_per_site": h0}


def constrained_gradient_norm(d: Disorder, beta: float, points: np.ndarray, m: int, rho: float,
                              q: float = 0.0, trials: int = 4000, seed: int = 0) -> float:
    """Estimate of the disorder-gradient norm of the constrained free energy.

    The gradient of (1/(mN)) log int_T exp(-beta sum H) in the couplings has
    squared norm (beta^2/N) sum_{i,i'} pi_i pi_i' nu(<s_i, s_i'>/N), where pi is
    the single-replica marginal of the constrained product measure; pi is
    estimated from weighted clique visits in the pool.
    """
    N = d.dim
    res = constrained_probability(points, m, rho, q, trials=trials, groups=0, seed=seed)
    w, tuples = res["weights"], res["tuples"]
    if w.sum() <= 0:
        raise RuntimeError("no admissible tuples in the pool")
    pi = np.zeros(points.shape[0])
    for wt, tup in zip(w, tuples):
        if wt > 0:
            pi[tup] += wt
    pi /= pi.sum()
    G = points @ points.T / N
    val = float(pi @ d.mixture(G) @ pi)
    return beta * math.sqrt(val / N)


def lipschitz_scale(mixture, beta: float, N: int, m: int, rho: float) -> float:
    """beta sqrt(nu(1) (1/m + rho (m-1)/m) / N), the coupling-space Lipschitz constant."""
    return beta * math.sqrt(mixture.variance / N * (1.0 / m + rho * (m - 1) / m))


def concentration_scale(mixture, beta: float, N: int, m: int, rho: float) -> float:
    """beta sqrt(nu(1) (1/m + rho) / N)."""
    return beta * math.sqrt(mixture.variance * (1.0 / m + rho) / N)


def default_schedules(N: int) -> dict:
    """Band width, overlap tolerance and replica count as slowly varying functions of N."""
    return {"delta": N ** -0.25, "rho": N ** -0.125, "m": int(math.ceil(math.log2(N)))}


def with_seed(opts: ChainOptions, seed: int) -> ChainOptions:
    return replace(opts, seed=seed)
