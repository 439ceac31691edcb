"""Dense Gaussian p-spin Hamiltonians at desk-scale N."""

from __future__ import annotations

import itertools
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mixture import Mixture

GENERATOR_ID = "numpy-PCG64-seedseq-v1"
FORMAT_VERSION = 1
DEFAULT_BUDGET_BYTES = 1 << 30


class CapacityError(MemoryError):
    """Raised when the disorder tensors would not fit the memory budget."""


class DimensionError(ValueError):
    pass


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != dim:
        raise DimensionError(f"configuration length {x.shape[-1]} does not match N={dim}")
    return x, single


def contract(tensor: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Full contraction T(x, ..., x) for every row x of X (shape (C, N))."""
    p = tensor.ndim
    n = X.shape[1]
    M = tensor.reshape(-1, n) @ X.T  # (n^(p-1), C)
    for _ in range(p - 1):
        M = np.einsum("anc,cn->ac", M.reshape(-1, n, X.shape[0]), X)
    return M.reshape(X.shape[0])


def contract_but_one(tensor: np.ndarray, X: np.ndarray) -> np.ndarray:
    """T(x, ..., x, .) for each row of X; returns (C, N)."""
    p = tensor.ndim
    n = X.shape[1]
    C = X.shape[0]
    if p == 1:
        return np.broadcast_to(tensor, (C, n)).copy()
    # contract the leading p-1 axes
    M = X @ tensor.reshape(n, -1)  # (C, n^(p-1))
    for _ in range(p - 2):
        M = np.einsum("cn,cna->ca", X, M.reshape(C, n, -1))
    return M


def symmetrize(tensor: np.ndarray) -> np.ndarray:
    p = tensor.ndim
    perms = list(itertools.permutations(range(p)))
    out = np.zeros_like(tensor)
    for perm in perms:
        out += np.transpose(tensor, perm)
    return out / len(perms)


@dataclass(eq=False)
class Disorder:
    """One realization of the Gaussian couplings J^(p) for a mixture.

    Tensors are regenerated from ``(mixture, dim, seed, GENERATOR_ID)`` and
    created lazily, one independent substream per degree.
    """

    mixture: Mixture
    dim: int
    seed: int
    budget_bytes: int = DEFAULT_BUDGET_BYTES
    generator_id: str = GENERATOR_ID
    _tensors: dict = field(default_factory=dict, repr=False)
    _sym: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _override: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionError("N must be >= 2")
        if self.generator_id != GENERATOR_ID:
            raise ValueError(f"unknown generator id {self.generator_id!r}")
        check_capacity(self.mixture, self.dim, self.budget_bytes)

    @property
    def degrees(self) -> list[int]:
        return self.mixture.degrees

    def amplitude(self, p: int) -> float:
        """gamma_p N^{-(p-1)/2}."""
        return math.sqrt(self.mixture.coeffs[p]) * self.dim ** (-(p - 1) / 2)

    def tensor(self, p: int) -> np.ndarray:
        if p not in self.mixture.coeffs:
            raise KeyError(p)
        t = self._tensors.get(p)
        if t is None:
            with self._lock:
                t = self._tensors.get(p)
                if t is None:
                    if self._override is not None:
                        t = np.asarray(self._override[p], dtype=float)
                    else:
                        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(p,))
                        rng = np.random.Generator(np.random.PCG64(ss))
                        t = rng.standard_normal((self.dim,) * p)
                    t.setflags(write=False)
                    self._tensors[p] = t
        return t

    def symmetric_tensor(self, p: int) -> np.ndarray:
        s = self._sym.get(p)
        if s is None:
            s = symmetrize(self.tensor(p))
            s.setflags(write=False)
            with self._lock:
                self._sym[p] = s
        return s

    def materialize(self) -> "Disorder":
        for p in self.degrees:
            self.tensor(p)
        return self

    @property
    def is_materialized(self) -> bool:
        return all(p in self._tensors for p in self.degrees)

    def energy(self, x):
        return energy(self, x)

    def gradient(self, x):
        return gradient(self, x)

    # -- persistence -------------------------------------------------------
    def header(self) -> dict:
        return {
            "mixture": self.mixture.to_json(),
            "dim": self.dim,
            "seed": int(self.seed),
            "generator-id": self.generator_id,
            "format-version": FORMAT_VERSION,
        }

    def save(self, path, raw: bool = False) -> None:
        path = Path(path)
        path.write_text(json.dumps(self.header(), indent=2))
        if raw:
            with open(path.with_suffix(".f64"), "wb") as fh:
                for p in self.degrees:
                    fh.write(np.ascontiguousarray(self.tensor(p), dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, raw: bool = False) -> "Disorder":
        path = Path(path)
        h = json.loads(path.read_text())
        if h.get("format-version") != FORMAT_VERSION:
            raise ValueError(f"unsupported disorder format {h.get('format-version')}")
        d = cls(Mixture.from_json(h["mixture"]), int(h["dim"]), int(h["seed"]),
                generator_id=h["generator-id"])
        if raw:
            buf = np.fromfile(path.with_suffix(".f64"), dtype="<f8")
            off = 0
            tensors = {}
            for p in d.degrees:
                size = d.dim**p
                tensors[p] = buf[off:off + size].reshape((d.dim,) * p).astype(float)
                off += size
            d._override = tensors
        return d

    @classmethod
    def from_tensors(cls, mixture: Mixture, tensors: dict, seed: int = -1) -> "Disorder":
        dim = next(iter(tensors.values())).shape[0]
        d = cls(mixture, dim, seed)
        d._override = {p: np.asarray(t, dtype=float) for p, t in tensors.items()}
        return d


def tensor_bytes(mixture: Mixture, N: int) -> dict[int, int]:
    return {p: 8 * N**p for p in mixture.degrees}


def check_capacity(mixture: Mixture, N: int, budget_bytes: int = DEFAULT_BUDGET_BYTES) -> None:
    total = 0
    for p, b in tensor_bytes(mixture, N).items():
        total += b
        if total > budget_bytes:
            raise CapacityError(
                f"degree {p} tensor at N={N} needs {b} bytes; "
                f"total {total} exceeds budget {budget_bytes}"
            )


def sample_disorder(m: Mixture, N: int, seed: int, budget_bytes: int = DEFAULT_BUDGET_BYTES) -> Disorder:
    return Disorder(m, N, seed, budget_bytes=budget_bytes)


def energy(d: Disorder, x):
    """H_N at one configuration (1-D) or each row of a batch (2-D).

    Valid anywhere in R^N, in particular inside the ball.
    """
    X, single = _as_batch(x, d.dim)
    out = np.zeros(X.shape[0])
    for p in d.degrees:
        out += d.amplitude(p) * contract(d.tensor(p), X)
    return float(out[0]) if single else out


def energy_terms(d: Disorder, x) -> dict[int, float]:
    X, _ = _as_batch(x, d.dim)
    return {p: float(d.amplitude(p) * contract(d.tensor(p), X)[0]) for p in d.degrees}


def gradient(d: Disorder, x):
    """Euclidean gradient of H_N."""
    X, single = _as_batch(x, d.dim)
    out = np.zeros_like(X)
    for p in d.degrees:
        out += d.amplitude(p) * p * contract_but_one(d.symmetric_tensor(p), X)
    return out[0] if single else out


def theoretical_covariance(m: Mixture, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionError("configurations differ in length")
    N = x.shape[0]
    return N * float(m(float(x @ y) / N))


@dataclass
class SectionHamiltonian:
    """Hamiltonian on the cross-section through sigma_0 = (0, ..., 0, sqrt(Nq)).

    ``energy(s)`` takes s on the (N-1)-sphere of radius sqrt(N-1); the matching
    point of the N-dimensional cross-section is ``embed(s)``.
    """

    dim: int  # N of the parent model
    q: float
    tensors: dict  # k -> k-tensor over N-1 coordinates (k >= 1)

    @property
    def scale(self) -> float:
        return math.sqrt(self.dim * (1.0 - self.q) / (self.dim - 1))

    def embed(self, s):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        tail = np.full((s.shape[0], 1), math.sqrt(self.dim * self.q))
        return np.hstack([self.scale * s, tail])

    def energy(self, s):
        S, single = _as_batch(s, self.dim - 1)
        U = self.scale * S
        out = np.zeros(S.shape[0])
        for k, t in self.tensors.items():
            out += contract(t, U)
        return float(out[0]) if single else out


def restrict_to_section(d: Disorder, q: float) -> tuple[float, SectionHamiltonian]:
    """Regroup the couplings around the canonical axis point at radius^2 q.

    Returns ``(H(sigma_0), section)`` with ``H(embed(s)) = H(sigma_0) + section.energy(s)``
    as an exact algebraic identity: each ordered index tuple of J^(p) is split by
    which positions hit the last coordinate.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0,1), got {q}")
    if not d.is_materialized:
        raise ValueError("disorder tensors must be materialized first")
    N = d.dim
    a = math.sqrt(N * q)
    last = N - 1
    body = slice(0, N - 1)
    h0 = 0.0
    out: dict[int, np.ndarray] = {}
    for p in d.degrees:
        J = d.tensor(p)
        amp = d.amplitude(p)
        for mask in itertools.product((False, True), repeat=p):
            k = sum(mask)
            idx = tuple(body if inside else last for inside in mask)
            block = J[idx]
            coef = amp * a ** (p - k)
            if k == 0:
                h0 += coef * float(block)
                continue
            acc = out.get(k)
            if acc is None:
                out[k] = coef * np.array(block)
            else:
                acc += coef * block
    return h0, SectionHamiltonian(N, q, dict(sorted(out.items())))


def uniform_sphere(rng: np.random.Generator, N: int, count: int, radius_sq: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((count, N))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * math.sqrt(N * radius_sq)
