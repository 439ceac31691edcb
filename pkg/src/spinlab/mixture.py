"""Mixture polynomials nu(x) = sum_p gamma_p^2 x^p and their transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import gammaln

P_MAX_CAP = 32


class MixtureError(ValueError):
    """Raised for invalid mixture coefficients or transform arguments."""


def _binom(p: int, k: int) -> float:
    if p <= 20:
        return float(math.comb(p, k))
    return math.exp(gammaln(p + 1) - gammaln(k + 1) - gammaln(p - k + 1))


@dataclass(frozen=True)
class Mixture:
    """Finite mixture with coefficients ``coeffs[p] = gamma_p^2``.

    Zero coefficients are dropped on construction, so ``degrees`` lists only
    the p-spin components actually present.
    """

    coeffs: Mapping[int, float]
    _arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for p, c in dict(self.coeffs).items():
            p = int(p)
            c = float(c)
            if p < 1:
                raise MixtureError(f"coeffs.{p}: degree must be >= 1")
            if p > P_MAX_CAP:
                raise MixtureError(f"coeffs.{p}: degree exceeds cap {P_MAX_CAP}")
            if not math.isfinite(c) or c < 0:
                raise MixtureError(f"coeffs.{p}: coefficient must be finite and >= 0, got {c}")
            if c > 0:
                clean[p] = c
        if not clean:
            raise MixtureError("coeffs: mixture needs at least one positive coefficient")
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))
        arr = np.zeros(max(clean) + 1)
        for p, c in clean.items():
            arr[p] = c
        object.__setattr__(self, "_arr", arr)

    @property
    def p_max(self) -> int:
        return len(self._arr) - 1

    @property
    def degrees(self) -> list[int]:
        return list(self.coeffs)

    @property
    def variance(self) -> float:
        """nu(1), the per-site variance of the Hamiltonian."""
        return float(self._arr.sum())

    def __call__(self, x, order: int = 0):
        return evaluate(self, x, order)

    def __hash__(self):
        return hash(tuple(self.coeffs.items()))

    def to_json(self) -> dict:
        return {str(p): c for p, c in self.coeffs.items()}

    @classmethod
    def from_json(cls, obj: Mapping[str, float]) -> "Mixture":
        try:
            coeffs = {int(k): v for k, v in obj.items()}
        except (TypeError, ValueError) as exc:
            raise MixtureError(f"coeffs: degree keys must be integers ({exc})") from None
        return cls(coeffs)

    @classmethod
    def pure(cls, p: int, scale: float = 1.0) -> "Mixture":
        return cls({p: scale})


def evaluate(m: Mixture, x, order: int = 0):
    """order-th derivative of nu at x (order <= 3 is exact; higher also exact)."""
    if order < 0:
        raise MixtureError("order must be >= 0")
    c = m._arr
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p in range(order, len(c)):
        if c[p] == 0.0:
            continue
        fall = math.perm(p, order)
        out = out + c[p] * fall * x ** (p - order)
    return out if out.ndim else float(out)


def restrict(m: Mixture, q: float) -> Mixture:
    """Mixture nu_q of the Hamiltonian restricted to a cross-section at radius^2 q.

    alpha_k^2 = (1-q)^k sum_{p>=k} gamma_p^2 C(p,k) q^(p-k), k >= 1, which
    resums to nu_q(x) = nu(q + (1-q) x) - nu(q).
    """
    if not 0.0 < q < 1.0:
        raise MixtureError(f"restrict: q must lie in (0,1), got {q}")
    return Mixture(restriction_coeffs(m, q, include_zero=False))


def restriction_coeffs(m: Mixture, q: float, include_zero: bool = False) -> dict[int, float]:
    """alpha_k^2(sqrt q) for k >= 1, and k = 0 (= nu(q)) when include_zero."""
    out = {}
    start = 0 if include_zero else 1
    for k in range(start, m.p_max + 1):
        s = 0.0
        for p, g2 in m.coeffs.items():
            if p >= k:
                s += g2 * _binom(p, k) * q ** (p - k)
        out[k] = (1.0 - q) ** k * s
    return out


def drop_one_spin(m: Mixture) -> Mixture:
    """Remove the degree-1 (external-field-like) component."""
    rest = {p: c for p, c in m.coeffs.items() if p != 1}
    if not rest:
        raise MixtureError("drop_one_spin: no coefficient left after removing degree 1")
    return Mixture(rest)


def inner_sphere(m: Mixture, q: float) -> Mixture:
    """Mixture of H restricted to the inner sphere of radius sqrt(Nq), rescaled: q^p gamma_p^2."""
    if not 0.0 < q <= 1.0:
        raise MixtureError(f"inner_sphere: q must lie in (0,1], got {q}")
    return Mixture({p: q**p * c for p, c in m.coeffs.items()})


def restrict_two(m: Mixture, q: float) -> Mixture:
    """nu_{q,2}: the restriction with the degree-1 term dropped."""
    return drop_one_spin(restrict(m, q))


def genericity_report(m: Mixture) -> dict:
    odd = [p for p in m.degrees if p % 2 == 1]
    even = [p for p in m.degrees if p % 2 == 0]
    return {
        "odd_degrees": odd,
        "even_degrees": even,
        "odd_represented": bool(odd),
        "even_represented": bool(even),
        "odd_harmonic_sum": sum(1.0 / p for p in odd),
        "even_harmonic_sum": sum(1.0 / p for p in even),
        # both harmonic sums must diverge, impossible with finitely many terms
        "generic": False,
        "note": "finite mixture: harmonic sums over present degrees are finite",
    }
