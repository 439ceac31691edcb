"""Pure-numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_core`` module; selected by
``spinlab.kernels`` when the extension is unavailable.
"""

from __future__ import annotations

import math

import numpy as np


def _contract_rows(flat, p, X):
    n = X.shape[1]
    C = X.shape[0]
    M = flat.reshape(-1, n) @ X.T
    for _ in range(p - 1):
        M = np.einsum("anc,cn->ac", M.reshape(-1, n, C), X)
    return M.reshape(C)


def energies(tensors, degrees, amps, X):
    """H at each row of X for a Hamiltonian given by flattened coupling tensors."""
    X = np.ascontiguousarray(X, dtype=float)
    out = np.zeros(X.shape[0])
    for flat, p, a in zip(tensors, degrees, amps):
        out += a * _contract_rows(flat, int(p), X)
    return out


def run_chains(tensors, degrees, amps, X, E, beta, step, noise, unif,
               radius_sq, band_dir=None, band_lo=-2.0, band_hi=2.0):
    """Advance C Metropolis chains on the sphere of radius sqrt(N radius_sq).

    Each step draws a tangent Gaussian move ``step * P_perp(noise)``, maps it
    back to the sphere by normalization and accepts with prob
    ``min(1, exp(-beta dE))``; moves leaving the band (t outside
    [band_lo, band_hi], t = <x, band_dir>/sqrt(N)) are rejected. ``X`` and
    ``E`` are updated in place. Returns (accepted, band_rejected) counts.
    """
    S, C, N = noise.shape
    R = math.sqrt(N * radius_sq)
    sqN = math.sqrt(N)
    accepted = np.zeros(C, dtype=np.int64)
    rejected_band = np.zeros(C, dtype=np.int64)
    for s in range(S):
        xi = noise[s]
        xhat = X / R
        v = xi - np.sum(xi * xhat, axis=1, keepdims=True) * xhat
        Y = X + step[:, None] * v
        Y *= R / np.linalg.norm(Y, axis=1, keepdims=True)
        ok = np.ones(C, dtype=bool)
        if band_dir is not None:
            t = Y @ band_dir / sqN
            ok = (t >= band_lo) & (t <= band_hi)
            rejected_band += ~ok
        Ey = energies(tensors, degrees, amps, Y)
        dE = Ey - E
        with np.errstate(over="ignore"):
            acc = ok & ((dE <= 0) | (unif[s] < np.exp(-beta * dE)))
        X[acc] = Y[acc]
        E[acc] = Ey[acc]
        accepted += acc
    return accepted, rejected_band


def cs_functional(atoms, masses, dnu_values, beta2):
    """Crisanti-Sommers functional for a step distribution function.

    ``atoms`` q_1 <= ... <= q_k < 1 are the jump points and ``masses`` the
    cumulative values x = m_j on [q_j, q_{j+1}) (m_k = 1). ``dnu_values`` is
    nu evaluated at [q_1, ..., q_k, 1]. Returns
    1/2 [beta^2 int nu' x + int_0^{q_k} dq / xhat + log(1 - q_k)].
    """
    k = len(atoms)
    qk = atoms[k - 1]
    if qk >= 1.0:
        return math.inf
    # energy term: sum_j m_j (nu(q_{j+1}) - nu(q_j))
    a = 0.0
    for j in range(k):
        a += masses[j] * (dnu_values[j + 1] - dnu_values[j])
    # xhat at the jump points, from the right end
    X = [0.0] * (k + 1)
    X[k - 1] = 1.0 - qk
    for j in range(k - 2, -1, -1):
        X[j] = X[j + 1] + masses[j] * (atoms[j + 1] - atoms[j])
    b = atoms[0] / X[0]
    for j in range(k - 1):
        d = atoms[j + 1] - atoms[j]
        if d <= 0.0:
            continue
        m = masses[j]
        z = m * d / X[j + 1]
        if z < 1e-8:
            # log1p(z)/m = d/X * (1 - z/2 + z^2/3)
            b += d / X[j + 1] * (1.0 - 0.5 * z + z * z / 3.0)
        else:
            b += math.log1p(z) / m
    return 0.5 * (beta2 * a + b + math.log(1.0 - qk))
