"""Compare the compiled kernels with the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--N 32 64 128] [--steps 200] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spinlab import kernels, sampler
from spinlab.hamiltonian import sample_disorder, uniform_sphere
from spinlab.mixture import Mixture


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(N: int, steps: int, chains: int, repeat: int) -> list[tuple[str, float, float]]:
    m = Mixture({2: 0.5, 3: 0.5})
    d = sample_disorder(m, N, seed=0)
    model = sampler._model(d)
    rng = np.random.default_rng(0)
    X0 = uniform_sphere(rng, N, chains)
    noise = rng.standard_normal((steps, chains, N))
    unif = rng.random((steps, chains))
    beta = np.ones(chains)
    step = np.full(chains, 1.0 / np.sqrt(N))
    rows = []
    for name, call in (
        ("energies", lambda k: k.energies(*model, X0)),
        ("run_chains", lambda k: k.run_chains(*model, X0.copy(), k.energies(*model, X0), beta, step,
                                              noise, unif, 1.0)),
    ):
        t = {b: best_of(lambda: call(kernels.get(b)), repeat) for b in ("compiled", "python")}
        rows.append((name, t["compiled"], t["python"]))
    return rows


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args(argv)
    try:
        kernels.get("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; reinstall with a C compiler and Cython")
    print(f"{'N':>5} {'kernel':>11} {'compiled s':>11} {'python s':>10} {'speedup':>8}")
    for N in a.N:
        for name, tc, tp in bench(N, a.steps, a.chains, a.repeat):
            print(f"{N:>5} {name:>11} {tc:>11.4f} {tp:>10.4f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
