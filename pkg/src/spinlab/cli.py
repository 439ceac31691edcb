"""Command-line driver: config-driven experiments with manifests and CSV/JSON output.

    spinlab parisi --config cfg.json --out results/
    spinlab selftest

Exit codes: 0 success, 2 invalid config, 3 capacity, 4 results flagged (or
failed self-test checks).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy import stats

from . import __version__, groundstate, kernels, parisi, sampler, states, tap
from .geometry import BandSpec
from .hamiltonian import CapacityError, check_capacity, sample_disorder, uniform_sphere
from .mixture import Mixture, MixtureError

log = logging.getLogger("spinlab")

KINDS = ("simulate", "free-energy", "ground-state", "parisi", "tap", "states", "landscape")
EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_FLAGGED = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    kind: str
    mixture: dict
    N: int = 64
    beta: float = 1.0
    betas: list | None = None
    q: float = 0.5
    schedules: dict = field(default_factory=dict)  # delta, rho, m
    seed: int = 0
    out: str = "results"
    options: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        return validate_config(obj)

    def mixture_obj(self) -> Mixture:
        return Mixture.from_json(self.mixture)

    def schedule(self, name: str):
        val = self.schedules.get(name)
        if val is not None:
            return val
        defaults = sampler.default_schedules(self.N)
        return defaults[name]


def _number(obj, key, path, kind=float, lo=None, hi=None, lo_open=False):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    v = kind(v)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v}")
    return v


def validate_config(obj: dict) -> ExperimentConfig:
    """Check a raw config dict; errors name the offending field path."""
    if not isinstance(obj, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    for key in obj:
        if key not in known:
            raise ConfigError(key, "unknown field")
    if "kind" not in obj:
        raise ConfigError("kind", "missing")
    if obj["kind"] not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
    if "mixture" not in obj:
        raise ConfigError("mixture", "missing")
    if not isinstance(obj["mixture"], dict):
        raise ConfigError("mixture", "must be an object mapping degree to coefficient")
    try:
        Mixture.from_json(obj["mixture"])
    except MixtureError as exc:
        raise ConfigError(f"mixture.{exc}".split(":")[0], str(exc).split(": ", 1)[-1]) from None
    out = dict(obj)
    if "N" in obj:
        out["N"] = _number(obj, "N", "N", int, lo=2)
    if "beta" in obj:
        out["beta"] = _number(obj, "beta", "beta", float, lo=0.0)
    if obj.get("betas") is not None:
        if not isinstance(obj["betas"], list) or not obj["betas"]:
            raise ConfigError("betas", "must be a non-empty list")
        out["betas"] = [_number(obj["betas"], i, f"betas.{i}", float, lo=0.0) for i in range(len(obj["betas"]))]
    if "q" in obj:
        out["q"] = _number(obj, "q", "q", float, lo=0.0, hi=1.0, lo_open=True)
    if "seed" in obj:
        out["seed"] = _number(obj, "seed", "seed", int, lo=0, hi=2**64 - 1)
    sch = obj.get("schedules", {}) or {}
    if not isinstance(sch, dict):
        raise ConfigError("schedules", "must be an object")
    for key in sch:
        if key not in ("delta", "rho", "m"):
            raise ConfigError(f"schedules.{key}", "unknown schedule")
    if sch.get("delta") is not None:
        _number(sch, "delta", "schedules.delta", float, lo=0.0, hi=1.0, lo_open=True)
    if sch.get("rho") is not None:
        _number(sch, "rho", "schedules.rho", float, lo=0.0, hi=1.0, lo_open=True)
    if sch.get("m") is not None:
        _number(sch, "m", "schedules.m", int, lo=1)
    if "options" in obj and not isinstance(obj["options"], dict):
        raise ConfigError("options", "must be an object")
    if "out" in obj and not isinstance(obj["out"], str):
        raise ConfigError("out", "must be a path string")
    return ExperimentConfig(**out)


# -- landscape -------------------------------------------------------------------

def landscape_scan(cfg: ExperimentConfig) -> dict:
    """Band, constrained and centered free energies at centers drawn at
    several energy levels on S^{N-1}(q)."""
    m = cfg.mixture_obj()
    N, beta, q = cfg.N, cfg.beta, cfg.q
    opts = cfg.options
    d = sample_disorder(m, N, cfg.seed)
    delta = cfg.schedule("delta")
    rho = cfg.schedule("rho")
    reps = int(cfg.schedule("m"))
    chain = sampler.ChainOptions(**opts.get("chain", {"n_chains": 4, "n_samples": 100, "thin": 10,
                                                      "burn_in": 1000}))
    chain = sampler.with_seed(chain, cfg.seed)
    grid_size = int(opts.get("grid_size", 9))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(11,)))
    centers = []
    for i in range(int(opts.get("uniform", 2))):
        centers.append(("uniform", uniform_sphere(rng, N, 1, q)[0]))
    n_temp = int(opts.get("tempered", 1))
    if n_temp:
        ss = sampler.mcmc_chain(d, beta, opts=chain)
        pick = rng.choice(len(ss), size=n_temp, replace=False)
        for p in pick:
            x = ss.points[p]
            centers.append(("tempered", x * math.sqrt(N * q) / np.linalg.norm(x)))
    for i in range(int(opts.get("near_ground", 1))):
        gs = groundstate.minimize_on_sphere(d, q, int(opts.get("restarts", 4)),
                                            groundstate.GroundStateOptions(seed=cfg.seed + i))
        centers.append(("near-ground", gs.minimizer))
    rows = []
    flags = set()
    for idx, (kind, c) in enumerate(centers):
        band = BandSpec(c, delta)
        res = sampler.centered_constrained_fe(d, beta, band, reps, rho, q, grid_size, chain,
                                              trials=int(opts.get("trials", 2000)))
        flags |= set(res["centered"].flags)
        rows.append({
            "center": idx,
            "kind": kind,
            "energy_per_site": res["center_energy_per_site"],
            "F_band": res["band"].value,
            "F_band_se": res["band"].std_error,
            "F_constrained": res["constrained"].value,
            "F_centered": res["centered"].value,
            "std_error": res["centered"].std_error,
            "flags": ";".join(res["centered"].flags),
        })
    e = np.array([-r["energy_per_site"] for r in rows])
    f = np.array([r["F_band"] for r in rows])
    # undefined for fewer than three centers or a flat column (beta = 0)
    varied = len(rows) > 2 and np.ptp(e) > 0 and np.ptp(f) > 0
    rank = float(stats.spearmanr(e, f).statistic) if varied else float("nan")
    return {"rows": rows, "rank_correlation": rank, "flags": sorted(flags),
            "delta": delta, "rho": rho, "m": reps}


# -- pipelines ---------------------------------------------------------------------

def _chain_opts(cfg: ExperimentConfig) -> sampler.ChainOptions:
    c = dict(cfg.options.get("chain", {}))
    c.setdefault("seed", cfg.seed)
    return sampler.ChainOptions(**c)


def _band(cfg: ExperimentConfig, N: int):
    spec = cfg.options.get("band")
    if not spec:
        return None
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(13,)))
    center = uniform_sphere(rng, N, 1, cfg.q)[0]
    return BandSpec(center, cfg.schedule("delta"))


def _run_simulate(cfg, out: Path):
    d = sample_disorder(cfg.mixture_obj(), cfg.N, cfg.seed)
    band = _band(cfg, cfg.N)
    ss = sampler.mcmc_chain(d, cfg.beta, band=band, opts=_chain_opts(cfg), ladder=cfg.betas)
    if cfg.options.get("dump_samples", False):
        ss.save(out / "samples.bin")
    tr = ss.energy_traces()
    mean, se = sampler.batch_mean_error(tr)
    rhat = sampler.split_rhat(tr)
    flags = ["rhat"] if rhat > sampler.RHAT_LIMIT else []
    rows = [
        {"quantity": "energy_per_site", "value": mean / cfg.N, "std_error": se / cfg.N, "method": "mcmc",
         "flags": ";".join(flags)},
        {"quantity": "acceptance", "value": ss.acceptance, "std_error": 0.0, "method": "mcmc", "flags": ""},
        {"quantity": "rhat", "value": rhat, "std_error": 0.0, "method": "mcmc", "flags": ""},
    ]
    return rows, {"energy_per_site": mean / cfg.N}, flags


def _run_free_energy(cfg, out: Path):
    d = sample_disorder(cfg.mixture_obj(), cfg.N, cfg.seed)
    band = _band(cfg, cfg.N)
    grid = int(cfg.options.get("grid_size", 17))
    if band is None:
        est = sampler.free_energy_ti(d, cfg.beta, grid, _chain_opts(cfg))
    else:
        est = sampler.band_free_energy(d, cfg.beta, band, grid, _chain_opts(cfg))
    m = cfg.mixture_obj()
    annealed = 0.5 * cfg.beta**2 * m.variance
    checks = {"annealed_bound": est.value <= annealed + 3 * est.std_error}
    return [est.row("free_energy")], {"value": est.value, "std_error": est.std_error, "checks": checks}, est.flags


def _run_ground_state(cfg, out: Path):
    d = sample_disorder(cfg.mixture_obj(), cfg.N, cfg.seed)
    qs = cfg.options.get("qs", [1.0])
    restarts = int(cfg.options.get("restarts", 8))
    results = [groundstate.minimize_on_sphere(d, float(q), restarts, groundstate.GroundStateOptions(seed=cfg.seed))
               for q in qs]
    flags = [] if all(r.converged for r in results) else ["not-converged"]
    return [r.row() for r in results], {"values": [r.value_per_site for r in results]}, flags


def _run_parisi(cfg, out: Path):
    m = cfg.mixture_obj()
    k = int(cfg.options.get("k", 2))
    betas = cfg.betas or [cfg.beta]
    rows, summary, flags = [], {}, []
    for b in betas:
        if b <= 0:
            raise ConfigError("beta", "must be > 0 for the Parisi solver")
        x, v = parisi.solve(m, b, k, parisi.SolveOptions(seed=cfg.seed))
        rep = parisi.validate(x, m, b, float(cfg.options.get("tol", 1e-6)))
        holds, worst, margin = parisi.rs_condition(m, b, x.q_max)
        flags += x.meta.get("flags", [])
        rows.append({"beta": b, "value": v, "atoms": json.dumps(x.atoms.tolist()),
                     "weights": json.dumps(x.weights.tolist()), "validate_passed": rep.passed,
                     "rs_condition": holds})
        summary[str(b)] = {"value": v, "measure": x.to_json(), "report": rep.to_json(),
                           "rs_condition": {"holds": holds, "worst_t": worst, "margin": margin}}
        (out / f"measure_beta{b:g}.json").write_text(json.dumps(x.to_json(), indent=2))
    if cfg.options.get("zero_temperature"):
        zt = parisi.zero_temperature_fit(m)
        summary["E_star"] = zt["E_star"]
        flags += zt["flags"]
        rows.append({"beta": "inf", "value": zt["E_star"], "atoms": "", "weights": "",
                     "validate_passed": "", "rs_condition": ""})
    if len(betas) == 1:
        summary["value"] = summary[str(betas[0])]["value"]
    return rows, summary, flags


def _run_tap(cfg, out: Path):
    m = cfg.mixture_obj()
    rep = tap.tap_consistency(m, cfg.beta, tol=float(cfg.options.get("tol", 5e-3)))
    prof = rep.pop("profile")
    prof.write_csv(out / "profile.csv", cfg.beta)
    (out / "report.json").write_text(json.dumps(rep, indent=2, default=_jsonable))
    return prof.rows(cfg.beta), {"profile_sup": rep["profile_sup"], "parisi_value": rep["parisi_value"],
                                 "checks": rep["checks"]}, rep["flags"]


def _run_states(cfg, out: Path):
    d = sample_disorder(cfg.mixture_obj(), cfg.N, cfg.seed)
    ss = sampler.mcmc_chain(d, cfg.beta, opts=_chain_opts(cfg), ladder=cfg.betas)
    M = states.overlap_matrix(ss)
    edges, pmf = states.overlap_histogram(M, int(cfg.options.get("bins", 41)))
    q_star = float(cfg.options.get("q_star", 0.5))
    eps = float(cfg.options.get("eps", 0.1))
    dec = states.cluster_states(ss, q_star, eps)
    defect = states.ultrametricity_defect(M, eps)
    rows = [{"bin_lo": float(a), "bin_hi": float(b), "mass": float(p)} for a, b, p in zip(edges[:-1], edges[1:], pmf)]
    summary = {"clusters": dec.n_clusters, "weights": dec.weights.tolist(),
               "violation_fraction": dec.violation_fraction, "ultrametricity_defect": defect}
    return rows, summary, dec.flags


def _run_landscape(cfg, out: Path):
    res = landscape_scan(cfg)
    return res["rows"], {"rank_correlation": res["rank_correlation"], "delta": res["delta"],
                         "rho": res["rho"], "m": res["m"]}, res["flags"]


PIPELINES = {
    "simulate": _run_simulate,
    "free-energy": _run_free_energy,
    "ground-state": _run_ground_state,
    "parisi": _run_parisi,
    "tap": _run_tap,
    "states": _run_states,
    "landscape": _run_landscape,
}


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(type(obj).__name__)


def _write_rows(rows: list[dict], path: Path, fmt: str) -> Path:
    if fmt == "json":
        p = path.with_suffix(".json")
        p.write_text(json.dumps(rows, indent=2, default=_jsonable))
        return p
    p = path.with_suffix(".csv")
    fields = []
    for r in rows:
        for k in r:
            if k not in fields:
                fields.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    p.write_text(buf.getvalue())
    return p


def manifest(cfg: ExperimentConfig, threads: int) -> dict:
    return {
        "config": cfg.to_json(),
        "versions": {"spinlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version(), "kernels": kernels.BACKEND},
        "seeds": {"master": cfg.seed},
        "threads": threads,
    }


def run(cfg: ExperimentConfig, out: Path | None = None, fmt: str = "csv", threads: int = 1) -> int:
    """Execute a pipeline and write manifest, results and summary. Returns the exit code."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    m = cfg.mixture_obj()
    if cfg.kind in ("simulate", "free-energy", "ground-state", "states", "landscape"):
        check_capacity(m, cfg.N)
    (out / "manifest.json").write_text(json.dumps(manifest(cfg, threads), indent=2, sort_keys=True))
    rows, summary, flags = PIPELINES[cfg.kind](cfg, out)
    _write_rows(rows, out / "results", fmt)
    summary = {"kind": cfg.kind, "flags": sorted(set(flags)), **summary}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_jsonable))
    return EXIT_FLAGGED if flags else EXIT_OK


def _threads(arg) -> int:
    if arg is not None:
        return int(arg)
    env = os.environ.get("GLASS_THREADS")
    return int(env) if env else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in KINDS + ("selftest",):
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON experiment config")
        s.add_argument("--out", type=Path, help="output directory")
        s.add_argument("--seed", type=int, help="master seed (overrides config)")
        s.add_argument("--threads", type=int, help="worker count (default: GLASS_THREADS or 1)")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                       help="override a top-level config field")
        if name == "selftest":
            s.add_argument("--only", type=int, action="append", help="run selected criteria")
    return p


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON ({exc})") from None
    raw.setdefault("kind", args.command)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=JSON")
        k, v = item.split("=", 1)
        try:
            raw[k] = json.loads(v)
        except json.JSONDecodeError:
            raw[k] = v
    if args.seed is not None:
        raw["seed"] = args.seed
    if raw["kind"] != args.command:
        raise ConfigError("kind", f"config kind {raw['kind']!r} does not match subcommand {args.command!r}")
    return validate_config(raw)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    threads = _threads(args.threads)
    if args.command == "selftest":
        from . import acceptance

        results = acceptance.run_all(only=args.only, stream=sys.stdout)
        return EXIT_OK if all(r.passed for r in results) else EXIT_FLAGGED
    try:
        cfg = load_config(args)
        return run(cfg, args.out, args.format, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
