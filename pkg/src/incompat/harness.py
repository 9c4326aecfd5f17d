"""Seeded Monte-Carlo experiments with config-declared pass/fail targets.

An experiment is a function ``(config, d, trial, rng) -> list of records``.
Every ``(trial, d)`` job draws from its own :class:`SeededRng` stream, so
the output does not depend on the worker count or on scheduling order.
Targets are reductions over record columns, declared in the JSON config.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import angles, criteria, sampling, sdp, spectra
from .errors import ConfigInvalid, IncompatError

CONFIG_DIR = Path(__file__).with_name("configs")
WORKERS_ENV = "INCOMPAT_WORKERS"
INV_SQRT2 = 1 / math.sqrt(2)


@dataclass
class ExperimentConfig:
    experiment: str
    dims: list = field(default_factory=lambda: [8])
    g: int = 2
    k: int = 2
    alphas: list = field(default_factory=lambda: [0.5, 0.5])
    t_grid: list = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    output_path: str | None = None
    params: dict = field(default_factory=dict)
    targets: list = field(default_factory=list)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown experiment {self.experiment!r}; known: {sorted(EXPERIMENTS)}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigInvalid("trials must be a positive integer")
        if not self.dims or any(int(d) != d or d < 1 for d in self.dims):
            raise ConfigInvalid("dims must be a non-empty list of positive integers")
        if self.g < 1 or self.k < 1:
            raise ConfigInvalid("g and k must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        for tg in self.targets:
            missing = {"name", "column", "reduce", "op", "threshold"} - set(tg)
            if missing:
                raise ConfigInvalid(f"target {tg.get('name', '?')} lacks {sorted(missing)}")
            if tg["reduce"] not in REDUCERS or tg["op"] not in OPS:
                raise ConfigInvalid(f"target {tg['name']}: bad reduce/op")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known - {"description"}
        if extra:
            raise ConfigInvalid(f"unknown config keys {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigInvalid("config needs an 'experiment' name")
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def load(cls, path_or_name) -> "ExperimentConfig":
        """Load a JSON config from a path, or a shipped config by file name or experiment name."""
        p = Path(path_or_name)
        if not p.exists():
            cand = CONFIG_DIR / p.name
            if not cand.suffix:
                cand = cand.with_suffix(".json")
            if not cand.exists():
                raise ConfigInvalid(f"no config at {path_or_name}")
            p = cand
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{p}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    records: list
    aggregates: dict
    targets: list
    passed: bool
    excluded: int
    wall_clock: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=1, sort_keys=True)

    def columns(self) -> list:
        cols = []
        for r in self.records:
            for key in r:
                if key not in cols:
                    cols.append(key)
        return cols

    def write_csv(self, fh) -> None:
        cols = self.columns()
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({c: _fmt(r.get(c)) for c in cols})

    def write(self, base) -> tuple[Path, Path]:
        base = Path(base)
        stem = base.with_suffix("") if base.suffix in (".json", ".csv") else base
        stem.parent.mkdir(parents=True, exist_ok=True)
        jpath, cpath = stem.with_suffix(".json"), stem.with_suffix(".csv")
        jpath.write_text(self.to_json() + "\n")
        with open(cpath, "w", newline="") as fh:
            self.write_csv(fh)
        return jpath, cpath


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def _param(cfg, key, default):
    return cfg.params.get(key, default)


# -- experiments -----------------------------------------------------------------

def _balanced_pair(d, a, b, rng):
    P = sampling.random_projection(d, int(math.floor(a * d)), rng)
    Q = sampling.random_projection(d, int(math.floor(b * d)), rng)
    return P, Q


def exp_two_proj_disc(cfg, d, trial, rng):
    a, b = (cfg.alphas + cfg.alphas)[:2]
    P, Q = _balanced_pair(d, a, b, rng)
    eye = np.eye(d)
    A, B = 2 * P - eye, 2 * Q - eye
    lo = criteria.jordan_tau_lower(P, Q, tol=_param(cfg, "jordan_tol", 1e-5)).value
    up = angles.compression_upper_bound(A, B).value
    rec = {
        "inputs": _hash(P, Q),
        "jordan_lower": lo,
        "compression_upper": up,
        "jordan_err": abs(lo - INV_SQRT2),
        "compression_err": abs(up - INV_SQRT2),
        "lower_le_upper": lo <= up + 1e-12,
        "sdp_tau": None,
        "sdp_in_bracket": None,
    }
    if d <= _param(cfg, "sdp_max_d", 8):
        tau = sdp.tau_dichotomic([A, B]).lower
        slack = _param(cfg, "bracket_slack", 1e-6)
        rec["sdp_tau"] = tau
        rec["sdp_in_bracket"] = lo - slack <= tau <= up + slack
    return [rec]


def exp_two_proj_unbalanced(cfg, d, trial, rng):
    a = cfg.alphas[0]
    P, Q = _balanced_pair(d, a, a, rng)
    eye = np.eye(d)
    pred = angles.unbalanced_prediction(a)
    lo = criteria.jordan_tau_lower(P, Q, tol=_param(cfg, "jordan_tol", 1e-5)).value
    up = angles.compression_upper_bound(2 * P - eye, 2 * Q - eye).value
    return [
        {
            "inputs": _hash(P, Q),
            "prediction": pred,
            "jordan_lower": lo,
            "compression_upper": up,
            "jordan_err": abs(lo - pred),
            "compression_err": abs(up - pred),
            "lower_le_upper": lo <= up + 1e-12,
        }
    ]


def exp_many_proj_witness(cfg, d, trial, rng):
    g = cfg.g
    obs = [sampling.random_dichotomic(d, d // 2, rng) for _ in range(g)]
    top = criteria.max_sign_eigenvalue(obs)
    s = 1.0 / (_param(cfg, "s_factor", 1.0) * top)
    is_w, thr = criteria.colinear_projection_witness(obs, s)
    base = {
        "inputs": _hash(*obs),
        "lambda_max_eps": top,
        "ratio_sqrt_g": top / math.sqrt(g),
        "ratio_km_edge": top / (2 * math.sqrt(g - 1)),
        "s": s,
        "is_witness": is_w,
        "certified_threshold": thr,
    }
    return [dict(base, t=t, certified=bool(is_w and t > thr)) for t in cfg.t_grid]


def exp_two_bases(cfg, d, trial, rng):
    U = sampling.haar_unitary(d, rng)
    e = criteria.eta_g2(U)
    thr = criteria.eta_incompatibility_threshold(e, d, 2)
    bound = 0.5 * (1 + math.sqrt(3 * math.log(d) / d))
    jiang = math.sqrt(d / math.log(d)) * float(np.abs(U).max())
    lo, hi = _param(cfg, "jiang_bracket", [1.2, 2.1])
    return [
        {
            "inputs": _hash(U),
            "eta": e,
            "threshold": thr,
            "log_bound": bound,
            "threshold_ok": thr <= bound,
            "jiang_stat": jiang,
            "jiang_ok": lo <= jiang <= hi,
        }
    ]


def exp_many_bases(cfg, d, trial, rng):
    g = cfg.g
    Us = [sampling.haar_unitary(d, rng) for _ in range(g)]
    exact = d**g <= criteria.MAX_ENUM
    if exact:
        e = criteria.eta(Us)
    else:
        e = criteria.eta_lower_sampled(Us, _param(cfg, "eta_samples", 2000), rng)
    thr = criteria.eta_incompatibility_threshold(e, d, g)
    t_loose = 135 * math.log(d) / d
    ts = list(cfg.t_grid) or [t_loose]
    return [
        {
            "inputs": _hash(*Us),
            "eta": e,
            "eta_exact": exact,
            "eta_scaled": e * d / (g * math.log(d)),
            "threshold": thr,
            "t": t,
            "t_valid": t <= 1,
            # only an exact eta yields a valid witness
            "certified": bool(exact and t <= 1 and t > thr),
        }
        for t in ts
    ]


def exp_induced_povm(cfg, d, trial, rng):
    k = cfg.k
    n = int(_param(cfg, "n", 32))
    c = sampling.induced_c(d, k, n)
    povm = sampling.random_induced_povm(d, k, n, rng)
    ev = np.linalg.eigvalsh(povm.effects[0])
    lo, hi = spectra._phi(c, 1 / k)
    margin = _param(cfg, "edge_margin", 0.05)
    all_ev = np.concatenate([np.linalg.eigvalsh(e) for e in povm.effects])
    return [
        {
            "inputs": _hash(*povm.effects),
            "c": c,
            "phi_minus": lo,
            "phi_plus": hi,
            "eig_min": float(all_ev.min()),
            "eig_max": float(all_ev.max()),
            "in_support": bool(all_ev.min() >= lo - margin and all_ev.max() <= hi + margin),
            "mean_eig": float(ev.mean()),
            "mean_eig_dev": float(ev.mean()) - 1 / k,
            "ks": spectra.ks_distance(ev, spectra.nu_kc(k, c)),
        }
    ]


def exp_moments(cfg, d, trial, rng):
    n = int(_param(cfg, "samples", 100_000))
    powers = _param(cfg, "powers", [1, 2, 3, 4, 5, 6])
    phi = sampling.haar_vectors(d, n, rng)
    delta = np.concatenate([np.ones(d // 2), -np.ones(d - d // 2)])
    # X = <phi|U^H diag(delta) U|phi>; U|phi> is a uniform unit vector
    x = (np.abs(phi) ** 2) @ delta
    out = []
    for p in powers:
        v = x**p
        est, se = float(v.mean()), float(v.std(ddof=1) / math.sqrt(n))
        exact = float(spectra.haar_projection_moment(d, p))
        out.append(
            {"p": p, "estimate": est, "stderr": se, "exact": exact, "z": (est - exact) / se if se > 0 else 0.0}
        )
    return out


def exp_kesten_mckay(cfg, d, trial, rng):
    g = cfg.g
    obs = [sampling.random_dichotomic(d, d // 2, rng) for _ in range(g)]
    eps = sampling._gen(rng).choice([-1.0, 1.0], size=g)
    S = sum(e * a for e, a in zip(eps, obs))
    emp = spectra.empirical_spectrum(S)
    edge = 2 * math.sqrt(g - 1)
    top = float(emp.eigenvalues[-1])
    return [
        {
            "inputs": _hash(*obs),
            "signs": "".join("+" if e > 0 else "-" for e in eps),
            "ks": spectra.ks_distance(emp, spectra.kesten_mckay(g)),
            "lambda_max": top,
            "edge": edge,
            "edge_err": abs(top - edge),
        }
    ]


EXPERIMENTS = {
    "two_proj_disc": exp_two_proj_disc,
    "two_proj_unbalanced": exp_two_proj_unbalanced,
    "many_proj_witness": exp_many_proj_witness,
    "two_bases": exp_two_bases,
    "many_bases": exp_many_bases,
    "induced_povm": exp_induced_povm,
    "moments": exp_moments,
    "kesten_mckay": exp_kesten_mckay,
}


# -- aggregation and targets -----------------------------------------------------

def _numeric_columns(records):
    cols = {}
    for r in records:
        for key, v in r.items():
            if isinstance(v, (bool, np.bool_)) or v is None or isinstance(v, str):
                continue
            if isinstance(v, (int, float, np.floating, np.integer)) and key not in ("trial", "stream"):
                cols.setdefault(key, []).append(float(v))
    return cols


def _summary(values) -> dict:
    a = np.asarray(values, dtype=float)
    q = np.quantile(a, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {
        "n": int(a.size),
        "mean": float(a.mean()),
        "std": float(a.std(ddof=1)) if a.size > 1 else 0.0,
        "min": float(a.min()),
        "max": float(a.max()),
        "quantiles": {"q05": q[0], "q25": q[1], "q50": q[2], "q75": q[3], "q95": q[4]},
    }


def _groups(records):
    out = {}
    for r in records:
        key = f"d={r['d']}" + (f",t={r['t']:.6g}" if r.get("t") is not None else "")
        key += f",p={r['p']}" if "p" in r else ""
        out.setdefault(key, []).append(r)
    return out


def _aggregate(records) -> dict:
    agg = {}
    for key, rows in _groups(records).items():
        agg[key] = {col: _summary(v) for col, v in _numeric_columns(rows).items()}
        flags = {}
        for r in rows:
            for col, v in r.items():
                if isinstance(v, (bool, np.bool_)):
                    flags.setdefault(col, []).append(bool(v))
        for col, v in flags.items():
            agg[key][col] = {"n": len(v), "frac_true": sum(v) / len(v)}
    return agg


REDUCERS = {
    "all": lambda v: float(all(v)),
    "frac": lambda v: float(np.mean([bool(x) for x in v])),
    "min": lambda v: float(np.min(v)),
    "max": lambda v: float(np.max(v)),
    "mean": lambda v: float(np.mean(v)),
    "abs_mean": lambda v: float(abs(np.mean(v))),
    "abs_max": lambda v: float(np.max(np.abs(v))),
}
OPS = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b}


def _matches(rec, where) -> bool:
    for key, want in (where or {}).items():
        have = rec.get(key)
        if have is None:
            return False
        if isinstance(want, float) or isinstance(have, float):
            if not math.isclose(float(have), float(want), rel_tol=1e-9, abs_tol=1e-12):
                return False
        elif have != want:
            return False
    return True


def evaluate_targets(records, targets) -> list:
    results = []
    for tg in targets:
        vals = [r[tg["column"]] for r in records if _matches(r, tg.get("where")) and r.get(tg["column"]) is not None]
        if not vals:
            results.append(dict(tg, value=None, passed=False, n=0))
            continue
        value = REDUCERS[tg["reduce"]](vals)
        results.append(dict(tg, value=value, passed=bool(OPS[tg["op"]](value, tg["threshold"])), n=len(vals)))
    return results


# -- runner ----------------------------------------------------------------------

def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _run_job(cfg, fn, job_id, trial, d):
    rng = sampling.SeededRng(int(cfg.seed), job_id)
    head = {"trial": trial, "d": d, "stream": job_id}
    try:
        rows = fn(cfg, d, trial, rng)
    except IncompatError as exc:
        return [dict(head, status="failed", error=f"{type(exc).__name__}: {exc}")]
    return [dict(head, status="ok", **r) for r in rows]


def run_experiment(config, workers: int | None = None, write: bool = True) -> ExperimentReport:
    """Run every ``(trial, d)`` job of ``config`` and score the declared targets.

    Failed jobs are kept as records with ``status="failed"`` and left out
    of aggregates and targets.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    fn = EXPERIMENTS[cfg.experiment]
    jobs = [(i * len(cfg.dims) + j, trial, d) for i, trial in enumerate(range(cfg.trials)) for j, d in enumerate(cfg.dims)]
    start = time.perf_counter()
    workers = workers or default_workers()
    if workers == 1:
        results = [_run_job(cfg, fn, *job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_job(cfg, fn, *job), jobs))
    records = [r for rows in results for r in rows]
    ok = [r for r in records if r["status"] == "ok"]
    targets = evaluate_targets(ok, cfg.targets)
    report = ExperimentReport(
        experiment=cfg.experiment,
        config=cfg.to_dict(),
        records=records,
        aggregates=_aggregate(ok),
        targets=targets,
        passed=all(t["passed"] for t in targets),
        excluded=len(records) - len(ok),
        wall_clock=time.perf_counter() - start,
    )
    if cfg.experiment == "induced_povm":
        report.aggregates["curves"] = induced_curves(cfg.k, _param(cfg, "c_grid", []), cfg.g)
    if write and cfg.output_path:
        report.write(cfg.output_path)
    return report


def induced_curves(k: int, c_grid, g: int = 2) -> dict:
    """Asymptotic verdicts along a grid of ancilla ratios."""
    th = spectra.induced_thresholds(k, max(g, 2))
    rows = []
    for c in c_grid:
        if c > th.witness_c:
            verdict = "incompatible"
        elif c < (th.jordan_c_g2 if g == 2 else th.noise_c_g):
            verdict = "compatible"
        else:
            verdict = "unknown"
        rows.append({"c": c, "verdict": verdict})
    return {"thresholds": th.to_dict(), "grid": rows}
