"""Experiment orchestration: single optimizations, operator sweeps, MSE-vs-SNR curves.

Every CSV starts with ``#`` comment lines carrying the tool version, master
seed and the resolved configuration, so a file alone is enough to replay
the run. Worker counts are left out of those headers: they never change
results.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .catalog import all_published
from .channel import (ChannelParams, EvalSettings, amplify, estimate_mse, exact_mse, fitness)
from .constellation import (Constellation, SymmetryMode, expand, gene_count, layout_from_name,
                            load, save, validate)
from .genetic import Crossover, GaConfig, RunTrace, Selection, run

log = logging.getLogger(__name__)

CURVE_SYMBOLS = 1_000_000
DEFAULT_SNR_GRID = tuple(float(s) for s in range(0, 21))


@dataclass(frozen=True)
class ExperimentSpec:
    layout: str = "16apsk"
    symmetry: str = "double"
    ga: GaConfig = field(default_factory=GaConfig)
    snr_db: float = 10.0
    n_symbols: int = 200_000
    crn: bool = True
    replicate_count: int = 5
    workers: int = 1
    out: str = "."

    def __post_init__(self) -> None:
        layout_from_name(self.layout)
        object.__setattr__(self, "symmetry", SymmetryMode.parse(self.symmetry).value)
        if self.replicate_count < 1:
            raise ValueError("replicate_count must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def channel(self) -> ChannelParams:
        return ChannelParams(self.snr_db)

    @property
    def eval_settings(self) -> EvalSettings:
        return EvalSettings(self.n_symbols, self.ga.seed, self.crn)

    def resolved(self) -> dict:
        """Everything that determines results (excludes workers and out)."""
        return {
            "layout": self.layout,
            "symmetry": self.symmetry,
            "snr_db": self.snr_db,
            "n_symbols": self.n_symbols,
            "crn": self.crn,
            "replicate_count": self.replicate_count,
            "ga": self.ga.to_dict(),
        }


def _header(spec: ExperimentSpec, extra: dict | None = None) -> str:
    lines = [
        f"# apskga {__version__}",
        f"# seed: {spec.ga.seed}",
        f"# config: {json.dumps(spec.resolved(), sort_keys=True)}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return "\n".join(lines) + "\n"


def _csv(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trace_csv(spec: ExperimentSpec, trace: RunTrace) -> str:
    head = _header(spec, {"termination_reason": trace.termination_reason.value})
    rows = [(r.generation, repr(r.best_mse), repr(r.mean_mse)) for r in trace.records]
    return head + _csv(rows, ("generation", "best_mse", "mean_mse"))


@dataclass
class OptimizeResult:
    constellation: Constellation
    trace: RunTrace
    best_mse: float
    summary: dict


def optimize(spec: ExperimentSpec, validate_symbols: int = 0) -> OptimizeResult:
    layout = layout_from_name(spec.layout)
    genes, trace = run(layout, spec.symmetry, spec.ga, spec.channel, spec.eval_settings,
                       workers=spec.workers)
    c = replace(expand(genes), name=f"{spec.layout}-{spec.symmetry}-seed{spec.ga.seed}",
                meta={"radii_genes": list(genes.radii_genes),
                      "phase_genes": list(genes.phase_genes)})
    summary = {
        "version": __version__,
        "seed": spec.ga.seed,
        "config": spec.resolved(),
        "n_genes": gene_count(layout, SymmetryMode.parse(spec.symmetry)),
        "best_genes": list(genes.radii_genes) + list(genes.phase_genes),
        "best_mse": trace.records[-1].best_mse,
        "generations": trace.records[-1].generation,
        "termination_reason": trace.termination_reason.value,
    }
    if validate_symbols:
        # fresh stream, independent of every stream the GA scored with
        ev = EvalSettings(validate_symbols, seed=derive_seed(spec.ga.seed, 3, 0), crn=True)
        summary["validated_mse"] = estimate_mse(c, spec.channel, ev)
        summary["validated_symbols"] = validate_symbols
    return OptimizeResult(c, trace, trace.records[-1].best_mse, summary)


def cmd_optimize(spec: ExperimentSpec, validate_symbols: int = CURVE_SYMBOLS) -> OptimizeResult:
    res = optimize(spec, validate_symbols)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    c = replace(res.constellation, meta={**res.constellation.meta, **{
        "version": __version__, "seed": spec.ga.seed, "config": spec.resolved()}})
    save(c, out / "constellation.json")
    (out / "trace.csv").write_text(trace_csv(spec, res.trace), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(res.summary, indent=1, sort_keys=True) + "\n",
                                      encoding="utf-8")
    return res


# -- sweeps --------------------------------------------------------------------


def derive_seed(master: int, *key: int) -> int:
    seq = np.random.SeedSequence(master, spawn_key=tuple(key))
    return int(seq.generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class SweepJob:
    selection: Selection
    crossover: Crossover
    cell: int
    replicate: int
    seed: int


def sweep_jobs(spec: ExperimentSpec) -> list[SweepJob]:
    jobs = []
    for ci, (xo, sel) in enumerate((x, s) for x in Crossover for s in Selection):
        for rep in range(spec.replicate_count):
            jobs.append(SweepJob(sel, xo, ci, rep, derive_seed(spec.ga.seed, 2, ci, rep)))
    return jobs


def _run_job(spec: ExperimentSpec, job: SweepJob) -> dict:
    ga = replace(spec.ga, selection=job.selection, crossover=job.crossover, seed=job.seed)
    one = replace(spec, ga=ga, workers=1)
    try:
        res = optimize(one)
    except Exception as exc:  # recorded per cell; the sweep keeps going
        log.warning("cell %s/%s replicate %d failed: %s", job.selection.name,
                    job.crossover.name, job.replicate, exc)
        return {"best_mse": None, "termination_reason": "", "error": f"{type(exc).__name__}: {exc}"}
    return {"best_mse": res.best_mse,
            "termination_reason": res.trace.termination_reason.value, "error": ""}


@dataclass
class SweepResult:
    """Per (selection, crossover) cell: best and median MSE over replicates."""

    spec: ExperimentSpec
    runs: list[tuple[SweepJob, dict]]

    def cell(self, selection: Selection, crossover: Crossover) -> dict:
        rows = [r for j, r in self.runs if j.selection is selection and j.crossover is crossover]
        ok = [r["best_mse"] for r in rows if r["best_mse"] is not None]
        seeds = [j.seed for j, _ in self.runs
                 if j.selection is selection and j.crossover is crossover]
        return {
            "best_mse": min(ok) if ok else None,
            "median_mse": statistics.median(ok) if ok else None,
            "seeds": seeds,
            "failures": len(rows) - len(ok),
        }

    @property
    def matrix(self) -> dict[Selection, dict[Crossover, dict]]:
        return {s: {x: self.cell(s, x) for x in Crossover} for s in Selection}

    def table_csv(self) -> str:
        rows = []
        for x in Crossover:
            row = [x.name]
            for s in Selection:
                v = self.cell(s, x)["best_mse"]
                row.append("ERROR" if v is None else repr(v))
            rows.append(row)
        return _header(self.spec) + _csv(rows, ["crossover"] + [s.name for s in Selection])

    def cells_csv(self) -> str:
        rows = []
        for x in Crossover:
            for s in Selection:
                c = self.cell(s, x)
                rows.append([s.name, x.name,
                             "" if c["best_mse"] is None else repr(c["best_mse"]),
                             "" if c["median_mse"] is None else repr(c["median_mse"]),
                             c["failures"], " ".join(map(str, c["seeds"]))])
        return _header(self.spec) + _csv(
            rows, ("selection", "crossover", "best_mse", "median_mse", "failures", "seeds"))

    def runs_csv(self) -> str:
        rows = [[j.selection.name, j.crossover.name, j.replicate, j.seed,
                 "" if r["best_mse"] is None else repr(r["best_mse"]),
                 r["termination_reason"], r["error"]] for j, r in self.runs]
        return _header(self.spec) + _csv(
            rows, ("selection", "crossover", "replicate", "seed", "best_mse",
                   "termination_reason", "error"))


def sweep(spec: ExperimentSpec) -> SweepResult:
    jobs = sweep_jobs(spec)
    if spec.workers == 1:
        results = [_run_job(spec, j) for j in jobs]
    else:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_run_job, [spec] * len(jobs), jobs))
    return SweepResult(spec, list(zip(jobs, results)))


def cmd_sweep(spec: ExperimentSpec) -> SweepResult:
    res = sweep(spec)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(res.table_csv(), encoding="utf-8")
    (out / "sweep_cells.csv").write_text(res.cells_csv(), encoding="utf-8")
    (out / "sweep_runs.csv").write_text(res.runs_csv(), encoding="utf-8")
    return res


# -- curves and single evaluations ----------------------------------------------


@dataclass
class CurveResult:
    curves: dict[str, list[tuple[float, float]]]

    def to_csv(self, header: str = "") -> str:
        rows = [(name, repr(snr), repr(mse))
                for name in sorted(self.curves) for snr, mse in self.curves[name]]
        return header + _csv(rows, ("name", "snr_db", "mse"))


def curve(constellations: dict[str, Constellation], snr_grid: Sequence[float] = DEFAULT_SNR_GRID,
          n_symbols: int = CURVE_SYMBOLS, seed: int = 0) -> CurveResult:
    grid = [float(s) for s in snr_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("SNR grid must be strictly increasing")
    ev = EvalSettings(n_symbols, seed)
    return CurveResult({
        name: [(snr, estimate_mse(c, ChannelParams(snr), ev)) for snr in grid]
        for name, c in constellations.items()
    })


def crossings(a: Sequence[tuple[float, float]], b: Sequence[tuple[float, float]]) -> list[float]:
    """SNR values where curve ``a - b`` changes sign (linear interpolation)."""
    out = []
    for (s0, a0), (s1, a1), (_, b0), (_, b1) in zip(a, a[1:], b, b[1:]):
        d0, d1 = a0 - b0, a1 - b1
        if d0 == 0:
            out.append(s0)
        elif d0 * d1 < 0:
            out.append(s0 + (s1 - s0) * d0 / (d0 - d1))
    return out


def cmd_curve(paths: Sequence[str], out: str, snr_grid=DEFAULT_SNR_GRID,
              n_symbols: int = CURVE_SYMBOLS, seed: int = 0) -> tuple[CurveResult, list[str]]:
    """Evaluate every loadable document; returns the curves and per-file errors."""
    docs, errors = {}, []
    for p in paths:
        try:
            c = load(p)
            problems = validate(c)
            if problems:
                raise ValueError("; ".join(problems))
            docs[c.name or Path(p).stem] = c
        except (OSError, ValueError) as exc:
            errors.append(f"{p}: {exc}")
    res = curve(docs, snr_grid, n_symbols, seed)
    head = (f"# apskga {__version__}\n# seed: {seed}\n"
            f"# config: {json.dumps({'n_symbols': n_symbols, 'snr_grid': list(snr_grid)})}\n")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(res.to_csv(head), encoding="utf-8")
    return res, errors


def cmd_evaluate(c: Constellation, snr_db: float, method: str = "mc",
                 n_symbols: int = CURVE_SYMBOLS, seed: int = 0) -> dict:
    ch = ChannelParams(snr_db)
    amp = amplify(c, ch.saleh)
    n0, sigma = ch.noise(amp.es_avg)
    if method == "mc":
        mse = estimate_mse(c, ch, EvalSettings(n_symbols, seed))
    elif method == "exact":
        mse = exact_mse(c, ch)
    else:
        raise ValueError(f"unknown method {method!r}; use mc or exact")
    rec = {"name": c.name, "method": method, "snr_db": snr_db, "mse": mse,
           "fitness": fitness(mse), "es_avg": amp.es_avg, "n0": n0, "sigma_per_dim": sigma}
    if method == "mc":
        rec.update(seed=seed, n_symbols=n_symbols)
    return rec


def export_published(out: str | os.PathLike) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, c in all_published().items():
        p = out / f"{name}.json"
        save(c, p)
        paths.append(p)
    return paths


def spec_from_dict(d: dict) -> ExperimentSpec:
    """Build a spec from flat keys (GaConfig fields may sit at top level or under 'ga')."""
    d = dict(d)
    ga_keys = set(GaConfig.__dataclass_fields__)
    ga = dict(d.pop("ga", {}) or {})
    for k in list(d):
        if k in ga_keys:
            ga[k] = d.pop(k)
    if "replicates" in d:
        d["replicate_count"] = d.pop("replicates")
    unknown = set(d) - set(ExperimentSpec.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentSpec(ga=GaConfig(**ga), **d)


def spec_to_dict(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    d["ga"] = spec.ga.to_dict()
    return d
