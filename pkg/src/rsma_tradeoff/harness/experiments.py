"""Grid runner, CSV artifacts, Pareto frontiers and convergence reports."""
from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..conic import embed_complex, extract_complex
from ..model import rate_report, scalarized_objective
from ..optimizer import SOLVER_FAILURE, RunOptions, RunTrace, dinkelbach_wmmse, sca_solve
from ..subproblems import SubproblemSpec
from .config import ExperimentConfig, ScenarioTemplate, parse_method

SCHEMA = "rsma-tradeoff/v1"
MANIFEST = "manifest.json"

RECORD_FIELDS = ("schema", "experiment", "method", "approach", "w", "snr_db", "chi", "n_users", "trial", "seed",
                 "se", "ee", "transmit_power", "objective", "iterations", "inner_iterations", "wall_time_ms",
                 "status", "nt", "precoder")
TRACE_FIELDS = ("schema", "method", "approach", "w", "snr_db", "chi", "n_users", "trial", "seed", "iteration",
                "surrogate_objective", "objective", "se", "ee", "transmit_power", "wall_time_ms")


def channel_seed(master: int, n_users: int, trial: int) -> int:
    """Per-trial channel seed; every method, weight and SNR on a trial sees the same channel."""
    return int(np.random.SeedSequence([master, n_users, trial]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Task:
    method: str
    approach: str
    w: float
    snr_db: float
    chi: float
    n_users: int
    trial: int
    seed: int


@dataclass
class SweepRecord:
    experiment: str
    method: str
    approach: str
    w: float
    snr_db: float
    chi: float
    n_users: int
    trial: int
    seed: int
    se: float
    ee: float
    transmit_power: float
    objective: float
    iterations: int
    inner_iterations: int
    wall_time_ms: float
    status: str
    F: np.ndarray = field(repr=False)

    def to_row(self) -> dict:
        row = {k: getattr(self, k) for k in RECORD_FIELDS[1:-2]}
        row["schema"] = SCHEMA
        row["nt"] = self.F.shape[0]
        row["precoder"] = " ".join(repr(float(v)) for v in embed_complex(self.F))
        return {k: _fmt(row[k]) for k in RECORD_FIELDS}

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        if row["schema"] != SCHEMA:
            raise ValueError(f"unsupported schema {row['schema']!r}")
        n_users, nt = int(row["n_users"]), int(row["nt"])
        z = np.array([float(v) for v in row["precoder"].split()])
        F = extract_complex(z, (nt, n_users + 1))
        kw = {k: row[k] for k in ("experiment", "method", "approach", "status")}
        kw.update({k: float(row[k]) for k in ("w", "snr_db", "chi", "se", "ee", "transmit_power", "objective",
                                              "wall_time_ms")})
        kw.update({k: int(row[k]) for k in ("n_users", "trial", "seed", "iterations", "inner_iterations")})
        return cls(F=F, **kw)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[SweepRecord]
    traces: list[RunTrace]
    files: list[Path]

    @property
    def failures(self) -> int:
        return sum(r.status == SOLVER_FAILURE for r in self.records)


def tasks_for(cfg: ExperimentConfig) -> list[Task]:
    """Grid points in a fixed order: users, trial, SNR, chi, approach, method, w."""
    out = []
    for n_users in cfg.scenario.user_counts:
        for trial in range(cfg.trials):
            seed = channel_seed(cfg.seed, n_users, trial)
            for snr in cfg.snr_grid:
                for chi in cfg.chi_grid:
                    for approach in cfg.approaches:
                        for method in cfg.methods:
                            # the Dinkelbach baseline only exists for the weighted-sum scalarization
                            if parse_method(method).dinkelbach and approach != "weighted_sum":
                                continue
                            for w in cfg.w_grid:
                                out.append(Task(method, approach, w, snr, chi, n_users, trial, seed))
    return out


def run_task(template: ScenarioTemplate, task: Task, opts: RunOptions, experiment: str = "") \
        -> tuple[SweepRecord, RunTrace]:
    s = template.scenario(task.n_users, task.snr_db, task.chi, task.seed)
    m = parse_method(task.method)
    if m.dinkelbach:
        trace = dinkelbach_wmmse(m.strategy, task.w, s, opts)
    else:
        trace = sca_solve(SubproblemSpec(task.approach, m.bound, m.strategy, task.w), s, opts)
    rep = rate_report(trace.F, s)
    record = SweepRecord(
        experiment=experiment, method=task.method, approach=task.approach, w=task.w, snr_db=task.snr_db,
        chi=task.chi, n_users=task.n_users, trial=task.trial, seed=task.seed, se=rep.sum_se_bits, ee=rep.ee,
        transmit_power=rep.transmit_power_w, objective=scalarized_objective(task.approach, task.w, trace.F, s),
        iterations=trace.iterations, inner_iterations=trace.inner_iterations,
        wall_time_ms=1e3 * trace.wall_time, status=trace.status, F=trace.F)
    return record, trace


def _run_packed(args):
    return run_task(*args)


def run_tasks(cfg: ExperimentConfig, tasks: list[Task]) -> tuple[list[SweepRecord], list[RunTrace]]:
    opts = RunOptions(tol=cfg.tol, max_iters=cfg.max_iters, timer=cfg.timing)
    packed = [(cfg.scenario, t, opts, cfg.kind) for t in tasks]
    if cfg.workers > 1 and len(tasks) > 1:
        # map() yields in submission order, so the output is independent of completion order
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_packed, packed, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    else:
        results = [_run_packed(a) for a in packed]
    return [r for r, _ in results], [t for _, t in results]


def ensure_writable(out_dir: str | Path) -> Path:
    """Create ``out_dir`` and prove it accepts files; raises ``OSError`` otherwise."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK | os.X_OK):
        raise PermissionError(f"output directory {out} is not writable")
    with tempfile.NamedTemporaryFile(dir=out, prefix=".probe-"):
        pass
    return out


def write_csv(path: Path, fields: tuple[str, ...], rows: list[dict]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        writer.writerows(rows)
    return path


def read_records(path: str | Path) -> list[SweepRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [SweepRecord.from_row(row) for row in csv.DictReader(fh)]


def rederive(record: SweepRecord, template: ScenarioTemplate) -> tuple[float, float]:
    """SE and EE of the stored precoder, recomputed from the scenario it was designed for."""
    s = template.scenario(record.n_users, record.snr_db, record.chi, record.seed)
    rep = rate_report(record.F, s)
    return rep.sum_se_bits, rep.ee


def trace_rows(task: Task, trace: RunTrace) -> list[dict]:
    rows = []
    for rec in trace.records:
        row = {"schema": SCHEMA, "method": task.method, "approach": task.approach, "w": task.w,
               "snr_db": task.snr_db, "chi": task.chi, "n_users": task.n_users, "trial": task.trial,
               "seed": task.seed, "iteration": rec.iteration, "surrogate_objective": rec.surrogate_objective,
               "objective": rec.objective, "se": rec.se, "ee": rec.ee, "transmit_power": rec.transmit_power,
               "wall_time_ms": 1e3 * rec.wall_time}
        rows.append({k: _fmt(v) for k, v in row.items()})
    return rows


def write_manifest(cfg: ExperimentConfig, out: Path, files: list[Path], tasks: list[Task],
                   records: list[SweepRecord]) -> Path:
    seeds = sorted({(t.n_users, t.trial, t.seed) for t in tasks})
    manifest = {
        "schema": SCHEMA,
        "experiment": cfg.kind,
        "config": cfg.to_dict(),
        "master_seed": cfg.seed,
        "channel_seeds": [{"n_users": k, "trial": t, "seed": s} for k, t, s in seeds],
        "files": [p.name for p in files],
        "runs": len(records),
        "solver_failures": sum(r.status == SOLVER_FAILURE for r in records),
    }
    path = out / MANIFEST
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _stem(kind: str) -> str:
    return kind.replace("-", "_")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every grid point of ``cfg`` and write ``<experiment>.csv`` plus the manifest.

    Failed runs are kept as rows with their status; the sweep carries on.
    """
    out = ensure_writable(cfg.out_dir)
    tasks = tasks_for(cfg)
    records, traces = run_tasks(cfg, tasks)
    files = [write_csv(out / f"{_stem(cfg.kind)}.csv", RECORD_FIELDS, [r.to_row() for r in records])]
    if cfg.kind == "convergence":
        rows = [row for t, tr in zip(tasks, traces) for row in trace_rows(t, tr)]
        files.append(write_csv(out / "convergence_traces.csv", TRACE_FIELDS, rows))
    files.append(write_manifest(cfg, out, files, tasks, records))
    return ExperimentResult(cfg, records, traces, files)


@dataclass(frozen=True)
class Frontier:
    """Trial-averaged (SE, EE) points of one method along the weight grid."""

    method: str
    approach: str
    snr_db: float
    chi: float
    n_users: int
    w: np.ndarray
    se: np.ndarray
    ee: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.se, self.ee])


def frontiers_from_records(records: list[SweepRecord]) -> list[Frontier]:
    groups: dict[tuple, dict[float, list[SweepRecord]]] = {}
    for r in records:
        key = (r.method, r.approach, r.snr_db, r.chi, r.n_users)
        groups.setdefault(key, {}).setdefault(r.w, []).append(r)
    out = []
    for key, by_w in groups.items():
        ws = sorted(by_w)
        se = np.array([np.mean([r.se for r in by_w[w]]) for w in ws])
        ee = np.array([np.mean([r.ee for r in by_w[w]]) for w in ws])
        out.append(Frontier(*key, w=np.array(ws), se=se, ee=ee))
    return out


FRONTIER_FIELDS = ("schema", "method", "approach", "snr_db", "chi", "n_users", "w", "se", "ee")


def pareto_frontier(cfg: ExperimentConfig, approach: str | None = None) -> list[Frontier]:
    """Sweep the weight grid and return one (SE, EE) polyline per method and approach.

    With ``approach=None`` both scalarizations are swept so their frontiers
    come out paired. Writes ``frontier.csv`` and the raw runs to ``cfg.out_dir``.
    """
    approaches = ("weighted_sum", "weighted_power") if approach is None else (approach,)
    cfg = replace(cfg, kind="tradeoff", approaches=approaches)
    result = run_experiment(cfg)
    fronts = frontiers_from_records(result.records)
    rows = []
    for f in fronts:
        for w, se, ee in zip(f.w, f.se, f.ee):
            rows.append({"schema": SCHEMA, "method": f.method, "approach": f.approach, "snr_db": _fmt(f.snr_db),
                         "chi": _fmt(f.chi), "n_users": f.n_users, "w": _fmt(w), "se": _fmt(se), "ee": _fmt(ee)})
    write_csv(Path(cfg.out_dir) / "frontier.csv", FRONTIER_FIELDS, rows)
    return fronts


def upper_envelope(points: np.ndarray):
    """Nondominated points of ``points`` sorted by increasing SE (and so decreasing EE)."""
    pts = np.asarray(points, dtype=float)
    pts = pts[np.lexsort((-pts[:, 1], -pts[:, 0]))]
    keep, best_ee = [], -np.inf
    for se, ee in pts:
        if ee > best_ee:
            keep.append((se, ee))
            best_ee = ee
    return np.array(keep[::-1])


def envelope_ee(envelope: np.ndarray, se: float) -> float:
    """EE of the polyline through ``envelope`` at ``se``; flat to the left, absent to the right."""
    if se > envelope[-1, 0]:
        return -np.inf
    if se <= envelope[0, 0]:
        return float(envelope[0, 1])
    return float(np.interp(se, envelope[:, 0], envelope[:, 1]))


def dominated_by(points: np.ndarray, reference: np.ndarray, slack: float = 1e-6) -> bool:
    """True when no point lies strictly above and to the right of the reference polyline."""
    env = upper_envelope(reference)
    return all(ee <= envelope_ee(env, se - slack) + slack for se, ee in np.asarray(points, dtype=float))


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def frontier_area(points: np.ndarray) -> float:
    """Area of the (SE, EE) region dominated by the polyline, with both axes starting at zero."""
    env = upper_envelope(points)
    return float(env[0, 0] * env[0, 1] + _trapezoid(env[:, 1], env[:, 0]))


def polyline_distance(points: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Relative distance from each point to the polyline through ``reference`` (ordered by SE).

    Coordinates are scaled by the point itself, so a value of ``d`` means the
    nearest frontier point differs by at most ``d`` relative in SE and EE.
    """
    ref = np.asarray(reference, dtype=float)
    ref = ref[np.argsort(ref[:, 0], kind="stable")]
    out = []
    for p in np.asarray(points, dtype=float):
        scale = np.abs(p) + 1e-300
        q = ref / scale
        x = p / scale
        best = np.min(np.linalg.norm(q - x, axis=1))
        for a, b in zip(q[:-1], q[1:]):
            d = b - a
            denom = float(d @ d)
            if denom > 0:
                t = np.clip((x - a) @ d / denom, 0.0, 1.0)
                best = min(best, float(np.linalg.norm(a + t * d - x)))
        out.append(best)
    return np.array(out)


SUMMARY_FIELDS = ("schema", "method", "n_users", "snr_db", "w", "iterations", "inner_iterations",
                  "wall_time_ms", "final_objective", "status", "monotone")


@dataclass(frozen=True)
class ConvergenceSummary:
    method: str
    iterations: int
    inner_iterations: int
    wall_time_ms: float
    final_objective: float
    status: str
    monotone: bool


def is_monotone(trace: RunTrace, slack: float = 1e-7) -> bool:
    """Surrogate objectives never drop by more than ``slack`` (relative to ``max(1, |value|)``)."""
    v = trace.surrogate_objectives[1:]
    return bool(np.all(np.diff(v) >= -slack * np.maximum(1.0, np.abs(v[:-1]))))


def convergence_report(cfg: ExperimentConfig) -> list[ConvergenceSummary]:
    """Per-method iteration counts and (optionally) wall times on the convergence scenario.

    Writes ``convergence.csv`` (final designs), ``convergence_traces.csv``
    (objective per iteration) and ``convergence_summary.csv``.
    """
    cfg = replace(cfg, kind="convergence", approaches=("weighted_sum",))
    result = run_experiment(cfg)
    out = []
    for rec, trace in zip(result.records, result.traces):
        dink = parse_method(rec.method).dinkelbach
        out.append(ConvergenceSummary(rec.method, rec.iterations, rec.inner_iterations, rec.wall_time_ms,
                                      rec.objective, rec.status, True if dink else is_monotone(trace)))
    rows = [{"schema": SCHEMA, "method": c.method, "n_users": r.n_users, "snr_db": _fmt(r.snr_db), "w": _fmt(r.w),
             "iterations": c.iterations, "inner_iterations": c.inner_iterations,
             "wall_time_ms": _fmt(c.wall_time_ms), "final_objective": _fmt(c.final_objective), "status": c.status,
             "monotone": c.monotone} for c, r in zip(out, result.records)]
    path = write_csv(Path(cfg.out_dir) / "convergence_summary.csv", SUMMARY_FIELDS, rows)
    write_manifest(cfg, Path(cfg.out_dir), result.files[:-1] + [path], tasks_for(cfg), result.records)
    return out
