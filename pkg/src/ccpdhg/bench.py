"""Benchmark sweeps: per-model records, shifted geometric means, win/loss counts."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

from .lp import LinearProgram
from .mps import read_mps
from .race import BASELINE, CONCURRENT, MAIN, RaceConfig, RaceOutcome, run_race
from .schedule import schedule_thresholds

WIN, LOSS, TIE = "win", "loss", "tie"
TIMEOUT_CONVENTION = "runs that fail or hit the time limit enter the statistics at the time limit"


def shifted_geomean(times: Iterable[float], shift: float = 1.0) -> float:
    """``exp(mean(log(t + shift))) - shift``."""
    ts = [float(t) for t in times]
    if not ts:
        raise ValueError("shifted_geomean of an empty list")
    if shift <= 0:
        raise ValueError("shift must be positive")
    if any(t < 0 or math.isnan(t) for t in ts):
        raise ValueError("times must be nonnegative")
    return math.exp(math.fsum(math.log(t + shift) for t in ts) / len(ts)) - shift


def _exact(t: float) -> Fraction:
    # shortest decimal repr, so 0.27 vs 0.9 * 0.3 compares as the decimals read
    return Fraction(repr(float(t)))


def classify_win_loss(baseline_t: float, candidate_t: float) -> str:
    """Win if the candidate is at least 10% faster, loss if at least 10% slower."""
    if baseline_t < 0 or candidate_t < 0:
        raise ValueError("times must be nonnegative")
    b, c = _exact(baseline_t), _exact(candidate_t)
    if b == c:
        return TIE
    if c <= Fraction(9, 10) * b:
        return WIN
    if c >= Fraction(11, 10) * b:
        return LOSS
    return TIE


@dataclass
class BenchRecord:
    model: str
    mode: str
    wall_time: float
    status: str
    winner: str | None = None
    pdhg_iterations: int = 0
    pivots: int = 0
    violation: float | None = None
    objective: float | None = None

    @property
    def solved(self) -> bool:
        return self.status == "optimal"

    @classmethod
    def from_outcome(cls, model: str, mode: str, out: RaceOutcome) -> "BenchRecord":
        res = out.result
        return cls(
            model=model,
            mode=mode,
            wall_time=out.wall_time,
            status=out.status,
            winner=bucket_name(out.winner) if out.winner is not None else None,
            pdhg_iterations=out.pdhg_iterations,
            pivots=res.pivots if res is not None else 0,
            violation=res.violation if res is not None and math.isfinite(res.violation) else None,
            objective=out.objective if math.isfinite(out.objective) else None,
        )


def bucket_name(label) -> str:
    return MAIN if label == MAIN else repr(float(label))


@dataclass
class BenchSummary:
    shift: float
    time_limit: float
    sgm: dict[str, float]
    ratio: float
    wins: int
    losses: int
    ties: int
    histogram: dict[str, int]
    records: list[BenchRecord] = field(default_factory=list)
    classification: dict[str, str] = field(default_factory=dict)
    convention: str = TIMEOUT_CONVENTION

    @property
    def models(self) -> list[str]:
        return list(self.classification)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["records"] = [asdict(r) for r in self.records]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchSummary":
        d = dict(d)
        d["records"] = [BenchRecord(**r) for r in d.get("records", [])]
        return cls(**d)


def effective_time(rec: BenchRecord, time_limit: float) -> float:
    return min(rec.wall_time, time_limit) if rec.solved else time_limit


def empty_histogram(config: RaceConfig | None = None) -> dict[str, int]:
    tol = (config or RaceConfig()).tolerances
    hist = {bucket_name(t): 0 for t in schedule_thresholds(tol)}
    hist[MAIN] = 0
    return hist


def summarize(
    records: list[BenchRecord],
    shift: float = 1.0,
    time_limit: float = 3600.0,
    histogram: dict[str, int] | None = None,
) -> BenchSummary:
    """Aggregate paired baseline/concurrent records into the headline statistics.

    The ratio is baseline sgm over concurrent sgm, so values above one
    favour concurrent mode.
    """
    by_model: dict[str, dict[str, BenchRecord]] = {}
    for r in records:
        by_model.setdefault(r.model, {})[r.mode] = r
    hist = dict(histogram) if histogram is not None else empty_histogram()
    times = {BASELINE: [], CONCURRENT: []}
    cls_ = {}
    for model, modes in by_model.items():
        if BASELINE not in modes or CONCURRENT not in modes:
            raise ValueError(f"model {model!r} lacks a record for both modes")
        tb = effective_time(modes[BASELINE], time_limit)
        tc = effective_time(modes[CONCURRENT], time_limit)
        times[BASELINE].append(tb)
        times[CONCURRENT].append(tc)
        cls_[model] = classify_win_loss(tb, tc)
        conc = modes[CONCURRENT]
        if conc.solved and conc.winner is not None:
            hist[conc.winner] = hist.get(conc.winner, 0) + 1
    if not by_model:
        sgm = {BASELINE: math.nan, CONCURRENT: math.nan}
        ratio = math.nan
    else:
        sgm = {m: shifted_geomean(ts, shift) for m, ts in times.items()}
        ratio = sgm[BASELINE] / sgm[CONCURRENT] if sgm[CONCURRENT] > 0 else math.inf
    verdicts = list(cls_.values())
    return BenchSummary(
        shift=shift,
        time_limit=time_limit,
        sgm=sgm,
        ratio=ratio,
        wins=verdicts.count(WIN),
        losses=verdicts.count(LOSS),
        ties=verdicts.count(TIE),
        histogram=hist,
        records=list(records),
        classification=cls_,
    )


def model_files(model_dir) -> list[Path]:
    d = Path(model_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    return sorted(p for p in d.iterdir() if p.name.endswith((".mps", ".mps.gz", ".MPS", ".MPS.gz")))


def model_name(path: Path) -> str:
    name = path.name
    for suffix in (".gz", ".mps", ".MPS"):
        name = name.removesuffix(suffix)
    return name


def run_benchmark(
    model_dir,
    baseline: RaceConfig,
    concurrent: RaceConfig,
    shift: float = 1.0,
    solver: Callable[[LinearProgram, RaceConfig], RaceOutcome] = run_race,
    progress: Callable[[BenchRecord], None] | None = None,
) -> BenchSummary:
    """Solve every MPS file in ``model_dir`` in both modes, sequentially.

    A model that fails to load or solve is recorded at the time limit;
    the sweep never aborts.
    """
    if baseline.mode != BASELINE or concurrent.mode != CONCURRENT:
        raise ValueError("config pair must be (baseline, concurrent)")
    time_limit = max(baseline.time_limit, concurrent.time_limit)
    records = []
    for path in model_files(model_dir):
        name = model_name(path)
        try:
            lp = read_mps(path)
        except (OSError, ValueError) as err:
            for mode in (BASELINE, CONCURRENT):
                records.append(BenchRecord(name, mode, time_limit, f"input error: {err}"))
            continue
        for mode, cfg in ((BASELINE, baseline), (CONCURRENT, concurrent)):
            try:
                rec = BenchRecord.from_outcome(name, mode, solver(lp, cfg))
            except Exception as err:  # recorded, never fatal for the sweep
                rec = BenchRecord(name, mode, time_limit, f"error: {type(err).__name__}: {err}")
            records.append(rec)
            if progress is not None:
                progress(rec)
    return summarize(records, shift, time_limit, empty_histogram(concurrent))


CSV_FIELDS = [
    "model",
    "baseline_time",
    "baseline_status",
    "concurrent_time",
    "concurrent_status",
    "winner",
    "classification",
    "baseline_objective",
    "concurrent_objective",
]


def emit_report(summary: BenchSummary, fmt: str = "json") -> bytes:
    """Render the summary as ``json`` (everything) or ``csv`` (one row per model)."""
    if fmt == "json":
        return (json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        recs = {(r.model, r.mode): r for r in summary.records}
        for model, verdict in summary.classification.items():
            b, c = recs[(model, BASELINE)], recs[(model, CONCURRENT)]
            w.writerow(
                {
                    "model": model,
                    "baseline_time": effective_time(b, summary.time_limit),
                    "baseline_status": b.status,
                    "concurrent_time": effective_time(c, summary.time_limit),
                    "concurrent_status": c.status,
                    "winner": c.winner or "",
                    "classification": verdict,
                    "baseline_objective": "" if b.objective is None else repr(b.objective),
                    "concurrent_objective": "" if c.objective is None else repr(c.objective),
                }
            )
        return buf.getvalue().encode()
    raise ValueError(f"unknown report format {fmt!r}")
