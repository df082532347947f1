"""Racing crossover workers against the PDHG main loop.

PDHG runs on the calling thread. Whenever its residual first drops below
the next threshold of the launch schedule, a deep copy of the iterate is
offered to a fixed-size worker pool; each worker runs crossover from its
snapshot. When PDHG converges the calling thread runs crossover itself.
The first result that survives an independent re-verification is
committed as the winner and everything else is cancelled.

The same bookkeeping (launch schedule, pool admission, winner slot,
worker records, event log) also drives :func:`simulate_race`, a
discrete-event replay of scripted residual traces and worker durations.
"""

from __future__ import annotations

import heapq
import json
import math
import os
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import crossover as cx
from .cancel import CancelFlag
from .crossover import CrossoverResult, CrossoverTask, run_crossover, verify_basic_optimal
from .kkt import Iterate, ResidualReport, Tolerances, relative_report
from .lp import LinearProgram, to_standard_form
from .pdhg import (
    STOP_CANCELLED,
    STOP_CONVERGED,
    STOP_ITERATION_LIMIT,
    STOP_TIME_LIMIT,
    PdhgConfig,
    PdhgNumericalError,
    PdhgResult,
    Snapshot,
    run_pdhg,
)
from .schedule import LaunchSchedule, schedule_thresholds
from .simplex import CANCELLED

__all__ = [
    "BASELINE",
    "CONCURRENT",
    "MAIN",
    "RaceConfig",
    "RaceOutcome",
    "ScriptedCrossover",
    "ScriptedPdhg",
    "ScriptedWorker",
    "WinnerSlot",
    "WorkerPool",
    "cancel_all_except",
    "reserve_threads",
    "run_race",
    "schedule_thresholds",
    "simulate_race",
]

BASELINE = "baseline"
CONCURRENT = "concurrent"
MAIN = "main"
WON_BY_CROSSOVER = "won-by-crossover"

SOLVED = "optimal"
TIME_LIMIT = "time limit"
NUMERICAL = "numerical"
FAILED = "failed"

# terminal worker states
WON, FINISHED, CANCELLED_STATE, FAILED_STATE = "won", "finished", "cancelled", "failed"
RUNNING = "running"


@dataclass(frozen=True)
class RaceConfig:
    tolerances: Tolerances = Tolerances()
    workers: int = 4
    pdhg_threads: int | None = None
    mode: str = CONCURRENT
    time_limit: float = 3600.0
    seed: int = 0
    available_cores: int | None = None
    pdhg: PdhgConfig | None = None
    max_pivots: int | None = None

    def __post_init__(self):
        if self.mode not in (BASELINE, CONCURRENT):
            raise ValueError(f"mode must be {BASELINE!r} or {CONCURRENT!r}, got {self.mode!r}")
        if self.mode == CONCURRENT and self.workers < 1:
            raise ValueError("concurrent mode needs at least one crossover worker")
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")

    def pdhg_config(self) -> PdhgConfig:
        base = self.pdhg or PdhgConfig()
        return replace(base, time_limit=self.time_limit, seed=self.seed)


def reserve_threads(config: RaceConfig, available: int) -> tuple[int, int]:
    """Split cores into ``(pdhg threads, crossover pool)``; PDHG keeps at least one."""
    if available < 2:
        raise ValueError("need at least two cores to reserve crossover threads")
    pool = min(config.workers, available - 1)
    pdhg = available - pool
    if config.pdhg_threads is not None:
        pdhg = max(1, min(pdhg, config.pdhg_threads))
    return pdhg, pool


def _label(threshold) -> str | float:
    return threshold if threshold == MAIN else float(threshold)


class EventLog:
    """Thread-safe list of ``{event, threshold, t_ms, status}`` records."""

    def __init__(self, sink: Callable[[dict], None] | None = None):
        self._lock = threading.Lock()
        self.events: list[dict] = []
        self._sink = sink

    def record(self, event: str, threshold, t: float, status: str | None = None) -> None:
        ev = {"event": event, "threshold": _label(threshold), "t_ms": round(1000.0 * t, 3), "status": status}
        with self._lock:
            self.events.append(ev)
        if self._sink is not None:
            self._sink(ev)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


class WinnerSlot:
    """Compare-and-set holder for the single winner."""

    def __init__(self):
        self._lock = threading.Lock()
        self.label = None
        self.result = None

    def try_commit(self, label, result) -> bool:
        with self._lock:
            if self.label is not None:
                return False
            self.label, self.result = label, result
            return True

    @property
    def taken(self) -> bool:
        return self.label is not None


class WorkerPool:
    """Admission counter; a snapshot arriving at a full pool is dropped."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.running = 0
        self._lock = threading.Lock()

    def try_acquire(self) -> bool:
        with self._lock:
            if self.running >= self.capacity:
                return False
            self.running += 1
            return True

    def release(self) -> None:
        with self._lock:
            self.running -= 1


@dataclass
class WorkerRecord:
    threshold: float | str
    launch_time: float
    finish_time: float | None = None
    status: str = RUNNING
    detail: str = ""
    pivots: int = 0
    iteration: int = 0

    @property
    def terminal(self) -> bool:
        return self.status != RUNNING

    def to_dict(self) -> dict:
        return {
            "threshold": _label(self.threshold),
            "launch_time": self.launch_time,
            "finish_time": self.finish_time,
            "status": self.status,
            "detail": self.detail,
            "pivots": self.pivots,
            "iteration": self.iteration,
        }


@dataclass(eq=False)
class RaceOutcome:
    status: str
    winner: float | str | None
    result: CrossoverResult | None
    workers: list[WorkerRecord]
    pdhg_stop_reason: str
    pdhg_iterations: int
    wall_time: float
    events: list[dict] = field(default_factory=list)
    main: WorkerRecord | None = None
    pdhg_report: ResidualReport | None = None
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    objective: float = math.nan
    column_status: np.ndarray | None = None
    leaked_threads: int = 0

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "winner": None if self.winner is None else _label(self.winner),
            "objective": self.objective if math.isfinite(self.objective) else None,
            "wall_time": self.wall_time,
            "pdhg_stop_reason": self.pdhg_stop_reason,
            "pdhg_iterations": self.pdhg_iterations,
            "pdhg_report": self.pdhg_report.to_dict() if self.pdhg_report is not None else None,
            "crossover": self.result.to_dict() if self.result is not None else None,
            "workers": [w.to_dict() for w in self.workers],
            "main": self.main.to_dict() if self.main is not None else None,
        }


def _settle(record: WorkerRecord, result: CrossoverResult | None, verified: bool, won: bool, t: float) -> None:
    """Move a worker record to its terminal state."""
    record.finish_time = t
    if result is not None:
        record.pivots = result.pivots
        record.detail = result.status
    if won:
        record.status = WON
    elif result is not None and result.status == CANCELLED:
        record.status = CANCELLED_STATE
    elif result is not None and result.success and verified:
        record.status = FINISHED
    else:
        record.status = FAILED_STATE


class _Race:
    """Mutable state of one real-time race."""

    def __init__(self, std: LinearProgram, config: RaceConfig, runner, capacity: int, events: EventLog):
        self.std = std
        self.config = config
        self.runner = runner
        self.t0 = time.perf_counter()
        self.pool = WorkerPool(capacity)
        self.slot = WinnerSlot()
        self.log = events
        self.pdhg_cancel = CancelFlag()
        self.main_cancel = CancelFlag()
        self.flags: list[CancelFlag] = []
        self.records: list[WorkerRecord] = []
        self.threads: list[threading.Thread] = []
        self.timed_out = False
        self._lock = threading.Lock()

    def now(self) -> float:
        return time.perf_counter() - self.t0

    def time_up(self) -> None:
        self.timed_out = True
        self.pdhg_cancel.cancel(TIME_LIMIT)
        self.main_cancel.cancel(TIME_LIMIT)
        with self._lock:
            for f in self.flags:
                f.cancel(TIME_LIMIT)

    def offer(self, snap: Snapshot) -> None:
        if self.slot.taken or self.timed_out:
            return
        if not self.pool.try_acquire():
            self.log.record("drop", snap.threshold, self.now(), "pool full")
            return
        flag = CancelFlag()
        rec = WorkerRecord(snap.threshold, self.now(), iteration=snap.iteration)
        task = CrossoverTask(self.std, snap.iterate.copy(), snap.threshold, self.config.tolerances, flag, self.config.max_pivots)
        th = threading.Thread(target=self._work, args=(task, rec), name=f"crossover-{snap.threshold:g}", daemon=True)
        with self._lock:
            self.flags.append(flag)
            self.records.append(rec)
            self.threads.append(th)
        self.log.record("launch", snap.threshold, rec.launch_time)
        th.start()

    def _work(self, task: CrossoverTask, rec: WorkerRecord) -> None:
        result = None
        try:
            result = self.runner(task)
        except Exception as err:  # a broken worker must not take the race down
            result = CrossoverResult(cx.NUMERICAL, task.threshold, detail=repr(err))
        finally:
            self.settle(rec.threshold, rec, result)
            self.pool.release()

    def settle(self, label, rec: WorkerRecord, result: CrossoverResult | None) -> bool:
        verified = won = False
        if result is not None and result.success and result.basis is not None:
            verified = bool(verify_basic_optimal(self.std, result.basis, self.config.tolerances.eps_abs))
            won = verified and self.slot.try_commit(label, result)
        t = self.now()
        _settle(rec, result, verified, won, t)
        self.log.record("finish", label, t, rec.status)
        if won:
            self.log.record("win", label, t, WON)
            cancel_all_except(self, label)
        elif rec.status == CANCELLED_STATE:
            self.log.record("cancel", label, t, CANCELLED_STATE)
        return won

    def join_workers(self, deadline: float | None = None) -> None:
        for th in list(self.threads):
            if deadline is None:
                th.join()
            else:
                th.join(max(0.0, deadline - self.now()))


def cancel_all_except(race: _Race, winner) -> None:
    """Raise every cancel flag except the winner's; PDHG stops as won-by-crossover."""
    race.pdhg_cancel.cancel(WON_BY_CROSSOVER)
    if winner != MAIN:
        race.main_cancel.cancel(WON_BY_CROSSOVER)
    with race._lock:
        pairs = list(zip(race.records, race.flags))
    for rec, flag in pairs:
        if rec.threshold != winner:
            flag.cancel(WON_BY_CROSSOVER)


def run_race(
    lp: LinearProgram,
    config: RaceConfig = RaceConfig(),
    pdhg_runner: Callable | None = None,
    crossover_runner: Callable[[CrossoverTask], CrossoverResult] | None = None,
    on_event: Callable[[dict], None] | None = None,
    log: Callable[[str], None] | None = None,
) -> RaceOutcome:
    """Solve ``lp`` in baseline or concurrent mode.

    ``pdhg_runner(std_lp, pdhg_config, tolerances, sink, thresholds, cancel)``
    and ``crossover_runner(task)`` default to the real solvers and exist
    so tests can script timings.
    """
    smap = to_standard_form(lp)
    std = smap.lp
    tol = config.tolerances
    concurrent = config.mode == CONCURRENT
    capacity = 0
    if concurrent:
        capacity = reserve_threads(config, max(2, config.available_cores or os.cpu_count() or 2))[1]
    thresholds = schedule_thresholds(tol) if concurrent else []
    events = EventLog(on_event)
    race = _Race(std, config, crossover_runner or run_crossover, capacity, events)
    timer = threading.Timer(config.time_limit, race.time_up)
    timer.daemon = True
    timer.start()

    if pdhg_runner is None:
        def pdhg_runner(*args):
            return run_pdhg(*args, log=log)
    numerical = False
    pdhg_res = None
    try:
        pdhg_res = pdhg_runner(std, config.pdhg_config(), tol, race.offer if thresholds else None, thresholds, race.pdhg_cancel)
    except PdhgNumericalError:
        numerical = True

    main = None
    if pdhg_res is not None and pdhg_res.stop_reason == STOP_CONVERGED and not race.slot.taken and not race.timed_out:
        main = WorkerRecord(MAIN, race.now(), iteration=pdhg_res.iterations)
        events.record("launch", MAIN, main.launch_time)
        task = CrossoverTask(std, pdhg_res.iterate.copy(), tol.eps_rel, tol, race.main_cancel, config.max_pivots, MAIN)
        try:
            result = race.runner(task)
        except Exception as err:
            result = CrossoverResult(cx.NUMERICAL, tol.eps_rel, detail=repr(err))
        race.settle(MAIN, main, result)

    # workers may still win after PDHG gave up or the main crossover failed
    if not race.slot.taken:
        race.join_workers(deadline=config.time_limit)
        if not race.slot.taken and race.now() >= config.time_limit:
            race.time_up()
    race.join_workers()
    timer.cancel()
    timer.join()
    leaked = sum(th.is_alive() for th in race.threads) + timer.is_alive()

    stop = NUMERICAL if numerical else pdhg_res.stop_reason
    if stop == STOP_CANCELLED:
        stop = race.pdhg_cancel.reason or STOP_CANCELLED
    if race.slot.taken:
        status = SOLVED
    elif race.timed_out or stop in (STOP_TIME_LIMIT, TIME_LIMIT):
        status = TIME_LIMIT
    elif numerical:
        status = NUMERICAL
    else:
        status = FAILED

    outcome = RaceOutcome(
        status=status,
        winner=race.slot.label,
        result=race.slot.result,
        workers=list(race.records),
        pdhg_stop_reason=stop,
        pdhg_iterations=pdhg_res.iterations if pdhg_res is not None else 0,
        wall_time=race.now(),
        events=list(events.events),
        main=main,
        pdhg_report=pdhg_res.report if pdhg_res is not None else None,
        leaked_threads=leaked,
    )
    if outcome.solved:
        it = outcome.result.iterate
        outcome.x = smap.unmap_primal(it.x)
        outcome.y, outcome.z = smap.unmap_dual(it.y, it.z)
        outcome.objective = lp.objective(outcome.x)
        outcome.column_status = outcome.result.basis.status[: lp.ncols].copy()
    return outcome


# -- scripted components and discrete-event replay ---------------------------


@dataclass(frozen=True)
class ScriptedWorker:
    """Scripted crossover: takes ``duration`` seconds and succeeds or fails."""

    duration: float
    success: bool = True


def _script_for(durations: dict, threshold) -> ScriptedWorker:
    key = MAIN if threshold == MAIN else float(threshold)
    if key not in durations:
        raise KeyError(f"no scripted duration for threshold {key!r}")
    w = durations[key]
    return w if isinstance(w, ScriptedWorker) else ScriptedWorker(float(w))


class ScriptedPdhg:
    """Replays ``(time, residual)`` pairs in real time, offering snapshots of a
    fixed iterate through the same launch schedule as the real solver."""

    def __init__(self, trace: Sequence[tuple[float, float]], iterate: Iterate, poll: float = 1e-3):
        self.trace = list(trace)
        self.iterate = iterate
        self.poll = poll

    def __call__(self, std, cfg, tol, sink, thresholds, cancel) -> PdhgResult:
        schedule = LaunchSchedule(thresholds, tol.eps_rel)
        t0 = time.perf_counter()
        report = relative_report(std, self.iterate)
        k = 0
        for k, (t, resid) in enumerate(self.trace):
            while time.perf_counter() - t0 < t:
                if cancel.is_set():
                    return PdhgResult(self.iterate, report, STOP_CANCELLED, k, 0, time.perf_counter() - t0)
                time.sleep(min(self.poll, max(0.0, t - (time.perf_counter() - t0))))
            if cancel.is_set():
                return PdhgResult(self.iterate, report, STOP_CANCELLED, k, 0, time.perf_counter() - t0)
            if schedule.converged(resid):
                return PdhgResult(self.iterate, report, STOP_CONVERGED, k, 0, time.perf_counter() - t0)
            th = schedule.due(resid)
            if th is not None:
                schedule.advance()
                if sink is not None:
                    sink(Snapshot(self.iterate.copy(), th, report, "current", k, time.perf_counter() - t0))
        return PdhgResult(self.iterate, report, STOP_ITERATION_LIMIT, k, 0, time.perf_counter() - t0)


class ScriptedCrossover:
    """Runs the real crossover, then holds the result until the scripted
    duration has elapsed (polling the cancel flag like a pivot loop)."""

    def __init__(self, durations: dict, inner=run_crossover, poll: float = 1e-3):
        self.durations = durations
        self.inner = inner
        self.poll = poll

    def __call__(self, task: CrossoverTask) -> CrossoverResult:
        t0 = time.perf_counter()
        script = _script_for(self.durations, task.label or task.threshold)
        result = self.inner(task)
        while time.perf_counter() - t0 < script.duration:
            if task.cancel.is_set():
                return CrossoverResult(CANCELLED, task.threshold, wall_time=time.perf_counter() - t0)
            time.sleep(min(self.poll, script.duration))
        if task.cancel.is_set():
            return CrossoverResult(CANCELLED, task.threshold, wall_time=time.perf_counter() - t0)
        if not script.success:
            return CrossoverResult(cx.FAILED_VERIFY, task.threshold, result.pivots, time.perf_counter() - t0, detail="scripted failure")
        return result


def simulate_race(
    trace: Sequence[tuple[float, float]],
    durations: dict,
    tolerances: Tolerances = Tolerances(),
    workers: int = 4,
    mode: str = CONCURRENT,
) -> RaceOutcome:
    """Discrete-event replay of a race.

    ``trace`` lists ``(time, residual)`` for each PDHG iteration.
    ``durations`` maps each threshold (and ``"main"``) to a
    :class:`ScriptedWorker` or a plain duration. Worker finishes at or
    before an iteration's timestamp are processed before that iteration;
    simultaneous finishes commit in launch order.
    """
    thresholds = schedule_thresholds(tolerances) if mode == CONCURRENT else []
    schedule = LaunchSchedule(thresholds, tolerances.eps_rel)
    pool = WorkerPool(workers if mode == CONCURRENT else 0)
    slot = WinnerSlot()
    log = EventLog()
    records: list[WorkerRecord] = []
    finishing: list[tuple[float, int, WorkerRecord, ScriptedWorker]] = []
    seq = 0

    def launch(label, t, k):
        nonlocal seq
        script = _script_for(durations, label)
        rec = WorkerRecord(label, t, iteration=k)
        records.append(rec)
        log.record("launch", label, t)
        heapq.heappush(finishing, (t + script.duration, seq, rec, script))
        seq += 1
        return rec

    def drain(until: float) -> float | None:
        while finishing and finishing[0][0] <= until:
            t, _, rec, script = heapq.heappop(finishing)
            won = script.success and slot.try_commit(rec.threshold, None)
            rec.finish_time = t
            rec.status = WON if won else (FINISHED if script.success else FAILED_STATE)
            if rec.threshold != MAIN:
                pool.release()
            log.record("finish", rec.threshold, t, rec.status)
            if won:
                log.record("win", rec.threshold, t, WON)
                return t
        return None

    win_time = None
    stop = STOP_ITERATION_LIMIT
    iterations = 0
    main = None
    for k, (t, resid) in enumerate(trace):
        win_time = drain(t)
        if win_time is not None:
            stop = WON_BY_CROSSOVER
            break
        iterations = k
        if schedule.converged(resid):
            stop = STOP_CONVERGED
            main = launch(MAIN, t, k)
            break
        th = schedule.due(resid)
        if th is not None:
            schedule.advance()
            if pool.try_acquire():
                launch(th, t, k)
            else:
                log.record("drop", th, t, "pool full")
    if win_time is None:
        win_time = drain(math.inf)
    for _, _, rec, _ in sorted(finishing, key=lambda e: (e[0], e[1])):
        rec.status = CANCELLED_STATE
        rec.finish_time = win_time
        log.record("cancel", rec.threshold, win_time, CANCELLED_STATE)
    finishing.clear()

    workers_out = [r for r in records if r.threshold != MAIN]
    return RaceOutcome(
        status=SOLVED if slot.taken else FAILED,
        winner=slot.label,
        result=None,
        workers=workers_out,
        pdhg_stop_reason=stop,
        pdhg_iterations=iterations,
        wall_time=win_time if win_time is not None else (trace[-1][0] if trace else 0.0),
        events=list(log.events),
        main=main,
    )
