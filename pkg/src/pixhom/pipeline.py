"""Batch persistence over many images with a pool of worker processes.

Three ways to hand jobs to workers:

``by_executors``
    seeded shuffle, then ``m`` contiguous chunks fixed up front (no rebalancing).
``by_images``
    one shared queue; an idle worker pulls the next job.
``lpt``
    static assignment by the longest-processing-time rule over estimated costs.

Workers receive only file paths and load their own images.
"""
from __future__ import annotations

import enum
import heapq
import json
import multiprocessing as mp
import os
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .datagen import read_manifest
from .diagram import write_diagram_csv
from .errors import PixHomError, SchedulingError, SizeError
from .phcore import compute_ph
from .raster import (DEFAULT_K, FilterLevel, apply_background_mask, estimate_threshold,
                     foreground_count, read_raster, scaled_threshold)


class Strategy(str, enum.Enum):
    BY_EXECUTORS = "by_executors"
    BY_IMAGES = "by_images"
    LPT = "lpt"

    @classmethod
    def parse(cls, name) -> "Strategy":
        if isinstance(name, cls):
            return name
        key = str(name).lower()
        aliases = {"executors": cls.BY_EXECUTORS, "images": cls.BY_IMAGES}
        return aliases.get(key) or cls(key)


@dataclass(frozen=True)
class Job:
    id: int
    path: Path
    filter_level: FilterLevel = FilterLevel.VANILLA
    cost: float | None = None


@dataclass(frozen=True)
class Schedule:
    """Static schedules fill ``assignment``; the dynamic one only fixes ``queue`` order."""

    strategy: Strategy
    workers: int
    assignment: tuple[tuple[int, ...], ...] | None = None
    queue: tuple[int, ...] = ()

    @property
    def is_static(self) -> bool:
        return self.assignment is not None

    def job_ids(self) -> list[int]:
        if self.is_static:
            return [j for chunk in self.assignment for j in chunk]
        return list(self.queue)


class BatchFailed(PixHomError):
    pass


# --------------------------------------------------------------------------- planning


def estimate_costs(jobs, thresholds: dict | None = None, k: float = DEFAULT_K):
    """Attach cost = number of foreground pixels at each job's effective threshold.

    Returns ``(costed_jobs, failed)`` where ``failed`` maps job id to an error message.
    When ``thresholds`` lacks a job, its base threshold is estimated from the image,
    which is then dropped again.
    """
    thresholds = thresholds or {}
    out, failed = [], {}
    for job in jobs:
        try:
            level = FilterLevel.parse(job.filter_level)
            if level is FilterLevel.VANILLA:
                t = -np.inf
            elif job.id in thresholds:
                t = scaled_threshold(thresholds[job.id], level)
            else:
                t = scaled_threshold(estimate_threshold(read_raster(job.path), k), level)
            out.append(replace(job, cost=float(foreground_count(job.path, t))))
        except (OSError, PixHomError, ValueError) as exc:
            failed[job.id] = f"{type(exc).__name__}: {exc}"
    return out, failed


def plan_by_executors(jobs, m: int, seed: int = 0) -> Schedule:
    if m < 1:
        raise SchedulingError("need at least one worker")
    ids = np.array([j.id for j in jobs], dtype=np.int64)
    shuffled = np.random.default_rng(seed).permutation(ids)
    chunks = tuple(tuple(int(x) for x in c) for c in np.array_split(shuffled, m))
    return Schedule(Strategy.BY_EXECUTORS, m, assignment=chunks)


def plan_by_images(jobs, m: int) -> Schedule:
    if m < 1:
        raise SchedulingError("need at least one worker")
    return Schedule(Strategy.BY_IMAGES, m, queue=tuple(sorted(j.id for j in jobs)))


def plan_lpt(jobs, m: int) -> Schedule:
    """Longest-processing-time rule; ties go to the lowest job id / worker index."""
    if m < 1:
        raise SchedulingError("need at least one worker")
    for j in jobs:
        if j.cost is None or not j.cost >= 0:
            raise SchedulingError(f"job {j.id} has no valid cost estimate")
    order = sorted(jobs, key=lambda j: (-j.cost, j.id))
    heap = [(0.0, w) for w in range(m)]
    chunks = [[] for _ in range(m)]
    for j in order:
        load, w = heapq.heappop(heap)
        chunks[w].append(j.id)
        heapq.heappush(heap, (load + j.cost, w))
    return Schedule(Strategy.LPT, m, assignment=tuple(tuple(c) for c in chunks))


def lpt_makespan(costs, m: int):
    jobs = [Job(i, Path(), cost=c) for i, c in enumerate(costs)]
    loads, span = simulate(plan_lpt(jobs, m), dict(enumerate(costs)))
    return span


def brute_force_makespan(costs, m: int):
    """Optimal makespan by exhaustive branch and bound (n <= 12, m <= 4)."""
    costs = list(costs)
    if len(costs) > 12 or m > 4:
        raise SizeError("exhaustive makespan limited to n <= 12 jobs and m <= 4 machines")
    if m < 1:
        raise SchedulingError("need at least one machine")
    if not costs:
        return 0
    costs.sort(reverse=True)
    best = sum(costs)
    loads = [0] * m

    def rec(i):
        nonlocal best
        if i == len(costs):
            best = min(best, max(loads))
            return
        seen = set()
        for w in range(m):
            # machines with equal load are interchangeable
            if loads[w] in seen or loads[w] + costs[i] >= best:
                continue
            seen.add(loads[w])
            loads[w] += costs[i]
            rec(i + 1)
            loads[w] -= costs[i]

    rec(0)
    return best


def simulate(schedule: Schedule, durations: dict):
    """Per-worker busy time and makespan of a schedule for known job durations.

    The dynamic queue is list scheduling: the next job goes to the worker that
    frees up first (lowest index on ties).
    """
    m = schedule.workers
    if schedule.is_static:
        loads = [sum(durations[j] for j in chunk) for chunk in schedule.assignment]
    else:
        loads = [0] * m
        heap = [(0, w) for w in range(m)]
        for j in schedule.queue:
            t, w = heapq.heappop(heap)
            loads[w] = t + durations[j]
            heapq.heappush(heap, (loads[w], w))
    return loads, max(loads, default=0)


def make_schedule(jobs, m: int, strategy, seed: int = 0) -> Schedule:
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.BY_EXECUTORS:
        return plan_by_executors(jobs, m, seed)
    if strategy is Strategy.BY_IMAGES:
        return plan_by_images(jobs, m)
    return plan_lpt(jobs, m)


# --------------------------------------------------------------------------- execution


@dataclass
class Execution:
    records: list[dict]
    worker_wall: list[float]
    worker_cpu: list[float]
    elapsed: float

    @property
    def makespan(self) -> float:
        return max(self.worker_wall, default=0.0)

    @property
    def cpu_makespan(self) -> float:
        return max(self.worker_cpu, default=0.0)


def _worker(wid, inbox, outbox, payloads, work):
    t0 = time.perf_counter()
    c0 = time.process_time()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        while True:
            jid = inbox.get()
            if jid is None:
                break
            start = time.perf_counter()
            try:
                rec = {"status": "ok", **work(payloads[jid])}
            except Exception as exc:  # per-job failure must not stop the worker
                rec = {"status": f"error: {type(exc).__name__}: {exc}"}
            rec.update(id=jid, worker=wid, wall_ms=1000.0 * (time.perf_counter() - start))
            outbox.put(("job", rec))
    outbox.put(("worker", wid, time.perf_counter() - t0, time.process_time() - c0))


def _context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else "spawn")


def execute(schedule: Schedule, payloads: dict, work: Callable[[object], dict]) -> Execution:
    """Run ``work(payloads[id])`` for every scheduled job on ``schedule.workers`` processes."""
    ctx = _context()
    m = schedule.workers
    outbox = ctx.Queue()
    if schedule.is_static:
        inboxes = [ctx.Queue() for _ in range(m)]
        for q, chunk in zip(inboxes, schedule.assignment):
            for jid in chunk:
                q.put(jid)
            q.put(None)
    else:
        shared = ctx.Queue()
        for jid in schedule.queue:
            shared.put(jid)
        for _ in range(m):
            shared.put(None)
        inboxes = [shared] * m

    start = time.perf_counter()
    procs = [ctx.Process(target=_worker, args=(w, inboxes[w], outbox, payloads, work), daemon=True)
             for w in range(m)]
    for p in procs:
        p.start()
    records, wall, cpu = [], [0.0] * m, [0.0] * m
    done = 0
    while done < m:
        msg = outbox.get()
        if msg[0] == "job":
            records.append(msg[1])
        else:
            _, wid, wall[wid], cpu[wid] = msg
            done += 1
    for p in procs:
        p.join()
    elapsed = time.perf_counter() - start
    records.sort(key=lambda r: r["id"])
    return Execution(records, wall, cpu, elapsed)


@dataclass(frozen=True)
class JobSpec:
    job: Job
    out_dir: Path
    k: float = DEFAULT_K
    strict_distill: bool = False


def process_job(spec: JobSpec) -> dict:
    """Load and preprocess one image, then compute and write its diagram."""
    job = spec.job
    raster = read_raster(job.path)
    level = FilterLevel.parse(job.filter_level)
    mask = None
    dropped = 0.0
    if level is not FilterLevel.VANILLA:
        mask = apply_background_mask(raster, scaled_threshold(estimate_threshold(raster, spec.k), level))
        dropped = mask.dropped_fraction
    diagram = compute_ph(raster, mask, strict_distill=spec.strict_distill)
    write_diagram_csv(diagram, spec.out_dir / f"{job.id}.dgm.csv")
    return {"dropped_fraction": dropped, "pairs": len(diagram)}


@dataclass
class BatchResult:
    records: list[dict]
    worker_wall: list[float]
    worker_cpu: list[float]
    elapsed: float
    strategy: Strategy
    schedule: Schedule | None = None
    out_dir: Path | None = None
    summary_path: Path | None = None
    failed: list[int] = field(default_factory=list)

    @property
    def makespan(self) -> float:
        return max(self.worker_wall, default=0.0)

    @property
    def cpu_makespan(self) -> float:
        return max(self.worker_cpu, default=0.0)

    def csv_path(self, job_id) -> Path:
        return self.out_dir / f"{job_id}.dgm.csv"


def run_batch(manifest, m: int, strategy, filter_level="vanilla", out_dir="out", *,
              k: float = DEFAULT_K, seed: int = 0, strict_distill: bool = False,
              summary_name: str = "summary.jsonl") -> BatchResult:
    strategy = Strategy.parse(strategy)
    level = FilterLevel.parse(filter_level)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = read_manifest(manifest)
    jobs = [Job(i, p, level) for i, p in enumerate(paths)]

    pre_failed: dict[int, str] = {}
    if strategy is Strategy.LPT:
        jobs, pre_failed = estimate_costs(jobs, k=k)
    schedule = make_schedule(jobs, m, strategy, seed)
    payloads = {j.id: JobSpec(j, out_dir, k, strict_distill) for j in jobs}
    run = execute(schedule, payloads, process_job)

    records = run.records + [
        {"id": jid, "worker": None, "wall_ms": 0.0, "status": f"error: {msg}"}
        for jid, msg in pre_failed.items()
    ]
    by_id = {j: p for j, p in enumerate(paths)}
    for rec in records:
        rec["path"] = str(by_id[rec["id"]])
        rec.setdefault("dropped_fraction", None)
    records.sort(key=lambda r: r["id"])
    failed = [r["id"] for r in records if r["status"] != "ok"]

    result = BatchResult(records, run.worker_wall, run.worker_cpu, run.elapsed, strategy,
                         schedule, out_dir, out_dir / summary_name, failed)
    write_summary(result)
    if records and len(failed) == len(records):
        raise BatchFailed(f"all {len(records)} jobs failed; see {result.summary_path}")
    return result


SUMMARY_FIELDS = ("id", "path", "status", "wall_ms", "dropped_fraction", "worker")


def write_summary(result: BatchResult) -> None:
    with open(result.summary_path, "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps({k: rec.get(k) for k in SUMMARY_FIELDS}) + "\n")
        fh.write(json.dumps({
            "makespan_ms": 1000.0 * result.makespan,
            "strategy": result.strategy.value,
            "workers": len(result.worker_wall),
            "elapsed_ms": 1000.0 * result.elapsed,
            "cpu_makespan_ms": 1000.0 * result.cpu_makespan,
        }) + "\n")


def available_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
