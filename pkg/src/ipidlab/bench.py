"""Multi-worker contention benchmark over a packet trace.

Workers start behind a barrier, then independently and repeatedly scan
the trace, requesting one IPID per record, until the wall-clock duration
elapses. Counting and timing stay worker-local (merged after join) so
the hot loop is unperturbed; the first 5% of the duration is excluded
from request-time measurement as warmup. Workers are pinned to distinct
CPUs where the platform allows it (silent fallback otherwise).

Per-connection is benchmarked at its real cost profile: the counter
lives in caller-owned state, so a request is a bare local increment
with no lookup or concurrency control.
"""
from __future__ import annotations

import csv
import os
import threading
import time
import warnings
from dataclasses import dataclass, field
from statistics import mean, pstdev
from typing import Callable, Optional

from .constants import IPID_MASK
from .selectors import (
    METHOD_GLOBAL,
    METHOD_PER_BUCKET_EXCLUSIVE,
    METHOD_PER_BUCKET_RACY,
    METHOD_PER_CONNECTION,
    METHOD_PER_DESTINATION,
    METHOD_PRNG_PURE,
    METHOD_PRNG_QUEUE,
    METHOD_PRNG_SHUFFLE,
    SelectorConfig,
    new_selector,
)
from .trace import Trace

__all__ = [
    "BenchConfig",
    "BenchReport",
    "BenchmarkError",
    "TrialResult",
    "WorkerStats",
    "REPORT_HEADER",
    "export_report",
    "read_report_rows",
    "run_benchmark",
]

REPORT_HEADER = ["method", "workers", "trial", "worker_id", "count", "mean_ns", "throughput"]

_CHUNK = 256  # records per stop-flag/time check in the worker loop
WARMUP_FRACTION = 0.05


class BenchmarkError(RuntimeError):
    """A worker failed; the trial is aborted with its diagnostic."""


@dataclass
class BenchConfig:
    """Benchmark shape: which selector, how many workers, how long."""

    selector: SelectorConfig
    workers: int = 1
    duration_s: float = 10.0
    trials: int = 10
    pin_cpus: bool = True

    def validate(self) -> None:
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        available = os.cpu_count() or 1
        if self.workers > available:
            warnings.warn(
                f"workers={self.workers} exceeds available execution units "
                f"({available}); request times will include oversubscription",
                stacklevel=2,
            )


@dataclass(frozen=True)
class WorkerStats:
    worker_id: int
    count: int
    mean_ns: float


@dataclass(frozen=True)
class TrialResult:
    workers: tuple[WorkerStats, ...]
    throughput: float  # IPIDs/s, all workers combined
    counter_start: Optional[int] = None  # globally incrementing only
    counter_end: Optional[int] = None

    @property
    def total_count(self) -> int:
        return sum(w.count for w in self.workers)


@dataclass
class BenchReport:
    """Per-trial, per-worker counts and request times plus aggregates."""

    method: str
    workers: int
    duration_s: float
    trials: list[TrialResult] = field(default_factory=list)

    @property
    def mean_throughput(self) -> float:
        return mean(t.throughput for t in self.trials)

    @property
    def std_throughput(self) -> float:
        return pstdev(t.throughput for t in self.trials)

    @property
    def mean_request_ns(self) -> float:
        return mean(w.mean_ns for t in self.trials for w in t.workers)

    @property
    def std_request_ns(self) -> float:
        return pstdev(w.mean_ns for t in self.trials for w in t.workers)


def _make_request_fn(selector, worker_id: int) -> Callable:
    """Bind the per-record request path for one worker."""
    method = selector.method
    if method == METHOD_GLOBAL:
        next_global = selector.next_global
        return lambda rec: next_global()
    if method == METHOD_PER_CONNECTION:
        # caller-owned counter: a request is a local increment
        counter = worker_id * 7919 & IPID_MASK
        def request(rec, _mask=IPID_MASK):
            nonlocal counter
            counter = (counter + 1) & _mask
            return counter
        return request
    if method == METHOD_PER_DESTINATION:
        next_dest = selector.next_per_destination
        return lambda rec: next_dest(rec.flow.src_addr, rec.flow.dst_addr)
    if method in (METHOD_PER_BUCKET_EXCLUSIVE, METHOD_PER_BUCKET_RACY):
        next_bucket = selector.next_per_bucket
        return lambda rec: next_bucket(rec.flow)
    if method == METHOD_PRNG_QUEUE:
        next_queue = selector.next_prng_queue
        return lambda rec: next_queue()
    if method == METHOD_PRNG_SHUFFLE:
        next_shuffle = selector.next_prng_shuffle
        return lambda rec: next_shuffle()
    if method == METHOD_PRNG_PURE:
        # per-thread generator bound once; salts increment per packet
        return selector.thread_requester(start_salt=worker_id << 32)
    raise ValueError(f"unknown method {method!r}")


def _pin_to_cpu(worker_id: int) -> None:
    try:
        cpus = sorted(os.sched_getaffinity(0))
        os.sched_setaffinity(0, {cpus[worker_id % len(cpus)]})
    except (AttributeError, OSError):
        pass  # pinning unsupported here; run unpinned


def _worker(
    worker_id: int,
    selector,
    records: list,
    barrier: threading.Barrier,
    duration_s: float,
    pin: bool,
    out: list,
    errors: list,
    stop: threading.Event,
) -> None:
    try:
        if pin:
            _pin_to_cpu(worker_id)
        request = _make_request_fn(selector, worker_id)
        n = len(records)
        perf = time.perf_counter
        barrier.wait()
        t0 = perf()
        deadline = t0 + duration_s
        warmup_end = t0 + duration_s * WARMUP_FRACTION
        count = 0
        timed_from = t0
        timed_base = 0
        warmed = False
        pos = 0
        now = t0
        while True:
            end = pos + _CHUNK
            if end >= n:
                block = records[pos:n]
                pos = 0
            else:
                block = records[pos:end]
                pos = end
            for rec in block:
                request(rec)
            count += len(block)
            now = perf()
            if not warmed and now >= warmup_end:
                warmed = True
                timed_from = now
                timed_base = count
            if now >= deadline or stop.is_set():
                break
        timed_requests = count - timed_base
        busy = now - timed_from
        if timed_requests <= 0 or busy <= 0:
            # duration too short to leave the warmup window; fall back
            # to the whole run
            timed_requests = count
            busy = now - t0
        mean_ns = busy / timed_requests * 1e9 if timed_requests else float("nan")
        out[worker_id] = WorkerStats(worker_id=worker_id, count=count, mean_ns=mean_ns)
    except BaseException as exc:  # surfaced as BenchmarkError after join
        errors.append((worker_id, exc))
        stop.set()
        try:
            barrier.abort()
        except Exception:
            pass


def run_benchmark(config: BenchConfig, trace: Trace) -> BenchReport:
    """Run ``config.trials`` independent trials and aggregate them.

    Each trial constructs a fresh selector from the config, so trials
    are independent and deterministic given the selector seed.
    """
    config.validate()
    if not trace.records:
        raise ValueError("trace is empty")
    report = BenchReport(
        method=config.selector.method,
        workers=config.workers,
        duration_s=config.duration_s,
    )
    for _trial in range(config.trials):
        report.trials.append(_run_trial(config, trace))
    return report


def _run_trial(config: BenchConfig, trace: Trace) -> TrialResult:
    selector = new_selector(config.selector)
    workers = config.workers
    barrier = threading.Barrier(workers)
    stop = threading.Event()
    out: list = [None] * workers
    errors: list = []
    counter_start = selector.counter if config.selector.method == METHOD_GLOBAL else None
    threads = [
        threading.Thread(
            target=_worker,
            args=(
                w,
                selector,
                trace.records,
                barrier,
                config.duration_s,
                config.pin_cpus,
                out,
                errors,
                stop,
            ),
            name=f"ipid-bench-{w}",
            daemon=True,
        )
        for w in range(workers)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        worker_id, exc = errors[0]
        raise BenchmarkError(f"worker {worker_id} failed: {exc!r}") from exc
    counter_end = selector.counter if config.selector.method == METHOD_GLOBAL else None
    stats = tuple(out)
    total = sum(w.count for w in stats)
    return TrialResult(
        workers=stats,
        throughput=total / config.duration_s,
        counter_start=counter_start,
        counter_end=counter_end,
    )


def export_report(report: BenchReport, path) -> None:
    """Write one CSV row per (trial, worker) with the stable schema."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for trial_idx, trial in enumerate(report.trials):
            for w in trial.workers:
                writer.writerow(
                    [
                        report.method,
                        report.workers,
                        trial_idx,
                        w.worker_id,
                        w.count,
                        repr(w.mean_ns),
                        repr(trial.throughput),
                    ]
                )


def read_report_rows(path) -> list[dict]:
    """Re-parse an exported report CSV into typed row dicts."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_HEADER:
            raise ValueError(
                f"unexpected report header {reader.fieldnames!r}, "
                f"expected {REPORT_HEADER!r}"
            )
        rows = []
        for row in reader:
            rows.append(
                {
                    "method": row["method"],
                    "workers": int(row["workers"]),
                    "trial": int(row["trial"]),
                    "worker_id": int(row["worker_id"]),
                    "count": int(row["count"]),
                    "mean_ns": float(row["mean_ns"]),
                    "throughput": float(row["throughput"]),
                }
            )
        return rows
