"""Discrete-event simulation of call arrivals and departures in one cell.

Every (class, kind) pair is an independent Poisson arrival stream with its
own random generator; the holding time of a call is drawn from the same
generator at arrival time whether or not the call is admitted.  Two runs with
the same seed therefore see identical arrival/holding sequences, which is
what :func:`compare_cacs` relies on (common random numbers).

Events at equal virtual time are processed in scheduling order.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cac import Admitter, CacPolicy, CallArrival, CallKind, max_admissible
from .errors import ConfigurationError
from .outage import CellState, PowerAllocation, SystemConfig, outage_gaussian

KINDS = (CallKind.NEW, CallKind.HANDOFF)
_ARRIVAL, _DEPARTURE = 0, 1


@dataclass(frozen=True)
class SimConfig:
    new_rates: tuple
    handoff_rates: tuple
    holding_times: tuple
    duration: float
    warmup: float = 0.0
    seed: int = 0
    outage_sampling: str = "per_event"

    def __post_init__(self):
        for name in ("new_rates", "handoff_rates", "holding_times"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        n = len(self.new_rates)
        if len(self.handoff_rates) != n or len(self.holding_times) != n:
            raise ConfigurationError("sim rate/holding vectors must have one entry per class")
        if any(r < 0 for r in self.new_rates + self.handoff_rates):
            raise ConfigurationError("arrival rates must be >= 0")
        if any(not h > 0 for h in self.holding_times):
            raise ConfigurationError("mean holding times must be > 0")
        if not (0 <= self.warmup < self.duration and math.isfinite(self.duration)):
            raise ConfigurationError(
                f"need duration > warmup >= 0, got duration={self.duration}, warmup={self.warmup}"
            )
        if self.outage_sampling not in ("per_event", "off"):
            raise ConfigurationError(f"outage_sampling must be 'per_event' or 'off'")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")

    @property
    def n_classes(self) -> int:
        return len(self.new_rates)

    def rate(self, k: int, kind: CallKind) -> float:
        return self.new_rates[k] if kind == CallKind.NEW else self.handoff_rates[k]


@dataclass
class KindStats:
    offered: int = 0
    admitted: int = 0
    blocked: int = 0

    @property
    def blocking(self) -> Optional[float]:
        return self.blocked / self.offered if self.offered else None

    @property
    def ci_halfwidth(self) -> Optional[float]:
        """95% normal-approximation half-width of the blocking estimate."""
        p = self.blocking
        if p is None:
            return None
        return 1.96 * math.sqrt(p * (1.0 - p) / self.offered)


@dataclass
class SimMetrics:
    stats: dict  # (class position, CallKind) -> KindStats
    mean_p_out: Optional[tuple]
    peak_calls: tuple
    events: int = 0
    event_log: Optional[list] = field(default=None, repr=False, compare=False)

    def get(self, k: int, kind) -> KindStats:
        return self.stats[(k, CallKind(kind))]

    def total(self, kind=None) -> KindStats:
        out = KindStats()
        for (_, kd), s in self.stats.items():
            if kind is None or kd == CallKind(kind):
                out.offered += s.offered
                out.admitted += s.admitted
                out.blocked += s.blocked
        return out


@dataclass(frozen=True)
class LogRecord:
    time: float
    type: str  # "arrival" | "departure"
    class_index: int
    kind: str
    decision: str  # "admit" | "block" | "-"
    counts: tuple

    def line(self) -> str:
        counts = ";".join(str(n) for n in self.counts)
        return f"{self.time!r},{self.type},{self.class_index},{self.kind},{self.decision},{counts}"


def _stream_rng(seed: int, k: int, kind: CallKind) -> random.Random:
    ss = np.random.SeedSequence(int(seed), spawn_key=(k, KINDS.index(kind)))
    return random.Random(int(ss.generate_state(2, np.uint64)[0]))


def run_sim(sim: SimConfig, policy: CacPolicy, classes, alloc: PowerAllocation, cfg: SystemConfig,
            log_events: bool = False) -> SimMetrics:
    """Simulate ``sim.duration`` virtual seconds under ``policy``.

    Counts, blocking and the time-average outage probability cover only
    ``[warmup, duration]``.  With ``log_events`` every event is recorded
    together with the post-event call counts.
    """
    n = len(classes)
    if sim.n_classes != n:
        raise ConfigurationError(f"sim config has {sim.n_classes} classes, scenario has {n}")
    adm = Admitter(policy, classes, alloc, cfg)
    track_outage = sim.outage_sampling == "per_event"

    heap = []
    seq = 0
    rngs = {}
    for k in range(n):
        for kind in KINDS:
            rate = sim.rate(k, kind)
            if rate > 0:
                rng = _stream_rng(sim.seed, k, kind)
                rngs[(k, kind)] = rng
                heapq.heappush(heap, (rng.expovariate(rate), seq, _ARRIVAL, k, kind))
                seq += 1

    stats = {(k, kind): KindStats() for k in range(n) for kind in KINDS}
    counts = [0] * n
    state = CellState.empty(n)
    peak = [0] * n
    log = [] if log_events else None
    events = 0

    def p_out(st):
        return outage_gaussian(st, classes, alloc, cfg, eta=adm.eta).p_out

    p_now = p_out(state) if track_outage else None
    p_area = [0.0] * n
    t_last = sim.warmup

    while heap and heap[0][0] <= sim.duration:
        t, _, etype, k, kind = heapq.heappop(heap)
        events += 1
        in_window = t >= sim.warmup
        if track_outage and in_window:
            dt = t - t_last
            for j in range(n):
                p_area[j] += p_now[j] * dt
            t_last = t

        if etype == _ARRIVAL:
            rng = rngs[(k, kind)]
            heapq.heappush(heap, (t + rng.expovariate(sim.rate(k, kind)), seq, _ARRIVAL, k, kind))
            seq += 1
            hold = rng.expovariate(1.0 / sim.holding_times[k])
            ok = adm.decide(state, CallArrival(k, kind)).admitted
            if in_window:
                s = stats[(k, kind)]
                s.offered += 1
                if ok:
                    s.admitted += 1
                else:
                    s.blocked += 1
            if ok:
                counts[k] += 1
                heapq.heappush(heap, (t + hold, seq, _DEPARTURE, k, kind))
                seq += 1
            decision = "admit" if ok else "block"
        else:
            counts[k] -= 1
            ok = True
            decision = "-"

        if ok:
            state = CellState(tuple(counts))
            if track_outage:
                p_now = p_out(state)
            if in_window and counts[k] > peak[k]:
                peak[k] = counts[k]
        if log is not None:
            log.append(LogRecord(t, "arrival" if etype == _ARRIVAL else "departure",
                                 k, kind.value, decision, tuple(counts)))

    mean_p = None
    if track_outage:
        dt = sim.duration - t_last
        for j in range(n):
            p_area[j] += p_now[j] * dt
        span = sim.duration - sim.warmup
        mean_p = tuple(a / span for a in p_area)
    return SimMetrics(stats, mean_p, tuple(peak), events, log)


def audit_event_log(log: Sequence[LogRecord], limits: Sequence[int]) -> list:
    """Return the records whose post-event count of some class exceeds ``limits``."""
    return [r for r in log if any(c > lim for c, lim in zip(r.counts, limits))]


def admissible_limits(classes, alloc, cfg, policy: CacPolicy) -> tuple:
    """Per-class single-class capacity under ``policy`` for the most permissive kind."""
    return tuple(max_admissible(classes, alloc, cfg, policy, k, CallKind.HANDOFF)
                 for k in range(len(classes)))


def erlang_b(channels: int, offered_load: float) -> float:
    """Erlang-B blocking probability via ``B(c) = a B(c-1) / (c + a B(c-1))``."""
    if channels < 0 or offered_load < 0:
        raise ConfigurationError("erlang_b needs channels >= 0 and offered_load >= 0")
    b = 1.0
    for c in range(1, int(channels) + 1):
        b = offered_load * b / (c + offered_load * b)
    return b


@dataclass
class Comparison:
    policies: tuple
    metrics: tuple
    rows: list  # one dict per (class, kind)


def compare_cacs(sim: SimConfig, classes, alloc: PowerAllocation, cfg: SystemConfig,
                 policies: Sequence[CacPolicy]) -> Comparison:
    """Run two policies on common random numbers and tabulate them side by side."""
    if len(policies) != 2:
        raise ConfigurationError("compare_cacs needs exactly two policies")
    a, b = (run_sim(sim, p, classes, alloc, cfg) for p in policies)
    rows = []
    for k in range(len(classes)):
        for kind in KINDS:
            sa, sb = a.get(k, kind), b.get(k, kind)
            rows.append({
                "class": classes[k].index,
                "kind": kind.value,
                "offered": sa.offered,
                "blocking_a": sa.blocking,
                "ci_a": sa.ci_halfwidth,
                "blocking_b": sb.blocking,
                "ci_b": sb.ci_halfwidth,
                "mean_p_out_a": a.mean_p_out[k] if a.mean_p_out else None,
                "mean_p_out_b": b.mean_p_out[k] if b.mean_p_out else None,
            })
    return Comparison(tuple(policies), (a, b), rows)
