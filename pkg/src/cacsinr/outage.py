"""Multi-class uplink outage analytics.

Total received power of a cell (normalized to the reference class) is

    lambda = sum_i theta_i * (N_i^a + M_i^a)

where ``N_i^a`` are active own-cell calls and ``M_i^a`` other-cell calls. The
other-cell part is never enumerated: it enters through the coefficients
``f1`` (mean) and ``f2`` (variance).  A class ``j`` is in outage when
``lambda >= eta_j``.  The Gaussian estimate uses the first two moments of
``lambda``; the Monte Carlo estimate samples the same model directly.

Class indices used by the functions here are positions in the ``classes``
sequence; ``TrafficClass.index`` is only a display label.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, InfeasibleError

SQRT2 = math.sqrt(2.0)

#: Monte Carlo samples per sub-stream; chunk ``c`` is seeded with
#: ``SeedSequence(seed, spawn_key=(c,))``.
MC_CHUNK = 1 << 16
MC_MIN_SAMPLES = 1000


@dataclass(frozen=True)
class SystemConfig:
    """Air-interface parameters shared by every class in a cell.

    ``noise_density`` and ``total_power`` only enter through their ratio
    ``N0/Y_b``; ``noise_density = 0`` models an interference-limited cell.
    """

    processing_gain: float = 256.0
    f1: float = 0.114
    f2: float = 0.44
    bandwidth_hz: float = 2.5e6
    base_rate_bps: float = 19.2e3
    noise_density: float = 0.0
    total_power: float = 1.0

    def __post_init__(self):
        checks = {
            "processing_gain": self.processing_gain > 0,
            "f1": self.f1 >= 0,
            "f2": self.f2 >= 0,
            "bandwidth_hz": self.bandwidth_hz > 0,
            "base_rate_bps": self.base_rate_bps > 0,
            "noise_density": self.noise_density >= 0,
            "total_power": self.total_power > 0,
        }
        for name, ok in checks.items():
            value = getattr(self, name)
            if not ok or not math.isfinite(value):
                raise ConfigurationError(f"system.{name} out of range: {value!r}")

    @property
    def noise_to_power(self) -> float:
        return self.noise_density / self.total_power


@dataclass(frozen=True)
class TrafficClass:
    """QoS profile of one call class.

    ``target_x`` is the required Eb/I0 (linear); use :meth:`from_ber` to derive
    it from a bit-error-rate target.
    """

    index: int
    rate_bps: float
    target_ber: float
    target_x: float
    alpha: float = 1.0
    codes: int = 1
    outage_target: float = 0.01

    def __post_init__(self):
        if not self.rate_bps > 0:
            raise ConfigurationError(f"class {self.index}: rate_bps must be > 0")
        if not 0 < self.target_ber < 0.5:
            raise ConfigurationError(f"class {self.index}: target_ber must lie in (0, 0.5)")
        if not (self.target_x > 0 and math.isfinite(self.target_x)):
            raise ConfigurationError(f"class {self.index}: target_x must be > 0")
        if not 0 < self.alpha <= 1:
            raise ConfigurationError(f"class {self.index}: alpha must lie in (0, 1]")
        if int(self.codes) != self.codes or self.codes < 1:
            raise ConfigurationError(f"class {self.index}: codes must be a positive integer")
        if not 0 < self.outage_target < 1:
            raise ConfigurationError(f"class {self.index}: outage_target must lie in (0, 1)")

    @classmethod
    def from_ber(cls, index, rate_bps, target_ber, alpha=1.0, codes=1, outage_target=0.01):
        return cls(
            index=index,
            rate_bps=rate_bps,
            target_ber=target_ber,
            target_x=ber_to_x(target_ber),
            alpha=alpha,
            codes=codes,
            outage_target=outage_target,
        )

    @property
    def aggregate_x(self) -> float:
        """Per-call Eb/I0 load ``C * X``."""
        return self.codes * self.target_x


@dataclass(frozen=True)
class CellState:
    own_counts: tuple
    other_cell_mode: str = "folded"

    def __post_init__(self):
        counts = tuple(int(n) for n in self.own_counts)
        if any(n < 0 for n in counts):
            raise ConfigurationError(f"negative call count in {counts}")
        if self.other_cell_mode != "folded":
            raise ConfigurationError(f"unsupported other_cell_mode {self.other_cell_mode!r}")
        object.__setattr__(self, "own_counts", counts)

    @classmethod
    def empty(cls, n_classes: int) -> "CellState":
        return cls((0,) * n_classes)

    def added(self, k: int, n: int = 1) -> "CellState":
        counts = list(self.own_counts)
        counts[k] += n
        return CellState(tuple(counts))


@dataclass(frozen=True)
class PowerAllocation:
    theta: tuple
    reference_class: int = 0

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        if not 0 <= self.reference_class < len(theta):
            raise ConfigurationError("reference_class out of range")
        if theta[self.reference_class] != 1.0:
            raise ConfigurationError("theta of the reference class must be exactly 1")
        if any(not (t > 0 and math.isfinite(t)) for t in theta):
            raise ConfigurationError(f"theta must be positive and finite: {theta}")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def uniform(cls, n_classes: int) -> "PowerAllocation":
        return cls((1.0,) * n_classes, 0)


@dataclass(frozen=True)
class OutageEstimate:
    trsp_mean: float
    trsp_stddev: float
    eta: tuple
    p_out: tuple
    method: str
    mc_ci_halfwidth: Optional[tuple] = None
    samples: Optional[int] = field(default=None, compare=False)


# --------------------------------------------------------------------------
# scalar helpers


def q_function(x: float) -> float:
    """Upper tail of the standard normal distribution."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"q_function needs a finite argument, got {x!r}")
    return 0.5 * math.erfc(x / SQRT2)


def q_inverse(p: float) -> float:
    """Inverse of :func:`q_function` on ``(0, 0.5]`` by bisection."""
    if not 0 < p <= 0.5:
        raise DomainError(f"q_inverse needs p in (0, 0.5], got {p!r}")
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if q_function(mid) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ber_to_x(ber: float) -> float:
    """Required Eb/I0 (linear) for coherent BPSK in AWGN: ``Q^-1(ber)^2 / 2``.

    ``ber = 0.5`` maps to 0 (no requirement).
    """
    if not 0 < ber <= 0.5:
        raise DomainError(f"ber must lie in (0, 0.5), got {ber!r}")
    if ber == 0.5:
        return 0.0
    z = q_inverse(ber)
    return z * z / 2.0


def single_class_capacity(cfg: SystemConfig, x: float) -> float:
    """Active-call count beyond which a single-class cell is in outage.

    ``1.5 * G * max(0, 1/x - N0/Y_b)``
    """
    if not x > 0:
        raise DomainError(f"target Eb/I0 must be > 0, got {x!r}")
    return 1.5 * cfg.processing_gain * max(0.0, 1.0 / x - cfg.noise_to_power)


def active_count_moments(n: int, alpha: float) -> tuple[float, float]:
    """Mean and variance of Binomial(n, alpha) active calls."""
    if n < 0:
        raise DomainError(f"call count must be >= 0, got {n}")
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    mean = n * alpha
    return mean, mean * (1.0 - alpha)


# --------------------------------------------------------------------------
# power allocation


def power_ratio(cls_i: TrafficClass, cls_j: TrafficClass, G: float) -> float:
    """Received-power ratio ``theta_i / theta_j`` for equal outage targets.

    ``C_i X_i (3G - 2 C_j X_j) / (C_j X_j (3G + 2 C_i X_i))``, evaluated as
    written; note ``power_ratio(c, c, G) != 1``.
    """
    ti, tj = cls_i.aggregate_x, cls_j.aggregate_x
    ratio = ti * (3.0 * G - 2.0 * tj) / (tj * (3.0 * G + 2.0 * ti))
    if not ratio > 0:
        raise InfeasibleError(
            f"class {cls_j.index}: 3G <= 2*C*X ({3.0 * G:g} <= {2.0 * tj:g}), "
            "power ratio is not positive",
            classes=(cls_j.index,),
        )
    return ratio


def allocate_powers(classes: Sequence[TrafficClass], cfg: SystemConfig, reference: int = 0) -> PowerAllocation:
    if not 0 <= reference < len(classes):
        raise ConfigurationError(f"reference class position {reference} out of range")
    ref = classes[reference]
    theta = []
    bad = []
    for k, c in enumerate(classes):
        if k == reference:
            theta.append(1.0)
            continue
        try:
            theta.append(power_ratio(c, ref, cfg.processing_gain))
        except InfeasibleError:
            bad.append(c.index)
    # The reference class appears as ``j`` in every ratio, so if it is
    # infeasible every other class fails too; report it explicitly.
    if 3.0 * cfg.processing_gain <= 2.0 * ref.aggregate_x:
        bad = [ref.index] + [b for b in bad if b != ref.index]
    if bad:
        raise InfeasibleError(f"power allocation infeasible for classes {bad}", classes=bad)
    return PowerAllocation(tuple(theta), reference)


# --------------------------------------------------------------------------
# moments and thresholds


def _check_dims(state: CellState, classes, alloc: Optional[PowerAllocation]):
    n = len(classes)
    if len(state.own_counts) != n:
        raise ConfigurationError(
            f"state has {len(state.own_counts)} counts but there are {n} classes"
        )
    if alloc is not None and len(alloc.theta) != n:
        raise ConfigurationError(f"allocation has {len(alloc.theta)} entries but there are {n} classes")


def trsp_moments(state: CellState, classes, alloc: PowerAllocation, cfg: SystemConfig) -> tuple[float, float]:
    """Mean and variance of the total received power (own + other cell)."""
    _check_dims(state, classes, alloc)
    weighted_mean = 0.0
    var = 0.0
    for n, c, th in zip(state.own_counts, classes, alloc.theta):
        m, v = active_count_moments(n, c.alpha)
        weighted_mean += th * m
        var += th * th * (v + cfg.f2 * m)
    return (1.0 + cfg.f1) * weighted_mean, var


def class_thresholds(classes, cfg: SystemConfig, alloc: Optional[PowerAllocation] = None,
                     strict: bool = False) -> tuple:
    """Outage thresholds ``eta_j = theta_j * capacity(C_j X_j)``.

    A class whose clamped threshold is 0 can never be served.  With
    ``strict=True`` that raises :class:`InfeasibleError`; otherwise its entry
    is 0.0 and every outage estimate reports it in outage.
    """
    if alloc is None:
        alloc = PowerAllocation.uniform(len(classes))
    elif len(alloc.theta) != len(classes):
        raise ConfigurationError("allocation and class list differ in length")
    eta = tuple(th * single_class_capacity(cfg, c.aggregate_x) for c, th in zip(classes, alloc.theta))
    if strict:
        bad = infeasible_classes(classes, eta)
        if bad:
            raise InfeasibleError(f"classes {bad} cannot meet their target at any load "
                                  "(N0/Y_b >= 1/(C*X))", classes=bad)
    return eta


def infeasible_classes(classes, eta) -> list:
    return [c.index for c, e in zip(classes, eta) if not e > 0]


# --------------------------------------------------------------------------
# outage estimates


def gaussian_tail(eta: float, mean: float, std: float) -> float:
    """``Pr{lambda >= eta}`` under a normal law, step function when std == 0."""
    if std > 0:
        return q_function((eta - mean) / std)
    return 0.0 if mean < eta else 1.0


def outage_gaussian(state: CellState, classes, alloc: PowerAllocation, cfg: SystemConfig,
                    eta: Optional[Sequence[float]] = None) -> OutageEstimate:
    """Gaussian-approximation outage probability of every class.

    ``eta`` may be passed to skip recomputing the thresholds.
    """
    mean, var = trsp_moments(state, classes, alloc, cfg)
    if eta is None:
        eta = class_thresholds(classes, cfg, alloc)
    std = math.sqrt(var)
    p = tuple(gaussian_tail(e, mean, std) for e in eta)
    return OutageEstimate(mean, std, tuple(eta), p, "gaussian")


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _chunk_sizes(samples: int) -> list:
    full, rest = divmod(samples, MC_CHUNK)
    return [MC_CHUNK] * full + ([rest] if rest else [])


def _sample_chunk(seed, chunk, size, counts, alphas, theta, other_mean, other_std, clip_other=True):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    total = np.zeros(size)
    for n, a, th in zip(counts, alphas, theta):
        if n:
            total += th * rng.binomial(n, a, size)
    other = rng.normal(other_mean, other_std, size)
    if clip_other:
        np.maximum(other, 0.0, out=other)
    total += other
    return total


def _mc_setup(state, classes, alloc, cfg):
    _check_dims(state, classes, alloc)
    s1 = sum(th * n * c.alpha for n, c, th in zip(state.own_counts, classes, alloc.theta))
    s2 = sum(th * th * n * c.alpha for n, c, th in zip(state.own_counts, classes, alloc.theta))
    return (state.own_counts, [c.alpha for c in classes], alloc.theta,
            cfg.f1 * s1, math.sqrt(cfg.f2 * s2))


def sample_trsp(state: CellState, classes, alloc: PowerAllocation, cfg: SystemConfig,
                samples: int, seed: int, clip_other: bool = True) -> np.ndarray:
    """Draw ``samples`` realizations of the total received power.

    Own-cell active calls are Binomial(N_i, alpha_i); the other-cell load is
    Normal(f1 * S1, f2 * S2) with ``S1 = sum theta_i Nbar_i`` and
    ``S2 = sum theta_i^2 Nbar_i``, clipped at 0 unless ``clip_other`` is off.
    Clipping leaves ``Pr{lambda >= eta}`` unchanged for ``eta`` above the
    own-cell part but biases the low moments at light load.
    """
    seed = _check_seed(seed)
    args = _mc_setup(state, classes, alloc, cfg)
    parts = [_sample_chunk(seed, c, size, *args, clip_other=clip_other)
             for c, size in enumerate(_chunk_sizes(samples))]
    return np.concatenate(parts) if parts else np.zeros(0)


def _tally_chunk(seed, chunk, size, args, eta):
    total = _sample_chunk(seed, chunk, size, *args)
    hits = [int(np.count_nonzero(total >= e)) for e in eta]
    return hits, float(total.sum()), float(np.dot(total, total))


def outage_montecarlo(state: CellState, classes, alloc: PowerAllocation, cfg: SystemConfig,
                      samples: int = 100_000, seed: int = 0, workers: int = 1) -> OutageEstimate:
    """Monte Carlo outage probability, the sampling counterpart of :func:`outage_gaussian`.

    The draw is split into sub-streams of :data:`MC_CHUNK` samples; tallies are
    merged in chunk order, so the result is identical for any ``workers``.
    ``trsp_mean``/``trsp_stddev`` are the empirical moments of the draw.
    """
    if samples < MC_MIN_SAMPLES:
        raise ConfigurationError(f"at least {MC_MIN_SAMPLES} samples required, got {samples}")
    seed = _check_seed(seed)
    args = _mc_setup(state, classes, alloc, cfg)
    eta = class_thresholds(classes, cfg, alloc)
    jobs = list(enumerate(_chunk_sizes(samples)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _tally_chunk(seed, job[0], job[1], args, eta), jobs))
    else:
        results = [_tally_chunk(seed, c, size, args, eta) for c, size in jobs]

    hits = [0] * len(eta)
    s = ss = 0.0
    for h, cs, css in results:
        hits = [a + b for a, b in zip(hits, h)]
        s += cs
        ss += css
    mean = s / samples
    var = max(ss / samples - mean * mean, 0.0)
    p = tuple(h / samples for h in hits)
    ci = tuple(1.96 * math.sqrt(pj * (1.0 - pj) / samples) for pj in p)
    return OutageEstimate(mean, math.sqrt(var), eta, p, "montecarlo", ci, samples)
