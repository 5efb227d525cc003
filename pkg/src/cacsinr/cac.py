"""Call admission control on top of the outage model.

Two policies are compared:

* ``outage_predictive`` admits a call iff the Gaussian outage estimate of the
  post-admission state meets every class's target.  New calls face a target
  tightened by ``handoff_guard``; handoff calls use the full target.
* ``fixed_threshold`` admits iff the post-admission deterministic load
  ``sum theta_i C_i N_i alpha_i`` stays within ``min_j eta_j`` (scaled by
  ``1 - handoff_guard`` for new calls).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError, InfeasibleError
from .outage import CellState, PowerAllocation, SystemConfig, class_thresholds, outage_gaussian

MAX_SCAN = 100_000


class CallKind(str, enum.Enum):
    NEW = "new"
    HANDOFF = "handoff"


class PolicyVariant(str, enum.Enum):
    OUTAGE_PREDICTIVE = "outage_predictive"
    FIXED_THRESHOLD = "fixed_threshold"


@dataclass(frozen=True)
class CallArrival:
    class_index: int
    kind: CallKind = CallKind.NEW

    def __post_init__(self):
        object.__setattr__(self, "kind", CallKind(self.kind))


@dataclass(frozen=True)
class CacPolicy:
    variant: PolicyVariant = PolicyVariant.OUTAGE_PREDICTIVE
    handoff_guard: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", PolicyVariant(self.variant))
        except ValueError:
            raise ConfigurationError(f"unknown policy variant {self.variant!r}") from None
        if not 0 <= self.handoff_guard < 1:
            raise ConfigurationError(f"handoff_guard must lie in [0, 1), got {self.handoff_guard}")

    def guard_for(self, kind: CallKind) -> float:
        return self.handoff_guard if kind == CallKind.NEW else 0.0


@dataclass(frozen=True)
class AdmissionDecision:
    admitted: bool
    predicted_p_out: Optional[tuple] = None
    binding_class: Optional[int] = None


class Admitter:
    """Precomputed admission rule for one (policy, classes, allocation, config).

    The simulator calls :meth:`decide` once per arrival, so the thresholds and
    per-class loads are computed once here.
    """

    def __init__(self, policy: CacPolicy, classes, alloc: PowerAllocation, cfg: SystemConfig):
        if len(alloc.theta) != len(classes):
            raise ConfigurationError("allocation and class list differ in length")
        self.policy = policy
        self.classes = tuple(classes)
        self.alloc = alloc
        self.cfg = cfg
        self.eta = class_thresholds(classes, cfg, alloc)
        self.targets = tuple(c.outage_target for c in classes)
        self.unit_load = tuple(th * c.codes * c.alpha for c, th in zip(classes, alloc.theta))
        self.load_cap = min(self.eta) if self.eta else 0.0

    def decide(self, state: CellState, arrival: CallArrival) -> AdmissionDecision:
        k = arrival.class_index
        if not 0 <= k < len(self.classes):
            raise ConfigurationError(f"unknown class position {k}")
        if len(state.own_counts) != len(self.classes):
            raise ConfigurationError("state and class list differ in length")
        guard = self.policy.guard_for(arrival.kind)
        post = state.added(k)

        if self.policy.variant == PolicyVariant.FIXED_THRESHOLD:
            load = 0.0
            for n, u in zip(post.own_counts, self.unit_load):
                load += u * n
            if load <= self.load_cap * (1.0 - guard):
                return AdmissionDecision(True)
            binding = min(range(len(self.eta)), key=self.eta.__getitem__)
            return AdmissionDecision(False, binding_class=binding)

        est = outage_gaussian(post, self.classes, self.alloc, self.cfg, eta=self.eta)
        for j, (p, target) in enumerate(zip(est.p_out, self.targets)):
            if p > target * (1.0 - guard):
                return AdmissionDecision(False, est.p_out, j)
        return AdmissionDecision(True, est.p_out)


def admit(state: CellState, arrival: CallArrival, policy: CacPolicy, classes,
          alloc: PowerAllocation, cfg: SystemConfig) -> AdmissionDecision:
    """Accept or block ``arrival`` given the current ``state`` (not mutated)."""
    return Admitter(policy, classes, alloc, cfg).decide(state, arrival)


def max_admissible(classes, alloc: PowerAllocation, cfg: SystemConfig, policy: CacPolicy,
                   class_index: int, kind: CallKind = CallKind.NEW) -> int:
    """Largest count of ``class_index`` calls reachable from an empty cell.

    Arrivals of a single class and kind are offered one at a time; the result
    is the count at which the first one is blocked.  A class whose threshold
    is 0 yields 0.
    """
    adm = Admitter(policy, classes, alloc, cfg)
    if not 0 <= class_index < len(classes):
        raise ConfigurationError(f"unknown class position {class_index}")
    arrival = CallArrival(class_index, kind)
    state = CellState.empty(len(classes))
    for n in range(MAX_SCAN):
        if not adm.decide(state, arrival).admitted:
            return n
        state = state.added(class_index)
    raise InfeasibleError(
        f"class {classes[class_index].index}: no blocking within {MAX_SCAN} calls",
        classes=(classes[class_index].index,),
    )
