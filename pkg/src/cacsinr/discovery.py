"""Angle-SINR Table (AST) construction by directional broadcast sweeps.

A node ``n`` sweeps 13 directional requests at 0, 30, ..., 360 degrees,
``spacing`` seconds apart.  Each neighbor that hears a request records the
measured SINR under that angle in the column it keeps for ``n``; the first
request from ``n`` arms a timer of ``13 * spacing + guard`` seconds, after
which the neighbor returns the whole column.  ``n`` collects the columns
until a deadline and assembles its table.

Azimuth 0 points along +x, angles grow counterclockwise.  Cells that were
not detected hold :data:`BELOW_DETECTION`.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

ANGLES = tuple(range(0, 361, 30))
BELOW_DETECTION = -math.inf
SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class NodePosition:
    id: str
    x: float
    y: float
    tx_power_dbm: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        for name in ("x", "y", "tx_power_dbm"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigurationError(f"node {self.id}: {name} must be finite")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class PropagationConfig:
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 40.0
    noise_floor_dbm: float = -90.0
    beamwidth_deg: float = 30.0
    mainlobe_gain_db: float = 10.0
    sidelobe_gain_db: float = -10.0
    detection_threshold_db: float = 0.0

    def __post_init__(self):
        if self.path_loss_exponent < 2:
            raise ConfigurationError("path_loss_exponent must be >= 2")
        if not 0 < self.beamwidth_deg <= 360:
            raise ConfigurationError("beamwidth_deg must lie in (0, 360]")
        if self.mainlobe_gain_db < self.sidelobe_gain_db:
            raise ConfigurationError("mainlobe gain must not be below sidelobe gain")


@dataclass(frozen=True)
class ProtocolConfig:
    spacing: float = 1e-3       # between consecutive directional requests (s)
    guard: float = 1e-3         # added to 13 * spacing for the reply timer (s)
    collect_margin: float = 1e-3

    def __post_init__(self):
        if not (self.spacing > 0 and self.guard >= 0 and self.collect_margin >= 0):
            raise ConfigurationError("spacing must be > 0, guard and collect_margin >= 0")

    @property
    def reply_wait(self) -> float:
        return len(ANGLES) * self.spacing + self.guard


@dataclass(frozen=True)
class DiscoveryMessage:
    kind: str  # "dir_request" | "column_reply"
    sender: str
    sweep_id: int
    emitted_at: float
    angle_deg: Optional[int] = None
    column: tuple = ()  # ((angle, sinr_db), ...)


def _norm_angle(angle_deg: float) -> float:
    return float(angle_deg) % 360.0


def bearing_deg(tx: NodePosition, rx: NodePosition) -> float:
    return math.degrees(math.atan2(rx.y - tx.y, rx.x - tx.x))


def distance(a: NodePosition, b: NodePosition) -> float:
    return math.hypot(b.x - a.x, b.y - a.y)


def link_sinr(tx: NodePosition, rx: NodePosition, angle_deg: float, prop: PropagationConfig) -> float:
    """SINR (dB) at ``rx`` of a ``tx`` broadcast steered to ``angle_deg``.

    Log-distance path loss and a two-level antenna pattern; no co-channel
    interference during discovery, so SINR is received power over the noise floor.
    """
    d = distance(tx, rx)
    if d == 0:
        raise DomainError(f"nodes {tx.id} and {rx.id} are coincident")
    offset = (_norm_angle(angle_deg) - bearing_deg(tx, rx) + 180.0) % 360.0 - 180.0
    gain = prop.mainlobe_gain_db if abs(offset) <= prop.beamwidth_deg / 2 else prop.sidelobe_gain_db
    loss = prop.reference_loss_db + 10.0 * prop.path_loss_exponent * math.log10(d)
    return tx.tx_power_dbm + gain - loss - prop.noise_floor_dbm


@dataclass(frozen=True)
class AngleSinrTable:
    owner: str
    timestamp: float
    entries: dict  # neighbor id -> 13 SINR values (dB), ANGLES order
    angles: tuple = ANGLES

    def __post_init__(self):
        for nb, col in self.entries.items():
            if len(col) != len(ANGLES):
                raise ConfigurationError(f"neighbor {nb}: expected {len(ANGLES)} cells")
            if col[0] != col[-1]:
                raise ConfigurationError(f"neighbor {nb}: 0 and 360 degree cells differ")
            if not any(math.isfinite(v) for v in col):
                raise ConfigurationError(f"neighbor {nb}: no detected cell")

    @property
    def neighbors(self) -> list:
        return list(self.entries)

    def cell(self, neighbor: str, angle: int) -> float:
        return self.entries[neighbor][ANGLES.index(angle)]

    def to_csv(self) -> str:
        """Rows are angles, columns neighbors; undetected cells are ``NA``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["angle_deg", *self.neighbors])
        for r, angle in enumerate(ANGLES):
            w.writerow([angle, *(_fmt_cell(self.entries[nb][r]) for nb in self.neighbors)])
        return buf.getvalue()


def _fmt_cell(v: float) -> str:
    return repr(v) if math.isfinite(v) else "NA"


def assemble_ast(owner: str, timestamp: float, replies: dict, order: Optional[Sequence[str]] = None) -> AngleSinrTable:
    """Build the table from ``replies`` (neighbor -> iterable of (angle, sinr)).

    Neighbors appear in ``order`` when given, otherwise in reply order.
    """
    ids = [nb for nb in (order if order is not None else replies) if nb in replies]
    entries = {}
    for nb in ids:
        col = [BELOW_DETECTION] * len(ANGLES)
        for angle, sinr in replies[nb]:
            col[ANGLES.index(angle)] = sinr
        if any(math.isfinite(v) for v in col):
            entries[nb] = tuple(col)
    return AngleSinrTable(owner, timestamp, entries)


def offline_ast(nodes: Sequence[NodePosition], owner: str, prop: PropagationConfig,
                timestamp: float = 0.0) -> AngleSinrTable:
    """The table a lossless sweep must produce, by direct link evaluation."""
    by_id = {n.id: n for n in nodes}
    if owner not in by_id:
        raise ConfigurationError(f"unknown node {owner!r}")
    tx = by_id[owner]
    replies = {}
    for rx in nodes:
        if rx.id == owner:
            continue
        col = []
        for angle in ANGLES:
            s = link_sinr(tx, rx, angle, prop)
            if s >= prop.detection_threshold_db:
                col.append((angle, s))
        if col:
            replies[rx.id] = col
    return assemble_ast(owner, timestamp, replies, [n.id for n in nodes])


def best_angle(ast: AngleSinrTable, neighbor: str) -> int:
    """Strongest steering angle toward ``neighbor``; ties go to the smaller angle."""
    if neighbor not in ast.entries:
        raise KeyError(f"neighbor {neighbor!r} not in the table of {ast.owner!r}")
    col = ast.entries[neighbor]
    best = max(range(len(col)), key=lambda r: (col[r], -r))
    return ANGLES[best] % 360


@dataclass(frozen=True)
class TraceRecord:
    time: float
    event: str
    node: str
    peer: str = ""
    angle: Optional[int] = None
    sinr: Optional[float] = None

    def line(self) -> str:
        angle = "" if self.angle is None else str(self.angle)
        sinr = "" if self.sinr is None else repr(self.sinr)
        return f"{self.time!r},{self.event},{self.node},{self.peer},{angle},{sinr}"


@dataclass
class _Sweep:
    owner: str
    start: float
    deadline: float
    replies: dict = field(default_factory=dict)
    emissions: int = 0


class DiscoveryNetwork:
    """Virtual-time event simulation of AST sweeps over a static topology.

    Events are ordered by (time, scheduling sequence).  Message propagation
    takes ``distance / c``.
    """

    def __init__(self, nodes: Sequence[NodePosition], prop: PropagationConfig = PropagationConfig(),
                 proto: ProtocolConfig = ProtocolConfig()):
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("node ids must be distinct")
        self.nodes = {n.id: n for n in nodes}
        self.order = ids
        self.prop = prop
        self.proto = proto
        self.now = 0.0
        self.trace: list = []
        self.discarded_replies = 0
        self.sweeps: dict = {}
        self._heap = []
        self._seq = 0
        self._columns: dict = {}  # (receiver, sender, sweep_id) -> {angle: sinr}
        self._max_delay = max(
            (distance(a, b) / SPEED_OF_LIGHT for a in nodes for b in nodes if a.id != b.id), default=0.0
        )

    def _schedule(self, t, fn, *args):
        heapq.heappush(self._heap, (t, self._seq, fn, args))
        self._seq += 1

    def _log(self, event, node, peer="", angle=None, sinr=None):
        self.trace.append(TraceRecord(self.now, event, node, peer, angle, sinr))

    def delay(self, a: str, b: str) -> float:
        return distance(self.nodes[a], self.nodes[b]) / SPEED_OF_LIGHT

    def start_sweep(self, node: str, t: float) -> int:
        """Schedule the 13 directional requests of ``node`` starting at ``t``."""
        if node not in self.nodes:
            raise ConfigurationError(f"unknown node {node!r}")
        sweep_id = len(self.sweeps)
        p = self.proto
        last = t + (len(ANGLES) - 1) * p.spacing
        deadline = last + p.reply_wait + 2 * self._max_delay + p.collect_margin
        self.sweeps[sweep_id] = _Sweep(node, t, deadline)
        for r, angle in enumerate(ANGLES):
            self._schedule(t + r * p.spacing, self._emit, sweep_id, angle)
        return sweep_id

    def _emit(self, sweep_id, angle):
        sw = self.sweeps[sweep_id]
        sw.emissions += 1
        self._log("dir_request", sw.owner, angle=angle)
        tx = self.nodes[sw.owner]
        msg = DiscoveryMessage("dir_request", sw.owner, sweep_id, self.now, angle_deg=angle)
        for rid in self.order:
            if rid == sw.owner:
                continue
            sinr = link_sinr(tx, self.nodes[rid], angle, self.prop)
            if sinr >= self.prop.detection_threshold_db:
                self._schedule(self.now + self.delay(sw.owner, rid), self.on_request, rid, msg, sinr)

    def on_request(self, receiver: str, msg: DiscoveryMessage, sinr: float):
        key = (receiver, msg.sender, msg.sweep_id)
        col = self._columns.get(key)
        if col is None:
            col = self._columns[key] = {}
            self._schedule(self.now + self.proto.reply_wait, self.on_reply_timeout,
                           receiver, msg.sender, msg.sweep_id)
            self._log("timer_armed", receiver, msg.sender)
        self._log("request_rx", receiver, msg.sender, msg.angle_deg, sinr)
        prev = col.get(msg.angle_deg)
        if prev is None or sinr > prev:
            col[msg.angle_deg] = sinr

    def on_reply_timeout(self, receiver: str, sender: str, sweep_id: int):
        col = self._columns.pop((receiver, sender, sweep_id), {})
        if not col:
            return
        column = tuple(sorted(col.items()))
        msg = DiscoveryMessage("column_reply", receiver, sweep_id, self.now, column=column)
        self._log("column_reply", receiver, sender)
        self._schedule(self.now + self.delay(receiver, sender), self.deliver_reply, sender, msg)

    def deliver_reply(self, owner: str, msg: DiscoveryMessage):
        sw = self.sweeps.get(msg.sweep_id)
        if sw is None or sw.owner != owner or self.now > sw.deadline:
            self.discarded_replies += 1
            self._log("reply_discarded", owner, msg.sender)
            return
        self._log("reply_rx", owner, msg.sender)
        sw.replies[msg.sender] = msg.column

    def run(self, until: float = math.inf):
        while self._heap and self._heap[0][0] <= until:
            t, _, fn, args = heapq.heappop(self._heap)
            self.now = t
            fn(*args)

    def assemble(self, sweep_id: int) -> AngleSinrTable:
        sw = self.sweeps[sweep_id]
        return assemble_ast(sw.owner, sw.start, sw.replies, self.order)

    def reply_count(self, sweep_id: int) -> int:
        return len(self.sweeps[sweep_id].replies)


def run_discovery(nodes: Sequence[NodePosition], owner: str, prop: PropagationConfig = PropagationConfig(),
                  proto: ProtocolConfig = ProtocolConfig(), t0: float = 0.0):
    """One full sweep by ``owner``; returns ``(table, network)``."""
    net = DiscoveryNetwork(nodes, prop, proto)
    sid = net.start_sweep(owner, t0)
    net.run()
    return net.assemble(sid), net


def random_topology(n: int, seed: int, side: float = 200.0, tx_power_dbm: float = 20.0) -> list:
    """``n`` nodes uniformly placed in a ``side`` x ``side`` square."""
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, side, size=(n, 2))
    return [NodePosition(f"n{i}", float(x), float(y), tx_power_dbm) for i, (x, y) in enumerate(xy)]


def load_nodes(path) -> list:
    """Read ``id, x, y, tx_power_dbm`` lines; blank lines and ``#`` comments skipped."""
    nodes = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise ConfigurationError(f"{path}:{lineno}: expected 'id, x, y, tx_power_dbm'")
            try:
                nodes.append(NodePosition(parts[0], float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: {exc}") from None
    return nodes
