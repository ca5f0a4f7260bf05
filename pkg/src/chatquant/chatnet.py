"""Chatting-network structure and the serial max-network protocol.

A chatting network is a set of sensors feeding a fusion center, plus a
directed side channel ("chatting") between sensors that the fusion center
never observes.  For the fusion center to decode, it must be able to
deduce every sensor's codebook choice from the fusion-link messages alone
(codebook identifiability): the graph must be acyclic (C1), the schedule
causal (C2), and quantizers and outgoing messages may depend only on
received messages and, for outgoing messages, the sensor's own
*transmitted* codeword (C3/C4) - never on the raw observation.  The
protocol tables built here enforce C3/C4 by construction.
"""

from __future__ import annotations

import graphlib
import hashlib
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Mapping, NamedTuple, Sequence

import numpy as np

from .probcore import Pdf
from .quantizer import Quantizer, build_fixed_rate_quantizer
from .sensitivity import (
    MessageDistribution,
    SensitivityProfile,
    max_conditional_sensitivity,
    max_sensitivity,
    serial_max_message_distribution,
)
from .distortion import (
    ENTROPY_CONSTRAINED,
    FIXED_RATE,
    optimal_density_entropy,
    optimal_density_fixed_rate,
)

if TYPE_CHECKING:  # pragma: no cover
    from .allocation import AllocationResult
    from .distortion import DistortionReport

__all__ = [
    "ChatEdge",
    "ChatGraph",
    "ChatNetworkSpec",
    "ChatState",
    "NetworkDesign",
    "Schedule",
    "SpecFormatError",
    "Violation",
    "build_banks",
    "conditional_quantizer_bank",
    "design_network",
    "out_message_table",
    "parse_spec_file",
    "serial_max_chat_round",
    "validate_identifiable",
]


@dataclass(frozen=True)
class ChatEdge:
    """Directed chatting link with its codebook size and cost per bit."""

    src: int
    dst: int
    size: int
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError(f"self-loop on sensor {self.src}")
        if self.size < 1:
            raise ValueError("chat codebook size must be at least 1")
        if self.alpha < 0:
            raise ValueError("chat cost per bit must be nonnegative")

    @property
    def key(self) -> tuple[int, int]:
        return (self.src, self.dst)


@dataclass(frozen=True)
class ChatGraph:
    """Directed chatting topology over sensors 1..N."""

    nodes: tuple[int, ...]
    edges: tuple[ChatEdge, ...]

    def __post_init__(self) -> None:
        seen = set(self.nodes)
        if len(seen) != len(self.nodes):
            raise ValueError("duplicate sensor ids")
        for e in self.edges:
            if e.src not in seen or e.dst not in seen:
                raise ValueError(f"edge {e.key} leaves the node set")
        if len({e.key for e in self.edges}) != len(self.edges):
            raise ValueError("duplicate chat edges")

    def edge_into(self, n: int) -> ChatEdge | None:
        found = [e for e in self.edges if e.dst == n]
        if len(found) > 1:
            raise ValueError(f"sensor {n} has multiple incoming chat edges")
        return found[0] if found else None

    def edges_out_of(self, n: int) -> list[ChatEdge]:
        return [e for e in self.edges if e.src == n]

    @staticmethod
    def serial_chain(n_sensors: int, size: int, alpha: float = 0.0) -> "ChatGraph":
        nodes = tuple(range(1, n_sensors + 1))
        edges = tuple(
            ChatEdge(i, i + 1, size, alpha) for i in range(1, n_sensors)
        )
        return ChatGraph(nodes, edges)


@dataclass(frozen=True)
class Schedule:
    """Transmission order of the chat edges."""

    order: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(set(self.order)) != len(self.order):
            raise ValueError("schedule repeats an edge")


class Violation(NamedTuple):
    condition: str
    message: str


def validate_identifiable(graph: ChatGraph, schedule: Schedule) -> list[Violation]:
    """Check the codebook-identifiability conditions on a chat topology.

    C1: the chat graph is acyclic.  C2: the schedule is causal - every
    message a sensor sends is scheduled after every message it receives.
    C3 and C4 (codebooks and outgoing messages depend only on received
    messages and transmitted codewords) hold by construction of the
    protocol tables and are not data properties.  Violations are returned,
    not raised.
    """
    out: list[Violation] = []
    ts = graphlib.TopologicalSorter(
        {n: [e.src for e in graph.edges if e.dst == n] for n in graph.nodes}
    )
    try:
        ts.prepare()
    except graphlib.CycleError as exc:
        cycle = exc.args[1]
        out.append(
            Violation("C1", f"chat graph has a cycle: {' -> '.join(map(str, cycle))}")
        )

    scheduled = set(schedule.order)
    edge_keys = {e.key for e in graph.edges}
    if scheduled != edge_keys:
        missing = sorted(edge_keys - scheduled)
        extra = sorted(scheduled - edge_keys)
        parts = []
        if missing:
            parts.append(f"missing edges {missing}")
        if extra:
            parts.append(f"unknown edges {extra}")
        out.append(Violation("C2", f"schedule does not match the graph: {'; '.join(parts)}"))
        return out

    position = {key: i for i, key in enumerate(schedule.order)}
    for e in graph.edges:
        for incoming in graph.edges:
            if incoming.dst == e.src and position[incoming.key] > position[e.key]:
                out.append(
                    Violation(
                        "C2",
                        f"edge {e.key} is scheduled before its input {incoming.key}",
                    )
                )
    return out


@dataclass(frozen=True)
class ChatState:
    """Outcome of one chat round.

    ``messages`` maps each edge to the transmitted index; ``intervals``
    maps each sensor to the interval known to contain the running maximum
    of its ancestors ((0, 1] when nothing was received).
    """

    messages: Mapping[tuple[int, int], int]
    intervals: Mapping[int, tuple[float, float]]

    def __post_init__(self) -> None:
        for n, (lo, hi) in self.intervals.items():
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError(f"sensor {n}: bad received interval [{lo}, {hi}]")


class SpecFormatError(ValueError):
    """Malformed network spec file; carries the offending line and key."""

    def __init__(self, line: int, key: str, message: str):
        super().__init__(f"line {line}, key {key!r}: {message}")
        self.line = line
        self.key = key


@dataclass(frozen=True)
class ChatNetworkSpec:
    """Immutable description of a chatting network.

    Sensors observe iid draws from ``source``, chat over ``graph``
    following ``schedule``, and transmit to the fusion center over links
    with per-bit costs ``fusion_alphas``.  ``partitions`` maps each chat
    edge to the strictly increasing boundaries of its message cells.
    """

    n_sensors: int
    source: Pdf
    graph: ChatGraph
    schedule: Schedule
    fusion_alphas: tuple[float, ...]
    partitions: Mapping[tuple[int, int], tuple[float, ...]]
    regime: str = FIXED_RATE
    computation: str = "max"

    def __post_init__(self) -> None:
        if self.n_sensors < 1:
            raise ValueError("need at least one sensor")
        if len(self.fusion_alphas) != self.n_sensors:
            raise ValueError("need one fusion cost per sensor")
        if any(a <= 0 for a in self.fusion_alphas):
            raise ValueError("fusion costs must be positive")
        if self.regime not in (FIXED_RATE, ENTROPY_CONSTRAINED):
            raise ValueError(f"unknown regime {self.regime!r}")
        if set(self.graph.nodes) != set(range(1, self.n_sensors + 1)):
            raise ValueError("graph nodes must be sensors 1..N")
        for e in self.graph.edges:
            t = self.partitions.get(e.key)
            if t is None:
                raise ValueError(f"edge {e.key} has no partition")
            t = np.asarray(t, dtype=float)
            if t.size != e.size + 1 or not np.all(np.diff(t) > 0):
                raise ValueError(
                    f"edge {e.key}: partition must be {e.size + 1} increasing boundaries"
                )
            if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12:
                raise ValueError(f"edge {e.key}: partition must cover [0, 1]")
        object.__setattr__(
            self,
            "partitions",
            {k: tuple(float(v) for v in t) for k, t in self.partitions.items()},
        )
        object.__setattr__(self, "fusion_alphas", tuple(float(a) for a in self.fusion_alphas))

    # -- construction helpers -------------------------------------------

    @staticmethod
    def serial_max(
        n_sensors: int,
        chat_size: int,
        chat_alpha: float = 0.0,
        fusion_alphas: Sequence[float] | float = 1.0,
        regime: str = FIXED_RATE,
        boundaries: Sequence[float] | None = None,
    ) -> "ChatNetworkSpec":
        """The serial chain computing the max of iid uniform(0,1) sources."""
        graph = ChatGraph.serial_chain(n_sensors, chat_size, chat_alpha)
        schedule = Schedule(tuple(e.key for e in graph.edges))
        if boundaries is None:
            t = tuple(np.linspace(0.0, 1.0, chat_size + 1))
        else:
            t = tuple(float(v) for v in boundaries)
        if np.isscalar(fusion_alphas):
            alphas = (float(fusion_alphas),) * n_sensors
        else:
            alphas = tuple(float(a) for a in fusion_alphas)
        return ChatNetworkSpec(
            n_sensors,
            Pdf.uniform(0.0, 1.0),
            graph,
            schedule,
            alphas,
            {e.key: t for e in graph.edges},
            regime,
        )

    def validate(self) -> list[Violation]:
        return validate_identifiable(self.graph, self.schedule)

    def is_serial_chain(self) -> bool:
        want = tuple((i, i + 1) for i in range(1, self.n_sensors))
        return tuple(sorted(e.key for e in self.graph.edges)) == want

    def shared_partition(self) -> tuple[float, ...] | None:
        """The common partition, or None if edges disagree (or no edges)."""
        parts = {self.partitions[e.key] for e in self.graph.edges}
        return next(iter(parts)) if len(parts) == 1 else None

    # -- message structure ----------------------------------------------

    def message_interval(self, n: int, k: int) -> tuple[float, float]:
        """Interval for the running ancestor max implied by message k at
        sensor n: the message's cell for shared partitions, and only a
        lower bound (up to 1) when partitions differ per edge."""
        edge = self.graph.edge_into(n)
        if edge is None:
            if k != 1:
                raise ValueError(f"sensor {n} receives no messages")
            return (0.0, 1.0)
        t = self.partitions[edge.key]
        if not (1 <= k <= edge.size):
            raise ValueError(f"message {k} out of range for edge {edge.key}")
        hi = t[k] if self.shared_partition() is not None else 1.0
        return (t[k - 1], hi)

    def message_probs(self, n: int) -> MessageDistribution:
        """Exact distribution of the message arriving at sensor n.

        Requires the max computation with a shared partition; the
        conservative per-edge mode has no closed-form message law and is
        simulation-only.
        """
        edge = self.graph.edge_into(n)
        if edge is None:
            return MessageDistribution(np.array([1.0]))
        if self.computation != "max":
            raise ValueError("message distributions are closed-form only for max")
        t = self.shared_partition()
        if t is None:
            raise ValueError(
                "per-edge partitions have no closed-form message distribution"
            )
        if not self.is_serial_chain():
            raise ValueError("message distributions assume the serial chain")
        return serial_max_message_distribution(n, t)

    def conditional_profile(self, n: int, k: int) -> SensitivityProfile:
        """Sensitivity of sensor n's quantization error given message k."""
        if self.computation != "max":
            raise ValueError("closed-form profiles exist only for max")
        if self.graph.edge_into(n) is None:
            return max_sensitivity(self.n_sensors)
        s_l, s_u = self.message_interval(n, k)
        return max_conditional_sensitivity(n, self.n_sensors, s_l, s_u)

    # -- rewriting helpers ----------------------------------------------

    def with_chat_rate(self, rc: int) -> "ChatNetworkSpec":
        """Same network with every chat edge at rate rc (uniform cells)."""
        if rc < 0:
            raise ValueError("chat rate must be nonnegative")
        size = 2**int(rc)
        t = tuple(np.linspace(0.0, 1.0, size + 1))
        graph = ChatGraph(
            self.graph.nodes,
            tuple(replace(e, size=size) for e in self.graph.edges),
        )
        return replace(
            self,
            graph=graph,
            partitions={e.key: t for e in graph.edges},
        )

    def with_partition(self, boundaries: Sequence[float]) -> "ChatNetworkSpec":
        """Same network with one shared partition on every chat edge."""
        t = tuple(float(v) for v in boundaries)
        size = len(t) - 1
        graph = ChatGraph(
            self.graph.nodes,
            tuple(replace(e, size=size) for e in self.graph.edges),
        )
        return replace(
            self,
            graph=graph,
            partitions={e.key: t for e in graph.edges},
        )

    def with_regime(self, regime: str) -> "ChatNetworkSpec":
        return replace(self, regime=regime)

    # -- serialization ----------------------------------------------------

    def canonical_text(self) -> str:
        """Normalized spec-file rendering; the basis of spec_hash."""
        fmt = lambda v: format(float(v), ".17g")
        lines = [
            f"N = {self.n_sensors}",
            f"computation = {self.computation}",
            f"regime = {self.regime}",
            f"source = uniform {fmt(self.source.lo)} {fmt(self.source.hi)}",
            "fusion_alpha = " + " ".join(fmt(a) for a in self.fusion_alphas),
        ]
        for e in sorted(self.graph.edges, key=lambda e: e.key):
            lines.append(f"edge = {e.src} {e.dst} {e.size} {fmt(e.alpha)}")
            t = self.partitions[e.key]
            lines.append(
                f"partition = {e.src} {e.dst} : " + " ".join(fmt(v) for v in t)
            )
        lines.append(
            "schedule = " + " ".join(f"{i}>{j}" for i, j in self.schedule.order)
        )
        return "\n".join(lines) + "\n"

    def spec_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


def _cell_of(value: float, t: Sequence[float]) -> int:
    """1-based index of the left-open cell of ``t`` containing ``value``."""
    k = int(np.searchsorted(np.asarray(t), value, side="left"))
    return min(max(k, 1), len(t) - 1)


def serial_max_chat_round(
    spec: ChatNetworkSpec, x: Sequence[float], state: ChatState | None = None
) -> ChatState:
    """Run one chat round of the serial max network on raw observations.

    Each sensor combines the interval it received with its own value and
    sends the cell index of the resulting lower bound on the running max.
    With a shared partition this equals the cell index of max(x_1..x_n)
    exactly; with per-edge partitions the re-encoding is conservative and
    the decoded interval keeps only the lower bound.

    This is the reference semantics of the chat content.  Simulation uses
    the codeword-driven tables from out_message_table, which the fusion
    center can replay (see the module docstring).
    """
    if not spec.is_serial_chain():
        raise ValueError("the raw chat round is defined for the serial chain")
    x = np.asarray(x, dtype=float)
    if x.size != spec.n_sensors:
        raise ValueError("need one observation per sensor")
    shared = spec.shared_partition() is not None
    messages: dict[tuple[int, int], int] = {}
    intervals: dict[int, tuple[float, float]] = {1: (0.0, 1.0)}
    # Sensor i's knowledge of max(x_1..x_i): the max of the empty ancestor
    # set is 0 exactly, so sensor 1 knows its running max outright.
    know_l = know_h = 0.0
    for i, n in spec.schedule.order:
        t = np.asarray(spec.partitions[(i, n)])
        xi = float(x[i - 1])
        kl, kh = max(know_l, xi), max(know_h, xi)
        if kl == kh:
            k = _cell_of(kl, t)
        else:
            # Only a lower bound is certain; send the cell just above it.
            k = min(max(int(np.searchsorted(t, kl, side="right")), 1), t.size - 1)
        messages[(i, n)] = k
        hi = float(t[k]) if shared else 1.0
        intervals[n] = (float(t[k - 1]), hi)
        know_l, know_h = float(t[k - 1]), hi
    return ChatState(messages, intervals)


def conditional_quantizer_bank(
    spec: ChatNetworkSpec,
    n: int,
    size: int | Mapping[int, int],
    placement: str = "midpoint",
) -> dict[int, Quantizer]:
    """Build sensor n's codebooks, one per incoming message.

    Each codebook is the companding quantizer for the regime-optimal
    point density of the conditional sensitivity.  Messages k >= 2 induce
    a don't-care interval below the revealed lower bound; its single
    codeword is pinned to that bound (the only reconstruction that can
    never overstate the maximum).  ``size`` may vary per message (a
    mapping), which entropy-coded designs use.
    """
    bank: dict[int, Quantizer] = {}
    for k in range(1, spec.message_probs(n).size + 1):
        prof = spec.conditional_profile(n, k)
        if spec.regime == FIXED_RATE:
            density = optimal_density_fixed_rate(prof, spec.source)
        else:
            density = optimal_density_entropy(prof)
        size_k = size[k] if isinstance(size, Mapping) else int(size)
        q = build_fixed_rate_quantizer(density, size_k, prof.zero_zones, placement)
        if q.dont_care_cells:
            cw = q.codewords.copy()
            for c in q.dont_care_cells:
                cw[c - 1] = q.boundaries[c]  # upper edge of the zone
            q = Quantizer(q.boundaries, cw, q.dont_care_cells)
        bank[k] = q
    return bank


def build_banks(
    spec: ChatNetworkSpec,
    sizes: Sequence[int | Mapping[int, int]],
    placement: str = "midpoint",
) -> dict[int, dict[int, Quantizer]]:
    """Codebook banks for every sensor, indexed [sensor][message]."""
    if len(sizes) != spec.n_sensors:
        raise ValueError("need one codebook size per sensor")
    return {
        n: conditional_quantizer_bank(spec, n, sizes[n - 1], placement)
        for n in range(1, spec.n_sensors + 1)
    }


def out_message_table(
    spec: ChatNetworkSpec,
    banks: Mapping[int, Mapping[int, Quantizer]],
    edge: ChatEdge,
) -> np.ndarray:
    """Chat message sent on ``edge`` as a function of decodable data.

    Entry [k_in - 1, m - 1] is the outgoing message when the sender
    received message k_in and transmitted fusion codeword m.  The sender
    encodes the lower bound of the running max implied by its received
    interval and the chat cell of its own *codeword* - not its raw
    observation - so the fusion center can replay every entry (C4).  With
    a shared partition this reduces to max(k_in, chat cell of codeword).
    """
    t = np.asarray(spec.partitions[edge.key])
    sender_bank = banks[edge.src]
    n_in = len(sender_bank)
    n_codes = max(q.size for q in sender_bank.values())
    table = np.zeros((n_in, n_codes), dtype=np.int64)
    for k_in, q in sender_bank.items():
        low_in = spec.message_interval(edge.src, k_in)[0]
        for m in range(1, q.size + 1):
            j = _cell_of(float(q.codewords[m - 1]), t)
            low = max(low_in, float(t[j - 1]))
            table[k_in - 1, m - 1] = _cell_of(np.nextafter(low, 2.0), t)
    return table


@dataclass(frozen=True)
class NetworkDesign:
    """Concrete quantizer banks realizing an allocation.

    ``sizes`` holds the integer codebook sizes actually built (per sensor
    for fixed rate, per sensor per message under entropy coding) and
    ``rates`` the continuous rates the allocation asked for.
    """

    spec: ChatNetworkSpec
    sizes: tuple
    banks: dict[int, dict[int, Quantizer]]
    rates: np.ndarray
    allocation: "AllocationResult | None"
    predicted: "DistortionReport"


def design_network(
    spec: ChatNetworkSpec,
    budget: float | None = None,
    rates: Sequence[float] | None = None,
    placement: str = "midpoint",
) -> NetworkDesign:
    """Turn a network spec into buildable integer-size codebooks.

    Exactly one of ``budget`` and ``rates`` must be given.  A budget is
    first split by the regime's optimal allocation (chat links charged at
    their cost per bit), then rounded to integer codebook sizes; when
    rounding overshoots the fixed-rate budget, sizes are walked back
    greedily, dropping whichever codeword costs the least predicted
    distortion per cost recovered.  Rates are taken as-is (no repair).
    """
    from .allocation import waterfill_kkt, entropy_allocation
    from .distortion import (
        fixed_rate_betas,
        fixed_rate_message_moments,
        hr_fmse_fixed_rate_chat,
        hr_fmse_entropy_chat,
    )

    if (budget is None) == (rates is None):
        raise ValueError("give either a budget or explicit rates")
    chat_cost = sum(e.alpha * np.log2(e.size) for e in spec.graph.edges)
    alphas = np.asarray(spec.fusion_alphas)

    if spec.regime == FIXED_RATE:
        if rates is None:
            remaining = budget - chat_cost
            if remaining <= 0:
                raise ValueError(
                    f"chatting cost {chat_cost:g} exhausts the budget {budget:g}"
                )
            alloc = waterfill_kkt(fixed_rate_betas(spec), alphas, remaining)
            target = alloc.rates
        else:
            alloc = None
            remaining = None
            target = np.asarray(rates, dtype=float)
        moments = fixed_rate_message_moments(spec)
        min_sizes = np.array([int(dc.max()) + 1 for _p, _m, dc in moments])
        sizes = np.maximum(np.rint(2.0**target).astype(int), min_sizes)
        if remaining is not None:
            sizes = _repair_budget(sizes, min_sizes, alphas, moments, remaining)
        banks = build_banks(spec, [int(s) for s in sizes], placement)
        predicted = hr_fmse_fixed_rate_chat(spec, None, np.log2(sizes))
        return NetworkDesign(
            spec, tuple(int(s) for s in sizes), banks, target, alloc, predicted
        )

    # Entropy-constrained: rates (and sizes) vary with the incoming message.
    n_msgs = [spec.message_probs(n).size for n in range(1, spec.n_sensors + 1)]
    if rates is None:
        remaining = budget - chat_cost
        if remaining <= 0:
            raise ValueError(
                f"chatting cost {chat_cost:g} exhausts the budget {budget:g}"
            )
        alloc = entropy_allocation(spec, remaining)
        per_message: dict[int, dict[int, float]] = {}
        for (n, k), rate in zip(alloc.labels, alloc.rates):
            per_message.setdefault(n, {})[k] = float(rate)
        rate_rows = [
            [per_message[n].get(k, 1.0) for k in range(1, n_msgs[n - 1] + 1)]
            for n in range(1, spec.n_sensors + 1)
        ]
    else:
        alloc = None
        rate_rows = []
        for n, r in enumerate(rates, start=1):
            row = list(np.atleast_1d(np.asarray(r, dtype=float)))
            if len(row) == 1:
                row = row * n_msgs[n - 1]
            if len(row) != n_msgs[n - 1]:
                raise ValueError(
                    f"sensor {n}: need a rate per message (got {len(row)})"
                )
            rate_rows.append(row)
    sizes_ec = []
    for n in range(1, spec.n_sensors + 1):
        row = {}
        for k, r in enumerate(rate_rows[n - 1], start=1):
            dc = len(spec.conditional_profile(n, k).zero_zones)
            row[k] = max(int(np.rint(2.0**r)), dc + 1)
        sizes_ec.append(row)
    banks = build_banks(spec, sizes_ec, placement)
    predicted = hr_fmse_entropy_chat(spec, None, rate_rows)
    return NetworkDesign(
        spec,
        tuple(tuple(row[k] for k in sorted(row)) for row in sizes_ec),
        banks,
        np.array([float(np.mean(r)) for r in rate_rows]),
        alloc,
        predicted,
    )


def _repair_budget(
    sizes: np.ndarray,
    min_sizes: np.ndarray,
    alphas: np.ndarray,
    moments: list,
    budget: float,
) -> np.ndarray:
    """Shrink integer codebooks until they fit the cost budget.

    Each step removes the codeword with the smallest ratio of predicted
    distortion increase to cost recovered.
    """

    def term(n: int, size: int) -> float:
        probs, norms, dc = moments[n]
        return float(np.sum(probs * norms / (12.0 * (size - dc) ** 2)))

    sizes = sizes.copy()
    while float(np.sum(alphas * np.log2(sizes))) > budget + 1e-9:
        best_n, best_score = -1, np.inf
        for n in range(sizes.size):
            if sizes[n] <= max(min_sizes[n], 1):
                continue
            saving = alphas[n] * (np.log2(sizes[n]) - np.log2(sizes[n] - 1))
            harm = term(n, sizes[n] - 1) - term(n, sizes[n])
            score = harm / saving
            if score < best_score:
                best_n, best_score = n, score
        if best_n < 0:
            raise ValueError("budget too small for the minimum feasible codebooks")
        sizes[best_n] -= 1
    return sizes


# -- spec files ----------------------------------------------------------


def parse_spec_file(text: str) -> ChatNetworkSpec:
    """Parse the plain-text network description format.

    Keys: N, computation, regime, source (``uniform lo hi``),
    fusion_alpha (one value, broadcast, or one per sensor), edge
    (``src dst K alpha``, repeatable), partition
    (``src dst : b0 b1 ...``, optional per edge, default uniform),
    schedule (``i>j ...``, optional, default edge order).  ``#`` starts a
    comment.  Raises SpecFormatError naming the offending line and key.
    """
    n_sensors: int | None = None
    computation = "max"
    regime = FIXED_RATE
    source_args: tuple[float, float] = (0.0, 1.0)
    fusion_alpha: list[float] | None = None
    edges: list[tuple[int, ChatEdge]] = []
    partitions: dict[tuple[int, int], tuple[float, ...]] = {}
    schedule: tuple[tuple[int, int], ...] | None = None

    def fail(line_no: int, key: str, msg: str):
        raise SpecFormatError(line_no, key, msg)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            fail(line_no, line.split()[0], "expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            if key == "N":
                n_sensors = int(value)
            elif key == "computation":
                if value != "max":
                    fail(line_no, key, f"unsupported computation {value!r}")
                computation = value
            elif key == "regime":
                if value not in (FIXED_RATE, ENTROPY_CONSTRAINED):
                    fail(line_no, key, f"unknown regime {value!r}")
                regime = value
            elif key == "source":
                parts = value.split()
                if len(parts) != 3 or parts[0] != "uniform":
                    fail(line_no, key, "expected 'uniform <lo> <hi>'")
                source_args = (float(parts[1]), float(parts[2]))
            elif key == "fusion_alpha":
                fusion_alpha = [float(v) for v in value.split()]
            elif key == "edge":
                parts = value.split()
                if len(parts) != 4:
                    fail(line_no, key, "expected 'src dst K alpha'")
                edges.append(
                    (
                        line_no,
                        ChatEdge(
                            int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
                        ),
                    )
                )
            elif key == "partition":
                head, _, tail = value.partition(":")
                pair = head.split()
                if len(pair) != 2 or not tail.strip():
                    fail(line_no, key, "expected 'src dst : b0 b1 ...'")
                partitions[(int(pair[0]), int(pair[1]))] = tuple(
                    float(v) for v in tail.split()
                )
            elif key == "schedule":
                hops = []
                for item in value.split():
                    a, _, b = item.partition(">")
                    if not b:
                        fail(line_no, key, f"expected 'i>j', got {item!r}")
                    hops.append((int(a), int(b)))
                schedule = tuple(hops)
            else:
                fail(line_no, key, "unknown key")
        except SpecFormatError:
            raise
        except ValueError as exc:
            fail(line_no, key, str(exc))

    if n_sensors is None:
        raise SpecFormatError(0, "N", "missing sensor count")
    if fusion_alpha is None:
        fusion_alpha = [1.0]
    if len(fusion_alpha) == 1:
        fusion_alpha = fusion_alpha * n_sensors
    if len(fusion_alpha) != n_sensors:
        raise SpecFormatError(0, "fusion_alpha", "need one cost per sensor")

    edge_objs = tuple(e for _ln, e in edges)
    graph = ChatGraph(tuple(range(1, n_sensors + 1)), edge_objs)
    for line_no, e in edges:
        t = partitions.get(e.key)
        if t is None:
            partitions[e.key] = tuple(np.linspace(0.0, 1.0, e.size + 1))
        elif len(t) != e.size + 1:
            raise SpecFormatError(
                line_no, "partition", f"edge {e.key} needs {e.size + 1} boundaries"
            )
    for key in partitions:
        if key not in {e.key for e in edge_objs}:
            raise SpecFormatError(0, "partition", f"no edge {key}")
    if schedule is None:
        schedule = tuple(e.key for e in edge_objs)
    try:
        return ChatNetworkSpec(
            n_sensors,
            Pdf.uniform(*source_args),
            graph,
            Schedule(schedule),
            tuple(fusion_alpha),
            partitions,
            regime,
            computation,
        )
    except ValueError as exc:
        raise SpecFormatError(0, "spec", str(exc)) from exc
