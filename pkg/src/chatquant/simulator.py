"""Monte Carlo engine for chatting networks.

Trials are drawn in fixed-size chunks, each chunk seeded from its own
substream of the master seed, so results are bit-identical regardless of
how chunks are scheduled across workers.  The chat protocol runs on the
codeword-driven message tables, which the fusion decoder replays exactly;
the conditional-expectation decoder therefore conditions on precisely the
information the decoder really has.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .chatnet import ChatNetworkSpec, out_message_table
from .distortion import ENTROPY_CONSTRAINED
from .probcore import binary_entropy
from .quantizer import Quantizer

__all__ = [
    "CHUNK",
    "SimulationResult",
    "decode",
    "measure_entropy_rate",
    "replay_codebooks",
    "run_simulation",
]

# Trials per substream.  Fixed so the random stream consumed by trial t
# never depends on the total trial count ahead of it or on worker layout.
CHUNK = 65536

PLUG_IN = "plug-in"
CONDITIONAL_EXPECTATION = "conditional-expectation"


@dataclass(frozen=True)
class SimulationResult:
    """Empirical fMSE with its standard error and the rates actually spent.

    ``empirical_rates`` holds log2 of the codebook sizes in the fixed-rate
    regime and measured index entropies (don't-care indicator included)
    under entropy coding.
    """

    trials: int
    empirical_fmse: float
    stderr: float
    empirical_rates: np.ndarray
    predicted_fmse: float | None
    decoder: str
    regime: str
    spec_hash: str

    def csv_row(
        self, n_sensors: int, chat_rate: float | None, budget: float | None
    ) -> list:
        return [
            self.spec_hash,
            self.regime,
            "" if chat_rate is None else chat_rate,
            "" if budget is None else budget,
            n_sensors,
            self.empirical_fmse,
            self.stderr,
            "" if self.predicted_fmse is None else self.predicted_fmse,
        ]


class _Protocol:
    """Precomputed per-edge message tables along the serial chain."""

    def __init__(self, spec: ChatNetworkSpec, banks: Mapping[int, Mapping[int, Quantizer]]):
        if spec.graph.edges and not spec.is_serial_chain():
            raise ValueError("simulation supports the serial chatting chain")
        if set(banks) != set(range(1, spec.n_sensors + 1)):
            raise ValueError("need one codebook bank per sensor")
        for n in range(1, spec.n_sensors + 1):
            edge = spec.graph.edge_into(n)
            want = 1 if edge is None else edge.size
            if set(banks[n]) != set(range(1, want + 1)):
                raise ValueError(
                    f"sensor {n}: bank must cover messages 1..{want}"
                )
        self.spec = spec
        self.banks = banks
        self.tables = {
            e.key: out_message_table(spec, banks, e) for e in spec.graph.edges
        }

    def encode(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Quantize a (trials, N) observation block.

        Returns fusion indices and incoming chat messages, both (trials, N)
        and 1-based.
        """
        spec = self.spec
        trials = x.shape[0]
        indices = np.zeros((trials, spec.n_sensors), dtype=np.int64)
        incoming = np.ones((trials, spec.n_sensors), dtype=np.int64)
        for n in range(1, spec.n_sensors + 1):
            bank = self.banks[n]
            col = np.zeros(trials, dtype=np.int64)
            if len(bank) == 1:
                col = np.asarray(bank[1].quantize(x[:, n - 1]))
            else:
                k_col = incoming[:, n - 1]
                for k, q in bank.items():
                    rows = k_col == k
                    if rows.any():
                        col[rows] = q.quantize(x[rows, n - 1])
            indices[:, n - 1] = col
            for e in spec.graph.edges_out_of(n):
                incoming[:, e.dst - 1] = self.tables[e.key][
                    incoming[:, n - 1] - 1, col - 1
                ]
        return indices, incoming

    def replay(self, indices: np.ndarray) -> np.ndarray:
        """Incoming messages recomputed from fusion indices alone."""
        spec = self.spec
        incoming = np.ones_like(indices)
        for n in range(1, spec.n_sensors + 1):
            for e in spec.graph.edges_out_of(n):
                incoming[:, e.dst - 1] = self.tables[e.key][
                    incoming[:, n - 1] - 1, indices[:, n - 1] - 1
                ]
        return incoming


def replay_codebooks(
    spec: ChatNetworkSpec,
    banks: Mapping[int, Mapping[int, Quantizer]],
    indices: np.ndarray,
) -> np.ndarray:
    """Codebook choices the fusion decoder derives from the indices it saw.

    Returns the (trials, N) matrix of incoming chat messages.  By C1-C4
    this must equal the encoder side's messages on every trial.
    """
    return _Protocol(spec, banks).replay(np.asarray(indices))


def _cell_bounds(
    banks: Mapping[int, Mapping[int, Quantizer]],
    indices: np.ndarray,
    incoming: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-trial cell intervals and codewords, all (trials, N)."""
    trials, n_sensors = indices.shape
    lo = np.empty((trials, n_sensors))
    hi = np.empty((trials, n_sensors))
    cw = np.empty((trials, n_sensors))
    for n in range(1, n_sensors + 1):
        for k, q in banks[n].items():
            rows = incoming[:, n - 1] == k
            if not rows.any():
                continue
            m = indices[rows, n - 1]
            lo[rows, n - 1] = q.boundaries[m - 1]
            hi[rows, n - 1] = q.boundaries[m]
            cw[rows, n - 1] = q.codewords[m - 1]
    return lo, hi, cw


def _ce_max(spec: ChatNetworkSpec, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """E[max of independent cell-conditioned sources], vectorized.

    The conditional CDF product is piecewise smooth between cell edges, so
    the tail integral is taken per segment with Gauss-Legendre nodes;
    for the uniform source the integrand is a polynomial of degree N and
    the rule is exact.
    """
    n_sensors = lo.shape[1]
    left = lo.max(axis=1)
    right = hi.max(axis=1)
    pts = np.sort(
        np.clip(np.concatenate([lo, hi], axis=1), left[:, None], right[:, None]),
        axis=1,
    )
    seg_lo, seg_hi = pts[:, :-1], pts[:, 1:]
    half = (seg_hi - seg_lo) / 2.0
    mid = (seg_hi + seg_lo) / 2.0
    order = max(4, (n_sensors + 2) // 2)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    # t has shape (trials, segments, nodes).
    t = mid[:, :, None] + half[:, :, None] * nodes
    cdf = spec.source.cdf
    prod = np.ones_like(t)
    for n in range(n_sensors):
        a = lo[:, n, None, None]
        b = hi[:, n, None, None]
        ca = cdf(a)
        f = (cdf(t) - ca) / (cdf(b) - ca)
        prod *= np.clip(f, 0.0, 1.0)
    tail = ((1.0 - prod) * weights).sum(axis=2) * half
    return left + tail.sum(axis=1)


def decode(
    decoder: str,
    indices: np.ndarray,
    banks: Mapping[int, Mapping[int, Quantizer]],
    spec: ChatNetworkSpec,
    incoming: np.ndarray | None = None,
    g: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float | np.ndarray:
    """Decode fusion indices into an estimate of the computation.

    ``indices`` is (N,) for one trial or (trials, N); the incoming chat
    messages are replayed from the indices when not supplied.  The
    plug-in decoder applies g to the per-cell codewords; the
    conditional-expectation decoder returns E[g | cells], closed-form for
    max and by direct numeric integration for a supplied g with N <= 3.
    """
    idx = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    scalar = np.asarray(indices).ndim == 1
    if incoming is None:
        incoming = replay_codebooks(spec, banks, idx)
    else:
        incoming = np.atleast_2d(np.asarray(incoming, dtype=np.int64))
    lo, hi, cw = _cell_bounds(banks, idx, incoming)
    if decoder == PLUG_IN:
        out = cw.max(axis=1) if g is None else g(cw)
    elif decoder == CONDITIONAL_EXPECTATION:
        if g is None:
            out = _ce_max(spec, lo, hi)
        else:
            out = _ce_generic(spec, lo, hi, g)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    return float(out[0]) if scalar else out


def _ce_generic(
    spec: ChatNetworkSpec, lo: np.ndarray, hi: np.ndarray, g
) -> np.ndarray:
    """E[g | cells] by tensor-grid integration; sanity-check sizes only."""
    n_sensors = lo.shape[1]
    if n_sensors > 3:
        raise ValueError("generic conditional-expectation decoding is for N <= 3")
    res = 128
    out = np.empty(lo.shape[0])
    for t in range(lo.shape[0]):
        axes = []
        wts = []
        for n in range(n_sensors):
            edges = np.linspace(lo[t, n], hi[t, n], res + 1)
            mids = (edges[:-1] + edges[1:]) / 2.0
            dens = np.asarray(spec.source(mids), dtype=float) * np.diff(edges)
            total = dens.sum()
            axes.append(mids)
            wts.append(dens / total)
        grids = np.meshgrid(*axes, indexing="ij")
        weight = np.ones_like(grids[0])
        for n in range(n_sensors):
            shape = [1] * n_sensors
            shape[n] = -1
            weight = weight * wts[n].reshape(shape)
        vals = g(np.stack([gr.ravel() for gr in grids], axis=1)).reshape(
            grids[0].shape
        )
        out[t] = float((vals * weight).sum())
    return out


def run_simulation(
    spec: ChatNetworkSpec,
    banks: Mapping[int, Mapping[int, Quantizer]],
    decoder: str = CONDITIONAL_EXPECTATION,
    trials: int = 100_000,
    seed: int = 0,
    predicted: float | None = None,
    g: Callable[[np.ndarray], np.ndarray] | None = None,
    workers: int = 1,
) -> SimulationResult:
    """Estimate the network fMSE over ``trials`` Monte Carlo rounds.

    Per trial: draw the sources, run the chat protocol, quantize with the
    message-selected codebooks, decode, and accumulate the squared error
    of the computation.  ``g`` overrides the max computation (vectorized
    over a (trials, N) matrix); decoding then follows the ``decoder`` tag
    with the same conditioning.  Fixed ``seed`` gives bit-identical
    results for any ``workers``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    proto = _Protocol(spec, banks)
    compute = (lambda x: x.max(axis=1)) if g is None else g
    n_chunks = (trials + CHUNK - 1) // CHUNK
    root = np.random.SeedSequence(seed)
    ec_counts = _EcCounts(spec, banks) if spec.regime == ENTROPY_CONSTRAINED else None

    def one_chunk(c: int) -> tuple[float, float, int, "_EcCounts | None"]:
        size = min(CHUNK, trials - c * CHUNK)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(c,)))
        )
        x = spec.source.sample(rng, (size, spec.n_sensors))
        indices, incoming = proto.encode(x)
        est = decode(decoder, indices, banks, spec, incoming, g)
        err = (compute(x) - est) ** 2
        local = None
        if ec_counts is not None:
            local = _EcCounts(spec, banks)
            local.add(indices, incoming)
        return float(err.sum()), float((err**2).sum()), size, local

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one_chunk, range(n_chunks)))
    else:
        parts = [one_chunk(c) for c in range(n_chunks)]

    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    if ec_counts is not None:
        for p in parts:
            ec_counts.merge(p[3])
    mean = total / trials
    var = max(total_sq / trials - mean**2, 0.0)
    if trials > 1:
        var *= trials / (trials - 1)
    stderr = np.sqrt(var / trials)

    if spec.regime == ENTROPY_CONSTRAINED:
        rates = ec_counts.per_sensor_rates()
    else:
        rates = np.array(
            [np.log2(banks[n][1].size) for n in range(1, spec.n_sensors + 1)]
        )
    return SimulationResult(
        trials,
        float(mean),
        float(stderr),
        rates,
        predicted,
        decoder,
        spec.regime,
        spec.spec_hash(),
    )


class _EcCounts:
    """Index histograms per (sensor, incoming message)."""

    def __init__(self, spec: ChatNetworkSpec, banks: Mapping[int, Mapping[int, Quantizer]]):
        self.banks = banks
        self.counts = {
            (n, k): np.zeros(q.size, dtype=np.int64)
            for n in range(1, spec.n_sensors + 1)
            for k, q in banks[n].items()
        }

    def add(self, indices: np.ndarray, incoming: np.ndarray) -> None:
        for (n, k), hist in self.counts.items():
            rows = incoming[:, n - 1] == k
            if rows.any():
                hist += np.bincount(
                    indices[rows, n - 1] - 1, minlength=hist.size
                )

    def merge(self, other: "_EcCounts") -> None:
        for key, hist in other.counts.items():
            self.counts[key] += hist

    def message_rates(self) -> dict[tuple[int, int], float]:
        out = {}
        for (n, k), hist in self.counts.items():
            total = hist.sum()
            if total == 0:
                out[(n, k)] = 0.0
                continue
            dc = sorted(self.banks[n][k].dont_care_cells)
            active = np.ones(hist.size, dtype=bool)
            active[[c - 1 for c in dc]] = False
            out[(n, k)] = _split_entropy(hist, active)
        return out

    def per_sensor_rates(self) -> np.ndarray:
        sensors = sorted({n for n, _k in self.counts})
        rates = np.zeros(len(sensors))
        per_msg = self.message_rates()
        for n in sensors:
            keys = [key for key in self.counts if key[0] == n]
            totals = np.array([self.counts[key].sum() for key in keys], dtype=float)
            grand = totals.sum()
            if grand > 0:
                weights = totals / grand
                rates[n - 1] = sum(
                    w * per_msg[key] for w, key in zip(weights, keys)
                )
        return rates


def _split_entropy(hist: np.ndarray, active: np.ndarray) -> float:
    """Rate of indicator-then-index coding from an index histogram.

    One bit stream flags whether the index is a don't-care cell; the index
    itself is entropy-coded conditioned on that flag.  The rate is
    H_B(P(active)) + P(active) H(index | active)
                   + P(!active) H(index | !active).
    """
    total = float(hist.sum())
    p_active = float(hist[active].sum()) / total

    def cond_entropy(sub: np.ndarray) -> float:
        s = float(sub.sum())
        if s == 0:
            return 0.0
        p = sub[sub > 0] / s
        return float(-(p * np.log2(p)).sum())

    rate = binary_entropy(p_active)
    rate += p_active * cond_entropy(hist[active])
    rate += (1.0 - p_active) * cond_entropy(hist[~active])
    return rate


def measure_entropy_rate(
    spec: ChatNetworkSpec,
    banks: Mapping[int, Mapping[int, Quantizer]],
    trials: int = 100_000,
    seed: int = 0,
) -> dict[tuple[int, int], float]:
    """Empirical per-(sensor, message) transmission rates under
    indicator-then-index entropy coding.

    Plug-in entropies of the emitted streams; an ideal entropy coder would
    meet these rates, a practical one approaches them from above.
    """
    proto = _Protocol(spec, banks)
    counts = _EcCounts(spec, banks)
    n_chunks = (trials + CHUNK - 1) // CHUNK
    for c in range(n_chunks):
        size = min(CHUNK, trials - c * CHUNK)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(c,)))
        )
        x = spec.source.sample(rng, (size, spec.n_sensors))
        indices, incoming = proto.encode(x)
        counts.add(indices, incoming)
    return counts.message_rates()
