"""Functional sensitivity profiles.

The sensitivity profile of a computation g at sensor n is the conditional
second moment of the partial derivative of g with respect to argument n,
as a function of the observed value.  It measures how much a small
quantization error at sensor n perturbs the computed output, and it is the
weight that shapes optimal codeword densities downstream.

Closed forms are provided for the max computation, both unconditional and
conditioned on a received chat message; everything else goes through the
Monte Carlo estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .probcore import GriddedFunction

__all__ = [
    "MessageDistribution",
    "SensitivityProfile",
    "max_conditional_sensitivity",
    "max_sensitivity",
    "sensitivity_monte_carlo",
    "serial_max_message_distribution",
]

# Grid resolution for Monte Carlo profiles.
MC_GRID = 256


@dataclass(frozen=True)
class SensitivityProfile:
    """Squared sensitivity gamma^2 on a bounded support.

    The squared profile is the stored primitive because every distortion
    formula consumes it directly; ``gamma`` is a square-root view.
    ``zero_zones`` lists the maximal subintervals where the profile
    vanishes identically (don't-care regions for quantizer design).
    Monte Carlo profiles carry their per-grid-point standard errors.
    """

    support: tuple[float, float]
    gamma_sq: Callable[[np.ndarray], np.ndarray]
    zero_zones: tuple[tuple[float, float], ...] = ()
    breakpoints: tuple[float, ...] = ()
    grid: np.ndarray | None = field(default=None, compare=False)
    stderr: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        lo, hi = self.support
        if not (hi > lo):
            raise ValueError(f"degenerate support [{lo}, {hi}]")
        probe = np.linspace(lo, hi, 65)
        vals = np.asarray(self.gamma_sq(probe), dtype=float)
        if np.any(vals < -1e-12):
            raise ValueError("squared sensitivity must be nonnegative")

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        return self.gamma_sq(np.asarray(x, dtype=float))

    def gamma(self, x: np.ndarray | float) -> np.ndarray | float:
        return np.sqrt(np.maximum(self(x), 0.0))


def max_sensitivity(n_sensors: int) -> SensitivityProfile:
    """Profile of the max of ``n_sensors`` iid uniform(0,1) observations.

    Each sensor sees gamma^2(x) = x^(N-1): the probability that its own
    observation is the running maximum.
    """
    if n_sensors < 1:
        raise ValueError("need at least one sensor")
    power = n_sensors - 1

    def gamma_sq(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.ones_like(x) if power == 0 else x**power

    return SensitivityProfile((0.0, 1.0), gamma_sq)


def max_conditional_sensitivity(
    n: int, n_sensors: int, s_l: float, s_u: float
) -> SensitivityProfile:
    """Profile of sensor ``n`` in a serial max chain, given that the
    maximum of sensors 1..n-1 was revealed to lie in [s_l, s_u].

    Three pieces: below s_l the sensor cannot matter (its observation is
    dominated for sure), between s_l and s_u it matters with probability
    ((x^(n-1) - s_l^(n-1)) / (s_u^(n-1) - s_l^(n-1))) relative to the
    incoming max, and above s_u the conditioning is moot.  The ramp piece
    keeps the x^(N-n) factor from sensors n+1..N throughout.
    """
    if not (2 <= n <= n_sensors):
        raise ValueError(f"sensor index {n} out of range 2..{n_sensors}")
    if not (0.0 <= s_l < s_u <= 1.0):
        raise ValueError(
            f"received interval [{s_l}, {s_u}] is degenerate or outside [0, 1]"
        )
    anc = n - 1
    rest = n_sensors - n
    denom = s_u**anc - s_l**anc

    def gamma_sq(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        tail = np.ones_like(x) if rest == 0 else x**rest
        ramp = (x**anc - s_l**anc) / denom * tail
        return np.select([x < s_l, x < s_u], [np.zeros_like(x), ramp], tail)

    zones = ((0.0, float(s_l)),) if s_l > 0 else ()
    kinks = tuple(v for v in (float(s_l), float(s_u)) if 0.0 < v < 1.0)
    return SensitivityProfile((0.0, 1.0), gamma_sq, zones, kinks)


@dataclass(frozen=True)
class MessageDistribution:
    """Distribution over chat message indices 1..K."""

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("need a 1-D probability vector")
        if np.any(p < 0):
            raise ValueError("message probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"message probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "probabilities", p)

    @property
    def size(self) -> int:
        return int(self.probabilities.size)

    def entropy(self) -> float:
        """Shannon entropy in bits."""
        p = self.probabilities[self.probabilities > 0]
        return float(-(p * np.log2(p)).sum())


def serial_max_message_distribution(
    n: int, partition: Sequence[float]
) -> MessageDistribution:
    """Distribution of the chat message arriving at sensor ``n`` in a
    serial max chain over iid uniform(0,1) sources.

    The message reports the partition cell of max(X_1..X_{n-1}), so cell
    (t_{k-1}, t_k] has probability t_k^(n-1) - t_{k-1}^(n-1).
    """
    if n < 2:
        raise ValueError("first chatting sensor is n = 2")
    t = np.asarray(partition, dtype=float)
    if t.ndim != 1 or t.size < 2 or not np.all(np.diff(t) > 0):
        raise ValueError("partition must be strictly increasing boundaries")
    if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12:
        raise ValueError("partition must cover [0, 1]")
    return MessageDistribution(np.diff(t ** (n - 1)))


def sensitivity_monte_carlo(
    g_partial: Callable[[np.ndarray, int], np.ndarray],
    joint_sampler: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    grid: Sequence[float],
    samples_per_point: int = 10_000,
    seed: int | None = None,
) -> SensitivityProfile:
    """Estimate a squared sensitivity profile by Monte Carlo.

    Parameters
    ----------
    g_partial : callable
        ``g_partial(X, n)`` evaluates the partial derivative of the
        computation in its n-th argument (1-based) at each row of the
        (samples, N) matrix ``X``.
    joint_sampler : callable
        ``joint_sampler(rng, size)`` draws a (size, N) matrix of source
        observations.
    n : int
        1-based sensor index whose profile is estimated.
    grid : sequence of float
        Points at which the profile is evaluated; sensor n's coordinate is
        pinned to each grid value while the others are redrawn, which is
        the conditional law for independent sources.
    samples_per_point : int
        Monte Carlo draws per grid point (at least 1000).
    seed : int, optional
        Seeds one independent substream per grid point, so estimates do
        not depend on evaluation order.

    Returns
    -------
    SensitivityProfile
        Gridded profile with per-point standard errors in ``stderr``.
    """
    if samples_per_point < 1_000:
        raise ValueError("samples_per_point must be at least 1000")
    xs = np.asarray(grid, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or not np.all(np.diff(xs) > 0):
        raise ValueError("grid must be strictly increasing")
    root = np.random.SeedSequence(seed)
    means = np.empty_like(xs)
    errs = np.empty_like(xs)
    for i, (x, ss) in enumerate(zip(xs, root.spawn(xs.size))):
        rng = np.random.Generator(np.random.Philox(ss))
        draws = joint_sampler(rng, samples_per_point)
        draws[:, n - 1] = x
        sq = np.asarray(g_partial(draws, n), dtype=float) ** 2
        means[i] = sq.mean()
        errs[i] = sq.std(ddof=1) / np.sqrt(samples_per_point)
    return SensitivityProfile(
        (float(xs[0]), float(xs[-1])),
        GriddedFunction(xs, means),
        grid=xs,
        stderr=errs,
    )
