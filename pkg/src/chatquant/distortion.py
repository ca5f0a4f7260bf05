"""High-resolution distortion predictors and optimal point densities.

Covers plain mean-squared error of a companding quantizer, functional MSE
of a distributed network without chatting, and the chatting forms in which
each sensor selects a codebook from the received message.  All message
expectations are exact sums over the message distribution; nothing on the
design side is sampled.

The network argument of the chat predictors is duck-typed: it needs
``n_sensors``, ``source`` (a Pdf shared by the iid sensors),
``message_probs(n)`` and ``conditional_profile(n, k)`` with 1-based
indices.  ``ChatNetworkSpec`` provides these.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .probcore import Pdf, binary_entropy, integrate_adaptive
from .quantizer import PointDensity, _active_intervals
from .sensitivity import SensitivityProfile

if TYPE_CHECKING:  # pragma: no cover
    from .chatnet import ChatNetworkSpec

__all__ = [
    "DistortionReport",
    "EntropyCodingTable",
    "InfeasibleRateError",
    "UndefinedDistortionError",
    "beta_fixed_rate",
    "closed_form_max_nochat",
    "entropy_coding_tables",
    "fixed_rate_betas",
    "fixed_rate_message_moments",
    "hr_fmse_entropy_chat",
    "hr_fmse_fixed_rate_chat",
    "hr_mse",
    "optimal_density_entropy",
    "optimal_density_fixed_rate",
]

FIXED_RATE = "fixed-rate"
ENTROPY_CONSTRAINED = "entropy-constrained"

# Floor under gamma^2 inside logarithms; the log singularity at a zero of
# the profile is integrable, the floor only guards exact-zero evaluations.
_LOG_FLOOR = 1e-300


class UndefinedDistortionError(ValueError):
    """The point density vanishes on a set of positive probability."""


class InfeasibleRateError(ValueError):
    """A rate too small to carry the mandatory coding overhead."""


@dataclass(frozen=True)
class DistortionReport:
    """Additive distortion prediction, one term per sensor.

    ``detail`` holds (sensor, message, contribution) triples where the
    contribution is already weighted by the message probability, so the
    detail rows sum to ``total``.
    """

    per_sensor_terms: np.ndarray
    total: float
    regime: str
    detail: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self) -> None:
        terms = np.asarray(self.per_sensor_terms, dtype=float)
        if np.any(terms < 0):
            raise ValueError("distortion terms must be nonnegative")
        if abs(terms.sum() - self.total) > 1e-9 * max(1.0, abs(self.total)):
            raise ValueError("total must equal the sum of per-sensor terms")
        object.__setattr__(self, "per_sensor_terms", terms)

    def csv_rows(self) -> list[tuple[int, int, float]]:
        """Rows of (sensor, message, value); message -1 aggregates a sensor."""
        rows = list(self.detail)
        rows += [
            (n + 1, -1, float(t)) for n, t in enumerate(self.per_sensor_terms)
        ]
        return rows


def hr_mse(size: int, density: PointDensity, pdf: Pdf) -> float:
    """High-resolution MSE of a ``size``-cell companding quantizer.

    Evaluates E[lambda^-2(X)] / (12 K^2).  The density must be positive
    wherever the source has mass.
    """
    if size < 1:
        raise ValueError("codebook size must be at least 1")
    for a, b in density.zero_zones:
        if pdf.integrate(max(a, pdf.lo), min(b, pdf.hi)) > 1e-12:
            raise UndefinedDistortionError(
                f"density is zero on ({a}, {b}) where the source has mass"
            )

    def integrand(x: float) -> float:
        f = float(pdf.density(np.asarray([x]))[0])
        if f == 0.0:
            return 0.0
        lam = float(density(np.asarray([x]))[0])
        if lam <= 0.0:
            return np.inf
        return f / lam**2

    bps = set(pdf.breakpoints) | set(density.breakpoints)
    for a, b in density.zero_zones:
        bps |= {a, b}
    second_moment = 0.0
    for a, b in _active_intervals(pdf.lo, pdf.hi, density.zero_zones):
        second_moment += integrate_adaptive(integrand, a, b, sorted(bps))
    if not np.isfinite(second_moment):
        raise UndefinedDistortionError("E[lambda^-2] diverges")
    return second_moment / (12.0 * size**2)


def optimal_density_fixed_rate(
    profile: SensitivityProfile, pdf: Pdf
) -> PointDensity:
    """Fixed-rate optimal point density, proportional to (gamma^2 f)^(1/3).

    Zero on the profile's zero zones and wherever the source density
    vanishes; normalized over the rest.
    """

    def shaped(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.cbrt(np.maximum(profile(x) * pdf(x), 0.0))

    bps = tuple(set(profile.breakpoints) | set(pdf.breakpoints))
    try:
        return PointDensity.from_proportional(
            shaped, pdf.lo, pdf.hi, profile.zero_zones, bps
        )
    except ValueError as exc:
        raise UndefinedDistortionError(
            "sensitivity-weighted density has no mass"
        ) from exc


def optimal_density_entropy(profile: SensitivityProfile) -> PointDensity:
    """Entropy-constrained optimal point density, proportional to gamma."""
    lo, hi = profile.support

    def shaped(x: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(profile(np.asarray(x, dtype=float)), 0.0))

    try:
        return PointDensity.from_proportional(
            shaped, lo, hi, profile.zero_zones, profile.breakpoints
        )
    except ValueError as exc:
        raise UndefinedDistortionError(
            "sensitivity profile vanishes almost everywhere"
        ) from exc


def _profile_regions(
    profile: SensitivityProfile, pdf: Pdf
) -> tuple[list[tuple[float, float]], list[float]]:
    """Active intervals of a profile clipped to the source support, plus
    the union of integration breakpoints."""
    lo = max(profile.support[0], pdf.lo)
    hi = min(profile.support[1], pdf.hi)
    regions = [
        (max(a, lo), min(b, hi))
        for a, b in _active_intervals(*profile.support, profile.zero_zones)
        if min(b, hi) > max(a, lo)
    ]
    bps = sorted(set(profile.breakpoints) | set(pdf.breakpoints))
    return regions, bps


def _weighted_quasi_norm(profile: SensitivityProfile, pdf: Pdf) -> float:
    """One-third quasi-norm of gamma^2 * f over the profile's active region."""
    regions, bps = _profile_regions(profile, pdf)

    def root(x: float) -> float:
        v = float(profile(np.asarray([x]))[0]) * float(pdf(np.asarray([x]))[0])
        return np.cbrt(max(v, 0.0))

    s = sum(integrate_adaptive(root, a, b, bps) for a, b in regions)
    return s**3


def _density_ratio_moment(
    profile: SensitivityProfile, density: PointDensity, pdf: Pdf
) -> float:
    """E[(gamma/lambda)^2 (X)] over the profile's active region."""
    regions, bps = _profile_regions(profile, pdf)
    bps = sorted(set(bps) | set(density.breakpoints))

    def integrand(x: float) -> float:
        xa = np.asarray([x])
        num = float(profile(xa)[0]) * float(pdf(xa)[0])
        if num <= 0.0:
            return 0.0
        lam = float(density(xa)[0])
        if lam <= 0.0:
            return np.inf
        return num / lam**2

    val = sum(integrate_adaptive(integrand, a, b, bps) for a, b in regions)
    if not np.isfinite(val):
        raise UndefinedDistortionError(
            "point density vanishes where the weighted source has mass"
        )
    return val


def _sensor_messages(spec: "ChatNetworkSpec", n: int):
    """Yield (message index, probability, conditional profile)."""
    probs = spec.message_probs(n).probabilities
    for k, p in enumerate(probs, start=1):
        if p <= 0.0:
            continue
        yield k, float(p), spec.conditional_profile(n, k)


def _dont_care_count(profile: SensitivityProfile) -> int:
    return sum(1 for a, b in profile.zero_zones if b > a)


def hr_fmse_fixed_rate_chat(
    spec: "ChatNetworkSpec",
    densities: Mapping[tuple[int, int], PointDensity] | None,
    rates: Sequence[float],
) -> DistortionReport:
    """Functional MSE of a chatting network under fixed-rate coding.

    For each sensor n and incoming message m the codebook has 2^R_n
    codewords of which L_n(m) sit in don't-care intervals, leaving
    2^R_n - L_n(m) granular cells; the per-message term is
    E[(gamma/lambda)^2] / (12 (2^R_n - L_n(m))^2), averaged exactly over
    the message distribution.  ``densities`` maps (sensor, message) to the
    point density in force; None uses the optimal density for every pair,
    for which E[(gamma/lambda)^2] collapses to the one-third quasi-norm of
    gamma^2 f.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.size != spec.n_sensors:
        raise ValueError("need one rate per sensor")
    pdf = spec.source
    per_sensor = np.zeros(spec.n_sensors)
    detail: list[tuple[int, int, float]] = []
    for n in range(1, spec.n_sensors + 1):
        for k, p, prof in _sensor_messages(spec, n):
            granular = 2.0 ** rates[n - 1] - _dont_care_count(prof)
            if granular <= 0.0:
                raise InfeasibleRateError(
                    f"sensor {n}, message {k}: codebook of size "
                    f"{2.0 ** rates[n - 1]:g} cannot cover the don't-care cells"
                )
            if densities is None:
                moment = _weighted_quasi_norm(prof, pdf)
            else:
                moment = _density_ratio_moment(prof, densities[(n, k)], pdf)
            contrib = p * moment / (12.0 * granular**2)
            per_sensor[n - 1] += contrib
            detail.append((n, k, contrib))
    return DistortionReport(
        per_sensor, float(per_sensor.sum()), FIXED_RATE, tuple(detail)
    )


def _conditional_entropy_bits(
    pdf: Pdf, regions: list[tuple[float, float]], bps: list[float], mass: float
) -> float:
    """Differential entropy in bits of X conditioned on X in ``regions``."""

    def f_log_f(x: float) -> float:
        f = float(pdf(np.asarray([x]))[0])
        return 0.0 if f <= 0.0 else f * np.log2(f)

    raw = sum(integrate_adaptive(f_log_f, a, b, bps) for a, b in regions)
    # h(X|A) = -int (f/P) log2 (f/P) = log2 P - (1/P) int f log2 f.
    return float(np.log2(mass) - raw / mass)


def _mean_log_gamma_bits(
    profile: SensitivityProfile,
    pdf: Pdf,
    regions: list[tuple[float, float]],
    bps: list[float],
    mass: float,
) -> float:
    """E[log2 gamma(X) | X in regions]; the edge singularity is integrable."""

    def integrand(x: float) -> float:
        xa = np.asarray([x])
        f = float(pdf(xa)[0])
        if f <= 0.0:
            return 0.0
        g2 = max(float(profile(xa)[0]), _LOG_FLOOR)
        return f * 0.5 * np.log2(g2)

    raw = sum(integrate_adaptive(integrand, a, b, bps) for a, b in regions)
    return float(raw / mass)


@dataclass(frozen=True)
class EntropyCodingTable:
    """Per-message entropy-coding data for one sensor.

    ``constants[k]`` is the distortion coefficient of message k+1 (the
    factor multiplying the rate-dependent exponential), ``active_mass`` is
    P(A) for that message, and ``gate_bits`` the binary entropy spent
    flagging whether the observation fell in a don't-care interval.
    """

    probs: np.ndarray
    constants: np.ndarray
    active_mass: np.ndarray
    gate_bits: np.ndarray


def _entropy_message_constant(
    profile: SensitivityProfile,
    pdf: Pdf,
    density: PointDensity | None = None,
) -> tuple[float, float, float]:
    """Coefficient, P(A) and gate bits of one (sensor, message) pair."""
    regions, bps = _profile_regions(profile, pdf)
    mass = sum(pdf.integrate(a, b) for a, b in regions)
    if mass <= 0.0:
        raise UndefinedDistortionError("no source mass outside don't-care zones")
    h_bits = _conditional_entropy_bits(pdf, regions, bps, mass)
    if density is None:
        shape_bits = 2.0 * _mean_log_gamma_bits(profile, pdf, regions, bps, mass)
        ratio = 1.0
    else:
        # Full form: 2^{2 E[log2 lambda | A]} * E[(gamma/lambda)^2 | A].
        def log_lam(x: float) -> float:
            xa = np.asarray([x])
            f = float(pdf(xa)[0])
            if f <= 0.0:
                return 0.0
            lam = max(float(density(xa)[0]), _LOG_FLOOR)
            return f * np.log2(lam)

        lam_bps = sorted(set(bps) | set(density.breakpoints))
        shape_bits = 2.0 * sum(
            integrate_adaptive(log_lam, a, b, lam_bps) for a, b in regions
        ) / mass
        ratio = _density_ratio_moment(profile, density, pdf) / mass
    coeff = (mass / 12.0) * 2.0 ** (2.0 * h_bits + shape_bits) * ratio
    return coeff, mass, binary_entropy(mass)


def entropy_coding_tables(spec: "ChatNetworkSpec") -> list[EntropyCodingTable]:
    """Entropy-coding coefficients for every sensor and message.

    These are the raw ingredients for rate allocation: sensor n with
    message k contributes probs[k] * constants[k] * 2^(-2 (R - gate) / mass)
    to the network fMSE when granted rate R on that message.
    """
    pdf = spec.source
    tables = []
    for n in range(1, spec.n_sensors + 1):
        probs = spec.message_probs(n).probabilities
        consts = np.zeros_like(probs)
        masses = np.ones_like(probs)
        gates = np.zeros_like(probs)
        for k, _p, prof in _sensor_messages(spec, n):
            c, m, g = _entropy_message_constant(prof, pdf)
            consts[k - 1], masses[k - 1], gates[k - 1] = c, m, g
        tables.append(EntropyCodingTable(probs, consts, masses, gates))
    return tables


def hr_fmse_entropy_chat(
    spec: "ChatNetworkSpec",
    densities: Mapping[tuple[int, int], PointDensity] | None,
    rates: Sequence[float] | Sequence[Sequence[float]],
) -> DistortionReport:
    """Functional MSE of a chatting network under entropy coding.

    ``rates`` is either one rate per sensor or one sequence per sensor
    with a rate for each incoming message.  Each (sensor, message) rate
    must exceed the gate bits H_B(P(A)) spent flagging don't-care hits;
    the remainder is amplified by 1/P(A) because the granular code runs
    only when the observation is informative.
    """
    pdf = spec.source
    per_sensor = np.zeros(spec.n_sensors)
    detail: list[tuple[int, int, float]] = []
    for n in range(1, spec.n_sensors + 1):
        r_n = rates[n - 1]
        for k, p, prof in _sensor_messages(spec, n):
            r = float(r_n if np.isscalar(r_n) else r_n[k - 1])
            dens = None if densities is None else densities[(n, k)]
            coeff, mass, gate = _entropy_message_constant(prof, pdf, dens)
            if r <= gate:
                raise InfeasibleRateError(
                    f"sensor {n}, message {k}: rate {r:g} cannot cover the "
                    f"{gate:g}-bit don't-care flag"
                )
            contrib = p * coeff * 2.0 ** (-2.0 * (r - gate) / mass)
            per_sensor[n - 1] += contrib
            detail.append((n, k, contrib))
    return DistortionReport(
        per_sensor, float(per_sensor.sum()), ENTROPY_CONSTRAINED, tuple(detail)
    )


def fixed_rate_message_moments(
    spec: "ChatNetworkSpec",
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-sensor (probs, quasi-norms, don't-care counts) over messages.

    The quasi-norm entry for message k is E[(gamma/lambda)^2] under the
    optimal fixed-rate density, so sensor n's distortion with a K-cell
    codebook is sum_k probs[k] * norms[k] / (12 (K - dc[k])^2).
    """
    pdf = spec.source
    out = []
    for n in range(1, spec.n_sensors + 1):
        probs = spec.message_probs(n).probabilities
        norms = np.zeros_like(probs)
        dc = np.zeros(probs.size, dtype=int)
        for k, _p, prof in _sensor_messages(spec, n):
            norms[k - 1] = _weighted_quasi_norm(prof, pdf)
            dc[k - 1] = _dont_care_count(prof)
        out.append((probs, norms, dc))
    return out


def beta_fixed_rate(n: int, spec: "ChatNetworkSpec") -> float:
    """Fixed-rate distortion coefficient of sensor ``n``.

    The message-probability-weighted one-third quasi-norm of the
    conditional gamma^2 f, divided by 12; sensor n then contributes
    beta_n * 2^(-2 R_n) to the network fMSE.
    """
    pdf = spec.source
    return sum(
        p * _weighted_quasi_norm(prof, pdf) / 12.0
        for _k, p, prof in _sensor_messages(spec, n)
    )


def fixed_rate_betas(spec: "ChatNetworkSpec") -> np.ndarray:
    return np.array(
        [beta_fixed_rate(n, spec) for n in range(1, spec.n_sensors + 1)]
    )


def closed_form_max_nochat(n_sensors: int, budget: float, regime: str) -> float:
    """Distortion-cost trade-off for the chat-free max network.

    Equal unit-cost links split the budget evenly, R_n = C/N over iid
    uniform(0,1) sources.
    """
    if n_sensors < 1:
        raise ValueError("need at least one sensor")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if regime == FIXED_RATE:
        const = (n_sensors / 12.0) * (3.0 / (n_sensors + 2.0)) ** 3
    elif regime == ENTROPY_CONSTRAINED:
        const = (n_sensors / 12.0) * np.exp(-(n_sensors - 1.0))
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return float(const * 2.0 ** (-2.0 * budget / n_sensors))
