"""Cost allocation across heterogeneous communication links.

Every problem here has the same shape: minimize a sum of terms
beta_i * 2^(-2 b_i / alpha_i) over nonnegative cost shares b_i subject to
a budget.  The deterministic case constrains sum(b); the probabilistic
case (codebooks chosen per chat message) constrains the expected cost
sum(w_i * b_i) with message probabilities as weights.  The stationarity
condition is identical in both, so one water-filling routine serves both
with the weights entering only through the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .distortion import (
    ENTROPY_CONSTRAINED,
    FIXED_RATE,
    entropy_coding_tables,
    fixed_rate_betas,
)

if TYPE_CHECKING:  # pragma: no cover
    from .chatnet import ChatNetworkSpec

__all__ = [
    "AllocationResult",
    "InfeasibleBudgetError",
    "NonInteriorAllocationError",
    "chat_budget_search",
    "closed_form_allocation",
    "entropy_allocation",
    "probabilistic_allocation",
    "waterfill_kkt",
]

_BISECT_ITERS = 200


class NonInteriorAllocationError(ValueError):
    """The interior closed form produced a nonpositive share."""


class InfeasibleBudgetError(ValueError):
    """No candidate leaves a positive budget for the fusion links."""


@dataclass(frozen=True)
class AllocationResult:
    """Cost shares b, the rates b/alpha they buy, and the predicted fMSE.

    ``weights`` are message probabilities in the probabilistic case (the
    budget then holds in expectation); None means deterministic.
    ``labels`` tags each entry with (link, message), message -1 for plain
    per-link allocations.
    """

    b: np.ndarray
    rates: np.ndarray
    predicted_distortion: float
    alphas: np.ndarray
    weights: np.ndarray | None = None
    labels: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        b = np.asarray(self.b, dtype=float)
        if np.any(b < -1e-12):
            raise ValueError("cost shares must be nonnegative")
        object.__setattr__(self, "b", np.maximum(b, 0.0))
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=float))
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=float))

    def budget(self) -> float:
        """Total cost spent: plain sum, or expected cost under the weights."""
        w = 1.0 if self.weights is None else self.weights
        return float(np.sum(w * self.b))

    def csv_rows(self) -> list[tuple[int, int, float, float, float]]:
        """Rows of (link, message, alpha, b, rate)."""
        labels = self.labels or tuple(
            (i + 1, -1) for i in range(self.b.size)
        )
        return [
            (link, msg, float(self.alphas[i]), float(self.b[i]), float(self.rates[i]))
            for i, (link, msg) in enumerate(labels)
        ]


def _objective(betas, alphas, b, weights) -> float:
    w = 1.0 if weights is None else weights
    return float(np.sum(w * betas * 2.0 ** (-2.0 * b / alphas)))


def waterfill_kkt(
    betas: Sequence[float],
    alphas: Sequence[float],
    budget: float,
    weights: Sequence[float] | None = None,
    labels: tuple[tuple[int, int], ...] | None = None,
) -> AllocationResult:
    """Water-fill a budget over links by the KKT conditions.

    Share i gets b_i = max(0, (alpha_i/2) log2((beta_i/alpha_i) / level))
    with the water level found by bisection so the (weighted) shares sum
    to the budget.  The weights do not enter the stationarity condition,
    only the budget, so the same routine covers the deterministic and the
    probabilistic problem.
    """
    betas = np.asarray(betas, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    w = None if weights is None else np.asarray(weights, dtype=float)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if np.any(betas <= 0) or np.any(alphas <= 0):
        raise ValueError("betas and alphas must be positive")
    if w is not None and (np.any(w <= 0) or w.size != betas.size):
        raise ValueError("weights must be positive and match the link count")

    ratio = betas / alphas
    wvec = np.ones_like(betas) if w is None else w

    def shares(level: float) -> np.ndarray:
        return np.maximum(0.0, alphas / 2.0 * np.log2(ratio / level))

    def spent(level: float) -> float:
        return float(np.sum(wvec * shares(level)))

    hi = float(ratio.max())  # all shares zero
    lo = float(ratio.min())
    while spent(lo) < budget:
        lo /= 4.0
    for _ in range(_BISECT_ITERS):
        mid = np.sqrt(lo * hi)  # geometric: level spans many decades
        if spent(mid) > budget:
            lo = mid
        else:
            hi = mid
    b = shares(hi)
    # Close the residual budget gap over the active links.
    active = b > 0
    residual = budget - float(np.sum(wvec * b))
    if active.any() and abs(residual) > 0:
        scale = alphas * active
        b = b + residual * scale / float(np.sum(wvec * scale))
        b = np.maximum(b, 0.0)
    return AllocationResult(
        b, b / alphas, _objective(betas, alphas, b, w), alphas, w, labels
    )


def closed_form_allocation(
    betas: Sequence[float], alphas: Sequence[float], budget: float
) -> AllocationResult:
    """Interior-point allocation in closed form.

    Valid only when every share comes out positive; otherwise raises
    NonInteriorAllocationError and the caller should water-fill.
    """
    res = probabilistic_allocation(
        [[b] for b in betas],
        [[a] for a in alphas],
        [[1.0]] * len(list(betas)),
        budget,
        _allow_fallback=False,
    )
    return AllocationResult(
        res.b, res.rates, res.predicted_distortion, res.alphas,
        None, tuple((i + 1, -1) for i in range(res.b.size)),
    )


def probabilistic_allocation(
    betas: Sequence[Sequence[float]],
    alphas: Sequence[Sequence[float]],
    message_probs: Sequence[Sequence[float]],
    budget: float,
    _allow_fallback: bool = True,
) -> AllocationResult:
    """Allocate an expected budget over per-message codebooks.

    Link n's cost share may depend on the chat message m it received;
    message probabilities weight both the objective and the budget.  The
    interior solution is

        b_n(m) = (alpha_n(m)/atilde) C
                 + (alpha_n(m)/2) log2((beta_n(m)/alpha_n(m)) / G)

    with atilde the probability-weighted sum of alphas and G the
    probability-and-alpha-weighted geometric mean of the beta/alpha
    ratios.  A nonpositive share invalidates the interior assumption and
    the routine falls back to water-filling on the flattened index set.
    """
    flat_b: list[float] = []
    flat_a: list[float] = []
    flat_w: list[float] = []
    labels: list[tuple[int, int]] = []
    for n, (bs, als, ps) in enumerate(zip(betas, alphas, message_probs), start=1):
        if not (len(bs) == len(als) == len(ps)):
            raise ValueError(f"link {n}: ragged beta/alpha/prob rows")
        for m, (beta, alpha, p) in enumerate(zip(bs, als, ps), start=1):
            if p <= 0:
                continue
            flat_b.append(float(beta))
            flat_a.append(float(alpha))
            flat_w.append(float(p))
            labels.append((n, m))
    bet = np.array(flat_b)
    alp = np.array(flat_a)
    wgt = np.array(flat_w)
    if np.any(bet <= 0) or np.any(alp <= 0):
        raise ValueError("betas and alphas must be positive")

    atilde = float(np.sum(wgt * alp))
    log_ratio = np.log2(bet / alp)
    log_gmean = float(np.sum(wgt * alp * log_ratio)) / atilde
    b = alp / atilde * budget + alp / 2.0 * (log_ratio - log_gmean)
    if np.any(b <= 0):
        if not _allow_fallback:
            raise NonInteriorAllocationError(
                "closed form produced a nonpositive share; water-fill instead"
            )
        return waterfill_kkt(bet, alp, budget, wgt, tuple(labels))
    return AllocationResult(
        b, b / alp, _objective(bet, alp, b, wgt), alp, wgt, tuple(labels)
    )


def chat_budget_search(
    spec: "ChatNetworkSpec",
    budget: float,
    rc_grid: Sequence[int],
    regime: str = FIXED_RATE,
) -> tuple[int, AllocationResult]:
    """Brute-force the chat rate, allocating the leftover budget optimally.

    Each candidate chat rate is charged on every chat edge at that edge's
    cost per bit; the remainder goes to the fusion links through the
    regime's allocation rule.  Returns the chat rate with the smallest
    predicted fMSE and its allocation.  Candidates that consume the whole
    budget are skipped; if none survives, the budget is infeasible.
    """
    best: tuple[int, AllocationResult] | None = None
    for rc in rc_grid:
        trial = spec.with_chat_rate(int(rc))
        chat_cost = sum(
            e.alpha * np.log2(e.size) for e in trial.graph.edges
        )
        remaining = budget - chat_cost
        if remaining <= 0:
            continue
        if regime == FIXED_RATE:
            betas = fixed_rate_betas(trial)
            res = waterfill_kkt(betas, trial.fusion_alphas, remaining)
        elif regime == ENTROPY_CONSTRAINED:
            res = entropy_allocation(trial, remaining)
        else:
            raise ValueError(f"unknown regime {regime!r}")
        if best is None or res.predicted_distortion < best[1].predicted_distortion:
            best = (int(rc), res)
    if best is None:
        raise InfeasibleBudgetError(
            f"chatting exhausts the budget {budget:g} at every candidate rate"
        )
    return best


def entropy_allocation(spec: "ChatNetworkSpec", budget: float) -> AllocationResult:
    """Optimal per-message rate allocation under entropy coding.

    The don't-care gate turns message (n, k) into a link with effective
    cost per exponent-bit alpha_n * P(A) and coefficient inflated by the
    gate bits; that is exactly a probabilistic allocation instance.  The
    returned rates are actual bit rates b / alpha_n, not the effective
    ones used inside the optimization.
    """
    tables = entropy_coding_tables(spec)
    alphas = np.asarray(spec.fusion_alphas, dtype=float)
    betas_t, alphas_t, probs_t = [], [], []
    for n, tab in enumerate(tables, start=1):
        keep = tab.probs > 0
        betas_t.append(
            list(tab.constants[keep] * 2.0 ** (2.0 * tab.gate_bits[keep] / tab.active_mass[keep]))
        )
        alphas_t.append(list(alphas[n - 1] * tab.active_mass[keep]))
        probs_t.append(list(tab.probs[keep]))
    res = probabilistic_allocation(betas_t, alphas_t, probs_t, budget)
    # Relabel message indices to the originals when zero-probability
    # messages were dropped.
    labels: list[tuple[int, int]] = []
    for n, tab in enumerate(tables, start=1):
        labels += [(n, k + 1) for k in np.flatnonzero(tab.probs > 0)]
    true_alphas = np.array([alphas[n - 1] for n, _ in labels])
    return AllocationResult(
        res.b,
        res.b / true_alphas,
        res.predicted_distortion,
        true_alphas,
        res.weights,
        tuple(labels),
    )
