"""Scripted studies over the serial max network.

Each function returns plain row dicts and can serialize them to CSV with
a parameter header, one file per study.  Nothing here plots; the CSVs
are the deliverable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .allocation import entropy_allocation, waterfill_kkt
from .chatnet import ChatNetworkSpec, design_network
from .distortion import (
    ENTROPY_CONSTRAINED,
    FIXED_RATE,
    closed_form_max_nochat,
    fixed_rate_betas,
    hr_fmse_entropy_chat,
)
from .simulator import CONDITIONAL_EXPECTATION, run_simulation

__all__ = [
    "SweepSpec",
    "allocation_report",
    "run_scenarios",
    "standard_figures",
    "sweep_chatting_rate",
    "sweep_partition",
    "write_csv",
]


@dataclass(frozen=True)
class SweepSpec:
    """A family of serial max networks with one swept variable.

    ``variable`` names the swept axis (Rc, p1, alpha_c or N) and
    ``values`` its points; the remaining fields stay fixed across the
    family.  ``budget`` may be a number or "4N"-style None meaning
    budget_per_sensor * N.
    """

    variable: str
    values: tuple
    n_sensors: int = 4
    budget_per_sensor: float = 4.0
    alpha_c: float = 0.01
    fusion_alpha: float = 1.0
    regime: str = FIXED_RATE

    def __post_init__(self) -> None:
        if self.variable not in ("Rc", "p1", "alpha_c", "N"):
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.variable == "p1" and not all(0 < v < 1 for v in self.values):
            raise ValueError("partition boundaries must be inside (0, 1)")
        if self.variable == "Rc" and not all(
            int(v) == v and v >= 0 for v in self.values
        ):
            raise ValueError("chat rates must be nonnegative integers")

    @property
    def budget(self) -> float:
        return self.budget_per_sensor * self.n_sensors

    def params(self) -> dict:
        return {
            "variable": self.variable,
            "N": self.n_sensors,
            "C": self.budget,
            "alpha_c": self.alpha_c,
            "alpha_n": self.fusion_alpha,
            "regime": self.regime,
        }


def _allocate(spec: ChatNetworkSpec, remaining: float):
    if spec.regime == FIXED_RATE:
        return waterfill_kkt(
            fixed_rate_betas(spec), np.asarray(spec.fusion_alphas), remaining
        )
    return entropy_allocation(spec, remaining)


def sweep_chatting_rate(
    sweep: SweepSpec,
    simulate: bool = False,
    trials: int = 100_000,
    seed: int = 0,
    decoder: str = CONDITIONAL_EXPECTATION,
) -> list[dict]:
    """Predicted (and optionally simulated) fMSE against the chat rate.

    Every chat edge is charged alpha_c per bit; the rest of the budget is
    allocated optimally across fusion links.  Rows where chatting alone
    exhausts the budget are kept and flagged infeasible.  Simulation
    designs real integer-size codebooks under the same budget, so its
    predicted column can differ slightly from the continuous-rate one.
    """
    if sweep.variable != "Rc":
        raise ValueError("sweep_chatting_rate expects a chat-rate sweep")
    rows = []
    for rc in sweep.values:
        rc = int(rc)
        spec = ChatNetworkSpec.serial_max(
            sweep.n_sensors,
            2**rc,
            sweep.alpha_c,
            sweep.fusion_alpha,
            sweep.regime,
        )
        chat_cost = sum(e.alpha * np.log2(e.size) for e in spec.graph.edges)
        remaining = sweep.budget - chat_cost
        row = {
            "Rc": rc,
            "feasible": bool(remaining > 0),
            "predicted_fmse": None,
            "empirical_fmse": None,
            "stderr": None,
        }
        if remaining > 0:
            alloc = _allocate(spec, remaining)
            row["predicted_fmse"] = alloc.predicted_distortion
            if simulate and sweep.regime == FIXED_RATE:
                design = design_network(spec, budget=sweep.budget)
                sim = run_simulation(
                    spec,
                    design.banks,
                    decoder,
                    trials,
                    seed,
                    predicted=design.predicted.total,
                )
                row["empirical_fmse"] = sim.empirical_fmse
                row["stderr"] = sim.stderr
                row["predicted_fmse"] = design.predicted.total
        rows.append(row)
    return rows


def sweep_partition(sweep: SweepSpec) -> list[dict]:
    """fMSE ratio against the no-chat baseline as the single one-bit
    partition boundary moves.

    Chatting is free here (the cost model of the study) and the chat rate
    is one bit, so the network differs from the no-chat one only through
    the conditional sensitivities.  Ratios above 1 mean chatting hurts.
    """
    if sweep.variable != "p1":
        raise ValueError("sweep_partition expects a p1 sweep")
    base = ChatNetworkSpec.serial_max(
        sweep.n_sensors, 2, 0.0, sweep.fusion_alpha, sweep.regime
    )
    nochat = closed_form_max_nochat(sweep.n_sensors, sweep.budget, sweep.regime)
    rows = []
    for p1 in sweep.values:
        spec = base.with_partition((0.0, float(p1), 1.0))
        alloc = _allocate(spec, sweep.budget)
        rows.append(
            {
                "p1": float(p1),
                "predicted_fmse": alloc.predicted_distortion,
                "nochat_fmse": nochat,
                "ratio": alloc.predicted_distortion / nochat,
            }
        )
    return rows


def run_scenarios(
    n_sensors: int = 5,
    budget_per_sensor: float = 5.0,
    regimes: Sequence[str] = (FIXED_RATE, ENTROPY_CONSTRAINED),
    p1_step: float = 0.01,
) -> list[dict]:
    """Distortion improvement from chatting, allocation, and partition
    design, each added in turn.

    Scenario 1 keeps equal rates and the uniform one-bit partition;
    scenario 2 adds optimal rate allocation; scenario 3 also brute-force
    optimizes the partition boundary.  Improvements are the no-chat
    distortion divided by the scenario distortion at the same total cost
    (chatting itself is free).
    """
    budget = budget_per_sensor * n_sensors
    rows = []
    for regime in regimes:
        spec = ChatNetworkSpec.serial_max(n_sensors, 2, 0.0, 1.0, regime)
        nochat = closed_form_max_nochat(n_sensors, budget, regime)
        equal = [budget / n_sensors] * n_sensors
        if regime == FIXED_RATE:
            # Keep the asymptotic form so scenario 1 differs from 2 and 3
            # only through the allocation, not through finite-size effects.
            d1 = float(
                np.dot(fixed_rate_betas(spec), 2.0 ** (-2.0 * np.asarray(equal)))
            )
        else:
            d1 = hr_fmse_entropy_chat(spec, None, equal).total
        d2 = _allocate(spec, budget).predicted_distortion
        best_p1, d3 = optimize_partition(spec, budget, p1_step)
        for label, value in (
            ("no-chat", nochat),
            ("1-equal-rates", d1),
            ("2-allocation", d2),
            ("3-allocation+partition", d3),
        ):
            rows.append(
                {
                    "regime": regime,
                    "scenario": label,
                    "fmse": value,
                    "improvement": nochat / value,
                    "p1": best_p1 if label.startswith("3") else 0.5,
                }
            )
    return rows


def optimize_partition(
    spec: ChatNetworkSpec, budget: float, step: float = 0.01
) -> tuple[float, float]:
    """Brute-force the one-bit partition boundary on a fixed grid."""
    best_p1, best = 0.5, np.inf
    for p1 in np.arange(step, 1.0, step):
        alloc = _allocate(spec.with_partition((0.0, float(p1), 1.0)), budget)
        if alloc.predicted_distortion < best:
            best_p1, best = float(p1), alloc.predicted_distortion
    return best_p1, best


def allocation_report(
    n_sensors: int = 10,
    budget_per_sensor: float = 5.0,
    rc: int = 3,
    alpha_c: float = 0.0,
) -> list[dict]:
    """Optimal cost shares per link for both regimes, side by side.

    Fixed-rate shares are per sensor; entropy-constrained shares depend on
    the received message, except for sensor 1 which receives none.
    """
    budget = budget_per_sensor * n_sensors
    rows = []
    for regime in (FIXED_RATE, ENTROPY_CONSTRAINED):
        spec = ChatNetworkSpec.serial_max(n_sensors, 2**rc, alpha_c, 1.0, regime)
        chat_cost = sum(e.alpha * np.log2(e.size) for e in spec.graph.edges)
        alloc = _allocate(spec, budget - chat_cost)
        for link, msg, alpha, b, rate in alloc.csv_rows():
            rows.append(
                {
                    "regime": regime,
                    "sensor": link,
                    "message": msg,
                    "alpha": alpha,
                    "b": b,
                    "rate": rate,
                }
            )
    return rows


def write_csv(
    path: str | Path,
    rows: Iterable[dict],
    params: dict | None = None,
) -> Path:
    """Write rows as CSV with '# key = value' parameter header lines."""
    path = Path(path)
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in (params or {}).items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: ("" if v is None else v)
                    for k, v in row.items()
                }
            )
    return path


def standard_figures(
    outdir: str | Path,
    simulate: bool = False,
    trials: int = 100_000,
    seed: int = 0,
) -> list[Path]:
    """Emit the full set of study CSVs into ``outdir``.

    fig5a/b sweep the chat rate across network sizes, fig5c/d across
    chatting costs, fig6a/b sweep the one-bit partition boundary, fig7
    runs the scenario ladder, fig3 reports allocations.
    """
    outdir = Path(outdir)
    written = []

    for name, regime in (("fig5a", FIXED_RATE), ("fig5b", ENTROPY_CONSTRAINED)):
        rows = []
        for n in (2, 3, 4, 5):
            sweep = SweepSpec(
                "Rc", (0, 1, 2, 3), n, 4.0, 0.01, 1.0, regime
            )
            for row in sweep_chatting_rate(
                sweep, simulate=simulate and regime == FIXED_RATE, trials=trials, seed=seed
            ):
                rows.append({"N": n, **row})
        written.append(
            write_csv(outdir / f"{name}.csv", rows, {"study": "fmse-vs-chat-rate", "C": "4N", "alpha_c": 0.01, "regime": regime})
        )

    for name, regime in (("fig5c", FIXED_RATE), ("fig5d", ENTROPY_CONSTRAINED)):
        rows = []
        for alpha_c in (0.0, 0.01, 0.1, 1.0):
            sweep = SweepSpec("Rc", (0, 1, 2, 3), 4, 4.0, alpha_c, 1.0, regime)
            for row in sweep_chatting_rate(
                sweep, simulate=simulate and regime == FIXED_RATE, trials=trials, seed=seed
            ):
                rows.append({"alpha_c": alpha_c, **row})
        written.append(
            write_csv(outdir / f"{name}.csv", rows, {"study": "fmse-vs-chat-rate", "N": 4, "C": 16, "regime": regime})
        )

    p1_grid = tuple(np.round(np.concatenate([[0.01], np.arange(0.05, 1.0, 0.05), [0.99]]), 2))
    for name, regime in (("fig6a", FIXED_RATE), ("fig6b", ENTROPY_CONSTRAINED)):
        rows = []
        for n in (2, 3, 5, 10):
            sweep = SweepSpec("p1", p1_grid, n, 4.0, 0.0, 1.0, regime)
            for row in sweep_partition(sweep):
                rows.append({"N": n, **row})
        written.append(
            write_csv(outdir / f"{name}.csv", rows, {"study": "fmse-ratio-vs-partition", "C": "4N", "Rc": 1, "alpha_c": 0.0, "regime": regime})
        )

    written.append(
        write_csv(
            outdir / "fig7.csv",
            run_scenarios(),
            {"study": "scenario-ladder", "N": 5, "C": 25, "Rc": 1, "alpha_c": 0.0},
        )
    )
    written.append(
        write_csv(
            outdir / "fig3.csv",
            allocation_report(),
            {"study": "allocation-report", "N": 10, "C": 50, "Rc": 3, "alpha_c": 0.0},
        )
    )
    return written
