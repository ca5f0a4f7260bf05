import numpy as np
import pytest

from chatquant.chatnet import ChatNetworkSpec
from chatquant.distortion import (
    DistortionReport,
    InfeasibleRateError,
    UndefinedDistortionError,
    beta_fixed_rate,
    closed_form_max_nochat,
    entropy_coding_tables,
    fixed_rate_betas,
    fixed_rate_message_moments,
    hr_fmse_entropy_chat,
    hr_fmse_fixed_rate_chat,
    hr_mse,
    optimal_density_entropy,
    optimal_density_fixed_rate,
)
from chatquant.probcore import Pdf
from chatquant.quantizer import PointDensity
from chatquant.sensitivity import SensitivityProfile, max_sensitivity


def flat_profile():
    return SensitivityProfile((0.0, 1.0), lambda x: np.ones_like(x))


def chat5():
    return ChatNetworkSpec.serial_max(5, 2)


# -- hr_mse ---------------------------------------------------------------


def test_hr_mse_uniform():
    dens = PointDensity.uniform(0.0, 1.0)
    pdf = Pdf.uniform(0.0, 1.0)
    assert hr_mse(4, dens, pdf) == pytest.approx(1.0 / 192.0)
    assert hr_mse(1, dens, pdf) == pytest.approx(1.0 / 12.0)


def test_hr_mse_companded_triangular():
    # Source f = 2x; the cube-root-shaped density gives E[1/lambda^2] = 27/32.
    pdf = Pdf.from_callable(lambda x: 2.0 * x, 0.0, 1.0)
    dens = optimal_density_fixed_rate(flat_profile(), pdf)
    assert hr_mse(8, dens, pdf) == pytest.approx((27.0 / 32.0) / (12.0 * 64.0))


def test_hr_mse_rejects_mass_in_zero_zone():
    pdf = Pdf.uniform(0.0, 1.0)
    dens = PointDensity.from_proportional(
        lambda x: np.where(np.asarray(x) > 0.5, 1.0, 0.0),
        0.0,
        1.0,
        zero_zones=((0.0, 0.5),),
    )
    with pytest.raises(UndefinedDistortionError):
        hr_mse(4, dens, pdf)


def test_hr_mse_validates_size():
    with pytest.raises(ValueError):
        hr_mse(0, PointDensity.uniform(0.0, 1.0), Pdf.uniform(0.0, 1.0))


# -- optimal densities ----------------------------------------------------


def test_optimal_density_fixed_rate_shape():
    # gamma^2 = x^2 over a uniform source: lambda proportional to x^(2/3).
    pdf = Pdf.uniform(0.0, 1.0)
    dens = optimal_density_fixed_rate(max_sensitivity(3), pdf)
    xs = np.array([0.2, 0.5, 0.9])
    want = (5.0 / 3.0) * xs ** (2.0 / 3.0)
    assert np.allclose(dens(xs), want, rtol=1e-9)


def test_optimal_density_entropy_shape():
    # lambda proportional to gamma: for gamma^2 = x^2 that is 2x.
    dens = optimal_density_entropy(max_sensitivity(3))
    xs = np.array([0.25, 0.5, 1.0])
    assert np.allclose(dens(xs), 2.0 * xs, rtol=1e-9)


def test_optimal_density_rejects_empty_profile():
    dead = SensitivityProfile((0.0, 1.0), lambda x: np.zeros_like(x))
    with pytest.raises(UndefinedDistortionError):
        optimal_density_entropy(dead)
    with pytest.raises(UndefinedDistortionError):
        optimal_density_fixed_rate(dead, Pdf.uniform(0.0, 1.0))


# -- fixed-rate network forms ----------------------------------------------


def test_first_sensor_beta_closed_form():
    # Unconditional profile x^4: quasi-norm (3/7)^3, beta = (3/7)^3 / 12.
    assert beta_fixed_rate(1, chat5()) == pytest.approx((3.0 / 7.0) ** 3 / 12.0)


FROZEN_BETAS_5 = np.array(
    [0.00655977, 0.00573579, 0.00513236, 0.00468962, 0.00436403]
)


def test_fixed_rate_betas_frozen():
    assert np.allclose(fixed_rate_betas(chat5()), FROZEN_BETAS_5, rtol=1e-5)


def test_betas_shrink_along_chain():
    # Chatting helps later sensors more, so the coefficients decrease.
    betas = fixed_rate_betas(chat5())
    assert np.all(np.diff(betas) < 0)


def test_fixed_rate_chat_matches_moment_table():
    spec = chat5()
    rates = np.array([5.2, 5.1, 5.0, 4.9, 4.8])
    report = hr_fmse_fixed_rate_chat(spec, None, rates)
    total = 0.0
    for n, (probs, norms, dc) in enumerate(fixed_rate_message_moments(spec), 1):
        k = 2.0 ** rates[n - 1]
        live = probs > 0
        total += np.sum(
            probs[live] * norms[live] / (12.0 * (k - dc[live]) ** 2)
        )
    assert report.total == pytest.approx(total, rel=1e-12)
    assert report.regime == "fixed-rate"


def test_fixed_rate_chat_with_explicit_densities():
    # Handing in the optimal densities reproduces the collapsed form.
    spec = chat5()
    densities = {}
    for n in range(1, 6):
        probs = spec.message_probs(n).probabilities
        for k in range(1, probs.size + 1):
            densities[(n, k)] = optimal_density_fixed_rate(
                spec.conditional_profile(n, k), spec.source
            )
    rates = [4.0] * 5
    a = hr_fmse_fixed_rate_chat(spec, None, rates)
    b = hr_fmse_fixed_rate_chat(spec, densities, rates)
    assert b.total == pytest.approx(a.total, rel=1e-6)


def test_fixed_rate_chat_infeasible_rate():
    # Sensor 2's second message has one don't-care cell, so a single-cell
    # codebook has no granular cell left.
    with pytest.raises(InfeasibleRateError):
        hr_fmse_fixed_rate_chat(chat5(), None, [0.0] * 5)


def test_nochat_reduces_to_closed_form_fixed_rate():
    spec = ChatNetworkSpec.serial_max(5, 1)
    report = hr_fmse_fixed_rate_chat(spec, None, [4.0] * 5)
    assert report.total == pytest.approx(closed_form_max_nochat(5, 20.0, "fixed-rate"))
    assert report.total == pytest.approx(1.28120445e-4, rel=1e-8)


# -- entropy-constrained network forms --------------------------------------


def test_entropy_tables_frozen_coefficients():
    tables = entropy_coding_tables(chat5())
    t2, t5 = tables[1], tables[4]
    assert t2.constants[0] == pytest.approx(2.516449e-3, rel=1e-5)
    assert t2.constants[1] == pytest.approx(1.526303e-3, rel=1e-5)
    assert t5.constants[1] == pytest.approx(2.042407e-3, rel=1e-5)
    assert t2.active_mass[1] == pytest.approx(0.5)
    assert t2.gate_bits[1] == pytest.approx(1.0)
    # First sensor and first messages see the full support: no gate.
    assert tables[0].active_mass[0] == pytest.approx(1.0)
    assert tables[0].gate_bits[0] == pytest.approx(0.0)
    assert t2.active_mass[0] == pytest.approx(1.0)


def test_entropy_chat_matches_table_sum():
    spec = chat5()
    tables = entropy_coding_tables(spec)
    rates = np.array([5.0, 5.1, 4.9, 5.2, 4.8])
    report = hr_fmse_entropy_chat(spec, None, rates)
    total = 0.0
    for n, t in enumerate(tables, 1):
        for k in range(t.probs.size):
            if t.probs[k] <= 0:
                continue
            total += (
                t.probs[k]
                * t.constants[k]
                * 2.0
                ** (-2.0 * (rates[n - 1] - t.gate_bits[k]) / t.active_mass[k])
            )
    assert report.total == pytest.approx(total, rel=1e-12)
    assert report.regime == "entropy-constrained"


def test_entropy_chat_per_message_rates():
    spec = chat5()
    scalar = hr_fmse_entropy_chat(spec, None, [5.0] * 5)
    spread = hr_fmse_entropy_chat(
        spec, None, [[5.0], [5.0, 5.0], [5.0, 5.0], [5.0, 5.0], [5.0, 5.0]]
    )
    assert spread.total == pytest.approx(scalar.total, rel=1e-12)


def test_entropy_chat_with_explicit_densities():
    spec = chat5()
    densities = {}
    for n in range(1, 6):
        probs = spec.message_probs(n).probabilities
        for k in range(1, probs.size + 1):
            densities[(n, k)] = optimal_density_entropy(
                spec.conditional_profile(n, k)
            )
    a = hr_fmse_entropy_chat(spec, None, [5.0] * 5)
    b = hr_fmse_entropy_chat(spec, densities, [5.0] * 5)
    assert b.total == pytest.approx(a.total, rel=1e-6)


def test_entropy_chat_gate_infeasible():
    # Message 2 costs a full gate bit at every chatting sensor; a 1-bit
    # rate leaves nothing for the granular code.
    with pytest.raises(InfeasibleRateError):
        hr_fmse_entropy_chat(chat5(), None, [1.0] * 5)


def test_nochat_reduces_to_closed_form_entropy():
    spec = ChatNetworkSpec.serial_max(5, 1)
    report = hr_fmse_entropy_chat(spec, None, [4.0] * 5)
    assert report.total == pytest.approx(
        closed_form_max_nochat(5, 20.0, "entropy-constrained")
    )
    assert report.total == pytest.approx(2.98106102e-5, rel=1e-8)


# -- report plumbing and closed forms ----------------------------------------


def test_report_validation():
    with pytest.raises(ValueError):
        DistortionReport(np.array([-1.0]), -1.0, "fixed-rate")
    with pytest.raises(ValueError):
        DistortionReport(np.array([1.0, 2.0]), 4.0, "fixed-rate")


def test_report_csv_rows():
    rep = DistortionReport(
        np.array([0.3, 0.7]), 1.0, "fixed-rate", ((1, 1, 0.3), (2, 1, 0.7))
    )
    rows = rep.csv_rows()
    assert (1, -1, 0.3) in rows and (2, -1, 0.7) in rows
    assert (1, 1, 0.3) in rows


def test_closed_form_validation():
    with pytest.raises(ValueError):
        closed_form_max_nochat(0, 10.0, "fixed-rate")
    with pytest.raises(ValueError):
        closed_form_max_nochat(3, -1.0, "fixed-rate")
    with pytest.raises(ValueError):
        closed_form_max_nochat(3, 10.0, "variable-rate")


def test_closed_form_monotone_in_budget():
    d = [closed_form_max_nochat(4, c, "fixed-rate") for c in (8.0, 12.0, 16.0)]
    assert d[0] > d[1] > d[2]
