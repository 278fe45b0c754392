import numpy as np
import pytest

from choqlab.asymptotics import (GridSpec, SweepConfig, fit_log_corrected,
                                 fit_power_law, mass_curve,
                                 predicted_exponents, sweep)
from choqlab.errors import RegimeError
from choqlab.solver import ProblemParams, SolveOptions


def test_fit_power_law_exact():
    eps = np.geomspace(1, 100, 8)
    expo, pref, r2 = fit_power_law(list(zip(eps, 3.0 * eps ** 2)))
    assert expo == pytest.approx(2.0, abs=1e-12)
    assert pref == pytest.approx(3.0, rel=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_power_law_with_correction():
    eps = np.geomspace(1e2, 1e5, 12)
    y = eps ** (-1 / 3) * (1 + 0.5 * eps ** (-1 / 3))
    expo, _, _ = fit_power_law(list(zip(eps, y)))
    assert abs(expo - (-1 / 3)) / (1 / 3) < 0.05


def test_fit_power_law_constant_and_errors():
    eps = np.geomspace(1, 100, 6)
    expo, pref, _ = fit_power_law(list(zip(eps, np.full(6, 4.0))))
    assert expo == pytest.approx(0.0, abs=1e-12)
    assert pref == pytest.approx(4.0, rel=1e-12)
    with pytest.raises(RegimeError):
        fit_power_law([(1.0, 1.0), (2.0, 2.0)])
    with pytest.raises(RegimeError):
        fit_power_law(list(zip(eps, [-1.0] * 6)))


def test_fit_log_corrected_synthetic_log_data():
    eps = np.geomspace(1e2, 1e5, 12)
    y = (eps * np.log(eps)) ** -0.5
    lf = fit_log_corrected(list(zip(eps, y)), -0.5)
    assert abs(lf.theta_log + 0.5) < 0.05
    assert lf.r2_log > lf.r2_power
    assert lf.bracketed


def test_fit_log_corrected_pure_power_data():
    eps = np.geomspace(1e2, 1e5, 12)
    y = eps ** -0.5
    lf = fit_log_corrected(list(zip(eps, y)), -0.5)
    assert lf.r2_power >= lf.r2_log
    with pytest.raises(RegimeError):
        fit_log_corrected(list(zip(eps[:5], y[:5])), -0.5)
    with pytest.raises(RegimeError):
        fit_log_corrected(list(zip(np.geomspace(1, 10, 8),
                                   np.geomspace(1, 10, 8))), -0.5)


def test_predicted_exponents_pinned_values():
    lo = predicted_exponents(ProblemParams(3, 2.0, "lower", 2.2, 1.0, 10.0))
    assert lo["center"].eps_exp == pytest.approx(6.0 / (2 * 3.4))
    assert lo["center"].eps_exp == pytest.approx(0.88235, abs=1e-5)
    assert lo["l2_sq"].eps_exp == pytest.approx(1.5)
    assert lo["d_term"].eps_exp == pytest.approx(2.5)
    assert lo["gap"].eps_exp == pytest.approx(-(8 - 12 * 0.2) / (2 * 3.4))

    up5 = predicted_exponents(ProblemParams(5, 2.0, "upper", 3.0, 1.0, 10.0))
    assert up5["gap"].eps_exp == pytest.approx(-1.0 / 3.0)
    assert up5["l2_sq"].eps_exp == pytest.approx(-4.0 / 3.0)

    up3 = predicted_exponents(ProblemParams(3, 2.0, "upper", 5.0, 1.0, 10.0))
    assert up3["l2_sq"].eps_exp == pytest.approx(-1.5)
    assert up3["tilde_l2_sq"].eps_exp == pytest.approx(0.5)

    up4 = predicted_exponents(ProblemParams(4, 2.0, "upper", 3.0, 1.0, 10.0))
    assert up4["lq_q"].model == "log-power"
    assert up4["lq_q"].eps_exp == pytest.approx(-1.0)
    assert up4["lq_q"].log_exp == pytest.approx(-1.0)

    border = 2.0 + 8.0 / 15.0 * 15.0 / 12.0  # 2 + 4a/(N(2+a)) at N=3, a=2
    bo = predicted_exponents(ProblemParams(3, 2.0, "lower", border, 1.0, 10.0))
    assert "borderline" in bo


def test_sweep_rejects_bad_schedules():
    cfg = SweepConfig(3, 2.0, "lower", 2.2, 1.0, epsilons=[])
    with pytest.raises(RegimeError):
        sweep(cfg)
    cfg2 = SweepConfig(3, 2.0, "lower", 2.2, 1.0, epsilons=[10.0, 5.0])
    with pytest.raises(RegimeError):
        sweep(cfg2)


@pytest.fixture(scope="module")
def small_sweep():
    cfg = SweepConfig(5, 2.0, "upper", 3.0, 1.0,
                      epsilons=list(np.geomspace(1e2, 1e4, 6)),
                      grid=GridSpec(900, 100.0, 2.5),
                      solver=SolveOptions())
    return sweep(cfg)


def test_sweep_entries_and_determinism(small_sweep):
    sw = small_sweep
    assert len(sw.ok_entries) == 6
    for e in sw.ok_entries:
        assert e.nehari_residual < 1e-10
        assert e.pohozaev_residual < 1e-6
        assert e.energy > 0
    # re-running the identical configuration reproduces every number exactly
    cfg = SweepConfig(5, 2.0, "upper", 3.0, 1.0,
                      epsilons=list(np.geomspace(1e2, 1e4, 6)),
                      grid=GridSpec(900, 100.0, 2.5),
                      solver=SolveOptions())
    sw2 = sweep(cfg)
    for a, b in zip(sw.ok_entries, sw2.ok_entries):
        assert a.energy == b.energy
        assert a.l2_sq == b.l2_sq
        assert a.zeta_center == b.zeta_center


def test_mass_curve_identity(small_sweep):
    # E = I - eps/2 |u|_2^2 definitionally
    mc = mass_curve(small_sweep)
    for (a, lam, energy_e), entry in zip(mc, small_sweep.ok_entries):
        assert lam == -entry.epsilon
        assert a == pytest.approx(np.sqrt(entry.l2_sq), rel=1e-14)
        want = entry.energy - entry.epsilon / 2.0 * entry.l2_sq
        assert energy_e == pytest.approx(want, rel=1e-12)


def test_gap_positive_along_sweep(small_sweep):
    m_inf = small_sweep.constants.m_infty_upper
    for e in small_sweep.ok_entries:
        assert m_inf - e.energy > 0
