import itertools
import warnings

import numpy as np
import pytest

from cavmem import entangle, qstate
from cavmem.entangle import NoiseParams, PlateauExtrapolationWarning, VisibilityPair

MEASURED = VisibilityPair(0.935, 0.879)


def psi_plus():
    return qstate.make_entangled_pair(0.0)


def test_visibilities_examples():
    v = entangle.visibilities(psi_plus())
    assert (v.v_hv, v.v_da, v.v_rl) == pytest.approx((1, 1, 1))
    v = entangle.visibilities(qstate.maximally_mixed())
    assert (v.v_hv, v.v_da) == pytest.approx((0, 0), abs=1e-15)
    v = entangle.visibilities(qstate.apply_noise(psi_plus(), NoiseParams(0.065, 0.940)))
    assert v.v_hv == pytest.approx(0.935, abs=1e-12)
    assert v.v_da == pytest.approx(0.879, abs=1e-3)


def test_visibility_equals_abs_correlation():
    rho = qstate.random_density_matrix(np.random.default_rng(3))
    v = entangle.visibilities(rho)
    assert v.v_hv == pytest.approx(abs(qstate.correlation(rho, qstate.Z_AXIS, qstate.Z_AXIS)))
    assert v.v_da == pytest.approx(abs(qstate.correlation(rho, qstate.X_AXIS, qstate.X_AXIS)))
    assert v.v_rl == pytest.approx(abs(qstate.correlation(rho, qstate.Y_AXIS, qstate.Y_AXIS)))


@pytest.mark.parametrize("p,d", list(itertools.product(np.linspace(0, 1, 11), np.linspace(0, 1, 11))))
def test_noise_family_visibility_identity(p, d):
    v = entangle.visibilities(qstate.apply_noise(psi_plus(), NoiseParams(p, d)))
    assert v.v_hv == pytest.approx(1 - p, abs=1e-12)
    assert v.v_da == pytest.approx((1 - p) * d, abs=1e-12)
    assert v.v_rl == pytest.approx((1 - p) * d, abs=1e-12)
    if p < 1:
        back = entangle.noise_from_visibilities(v.pair)
        assert back.p == pytest.approx(p, abs=1e-12)
        assert back.d == pytest.approx(d, abs=1e-12)


def test_noise_from_visibilities_examples():
    n = entangle.noise_from_visibilities(VisibilityPair(1, 1))
    assert (n.p, n.d, n.phi0) == (0, 1, 0)
    n = entangle.noise_from_visibilities(MEASURED)
    assert n.p == pytest.approx(0.065)
    assert n.d == pytest.approx(0.940, abs=5e-4)
    with pytest.raises(ValueError):
        entangle.noise_from_visibilities(VisibilityPair(0.5, 0.6))


def test_fidelity_estimate():
    assert entangle.fidelity_estimate(MEASURED) == pytest.approx(0.923, abs=5e-4)
    assert entangle.fidelity_estimate(VisibilityPair(1, 1)) == 1
    assert entangle.fidelity_estimate(VisibilityPair(0, 0)) == 0.25


def test_fidelity_exact():
    assert entangle.fidelity_exact(psi_plus(), 0.0) == pytest.approx(1.0)
    for phase in (0.0, 1.0, 2.5):
        assert entangle.fidelity_exact(qstate.maximally_mixed(), phase) == pytest.approx(0.25)
    p, d = 0.065, 0.940
    rho = qstate.apply_noise(psi_plus(), NoiseParams(p, d))
    # hand overlap: (1-p)(1+d)/2 + p/4
    closed = (1 - p) * (1 + d) / 2 + p / 4
    assert closed == pytest.approx(0.92320, abs=1e-9)
    assert entangle.fidelity_exact(rho, 0.0) == pytest.approx(closed, abs=1e-12)
    assert abs(entangle.fidelity_exact(rho) - entangle.fidelity_estimate(entangle.visibilities(rho).pair)) <= 0.002


def test_fidelity_exact_matches_estimate_when_rl_equals_da():
    rho = entangle.state_at(0.0, MEASURED)
    assert entangle.fidelity_exact(rho) == pytest.approx(entangle.fidelity_estimate(MEASURED), abs=1e-12)


@pytest.mark.parametrize("p,d", list(itertools.product(np.linspace(0, 1, 6), np.linspace(0, 1, 6))))
def test_fidelity_grid(p, d):
    rho = qstate.apply_noise(psi_plus(), NoiseParams(p, d))
    est = entangle.fidelity_estimate(entangle.visibilities(rho).pair)
    assert 0.25 <= est <= 1
    assert entangle.fidelity_exact(rho) >= est - 0.01


def test_state_at_plateau():
    v = entangle.visibilities(entangle.state_at(0.005, MEASURED))
    assert (v.v_hv, v.v_da) == pytest.approx((0.935, 0.879), abs=1e-12)
    np.testing.assert_allclose(entangle.state_at(900.0, MEASURED), entangle.state_at(0.0, MEASURED))
    np.testing.assert_allclose(entangle.state_at(0.0, VisibilityPair(1, 1)), psi_plus(), atol=1e-15)
    qstate.check_density_matrix(entangle.state_at(0.0, MEASURED))


def test_state_past_plateau():
    with pytest.warns(PlateauExtrapolationWarning):
        rho = entangle.state_at(1500.0, MEASURED)
    np.testing.assert_allclose(rho, entangle.state_at(0.0, MEASURED))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rho = entangle.state_at(1500.0, MEASURED, snr_slope=1e-3)
    assert entangle.visibilities(rho).v_hv == pytest.approx(0.5 * 0.935)
    with pytest.raises(ValueError):
        entangle.state_at(-1.0, MEASURED)
