import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from cavmem import memory, reference
from cavmem.memory import DecayParams, MemoryParams


def test_cavity_factor():
    assert memory.cavity_factor(43.4) == pytest.approx(27.629, abs=5e-4)
    assert memory.cavity_factor(math.pi / 2) == pytest.approx(1.0)
    assert memory.cavity_factor(44.3) == pytest.approx(28.202, abs=5e-4)
    with pytest.raises(ValueError):
        memory.cavity_factor(0.0)


def test_free_space():
    assert memory.free_space_efficiency(0) == 0
    assert memory.free_space_efficiency(1) == 0.5
    assert memory.free_space_efficiency(0.121) == pytest.approx(0.108, abs=5e-4)
    with pytest.raises(ValueError):
        memory.free_space_efficiency(-0.1)


def test_single_mode():
    assert memory.single_mode_efficiency(MemoryParams(43.4, 0.0)) == 0
    assert memory.single_mode_efficiency(MemoryParams(43.4, 0.1212)) == pytest.approx(0.770, abs=5e-4)
    assert memory.single_mode_efficiency(MemoryParams(43.4, 1e6)) > 0.99999


def test_double_mode():
    assert memory.double_mode_efficiency(MemoryParams(43.4, 0.0)) == 0
    m = MemoryParams(43.4, 0.1212)
    x = 2 * 43.4 / math.pi * 0.1212
    assert memory.double_mode_efficiency(m) == pytest.approx(x / (x + 0.1212 + 2))
    assert memory.double_mode_efficiency(m) == pytest.approx(0.612, abs=5e-4)
    assert memory.double_mode_efficiency(MemoryParams(1e6, 0.1212)) > 0.9999


def test_double_from_single_examples():
    assert memory.double_from_single(0.77, 43.4) == pytest.approx(0.612, abs=5e-4)
    r = 1e-4
    assert 0.4999 <= memory.double_from_single(r, 43.4) / r <= 0.5001
    assert memory.double_from_single(1 - 1e-9, 43.4) == pytest.approx(1 / (1 + math.pi / 86.8), abs=1e-8)
    assert memory.double_from_single(1 - 1e-9, 43.4) == pytest.approx(0.9651, abs=5e-5)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            memory.double_from_single(bad, 43.4)


def test_memory_params_validation():
    with pytest.raises(ValueError):
        MemoryParams(0.0, 1.0)
    with pytest.raises(ValueError):
        MemoryParams(10.0, -1.0)


@given(f=st.floats(0.01, 1e4), c=st.floats(1e-6, 1e4))
def test_round_trip_and_ordering(f, c):
    m = MemoryParams(f, c)
    r_sg = memory.single_mode_efficiency(m)
    r_db = memory.double_mode_efficiency(m)
    assert 0 <= r_db < r_sg < 1 or r_sg == 1.0
    if 0 < r_sg < 1:
        assert memory.double_from_single(r_sg, f) == pytest.approx(r_db, rel=1e-9, abs=1e-12)


@given(f=st.floats(0.1, 1e3), c=st.floats(1e-4, 1e2), k=st.floats(1.01, 3.0))
def test_monotone_in_c_and_finesse(f, c, k):
    base = MemoryParams(f, c)
    for other in (MemoryParams(f, c * k), MemoryParams(f * k, c)):
        assert memory.single_mode_efficiency(other) > memory.single_mode_efficiency(base)
        assert memory.double_mode_efficiency(other) > memory.double_mode_efficiency(base)


def test_cooperativity_inversion():
    c = memory.cooperativity_from_single(0.77, 43.4)
    assert c == pytest.approx(0.1212, abs=5e-4)
    assert memory.single_mode_efficiency(MemoryParams(43.4, c)) == pytest.approx(0.77)


def test_efficiency_at_examples():
    dual = reference.DUAL_MODE_DECAY
    assert memory.efficiency_at(0.0, dual) == pytest.approx(0.58)
    assert memory.efficiency_at(100.0, dual) == pytest.approx(0.41 * math.exp(-100 / 703), abs=1e-12)
    assert memory.efficiency_at(100.0, dual) == pytest.approx(0.356, abs=5e-4)
    assert memory.efficiency_at(0.0, reference.SINGLE_MODE_DECAY) == pytest.approx(0.77)
    with pytest.raises(ValueError):
        memory.efficiency_at(-1.0, dual)


def _brentq_lifetime(d):
    f = lambda t: d.A1 * math.exp(-t / d.tau1) + d.A2 * math.exp(-t / d.tau2) - d.initial / math.e  # noqa: E731
    return brentq(f, 1e-9, 10 * max(d.tau1, d.tau2), xtol=1e-12)


# frozen from the brentq oracle above
LIFETIME_DUAL = 459.14972647899555
LIFETIME_SINGLE = 409.85008697683736


def test_lifetime_against_root_finder():
    assert _brentq_lifetime(reference.DUAL_MODE_DECAY) == pytest.approx(LIFETIME_DUAL, rel=1e-9)
    assert memory.one_over_e_lifetime(reference.DUAL_MODE_DECAY) == pytest.approx(LIFETIME_DUAL, rel=1e-8)
    assert memory.one_over_e_lifetime(reference.SINGLE_MODE_DECAY) == pytest.approx(LIFETIME_SINGLE, rel=1e-8)
    assert abs(memory.one_over_e_lifetime(reference.DUAL_MODE_DECAY) - 459) <= 1
    assert memory.one_over_e_lifetime(DecayParams(0.0, 1.0, 1.0, 100.0)) == pytest.approx(100.0, rel=1e-9)


@given(
    a1=st.floats(0.0, 0.5),
    a2=st.floats(0.01, 0.5),
    t1=st.floats(1e-3, 1e3),
    t2=st.floats(1e-3, 1e4),
)
def test_lifetime_residual_and_monotone(a1, a2, t1, t2):
    d = DecayParams(a1, a2, t1, t2)
    ts = memory.one_over_e_lifetime(d)
    assert abs(memory.efficiency_at(ts, d) - d.initial / math.e) <= 1e-9 * d.initial
    grid = np.linspace(0, 3 * max(t1, t2), 50)
    assert np.all(np.diff(memory.efficiency_at(grid, d)) <= 0)


def test_decay_params_validation():
    with pytest.raises(ValueError):
        DecayParams(-0.1, 0.5, 1.0, 2.0)
    with pytest.raises(ValueError):
        DecayParams(0.1, 0.5, 0.0, 2.0)
    with pytest.raises(ValueError):
        DecayParams(0.6, 0.6, 1.0, 2.0)
    # a large reported uncertainty widens the allowance
    cov = np.diag([0.01, 0.01, 1.0, 1.0])
    DecayParams(0.6, 0.6, 1.0, 2.0, covariance=cov)
