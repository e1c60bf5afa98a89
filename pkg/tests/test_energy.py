import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from desne.energy import (EnergyCoefficients, TransferScenario, compare, preset, report_csv,
                          scenario_energy)

BITS = 50000 * 3072 * 8


def test_scenario_examples():
    assert scenario_energy(TransferScenario(0, 0, 0, 0.5, 1000)) == 0.0
    assert scenario_energy(TransferScenario(1, 0, 0, 0.5, 8 * 10**9)) == pytest.approx(0.08)
    nms = scenario_energy(preset("nms", 0.1, BITS))
    one_pcb_pass = BITS * 10e-12
    assert nms / one_pcb_pass == pytest.approx(0.15)


@pytest.mark.parametrize("method,kr,lo,hi", [
    ("dq", 0.1, 7.29, 7.34),
    ("nessa", 0.2, 44.71, 44.95),
])
def test_preset_ratios_inside_reference_ranges(method, kr, lo, hi):
    r = compare([method], [kr], BITS)[0]["ratio"]
    assert lo <= r <= hi


def test_nessa_at_03_within_one_percent():
    r = compare(["nessa"], [0.3], BITS)[0]["ratio"]
    assert r == pytest.approx(11.3 / 0.35)
    assert abs(r / 32.33 - 1) <= 0.01


def test_compare_examples():
    rows = compare(["dq", "nessa"], [0.1, 0.2, 0.3], BITS)
    assert len(rows) == 6
    assert compare(["nms"], [0.2], BITS)[0]["ratio"] == 1.0
    a = [r["ratio"] for r in compare(["dq", "nessa"], [0.1, 0.3], BITS)]
    b = [r["ratio"] for r in compare(["dq", "nessa"], [0.1, 0.3], 2 * BITS)]
    assert a == pytest.approx(b, rel=1e-15)
    with pytest.raises(ValueError):
        compare([], [0.1], BITS)
    assert report_csv(rows).count("\n") == 7


def test_override():
    r = compare(["nessa"], [0.1], BITS, overrides={"nessa": 200})[0]["ratio"]
    assert r == pytest.approx(200.1 / 0.15)
    with pytest.raises(ValueError):
        preset("ga", 0.1, BITS)


def test_coefficient_validation():
    with pytest.raises(ValueError):
        EnergyCoefficients(0.0, 0.5)
    with pytest.raises(ValueError):
        EnergyCoefficients(1.0, 2.0)
    with pytest.raises(ValueError):
        TransferScenario(-1, 0, 0, 0.1, 10)


@given(st.floats(0.01, 1.0), st.floats(0.1, 100), st.floats(1.5, 40), st.integers(1, 10**12))
def test_ratio_invariant_to_scale(kr, scale, ratio_pcb_nm, bits):
    c1 = EnergyCoefficients(ratio_pcb_nm, 1.0)
    c2 = EnergyCoefficients(ratio_pcb_nm * scale, scale)
    a = compare(["dq", "nessa"], [kr], bits, c1)
    b = compare(["dq", "nessa"], [kr], 7 * bits, c2)
    for x, y in zip(a, b):
        assert math.isclose(x["ratio"], y["ratio"], rel_tol=1e-12)


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6, unique=True))
def test_advantage_shrinks_with_keep_ratio(krs):
    krs = sorted(krs)
    for m in ("dq", "nessa"):
        r = [row["ratio"] for row in compare([m], krs, BITS)]
        assert all(a > b for a, b in zip(r, r[1:]))


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 50), st.floats(0, 50),
       st.floats(0.01, 1), st.integers(1, 10**10))
def test_linear_in_pass_counts(a, b, k1, k2, kr, bits):
    e = lambda p, n, k: scenario_energy(TransferScenario(p, n, k, kr, bits))  # noqa: E731
    assert math.isclose(e(a + b, k1 + k2, 0) + e(0, 0, 0), e(a, k1, 0) + e(b, k2, 0),
                        rel_tol=1e-12, abs_tol=1e-30)
    assert math.isclose(e(0, 0, k1 + k2), e(0, 0, k1) + e(0, 0, k2), rel_tol=1e-12, abs_tol=1e-30)
