import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isle.gates import (
    GateKind,
    NonPhysicalOperatingPoint,
    SurrogateModel,
    build_characterization,
    characterize_gate,
    characterize_tau,
    logical_effort_delay,
    surrogate_stage_delay,
)
from isle.params import make_parameter_set

MODEL = SurrogateModel()
NOM = MODEL.nominal_point


def reference_delay(k, alpha, L, V, Vth, cg, cp, cx, h, muL=0.13e-6, muV=1.2):
    # independent transcription of the oracle formula
    rho = (L / muL - 1) + (muV / V - 1)
    return k * L * V / (V - Vth) ** alpha * (cp * (1 + cx * rho) + cg * (1 + cx * rho / 2) * h)


def test_spot_value_off_nominal():
    sd = 0.05 * 0.13e-6
    pt = NOM + np.array([sd, 0, 0])
    for name, kind in MODEL.kinds.items():
        want = reference_delay(5.6e-5, 1.3, 0.13e-6 + sd, 1.2, 0.3, kind.complexity, kind.parasitic, kind.coupling, 3.0)
        assert surrogate_stage_delay(MODEL, kind, pt, 3.0) == pytest.approx(want, rel=1e-13), name


def test_uncoupled_inverter_is_pure_logical_effort():
    m = MODEL.with_coupling(0.0)
    base = 5.6e-5 * 0.13e-6 * 1.2 / 0.9**1.3
    assert surrogate_stage_delay(m, m.kind("INV"), NOM, 2.5) == pytest.approx(base * (1.0 + 2.5), rel=1e-13)


def test_doubling_h_adds_cg_tau():
    m = MODEL.with_coupling(0.0)
    pt = NOM * np.array([1.04, 0.97, 1.02])
    k = m.kind("NOR2")
    diff = surrogate_stage_delay(m, k, pt, 2.0) - surrogate_stage_delay(m, k, pt, 1.0)
    assert diff == pytest.approx(k.complexity * characterize_tau(m, pt), rel=1e-12)


def test_nonphysical_point():
    with pytest.raises(NonPhysicalOperatingPoint):
        surrogate_stage_delay(MODEL, MODEL.kind("INV"), [0.13e-6, 0.3, 0.3], 1.0)
    with pytest.raises(ValueError):
        surrogate_stage_delay(MODEL, MODEL.kind("INV"), NOM, -1.0)


def test_tau_closed_form_and_positive():
    pt = NOM * np.array([0.95, 1.05, 0.9])
    L, V, Vth = pt
    assert characterize_tau(MODEL, pt) == pytest.approx(5.6e-5 * L * V / (V - Vth) ** 1.3, rel=1e-12)
    assert characterize_tau(MODEL, NOM) > 0


def test_fit_recovers_uncoupled_factors():
    m = MODEL.with_coupling(0.0)
    p, g = characterize_gate(m, m.kind("INV"), NOM)
    assert (p, g) == (pytest.approx(1.0, rel=1e-12), pytest.approx(1.0, rel=1e-12))
    p, g = characterize_gate(m, m.kind("NAND2"), NOM * 1.01)
    assert g == pytest.approx(4 / 3, rel=1e-12) and p == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        characterize_gate(m, m.kind("INV"), NOM, 2.0, 2.0)


def test_fit_tau_matches_analytic_slope():
    pt = NOM * np.array([1.1, 0.95, 1.05])
    k = MODEL.kind("INV")
    _, g = characterize_gate(MODEL, k, pt)
    slope = (surrogate_stage_delay(MODEL, k, pt, 4.0) - surrogate_stage_delay(MODEL, k, pt, 1.0)) / 3
    assert g * characterize_tau(MODEL, pt) == pytest.approx(slope, rel=1e-12)


def test_coupling_makes_g_vary():
    # at mu + 3 sigma_L (ratio 0.15) rho = 0.15, so g = c_g (1 + c_x * 0.075)
    for cx in (0.05, 1.0):
        m = MODEL.with_coupling(cx)
        k = m.kind("NAND2")
        _, g0 = characterize_gate(m, k, NOM)
        _, g3 = characterize_gate(m, k, NOM * np.array([1.15, 1, 1]))
        assert g0 == pytest.approx(4 / 3, rel=1e-12)
        assert g3 == pytest.approx(4 / 3 * (1 + cx * 0.075), rel=1e-12)


def test_d1_freezes_and_d2_tracks():
    ps = make_parameter_set("ThrPar")
    x = ps.means + np.array([[0, 0, 0], [2, -1, 1], [-3, 2, 0.5]]) * ps.sigmas
    d1 = build_characterization(MODEL, "NOR2", "d1", ps)
    d2 = build_characterization(MODEL, "NOR2", "d2", ps, table_step=None)
    assert np.all(d1.g_fn(x) == d1.g_fn(ps.means))
    assert np.ptp(d2.g_fn(x)) > 0
    for mode in ("d1", "d2"):
        assert build_characterization(MODEL, "INV", mode, ps).g_fn(ps.means) == pytest.approx(1.0, rel=1e-12)


def test_d2_collapses_to_d1_without_coupling():
    m = MODEL.with_coupling(0.0)
    ps = make_parameter_set("TwoPar")
    x = ps.means + np.array([[1.5, -2.0], [-0.3, 0.8]]) * ps.sigmas
    for kind in m.kinds:
        a = build_characterization(m, kind, "d1", ps).pg(x)
        b = build_characterization(m, kind, "d2", ps).pg(x)
        np.testing.assert_allclose(a, b, rtol=1e-12)


def test_grid_node_snapping():
    ps = make_parameter_set("OnePar")
    ch = build_characterization(MODEL, "NAND2", "d2", ps, table_step=0.5)
    x = ps.means + np.array([[0.26], [0.74], [1.0]]) * ps.sigmas
    np.testing.assert_allclose((ch.grid_node(x) - ps.means) / ps.sigmas, [[0.5], [0.5], [1.0]])
    exact = build_characterization(MODEL, "NAND2", "d2", ps, table_step=None)
    # on a grid node the table and the exact fit agree
    assert ch.g_fn(x[2:]) == pytest.approx(exact.g_fn(x[2:]), rel=1e-12)


def test_unknown_kind_and_validation():
    ps = make_parameter_set("OnePar")
    with pytest.raises(KeyError):
        build_characterization(MODEL, "XOR3", "d1", ps)
    with pytest.raises(ValueError):
        build_characterization(MODEL, "INV", "d3", ps)
    with pytest.raises(ValueError):
        GateKind("INV", 1.5, 1.0)
    with pytest.raises(ValueError):
        GateKind("NAND2", 4 / 3, -1.0)
    with pytest.raises(ValueError):
        SurrogateModel(alpha=2.5)


def test_logical_effort_arithmetic():
    assert logical_effort_delay(1.0, 1.0, 1.0, 1.0) + logical_effort_delay(1.0, 2.0, 4 / 3, 2.0) == pytest.approx(
        2 + 14 / 3
    )


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=3, max_size=3), st.sampled_from(["d1", "d2"]),
       st.sampled_from(["INV", "NAND2", "NOR2"]))
def test_characterization_signs(z, mode, kind):
    ps = make_parameter_set("ThrPar")
    x = ps.means + np.array(z) * ps.sigmas
    ch = build_characterization(MODEL, kind, mode, ps)
    p, g = ch.pg(x)
    assert ch.tau_fn(x) > 0 and g > 0 and p >= 0
    assert math.isfinite(float(p))
