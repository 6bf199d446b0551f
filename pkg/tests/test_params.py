import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isle.params import (
    ParameterDef,
    ParameterSet,
    RandomSource,
    canonical_tag,
    density,
    draw_samples,
    make_parameter_set,
    sample_parameter_vectors,
    tail_draws,
)


def test_sets_have_the_declared_members():
    assert make_parameter_set("OnePar").names == ("L_eff",)
    assert make_parameter_set("TwoPar").names == ("L_eff", "V_dd")
    assert make_parameter_set("ThrPar").names == ("L_eff", "V_dd", "V_th")
    assert canonical_tag("three") == "ThrPar"
    with pytest.raises(ValueError):
        canonical_tag("FourPar")


def test_sigma_from_ratio():
    # 15% 3-sigma ratio on L_eff gives sigma = 0.05 mu; 10% on V_dd gives mu/30
    ps = make_parameter_set("TwoPar")
    assert ps.defs[0].sigma == pytest.approx(0.05 * 0.13e-6, rel=1e-12)
    assert ps.defs[1].sigma == pytest.approx(1.2 / 30, rel=1e-12)
    for d in make_parameter_set("ThrPar").defs:
        assert d.ratio == pytest.approx({"L_eff": 0.15, "V_dd": 0.10, "V_th": 0.10}[d.name], rel=1e-12)


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.1])
def test_bad_ratio_rejected(ratio):
    with pytest.raises(ValueError):
        make_parameter_set("OnePar", ratios={"L_eff": ratio})


def test_nonpositive_nominal_rejected():
    with pytest.raises(ValueError):
        make_parameter_set("TwoPar", nominal_values={"V_dd": 0.0})


def test_degenerate_sigma_draws_the_mean():
    ps = ParameterSet((ParameterDef("L_eff", 0.13e-6, 0.0),))
    x = draw_samples(ps, 1, RandomSource(1))
    assert x.shape == (1, 1) and x[0, 0] == 0.13e-6


def test_same_stream_same_draws_and_streams_differ():
    ps = make_parameter_set("ThrPar")
    a = draw_samples(ps, 100, RandomSource(5, (1, 2)))
    b = draw_samples(ps, 100, RandomSource(5, (1, 2)))
    c = draw_samples(ps, 100, RandomSource(5, (1, 3)))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    # a longer request extends the shorter one
    assert np.array_equal(draw_samples(ps, 150, RandomSource(5, (1, 2)))[:100], a)
    assert RandomSource(5, 1).stream == (1,)
    assert RandomSource(5, (1,)).substream(4).stream == (1, 4)


def test_sample_means_and_independence():
    ps = make_parameter_set("ThrPar")
    n = 100_000
    x = draw_samples(ps, n, RandomSource(11))
    assert np.all(np.abs(x.mean(axis=0) - ps.means) < 4 * ps.sigmas / math.sqrt(n))
    corr = np.corrcoef(x, rowvar=False)
    off = corr[~np.eye(3, dtype=bool)]
    # standard error of a null correlation is ~1/sqrt(n)
    assert np.all(np.abs(off) < 5 / math.sqrt(n))


def test_density_peak_and_one_sigma():
    ps = make_parameter_set("OnePar")
    sd = ps.sigmas[0]
    assert density(ps, ps.means) == pytest.approx(1 / (sd * math.sqrt(2 * math.pi)), rel=1e-12)
    assert density(ps, ps.means + sd) == pytest.approx(math.exp(-0.5) / (sd * math.sqrt(2 * math.pi)), rel=1e-12)
    with pytest.raises(ValueError):
        density(ps, [1.0, 2.0])


def test_density_factorizes():
    two = make_parameter_set("TwoPar")
    one = make_parameter_set("OnePar")
    vdd = ParameterSet((two.defs[1],))
    x = two.means + np.array([0.7, -1.3]) * two.sigmas
    assert density(two, x) == pytest.approx(density(one, x[:1]) * density(vdd, x[1:]), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-8, 8), min_size=3, max_size=3))
def test_density_positive_everywhere(z):
    ps = make_parameter_set("ThrPar")
    assert density(ps, ps.means + np.array(z) * ps.sigmas) > 0


def test_tail_draws_and_vector_assembly():
    ps = make_parameter_set("TwoPar")
    x = sample_parameter_vectors(ps, [{"L_eff": 0.13e-6 + 7 * ps.sigmas[0]}, {}])
    assert np.array_equal(x[1], ps.means)
    assert tail_draws(ps, x) == 1
    with pytest.raises(KeyError):
        sample_parameter_vectors(ps, [{"V_th": 0.3}])
