import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npspectra import geometry
from npspectra.bounds import (BoundsError, essbound_check, essbound_condition,
                              essbound_failure_reason, krushkal_value, kuhnau_lower_bound,
                              mass_above, validate_domain)
from npspectra.layerpot import SCHEMA, SpectrumResult

PI = math.pi


def _result(values, kind, const=None):
    ev = np.sort(np.asarray(values, dtype=float))[::-1]
    mz = ev if const is None else ev[np.abs(ev - const) > 0]
    return SpectrumResult(ev, float(np.abs(mz).max()), 0.0, "nystrom", len(ev),
                          constant_eigenvalue=const, meta={"domain": kind})


def test_kuhnau_values():
    assert kuhnau_lower_bound([PI / 2] * 4) == pytest.approx(0.5)
    assert kuhnau_lower_bound([PI / 4, 3 * PI / 2]) == pytest.approx(0.75)
    assert kuhnau_lower_bound([]) == 0.0
    with pytest.raises(BoundsError):
        kuhnau_lower_bound([0.0])


def test_krushkal_value():
    assert krushkal_value([PI / 3, PI / 2]) == pytest.approx(2 / 3)
    with pytest.raises(BoundsError):
        krushkal_value([PI, PI / 2])


def test_essbound_lens():
    th = [PI / 4, PI / 5]
    # (pi - pi/4) + pi + pi/5 < 2 pi
    eb = essbound_check(th)
    assert eb is not None and eb.upper == pytest.approx(1 - 1 / 5)
    assert essbound_condition(th, eb.permutation) <= 2 * PI


def test_essbound_failures():
    assert essbound_check([PI / 2] * 4) is None
    assert essbound_failure_reason([PI / 2] * 4) == "angle condition fails for every cyclic labelling"
    assert essbound_failure_reason([PI / 2, 3 * PI / 2]) == "reflex or flat vertex"
    assert essbound_failure_reason([PI / 4, PI / 5]) is None


@settings(deadline=None, max_examples=60)
@given(st.lists(st.floats(0.01, PI - 0.01), min_size=1, max_size=6))
def test_essbound_consistent_with_condition(th):
    eb = essbound_check(th)
    ok = any(essbound_condition(th, k) <= 2 * PI + 1e-12 for k in range(len(th)))
    assert (eb is not None) == ok
    if eb is not None:
        assert eb.upper == pytest.approx(max(1 - t / PI for t in th))
        assert eb.upper <= kuhnau_lower_bound(th) + 1e-15


def test_mass_above_is_fraction():
    r = _result([1.0, 0.9, 0.1, -0.1, -0.9], "lens", const=1.0)
    assert mass_above(r, 0.5) == pytest.approx(0.5)


def test_validate_square():
    d = geometry.square()
    rep = validate_domain(d, _result([1.0, 0.497, -0.497, 0.1], "square", const=1.0))
    assert rep.verdicts["kuhnau"]["pass"]
    assert not rep.condition_satisfied and "essbound-consistency" not in rep.verdicts
    doc = json.loads(rep.to_json(seed=7))
    assert doc["schema"] == SCHEMA and doc["seed"] == 7 and doc["kuhnau_lower"] == pytest.approx(0.5)


def test_validate_fails_low_radius():
    d = geometry.square()
    rep = validate_domain(d, _result([1.0, 0.3, -0.3], "square", const=1.0))
    assert not rep.verdicts["kuhnau"]["pass"]


def test_validate_lens_essbound_consistency():
    d = geometry.lens(PI / 4, PI / 5)
    good = validate_domain(d, _result([1.0, 0.8, -0.8] + [0.1] * 50, "lens", const=1.0))
    assert good.verdicts["essbound-consistency"]["pass"]
    bad = validate_domain(d, _result([1.0] + [0.95] * 10 + [0.1] * 10, "lens", const=1.0))
    assert not bad.verdicts["essbound-consistency"]["pass"]


def test_validate_domain_mismatch():
    with pytest.raises(BoundsError, match="computed for"):
        validate_domain(geometry.square(), _result([0.1], "ellipse"))
