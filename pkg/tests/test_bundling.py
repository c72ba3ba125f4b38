import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitlab import bundling as bd
from whitlab.errors import DomainError
from whitlab.moduli import Linear, Zero


def _sin_spec(gammas=(0.5, 1.0, 2.0, 4.0), radius=3.0):
    return bd.BundleSpec.build(*bd.sin_family(gammas), Linear(1.0), [0.0], radius)


def test_sin_family_constants():
    spec = _sin_spec()
    assert spec.K == 0.0 and spec.M == pytest.approx(2.0)
    assert spec.bound() == pytest.approx(2.0 * 3 + 3.0 * 3)


def test_sin_family_bound_holds():
    spec = _sin_spec()
    X, Y = bd.probe_pairs(spec, 1000, seed=1)
    for x in np.vstack([X, Y]):
        ev = bd.bundle_eval(spec, x)
        assert ev.holds and ev.sup <= ev.bound


def test_sin_family_modulus_within_omega():
    audit = bd.bundle_modulus_audit(_sin_spec(), count=1000, seed=2)
    assert audit.passed and audit.worst_knot is None
    assert all(r["ok"] for r in audit.rows())


def test_bundled_modulus_is_sup_of_coordinates():
    spec = _sin_spec()
    audit = bd.bundle_modulus_audit(spec, count=500, seed=3)
    grid = np.linspace(0, 2 * spec.radius, 301)
    per = np.max([w(grid) for w in audit.per_label], axis=0)
    assert np.array_equal(audit.bundled(grid), per)


def test_identity_and_constant_families():
    ident = bd.BundleSpec.build(*bd.identity_family(), Zero(), [1.0], 2.0)
    assert ident.K == 1.0 and ident.M == 1.0 and ident.bound() == 3.0
    assert bd.bundle_modulus_audit(ident, count=200).passed
    const = bd.BundleSpec.build(*bd.constant_family([2.0, -5.0], n=2), Zero(), [0.0, 0.0], 1.0)
    assert const.K == 5.0 and const.bound() == 5.0
    assert isinstance(bd.bundle_modulus_audit(const, count=200).bundled, Zero)


def test_modulus_violation_is_reported():
    # sin(4x)/16 has a derivative modulus 4t, which Linear(1) cannot cover
    spec = bd.BundleSpec.build(*bd.sin_family([4.0]), Linear(0.5), [0.0], 1.0)
    audit = bd.bundle_modulus_audit(spec, count=500)
    assert not audit.passed and audit.worst_knot is not None


def test_domain_errors():
    spec = _sin_spec(radius=1.0)
    with pytest.raises(DomainError):
        bd.bundle_eval(spec, [2.0])
    with pytest.raises(DomainError):
        bd.bundle_eval(spec, [0.0, 0.0])
    with pytest.raises(DomainError):
        bd.sin_family([0.0])
    with pytest.raises(DomainError):
        bd.BundleSpec.build([], [], [], Zero(), [0.0], 1.0)
    with pytest.raises(DomainError):
        bd.BundleSpec.build(*bd.identity_family(), Zero(), [0.0], 0.0)


@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=6), st.floats(0.1, 5), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_bound_holds_anywhere_on_the_ball(gammas, radius, u):
    spec = bd.BundleSpec.build(*bd.sin_family(gammas), Linear(1.0), [0.0], radius)
    x = [radius * np.tanh(u)]
    assert bd.bundle_eval(spec, x).holds
