import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitlab import approx_bound as ab
from whitlab.errors import DomainError, InapplicableBound
from whitlab.moduli import Linear, Zero


def test_best_affine_1d_examples():
    a, b, val = ab.best_affine_1d(2.0, 0.5)
    assert (a, b) == (0.5, 0.0)
    assert val == pytest.approx(4 * 0.125 / 6, rel=1e-15)
    with pytest.raises(DomainError):
        ab.best_affine_1d(1.0, 0.0)


def test_lower_bound_values():
    inst = ab.AbsGapInstance(4, 0.5, 2.0)
    lb = ab.lower_bound_rhs(inst)
    assert lb.mean_square == pytest.approx(4 * 0.25 * 4 / 12, rel=1e-15)
    assert lb.sup_bound == pytest.approx(math.sqrt(3) / 6 * 2 * 0.5 * 2, rel=1e-15)
    # omega(eta) = c/2 is the edge of applicability and gives a zero bound
    edge = ab.lower_bound_rhs(inst, Linear(2.0))
    assert edge.mean_square == 0.0 and edge.sup_bound == 0.0


def test_inapplicable_bound():
    inst = ab.AbsGapInstance(2, 1.0, 1.0, Linear(0.6))
    with pytest.raises(InapplicableBound):
        ab.lower_bound_rhs(inst)


def test_instance_validation():
    for args in [(0, 1.0, 1.0), (1, 0.0, 1.0), (1, 1.0, 0.0)]:
        with pytest.raises(DomainError):
            ab.AbsGapInstance(*args)


def test_best_affine_is_tight():
    inst = ab.AbsGapInstance(3, 0.7, 1.5)
    cand = ab.best_affine_candidate(inst)
    gap = ab.l2_gap(cand, inst)
    assert gap.value == pytest.approx(ab.lower_bound_rhs(inst).mean_square, rel=1e-12)


def test_monte_carlo_agrees_with_gauss():
    inst = ab.AbsGapInstance(3, 0.5, 1.0)
    cand = ab.mollified_abs_candidate(1.0, 2.0, 3, [0.1, -0.2, 0.0])
    exact = ab.l2_gap(cand, inst)
    mc = ab.l2_gap(cand, inst, ab.MonteCarlo(seed=7, count=200_000))
    assert exact.method == "separable_gauss" and mc.method == "monte_carlo"
    assert abs(mc.value - exact.value) <= 4 * mc.error


def test_target_candidate_is_rejected():
    inst = ab.AbsGapInstance(2, 0.5, 1.0)
    rep = ab.dominance_audit(inst, ab.candidate_family(inst, "target", 1))
    assert rep.rejected == 1 and rep.audited == 0 and rep.passed
    assert rep.rows[0]["verdict"] == "rejected"


def test_measured_modulus_of_affine_is_zero():
    inst = ab.AbsGapInstance(2, 0.5, 1.0)
    w = ab.measured_axial_modulus(ab.affine_candidate([0.1, 0.2], [0.3, -0.4]), inst)
    assert isinstance(w, Zero) or w(2 * inst.eta) == 0.0


def test_mollified_remainder_within_certified():
    inst = ab.AbsGapInstance(2, 0.5, 1.0)
    cand = ab.mollified_abs_candidate(1.0, 1.0, 2)
    assert ab.remainder_audit(cand, inst, cand.certified, samples=300) <= 1e-6


def test_unknown_family():
    with pytest.raises(DomainError):
        ab.candidate_family(ab.AbsGapInstance(1, 1.0, 1.0), "cubic", 3)


@given(st.integers(1, 6), st.floats(0.05, 2.0), st.floats(0.1, 5.0), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_affine_gap_dominates_bound(n, eta, c, seed):
    inst = ab.AbsGapInstance(n, eta, c)
    rng = np.random.default_rng(seed)
    cand = ab.affine_candidate(rng.uniform(-c * eta, c * eta, n), rng.uniform(-2 * c, 2 * c, n))
    lb = ab.lower_bound_rhs(inst)
    assert ab.l2_gap(cand, inst).value >= lb.mean_square * (1 - 1e-12)
    assert ab.sup_gap(cand, inst) >= lb.sup_bound * (1 - 1e-12)
