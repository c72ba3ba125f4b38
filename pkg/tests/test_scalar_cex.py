import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitlab import scalar_cex as sc
from whitlab.errors import DomainError
from whitlab.jets import Polynomial, jets_from_function
from whitlab.moduli import Linear, Zero
from whitlab.whitney import Wkom, check_whitney, minimal_whitney_modulus


def test_projection_examples():
    p, d = sc.project_wells_A(np.array([1.0, 1.0]))
    assert np.array_equal(p, [0.0, 0.0]) and d == pytest.approx(math.sqrt(2))
    p, d = sc.project_wells_A(np.array([-0.5, -0.5]))
    assert np.array_equal(p, [-0.5, -0.5]) and d == 0.0
    p, _ = sc.project_wells_A(np.array([-2.0, -2.0]))
    assert np.allclose(p, [-1 / math.sqrt(2)] * 2, atol=1e-15)
    assert np.allclose(sc.dykstra_projection(np.array([[-2.0, -2.0]])), p, atol=1e-6)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
def test_projection_characterization(x):
    # variational inequality <x - p, q - p> <= 0 for q in A, probed on vertices of A
    x = np.array(x)
    p, _ = sc.project_wells_A(x)
    assert np.all(p <= 0) and np.linalg.norm(p) <= 1 + 1e-12
    n = len(x)
    probes = [np.zeros(n)] + [-np.eye(n)[i] for i in range(n)] + [-np.ones(n) / math.sqrt(n)]
    for q in probes:
        assert (x - p) @ (q - p) <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_sets_audit(n):
    au = sc.wells_sets_audit(n, samples=10_000, seed=n)
    assert au.passed
    assert au.dist_e1 == 1.0 and au.dist_minus_e1 == 0.0
    assert au.min_dist_sampled_C >= 1 - 1e-9


def test_path_m4():
    p = sc.wells_path(4, 6)
    assert np.array_equal(p.y[0], [-0.5] * 4 + [0, 0])
    assert np.array_equal(p.y[4], [0.5] * 4 + [0, 0])
    assert np.array_equal(p.z[0], [0, -0.5, -0.5, -0.5, 0, 0])
    assert all(p.identities().values())
    with pytest.raises(DomainError):
        sc.wells_path(5, 4)


def test_symmetrize_linear_and_invariance():
    c = np.array([1.0, -2.0, 0.5, 3.0])
    f = lambda X: np.asarray(X) @ c
    g = sc.symmetrize(f, 4)
    X = np.random.default_rng(0).normal(size=(20, 4))
    assert np.allclose(g(X), c.mean() * X.sum(axis=1), atol=1e-12)
    sym = lambda X: np.sum(np.asarray(X) ** 2, axis=1)
    assert np.allclose(sc.symmetrize(sym, 4)(X), sym(X), atol=1e-12)
    with pytest.raises(DomainError):
        sc.symmetrize(f, 9)


def test_symmetrized_is_permutation_invariant():
    f = lambda X: np.sin(np.asarray(X) @ np.arange(1.0, 5.0)) + np.asarray(X)[:, 0] ** 3
    g = sc.symmetrize(f, 4)
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 4))
    base = g(X)
    for _ in range(20):
        s = rng.permutation(4)
        assert np.allclose(g(X[:, s]), base, atol=1e-12)


def test_sampled_symmetrization_within_three_se():
    f = lambda X: np.exp(np.asarray(X)[:, 0]) * np.asarray(X)[:, 1] ** 2 + np.asarray(X)[:, 0]
    x = np.array([[0.7, -1.3]])
    exact = sc.symmetrize(f, 2)(x)[0]
    mean, se = sc.symmetrize(f, 2, "sampled", seed=3, count=100_000).evaluate(x)
    assert abs(mean[0] - exact) <= 3 * se[0]


def test_admissibility():
    a = sc.wells_admissibility(1.0, Linear(0.1))
    assert a.m == 1 and a.n_threshold == pytest.approx(1.16)
    with pytest.raises(DomainError):
        sc.wells_admissibility(1.0, Zero())
    tiny = sc.wells_admissibility(1.0, Linear(1e9), max_m=1 << 10)
    assert not tiny.applicable and tiny.reason


def test_telescope_zero_candidate():
    inst = sc.WellsInstance(10, 1.0, Linear(1.0), 5)
    zero = lambda X: np.zeros(len(np.atleast_2d(X)))
    zgrad = lambda X: np.zeros_like(np.atleast_2d(X))
    rep = sc.wells_telescope_audit(zero, zgrad, inst)
    assert rep.total == 0.0 and rep.below_c and not rep.hypotheses_met
    with pytest.raises(DomainError):
        sc.wells_telescope_audit(zero, zgrad, inst, r=1.0)


@pytest.mark.parametrize("profile", ["quadratic", "smootherstep", "logistic"])
def test_telescope_ridge(profile):
    adm = sc.wells_admissibility(1.0, Linear(1.0))
    inst = sc.WellsInstance(85, 1.0, Linear(1.0), adm.m)
    g, grad = sc.ridge_candidate(85, adm.m, 1.0, profile)
    rep = sc.wells_telescope_audit(g, grad, inst)
    assert len(rep.rows) == adm.m
    # the chain spans at least |g(y_m) - g(y_0)|, whatever the budgets say
    assert rep.total >= abs(float(g(rep_y(adm.m, 85)[-1:])[0]) - float(g(rep_y(adm.m, 85)[:1])[0])) - 1e-12
    assert not rep.contradiction


def rep_y(m, n):
    return sc.wells_path(m, n).y


def test_symmetrized_axial_derivative_matches_zero_slots():
    # at z_i the zeroed slot i is interchangeable with the trailing zero slots, so a
    # symmetric candidate has the same directional derivative along all of them
    m, n = 4, 6
    g, grad = sc.ridge_candidate(n, 3, 1.0, "smootherstep")
    h = sc.symmetrize(g, n, grad=grad)
    G = h.grad(sc.wells_path(m, n).z)
    for i in range(m):
        for t in range(m, n):
            assert abs(G[i, i] - G[i, t]) <= 1e-9
    # across different i the values differ in general: z_i carries different entry multisets
    assert np.ptp(G[np.arange(m), np.arange(m)]) > 1e-3


def test_c0_field_examples():
    F = sc.build_c0_field(4, 6)
    assert len(F) == 25 and F.norm == "linf"
    i_half = next(i for i in range(len(F)) if np.array_equal(F.points[i], [0.5, 0, 0, 0, 0, 0]))
    i_quarter = next(i for i in range(len(F)) if np.array_equal(F.points[i], [0.25, 0, 0, 0, 0, 0]))
    assert F.values[i_half, 0] - F.values[0, 0] == 1 / 8
    assert F.values[i_half, 0] - F.values[i_quarter, 0] == 7 / 64
    w = minimal_whitney_modulus(F)
    assert all(v / t <= 16 for t, v in w.pairs)
    exp = sc.build_c0_field(3, 2, "exp")
    assert exp.values[1:, 0].max() == pytest.approx(math.exp(-2))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cone_field(k):
    d = 0.25
    F = sc.build_cone_field(d, k, (30, 30), seed=k)
    nA, nC = F.meta["n_A"], F.meta["n_C"]
    C = slice(1 + nA, 1 + nA + nC)
    assert np.all(F.values[C] == 0) and all(not np.any(D[C]) for D in F.derivs)
    e = np.zeros(F.n)
    e[0] = 1.0
    # e lies on the A-cone (t = 1, A-part 0): f = 1 and first-order jet (k + 1) phi
    Pe = jets_from_function(Polynomial.linear_power(e, k + 1), e[None], k)
    assert Pe.values[0, 0] == 1.0 and Pe.derivs[0][0, 0, 0] == k + 1
    # the proof's constant with M_poly measured on A-only pairs
    A = np.r_[0, 1:1 + nA]
    M_poly = minimal_whitney_modulus(F.subset(A))
    M_poly = max(M_poly.values) if hasattr(M_poly, "values") else 0.0
    lam = 2 * (math.factorial(k + 1) * (3 / d) ** (k + 1) + M_poly)
    assert check_whitney(F, Wkom(Linear(lam))).passed


def test_cone_separation():
    sep = sc.cone_separation_audit(0.25, 3, samples=1500, seed=0)
    assert sep.passed and min(sep.r_min, sep.s_min) >= 0.25 / 3 - 1e-9
