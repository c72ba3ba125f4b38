import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitlab.errors import DomainError, SchemaError
from whitlab.forms import SymForm, form_apply, form_opnorm, partial_apply, vertex_opnorm
from whitlab.jets import JetField, Polynomial, fd_derivative, jets_from_function


def test_identity_form():
    I = SymForm.from_tensor(np.eye(3))
    e = np.eye(3)
    assert form_apply(I, e[0], e[1]) == 0.0
    assert form_apply(I, e[0], e[0]) == 1.0
    with pytest.raises(DomainError):
        form_apply(I, e[0], np.ones(2))


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
@settings(max_examples=30)
def test_order3_symmetry(seed, n):
    rng = np.random.default_rng(seed)
    M = SymForm.from_tensor(rng.normal(size=(n, n, n)))
    args = rng.normal(size=(3, n))
    vals = [form_apply(M, *args[list(p)]) for p in itertools.permutations(range(3))]
    assert np.allclose(vals, vals[0], rtol=1e-12, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 3))
@settings(max_examples=40)
def test_partial_apply_consistency(seed, order, l):
    l = min(l, order)
    rng = np.random.default_rng(seed)
    n = 3
    M = SymForm.from_tensor(rng.normal(size=(n,) * order))
    u = rng.normal(size=n)
    rest = rng.normal(size=(order - l, n))
    direct = form_apply(M, *([u] * l), *rest)
    via = form_apply(partial_apply(M, u, l), *rest)
    assert via == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_opnorm_examples():
    u = np.array([2.0, 0.0, 0.0])
    assert form_opnorm(SymForm.rank_one(u, 2)).value == pytest.approx(4.0, rel=1e-14)
    assert form_opnorm(SymForm.from_tensor(np.diag([1.0, -2.0]))).value == pytest.approx(2.0, rel=1e-14)


def test_order3_ascent_matches_grid():
    rng = np.random.default_rng(3)
    M = SymForm.from_tensor(rng.normal(size=(2, 2, 2)))
    asc = form_opnorm(M, "ascent", seed=0)
    grid = form_opnorm(M, "grid", resolution=1e-3)
    assert abs(asc.value - grid.value) <= 1e-6
    # ascent lower bound is attained, so it never falls short of the grid by more than grid error
    assert asc.lower >= grid.value - 1e-6


def test_vertex_norm_is_sup_norm_dual():
    # for a linear form the sup-norm operator norm is the l1 norm of coefficients
    t = np.array([1.0, -2.0, 0.5])
    assert vertex_opnorm(t) == pytest.approx(3.5)


def test_phi4_jet():
    P = Polynomial.linear_power([1.0, 0.0], 4)
    F = jets_from_function(P, np.array([[1.0, 0.0]]), 3)
    H = F.derivs[1][0, 0]
    assert H[0, 0] == 12.0
    assert np.count_nonzero(H) == 1
    assert form_apply(SymForm.from_tensor(H), np.eye(2)[0], np.eye(2)[0]) == 12.0


def test_constant_jets_vanish():
    P = Polynomial(2, [{(0, 0): 3.5}])
    F = jets_from_function(P, np.random.default_rng(0).normal(size=(6, 2)), 3)
    assert all(not np.any(D) for D in F.derivs)
    assert np.all(F.values == 3.5)


def test_finite_difference_sin():
    f = lambda x: np.sin(np.asarray(x)[..., 0])
    pts = np.random.default_rng(1).uniform(-2, 2, (8, 2))
    F = jets_from_function(f, pts, 3, mode="finite_difference", step=1e-4)
    x1 = pts[:, 0]
    want = [np.cos(x1), -np.sin(x1), -np.cos(x1)]
    for j, w in enumerate(want, start=1):
        got = F.derivs[j - 1][:, 0][(slice(None),) + (0,) * j]
        assert np.max(np.abs(got - w)) <= 1e-6
        # mixed entries vanish for a function of the first coordinate
        other = F.derivs[j - 1][:, 0].reshape(len(pts), -1)[:, 1:]
        assert np.max(np.abs(other)) <= 1e-6
    assert F.meta["fd_tolerance"] > 0
    with pytest.raises(DomainError):
        jets_from_function(f, pts, 1, mode="finite_difference", step=0.0)


def test_fd_derivative_reports_error():
    est, err = fd_derivative(lambda x: np.exp(x[..., 0]), np.array([0.3]), 2, 1e-3)
    assert abs(est.reshape(-1)[0] - math.exp(0.3)) <= 1e-6
    assert err >= 0


def test_linear_map_chain_rule():
    rng = np.random.default_rng(4)
    P = Polynomial.random(2, 3, rng)
    A = rng.normal(size=(2, 3))
    pts = rng.normal(size=(5, 3))
    F = jets_from_function(P, pts, 3, linear_map=A)
    # oracle: expand the composed polynomial numerically by finite differences
    G = jets_from_function(lambda X: P(np.asarray(X) @ A.T), pts, 3, mode="finite_difference", step=1e-3)
    assert np.allclose(F.values, G.values, atol=1e-12)
    for D, E in zip(F.derivs, G.derivs):
        assert np.allclose(D, E, atol=1e-4)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_jetfield_json_round_trip(seed):
    rng = np.random.default_rng(seed)
    P = Polynomial.random(3, 3, rng, d=2, scale=rng.uniform(0.1, 1e3))
    F = jets_from_function(P, rng.normal(size=(7, 3)) * 10.0 ** rng.integers(-5, 5), 3)
    text = json.dumps(F.to_dict())
    G = JetField.from_dict(json.loads(text))
    assert np.array_equal(G.points, F.points) and np.array_equal(G.values, F.values)
    for D, E in zip(F.derivs, G.derivs):
        assert np.array_equal(D, E)
    assert json.dumps(G.to_dict()) == text


def test_jetfield_validation():
    with pytest.raises(DomainError):
        JetField.zero_jets(1, [[0.0], [0.0]], [[1.0], [2.0]])
    with pytest.raises(DomainError):
        JetField.zero_jets(1, [[0.0], [np.nan]], [[1.0], [2.0]])
    bad = JetField.zero_jets(1, [[0.0], [1.0]], [[1.0], [2.0]]).to_dict()
    bad["jets"] = bad["jets"][:1]
    with pytest.raises(SchemaError):
        JetField.from_dict(bad)
