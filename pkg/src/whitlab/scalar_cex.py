"""Scalar counterexample geometry: the orthant set, its chain of path points,
symmetrisation, and the c0 and cone jet fields."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DomainError
from .jets import JetField
from .moduli import Modulus, Zero, classify_modulus

__all__ = [
    "project_wells_A",
    "dykstra_projection",
    "wells_sets_audit",
    "WellsPath",
    "wells_path",
    "symmetrize",
    "Symmetrized",
    "WellsInstance",
    "wells_admissibility",
    "ridge_candidate",
    "wells_telescope_audit",
    "build_c0_field",
    "build_cone_field",
    "cone_separation_audit",
]


# -- the orthant set A = {x in B : x_j <= 0} ------------------------------------

def project_wells_A(x) -> tuple[np.ndarray, np.ndarray]:
    """Projection onto the negative orthant intersected with the unit ball.

    Works row-wise on ``(N, n)`` input.  Returns ``(projection, distance)``.
    """
    x = np.asarray(x, dtype=float)
    p = np.minimum(x, 0.0)
    r = np.linalg.norm(p, axis=-1, keepdims=True)
    p = np.where(r > 1.0, p / np.where(r > 0, r, 1.0), p)
    return p, np.linalg.norm(x - p, axis=-1)


def dykstra_projection(x, iters: int = 4000) -> np.ndarray:
    """Independent projection oracle: Dykstra's alternating scheme over orthant and ball."""
    x = np.asarray(x, dtype=float)
    u = x.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(iters):
        v = np.minimum(u + p, 0.0)
        p = u + p - v
        w = v + q
        r = np.linalg.norm(w, axis=-1, keepdims=True)
        u_new = np.where(r > 1.0, w / np.where(r > 0, r, 1.0), w)
        q = w - u_new
        if np.max(np.abs(u_new - u)) < 1e-15:
            u = u_new
            break
        u = u_new
    return u


@dataclass(frozen=True)
class SetsAudit:
    n: int
    dist_e1: float
    dist_minus_e1: float
    min_dist_sampled_C: float
    membership_mismatches: int
    samples: int
    passed: bool


def wells_sets_audit(n: int, samples: int = 10_000, seed: int = 0) -> SetsAudit:
    """Check that C (sphere points at distance >= 1 from A) is the closed positive orthant
    part of the sphere, contains e1, and sits at distance exactly 1 from A."""
    if n < 1:
        raise DomainError("dimension must be at least 1")
    rng = np.random.default_rng(seed)
    e1 = np.zeros(n)
    e1[0] = 1.0
    d_e1 = float(project_wells_A(e1)[1])
    d_me1 = float(project_wells_A(-e1)[1])
    g = np.abs(rng.standard_normal((samples, n)))
    Cs = g / np.linalg.norm(g, axis=1, keepdims=True)
    dC = project_wells_A(Cs)[1]
    # membership on the whole sphere: dist >= 1 exactly for nonnegative points
    s = rng.standard_normal((samples, n))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    ds = project_wells_A(s)[1]
    mism = int(np.sum((ds >= 1 - 1e-12) != np.all(s >= 0, axis=1)))
    ok = d_e1 == 1.0 and d_me1 == 0.0 and float(dC.min()) >= 1 - 1e-9 and mism == 0
    return SetsAudit(n, d_e1, d_me1, float(dC.min()), mism, samples, ok)


# -- the chain y_0, ..., y_m ------------------------------------------------------

@dataclass(frozen=True)
class WellsPath:
    """Path points stored as exact sign patterns scaled by ``a = 1/sqrt(m)``.

    ``y_signs[i]`` has ``i`` leading +1, then ``m - i`` entries -1, zeros after;
    ``z_signs[i - 1]`` is ``y_signs[i]`` with slot ``i`` zeroed.
    """

    m: int
    n: int
    a: float
    y_signs: np.ndarray
    z_signs: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.a * self.y_signs

    @property
    def z(self) -> np.ndarray:
        return self.a * self.z_signs

    def identities(self) -> dict[str, bool]:
        """Every path identity, checked exactly.

        Norms are checked in rational arithmetic with ``a**2 = 1/m`` since a
        float square root of ``m`` cannot reproduce them bit for bit.
        """
        a2 = Fraction(1, self.m)
        y, z = self.y, self.z
        e = np.eye(self.n)
        y_norm = all(int(np.sum(s * s)) * a2 == 1 for s in self.y_signs)
        z_norm = all(int(np.sum(s * s)) * a2 == Fraction(self.m - 1, self.m) for s in self.z_signs)
        back = all(np.array_equal(y[i - 1], z[i - 1] - self.a * e[i - 1]) for i in range(1, self.m + 1))
        fwd = all(np.array_equal(y[i], z[i - 1] + self.a * e[i - 1]) for i in range(1, self.m + 1))
        return {"unit_y": y_norm, "norm_z": z_norm, "y_prev": back, "y_next": fwd}


def wells_path(m: int, n: int) -> WellsPath:
    if m < 1 or n < m:
        raise DomainError("path needs 1 <= m <= n")
    ys = np.zeros((m + 1, n), dtype=np.int64)
    for i in range(m + 1):
        ys[i, :i] = 1
        ys[i, i:m] = -1
    zs = ys[1:].copy()
    for i in range(1, m + 1):
        zs[i - 1, i - 1] = 0
    ys.setflags(write=False)
    zs.setflags(write=False)
    return WellsPath(m, n, 1.0 / math.sqrt(m), ys, zs)


# -- symmetrisation ------------------------------------------------------------------

EXACT_SYM_MAX_N = 8


class Symmetrized:
    """Average of ``f(x[perm])`` over permutations of the coordinates.

    ``f`` (and ``grad``, if given) must accept an ``(N, n)`` batch.
    """

    def __init__(self, f: Callable, n: int, perms: np.ndarray, grad: Callable | None, exact: bool):
        self.f, self.n, self.perms, self._grad, self.exact = f, n, perms, grad, exact

    def _batch(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DomainError("dimension mismatch")
        return x, x[..., self.perms]

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Values and Monte Carlo standard errors (zero in exact mode)."""
        x, xp = self._batch(np.atleast_2d(x))
        vals = np.asarray(self.f(xp.reshape(-1, self.n)), dtype=float).reshape(xp.shape[:-1])
        mean = vals.mean(axis=1)
        if self.exact:
            return mean, np.zeros_like(mean)
        return mean, vals.std(axis=1, ddof=1) / math.sqrt(vals.shape[1])

    def __call__(self, x):
        single = np.ndim(x) == 1
        v = self.evaluate(x)[0]
        return float(v[0]) if single else v

    def grad(self, x) -> np.ndarray:
        if self._grad is None:
            raise DomainError("no gradient oracle supplied")
        single = np.ndim(x) == 1
        x, xp = self._batch(np.atleast_2d(x))
        G = np.asarray(self._grad(xp.reshape(-1, self.n)), dtype=float).reshape(xp.shape)
        out = np.zeros_like(G)
        # the chain rule through x -> x[perm] scatters back to the permuted slots
        rows = np.arange(G.shape[0])[:, None, None]
        cols = np.arange(G.shape[1])[None, :, None]
        np.add.at(out, (rows, cols, self.perms[None, :, :]), G)
        g = out.mean(axis=1)
        return g[0] if single else g


def symmetrize(f: Callable, n: int, mode: str = "exact", *, seed: int = 0, count: int = 1000,
               grad: Callable | None = None) -> Symmetrized:
    if mode == "exact":
        if n > EXACT_SYM_MAX_N:
            raise DomainError(f"exact symmetrisation is refused for n > {EXACT_SYM_MAX_N}")
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
        return Symmetrized(f, n, perms, grad, True)
    if mode == "sampled":
        if count < 2:
            raise DomainError("sampled symmetrisation needs at least 2 permutations")
        rng = np.random.default_rng(seed)
        perms = np.array([rng.permutation(n) for _ in range(count)], dtype=np.intp)
        return Symmetrized(f, n, perms, grad, False)
    raise DomainError(f"unknown symmetrisation mode {mode!r}")


# -- admissibility and the telescoping audit --------------------------------------------------

@dataclass(frozen=True)
class WellsInstance:
    n: int
    c: float
    omega: Modulus
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.m > self.n:
            raise DomainError("need 1 <= m <= n")
        if not self.c > 0:
            raise DomainError("separation level c must be positive")

    @property
    def a(self) -> float:
        return 1.0 / math.sqrt(self.m)


@dataclass(frozen=True)
class Admissibility:
    applicable: bool
    m: int | None
    n_threshold: float | None
    reason: str = ""


def wells_admissibility(c: float, omega: Modulus, max_m: int = 1 << 60) -> Admissibility:
    """Least ``m`` with ``omega(1/sqrt(m)) < c/2`` and the dimension threshold
    ``m * (1 + 16 omega(1)**2 / c**2)``."""
    if not c > 0:
        raise DomainError("c must be positive")
    if isinstance(omega, Zero):
        raise DomainError("the zero modulus is trivial")
    if not classify_modulus(omega, np.logspace(0, -12, 49)).nontrivial:
        raise DomainError("modulus must be nontrivial")
    w1 = omega(1.0)
    if not math.isfinite(w1):
        raise DomainError("modulus must be finite at 1")

    def good(m: int) -> bool:
        return omega(1.0 / math.sqrt(m)) < c / 2

    if good(1):
        m = 1
    else:
        hi = 2
        while not good(hi):
            if hi >= max_m:
                return Admissibility(False, None, None, f"no admissible m up to {max_m}")
            hi *= 2
        lo = hi // 2  # bad
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if good(mid):
                hi = mid
            else:
                lo = mid
        m = hi
    return Admissibility(True, m, m * (1 + 16 * w1 ** 2 / c ** 2))


def _profile(kind: str):
    if kind == "smootherstep":
        def p(s):
            s = np.clip(s, 0.0, 1.0)
            return s ** 3 * (s * (6 * s - 15) + 10)

        def dp(s):
            inside = (s > 0) & (s < 1)
            return np.where(inside, 30 * s ** 2 * (s - 1) ** 2, 0.0)
        return p, dp
    if kind == "quadratic":
        def p(s):
            s = np.clip(s, 0.0, 1.0)
            return np.where(s <= 0.5, 2 * s ** 2, 1 - 2 * (1 - s) ** 2)

        def dp(s):
            s = np.clip(s, 0.0, 1.0)
            return np.where(s <= 0.5, 4 * s, 4 * (1 - s))
        return p, dp
    if kind == "logistic":
        k = 12.0

        def p(s):
            return 1.0 / (1.0 + np.exp(-k * (s - 0.5)))

        def dp(s):
            q = p(s)
            return k * q * (1 - q)
        return p, dp
    raise DomainError(f"unknown ridge profile {kind!r}")


def ridge_candidate(n: int, m: int, c: float, profile: str = "smootherstep"):
    """Ridge ``c * p((s + 1) / 2)`` with ``s = sum_{i <= m} x_i / sqrt(m)``.

    Along the chain ``s`` runs from -1 at ``y_0`` to 1 at ``y_m``.  Returns
    batched ``(g, grad)``.
    """
    if not 1 <= m <= n:
        raise DomainError("need 1 <= m <= n")
    p, dp = _profile(profile)
    w = np.zeros(n)
    w[:m] = 1.0 / math.sqrt(m)

    def g(x):
        s = np.asarray(x, dtype=float) @ w
        return c * p((s + 1) / 2)

    def grad(x):
        s = np.asarray(x, dtype=float) @ w
        return (c * dp((s + 1) / 2) / 2)[..., None] * w

    return g, grad


@dataclass(frozen=True)
class TelescopeReport:
    m: int
    a: float
    increments: np.ndarray
    budgets: np.ndarray
    total: float
    budget_total: float
    steps_within_budget: bool
    below_c: bool
    hypotheses_met: bool
    contradiction: bool
    rows: list = field(default_factory=list)


def wells_telescope_audit(g: Callable, grad: Callable, inst: WellsInstance, r: float = 1.5,
                          atol: float = 1e-12) -> TelescopeReport:
    """Measure the chain increments of ``g`` against the per-step symmetric Taylor budget
    ``2a |Dg(z_i)[e_i]| + omega(a) a**2``.

    ``g`` and ``grad`` take ``(N, n)`` batches.  The hypotheses are
    ``g(y_0) = 0`` (``y_0`` lies in A) and ``g(y_m) >= c`` (``y_m`` lies in C).
    """
    if not r > 1:
        raise DomainError("candidate must be defined on a ball of radius r > 1")
    path = wells_path(inst.m, inst.n)
    a = path.a
    gy = np.asarray(g(path.y), dtype=float).reshape(-1)
    Gz = np.asarray(grad(path.z), dtype=float).reshape(inst.m, inst.n)
    incr = np.abs(np.diff(gy))
    axial = np.abs(Gz[np.arange(inst.m), np.arange(inst.m)])
    budgets = 2 * a * axial + inst.omega(a) * a * a
    total = float(np.sum(incr))
    btotal = float(np.sum(budgets))
    within = bool(np.all(incr <= budgets * (1 + 1e-9) + atol))
    hyp = abs(gy[0]) <= atol and gy[-1] >= inst.c - atol
    rows = [
        {"step": i + 1, "increment": float(incr[i]), "budget": float(budgets[i]),
         "axial_derivative": float(axial[i])}
        for i in range(inst.m)
    ]
    return TelescopeReport(inst.m, a, incr, budgets, total, btotal, within, total < inst.c,
                           bool(hyp), bool(hyp and within and btotal < inst.c), rows)


# -- the c0 field ------------------------------------------------------------------

def build_c0_field(nmax: int, lmax: int, variant: str = "cubic") -> JetField:
    """``0`` and ``2**-n e_l`` in R^lmax with the sup norm, all jets of order 1, 2 zero.

    ``cubic``: ``f(2**-n e_l) = 2**(-3n)``; ``exp``: ``f(2**-n e_l) = exp(-2**n)``.
    """
    if nmax < 1 or lmax < 1:
        raise DomainError("nmax and lmax must be positive")
    if variant not in ("cubic", "exp"):
        raise DomainError(f"unknown c0 variant {variant!r}")
    pts = [np.zeros(lmax)]
    vals = [0.0]
    for n in range(1, nmax + 1):
        for l in range(lmax):
            p = np.zeros(lmax)
            p[l] = 2.0 ** -n
            pts.append(p)
            vals.append(2.0 ** (-3 * n) if variant == "cubic" else math.exp(-(2.0 ** n)))
    return JetField.zero_jets(2, np.array(pts), np.array(vals), norm="linf",
                              meta={"family": f"c0-{variant}", "nmax": nmax, "lmax": lmax})


# -- the cone field ------------------------------------------------------------------

def _sample_A(rng, count, n):
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = rng.uniform(0, 1, (count, 1)) ** (1.0 / n)
    return -np.abs(u) * rad


def _sample_C(rng, count, n, d):
    """Ball points at distance >= d from A, by rejection."""
    out = []
    while sum(len(o) for o in out) < count:
        u = rng.standard_normal((4 * count, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        x = u * rng.uniform(0, 1, (4 * count, 1)) ** (1.0 / n)
        out.append(x[project_wells_A(x)[1] >= d])
    return np.concatenate(out)[:count]


def build_cone_field(d_param: float = 0.25, k: int = 2, counts: tuple[int, int] = (40, 40),
                     seed: int = 0, n: int = 3) -> JetField:
    """Cones over ``e + A`` and ``e + C`` in R^(n+1) = span(e) + R^n.

    On the A-cone the jets are those of ``P(x) = x_0**(k+1)``; on the C-cone
    everything vanishes.  The apex 0 appears once.
    """
    if not 0 < d_param < 1:
        raise DomainError("d_param must lie in (0, 1)")
    if k not in (1, 2, 3):
        raise DomainError("k must be 1, 2 or 3")
    rng = np.random.default_rng(seed)
    nA, nC = counts
    tA = rng.uniform(0, 1, (nA, 1))
    tC = rng.uniform(0, 1, (nC, 1))
    A = _sample_A(rng, nA, n)
    C = _sample_C(rng, nC, n, d_param)
    XA = tA * np.hstack([np.ones((nA, 1)), A])
    XC = tC * np.hstack([np.ones((nC, 1)), C])
    pts = np.vstack([np.zeros((1, n + 1)), XA, XC])
    N = pts.shape[0]
    phi = pts[:, 0]
    on_A = np.zeros(N, dtype=bool)
    on_A[1:1 + nA] = True
    vals = np.where(on_A, phi ** (k + 1), 0.0)
    derivs = []
    for j in range(1, k + 1):
        D = np.zeros((N, 1) + (n + 1,) * j)
        coef = math.prod(range(k + 2 - j, k + 2)) * phi ** (k + 1 - j)
        D[(slice(None), 0) + (0,) * j] = np.where(on_A, coef, 0.0)
        derivs.append(D)
    meta = {"family": "cone", "d": d_param, "k": k, "n_A": nA, "n_C": nC, "seed": seed}
    return JetField(k, pts, vals[:, None], tuple(derivs), "l2", meta)


@dataclass(frozen=True)
class ConeSeparation:
    r_min: float
    s_min: float
    bound: float
    passed: bool


def cone_separation_audit(d_param: float = 0.25, n: int = 3, samples: int = 2000, seed: int = 0,
                          t_max: float = 3.0) -> ConeSeparation:
    """Sampled distances from ``e + A`` to the C-cone and from ``e + C`` to the A-cone."""
    rng = np.random.default_rng(seed)
    A = _sample_A(rng, samples, n)
    C = _sample_C(rng, samples, n, d_param)
    eA = np.hstack([np.ones((samples, 1)), A])
    eC = np.hstack([np.ones((samples, 1)), C])
    tA = rng.uniform(0, t_max, (samples, 1))
    tC = rng.uniform(0, t_max, (samples, 1))
    coneA = tA * np.hstack([np.ones((samples, 1)), _sample_A(rng, samples, n)])
    coneC = tC * np.hstack([np.ones((samples, 1)), _sample_C(rng, samples, n, d_param)])

    def min_dist(P, Q):
        best = np.inf
        for s in range(0, P.shape[0], 256):
            D = np.linalg.norm(P[s:s + 256, None, :] - Q[None, :, :], axis=-1)
            best = min(best, float(D.min()))
        return best

    r = min_dist(eA, coneC)
    s = min_dist(eC, coneA)
    bound = d_param / 3
    return ConeSeparation(r, s, bound, r >= bound - 1e-9 and s >= bound - 1e-9)
