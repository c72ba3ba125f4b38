"""Lower bounds for approximating ``c(|x_1|, ..., |x_n|)`` on a cube by maps with
uniformly continuous axial partial derivatives, and falsification audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InapplicableBound
from .moduli import Linear, Modulus, Zero, deviation_envelope

__all__ = [
    "AbsGapInstance",
    "LowerBound",
    "lower_bound_rhs",
    "best_affine_1d",
    "Candidate",
    "affine_candidate",
    "best_affine_candidate",
    "mollified_abs_candidate",
    "abs_candidate",
    "SeparableGauss",
    "MonteCarlo",
    "GapEstimate",
    "l2_gap",
    "sup_gap",
    "measured_axial_modulus",
    "remainder_audit",
    "candidate_family",
    "dominance_audit",
    "DominanceReport",
]


@dataclass(frozen=True)
class AbsGapInstance:
    n: int
    eta: float
    c: float
    omega: Modulus = field(default_factory=Zero)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if not self.eta > 0:
            raise DomainError("eta must be positive")
        if not self.c > 0:
            raise DomainError("c must be positive")

    def target(self, X) -> np.ndarray:
        return self.c * np.abs(np.asarray(X, dtype=float))


@dataclass(frozen=True)
class LowerBound:
    mean_square: float
    sup_bound: float


def lower_bound_rhs(inst: AbsGapInstance, omega: Modulus | None = None) -> LowerBound:
    """Mean-square and sup lower bounds; ``omega`` overrides the instance modulus."""
    w = (inst.omega if omega is None else omega)(inst.eta)
    if not w <= inst.c / 2:
        raise InapplicableBound(f"omega(eta) = {w} exceeds c/2 = {inst.c / 2}")
    gap = inst.c - 2 * w
    ms = inst.n * inst.eta ** 2 * gap ** 2 / 12
    return LowerBound(ms, math.sqrt(3) / 6 * math.sqrt(inst.n) * inst.eta * gap)


def best_affine_1d(c: float, eta: float) -> tuple[float, float, float]:
    """Minimiser ``(a, b)`` of ``int_{-eta}^{eta} (a + b t - c|t|)^2 dt`` and the minimum.

    The odd part ``b t`` is orthogonal to the even rest, so ``b = 0``; then
    ``2 int_0^eta (a - c t)^2 dt`` is minimised at the mean ``a = c eta / 2``,
    leaving ``2 * c^2 eta^3 / 12``.
    """
    if not eta > 0 or c < 0:
        raise DomainError("need eta > 0 and c >= 0")
    return c * eta / 2, 0.0, c * c * eta ** 3 / 6


# -- candidates ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    """A map ``g: R^n -> R^n`` on the cube.

    Separable candidates have ``g_i(x) = h_i(x_i)``; ``h[i]``/``dh[i]`` are
    vectorised 1D callables.  Others supply ``value`` on ``(N, n)`` batches and
    ``axial`` giving ``dg_i/dx_i`` on ``(N, n)`` batches.
    """

    kind: str
    params: dict
    n: int
    h: tuple = ()
    dh: tuple = ()
    value_fn: Callable | None = None
    axial_fn: Callable | None = None
    certified: Modulus | None = None

    @property
    def separable(self) -> bool:
        return bool(self.h)

    def value(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.separable:
            return np.stack([self.h[i](X[:, i]) for i in range(self.n)], axis=1)
        return np.asarray(self.value_fn(X), dtype=float)

    def axial(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.separable:
            return np.stack([self.dh[i](X[:, i]) for i in range(self.n)], axis=1)
        return np.asarray(self.axial_fn(X), dtype=float)


def _const(v):
    return lambda t: np.full(np.shape(t), float(v))


def affine_candidate(a: Sequence[float], b: Sequence[float]) -> Candidate:
    a, b = [float(v) for v in a], [float(v) for v in b]
    if len(a) != len(b):
        raise DomainError("a and b must have equal length")
    h = tuple((lambda t, ai=ai, bi=bi: ai + bi * np.asarray(t, dtype=float)) for ai, bi in zip(a, b))
    dh = tuple(_const(bi) for bi in b)
    return Candidate("affine", {"a": a, "b": b}, len(a), h, dh, certified=Zero())


def best_affine_candidate(inst: AbsGapInstance) -> Candidate:
    a, b, _ = best_affine_1d(inst.c, inst.eta)
    cand = affine_candidate([a] * inst.n, [b] * inst.n)
    return Candidate("best_affine", cand.params, cand.n, cand.h, cand.dh, certified=Zero())


def mollified_abs_candidate(c: float, mu: float, n: int = 1, shift: Sequence[float] | None = None) -> Candidate:
    """``g_i(x) = c sqrt(x_i^2 + mu^2) + shift_i``.

    The axial derivative ``c t / sqrt(t^2 + mu^2)`` is ``c/mu``-Lipschitz, which
    is the certified modulus.
    """
    if not mu > 0:
        raise DomainError("mu must be positive")
    s = [0.0] * n if shift is None else [float(v) for v in shift]
    if len(s) != n:
        raise DomainError("shift length must equal n")
    h = tuple((lambda t, si=si: c * np.hypot(t, mu) + si) for si in s)
    dh = tuple((lambda t: c * np.asarray(t, dtype=float) / np.hypot(t, mu)) for _ in s)
    return Candidate("mollified", {"c": c, "mu": mu, "shift": s}, n, h, dh, certified=Linear(c / mu))


def abs_candidate(inst: AbsGapInstance) -> Candidate:
    """The target itself; its axial derivative jumps at 0 so it has no small modulus."""
    h = tuple((lambda t: inst.c * np.abs(t)) for _ in range(inst.n))
    dh = tuple((lambda t: inst.c * np.sign(t)) for _ in range(inst.n))
    return Candidate("target", {"c": inst.c}, inst.n, h, dh, certified=None)


# -- quadrature ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparableGauss:
    order: int = 20
    panels: int = 4

    def __post_init__(self):
        if self.order < 2:
            raise DomainError("quadrature order must be at least 2")
        if self.panels < 1:
            raise DomainError("need at least one panel")


@dataclass(frozen=True)
class MonteCarlo:
    seed: int = 0
    count: int = 100_000

    def __post_init__(self):
        if self.count < 2:
            raise DomainError("Monte Carlo needs at least 2 samples")


@dataclass(frozen=True)
class GapEstimate:
    value: float
    error: float
    method: str


def _gauss_nodes(eta: float, order: int, panels: int):
    """Composite Gauss-Legendre on [-eta, 0] and [0, eta]; weights sum to 2 eta."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-eta, eta, 2 * panels + 1)  # 0 is always an edge
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (lo + hi) / 2 + (hi - lo) / 2 * x[None, :]
    weights = (hi - lo) / 2 * w[None, :]
    return nodes.ravel(), weights.ravel()


def _separable_ms(cand: Candidate, inst: AbsGapInstance, order: int, panels: int) -> float:
    t, w = _gauss_nodes(inst.eta, order, panels)
    ft = inst.c * np.abs(t)
    # mean over the cube of sum_i (h_i - f_i)^2 = sum_i of the 1D means
    return math.fsum(float(np.sum(w * (cand.h[i](t) - ft) ** 2)) / (2 * inst.eta) for i in range(inst.n))


def _mc_ms(cand: Candidate, inst: AbsGapInstance, seed: int, count: int, chunk: int = 200_000):
    rng = np.random.default_rng(seed)
    tot, tot2, done = 0.0, 0.0, 0
    while done < count:
        m = min(chunk, count - done)
        X = rng.uniform(-inst.eta, inst.eta, (m, inst.n))
        v = np.sum((cand.value(X) - inst.target(X)) ** 2, axis=1)
        tot += math.fsum(v)
        tot2 += math.fsum(v * v)
        done += m
    mean = tot / count
    var = max(tot2 / count - mean * mean, 0.0) * count / (count - 1)
    return mean, math.sqrt(var / count)


def l2_gap(cand: Candidate, inst: AbsGapInstance, quadrature=SeparableGauss()) -> GapEstimate:
    """Mean over ``[-eta, eta]^n`` of ``||g - f||^2``.

    Separable candidates under :class:`SeparableGauss` reduce to 1D rules split
    at 0; the error estimate is the change on doubling the panel count.
    Non-separable candidates always use Monte Carlo (seed 0 unless given).
    """
    if cand.n != inst.n:
        raise DomainError("candidate and instance dimensions differ")
    if isinstance(quadrature, SeparableGauss) and cand.separable:
        v = _separable_ms(cand, inst, quadrature.order, quadrature.panels)
        v2 = _separable_ms(cand, inst, quadrature.order, 2 * quadrature.panels)
        return GapEstimate(v2, abs(v2 - v), "separable_gauss")
    mc = quadrature if isinstance(quadrature, MonteCarlo) else MonteCarlo()
    if not isinstance(quadrature, (SeparableGauss, MonteCarlo)):
        raise DomainError(f"unknown quadrature {quadrature!r}")
    v, se = _mc_ms(cand, inst, mc.seed, mc.count)
    return GapEstimate(v, se, "monte_carlo")


def sup_gap(cand: Candidate, inst: AbsGapInstance, grid: int = 20001, seed: int = 0,
            samples: int = 20000) -> float:
    """A lower estimate of ``sup_B ||g - f||``.

    For separable candidates the sup splits into per-coordinate 1D sups taken on a
    dense grid (including 0 and the endpoints); otherwise sampled points and the
    cube vertices are used.
    """
    if cand.separable:
        t = np.union1d(np.linspace(-inst.eta, inst.eta, grid), [0.0])
        ft = inst.c * np.abs(t)
        return math.sqrt(math.fsum(float(np.max((cand.h[i](t) - ft) ** 2)) for i in range(inst.n)))
    rng = np.random.default_rng(seed)
    X = rng.uniform(-inst.eta, inst.eta, (samples, inst.n))
    if inst.n <= 12:
        V = np.array(np.meshgrid(*[[-inst.eta, inst.eta]] * inst.n)).reshape(inst.n, -1).T
        X = np.vstack([X, V, np.zeros((1, inst.n))])
    return float(np.max(np.linalg.norm(cand.value(X) - inst.target(X), axis=1)))


# -- moduli of the axial derivatives ------------------------------------------------------

def measured_axial_modulus(cand: Candidate, inst: AbsGapInstance, *, anchors: int = 4, grid: int = 201,
                           seed: int = 0) -> Modulus:
    """Step modulus of ``t -> dg_i/dx_i`` along coordinate lines through seeded anchors.

    The lines sit inside the open cube; the result underestimates the true
    minimal modulus only by grid resolution.
    """
    rng = np.random.default_rng(seed)
    # open interval: stay strictly inside (-eta, eta)
    t = np.linspace(-inst.eta, inst.eta, grid + 2)[1:-1]
    t = np.union1d(t, [0.0])
    dist = np.abs(t[:, None] - t[None, :])
    iu = np.triu_indices(t.size, 1)
    d_flat = dist[iu]
    samples_d, samples_v = [], []
    n_anchor = 1 if cand.separable else anchors
    for i in range(inst.n):
        for _ in range(n_anchor):
            z = rng.uniform(-inst.eta, inst.eta, inst.n)
            X = np.repeat(z[None, :], t.size, axis=0)
            X[:, i] = t
            dv = cand.axial(X)[:, i]
            dev = np.abs(dv[:, None] - dv[None, :])[iu]
            samples_d.append(d_flat)
            samples_v.append(dev)
    return deviation_envelope(np.concatenate(samples_d), np.concatenate(samples_v))


def remainder_audit(cand: Candidate, inst: AbsGapInstance, omega: Modulus, *, samples: int = 1000,
                    seed: int = 0, step: float = 1e-6) -> float:
    """Largest ``|R(t)| - omega(|t|) |t|`` over sampled lines and ``t``.

    ``R(t) = g_i(z + t e_i) - g_i(z) - t dg_i/dx_i(z)`` with ``z_i = 0``; the
    axial derivative at ``z`` is a central difference of step ``step``.
    """
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        i = int(rng.integers(inst.n))
        z = rng.uniform(-inst.eta, inst.eta, inst.n)
        z[i] = 0.0
        t = float(rng.uniform(-inst.eta, inst.eta))
        e = np.zeros(inst.n)
        e[i] = 1.0
        pts = np.stack([z + t * e, z, z + step * e, z - step * e])
        g = cand.value(pts)[:, i]
        d0 = (g[2] - g[3]) / (2 * step)
        R = g[0] - g[1] - t * d0
        worst = max(worst, abs(R) - omega(abs(t)) * abs(t))
    return worst


# -- the audit ------------------------------------------------------------------------------------

def candidate_family(inst: AbsGapInstance, spec: str, count: int, seed: int = 0) -> list[Candidate]:
    """Seeded candidate families.

    ``affine``: random ``a_i in [0, c eta]``, ``b_i in [-c, c]``;
    ``mollified``: ``mu in [2 eta, 10 eta]`` with random shifts in ``[-c eta, c eta]``;
    ``mixed``: alternating affine and mollified;
    ``best_affine``: the single tight candidate; ``target``: ``g = f``.
    """
    rng = np.random.default_rng(seed)
    n, c, eta = inst.n, inst.c, inst.eta
    if spec == "best_affine":
        return [best_affine_candidate(inst)]
    if spec == "target":
        return [abs_candidate(inst)]
    out = []
    for j in range(count):
        kind = spec if spec != "mixed" else ("affine" if j % 2 == 0 else "mollified")
        if kind == "affine":
            out.append(affine_candidate(rng.uniform(0, c * eta, n), rng.uniform(-c, c, n)))
        elif kind == "mollified":
            mu = float(rng.uniform(2 * eta, 10 * eta))
            out.append(mollified_abs_candidate(c, mu, n, rng.uniform(-c * eta, c * eta, n)))
        else:
            raise DomainError(f"unknown candidate family {spec!r}")
    return out


@dataclass(frozen=True)
class DominanceReport:
    rows: list
    passed: bool
    rejected: int
    audited: int

    COLUMNS = ("candidate", "kind", "omega_eta", "applicable", "mean_square", "ms_bound", "ms_tol",
               "sup_gap", "sup_bound", "sup_tol", "verdict")


def dominance_audit(inst: AbsGapInstance, candidates: Sequence[Candidate], quadrature=SeparableGauss(),
                    *, seed: int = 0) -> DominanceReport:
    """Compare each admissible candidate's gaps with the lower bounds.

    A candidate is admissible when its measured axial modulus satisfies
    ``omega(eta) <= c/2``; the bound then uses the certified modulus when there
    is one.  A gap below ``bound - (1e-8 + 3 * quadrature error)`` is an
    implementation counterexample and fails the audit.
    """
    rows, ok, rejected = [], True, 0
    for idx, cand in enumerate(candidates):
        meas = measured_axial_modulus(cand, inst, seed=seed + idx)
        w_eta = meas(inst.eta)
        base = {"candidate": idx, "kind": cand.kind, "omega_eta": w_eta}
        if not w_eta <= inst.c / 2:
            rejected += 1
            rows.append({**base, "applicable": False, "mean_square": math.nan, "ms_bound": math.nan,
                         "ms_tol": math.nan, "sup_gap": math.nan, "sup_bound": math.nan,
                         "sup_tol": math.nan, "verdict": "rejected"})
            continue
        omega = cand.certified if cand.certified is not None else meas
        try:
            lb = lower_bound_rhs(inst, omega)
        except InapplicableBound:
            rejected += 1
            rows.append({**base, "applicable": False, "mean_square": math.nan, "ms_bound": math.nan,
                         "ms_tol": math.nan, "sup_gap": math.nan, "sup_bound": math.nan,
                         "sup_tol": math.nan, "verdict": "rejected"})
            continue
        gap = l2_gap(cand, inst, quadrature)
        tol = 1e-8 + 3 * gap.error
        sg = sup_gap(cand, inst, seed=seed + idx)
        stol = 1e-8
        good = gap.value >= lb.mean_square - tol and sg >= lb.sup_bound - stol
        ok &= good
        rows.append({**base, "applicable": True, "mean_square": gap.value, "ms_bound": lb.mean_square,
                     "ms_tol": tol, "sup_gap": sg, "sup_bound": lb.sup_bound, "sup_tol": stol,
                     "verdict": "dominates" if good else "VIOLATION"})
    return DominanceReport(rows, bool(ok), rejected, len(candidates) - rejected)
