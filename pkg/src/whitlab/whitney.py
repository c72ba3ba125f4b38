"""Taylor defects, Whitney-condition checks and the symmetric Taylor estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DomainError
from .forms import batch_opnorm, vertex_opnorm
from .jets import JetField, fd_derivative
from .moduli import Modulus, Zero, deviation_envelope

__all__ = [
    "DefectTable",
    "defect_table",
    "taylor_defect",
    "Wkom",
    "Wkplus",
    "Wk",
    "Witness",
    "WhitneyReport",
    "check_whitney",
    "minimal_whitney_modulus",
    "SymTaylorGap",
    "sym_taylor_gap",
    "FiniteDifferenceOracle",
]

DEFAULT_RTOL = 1e-9
# floats per chunk in the pair sweep
_CHUNK_FLOATS = 4_000_000


def _transport(F: JetField, I: np.ndarray, J: np.ndarray, j: int) -> np.ndarray:
    """``f_j(y) - sum_l (1/l!) f_{j+l}(x)[(y-x)^l, .]`` for pairs ``x = I, y = J``."""
    h = F.points[J] - F.points[I]
    out = F.stack(j)[J].copy()
    for l in range(0, F.k - j + 1):
        t = F.stack(j + l)[I]
        for _ in range(l):
            t = np.einsum("pd...i,pi->pd...", t, h)
        out -= t / math.factorial(l)
    return out


def _form_norms(stack: np.ndarray, j: int, norm: str) -> np.ndarray:
    """Norms of ``(P, d) + (n,)*j`` forms, aggregated over targets by the Euclidean norm."""
    P, d = stack.shape[:2]
    flat = stack.reshape((P * d,) + stack.shape[2:])
    if norm == "linf" and j >= 1:
        per = np.array([vertex_opnorm(t) for t in flat])
    else:
        per = batch_opnorm(flat, j)
    return np.sqrt(np.sum(per.reshape(P, d) ** 2, axis=1))


@dataclass(frozen=True)
class DefectTable:
    """All ordered pairs ``(i, k)`` with ``i != k`` in lexicographic order.

    ``defects[p, j]`` is the order-``j`` Taylor defect transporting from point
    ``I[p]`` to point ``J[p]``.
    """

    k: int
    I: np.ndarray
    J: np.ndarray
    dist: np.ndarray
    defects: np.ndarray
    atol: float


def _auto_atol(F: JetField) -> float:
    return 1e-12 * (1.0 + F.scale())


def defect_table(F: JetField, atol: float | None = None) -> DefectTable:
    N = len(F)
    ii, kk = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    mask = ii != kk
    I, J = ii[mask], kk[mask]
    dist = F.distance(F.points[I], F.points[J])
    defects = np.zeros((I.size, F.k + 1))
    per_pair = F.d * F.n ** F.k
    step = max(1, _CHUNK_FLOATS // max(per_pair, 1))
    for s in range(0, I.size, step):
        sl = slice(s, s + step)
        for j in range(F.k + 1):
            defects[sl, j] = _form_norms(_transport(F, I[sl], J[sl], j), j, F.norm)
    return DefectTable(F.k, I, J, dist, defects, _auto_atol(F) if atol is None else atol)


def taylor_defect(F: JetField, src: int, dst: int, j: int) -> float:
    """Taylor defect of order ``j`` from point ``src`` to point ``dst``."""
    N = len(F)
    if not (0 <= src < N and 0 <= dst < N):
        raise IndexError(f"point index out of range for a field of {N} points")
    if not 0 <= j <= F.k:
        raise DomainError(f"order {j} outside 0..{F.k}")
    if src == dst:
        return 0.0
    t = _transport(F, np.array([src]), np.array([dst]), j)
    return float(_form_norms(t, j, F.norm)[0])


@dataclass(frozen=True)
class Wkom:
    """Uniform condition with modulus ``omega``."""

    omega: Modulus


@dataclass(frozen=True)
class Wkplus:
    """Condition given on a grid of ``(eps, delta)``: pairs closer than ``delta`` obey ``eps``."""

    schedule: tuple

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple((float(e), float(d)) for e, d in self.schedule))
        if not self.schedule:
            raise DomainError("empty eps-delta grid")


@dataclass(frozen=True)
class Wk:
    """Local condition on a grid of ``(eps, radius)``: pairs inside one ball around a point of A."""

    schedule: tuple

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple((float(e), float(r)) for e, r in self.schedule))
        if not self.schedule:
            raise DomainError("empty localization grid")


@dataclass(frozen=True)
class Witness:
    src: int
    dst: int
    j: int
    distance: float
    defect: float
    allowance: float

    def pair(self) -> tuple[int, int]:
        return (self.src, self.dst)


@dataclass(frozen=True)
class WhitneyReport:
    passed: bool
    condition: str
    worst: Witness | None
    measured_M: float
    reduction: str
    n_pairs: int
    details: dict = field(default_factory=dict)


def _unit_powers(tab: DefectTable) -> np.ndarray:
    """``dist ** (k - j)`` for every pair and order."""
    ex = tab.k - np.arange(tab.k + 1)
    return tab.dist[:, None] ** ex[None, :]


def _ratio(defect: np.ndarray, allowance: np.ndarray, atol: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(allowance > 0, defect / allowance, np.where(defect > atol, np.inf, 0.0))
    return np.where(np.isinf(allowance), 0.0, r)


def _worst(tab: DefectTable, ratio: np.ndarray, allowance: np.ndarray, mask: np.ndarray | None = None):
    if tab.I.size == 0:
        return None
    r = ratio if mask is None else np.where(mask, ratio, -np.inf)
    flat = int(np.argmax(r))  # first maximum = lexicographic (src, dst, j)
    p, j = divmod(flat, tab.k + 1)
    if not np.isfinite(r.flat[flat]) and r.flat[flat] < 0:
        return None
    return Witness(int(tab.I[p]), int(tab.J[p]), int(j), float(tab.dist[p]),
                   float(tab.defects[p, j]), float(allowance[p, j]))


def check_whitney(F: JetField, condition, *, rtol: float = DEFAULT_RTOL, atol: float | None = None,
                  table: DefectTable | None = None) -> WhitneyReport:
    """Check a Whitney-type condition on the finite jet field ``F``.

    A pair passes when ``defect <= allowance * (1 + rtol) + atol``.
    """
    tab = table if table is not None else defect_table(F, atol)
    atol = tab.atol if atol is None else atol
    if isinstance(condition, Wkom):
        return _check_wkom(tab, condition.omega, rtol, atol)
    if isinstance(condition, Wkplus):
        return _check_grid(tab, condition.schedule, None, rtol, atol, "Wkplus",
                           "finite data: each (eps, delta) checked on pairs with distance < delta")
    if isinstance(condition, Wk):
        D = F.distance(F.points[:, None, :], F.points[None, :, :])
        return _check_grid(tab, condition.schedule, D, rtol, atol, "Wk",
                           "finite data: each (eps, r) checked on pairs lying in one ball U(x0, r), x0 in A")
    raise DomainError(f"unknown Whitney condition {condition!r}")


def _check_wkom(tab: DefectTable, omega: Modulus, rtol: float, atol: float) -> WhitneyReport:
    fact = np.array([1.0 / math.factorial(tab.k - j) for j in range(tab.k + 1)])
    w = omega(tab.dist) if tab.dist.size else np.zeros(0)
    with np.errstate(invalid="ignore"):
        allowance = np.asarray(w)[:, None] * _unit_powers(tab) * fact[None, :]
    allowance = np.nan_to_num(allowance, nan=np.inf)
    ok = tab.defects <= allowance * (1.0 + rtol) + atol
    ratio = _ratio(tab.defects, allowance, atol)
    big = tab.defects > atol
    measured = float(np.max(np.where(big, ratio, 0.0))) if ratio.size else 0.0
    passed = bool(np.all(ok))
    # on failure the witness is the violating entry with the largest ratio
    worst = _worst(tab, ratio if passed else np.where(ok, -np.inf, ratio), allowance)
    return WhitneyReport(passed, f"Wkom({omega!r})", worst, measured,
                         "direct: every ordered pair and every order j <= k", int(tab.I.size))


def _check_grid(tab, schedule, D, rtol, atol, name, reduction) -> WhitneyReport:
    plain = np.where(np.isfinite(tab.defects), tab.defects, np.inf)
    units = _unit_powers(tab)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(plain > atol, plain / units, 0.0)
    rel_pair = np.max(rel, axis=1) if rel.size else np.zeros(0)
    passed, worst, worst_excess, required = True, None, -np.inf, []
    for eps, rad in schedule:
        if D is None:
            inside = tab.dist < rad
        else:
            B = (D < rad).astype(np.int64)
            cover = (B.T @ B) > 0
            inside = cover[tab.I, tab.J]
        need = float(np.max(rel_pair[inside])) if np.any(inside) else 0.0
        required.append(need)
        allowance = eps * units
        ok = (plain <= allowance * (1.0 + rtol) + atol) | ~inside[:, None]
        if not np.all(ok):
            passed = False
            ratio = _ratio(plain, allowance, atol)
            w = _worst(tab, np.where(ok, -np.inf, ratio), allowance)
            excess = need / eps if eps > 0 else np.inf
            if w is not None and excess > worst_excess:
                worst, worst_excess = w, excess
    details = {"schedule": list(schedule), "required_eps": required}
    measured = max((r / e if e > 0 else (np.inf if r > 0 else 0.0))
                   for r, (e, _) in zip(required, schedule))
    return WhitneyReport(passed, name, worst, float(measured), reduction, int(tab.I.size), details)


def minimal_whitney_modulus(F: JetField, table: DefectTable | None = None) -> Modulus:
    """Least modulus (step table over the pair distances) for which ``F`` satisfies the uniform condition."""
    if len(F) < 2:
        return Zero()
    tab = table if table is not None else defect_table(F)
    fact = np.array([math.factorial(tab.k - j) for j in range(tab.k + 1)], dtype=float)
    with np.errstate(over="ignore"):
        dev = np.max(tab.defects * fact[None, :] / _unit_powers(tab), axis=1)
    return deviation_envelope(tab.dist, dev)


# -- symmetric Taylor estimate ------------------------------------------------

class DerivativeOracle(Protocol):
    def value(self, x) -> np.ndarray: ...

    def derivative(self, x, j: int) -> np.ndarray: ...


class FiniteDifferenceOracle:
    """Wraps a callable with finite-difference derivatives."""

    def __init__(self, f, step: float = 1e-3):
        if not step > 0:
            raise DomainError("finite-difference step must be positive")
        self.f, self.step = f, step

    def value(self, x):
        return np.atleast_1d(np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float))

    def derivative(self, x, j):
        if j == 0:
            return self.value(x)
        return fd_derivative(self.f, x, j, self.step ** (2.0 / (j + 1)))[0]


@dataclass(frozen=True)
class SymTaylorGap:
    lhs: float
    rhs: float
    slack: float
    odd_term: float
    sup_plus: float
    sup_minus: float


def _agg_norm(t: np.ndarray, j: int) -> float:
    t = np.asarray(t, dtype=float)
    return float(np.sqrt(np.sum(batch_opnorm(t.reshape((-1,) + t.shape[1:]), j) ** 2)))


def _apply_h(t: np.ndarray, h: np.ndarray, j: int) -> np.ndarray:
    for _ in range(j):
        t = t @ h
    return t


def sym_taylor_gap(f: DerivativeOracle, x, h, k: int, grid: int | Sequence[float] = 33) -> SymTaylorGap:
    """Both sides of the symmetric Taylor estimate on ``[x - h, x + h]``.

    The one-sided sups of ``||d^k f(x +- t h) - d^k f(x)||`` are taken over
    ``t`` in ``grid`` (a point count in [0, 1] or an explicit list).
    """
    x, h = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(h, dtype=float))
    if k < 1:
        raise DomainError("order k must be at least 1")
    ts = np.linspace(0.0, 1.0, grid) if isinstance(grid, (int, np.integer)) else np.asarray(grid, dtype=float)
    if ts.size == 0:
        raise DomainError("empty sup grid")
    lhs = float(np.linalg.norm(f.value(x + h) - f.value(x - h)))
    odd = sum(_apply_h(np.asarray(f.derivative(x, j), dtype=float), h, j) / math.factorial(j)
              for j in range(1, k + 1, 2))
    Dk = np.asarray(f.derivative(x, k), dtype=float)
    sp = max(_agg_norm(np.asarray(f.derivative(x + t * h, k)) - Dk, k) for t in ts)
    sm = max(_agg_norm(np.asarray(f.derivative(x - t * h, k)) - Dk, k) for t in ts)
    odd_n = float(np.linalg.norm(odd))
    rhs = 2 * odd_n + (sp + sm) * float(np.linalg.norm(h)) ** k / math.factorial(k)
    return SymTaylorGap(lhs, rhs, rhs - lhs, odd_n, sp, sm)
