"""Moduli of continuity.

A modulus is a non-decreasing gauge ``w: [0, inf) -> [0, inf]`` with
``w(0) = 0``.  The closed-form variants below cover everything the audits
need; :class:`Table` holds sampled moduli and :class:`InfiniteBeyond` models
a modulus that jumps to ``+inf`` past a threshold.

All variants are immutable and callable on scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, SchemaError

__all__ = [
    "Modulus",
    "Zero",
    "Linear",
    "PowerLaw",
    "Capped",
    "Table",
    "InfiniteBeyond",
    "Classification",
    "eval_modulus",
    "classify_modulus",
    "minimal_modulus_from_deviations",
    "deviation_envelope",
    "modulus_from_dict",
]


def _check_t(t):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("modulus evaluated at a negative or NaN argument")
    return arr


def _out(arr, t):
    if np.ndim(t) == 0:
        return float(arr)
    return arr


class Modulus:
    """Base class; subclasses implement ``_eval`` on a non-negative array."""

    kind: str = ""

    def __call__(self, t):
        arr = _check_t(t)
        return _out(self._eval(arr), t)

    def _eval(self, t: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def scaled(self, factor: float) -> "Modulus":
        """Return ``factor * self``; ``factor`` must be non-negative."""
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params()}


@dataclass(frozen=True)
class Zero(Modulus):
    kind = "zero"

    def _eval(self, t):
        return np.zeros_like(t)

    def scaled(self, factor):
        _check_factor(factor)
        return self

    def params(self):
        return {}


@dataclass(frozen=True)
class Linear(Modulus):
    M: float

    kind = "linear"

    def __post_init__(self):
        if not (self.M >= 0) or math.isinf(self.M):
            raise DomainError(f"Linear modulus needs finite M >= 0, got {self.M}")

    def _eval(self, t):
        return self.M * t

    def scaled(self, factor):
        _check_factor(factor)
        return Linear(self.M * factor)

    def params(self):
        return {"M": float(self.M)}


@dataclass(frozen=True)
class PowerLaw(Modulus):
    """``w(t) = M * t**alpha`` with ``alpha`` in (0, 1]."""

    M: float
    alpha: float

    kind = "power"

    def __post_init__(self):
        if not (self.M >= 0) or math.isinf(self.M):
            raise DomainError(f"PowerLaw needs finite M >= 0, got {self.M}")
        if not (0 < self.alpha <= 1):
            raise DomainError(f"PowerLaw exponent must lie in (0, 1], got {self.alpha}")

    def _eval(self, t):
        if self.alpha == 1:
            return self.M * t
        return self.M * np.power(t, self.alpha)

    def scaled(self, factor):
        _check_factor(factor)
        return PowerLaw(self.M * factor, self.alpha)

    def params(self):
        return {"M": float(self.M), "alpha": float(self.alpha)}


@dataclass(frozen=True)
class Capped(Modulus):
    """``w(t) = min(M * t, cap)``."""

    M: float
    cap: float

    kind = "capped"

    def __post_init__(self):
        if not (self.M >= 0) or math.isinf(self.M):
            raise DomainError(f"Capped needs finite M >= 0, got {self.M}")
        if not (self.cap > 0) or math.isinf(self.cap):
            raise DomainError(f"Capped needs a finite cap > 0, got {self.cap}")

    def _eval(self, t):
        return np.minimum(self.M * t, self.cap)

    def scaled(self, factor):
        _check_factor(factor)
        if factor == 0:
            return Zero()
        return Capped(self.M * factor, self.cap * factor)

    def params(self):
        return {"M": float(self.M), "cap": float(self.cap)}


@dataclass(frozen=True)
class Table(Modulus):
    """Sampled modulus through knots ``(t_i, w_i)``.

    ``interp="linear"`` interpolates piecewise-linearly through the origin and
    the knots; ``interp="step"`` is the right-continuous step function that is
    0 before the first knot.  Both continue with the last value beyond the
    last knot.
    """

    knots: tuple
    values: tuple
    interp: str = "linear"

    kind = "table"

    def __post_init__(self):
        knots = tuple(float(x) for x in self.knots)
        values = tuple(float(x) for x in self.values)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if len(knots) == 0 or len(knots) != len(values):
            raise DomainError("Table needs a non-empty, equal-length knot/value list")
        if self.interp not in ("linear", "step"):
            raise DomainError(f"unknown Table interpolation {self.interp!r}")
        if any(not math.isfinite(x) for x in knots + values):
            raise DomainError("Table knots and values must be finite")
        if knots[0] <= 0 or any(b <= a for a, b in zip(knots, knots[1:])):
            raise DomainError("Table knots must be positive and strictly increasing")
        if values[0] < 0 or any(b < a for a, b in zip(values, values[1:])):
            raise DomainError("Table values must be non-negative and non-decreasing")

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], interp: str = "linear") -> "Table":
        pairs = sorted((float(t), float(w)) for t, w in pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), interp)

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.knots, self.values))

    def _eval(self, t):
        kn = np.asarray(self.knots)
        va = np.asarray(self.values)
        if self.interp == "linear":
            return np.interp(t, np.concatenate(([0.0], kn)), np.concatenate(([0.0], va)))
        idx = np.searchsorted(kn, t, side="right")
        padded = np.concatenate(([0.0], va))
        return padded[idx]

    def scaled(self, factor):
        _check_factor(factor)
        return Table(self.knots, tuple(v * factor for v in self.values), self.interp)

    def params(self):
        return {"pairs": [[float(t), float(w)] for t, w in self.pairs], "interp": self.interp}


@dataclass(frozen=True)
class InfiniteBeyond(Modulus):
    """``base(t)`` for ``t <= threshold`` and ``+inf`` after it."""

    base: Modulus
    threshold: float

    kind = "infinite_beyond"

    def __post_init__(self):
        if not (self.threshold > 0) or math.isinf(self.threshold):
            raise DomainError("InfiniteBeyond needs a finite positive threshold")

    def _eval(self, t):
        out = np.asarray(self.base._eval(t), dtype=float)
        return np.where(t > self.threshold, np.inf, out)

    def scaled(self, factor):
        _check_factor(factor)
        # 0 * inf saturates to inf: the gauge stays infinite past the threshold
        return InfiniteBeyond(self.base.scaled(factor), self.threshold)

    def params(self):
        return {"base": self.base.to_dict(), "threshold": float(self.threshold)}


def _check_factor(factor):
    if not (factor >= 0) or math.isinf(factor):
        raise DomainError(f"modulus scale factor must be finite and >= 0, got {factor}")


def eval_modulus(omega: Modulus, t):
    """Evaluate ``omega`` at ``t >= 0`` (scalar or array)."""
    return omega(t)


@dataclass(frozen=True)
class Classification:
    nontrivial: bool
    nondegenerate: bool
    subadditive_witness: tuple[float, float] | None
    exact: bool
    """False when a verdict was decided only on the probed range."""
    probe_range: tuple[float, float] = field(default=(0.0, 0.0))


def _closed_form_flags(omega: Modulus) -> tuple[bool, bool] | None:
    if isinstance(omega, Zero):
        return False, False
    if isinstance(omega, (Linear, PowerLaw, Capped)):
        # each behaves like M*t or M*t**alpha (alpha <= 1) near 0
        return omega.M > 0, omega.M > 0
    if isinstance(omega, InfiniteBeyond):
        return _closed_form_flags(omega.base)
    return None


def classify_modulus(omega: Modulus, grid: Sequence[float], rtol: float = 1e-12) -> Classification:
    """Classify ``omega`` as (non)trivial / (non)degenerate and look for a
    sub-additivity violation ``w(s+t) > w(s) + w(t)`` among grid pairs.

    Closed-form variants are decided exactly; tables only on the probe range.
    """
    grid = np.asarray(sorted(set(float(g) for g in grid)), dtype=float)
    if grid.size == 0:
        raise DomainError("probe grid is empty")
    if np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise DomainError("probe grid must consist of finite positive scales")

    vals = omega(grid)
    flags = _closed_form_flags(omega)
    if flags is not None:
        nontrivial, nondegenerate = flags
        exact = True
    else:
        nontrivial = bool(np.all(vals > 0))
        # liminf w(t)/t estimated by the smallest ratio on the probed scales
        nondegenerate = bool(np.min(vals / grid) > 0)
        exact = False

    s = grid[:, None]
    t = grid[None, :]
    with np.errstate(invalid="ignore"):
        lhs = omega(s + t)
        rhs = vals[:, None] + vals[None, :]
        excess = np.where(np.isinf(lhs) & np.isinf(rhs), 0.0, lhs - rhs * (1 + rtol))
    witness = None
    if np.any(excess > 0):
        i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        witness = (float(grid[i]), float(grid[j]))
    return Classification(nontrivial, nondegenerate, witness, exact, (float(grid[0]), float(grid[-1])))


def minimal_modulus_from_deviations(samples: Iterable[Sequence[float]]) -> Modulus:
    """Least step modulus with ``w(delta) >= deviation`` whenever ``distance <= delta``.

    Returns :class:`Zero` when there is no sample with positive deviation.
    """
    arr = np.asarray([(float(d), float(v)) for d, v in samples], dtype=float)
    if arr.size == 0:
        return Zero()
    return deviation_envelope(arr[:, 0], arr[:, 1])


def deviation_envelope(dist, dev) -> Modulus:
    """Array form of :func:`minimal_modulus_from_deviations`."""
    dist = np.asarray(dist, dtype=float).ravel()
    dev = np.asarray(dev, dtype=float).ravel()
    if dist.shape != dev.shape:
        raise DomainError("distance and deviation arrays differ in length")
    if dist.size == 0:
        return Zero()
    if np.any(~np.isfinite(dist)) or np.any(dist <= 0):
        raise DomainError("distances must be finite and positive")
    if np.any(np.isnan(dev)) or np.any(dev < 0):
        raise DomainError("deviations must be non-negative")
    return _step_envelope(dist, dev)


def _step_envelope(dist: np.ndarray, dev: np.ndarray) -> Modulus:
    order = np.lexsort((-dev, dist))
    dist, dev = dist[order], dev[order]
    running = np.maximum.accumulate(dev)
    # a distance group contributes its final running max; keep strict increases only
    last = np.r_[dist[1:] != dist[:-1], True]
    t_grp, w_grp = dist[last], running[last]
    prev = np.r_[0.0, w_grp[:-1]]
    keep = w_grp > prev
    keep_t = t_grp[keep].tolist()
    keep_w = w_grp[keep].tolist()
    if not keep_t:
        return Zero()
    if math.isinf(keep_w[-1]):
        # an infinite deviation at distance t* makes the least modulus infinite beyond it
        finite_t = [t for t, w in zip(keep_t, keep_w) if math.isfinite(w)]
        finite_w = [w for w in keep_w if math.isfinite(w)]
        first_inf = keep_t[len(finite_t)]
        base = Table(tuple(finite_t), tuple(finite_w), "step") if finite_t else Zero()
        # step semantics: infinite from first_inf on, so the threshold sits just below it
        return InfiniteBeyond(base, math.nextafter(first_inf, 0.0))
    return Table(tuple(keep_t), tuple(keep_w), "step")


_SIMPLE = {
    "zero": lambda p: Zero(),
    "linear": lambda p: Linear(float(p["M"])),
    "power": lambda p: PowerLaw(float(p["M"]), float(p["alpha"])),
    "capped": lambda p: Capped(float(p["M"]), float(p["cap"])),
    "table": lambda p: Table.from_pairs(p["pairs"], p.get("interp", "linear")),
    "infinite_beyond": lambda p: InfiniteBeyond(modulus_from_dict(p["base"]), float(p["threshold"])),
}


def modulus_from_dict(obj: dict) -> Modulus:
    try:
        kind = obj["kind"]
        params = obj.get("params", {})
        return _SIMPLE[kind](params)
    except KeyError as exc:
        raise SchemaError(f"bad modulus object {obj!r}: missing {exc}") from None
