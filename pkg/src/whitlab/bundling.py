"""Coordinatewise bundling of scalar maps into a sup-norm target over a finite index set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .moduli import Modulus, Zero, deviation_envelope

__all__ = [
    "BundleSpec",
    "BundleEval",
    "bundle_eval",
    "BundleAudit",
    "bundle_modulus_audit",
    "probe_pairs",
    "sin_family",
    "identity_family",
    "constant_family",
    "FAMILIES",
]

Scalar = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BundleSpec:
    """Scalar maps ``f_gamma`` on R^n with gradients, a common modulus and an anchor.

    ``K = max |f_gamma(a)|`` and ``M = max ||Df_gamma(a)||`` are computed on construction.
    """

    labels: tuple
    funcs: tuple
    grads: tuple
    omega: Modulus
    anchor: np.ndarray
    radius: float
    K: float = 0.0
    M: float = 0.0

    @classmethod
    def build(cls, labels: Sequence, funcs: Sequence[Scalar], grads: Sequence[Gradient], omega: Modulus,
              anchor, radius: float) -> "BundleSpec":
        if not (len(labels) == len(funcs) == len(grads)) or not labels:
            raise DomainError("need the same positive number of labels, maps and gradients")
        a = np.atleast_1d(np.asarray(anchor, dtype=float))
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            raise DomainError("anchor must be a finite vector")
        if not (np.isfinite(radius) and radius > 0):
            raise DomainError("radius must be finite and positive")
        K = max(abs(float(f(a))) for f in funcs)
        M = max(float(np.linalg.norm(np.atleast_1d(g(a)))) for g in grads)
        if not (np.isfinite(K) and np.isfinite(M)):
            raise DomainError("anchor values or gradients are not finite")
        a.setflags(write=False)
        return cls(tuple(labels), tuple(funcs), tuple(grads), omega, a, float(radius), K, M)

    @property
    def n(self) -> int:
        return self.anchor.shape[0]

    def bound(self) -> float:
        """``K + (M + omega(R)) R``."""
        return self.K + (self.M + self.omega(self.radius)) * self.radius


@dataclass(frozen=True)
class BundleEval:
    values: np.ndarray
    sup: float
    bound: float
    holds: bool


def bundle_eval(spec: BundleSpec, x, rtol: float = 1e-12) -> BundleEval:
    """Evaluate ``(f_gamma(x))_gamma`` and check the sup-norm bound on the declared ball."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != spec.anchor.shape:
        raise DomainError(f"point has shape {x.shape}, expected {spec.anchor.shape}")
    if np.linalg.norm(x - spec.anchor) > spec.radius * (1 + 1e-12):
        raise DomainError("point lies outside the declared radius around the anchor")
    vals = np.array([float(f(x)) for f in spec.funcs])
    sup = float(np.max(np.abs(vals)))
    bound = spec.bound()
    return BundleEval(vals, sup, bound, sup <= bound * (1 + rtol) + rtol)


@dataclass(frozen=True)
class BundleAudit:
    """``per_label`` holds each coordinate's measured step modulus; ``bundled`` the sup over labels."""

    per_label: tuple
    bundled: Modulus
    knots: np.ndarray
    measured: np.ndarray
    allowed: np.ndarray
    passed: bool
    worst_knot: float | None

    COLUMNS = ("distance", "measured", "allowed", "ok")

    def rows(self) -> list[dict]:
        ok = self.measured <= self.allowed
        return [{"distance": float(t), "measured": float(m), "allowed": float(w), "ok": bool(o)}
                for t, m, w, o in zip(self.knots, self.measured, self.allowed, ok)]


def probe_pairs(spec: BundleSpec, count: int = 1000, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded pairs of points drawn uniformly from the ball of radius R around the anchor."""
    rng = np.random.default_rng(seed)
    n = spec.n
    out = []
    for _ in range(2):
        u = rng.standard_normal((count, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        out.append(spec.anchor + u * spec.radius * rng.uniform(0, 1, (count, 1)) ** (1.0 / n))
    return out[0], out[1]


def _grad_matrix(g: Gradient, X: np.ndarray) -> np.ndarray:
    return np.array([np.atleast_1d(np.asarray(g(x), dtype=float)) for x in X])


def bundle_modulus_audit(spec: BundleSpec, pairs: tuple[np.ndarray, np.ndarray] | None = None, *,
                         count: int = 1000, seed: int = 0, rtol: float = 1e-9,
                         atol: float = 1e-12) -> BundleAudit:
    """Measure the derivative modulus of every coordinate and of the bundle on probe pairs.

    The bundle's deviation at a pair is the largest coordinate deviation (the operator
    norm into the sup-norm target), so its step modulus is the pointwise max of the
    coordinate moduli.  The audit asserts the bundled modulus stays below ``omega``.
    """
    X, Y = pairs if pairs is not None else probe_pairs(spec, count, seed)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape or X.shape[1] != spec.n:
        raise DomainError("probe arrays must both have shape (P, n)")
    dist = np.linalg.norm(X - Y, axis=1)
    keep = dist > 0
    X, Y, dist = X[keep], Y[keep], dist[keep]
    devs = np.array([np.linalg.norm(_grad_matrix(g, X) - _grad_matrix(g, Y), axis=1) for g in spec.grads])
    per = tuple(deviation_envelope(dist, d) for d in devs)
    bundled = deviation_envelope(dist, devs.max(axis=0)) if dist.size else Zero()
    knots = np.asarray(getattr(bundled, "knots", ()), dtype=float)
    measured = np.asarray(getattr(bundled, "values", ()), dtype=float)
    allowed = np.asarray(spec.omega(knots), dtype=float) if knots.size else np.zeros(0)
    bad = measured > allowed * (1 + rtol) + atol
    worst = float(knots[np.argmax(measured - allowed)]) if bad.any() else None
    return BundleAudit(per, bundled, knots, measured, allowed, not bad.any(), worst)


def sin_family(gammas: Sequence[float]) -> tuple[list, list, list]:
    """``f_gamma(x) = sin(gamma x) / gamma**2`` on the line; ``|f_gamma''| <= 1``."""
    labels = [float(g) for g in gammas]
    if any(g == 0 for g in labels):
        raise DomainError("gamma must be non-zero")
    funcs = [lambda x, g=g: float(np.sin(g * x[0]) / g ** 2) for g in labels]
    grads = [lambda x, g=g: np.array([np.cos(g * x[0]) / g]) for g in labels]
    return labels, funcs, grads


def identity_family() -> tuple[list, list, list]:
    return [1], [lambda x: float(x[0])], [lambda x: np.array([1.0])]


def constant_family(values: Sequence[float], n: int = 1) -> tuple[list, list, list]:
    labels = list(range(1, len(values) + 1))
    funcs = [lambda x, v=float(v): v for v in values]
    grads = [lambda x: np.zeros(n) for _ in values]
    return labels, funcs, grads


FAMILIES = {"sin": sin_family, "identity": identity_family, "constant": constant_family}
