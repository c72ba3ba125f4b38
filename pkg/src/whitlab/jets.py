"""Jets over scattered points and their construction from functions."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, SchemaError
from .forms import SymForm, symmetrize_tensor

__all__ = [
    "Jet",
    "JetField",
    "Polynomial",
    "jets_from_function",
    "canonical_symmetric",
    "fd_derivative",
]

MAX_K = 3
NORMS = ("l2", "linf")


def canonical_symmetric(t: np.ndarray, order: int) -> np.ndarray:
    """Copy the sorted-index entry of the last ``order`` axes to every permutation.

    The result is exactly symmetric, which makes the sparse serialization lossless.
    """
    t = np.asarray(t, dtype=float)
    if order <= 1:
        return t.copy()
    n = t.shape[-1]
    idx = np.indices((n,) * order).reshape(order, -1)
    srt = np.sort(idx, axis=0)
    lead = t.shape[:-order]
    flat = t.reshape(lead + (-1,))
    lin = np.ravel_multi_index(tuple(srt), (n,) * order)
    return flat[..., lin].reshape(t.shape)


@dataclass(frozen=True)
class Jet:
    """Value and derivative forms at one point.

    ``forms[j - 1][c]`` is the order-``j`` form of target coordinate ``c``.
    """

    point: np.ndarray
    value: np.ndarray
    forms: tuple


@dataclass(frozen=True, eq=False)
class JetField:
    """Jets of order ``k`` at pairwise distinct points.

    ``derivs[j - 1]`` has shape ``(N, d) + (n,) * j``.  ``norm`` selects the
    norm on the source space ("l2", or "linf" for sup-norm geometries).
    """

    k: int
    points: np.ndarray
    values: np.ndarray
    derivs: tuple
    norm: str = "l2"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.k <= MAX_K:
            raise DomainError(f"jet order k must be in 1..{MAX_K}, got {self.k}")
        if self.norm not in NORMS:
            raise DomainError(f"unknown norm {self.norm!r}")
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DomainError("points must be a non-empty (N, n) array")
        N, n = pts.shape
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != N:
            raise DomainError("one value per point is required")
        d = vals.shape[1]
        if len(self.derivs) != self.k:
            raise DomainError(f"need derivative stacks for orders 1..{self.k}")
        derivs = []
        for j, D in enumerate(self.derivs, start=1):
            D = np.array(D, dtype=float)
            if D.shape != (N, d) + (n,) * j:
                raise DomainError(f"order-{j} stack has shape {D.shape}, expected {(N, d) + (n,) * j}")
            derivs.append(canonical_symmetric(D, j))
        for arr in [pts, vals] + derivs:
            if not np.all(np.isfinite(arr)):
                raise DomainError("jet data must be finite")
            arr.setflags(write=False)
        if N > 1 and len({tuple(p) for p in pts.tolist()}) != N:
            raise DomainError("jet points must be pairwise distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "derivs", tuple(derivs))

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def zero_jets(cls, k: int, points, values, norm: str = "l2", meta=None) -> "JetField":
        """Field whose derivative forms all vanish."""
        pts = np.asarray(points, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        N, n = pts.shape
        d = vals.shape[1]
        derivs = tuple(np.zeros((N, d) + (n,) * j) for j in range(1, k + 1))
        return cls(k, pts, vals, derivs, norm, dict(meta or {}))

    @classmethod
    def from_jets(cls, k: int, jets: Sequence[Jet], norm: str = "l2") -> "JetField":
        if not jets:
            raise DomainError("at least one jet is required")
        pts = np.stack([np.asarray(j.point, dtype=float) for j in jets])
        vals = np.stack([np.atleast_1d(np.asarray(j.value, dtype=float)) for j in jets])
        derivs = []
        for order in range(1, k + 1):
            stack = []
            for jet in jets:
                if len(jet.forms) < order:
                    raise DomainError("jet orders must be contiguous from 1 to k")
                stack.append(np.stack([f.tensor for f in jet.forms[order - 1]]))
            derivs.append(np.stack(stack))
        return cls(k, pts, vals, tuple(derivs), norm)

    def jet(self, i: int) -> Jet:
        forms = tuple(
            tuple(SymForm(j, self.n, self.derivs[j - 1][i, c]) for c in range(self.d))
            for j in range(1, self.k + 1)
        )
        return Jet(self.points[i].copy(), self.values[i].copy(), forms)

    def subset(self, idx) -> "JetField":
        idx = np.asarray(idx, dtype=int)
        return JetField(self.k, self.points[idx], self.values[idx],
                        tuple(D[idx] for D in self.derivs), self.norm, dict(self.meta))

    def stack(self, j: int) -> np.ndarray:
        """Order-``j`` data with order 0 meaning the values."""
        return self.values if j == 0 else self.derivs[j - 1]

    def distance(self, a, b) -> np.ndarray:
        diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        if self.norm == "linf":
            return np.max(np.abs(diff), axis=-1)
        return np.linalg.norm(diff, axis=-1)

    def scale(self) -> float:
        """Largest magnitude of any stored datum; sets absolute comparison floors."""
        return max(float(np.max(np.abs(a))) if a.size else 0.0 for a in (self.values,) + self.derivs)

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        jets = []
        for i in range(len(self)):
            entries = []
            for j in range(1, self.k + 1):
                for c in range(self.d):
                    t = self.derivs[j - 1][i, c]
                    coords = [
                        {"index": list(idx), "value": float(t[idx])}
                        for idx in itertools.combinations_with_replacement(range(self.n), j)
                        if t[idx] != 0.0
                    ]
                    if coords:
                        entries.append({"order": j, "target": c, "coords": coords})
            jets.append(entries)
        out = {
            "k": self.k,
            "n": self.n,
            "d": self.d,
            "norm": self.norm,
            "points": self.points.tolist(),
            "values": self.values.tolist(),
            "jets": jets,
        }
        if self.meta:
            out["meta"] = dict(sorted(self.meta.items()))
        return out

    @classmethod
    def from_dict(cls, obj: Mapping) -> "JetField":
        try:
            k, n, d = int(obj["k"]), int(obj["n"]), int(obj["d"])
            pts = np.asarray(obj["points"], dtype=float).reshape(-1, n)
            N = pts.shape[0]
            vals = np.asarray(obj["values"], dtype=float).reshape(N, d)
            derivs = [np.zeros((N, d) + (n,) * j) for j in range(1, k + 1)]
            jets = obj["jets"]
            if len(jets) != N:
                raise SchemaError("one jet entry list per point is required")
            for i, entries in enumerate(jets):
                for e in entries:
                    j, c = int(e["order"]), int(e.get("target", 0))
                    if not (1 <= j <= k and 0 <= c < d):
                        raise SchemaError(f"jet entry order {j}, target {c} out of range")
                    for co in e["coords"]:
                        idx = tuple(int(v) for v in co["index"])
                        if len(idx) != j or any(not 0 <= v < n for v in idx):
                            raise SchemaError(f"bad multi-index {list(idx)} at point {i}")
                        for p in set(itertools.permutations(idx)):
                            derivs[j - 1][(i, c) + p] = float(co["value"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"malformed jet field: {exc}") from None
        return cls(k, pts, vals, tuple(derivs), obj.get("norm", "l2"), dict(obj.get("meta", {})))


class Polynomial:
    """Vector-valued polynomial on R^n.

    ``terms[c]`` maps exponent tuples to coefficients for target coordinate ``c``.
    """

    def __init__(self, n: int, terms: Sequence[Mapping[tuple, float]]):
        if n < 1:
            raise DomainError("polynomial needs n >= 1")
        self.n = n
        clean = []
        for t in terms:
            c = {}
            for alpha, coef in t.items():
                alpha = tuple(int(a) for a in alpha)
                if len(alpha) != n or min(alpha) < 0:
                    raise DomainError(f"bad exponent {alpha} for n = {n}")
                if coef != 0:
                    c[alpha] = c.get(alpha, 0.0) + float(coef)
            clean.append(c)
        if not clean:
            raise DomainError("need at least one target coordinate")
        self.terms = clean

    @property
    def d(self) -> int:
        return len(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(a) for t in self.terms for a in t), default=0)

    def coefficient_scale(self) -> float:
        return max((abs(v) for t in self.terms for v in t.values()), default=0.0)

    @classmethod
    def linear_power(cls, phi, power: int) -> "Polynomial":
        """``x -> phi(x) ** power`` for a linear functional ``phi``."""
        phi = np.asarray(phi, dtype=float)
        n = phi.size
        terms: dict = {}
        for combo in itertools.combinations_with_replacement(range(n), power):
            cnt = Counter(combo)
            alpha = tuple(cnt.get(i, 0) for i in range(n))
            mult = math.factorial(power)
            for a in alpha:
                mult //= math.factorial(a)
            coef = mult * math.prod(phi[i] ** a for i, a in enumerate(alpha))
            if coef != 0:
                terms[alpha] = coef
        return cls(n, [terms])

    @classmethod
    def random(cls, n: int, degree: int, rng: np.random.Generator, d: int = 1, scale: float = 1.0) -> "Polynomial":
        terms = []
        for _ in range(d):
            t = {}
            for deg in range(degree + 1):
                for combo in itertools.combinations_with_replacement(range(n), deg):
                    cnt = Counter(combo)
                    t[tuple(cnt.get(i, 0) for i in range(n))] = scale * float(rng.uniform(-1, 1))
            terms.append(t)
        return cls(n, terms)

    def __call__(self, X) -> np.ndarray:
        return self.derivative(X, 0)

    def derivative(self, X, j: int) -> np.ndarray:
        """``D^j P`` at each row of ``X``: shape ``(N, d) + (n,) * j``.

        A single point ``X`` of shape ``(n,)`` gives shape ``(d,) + (n,) * j``.
        """
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n:
            raise DomainError(f"points of dimension {X.shape[1]} for a polynomial on R^{self.n}")
        N, n = X.shape
        out = np.zeros((N, self.d) + (n,) * j)
        for idx in itertools.combinations_with_replacement(range(n), j):
            beta = np.bincount(np.asarray(idx, dtype=int), minlength=n) if j else np.zeros(n, dtype=int)
            col = np.zeros((N, self.d))
            for c, t in enumerate(self.terms):
                acc = np.zeros(N)
                for alpha, coef in t.items():
                    if any(a < b for a, b in zip(alpha, beta)):
                        continue
                    fac = coef
                    for a, b in zip(alpha, beta):
                        for r in range(b):
                            fac *= a - r
                    acc += fac * np.prod(X ** (np.asarray(alpha) - beta), axis=1)
                col[:, c] = acc
            for p in set(itertools.permutations(idx)):
                out[(slice(None), slice(None)) + p] = col
        return out[0] if single else out

    # oracle protocol used by the symmetric Taylor audit
    def value(self, x) -> np.ndarray:
        return self.derivative(x, 0)


def _contract_all(t: np.ndarray, A: np.ndarray, j: int) -> np.ndarray:
    """Transform the last ``j`` axes (length m) by ``A`` of shape (m, n)."""
    for _ in range(j):
        t = np.tensordot(t, A, axes=([t.ndim - j], [0]))
    return t


def fd_derivative(f: Callable, x: np.ndarray, j: int, h: float) -> np.ndarray:
    """Nested central differences of order ``j`` with one Richardson step.

    Returns ``(estimate, error_proxy)``; shapes ``(d,) + (n,) * j``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size

    def raw(step):
        base = np.atleast_1d(np.asarray(f(x), dtype=float))
        out = np.zeros(base.shape + (n,) * j)
        if j == 0:
            return base
        signs = list(itertools.product((-1.0, 1.0), repeat=j))
        for idx in itertools.combinations_with_replacement(range(n), j):
            acc = np.zeros_like(base)
            for s in signs:
                shift = np.zeros(n)
                for sm, i in zip(s, idx):
                    shift[i] += sm * step
                acc = acc + math.prod(s) * np.atleast_1d(np.asarray(f(x + shift), dtype=float))
            val = acc / (2.0 * step) ** j
            for p in set(itertools.permutations(idx)):
                out[(Ellipsis,) + p] = val
        return out

    coarse = raw(h)
    if j == 0:
        return coarse, np.zeros_like(coarse)
    fine = raw(h / 2)
    est = (4.0 * fine - coarse) / 3.0
    return est, np.abs(fine - coarse) / 3.0


def _fd_step(step: float, j: int) -> float:
    # balances O(h^4) truncation after extrapolation against O(eps / h^j) cancellation
    return step ** (2.0 / (j + 1))


def jets_from_function(f, points, k: int, mode: str = "exact_poly", *, step: float = 1e-4,
                       linear_map=None, norm: str = "l2") -> JetField:
    """Sample jets of ``f`` at ``points``.

    ``mode="exact_poly"`` takes a :class:`Polynomial` and differentiates it
    exactly.  ``mode="finite_difference"`` takes a callable ``R^m -> R^d`` and
    uses nested central differences; ``meta["fd_tolerance"]`` records the
    largest Richardson error estimate.  With ``linear_map`` (shape ``(m, n)``)
    the jets are those of ``f o linear_map`` at the given points of R^n.
    """
    if not 1 <= k <= MAX_K:
        raise DomainError(f"jet order k must be in 1..{MAX_K}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    A = None if linear_map is None else np.atleast_2d(np.asarray(linear_map, dtype=float))
    if A is not None and A.shape[1] != pts.shape[1]:
        raise DomainError("linear map does not accept the given points")
    img = pts if A is None else pts @ A.T
    meta = {}
    if mode == "exact_poly":
        if not isinstance(f, Polynomial):
            raise DomainError("exact_poly mode needs a Polynomial")
        vals = f.derivative(img, 0)
        derivs = [f.derivative(img, j) for j in range(1, k + 1)]
    elif mode == "finite_difference":
        if not step > 0:
            raise DomainError("finite-difference step must be positive")
        vals, derivs, err = [], [[] for _ in range(k)], 0.0
        for x in img:
            vals.append(np.atleast_1d(np.asarray(f(x), dtype=float)))
            for j in range(1, k + 1):
                est, e = fd_derivative(f, x, j, _fd_step(step, j))
                derivs[j - 1].append(est)
                err = max(err, float(np.max(e)) if e.size else 0.0)
        vals = np.stack(vals)
        derivs = [np.stack(D) for D in derivs]
        meta["fd_tolerance"] = err
        meta["fd_step"] = step
    else:
        raise DomainError(f"unknown jet mode {mode!r}")
    if A is not None:
        derivs = [_contract_all(D, A, j) for j, D in enumerate(derivs, start=1)]
    derivs = [symmetrize_tensor(D, j) for j, D in enumerate(derivs, start=1)]
    return JetField(k, pts, vals, tuple(derivs), norm, meta)
