"""Symmetric multilinear forms of order 0..3 on R^n.

A :class:`SymForm` stores the dense symmetric coefficient tensor
``T[i1, ..., ij] = M(e_i1, ..., e_ij)``; the sparse representation keyed by
sorted multi-indices is used for serialization.

Operator norms are taken with respect to the Euclidean norm on the
arguments.  For symmetric forms on a Hilbert space the multilinear norm
equals ``sup |M(x, ..., x)|`` over the unit sphere, which is what the ascent
routine maximizes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError

__all__ = [
    "SymForm",
    "OpNorm",
    "form_apply",
    "partial_apply",
    "form_opnorm",
    "symmetrize_tensor",
    "batch_opnorm",
]

MAX_ORDER = 3


def symmetrize_tensor(t: np.ndarray, order: int | None = None) -> np.ndarray:
    """Average ``t`` over permutations of its last ``order`` axes."""
    t = np.asarray(t, dtype=float)
    if order is None:
        order = t.ndim
    if order <= 1:
        return t.copy()
    lead = t.ndim - order
    acc = np.zeros_like(t)
    perms = list(itertools.permutations(range(order)))
    for p in perms:
        acc += np.transpose(t, tuple(range(lead)) + tuple(lead + q for q in p))
    return acc / len(perms)


@dataclass(frozen=True, eq=False)
class SymForm:
    order: int
    dim: int
    tensor: np.ndarray

    def __post_init__(self):
        if not (0 <= self.order <= MAX_ORDER):
            raise DomainError(f"form order must be in 0..{MAX_ORDER}, got {self.order}")
        if self.dim < 1:
            raise DomainError("form dimension must be >= 1")
        t = np.array(self.tensor, dtype=float)
        if t.shape != (self.dim,) * self.order:
            raise DomainError(f"tensor shape {t.shape} does not match order {self.order}, dim {self.dim}")
        if not np.all(np.isfinite(t)):
            raise DomainError("form coefficients must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @classmethod
    def zero(cls, order: int, dim: int) -> "SymForm":
        return cls(order, dim, np.zeros((dim,) * order))

    @classmethod
    def from_tensor(cls, tensor, symmetrize: bool = True) -> "SymForm":
        t = np.asarray(tensor, dtype=float)
        dim = t.shape[0] if t.ndim else 1
        return cls(t.ndim, dim, symmetrize_tensor(t) if symmetrize else t)

    @classmethod
    def from_coefficients(cls, order: int, dim: int, coeffs: Mapping[tuple, float]) -> "SymForm":
        """Build from ``{sorted multi-index: M(e_i1, ..., e_ij)}``; indices are 0-based."""
        t = np.zeros((dim,) * order)
        for idx, val in coeffs.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != order or any(not 0 <= i < dim for i in idx):
                raise DomainError(f"bad multi-index {idx} for order {order}, dim {dim}")
            for p in set(itertools.permutations(idx)):
                t[p] = val
        return cls(order, dim, t)

    @classmethod
    def rank_one(cls, u, order: int) -> "SymForm":
        u = np.asarray(u, dtype=float)
        t = np.ones(())
        for _ in range(order):
            t = np.multiply.outer(t, u)
        return cls(order, u.size, t)

    def coefficients(self) -> dict[tuple, float]:
        """Sparse ``{sorted multi-index: value}`` of the non-zero entries."""
        out = {}
        for idx in itertools.combinations_with_replacement(range(self.dim), self.order):
            v = float(self.tensor[idx]) if self.order else float(self.tensor)
            if v != 0.0:
                out[idx] = v
        return out

    def __call__(self, *args) -> float:
        return form_apply(self, *args)

    def partial(self, u, l: int) -> "SymForm":
        return partial_apply(self, u, l)

    def __sub__(self, other: "SymForm") -> "SymForm":
        _check_compatible(self, other)
        return SymForm(self.order, self.dim, self.tensor - other.tensor)

    def __add__(self, other: "SymForm") -> "SymForm":
        _check_compatible(self, other)
        return SymForm(self.order, self.dim, self.tensor + other.tensor)

    def __mul__(self, s: float) -> "SymForm":
        return SymForm(self.order, self.dim, self.tensor * float(s))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SymForm):
            return NotImplemented
        return (self.order, self.dim) == (other.order, other.dim) and np.array_equal(self.tensor, other.tensor)

    def __repr__(self):
        return f"SymForm(order={self.order}, dim={self.dim}, coefficients={self.coefficients()})"


def _check_compatible(a: SymForm, b: SymForm):
    if (a.order, a.dim) != (b.order, b.dim):
        raise DomainError("forms of different order or dimension")


def form_apply(M: SymForm, *args) -> float:
    """``M(h_1, ..., h_j)``."""
    if len(args) != M.order:
        raise DomainError(f"form of order {M.order} applied to {len(args)} arguments")
    t = M.tensor
    for h in args:
        h = np.asarray(h, dtype=float)
        if h.shape != (M.dim,):
            raise DomainError(f"argument of shape {h.shape} for a form on R^{M.dim}")
        t = np.tensordot(h, t, axes=(0, 0))
    return float(t)


def partial_apply(M: SymForm, u, l: int) -> SymForm:
    """The form ``M(u, ..., u, ., ..., .)`` of order ``j - l`` (``u`` repeated ``l`` times)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (M.dim,):
        raise DomainError(f"vector of shape {u.shape} for a form on R^{M.dim}")
    if not 0 <= l <= M.order:
        raise DomainError(f"cannot fix {l} arguments of a form of order {M.order}")
    t = M.tensor
    for _ in range(l):
        t = np.tensordot(u, t, axes=(0, 0))
    return SymForm(M.order - l, M.dim, t)


@dataclass(frozen=True)
class OpNorm:
    value: float
    lower: float
    method: str


def _grid_sphere(n: int, resolution: float):
    if n == 1:
        return np.array([[1.0]])
    if n == 2:
        th = np.arange(0.0, math.pi, resolution)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        # half sphere suffices for odd and even forms alike (|M(-x,..)| = |M(x,..)|)
        th = np.arange(0.0, math.pi / 2 + resolution, resolution)
        ph = np.arange(0.0, 2 * math.pi, resolution)
        T, P = np.meshgrid(th, ph, indexing="ij")
        return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    raise DomainError("dense grid search is limited to n <= 3")


def _poly_values(t: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``M(x, ..., x)`` for each row of ``X``."""
    out = t
    order = t.ndim
    if order == 0:
        return np.full(X.shape[0], float(t))
    out = np.einsum("...i,ni->n...", t, X) if order >= 1 else t
    for _ in range(order - 1):
        out = np.einsum("n...i,ni->n...", out, X)
    return out


def _grid_norm(t: np.ndarray, resolution: float, chunk: int = 200_000) -> float:
    n = t.shape[0]
    X = _grid_sphere(n, resolution)
    best = 0.0
    for s in range(0, X.shape[0], chunk):
        best = max(best, float(np.max(np.abs(_poly_values(t, X[s:s + chunk])))))
    return best


def form_opnorm(M: SymForm, method: str = "auto", *, seed: int = 0, restarts: int = 24,
                tol: float = 1e-12, resolution: float = 1e-3) -> OpNorm:
    """Euclidean operator norm of a symmetric form.

    ``method``:
      * ``"exact"`` -- eigenvalues for order <= 2, dense grid for order 3 with n <= 3;
      * ``"ascent"`` -- shifted power ascent with seeded restarts; ``lower`` is the
        value actually attained at a unit vector;
      * ``"grid"`` -- dense sphere grid at the given angular resolution (n <= 3);
      * ``"auto"`` -- exact when order <= 2, ascent otherwise.
    """
    if method not in ("auto", "exact", "ascent", "grid"):
        raise DomainError(f"unknown norm method {method!r}")
    t = M.tensor
    if M.order <= 2 and method in ("auto", "exact", "ascent"):
        v = float(batch_opnorm(t[None], M.order)[0])
        return OpNorm(v, v, "exact")
    if method == "grid" or (method == "exact" and M.order == 3):
        if M.dim > 3:
            raise DomainError("exact order-3 norms are only available for n <= 3")
        v = _grid_norm(t, resolution)
        return OpNorm(v, v, "grid")
    v = float(batch_opnorm(t[None], M.order, seed=seed, restarts=restarts, tol=tol)[0])
    return OpNorm(v, v, "ascent")


def batch_opnorm(T: np.ndarray, order: int, *, seed: int = 0, restarts: int = 12,
                 tol: float = 1e-13, max_iter: int = 500) -> np.ndarray:
    """Operator norms of a stack of symmetric tensors of shape ``(B,) + (n,) * order``."""
    T = np.asarray(T, dtype=float)
    B = T.shape[0]
    if order == 0:
        return np.abs(T.reshape(B))
    if order == 1:
        return np.linalg.norm(T, axis=1)
    if order == 2:
        if B == 0:
            return np.zeros(0)
        ev = np.linalg.eigvalsh(T)
        return np.max(np.abs(ev), axis=1)
    if order != 3:
        raise DomainError(f"order {order} not supported")
    return _ascent3(T, seed=seed, restarts=restarts, tol=tol, max_iter=max_iter)


def _cubic(T, X):
    return np.einsum("bijk,bsi,bsj,bsk->bs", T, X, X, X)


def _ascent3(T: np.ndarray, *, seed: int, restarts: int, tol: float, max_iter: int,
             power_steps: int = 60, newton_steps: int = 8) -> np.ndarray:
    B, n = T.shape[0], T.shape[1]
    out = np.zeros(B)
    fro = np.sqrt(np.einsum("bijk,bijk->b", T, T))
    live = np.nonzero(fro > 0)[0]
    if live.size == 0:
        return out
    T = T[live]
    fro = fro[live]
    rng = np.random.default_rng(seed)
    # starts: leading left singular vector of the mode-1 unfolding, plus seeded random directions
    unf = T.reshape(T.shape[0], n, n * n)
    u, _, _ = np.linalg.svd(unf, full_matrices=False)
    starts = [u[:, :, i] for i in range(min(n, 2))]
    starts += [np.broadcast_to(e, (T.shape[0], n)) for e in np.eye(n)]
    for _ in range(max(restarts - len(starts), 0)):
        g = rng.standard_normal(n)
        starts.append(np.broadcast_to(g / np.linalg.norm(g), (T.shape[0], n)))
    X = np.stack(starts, axis=1)  # (B, S, n)
    # odd order: the max of M(x,x,x) over the sphere equals max |M(x,x,x)|; orient starts uphill
    val = _cubic(T, X)
    X = X * np.where(val < 0, -1.0, 1.0)[..., None]
    best = np.abs(val)
    shift = 2.0 * fro[:, None, None]  # shifted power map is monotone for this shift
    prev = best.copy()
    for _ in range(min(power_steps, max_iter)):
        G = np.einsum("bijk,bsj,bsk->bsi", T, X, X) + shift * X
        X = G / np.linalg.norm(G, axis=-1, keepdims=True)
        cur = _cubic(T, X)
        best = np.maximum(best, cur)
        if np.all(np.abs(cur - prev) <= tol * fro[:, None]):
            break
        prev = cur
    # Newton polishing on the sphere; every accepted iterate is a unit vector, so the
    # values stay attained lower bounds
    eye = np.eye(n)
    for _ in range(newton_steps):
        lam = _cubic(T, X)
        Tx = np.einsum("bijk,bsk->bsij", T, X)
        grad = np.einsum("bsij,bsj->bsi", Tx, X) - lam[..., None] * X
        H = 2.0 * Tx - lam[..., None, None] * eye
        A = np.zeros(X.shape[:2] + (n + 1, n + 1))
        A[..., :n, :n] = H
        A[..., :n, n] = X
        A[..., n, :n] = X
        rhs = np.concatenate([-grad, np.zeros(X.shape[:2] + (1,))], axis=-1)
        with np.errstate(all="ignore"):
            try:
                step = np.linalg.solve(A, rhs[..., None])[..., :n, 0]
            except np.linalg.LinAlgError:
                break
            Y = X + step
            Y = Y / np.linalg.norm(Y, axis=-1, keepdims=True)
        ok = np.all(np.isfinite(Y), axis=-1)
        Y = np.where(ok[..., None], Y, X)
        newval = _cubic(T, Y)
        better = newval > lam
        X = np.where(better[..., None], Y, X)
        best = np.maximum(best, np.where(better, newval, lam))
    out[live] = np.max(best, axis=1)
    return out


def vertex_opnorm(t: np.ndarray, max_vertices: int = 1 << 20) -> float:
    """Multilinear norm for the sup-norm on the arguments: the maximum over cube vertices."""
    order = t.ndim
    if order == 0:
        return abs(float(t))
    n = t.shape[0]
    if not np.any(t):
        return 0.0
    if order == 1:
        return float(np.sum(np.abs(t)))
    if 2 ** (n * (order - 1)) > max_vertices:
        raise DomainError("vertex enumeration too large for this form")
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    # last argument handled in closed form: sup over the cube of a linear functional is its l1 norm
    if order == 2:
        return float(np.max(np.sum(np.abs(signs @ t), axis=1)))
    best = 0.0
    for s in signs:
        m = np.tensordot(s, t, axes=(0, 0))
        best = max(best, float(np.max(np.sum(np.abs(signs @ m), axis=1))))
    return best


def iter_multi_indices(dim: int, order: int) -> Iterable[tuple]:
    return itertools.combinations_with_replacement(range(dim), order)
