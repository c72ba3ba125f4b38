"""Block counterexamples for vector-valued C^1 extension: schedules, their
inequalities, separated nets and the block jet field.

Desk geometry: every block is an orthogonal Euclidean summand, the embedding
into the target is the identity and the basis constant is 1.  The scalars
``alpha`` and ``r_norm`` stay free so that their product can be swept.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .approx_bound import AbsGapInstance, lower_bound_rhs
from .errors import DomainError, InapplicableBound, SearchExhausted
from .jets import JetField
from .moduli import Linear, Modulus, Zero, modulus_from_dict

__all__ = [
    "KINDS",
    "BlockSpec",
    "make_schedule",
    "InequalityCheck",
    "verify_schedule_inequality",
    "smallest_block_dim",
    "SearchFailure",
    "theorem_moduli",
    "GapReport",
    "extension_gap_verdict",
    "separated_net",
    "net_audit",
    "BlockCex",
    "build_block_cex",
    "block_slopes",
    "DESK_GEOMETRY",
    "desk_blocks",
    "MAX_REALIZED_DIM",
]

KINDS = ("c11loc", "c1om", "c1plus")
MAX_REALIZED_DIM = 64
SQ3_6 = math.sqrt(3) / 6


@dataclass(frozen=True)
class BlockSpec:
    """Constants of one block.  ``lip`` is the Lipschitz budget ``K_n`` of the theorems."""

    index: int
    k: int
    eta: float
    delta: float
    eps: float
    c: float
    alpha: float = 1.0
    r_norm: float = 1.0
    C_suff: float | None = None
    basis_K: float = 1.0
    lip: float | None = None
    kind: str = "manual"
    omega: Modulus | None = None

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("block dimension must be at least 1")
        if not (self.eta > 0 and self.eps > 0 and self.delta >= 0):
            raise DomainError("need eta, eps > 0 and delta >= 0")
        if self.c != self.eps * self.delta:
            raise DomainError("c must equal eps * delta exactly")
        if self.alpha < 1 or self.r_norm < 1 or self.basis_K < 1:
            raise DomainError("alpha, r_norm and the basis constant must be at least 1")

    @classmethod
    def manual(cls, index: int, k: int, eta: float, delta: float, eps: float, **kw) -> "BlockSpec":
        return cls(index, k, eta, delta, eps, eps * delta, **kw)

    @property
    def beta(self) -> float:
        return self.alpha * self.r_norm

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega"] = None if self.omega is None else self.omega.to_dict()
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "BlockSpec":
        obj = dict(obj)
        if obj.get("omega") is not None:
            obj["omega"] = modulus_from_dict(obj["omega"])
        return cls(**obj)


# -- schedules --------------------------------------------------------------------------------

def _c11loc(n, k, alpha, r_norm, K=1.0):
    eps = (alpha * r_norm / math.sqrt(k)) ** 0.125
    lip = 1 / eps
    eta = (1 / k) * eps / (alpha * lip)
    delta = 3 * alpha * lip * eta / eps
    return BlockSpec(n, k, eta, delta, eps, eps * delta, alpha, r_norm, None, K, lip, "c11loc")


def _c1plus(n, k, alpha, r_norm, K=1.0):
    lip = (math.sqrt(k) / (alpha * r_norm)) ** 0.25
    delta = 3 * alpha * lip
    return BlockSpec(n, k, 1.0, delta, 1.0, delta, alpha, r_norm, None, K, lip, "c1plus")


def _c1om(n, k, omega, C, K=1.0):
    lip = float(n)
    eta = 1 / (n * math.sqrt(k))
    delta = 3 * C * lip * omega(eta)
    return BlockSpec(n, k, eta, delta, 1.0, delta, 1.0, C, C, K, lip, "c1om", omega)


@dataclass(frozen=True)
class InequalityCheck:
    holds: bool
    lhs: float
    rhs: float
    margin: float
    beta_lhs: float | None = None
    beta_rhs: float | None = None
    implied_lhs: float | None = None
    implied_rhs: float | None = None

    @property
    def beta_holds(self) -> bool | None:
        return None if self.beta_lhs is None else self.beta_lhs > self.beta_rhs


def verify_schedule_inequality(spec: BlockSpec, kind: str | None = None) -> InequalityCheck:
    """Both sides of the contradiction inequality of the schedule, as displayed.

    The c11loc and c1plus checks also return the equivalent form in
    ``beta = alpha * r_norm``.
    """
    kind = kind or spec.kind
    k, eta, delta, eps, c = spec.k, spec.eta, spec.delta, spec.eps, spec.c
    a, R, K = spec.alpha, spec.r_norm, spec.lip
    if kind == "c11loc":
        lhs = SQ3_6 * math.sqrt(k) * eta * (c - 2 * a * K * eta)
        rhs = 6 * eps * delta ** 2 + 9 * R * K * delta ** 2
        b_l = math.sqrt(3) / 162 * math.sqrt(k)
        b_r = 2 * a / eps ** 2 + 3 * spec.beta / eps ** 4
        return InequalityCheck(lhs > rhs, lhs, rhs, lhs - rhs, b_l, b_r)
    if kind == "c1plus":
        lhs = SQ3_6 * math.sqrt(k) * eta * (c - 2 * a * K)
        rhs = 6 * delta ** 2 + 18 * R * K * delta ** 2
        b_l = math.sqrt(3) / 324 * math.sqrt(k)
        b_r = a * K + 3 * spec.beta * K ** 2
        return InequalityCheck(lhs > rhs, lhs, rhs, lhs - rhs, b_l, b_r)
    if kind == "c1om":
        if spec.omega is None or spec.C_suff is None:
            raise DomainError("c1om check needs omega and C_suff set on the BlockSpec")
        n, C, w = spec.index, spec.C_suff, spec.omega
        inner = w(1 / (n * math.sqrt(k)))
        lhs = SQ3_6 / n
        rhs = 54 * C * n * inner + 9 * C * n * w(9 * C * n * inner)
        # the implied gap comparison, evaluated as the verdict evaluates it; near the
        # least k the two agree only up to rounding, so both are required.  A block
        # with c = 0 (omega vanishing at eta) carries no gap, and the display decides.
        upper, lower = _gap_sides(spec, *theorem_moduli(spec))
        implied = spec.c == 0 or (lower is not None and lower > upper)
        return InequalityCheck(lhs > rhs and implied, lhs, rhs, lhs - rhs,
                               implied_lhs=lower, implied_rhs=upper)
    raise DomainError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class SearchFailure:
    index: int
    largest_tested: int
    reason: str


def _spec_for(kind, n, k, alpha, r_norm, omega, C):
    if kind == "c11loc":
        return _c11loc(n, k, alpha, r_norm)
    if kind == "c1plus":
        return _c1plus(n, k, alpha, r_norm)
    return _c1om(n, k, omega, C)


def smallest_block_dim(kind: str, n: int = 1, *, alpha: float = 1.0, r_norm: float = 1.0,
                       omega: Modulus | None = None, C: float = 1.0, max_k: int = 1 << 200) -> int | SearchFailure:
    """Least ``k`` with the schedule inequality holding, by doubling then bisection.

    The inequality is eventually monotone in ``k``; the bisection assumes this
    between the last failing power of two and the first passing one.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown schedule kind {kind!r}")

    def holds(k):
        return verify_schedule_inequality(_spec_for(kind, n, k, alpha, r_norm, omega, C), kind).holds

    if holds(1):
        return 1
    hi = 2
    while not holds(hi):
        if hi >= max_k:
            return SearchFailure(n, hi, f"inequality fails for every tested k up to {hi}")
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


def make_schedule(kind: str, ns: Sequence[int], *, k: Sequence[int] | int | None = None, alpha: float = 1.0,
                  r_norm: float = 1.0, omega: Modulus | None = None, C: float = 1.0,
                  max_k: int = 1 << 200) -> list[BlockSpec]:
    """Block constants for each index in ``ns``.

    ``k`` fixes the block dimensions; when omitted each one is the least ``k``
    satisfying the schedule inequality.  ``c1om`` needs ``omega`` and ``C >= 1``.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown schedule kind {kind!r}")
    if kind == "c1om":
        if omega is None:
            raise DomainError("c1om schedule needs a modulus")
        if C < 1:
            raise DomainError("C bounds ||R_n|| >= 1, so C >= 1")
    ks = [k] * len(ns) if isinstance(k, (int, np.integer)) else k
    out = []
    for pos, n in enumerate(ns):
        if ks is None:
            kn = smallest_block_dim(kind, n, alpha=alpha, r_norm=r_norm, omega=omega, C=C, max_k=max_k)
            if isinstance(kn, SearchFailure):
                raise SearchExhausted(f"block {n}: {kn.reason}", kn.largest_tested)
        else:
            kn = int(ks[pos])
        out.append(_spec_for(kind, n, kn, alpha, r_norm, omega, C))
    return out


def theorem_moduli(spec: BlockSpec) -> tuple[Modulus, Modulus]:
    """``(omega_g, omega_hat)`` of the shape used in the contradiction arguments."""
    K = spec.lip
    if spec.kind == "c11loc":
        return Linear(K), Linear(spec.alpha * K)
    if spec.kind == "c1plus":
        return Linear(2 * K), Linear(spec.alpha * K)
    if spec.kind == "c1om":
        return spec.omega.scaled(K), spec.omega.scaled(spec.C_suff * K)
    raise DomainError("theorem moduli exist only for scheduled blocks")


@dataclass(frozen=True)
class GapReport:
    index: int
    k: int
    eta: float
    delta: float
    eps: float
    c: float
    upper: float
    lower: float
    verdict: str
    margin: float
    witness: dict = field(default_factory=dict)

    COLUMNS = ("n", "k_n", "eta", "delta", "eps", "c", "upper", "lower", "verdict", "margin")

    def row(self) -> dict:
        return {"n": self.index, "k_n": self.k, "eta": self.eta, "delta": self.delta, "eps": self.eps,
                "c": self.c, "upper": self.upper, "lower": self.lower, "verdict": self.verdict,
                "margin": self.margin}


def extension_gap_verdict(spec: BlockSpec, omega_g: Modulus, omega_hat: Modulus) -> GapReport:
    """Compare the extension upper bound with the approximation lower bound.

    ``contradiction`` iff lower > upper; an inapplicable lower bound gives
    ``inconclusive`` and so does a non-contradicting comparison.
    """
    upper, lower = _gap_sides(spec, omega_g, omega_hat)
    wit = {"omega_g_3delta": omega_g(3 * spec.delta), "omega_hat_eta": omega_hat(spec.eta)}
    if lower is None:
        wit["reason"] = "lower bound inapplicable: omega_hat(eta) > c/2 or c = 0"
        return GapReport(spec.index, spec.k, spec.eta, spec.delta, spec.eps, spec.c, upper, math.nan,
                         "inconclusive", math.nan, wit)
    verdict = "contradiction" if lower > upper else "inconclusive"
    return GapReport(spec.index, spec.k, spec.eta, spec.delta, spec.eps, spec.c, upper, lower,
                     verdict, lower - upper, wit)


def _gap_sides(spec: BlockSpec, omega_g: Modulus, omega_hat: Modulus) -> tuple[float, float | None]:
    """Upper bound on the extension's distance and the approximation lower bound (None if inapplicable)."""
    upper = 6 * spec.eps * spec.delta ** 2 + 3 * spec.r_norm * spec.delta * omega_g(3 * spec.delta)
    if not spec.c > 0:
        return upper, None
    try:
        lb = lower_bound_rhs(AbsGapInstance(spec.k, spec.eta, spec.c), omega_hat)
    except InapplicableBound:
        return upper, None
    return upper, lb.sup_bound


# -- separated nets -------------------------------------------------------------------------------

def _exact_d2(x, y) -> Fraction:
    return sum((Fraction(float(a)) - Fraction(float(b))) ** 2 for a, b in zip(x, y))


class _Net:
    def __init__(self, k: int, sep: float):
        self.sep = sep
        self.sep2 = sep * sep
        self.sep2_exact = Fraction(sep) ** 2
        self.pts = np.zeros((1, k))

    def admissible(self, x) -> bool:
        d2 = np.sum((self.pts - x) ** 2, axis=1)
        lo = self.sep2 * (1 - 1e-12)
        if np.any(d2 < lo):
            return False
        close = np.nonzero(d2 <= self.sep2 * (1 + 1e-12))[0]
        return all(_exact_d2(self.pts[i], x) >= self.sep2_exact for i in close)

    def add_from(self, X) -> int:
        """Greedy pass over ``X`` in order; survivors are pruned after each acceptance."""
        X = np.asarray(X, dtype=float)
        X = X[self.far_mask(X)]
        added = 0
        while len(X):
            x, X = X[0], X[1:]
            if self.admissible(x):
                self.pts = np.vstack([self.pts, x[None, :]])
                added += 1
                X = X[np.sum((X - x) ** 2, axis=1) >= self.sep2 * (1 - 1e-12)]
        return added

    def far_mask(self, X) -> np.ndarray:
        """Prefilter: False only for points certainly closer than ``sep`` to the net."""
        # Gram form; its rounding is far inside the 1e-9 margin for cube-sized data
        d2 = np.sum(X * X, axis=1)[:, None] + np.sum(self.pts ** 2, axis=1)[None, :] - 2 * X @ self.pts.T
        return np.min(d2, axis=1) >= self.sep2 * (1 - 1e-9)


def _lattice(k: int, eta: float, step: float, limit: int):
    m = int(math.floor(eta / step + 1e-12))
    if (2 * m + 1) ** k > limit:
        return None
    ticks = sorted(range(-m, m + 1), key=lambda i: (abs(i), -i))
    pts = np.array(list(itertools.product(ticks, repeat=k)), dtype=float) * step
    # lattice-major order: 0 first, then outward shells, ties lexicographic
    key = np.max(np.abs(pts), axis=1)
    return pts[np.argsort(key, kind="stable")]


def separated_net(k: int, eta: float, sep: float, strategy: str = "lattice", *, seed: int = 0,
                  batch: int = 50_000, quiet_rounds: int = 8, lattice_limit: int = 50_000) -> np.ndarray:
    """Greedy ``sep``-separated subset of ``[-eta, eta]^k`` containing 0.

    Candidates come from a lattice of step ``sep`` (``"lattice"``, when small
    enough) and then from seeded uniform batches until ``quiet_rounds``
    consecutive batches add nothing, which is maximality in the sampled sense.
    """
    if not sep > 0 or not eta > 0 or k < 1:
        raise DomainError("need sep > 0, eta > 0 and k >= 1")
    if strategy not in ("lattice", "random"):
        raise DomainError(f"unknown net strategy {strategy!r}")
    net = _Net(k, sep)
    if sep > 2 * eta * math.sqrt(k):
        return net.pts
    if strategy == "lattice":
        L = _lattice(k, eta, sep, lattice_limit)
        if L is not None:
            net.add_from(L[1:])
    rng = np.random.default_rng(seed)
    quiet = 0
    while quiet < quiet_rounds:
        X = rng.uniform(-eta, eta, (batch, k))
        if net.add_from(X):
            quiet = 0
        else:
            quiet += 1
    return net.pts


@dataclass(frozen=True)
class NetAudit:
    contains_zero: bool
    separated: bool
    maximal: bool
    uncovered: int
    size: int

    @property
    def passed(self) -> bool:
        return self.contains_zero and self.separated and self.maximal


def net_audit(net: np.ndarray, eta: float, sep: float, samples: int = 10_000, seed: int = 12345) -> NetAudit:
    """Exact pairwise separation, membership of 0 and sampled maximality."""
    net = np.asarray(net, dtype=float)
    k = net.shape[1]
    zero = bool(np.any(np.all(net == 0.0, axis=1)))
    s2 = Fraction(sep) ** 2
    sep_ok = all(_exact_d2(net[i], net[j]) >= s2 for i in range(len(net)) for j in range(i + 1, len(net)))
    X = np.random.default_rng(seed).uniform(-eta, eta, (samples, k))
    d = np.array([np.min(np.linalg.norm(net - x, axis=1)) for x in X])
    unc = int(np.sum(d >= sep))
    return NetAudit(zero, sep_ok, unc == 0, unc, len(net))


# -- block counterexample ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockCex:
    field: JetField
    specs: tuple
    nets: tuple
    offsets: tuple
    block_of: np.ndarray
    center_of: np.ndarray
    lipschitz: float

    def f(self, x) -> np.ndarray:
        """Value at a point of the constructed set."""
        x = np.asarray(x, dtype=float)
        hit = np.nonzero(np.all(self.field.points == x, axis=1))[0]
        if hit.size == 0:
            raise DomainError("point is not in the constructed set")
        return self.field.values[hit[0]].copy()


def _ball_samples(rng, count, k, radius):
    u = rng.standard_normal((count, k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * radius * rng.uniform(0, 1, (count, 1)) ** (1.0 / k)


def _block_net(s: BlockSpec, strategy: str, seed: int) -> np.ndarray:
    if s.delta > 0:
        return separated_net(s.k, s.eta, 3 * s.delta, strategy, seed=seed)
    return np.zeros((1, s.k))


def build_block_cex(specs: Sequence[BlockSpec], *, ball_samples: int = 2, seed: int = 0,
                    strategy: str = "lattice", workers: int = 1) -> BlockCex:
    """Orthogonal blocks; on each ball ``B(z, min(delta, 1))`` around a net point
    ``z`` the value is ``c_n (|z_1|, ..., |z_k|)`` placed in the block's target
    coordinates.  Jets of order 1 vanish."""
    specs = tuple(specs)
    if not specs:
        raise DomainError("need at least one block")
    if any(s.k > MAX_REALIZED_DIM for s in specs):
        raise DomainError(f"blocks above dimension {MAX_REALIZED_DIM} are not realized")
    dims = [s.k for s in specs]
    offsets = tuple(int(v) for v in np.cumsum([0] + dims[:-1]))
    D = sum(dims)
    rng = np.random.default_rng(seed)
    pts, vals, block_of, center_of = [np.zeros(D)], [np.zeros(D)], [-1], [-1]
    net_seeds = [seed + 7919 * (b + 1) for b in range(len(specs))]
    # nets are independent per block; results come back in block order either way
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        nets = list(pool.map(_block_net, specs, [strategy] * len(specs), net_seeds))
    for b, (s, off, net) in enumerate(zip(specs, offsets, nets)):
        rad = min(s.delta, 1.0)
        s2 = Fraction(s.delta) ** 2
        for i in range(len(net)):
            for j in range(i + 1, len(net)):
                # balls of radius delta are delta apart when centres are 3 delta apart
                if _exact_d2(net[i], net[j]) < 9 * s2:
                    raise DomainError("net points closer than 3 delta: balls would overlap")
        for zi, z in enumerate(net):
            val = np.zeros(D)
            val[off:off + s.k] = s.c * np.abs(z)
            local = [z] if np.any(z) else []
            if rad > 0:
                local += list(z + _ball_samples(rng, ball_samples, s.k, rad))
            for p in local:
                x = np.zeros(D)
                x[off:off + s.k] = p
                pts.append(x)
                vals.append(val)
                block_of.append(b)
                center_of.append(zi)
    P, V = np.array(pts), np.array(vals)
    field_ = JetField.zero_jets(1, P, V, meta={"family": "block", "blocks": len(specs), "seed": seed})
    dP, dV = pdist(P), pdist(V)
    lip = float(np.max(dV / dP)) if dP.size else 0.0
    return BlockCex(field_, specs, tuple(nets), offsets, np.array(block_of), np.array(center_of), lip)


def block_slopes(cex: BlockCex) -> list[float]:
    """Slope of the minimal first-order modulus inside each block (pairs through 0 included):
    the largest ``||f(y) - f(x)|| / ||y - x||**2``."""
    F = cex.field
    out = []
    for b in range(len(cex.specs)):
        idx = np.nonzero((cex.block_of == b) | (cex.block_of == -1))[0]
        P, V = F.points[idx], F.values[idx]
        dP, dV = pdist(P), pdist(V)
        out.append(float(np.max(dV / dP ** 2)) if dP.size else 0.0)
    return out


DESK_GEOMETRY = ((1, 1.0, 1 / 3), (2, 0.5, 0.1), (4, 0.4, 0.12), (8, 0.3, 0.2), (16, 0.25, 0.25))


def desk_blocks(count: int = 5, eps_ratio: float = 8.0) -> list[BlockSpec]:
    """Small realizable blocks (k = 1, 2, 4, 8, 16) with ``eps_n = eps_ratio**-(n-1)``."""
    if not 1 <= count <= len(DESK_GEOMETRY):
        raise DomainError(f"count must be in 1..{len(DESK_GEOMETRY)}")
    return [BlockSpec.manual(i + 1, k, eta, delta, eps_ratio ** -i)
            for i, (k, eta, delta) in enumerate(DESK_GEOMETRY[:count])]
