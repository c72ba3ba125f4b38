"""Command-line front door: every audit writes deterministic CSV or JSON reports.

Exit status: 0 when every audit passes, 2 when an audit fails (a witness is
printed on stderr), 1 on usage, domain or input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

from . import approx_bound as ab
from . import bundling as bd
from . import report
from . import scalar_cex as sc
from . import vector_cex as vc
from .errors import DomainError, SchemaError, SearchExhausted
from .jets import JetField
from .moduli import Capped, Linear, Modulus, PowerLaw, Table, Zero, modulus_from_dict
from .whitney import Wkom, check_whitney, defect_table, minimal_whitney_modulus

__all__ = ["main", "parse_modulus", "parse_index_list", "threads", "RunConfig", "run"]

EXIT_OK, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- argument helpers ----------------------------------------------------------------

def parse_modulus(text: str) -> Modulus:
    """``zero``, ``linear:M``, ``power:M,alpha``, ``capped:M,cap``, ``table:t=w,...``
    (piecewise linear), ``step:t=w,...`` (step) or a JSON modulus object."""
    s = text.strip()
    if s.startswith("{"):
        try:
            return modulus_from_dict(json.loads(s, parse_constant=_reject))
        except json.JSONDecodeError as exc:
            raise DomainError(f"bad modulus JSON at column {exc.colno}: {exc.msg}") from None
    kind, _, rest = s.partition(":")
    kind = kind.lower()
    try:
        if kind == "zero" and not rest:
            return Zero()
        nums = [_finite(v) for v in rest.split(",")] if kind in ("linear", "power", "capped") else []
        if kind == "linear" and len(nums) == 1:
            return Linear(nums[0])
        if kind == "power" and len(nums) == 2:
            return PowerLaw(nums[0], nums[1])
        if kind == "capped" and len(nums) == 2:
            return Capped(nums[0], nums[1])
        if kind in ("table", "step") and rest:
            pairs = []
            for item in rest.split(","):
                t, _, w = item.partition("=")
                pairs.append((_finite(t), _finite(w)))
            return Table.from_pairs(sorted(pairs), "linear" if kind == "table" else "step")
    except ValueError as exc:
        raise DomainError(f"bad modulus {text!r}: {exc}") from None
    raise DomainError(f"bad modulus {text!r}; expected zero, linear:M, power:M,alpha, capped:M,cap, "
                      "table:t=w,... or step:t=w,...")


def _reject(name: str):
    raise DomainError(f"non-finite number {name} in modulus")


def _finite(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {v!r}")
    return x


def _floats(text: str) -> list[float]:
    try:
        return [_finite(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise DomainError(str(exc)) from None


def parse_index_list(text: str) -> list[int]:
    """``"1-10"``, ``"1,2,5"`` or a mix such as ``"1-3,7"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            lo, sep, hi = part.strip().partition("-")
            if sep:
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(lo))
    except ValueError:
        raise DomainError(f"bad index list {text!r}") from None
    if not out or any(n < 1 for n in out):
        raise DomainError("block indices must be positive")
    return out


def threads() -> int:
    """Worker cap from ``WHITLAB_THREADS`` (default 1)."""
    raw = os.environ.get("WHITLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"WHITLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DomainError("WHITLAB_THREADS must be a positive integer")
    return n


# -- run plumbing --------------------------------------------------------------------

@dataclass
class RunConfig:
    subcommand: str
    seed: int = 0
    tol: float = 1e-9
    quad_order: int = 20
    emit: str = "csv"
    out: str | None = None
    args: argparse.Namespace | None = None


@dataclass
class Outcome:
    """Reports in emission order; the first one goes to stdout when there is no --out."""

    reports: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def table(self, name: str, rows, columns):
        self.reports.append((name, list(rows), tuple(columns)))

    def blob(self, name: str, data: bytes):
        self.reports.append((name, data, None))

    def fail(self, message: str):
        self.failures.append(message)


def _write(cfg: RunConfig, res: Outcome, stdout) -> None:
    ext = "csv" if cfg.emit == "csv" else "json"
    if cfg.out is None:
        for name, body, cols in res.reports:
            if cols is not None:
                stdout.write(report.emit(body, cols, cfg.emit))
                return
        if res.reports:
            stdout.write(res.reports[0][1].decode())
        return
    os.makedirs(cfg.out, exist_ok=True)
    for name, body, cols in res.reports:
        if cols is None:
            path, data = os.path.join(cfg.out, f"{name}.json"), body
        else:
            path, data = os.path.join(cfg.out, f"{name}.{ext}"), report.emit(body, cols, cfg.emit).encode()
        with open(path, "wb") as fh:
            fh.write(data)


def _whitney_row(label: str, omega: Modulus, rep) -> dict:
    w = rep.worst
    return {"condition": label, "modulus": json.dumps(omega.to_dict(), sort_keys=True),
            "passed": rep.passed, "measured_M": rep.measured_M, "pairs": rep.n_pairs,
            "src": None if w is None else w.src, "dst": None if w is None else w.dst,
            "order": None if w is None else w.j, "distance": None if w is None else w.distance,
            "defect": None if w is None else w.defect, "allowance": None if w is None else w.allowance}


WHITNEY_COLUMNS = ("condition", "modulus", "passed", "measured_M", "pairs", "src", "dst", "order",
                   "distance", "defect", "allowance")


def _witness_text(rep) -> str:
    w = rep.worst
    return (f"witness pair ({w.src}, {w.dst}) order {w.j}: defect {w.defect!r} > allowance "
            f"{w.allowance!r} at distance {w.distance!r}")


def _modulus_rows(omega: Modulus) -> list[dict]:
    knots = getattr(omega, "knots", ())
    values = getattr(omega, "values", ())
    return [{"distance": float(t), "omega": float(w)} for t, w in zip(knots, values)]


# -- subcommands ---------------------------------------------------------------------

def cmd_jetcheck(cfg: RunConfig) -> Outcome:
    a = cfg.args
    F = report.load_path(a.field)
    if not isinstance(F, JetField):
        raise SchemaError(f"{a.field} does not hold a jet field")
    omega = parse_modulus(a.modulus)
    tab = defect_table(F)
    rep = check_whitney(F, Wkom(omega), rtol=cfg.tol, table=tab)
    res = Outcome()
    res.table("jetcheck", [_whitney_row(f"W{F.k},omega", omega, rep)], WHITNEY_COLUMNS)
    res.table("jetcheck_minimal", _modulus_rows(minimal_whitney_modulus(F, tab)), ("distance", "omega"))
    if not rep.passed:
        res.fail(_witness_text(rep))
    return res


WELLS_SUMMARY = ("c", "modulus", "applicable", "m", "n_threshold", "n", "profile", "a", "total",
                 "budget_total", "steps_within_budget", "below_c", "hypotheses_met", "contradiction", "reason")
WELLS_STEPS = ("step", "increment", "budget", "axial_derivative")


def cmd_wells(cfg: RunConfig) -> Outcome:
    a = cfg.args
    omega = parse_modulus(a.modulus)
    adm = sc.wells_admissibility(a.c, omega, a.max_m)
    res = Outcome()
    base = {"c": a.c, "modulus": json.dumps(omega.to_dict(), sort_keys=True), "applicable": adm.applicable,
            "m": adm.m, "n_threshold": adm.n_threshold, "profile": a.profile, "reason": adm.reason}
    if not adm.applicable:
        res.table("wells", [base], WELLS_SUMMARY)
        res.table("wells_steps", [], WELLS_STEPS)
        return res
    n = a.n if a.n is not None else max(adm.m, math.ceil(adm.n_threshold))
    inst = sc.WellsInstance(n, a.c, omega, adm.m)
    g, grad = sc.ridge_candidate(n, adm.m, a.c, a.profile)
    tel = sc.wells_telescope_audit(g, grad, inst, a.r)
    row = {**base, "n": n, "a": tel.a, "total": tel.total, "budget_total": tel.budget_total,
           "steps_within_budget": tel.steps_within_budget, "below_c": tel.below_c,
           "hypotheses_met": tel.hypotheses_met, "contradiction": tel.contradiction}
    res.table("wells", [row], WELLS_SUMMARY)
    res.table("wells_steps", tel.rows, WELLS_STEPS)
    if tel.contradiction:
        # hypotheses force total >= c, the budgets force total < c: the measurement is inconsistent
        res.fail(f"every step fits a budget totalling {tel.budget_total!r} < c, yet the chain spans c")
    return res


def cmd_absgap(cfg: RunConfig) -> Outcome:
    a = cfg.args
    inst = ab.AbsGapInstance(a.n, a.eta, a.c, parse_modulus(a.modulus))
    quad = ab.SeparableGauss(cfg.quad_order) if a.quad == "gauss" else ab.MonteCarlo(cfg.seed, a.mc_count)
    cands = ab.candidate_family(inst, a.family, a.count, cfg.seed)
    rep = ab.dominance_audit(inst, cands, quad, seed=cfg.seed)
    res = Outcome()
    res.table("absgap", rep.rows, ab.DominanceReport.COLUMNS)
    if not rep.passed:
        bad = next(r for r in rep.rows if r["verdict"] == "VIOLATION")
        res.fail(f"candidate {bad['candidate']} ({bad['kind']}) falls below the bound: mean square "
                 f"{bad['mean_square']!r} vs {bad['ms_bound']!r}, sup {bad['sup_gap']!r} vs {bad['sup_bound']!r}")
    return res


SCHEDULE_COLUMNS = ("n", "k_n", "eta", "delta", "eps", "c", "lhs", "rhs", "margin", "holds", "beta_holds")


def cmd_schedule(cfg: RunConfig) -> Outcome:
    a = cfg.args
    omega = parse_modulus(a.omega) if a.omega is not None else None
    ks = None if a.k is None else int(a.k)
    res = Outcome()
    try:
        specs = vc.make_schedule(a.kind, parse_index_list(a.ns), k=ks, alpha=a.alpha, r_norm=a.r_norm,
                                 omega=omega, C=a.C, max_k=1 << a.max_k_bits)
    except SearchExhausted as exc:
        res.table("schedule", [], SCHEDULE_COLUMNS)
        res.fail(f"{exc} (largest tested k = {exc.largest_tested})")
        return res
    rows = []
    for s in specs:
        chk = vc.verify_schedule_inequality(s, a.kind)
        rows.append({"n": s.index, "k_n": s.k, "eta": s.eta, "delta": s.delta, "eps": s.eps, "c": s.c,
                     "lhs": chk.lhs, "rhs": chk.rhs, "margin": chk.margin, "holds": chk.holds,
                     "beta_holds": chk.beta_holds})
        if not chk.holds:
            res.fail(f"block {s.index}: inequality fails at k = {s.k} (margin {chk.margin!r})")
    res.table("schedule", rows, SCHEDULE_COLUMNS)
    res.blob("schedule_specs", report.dumps(specs))
    return res


NET_COLUMNS = ("block", "k", "eta", "delta", "eps", "size", "contains_zero", "separated", "maximal",
               "uncovered", "slope", "passed")


def _gap_moduli(spec: vc.BlockSpec, omega_g: Modulus | None, omega_hat: Modulus | None, default: Modulus):
    if spec.kind in vc.KINDS and omega_g is None and omega_hat is None:
        return vc.theorem_moduli(spec)
    g = omega_g if omega_g is not None else default
    return g, omega_hat if omega_hat is not None else g


def cmd_cexgen(cfg: RunConfig) -> Outcome:
    a = cfg.args
    res = Outcome()
    if a.family == "c0":
        res.blob("c0_field", report.dumps(sc.build_c0_field(a.nmax, a.lmax, a.variant)))
        return res
    if a.family == "cone":
        counts = tuple(int(v) for v in _floats(a.counts))
        if len(counts) != 2:
            raise DomainError("--counts takes two integers A,C")
        F = sc.build_cone_field(a.d_param, a.k, counts, cfg.seed, a.n)
        sep = sc.cone_separation_audit(a.d_param, a.n, seed=cfg.seed)
        res.blob("cone_field", report.dumps(F))
        res.table("cone_separation", [{"d": a.d_param, "r_min": sep.r_min, "s_min": sep.s_min,
                                       "bound": sep.bound, "passed": sep.passed}],
                  ("d", "r_min", "s_min", "bound", "passed"))
        if not sep.passed:
            res.fail(f"sampled distance {min(sep.r_min, sep.s_min)!r} below d/3 = {sep.bound!r}")
        return res
    specs = report.load_path(a.specs) if a.specs else vc.desk_blocks(a.blocks, a.eps_ratio)
    if not isinstance(specs, list):
        raise SchemaError(f"{a.specs} does not hold block specs")
    sup_eps = max(s.eps for s in specs)
    whitney_omega = Linear(48 * sup_eps)
    og = parse_modulus(a.omega_g) if a.omega_g else None
    oh = parse_modulus(a.omega_hat) if a.omega_hat else None
    gaps = [vc.extension_gap_verdict(s, *_gap_moduli(s, og, oh, whitney_omega)).row() for s in specs]
    res.table("cexgen_gap", gaps, vc.GapReport.COLUMNS)
    if a.verdict_only:
        return res
    cex = vc.build_block_cex(specs, ball_samples=a.ball_samples, seed=cfg.seed, strategy=a.strategy,
                             workers=threads())
    slopes = vc.block_slopes(cex)
    rows = []
    for b, (s, net) in enumerate(zip(specs, cex.nets)):
        au = vc.net_audit(net, s.eta, 3 * s.delta) if s.delta > 0 else vc.NetAudit(True, True, True, 0, 1)
        rows.append({"block": s.index, "k": s.k, "eta": s.eta, "delta": s.delta, "eps": s.eps,
                     "size": au.size, "contains_zero": au.contains_zero, "separated": au.separated,
                     "maximal": au.maximal, "uncovered": au.uncovered, "slope": slopes[b], "passed": au.passed})
        if not au.passed:
            res.fail(f"block {s.index}: net audit failed ({au.uncovered} uncovered samples)")
    rep = check_whitney(cex.field, Wkom(whitney_omega), rtol=cfg.tol)
    res.table("cexgen_nets", rows, NET_COLUMNS)
    res.table("cexgen_whitney", [_whitney_row("W1,omega", whitney_omega, rep)], WHITNEY_COLUMNS)
    res.blob("block_field", report.dumps(cex.field))
    if not rep.passed:
        res.fail(_witness_text(rep))
    return res


BUNDLE_SUMMARY = ("family", "labels", "K", "M", "radius", "bound", "max_sup", "points", "bound_holds",
                  "modulus_passed")


def cmd_bundle(cfg: RunConfig) -> Outcome:
    a = cfg.args
    if a.family == "sin":
        fam = bd.sin_family(_floats(a.gammas))
    elif a.family == "identity":
        fam = bd.identity_family()
    else:
        fam = bd.constant_family(_floats(a.values))
    spec = bd.BundleSpec.build(*fam, parse_modulus(a.modulus), _floats(a.anchor), a.radius)
    X, Y = bd.probe_pairs(spec, a.samples, cfg.seed)
    evals = [bd.bundle_eval(spec, x) for x in X]
    audit = bd.bundle_modulus_audit(spec, (X, Y), rtol=cfg.tol)
    holds = all(e.holds for e in evals)
    res = Outcome()
    res.table("bundle", audit.rows(), bd.BundleAudit.COLUMNS)
    res.table("bundle_summary", [{"family": a.family, "labels": len(spec.labels), "K": spec.K, "M": spec.M,
                                  "radius": spec.radius, "bound": spec.bound(),
                                  "max_sup": max(e.sup for e in evals), "points": len(evals),
                                  "bound_holds": holds, "modulus_passed": audit.passed}], BUNDLE_SUMMARY)
    if not holds:
        worst = max(evals, key=lambda e: e.sup)
        res.fail(f"sup norm {worst.sup!r} exceeds the bound {worst.bound!r}")
    if not audit.passed:
        res.fail(f"measured derivative modulus exceeds omega at distance {audit.worst_knot!r}")
    return res


COMMANDS = {"jetcheck": cmd_jetcheck, "wells": cmd_wells, "absgap": cmd_absgap, "schedule": cmd_schedule,
            "cexgen": cmd_cexgen, "bundle": cmd_bundle}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every sampled quantity")
    common.add_argument("--tol", type=float, default=1e-9, help="relative tolerance of pass/fail checks")
    common.add_argument("--quad-order", type=int, default=20, help="Gauss-Legendre nodes per panel")
    common.add_argument("--emit", choices=("csv", "json"), default="csv", help="report format")
    common.add_argument("--out", metavar="DIR", help="write every report into DIR instead of stdout")

    p = _Parser(prog="whitlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("jetcheck", parents=[common], help="Whitney check and minimal modulus of a jet field")
    s.add_argument("field", help="jet field JSON file")
    s.add_argument("--modulus", required=True, help="modulus string, e.g. linear:16")

    s = sub.add_parser("wells", parents=[common], help="admissibility and telescoping-chain audit")
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--modulus", default="linear:1")
    s.add_argument("--max-m", type=int, default=1 << 60)
    s.add_argument("--n", type=int, help="ambient dimension (default: ceil of the threshold)")
    s.add_argument("--profile", choices=("smootherstep", "quadratic", "logistic"), default="quadratic")
    s.add_argument("--r", type=float, default=1.5, help="radius of the candidate's domain")

    s = sub.add_parser("absgap", parents=[common], help="dominance audit of the absolute-value gap bound")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--eta", type=float, default=1.0)
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--modulus", default="zero", help="modulus of the instance")
    s.add_argument("--family", choices=("affine", "mollified", "mixed", "best_affine", "target"),
                   default="mixed")
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--quad", choices=("gauss", "mc"), default="gauss")
    s.add_argument("--mc-count", type=int, default=100_000)

    s = sub.add_parser("schedule", parents=[common], help="schedule constants and inequality checks")
    s.add_argument("--kind", choices=vc.KINDS, required=True)
    s.add_argument("--ns", default="1", help="block indices, e.g. 1-10")
    s.add_argument("--k", help="fixed block dimension (default: least satisfying k)")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--r-norm", type=float, default=1.0)
    s.add_argument("--omega", help="modulus for c1om")
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--max-k-bits", type=int, default=200, help="search budget: k up to 2**bits")

    s = sub.add_parser("cexgen", parents=[common], help="build counterexample jet fields")
    s.add_argument("family", choices=("block", "c0", "cone"))
    s.add_argument("--nmax", type=int, default=4)
    s.add_argument("--lmax", type=int, default=6)
    s.add_argument("--variant", choices=("cubic", "exp"), default="cubic")
    s.add_argument("--d-param", type=float, default=0.25)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--counts", default="40,40")
    s.add_argument("--specs", help="block spec JSON (default: built-in small blocks)")
    s.add_argument("--blocks", type=int, default=5)
    s.add_argument("--eps-ratio", type=float, default=8.0)
    s.add_argument("--ball-samples", type=int, default=2)
    s.add_argument("--strategy", choices=("lattice", "random"), default="lattice")
    s.add_argument("--omega-g", help="derivative modulus of the candidate extension")
    s.add_argument("--omega-hat", help="per-axis modulus for the lower bound")
    s.add_argument("--verdict-only", action="store_true", help="skip realizing the blocks")

    s = sub.add_parser("bundle", parents=[common], help="sup-norm bundling audit")
    s.add_argument("--family", choices=("sin", "identity", "constant"), default="sin")
    s.add_argument("--gammas", default="1,2")
    s.add_argument("--values", default="1")
    s.add_argument("--modulus", default="linear:1")
    s.add_argument("--anchor", default="0")
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--samples", type=int, default=1000)
    return p


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    res = COMMANDS[cfg.subcommand](cfg)
    _write(cfg, res, stdout)
    for msg in res.failures:
        stderr.write(f"FAIL: {msg}\n")
    return EXIT_AUDIT if res.failures else EXIT_OK


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        threads()
        if ns.tol < 0 or ns.quad_order < 2:
            raise DomainError("--tol must be non-negative and --quad-order at least 2")
        cfg = RunConfig(ns.subcommand, ns.seed, ns.tol, ns.quad_order, ns.emit, ns.out, ns)
        return run(cfg)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
    except (DomainError, SchemaError) as exc:
        sys.stderr.write(f"error: {exc}\n")
    return EXIT_USAGE
