"""End-to-end checks of the zero-gap duality principle at a primal critical point.

Given a critical point ``u0`` of J, the dual pair is built from the
extremality relations

    v0 = alpha (u0^2 - beta),     v1 = -gamma Lap u0 + K u0 - f,

and every link of the chain ``J(u0) = J1*(v1) = J*(v1, v0)`` is measured,
together with the feasibility and positivity hypotheses that make the
chain valid. Failures are recorded in the report, never raised.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dual import (
    DualPair,
    check_B_star,
    check_C_star,
    concavity_certificate,
    eval_F_star,
    eval_G_star,
    eval_J1_star,
    eval_J2_star,
    grad_J1_star,
    lambda_branch_check,
    recover_u,
    stationarity_residual,
    v0_of_v1,
)
from .errors import GLDualError
from .grid import Grid, inner, l2_norm, laplacian, sup_norm
from .linalg import solve_spd
from .model import ModelParams, check_A_plus, eval_F, eval_G, eval_J, primal_gradient

__all__ = [
    "Check",
    "DualityReport",
    "ProbeReport",
    "Tolerances",
    "dual_pair_from_primal",
    "cross_expression_residual",
    "legendre_identities",
    "u_tilde_proxy",
    "duality_gap",
    "convexity_probe",
    "fmt",
]


def fmt(x) -> str:
    """Render a value for text artifacts; floats keep 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


@dataclass(frozen=True)
class Tolerances:
    stationarity: float = 1e-10
    relation: float = 1e-9
    identity: float = 1e-8
    gap: float = 1e-8
    dual_gradient: float = 1e-7
    inner: float = 1e-10
    proxy: float = 1e-9


@dataclass
class Check:
    name: str
    value: float
    residual: float
    tolerance: float
    passed: bool
    kind: str = "identity"

    def row(self) -> list[str]:
        return [self.name, fmt(self.value), fmt(self.residual), fmt(self.tolerance),
                fmt(self.passed)]


def dual_pair_from_primal(p: ModelParams, g: Grid, u0) -> DualPair:
    """Dual pair generated by ``u0`` through the extremality relations."""
    u0 = np.asarray(u0, dtype=float)
    v0 = p.alpha * (u0**2 - p.beta)
    v1 = laplacian(g, p.gamma, p.K) @ u0 - p.source(g)
    return DualPair.checked(p, v1, v0)


def cross_expression_residual(p: ModelParams, g: Grid, u0, pair: DualPair) -> float:
    """``||v1 - (K u0 - 2 v0 u0)||``; equals the primal gradient norm when ``v0`` is built from ``u0``."""
    u0 = np.asarray(u0, dtype=float)
    return l2_norm(g, pair.v1 - (p.K * u0 - 2.0 * pair.v0 * u0))


def legendre_identities(p: ModelParams, g: Grid, u0, pair: DualPair) -> tuple[float, float]:
    """Absolute residuals of the two Fenchel equalities at ``(u0, pair)``.

    ``F*(v1) = <u0, v1> - F(u0)`` and ``G*(v1, v0) = <u0, v1> - G(u0, 0)``.
    """
    c = inner(g, u0, pair.v1)
    rF = abs(eval_F_star(p, g, pair.v1) - (c - eval_F(p, g, u0)))
    rG = abs(eval_G_star(p, g, pair.v1, pair.v0) - (c - eval_G(p, g, u0)))
    return rF, rG


def u_tilde_proxy(p: ModelParams, g: Grid, u0, pair: DualPair,
                  tol: float = 1e-9) -> bool:
    """Interiority proxy for the set where box-restricting v1 changes nothing.

    True iff ``||v1||_inf < K2 - tol``; then the box-constrained and
    unconstrained inner problems share the stationary point ``v1``.
    """
    return sup_norm(pair.v1) < p.K2 - tol


@dataclass
class DualityReport:
    params: dict
    dim: int
    n: int
    J_primal: float
    J_dual: float
    J1_dual: float
    gap_abs: float
    gap_rel: float
    gap1_abs: float
    gap1_rel: float
    lambda_min: float
    in_A_plus: bool
    in_A_plus_strict: bool
    in_B_star: bool
    in_C_star: bool
    lambda_zero_branch: bool
    u_tilde_proxy: bool
    B_margin: float
    C_margin: float
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def memberships(self) -> dict[str, bool]:
        return {
            "in_A_plus_strict": self.in_A_plus_strict,
            "in_B_star": self.in_B_star,
            "in_C_star": self.in_C_star,
            "u_tilde_proxy": self.u_tilde_proxy,
            "lambda_zero_branch": self.lambda_zero_branch,
        }

    @property
    def hypotheses_met(self) -> bool:
        return all(self.memberships.values())

    @property
    def identities_pass(self) -> bool:
        return all(c.passed for c in self.checks if c.kind != "membership")

    @property
    def passed(self) -> bool:
        return self.hypotheses_met and all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        """Flat ``key = value`` rendering."""
        lines = []
        for k, v in self.params.items():
            lines.append(f"{k} = {fmt(v)}")
        for k in ("dim", "n", "J_primal", "J_dual", "J1_dual", "gap_abs", "gap_rel",
                  "gap1_abs", "gap1_rel", "lambda_min", "in_A_plus", "in_A_plus_strict",
                  "in_B_star", "in_C_star", "lambda_zero_branch", "u_tilde_proxy",
                  "B_margin", "C_margin"):
            lines.append(f"{k} = {fmt(getattr(self, k))}")
        for k, v in self.extras.items():
            lines.append(f"{k} = {fmt(v)}")
        for c in self.checks:
            lines.append(f"check.{c.name}.residual = {fmt(c.residual)}")
            lines.append(f"check.{c.name}.tolerance = {fmt(c.tolerance)}")
            lines.append(f"check.{c.name}.pass = {fmt(c.passed)}")
        lines.append(f"hypotheses_met = {fmt(self.hypotheses_met)}")
        lines.append(f"pass = {fmt(self.passed)}")
        lines.append("u_tilde_note = interiority proxy (||v1||_inf < K2 - tol), not an exact L1=L2 test")
        for note in self.notes:
            lines.append(f"note = {note}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value", "residual", "tolerance", "pass"])
        for c in self.checks:
            w.writerow(c.row())
        return buf.getvalue()


def _safe(fn: Callable[[], float], notes: list[str], label: str) -> float:
    try:
        return float(fn())
    except (GLDualError, ValueError, FloatingPointError) as exc:
        notes.append(f"{label}: {exc}")
        return float("nan")


def _ok(residual: float, tol: float) -> bool:
    return bool(np.isfinite(residual) and residual < tol)


def duality_gap(p: ModelParams, g: Grid, u0, tols: Tolerances | None = None) -> DualityReport:
    """Assemble the full duality report for the candidate critical point ``u0``."""
    tols = tols or Tolerances()
    u0 = np.asarray(u0, dtype=float)
    notes: list[str] = []
    checks: list[Check] = []

    grad = primal_gradient(p, g, u0)
    grad_norm = l2_norm(g, grad)
    checks.append(Check("primal_stationarity", grad_norm, grad_norm, tols.stationarity,
                        _ok(grad_norm, tols.stationarity)))

    pair = dual_pair_from_primal(p, g, u0)
    r_v0 = l2_norm(g, pair.v0 - p.alpha * (u0**2 - p.beta))
    checks.append(Check("v0_relation", sup_norm(pair.v0), r_v0, tols.relation,
                        _ok(r_v0, tols.relation)))
    r_cross = cross_expression_residual(p, g, u0, pair)
    checks.append(Check("v1_cross_expression", sup_norm(pair.v1), r_cross, tols.relation,
                        _ok(r_cross, tols.relation)))

    in_B, B_margin = check_B_star(p, pair.v0)
    in_C, C_margin = check_C_star(p, pair.v1)

    r_rec = _safe(lambda: sup_norm(recover_u(p, g, pair) - u0), notes, "recover_u")
    checks.append(Check("recover_u_roundtrip", sup_norm(u0), r_rec, tols.relation,
                        _ok(r_rec, tols.relation)))

    J = eval_J(p, g, u0)
    Fs = _safe(lambda: eval_F_star(p, g, pair.v1), notes, "F*")
    Gs = _safe(lambda: eval_G_star(p, g, pair.v1, pair.v0), notes, "G*")
    c = inner(g, u0, pair.v1)
    rF = abs(Fs - (c - eval_F(p, g, u0)))
    rG = abs(Gs - (c - eval_G(p, g, u0)))
    checks.append(Check("legendre_F", Fs, rF, tols.identity * (1 + abs(Fs)),
                        _ok(rF, tols.identity * (1 + abs(Fs)))))
    checks.append(Check("legendre_G", Gs, rG, tols.identity * (1 + abs(Gs)),
                        _ok(rG, tols.identity * (1 + abs(Gs)))))

    J_star = -Fs + Gs
    gap_abs = abs(J - J_star)
    gap_rel = gap_abs / (1.0 + abs(J))
    checks.append(Check("duality_gap", J_star, gap_rel, tols.gap, _ok(gap_rel, tols.gap)))

    if in_C:
        J1 = _safe(lambda: eval_J1_star(p, g, pair.v1), notes, "J1*")
        v0_inner = _safe_field(lambda: v0_of_v1(p, g, pair.v1), notes, "v0_of_v1")
        dgrad = _safe(lambda: l2_norm(g, grad_J1_star(p, g, pair.v1)), notes, "grad J1*")
    else:
        notes.append("v1 outside C*: reduced dual not evaluated")
        J1 = dgrad = float("nan")
        v0_inner = None
    gap1_abs = abs(J - J1)
    gap1_rel = gap1_abs / (1.0 + abs(J))
    checks.append(Check("reduced_duality_gap", J1, gap1_rel, tols.gap, _ok(gap1_rel, tols.gap)))
    checks.append(Check("dual_gradient", dgrad, dgrad, tols.dual_gradient,
                        _ok(dgrad, tols.dual_gradient)))

    if v0_inner is not None:
        r_inner = float(np.max(np.abs(stationarity_residual(p, pair.v1, v0_inner))))
        r_agree = sup_norm(v0_inner - pair.v0)
        cert = float(np.max(concavity_certificate(p, pair.v1, v0_inner))) * p.alpha
    else:
        r_inner = r_agree = cert = float("nan")
    checks.append(Check("inner_stationarity", r_inner, r_inner, tols.inner,
                        _ok(r_inner, tols.inner)))
    checks.append(Check("inner_maximizer_agreement", r_agree, r_agree, tols.relation,
                        _ok(r_agree, tols.relation)))
    checks.append(Check("concavity_certificate", cert, cert, 1.0, _ok(cert, 1.0),
                        kind="membership"))

    a_plus = check_A_plus(p, g, u0)
    if not a_plus.converged:
        notes.append(f"A+ eigenvalue: {a_plus.message}")
    # u_hat = (-gamma Lap + K)^{-1}(v1 + f) equals u0 by construction of v1
    u_hat = _safe_field(lambda: solve_spd(laplacian(g, p.gamma, p.K), pair.v1 + p.source(g)),
                        notes, "u_hat")
    branch = lambda_branch_check(p, g, u0 if u_hat is None else u_hat)
    proxy = u_tilde_proxy(p, g, u0, pair, tols.proxy)

    checks.append(Check("A_plus_strict", a_plus.lambda_min, max(0.0, a_plus.tol - a_plus.lambda_min),
                        a_plus.tol, a_plus.in_A_plus_strict, kind="membership"))
    checks.append(Check("B_star", B_margin, max(0.0, -B_margin), 0.0, in_B, kind="membership"))
    checks.append(Check("C_star", C_margin, max(0.0, -C_margin), 0.0, in_C, kind="membership"))
    checks.append(Check("u_tilde_proxy", p.K2 - sup_norm(pair.v1), 0.0 if proxy else 1.0,
                        tols.proxy, proxy, kind="membership"))
    checks.append(Check("lambda_zero_branch", branch.min_eigenvalue,
                        max(0.0, branch.tol - branch.min_eigenvalue), branch.tol,
                        branch.lambda_is_zero, kind="membership"))

    return DualityReport(
        params=p.as_dict(), dim=g.dimension, n=g.spec.n,
        J_primal=J, J_dual=J_star, J1_dual=J1,
        gap_abs=gap_abs, gap_rel=gap_rel, gap1_abs=gap1_abs, gap1_rel=gap1_rel,
        lambda_min=a_plus.lambda_min, in_A_plus=a_plus.in_A_plus,
        in_A_plus_strict=a_plus.in_A_plus_strict, in_B_star=in_B, in_C_star=in_C,
        lambda_zero_branch=branch.lambda_is_zero, u_tilde_proxy=proxy,
        B_margin=B_margin, C_margin=C_margin, checks=checks, notes=notes,
        extras={"primal_gradient_norm": grad_norm, "dual_gradient_norm": dgrad},
    )


def _safe_field(fn, notes, label) -> Optional[np.ndarray]:
    try:
        return fn()
    except (GLDualError, ValueError) as exc:
        notes.append(f"{label}: {exc}")
        return None


# ---------------------------------------------------------------------------
# convexity probes

@dataclass
class ProbeReport:
    functional: str
    n_points: int
    n_dirs: int
    n_pairs: int
    min_curvature: float
    n_curvature_fail: int
    max_midpoint_excess: float
    n_midpoint_fail: int
    n_errors: int
    seed: int
    curvature_tol: float
    midpoint_tol: float

    @property
    def passed(self) -> bool:
        return self.n_curvature_fail == 0 and self.n_midpoint_fail == 0 and self.n_errors == 0


def convexity_probe(p: ModelParams, g: Grid, seed: int = 0, n_points: int = 10,
                    n_dirs: int = 20, n_pairs: int = 200, functional: str = "J1",
                    sign: float = 1.0, curvature_tol: float = 1e-8,
                    midpoint_tol: float = 1e-9) -> ProbeReport:
    """Sample convexity of ``sign * J1*`` (or ``J2*``) on the box C*.

    Curvature is the second central difference along random directions of
    unit sup-norm with step ``K2/4`` from base points in ``[-0.7 K2, 0.7 K2]``,
    divided by the squared step. Midpoint convexity uses pairs drawn
    uniformly from the whole box. Each sample carries its own seed derived
    from ``(seed, index)``.
    """
    if functional == "J1":
        base = eval_J1_star
    elif functional == "J2":
        base = eval_J2_star
    else:
        raise ValueError(f"unknown functional {functional!r}")

    def J(v):
        return sign * base(p, g, v)

    K2 = p.K2
    eps = 0.25 * K2
    errors = 0
    min_curv = np.inf
    n_curv_fail = 0
    for i in range(n_points):
        rng = np.random.default_rng([seed, 0, i])
        v = rng.uniform(-0.7 * K2, 0.7 * K2, size=g.size)
        try:
            J0 = J(v)
        except GLDualError:
            errors += 1
            continue
        for _ in range(n_dirs):
            d = rng.standard_normal(g.size)
            d /= sup_norm(d)
            try:
                curv = (J(v + eps * d) - 2.0 * J0 + J(v - eps * d)) / eps**2
            except GLDualError:
                errors += 1
                continue
            min_curv = min(min_curv, curv)
            if curv < -curvature_tol:
                n_curv_fail += 1

    max_excess = -np.inf
    n_mid_fail = 0
    for k in range(n_pairs):
        rng = np.random.default_rng([seed, 1, k])
        a = rng.uniform(-K2, K2, size=g.size)
        b = rng.uniform(-K2, K2, size=g.size)
        try:
            excess = J(0.5 * (a + b)) - 0.5 * (J(a) + J(b))
        except GLDualError:
            errors += 1
            continue
        max_excess = max(max_excess, excess)
        if excess > midpoint_tol:
            n_mid_fail += 1

    return ProbeReport(functional=("-" if sign < 0 else "") + functional,
                       n_points=n_points, n_dirs=n_dirs, n_pairs=n_pairs,
                       min_curvature=float(min_curv), n_curvature_fail=n_curv_fail,
                       max_midpoint_excess=float(max_excess), n_midpoint_fail=n_mid_fail,
                       n_errors=errors, seed=seed, curvature_tol=curvature_tol,
                       midpoint_tol=midpoint_tol)
