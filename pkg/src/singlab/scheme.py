"""Regularized approximation scheme for the doubly singular coupled system.

At regularization level n the datum is clipped at n and both singular
denominators are shifted by 1/n:

    -div(a D u) + v^(1-theta) u^(r-1) = f_n / (u + 1/n)^gamma
    -div(a D v)                       = u^r / (v + 1/n)^theta

Each single equation is solved by damped Picard iteration with the
nonlinearity frozen at the previous iterate (the power u^(r-2) goes into the
reaction, the singular denominator is lagged); the pair is resolved by an
alternating outer fixed point started from (0, 0).  Nonnegativity is enforced
by projection, and the discrete maximum principle keeps the unprojected
iterates nonnegative up to solver tolerance anyway.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exponents import Params, RegimeTag, classify
from .fields import Field, GridSpec, h1_seminorm, lp_norm
from .operators import (
    CoefficientField,
    NonConvergenceError,
    assemble,
    cg_solve,
)

__all__ = [
    "InnerInfo",
    "IterationControl",
    "ProblemData",
    "ResidualRecord",
    "SchemeState",
    "SweepResult",
    "residual_record",
    "solve_level",
    "solve_u_given_v",
    "solve_v_given_u",
    "sweep_levels",
    "truncate_datum",
]


@dataclass(frozen=True)
class IterationControl:
    """Tolerances and caps for the nested iterations.

    Inner/outer tolerances sit well above the linear-solve tolerance so that
    linear algebra error never pollutes the fixed-point convergence checks.
    """

    tol_inner: float = 1e-8
    tol_outer: float = 1e-7
    max_inner: int = 200
    max_outer: int = 100
    tol_linear: float = 1e-10
    max_linear: Optional[int] = None
    omega: float = 1.0
    omega_min: float = 1.0 / 16.0


@dataclass(frozen=True)
class ProblemData:
    """Problem instance: parameters, grid, coefficients, and the datum f >= 0.

    A datum that vanishes identically is permitted for plumbing tests and
    flagged by `trivial_datum`; the positivity postconditions only apply to
    nontrivial data.  Grids with d < 3 run in theory-off mode.
    """

    params: Params
    grid: GridSpec
    coeff: CoefficientField
    f: Field

    def __post_init__(self):
        if self.coeff.grid != self.grid:
            raise ValueError("coefficient grid does not match problem grid")
        if self.f.grid != self.grid:
            raise ValueError("datum grid does not match problem grid")
        if np.any(self.f.values < 0):
            raise ValueError("datum must be nonnegative nodewise")

    @property
    def trivial_datum(self) -> bool:
        return float(np.sum(self.f.values)) == 0.0

    @property
    def theory_off(self) -> bool:
        return self.grid.theory_off or self.grid.d != self.params.d

    def with_datum(self, f: Field) -> "ProblemData":
        return ProblemData(self.params, self.grid, self.coeff, f)

    def scaled(self, lam: float) -> "ProblemData":
        return self.with_datum(Field(self.grid, lam * self.f.values))


def truncate_datum(f: Field, n: int) -> Field:
    """Level-n datum: pointwise min(f, n) for a nonnegative f."""
    if n < 1:
        raise ValueError(f"regularization level must be >= 1, got {n}")
    return Field(f.grid, np.minimum(f.values, float(n)))


@dataclass
class InnerInfo:
    iterations: int
    converged: bool
    final_update: float
    updates: List[float]
    cg_iterations: int
    omega: float


def _float_params(params: Params) -> Tuple[float, float, float]:
    return float(params.r), float(params.gamma), float(params.theta)


def solve_u_given_v(
    data: ProblemData,
    v: Field,
    n: int,
    it: IterationControl = IterationControl(),
    u0: Optional[Field] = None,
    source: Optional[Field] = None,
) -> Tuple[Field, InnerInfo]:
    """Damped Picard solve of the u-equation with v frozen.

    Step k solves the linear SPD system with reaction v^(1-theta) u_k^(r-2)
    and right side f_n/(u_k + 1/n)^gamma, then relaxes and projects to >= 0.
    Stops when the sup-norm update drops below tol_inner * (1 + |u_k|_inf).
    """
    if np.any(v.values < 0):
        raise ValueError("v must be nonnegative nodewise")
    r, gamma, theta = _float_params(data.params)
    fn = truncate_datum(data.f, n).values
    shift = 1.0 / n
    v_pow = v.values ** (1.0 - theta)
    src = None if source is None else source.values
    u = np.zeros(data.grid.shape) if u0 is None else u0.values.copy()
    omega = it.omega
    updates: List[float] = []
    cg_total = 0
    rises = 0
    prev_delta = math.inf
    for k in range(1, it.max_inner + 1):
        reaction = v_pow * u ** (r - 2.0)
        rhs = fn / (u + shift) ** gamma
        if src is not None:
            rhs = rhs + src
        system = assemble(data.coeff, reaction)
        sol, info = cg_solve(
            system, Field(data.grid, rhs), tol=it.tol_linear, max_iter=it.max_linear, x0=u
        )
        cg_total += info.iterations
        u_new = (1.0 - omega) * u + omega * np.maximum(sol.values, 0.0)
        delta = float(np.max(np.abs(u_new - u)))
        updates.append(delta)
        u_norm = float(np.max(np.abs(u)))
        u = u_new
        if delta <= it.tol_inner * (1.0 + u_norm):
            return Field(data.grid, u), InnerInfo(k, True, delta, updates, cg_total, omega)
        if delta > prev_delta:
            rises += 1
            if rises >= 2:
                omega = max(omega / 2.0, it.omega_min)
                rises = 0
        else:
            rises = 0
        prev_delta = delta
    raise NonConvergenceError(
        f"u-solve did not converge in {it.max_inner} iterations "
        f"(last update {updates[-1]:.3e})",
        updates,
    )


def solve_v_given_u(
    data: ProblemData,
    u: Field,
    n: int,
    it: IterationControl = IterationControl(),
    v0: Optional[Field] = None,
    source: Optional[Field] = None,
) -> Tuple[Field, InnerInfo]:
    """Picard solve of the v-equation with u frozen; theta = 0 needs one solve."""
    if np.any(u.values < 0):
        raise ValueError("u must be nonnegative nodewise")
    r, gamma, theta = _float_params(data.params)
    shift = 1.0 / n
    u_pow = u.values**r
    src = None if source is None else source.values
    system = assemble(data.coeff, 0.0)
    if theta == 0.0:
        rhs = u_pow if src is None else u_pow + src
        sol, info = cg_solve(
            system,
            Field(data.grid, rhs),
            tol=it.tol_linear,
            max_iter=it.max_linear,
            x0=None if v0 is None else v0.values,
        )
        v = np.maximum(sol.values, 0.0)
        return Field(data.grid, v), InnerInfo(1, True, 0.0, [0.0], info.iterations, it.omega)
    v = np.zeros(data.grid.shape) if v0 is None else v0.values.copy()
    omega = it.omega
    updates: List[float] = []
    cg_total = 0
    rises = 0
    prev_delta = math.inf
    for k in range(1, it.max_inner + 1):
        rhs = u_pow / (v + shift) ** theta
        if src is not None:
            rhs = rhs + src
        sol, info = cg_solve(
            system, Field(data.grid, rhs), tol=it.tol_linear, max_iter=it.max_linear, x0=v
        )
        cg_total += info.iterations
        v_new = (1.0 - omega) * v + omega * np.maximum(sol.values, 0.0)
        delta = float(np.max(np.abs(v_new - v)))
        updates.append(delta)
        v_norm = float(np.max(np.abs(v)))
        v = v_new
        if delta <= it.tol_inner * (1.0 + v_norm):
            return Field(data.grid, v), InnerInfo(k, True, delta, updates, cg_total, omega)
        if delta > prev_delta:
            rises += 1
            if rises >= 2:
                omega = max(omega / 2.0, it.omega_min)
                rises = 0
        else:
            rises = 0
        prev_delta = delta
    raise NonConvergenceError(
        f"v-solve did not converge in {it.max_inner} iterations "
        f"(last update {updates[-1]:.3e})",
        updates,
    )


@dataclass
class ResidualRecord:
    """Relative and absolute discrete-equation residuals of a state."""

    u_rel: float
    v_rel: float
    u_abs: float
    v_abs: float

    def as_dict(self) -> Dict[str, float]:
        return {"u_rel": self.u_rel, "v_rel": self.v_rel, "u_abs": self.u_abs, "v_abs": self.v_abs}


def residual_record(
    data: ProblemData,
    u: Field,
    v: Field,
    n: int,
    sources: Optional[Tuple[Optional[Field], Optional[Field]]] = None,
) -> ResidualRecord:
    """Evaluate both discrete equations at (u, v) and report L2 residuals."""
    r, gamma, theta = _float_params(data.params)
    shift = 1.0 / n
    fn = truncate_datum(data.f, n).values
    su, sv = (None, None) if sources is None else sources
    from .operators import _apply_raw  # local import to keep module surface tidy

    reaction = v.values ** (1.0 - theta) * u.values ** (r - 2.0)
    lhs_u = _apply_raw(assemble(data.coeff, reaction), u.values)
    rhs_u = fn / (u.values + shift) ** gamma
    if su is not None:
        rhs_u = rhs_u + su.values
    lhs_v = _apply_raw(assemble(data.coeff, 0.0), v.values)
    rhs_v = u.values**r / (v.values + shift) ** theta
    if sv is not None:
        rhs_v = rhs_v + sv.values
    hd = data.grid.cell_volume
    def l2(a):
        return float(np.sqrt(hd * np.sum(a * a)))
    u_abs = l2(lhs_u - rhs_u)
    v_abs = l2(lhs_v - rhs_v)
    tiny = 1e-300
    return ResidualRecord(
        u_rel=u_abs / max(l2(rhs_u), tiny),
        v_rel=v_abs / max(l2(rhs_v), tiny),
        u_abs=u_abs,
        v_abs=v_abs,
    )


@dataclass
class SchemeState:
    """Converged (or partial) pair at one regularization level with diagnostics."""

    n: int
    u: Field
    v: Field
    inner_iters_u: int
    inner_iters_v: int
    outer_iters: int
    converged: bool
    residuals: ResidualRecord
    failure: Optional[str] = None
    seconds: float = 0.0

    @property
    def u_min(self) -> float:
        return self.u.min()

    @property
    def v_min(self) -> float:
        return self.v.min()

    def v_strictly_positive(self, floor_factor: float = 1e-14) -> bool:
        """All nodes above the floor floor_factor * |v|_inf (discrete analogue
        of interior strict positivity); trivially true for the zero pair."""
        sup_v = self.v.sup()
        if self.u.sup() == 0.0 and sup_v == 0.0:
            return True
        return self.v_min > floor_factor * sup_v


def solve_level(
    data: ProblemData,
    n: int,
    it: IterationControl = IterationControl(),
    sources: Optional[Tuple[Optional[Field], Optional[Field]]] = None,
) -> SchemeState:
    """Alternating outer fixed point from (u, v) = (0, 0) at level n.

    Each outer pass solves v given u, then u given the fresh v; convergence
    requires both sup-norm updates below tol_outer * (1 + current sup norm).
    Hitting a cap returns a partial state with converged = False.
    """
    if n < 1:
        raise ValueError(f"regularization level must be >= 1, got {n}")
    t0 = time.perf_counter()
    su, sv = (None, None) if sources is None else sources
    u = Field.zeros(data.grid)
    v = Field.zeros(data.grid)
    total_u = total_v = 0
    converged = False
    failure: Optional[str] = None
    outer = 0
    for outer in range(1, it.max_outer + 1):
        try:
            v_new, info_v = solve_v_given_u(data, u, n, it, v0=v, source=sv)
            u_new, info_u = solve_u_given_v(data, v_new, n, it, u0=u, source=su)
        except NonConvergenceError as exc:
            failure = str(exc)
            break
        total_u += info_u.iterations
        total_v += info_v.iterations
        du = float(np.max(np.abs(u_new.values - u.values)))
        dv = float(np.max(np.abs(v_new.values - v.values)))
        u, v = u_new, v_new
        if du <= it.tol_outer * (1.0 + u.sup()) and dv <= it.tol_outer * (1.0 + v.sup()):
            converged = True
            break
    residuals = residual_record(data, u, v, n, sources=sources)
    return SchemeState(
        n=n,
        u=u,
        v=v,
        inner_iters_u=total_u,
        inner_iters_v=total_v,
        outer_iters=outer,
        converged=converged,
        residuals=residuals,
        failure=failure,
        seconds=time.perf_counter() - t0,
    )


def _norm_columns(state: SchemeState, params: Params) -> Dict[str, float]:
    """Norm columns tracked per level: regime exponents, energies, sup norms."""
    out: Dict[str, float] = {
        "sup_u": state.u.sup(),
        "sup_v": state.v.sup(),
        "h1_u": h1_seminorm(state.u),
        "h1_v": h1_seminorm(state.v),
        "l2_u": lp_norm(state.u, 2),
        "l2_v": lp_norm(state.v, 2),
    }
    regime = classify(params)
    for tag, exponent in sorted(regime.u_exponents.items(), key=lambda kv: kv[0].value):
        if tag is RegimeTag.NONE:
            continue
        if exponent.is_inf:
            out[f"lp_u[{tag.value}@inf]"] = state.u.sup()
        elif exponent.is_any_finite:
            p = 2 * params.d
            out[f"lp_u[{tag.value}@any-finite:p={p}]"] = lp_norm(state.u, p)
        else:
            out[f"lp_u[{tag.value}@{exponent.q}]"] = lp_norm(state.u, exponent)
    return out


@dataclass
class SweepResult:
    """States and per-level records of a regularization sweep."""

    states: List[SchemeState]
    records: List[Dict[str, object]]
    cauchy_diffs: List[float]
    cauchy_decreasing: bool  # recorded trend, never asserted here


def sweep_levels(
    data: ProblemData,
    schedule: Sequence[int],
    it: IterationControl = IterationControl(),
    jobs: int = 1,
) -> SweepResult:
    """Run solve_level over a strictly increasing schedule of levels.

    Reports the tracked norms per level plus the successive differences
    |u_{n_k} - u_{n_{k-1}}|_{L^2} that evidence (but do not prove) a Cauchy
    trend.  Level failures are recorded and the sweep continues.
    """
    levels = [int(n) for n in schedule]
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("schedule must be nonempty and strictly increasing")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            states = list(pool.map(_solve_level_task, [(data, n, it) for n in levels]))
    else:
        states = [solve_level(data, n, it) for n in levels]
    records: List[Dict[str, object]] = []
    diffs: List[float] = []
    prev_u: Optional[Field] = None
    for state in states:
        # wall time stays off the record so emitted CSVs are deterministic
        rec: Dict[str, object] = {
            "n": state.n,
            "converged": state.converged,
            "outer_iters": state.outer_iters,
            "inner_iters_u": state.inner_iters_u,
            "inner_iters_v": state.inner_iters_v,
        }
        rec.update(_norm_columns(state, data.params))
        rec.update({f"res_{k}": val for k, val in state.residuals.as_dict().items()})
        if prev_u is not None:
            diff = lp_norm(Field(data.grid, state.u.values - prev_u.values), 2)
            diffs.append(diff)
            rec["diff_l2_u_prev"] = diff
        else:
            rec["diff_l2_u_prev"] = math.nan
        records.append(rec)
        prev_u = state.u
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:])) if len(diffs) >= 2 else False
    return SweepResult(states, records, diffs, decreasing)


def _solve_level_task(args):
    data, n, it = args
    return solve_level(data, n, it)
