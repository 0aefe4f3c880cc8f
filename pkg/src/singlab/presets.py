"""Named problem configurations and the audit battery runner.

Each preset fixes a parameter tuple, grid, datum, and the set of audits that
its regime supports.  `run_preset` executes the battery and returns uniform
audit reports; sweeps and datum families are solved once and shared between
the audits that need them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .exponents import Params
from .fields import Field, GridSpec, half_box_indicator
from .operators import CoefficientField
from .scheme import IterationControl, ProblemData, SweepResult, sweep_levels
from .experiments import (
    AuditReport,
    ScalingFit,
    audit_cauchy_trend,
    audit_energy,
    audit_higher_integrability,
    audit_linfty_bound,
    audit_outside_dual,
    audit_residuals,
    audit_scaling_law,
    audit_superlevel,
    audit_v_regularity,
    solve_datum_family,
)

__all__ = ["PRESETS", "Preset", "build_problem", "run_preset"]


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    params: Params
    n_cells: int = 16
    datum: Tuple[str, float] = ("constant", 1.0)
    schedule: Optional[Tuple[int, ...]] = None
    lambdas: Optional[Tuple[float, ...]] = None
    n_fixed: Optional[int] = None
    audits: Tuple[str, ...] = ()


def _p(d, r, gamma, theta, m) -> Params:
    return Params(d=d, r=Fraction(r), gamma=Fraction(gamma), theta=Fraction(theta), m=Fraction(m))


PRESETS: Dict[str, Preset] = {
    p.name: p
    for p in [
        Preset(
            name="default-d3",
            description="bounded-datum baseline: f = 1, r = 2, gamma = theta = 1/2, m = 2",
            params=_p(3, 2, "1/2", "1/2", 2),
            schedule=(1, 2, 4, 8, 16, 32, 64),
            audits=("self_consistency", "energy", "superlevel", "linfty", "cauchy"),
        ),
        Preset(
            name="dual-space-d3",
            description="dual-range datum: m = 6/5, scaling law over lambda in {1,2,4,8}",
            params=_p(3, 2, "1/2", "1/2", "6/5"),
            lambdas=(1.0, 2.0, 4.0, 8.0),
            n_fixed=64,
            audits=("scaling_law", "v_regularity"),
        ),
        Preset(
            name="outside-dual-lr",
            description="below dual range with r = 7 > 2*: L^r bound",
            params=_p(3, 7, "1/2", "1/2", "14/13"),
            n_fixed=16,
            audits=("outside_dual",),
        ),
        Preset(
            name="outside-dual-lr1",
            description="below dual range, theta = 0, r = 7: L^(r+1) bound",
            params=_p(3, 7, "1/2", 0, "16/15"),
            n_fixed=16,
            audits=("outside_dual",),
        ),
        Preset(
            name="higher-integrability-d3",
            description="singular gain: r = 3, m = (r+gamma)' = 7/5, lambda in {1,2,4}",
            params=_p(3, 3, "1/2", "1/2", "7/5"),
            lambdas=(1.0, 2.0, 4.0),
            n_fixed=16,
            audits=("higher_integrability",),
        ),
        Preset(
            name="none-d3",
            description="datum below every integrability threshold; no solver audits apply",
            params=_p(3, 2, "1/2", "1/2", 1),
            audits=(),
        ),
    ]
}


def build_problem(
    preset: Preset,
    n_cells: Optional[int] = None,
    datum: Optional[Tuple[str, float]] = None,
) -> ProblemData:
    grid = GridSpec(min(preset.params.d, 3), n_cells or preset.n_cells)
    coeff = CoefficientField.constant(grid, 1.0)
    kind, value = datum or preset.datum
    if kind == "constant":
        f = Field.constant(grid, value)
    elif kind == "halfbox":
        f = Field(grid, value * half_box_indicator(grid).values)
    else:
        raise ValueError(f"unknown datum kind {kind!r}")
    return ProblemData(preset.params, grid, coeff, f)


@dataclass
class PresetRun:
    preset: Preset
    reports: List[AuditReport]
    sweep: Optional[SweepResult] = None
    fit: Optional[ScalingFit] = None
    notes: Tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def failures(self) -> List[AuditReport]:
        return [r for r in self.reports if not r.passed]


def run_preset(
    preset: Preset,
    it: IterationControl = IterationControl(),
    jobs: int = 1,
    n_cells: Optional[int] = None,
    sweep: Optional[SweepResult] = None,
) -> PresetRun:
    """Run every audit the preset declares; returns uniform reports.

    A precomputed sweep (e.g. loaded from disk by the CLI) can be supplied
    for the per-level audits; datum-family audits always solve fresh.
    """
    data = build_problem(preset, n_cells=n_cells)
    reports: List[AuditReport] = []
    notes: List[str] = []
    fit: Optional[ScalingFit] = None
    if not preset.audits:
        notes.append(f"no audits applicable for preset {preset.name}")
        return PresetRun(preset, reports, notes=tuple(notes))

    needs_sweep = {"self_consistency", "energy", "superlevel", "linfty", "cauchy"}
    if needs_sweep & set(preset.audits) and sweep is None:
        if preset.schedule is None:
            raise ValueError(f"preset {preset.name} needs a schedule for per-level audits")
        sweep = sweep_levels(data, preset.schedule, it, jobs=jobs)

    family_states = None
    if {"scaling_law", "v_regularity", "higher_integrability"} & set(preset.audits):
        family_states = solve_datum_family(data, preset.lambdas, preset.n_fixed, it, jobs=jobs)

    for audit in preset.audits:
        if audit == "self_consistency":
            for state in sweep.states:
                reports.extend(audit_residuals(state, data))
        elif audit == "energy":
            for state in sweep.states:
                reports.extend(audit_energy(state, data, it))
        elif audit == "superlevel":
            for state in sweep.states:
                reports.extend(audit_superlevel(state, data, it=it))
        elif audit == "linfty":
            reports.extend(audit_linfty_bound(sweep.states, data))
        elif audit == "cauchy":
            reports.extend(audit_cauchy_trend(sweep.cauchy_diffs, data))
        elif audit == "scaling_law":
            fit = audit_scaling_law(
                data, preset.lambdas, preset.n_fixed, it, states=family_states
            )
            reports.extend(fit.reports)
        elif audit == "v_regularity":
            reports.extend(
                audit_v_regularity(
                    data, preset.lambdas, preset.n_fixed, it, states=family_states
                )
            )
        elif audit == "higher_integrability":
            reports.extend(
                audit_higher_integrability(
                    data, preset.lambdas, preset.n_fixed, it, states=family_states
                )
            )
        elif audit == "outside_dual":
            from .scheme import solve_level

            state = solve_level(data, preset.n_fixed, it)
            if not state.converged:
                raise RuntimeError(f"preset {preset.name}: level {preset.n_fixed} did not converge")
            reports.extend(audit_outside_dual(state, data, it))
        else:
            raise ValueError(f"unknown audit {audit!r}")
    return PresetRun(preset, reports, sweep=sweep, fit=fit, notes=tuple(notes))
