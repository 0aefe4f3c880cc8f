"""Numerical laboratory for a doubly singular coupled elliptic system.

Subpackages: exact exponent algebra and regime classification (`exponents`),
grids and discrete norms (`fields`), the divergence-form operator and PCG
solver (`operators`), the regularized fixed-point scheme (`scheme`), the
a-priori-estimate audit harness (`experiments`, `presets`), and the CLI
(`cli`).
"""

from .exponents import (
    ANY_FINITE,
    INF,
    Exponent,
    Params,
    Regime,
    RegimeError,
    RegimeTag,
    classify,
    double_sobolev,
    holder_conjugate,
    sobolev_conjugate,
    strict_positivity,
    u_integrability,
    v_integrability,
)
from .fields import (
    Field,
    GridSpec,
    excess,
    h1_seminorm,
    lp_norm,
    superlevel_integral,
    truncate,
)
from .operators import (
    CoefficientField,
    LinearSystem,
    NonConvergenceError,
    apply_operator,
    assemble,
    cg_solve,
    ellipticity_audit,
)
from .scheme import (
    IterationControl,
    ProblemData,
    SchemeState,
    solve_level,
    solve_u_given_v,
    solve_v_given_u,
    sweep_levels,
    truncate_datum,
)

__version__ = "0.1.0"
