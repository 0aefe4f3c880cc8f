"""Discrete divergence-form operator -div(a(x) D.) and a Jacobi-PCG solver.

The coefficient matrix is restricted to diagonal form diag(a_1(x),...,a_d(x))
sampled at grid faces.  This keeps the stencil an M-matrix (nonpositive
off-diagonals, diagonally dominant), which gives the discrete maximum
principle the positivity arguments of the scheme rely on.  The operator is
applied matrix-free through slicing; nothing is ever materialized except for
small test grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .fields import Field, GridSpec, face_differences

__all__ = [
    "CGInfo",
    "CoefficientField",
    "EllipticityReport",
    "LinearSystem",
    "NonConvergenceError",
    "apply_operator",
    "assemble",
    "cg_solve",
    "dense_matrix",
    "ellipticity_audit",
    "energy",
    "grad_product",
]


def _face_shape(grid: GridSpec, axis: int) -> Tuple[int, ...]:
    shape = list(grid.shape)
    shape[axis] += 1
    return tuple(shape)


def _axis_slice(nd: int, axis: int, sl: slice) -> Tuple[slice, ...]:
    out = [slice(None)] * nd
    out[axis] = sl
    return tuple(out)


@dataclass(frozen=True)
class CoefficientField:
    """Diagonal coefficient a_k(x) sampled at the faces of each axis.

    faces[k] has n_cells+1 entries along axis k (boundary faces included) and
    n_cells along the others.  alpha/beta are the declared ellipticity bounds;
    the audit checks alpha <= a <= beta at every face.
    """

    grid: GridSpec
    faces: Tuple[np.ndarray, ...]
    alpha: float
    beta: float

    def __post_init__(self):
        if len(self.faces) != self.grid.d:
            raise ValueError("one face array per axis is required")
        frozen = []
        for k, a in enumerate(self.faces):
            arr = np.array(a, dtype=np.float64)
            if arr.shape != _face_shape(self.grid, k):
                raise ValueError(
                    f"axis {k} face array has shape {arr.shape}, "
                    f"expected {_face_shape(self.grid, k)}"
                )
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "faces", tuple(frozen))
        if not (0 < self.alpha <= self.beta):
            raise ValueError(f"need 0 < alpha <= beta, got {self.alpha}, {self.beta}")

    @classmethod
    def constant(cls, grid: GridSpec, value: float = 1.0) -> "CoefficientField":
        faces = tuple(np.full(_face_shape(grid, k), float(value)) for k in range(grid.d))
        return cls(grid, faces, alpha=float(value), beta=float(value))

    @classmethod
    def from_face_function(
        cls,
        grid: GridSpec,
        fn: Callable[..., np.ndarray],
        alpha: Optional[float] = None,
        beta: Optional[float] = None,
    ) -> "CoefficientField":
        """Sample fn(x1, ..., xd) at face centers (j + 1/2)h along each axis."""
        h = grid.h
        node = grid.coords()
        face = (np.arange(grid.n_cells + 1) + 0.5) * h
        faces = []
        for k in range(grid.d):
            axes = [face if j == k else node for j in range(grid.d)]
            mesh = np.meshgrid(*axes, indexing="ij")
            faces.append(np.asarray(fn(*mesh), dtype=np.float64))
        alpha = float(min(a.min() for a in faces)) if alpha is None else float(alpha)
        beta = float(max(a.max() for a in faces)) if beta is None else float(beta)
        return cls(grid, tuple(faces), alpha=alpha, beta=beta)

    @classmethod
    def from_node_samples(
        cls,
        grid: GridSpec,
        samples: Union[Field, np.ndarray],
        alpha: Optional[float] = None,
        beta: Optional[float] = None,
    ) -> "CoefficientField":
        """Harmonic means of adjacent node samples; boundary faces copy the
        adjacent node (standard choice for rough coefficients)."""
        vals = samples.values if isinstance(samples, Field) else np.asarray(samples, float)
        if np.any(vals <= 0):
            raise ValueError("coefficient samples must be positive")
        faces = []
        for k in range(grid.d):
            out = np.empty(_face_shape(grid, k))
            nd = grid.d
            lo = vals[_axis_slice(nd, k, slice(None, -1))]
            hi = vals[_axis_slice(nd, k, slice(1, None))]
            out[_axis_slice(nd, k, slice(1, -1))] = 2.0 / (1.0 / lo + 1.0 / hi)
            out[_axis_slice(nd, k, slice(0, 1))] = vals[_axis_slice(nd, k, slice(0, 1))]
            out[_axis_slice(nd, k, slice(-1, None))] = vals[_axis_slice(nd, k, slice(-1, None))]
            faces.append(out)
        alpha = float(min(a.min() for a in faces)) if alpha is None else float(alpha)
        beta = float(max(a.max() for a in faces)) if beta is None else float(beta)
        return cls(grid, tuple(faces), alpha=alpha, beta=beta)


@dataclass(frozen=True)
class EllipticityReport:
    ok: bool
    alpha: float
    beta: float
    violations: Tuple[Tuple[int, Tuple[int, ...], float], ...]


def ellipticity_audit(coeff: CoefficientField) -> EllipticityReport:
    """Check alpha <= a_k <= beta at every face; report offending locations."""
    violations: List[Tuple[int, Tuple[int, ...], float]] = []
    for k, a in enumerate(coeff.faces):
        bad = (a < coeff.alpha) | (a > coeff.beta)
        for idx in np.argwhere(bad):
            violations.append((k, tuple(int(i) for i in idx), float(a[tuple(idx)])))
    return EllipticityReport(not violations, coeff.alpha, coeff.beta, tuple(violations))


@dataclass(frozen=True)
class LinearSystem:
    """Stencil operator -div(a D.) plus a nonnegative diagonal reaction."""

    coeff: CoefficientField
    reaction: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.array(self.reaction, dtype=np.float64)
        if r.shape != self.coeff.grid.shape:
            raise ValueError("reaction shape does not match grid")
        if np.any(r < 0):
            raise ValueError("reaction term must be nonnegative nodewise")
        r.flags.writeable = False
        object.__setattr__(self, "reaction", r)

    @property
    def grid(self) -> GridSpec:
        return self.coeff.grid


def assemble(coeff: CoefficientField, reaction: Union[Field, np.ndarray, float]) -> LinearSystem:
    """Build the (2d+1)-point system: face coefficients over h^2 plus reaction."""
    grid = coeff.grid
    if isinstance(reaction, Field):
        r = reaction.values
    elif np.isscalar(reaction):
        r = np.full(grid.shape, float(reaction))
    else:
        r = np.asarray(reaction, dtype=np.float64)
    return LinearSystem(coeff, r)


def _apply_raw(system: LinearSystem, v: np.ndarray) -> np.ndarray:
    grid = system.grid
    inv_h2 = 1.0 / grid.h**2
    out = system.reaction * v
    nd = grid.d
    for k in range(nd):
        a = system.coeff.faces[k]
        a_lo = a[_axis_slice(nd, k, slice(None, -1))]
        a_hi = a[_axis_slice(nd, k, slice(1, None))]
        diff_lo = v.copy()
        diff_lo[_axis_slice(nd, k, slice(1, None))] -= v[_axis_slice(nd, k, slice(None, -1))]
        diff_hi = v.copy()
        diff_hi[_axis_slice(nd, k, slice(None, -1))] -= v[_axis_slice(nd, k, slice(1, None))]
        out += (a_lo * diff_lo + a_hi * diff_hi) * inv_h2
    return out


def apply_operator(system: LinearSystem, x: Field) -> Field:
    if x.grid != system.grid:
        raise ValueError("field grid does not match system grid")
    return Field(x.grid, _apply_raw(system, x.values))


def diagonal(system: LinearSystem) -> np.ndarray:
    """Diagonal of the stencil matrix (used by the Jacobi preconditioner)."""
    grid = system.grid
    inv_h2 = 1.0 / grid.h**2
    diag = np.array(system.reaction, dtype=np.float64)
    nd = grid.d
    for k in range(nd):
        a = system.coeff.faces[k]
        diag += (
            a[_axis_slice(nd, k, slice(None, -1))] + a[_axis_slice(nd, k, slice(1, None))]
        ) * inv_h2
    return diag


@dataclass
class CGInfo:
    iterations: int
    residual: float
    converged: bool
    residual_history: List[float]


class NonConvergenceError(RuntimeError):
    """An iteration hit its cap; carries the residual/update trace."""

    def __init__(self, message: str, trace: Sequence[float]):
        super().__init__(message)
        self.trace = list(trace)


def cg_solve(
    system: LinearSystem,
    rhs: Field,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
) -> Tuple[Field, CGInfo]:
    """Jacobi-preconditioned conjugate gradient.

    Stops when ||rhs - A x||_2 <= tol * ||rhs||_2.  A warm start `x0` makes
    the nested fixed-point loops cheap: successive right-hand sides differ
    little, so most solves finish in a handful of iterations.
    """
    if rhs.grid != system.grid:
        raise ValueError("rhs grid does not match system grid")
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = rhs.values
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0 and x0 is None:
        return Field(rhs.grid, np.zeros(system.grid.shape)), CGInfo(0, 0.0, True, [0.0])
    if max_iter is None:
        max_iter = 60 * system.grid.n_cells + 600
    x = np.zeros(system.grid.shape) if x0 is None else np.array(x0, dtype=np.float64)
    inv_diag = 1.0 / diagonal(system)
    r = b - _apply_raw(system, x)
    target = tol * b_norm
    res = float(np.linalg.norm(r))
    history = [res]
    if res <= target:
        return Field(rhs.grid, x), CGInfo(0, res, True, history)
    z = inv_diag * r
    p = z.copy()
    rz = float(np.sum(r * z))
    for k in range(1, max_iter + 1):
        ap = _apply_raw(system, p)
        alpha = rz / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r))
        history.append(res)
        if res <= target:
            return Field(rhs.grid, x), CGInfo(k, res, True, history)
        z = inv_diag * r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergenceError(
        f"PCG did not reach tol {tol:g} in {max_iter} iterations "
        f"(residual {res:.3e}, target {target:.3e})",
        history,
    )


def dense_matrix(system: LinearSystem) -> np.ndarray:
    """Materialize the operator; intended for small verification grids only."""
    n = system.grid.num_nodes
    if n > 20000:
        raise ValueError("dense_matrix is for small grids")
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(_apply_raw(system, e.reshape(system.grid.shape)).reshape(-1))
    return np.stack(cols, axis=1)


def grad_product(coeff: CoefficientField, x: Field, y: Field) -> float:
    """Face-weighted gradient pairing: sum over faces of a * Dx * Dy * h^(d-2)."""
    grid = coeff.grid
    total = 0.0
    for k in range(grid.d):
        dx = face_differences(x.values, k)
        dy = face_differences(y.values, k)
        total += float(np.sum(coeff.faces[k] * dx * dy))
    return total * grid.h ** (grid.d - 2)


def energy(coeff: CoefficientField, x: Field) -> float:
    """Coefficient-weighted gradient energy; equals <A x, x> h^d exactly."""
    return grad_product(coeff, x, x)
