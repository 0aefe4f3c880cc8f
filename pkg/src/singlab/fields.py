"""Uniform tensor-product grids, grid functions, truncations, and norms.

The domain is the unit box [0,1]^d with homogeneous Dirichlet boundary; only
interior node values are stored (boundary values are implicitly zero).  Node
i along an axis sits at (i+1)h with h = 1/(n_cells+1).  Quadrature is the
nodal rule h^d * sum, matching the accuracy of the difference operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Tuple, Union

import numpy as np

from .exponents import Exponent

__all__ = [
    "Field",
    "GridSpec",
    "excess",
    "h1_seminorm",
    "half_box_indicator",
    "load_field",
    "lp_norm",
    "save_field",
    "superlevel_integral",
    "truncate",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform interior grid of the unit box, n_cells nodes per axis.

    The solver accepts d in {1, 2, 3}; d < 3 is a theory-off mode used only
    for discretization testing (the exponent module requires d >= 3).
    """

    d: int
    n_cells: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"solver grids support d in {{1,2,3}}, got {self.d}")
        if self.n_cells < 3:
            raise ValueError(f"n_cells must be >= 3, got {self.n_cells}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_cells + 1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n_cells,) * self.d

    @property
    def num_nodes(self) -> int:
        return self.n_cells**self.d

    @property
    def theory_off(self) -> bool:
        return self.d < 3

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def interior_measure(self) -> float:
        """Quadrature measure of the node set, h^d * n_cells^d."""
        return self.cell_volume * self.num_nodes

    def coords(self) -> np.ndarray:
        """Interior node coordinates along one axis."""
        return np.arange(1, self.n_cells + 1) * self.h

    def meshgrid(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.coords()] * self.d), indexing="ij"))


@dataclass(frozen=True)
class Field:
    """Real grid function on the interior nodes; boundary trace is zero.

    Values are copied on construction and frozen, so fields can be shared
    freely across threads and audits.
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape == (self.grid.num_nodes,):
            v = v.reshape(self.grid.shape)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[..., np.ndarray]) -> "Field":
        """Sample fn(x1, ..., xd) at the interior nodes."""
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=np.float64))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min(self) -> float:
        return float(np.min(self.values))


def half_box_indicator(grid: GridSpec) -> Field:
    """Indicator of the centered box of half side length, [1/4, 3/4]^d."""
    mesh = grid.meshgrid()
    inside = np.ones(grid.shape, dtype=bool)
    for x in mesh:
        inside &= (x >= 0.25) & (x <= 0.75)
    return Field(grid, inside.astype(np.float64))


def truncate(f: Field, k: float) -> Field:
    """Clamp nodal values to [-k, k]."""
    if k < 0:
        raise ValueError(f"truncation level must be >= 0, got {k}")
    return Field(f.grid, np.clip(f.values, -k, k))


def excess(f: Field, k: float) -> Field:
    """Signed excess beyond level k: (|s| - k)_+ * sign(s)."""
    if k < 0:
        raise ValueError(f"truncation level must be >= 0, got {k}")
    v = f.values
    return Field(f.grid, np.sign(v) * np.maximum(np.abs(v) - k, 0.0))


def _exponent_to_float(p: Union[float, int, Fraction, Exponent]) -> float:
    if isinstance(p, Exponent):
        if p.is_any_finite:
            raise ValueError("'any-finite' is not a concrete exponent; pick a rational")
        return float(p)
    if isinstance(p, Fraction):
        return float(p)
    return float(p)


def lp_norm(f: Field, p: Union[float, int, Fraction, Exponent]) -> float:
    """Discrete L^p norm (h^d sum |f|^p)^(1/p); sup norm for p = inf."""
    pf = _exponent_to_float(p)
    if math.isinf(pf):
        return f.sup()
    if pf < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    hd = f.grid.cell_volume
    return float((hd * np.sum(np.abs(f.values) ** pf)) ** (1.0 / pf))


def face_differences(values: np.ndarray, axis: int) -> np.ndarray:
    """Nodal differences across every face along an axis, boundary included.

    Returns n_cells+1 entries along `axis`: (u_0 - 0), (u_1 - u_0), ...,
    (0 - u_{n-1}).  These are undivided differences (no 1/h factor).
    """
    return np.diff(values, axis=axis, prepend=0.0, append=0.0)


def h1_seminorm(f: Field) -> float:
    """Discrete gradient norm: sqrt(sum over faces of (D/h)^2 * h^d)."""
    total = 0.0
    for k in range(f.grid.d):
        diffs = face_differences(f.values, k)
        total += float(np.sum(diffs * diffs))
    return math.sqrt(total * f.grid.h ** (f.grid.d - 2))


def superlevel_integral(f: Field, weight: Field, h_level: float) -> float:
    """h^d * sum of `weight` over nodes where f >= h_level."""
    mask = f.values >= h_level
    return float(f.grid.cell_volume * np.sum(weight.values[mask]))


def save_field(f: Field, path) -> None:
    """Write 'd,n_cells' header then one value per line, lexicographic order."""
    with open(path, "w") as fh:
        fh.write(f"{f.grid.d},{f.grid.n_cells}\n")
        for value in f.values.reshape(-1):
            fh.write(f"{float(value)!r}\n")


def load_field(path) -> Field:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            d_str, n_str = header.split(",")
            grid = GridSpec(int(d_str), int(n_str))
        except Exception as exc:
            raise ValueError(f"bad field header {header!r}") from exc
        flat = np.array([float(line) for line in fh if line.strip()], dtype=np.float64)
    if flat.size != grid.num_nodes:
        raise ValueError(f"expected {grid.num_nodes} values, found {flat.size}")
    return Field(grid, flat.reshape(grid.shape))
