"""Co-tensor fields: grid tensors with a scale-transformation weight.

A co-tensor of power n picks up a factor lambda^n under the scale change
ds -> lambda ds. Fields optionally carry analytic first/second partial
derivatives ("jets"); operations propagate them through products so that
identity tests can separate discretization error from implementation
error. Where a jet is absent, finite differences on the grid are used.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError, UnsupportedRankError
from .grids import COORD_NAMES, DIM, GridSpec


@dataclass(frozen=True)
class CoField:
    grid: GridSpec
    values: np.ndarray                     # grid.shape + (4,)*rank
    power: int = 0
    variance: tuple[str, ...] = ()         # 'u' / 'd' per tensor slot
    partials: np.ndarray | None = None     # values.shape + (4,)
    partials2: np.ndarray | None = None    # values.shape + (4, 4)

    def __post_init__(self):
        expected = self.grid.shape + (DIM,) * self.rank
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")
        if any(v not in ("u", "d") for v in self.variance):
            raise ValueError(f"variance must use 'u'/'d', got {self.variance}")
        if self.partials is not None and self.partials.shape != expected + (DIM,):
            raise ValueError("partials shape mismatch")
        if self.partials2 is not None and self.partials2.shape != expected + (DIM, DIM):
            raise ValueError("partials2 shape mismatch")

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def analytic(self) -> bool:
        return self.partials is not None

    def partial(self) -> np.ndarray:
        """d(values)/dx^c stacked on a trailing axis; analytic jet if present."""
        if self.partials is not None:
            return self.partials
        return self.grid.partials(self.values)

    def second_partial(self) -> np.ndarray:
        """Second partials (trailing (4,4) axes); differences the first jet if needed."""
        if self.partials2 is not None:
            return self.partials2
        first = self.partial()
        return np.stack([self.grid.deriv(first, c) for c in range(DIM)], axis=-1)

    def without_jets(self) -> "CoField":
        """Copy that forgets analytic derivatives (forces finite differencing)."""
        return replace(self, partials=None, partials2=None)


# -- constructors --------------------------------------------------------------


def _eval_on(grid: GridSpec, fn_or_values) -> np.ndarray:
    if callable(fn_or_values):
        return grid.evaluate(fn_or_values)
    arr = np.asarray(fn_or_values, dtype=float)
    if arr.shape != grid.shape:
        arr = np.broadcast_to(arr, grid.shape).copy()
    return arr


def scalar_cofield(
    grid: GridSpec,
    fn_or_values,
    power: int = 0,
    deriv: Mapping[str, Callable] | None = None,
    deriv2: Mapping[str, Callable] | None = None,
) -> CoField:
    """Scalar co-field; `deriv`/`deriv2` give analytic partials keyed by
    coordinate name ("x") / name pair ("xy"); omitted keys are zero."""
    values = _eval_on(grid, fn_or_values)
    partials = partials2 = None
    if deriv is not None:
        partials = np.zeros(grid.shape + (DIM,))
        for name, fn in deriv.items():
            partials[..., COORD_NAMES.index(name)] = _eval_on(grid, fn)
    if deriv2 is not None:
        if deriv is None:
            raise ValueError("deriv2 requires deriv")
        partials2 = np.zeros(grid.shape + (DIM, DIM))
        for names, fn in deriv2.items():
            a, b = COORD_NAMES.index(names[0]), COORD_NAMES.index(names[1])
            arr = _eval_on(grid, fn)
            partials2[..., a, b] = arr
            if a != b:
                partials2[..., b, a] = arr
    return CoField(grid, values, power, (), partials, partials2)


def constant_cofield(grid: GridSpec, tensor: np.ndarray, power: int, variance: tuple[str, ...]) -> CoField:
    """Spatially constant tensor; carries exact zero jets."""
    tensor = np.asarray(tensor, dtype=float)
    rank = len(variance)
    if tensor.shape != (DIM,) * rank:
        raise ValueError(f"tensor shape {tensor.shape} != {(DIM,) * rank}")
    values = np.broadcast_to(tensor, grid.shape + tensor.shape).copy()
    return CoField(
        grid,
        values,
        power,
        variance,
        partials=np.zeros(values.shape + (DIM,)),
        partials2=np.zeros(values.shape + (DIM, DIM)),
    )


def covector_cofield(grid: GridSpec, components: Mapping[str, object], power: int = 0) -> CoField:
    """Rank-1 covariant field from per-coordinate components (values or callables)."""
    values = np.zeros(grid.shape + (DIM,))
    for name, comp in components.items():
        values[..., COORD_NAMES.index(name)] = _eval_on(grid, comp)
    return CoField(grid, values, power, ("d",))


def gradient_cofield(scalar: CoField, power: int = 0) -> CoField:
    """Coordinate gradient of a scalar as a rank-1 'd' field (jet-aware)."""
    if scalar.rank != 0:
        raise UnsupportedRankError("gradient_cofield expects a scalar")
    partials = scalar.partials2 if scalar.partials2 is not None else None
    return CoField(scalar.grid, scalar.partial(), power, ("d",), partials)


# -- algebra --------------------------------------------------------------------


def scale_values(f: CoField, lam, exponent: int | None = None) -> CoField:
    """Apply the co-tensor transformation law: values -> lambda^n * values.

    `lam` is a positive scalar jet (CoField), array, or number; `exponent`
    overrides f.power (used internally for non-co-tensor bookkeeping).
    """
    n = f.power if exponent is None else exponent
    if isinstance(lam, CoField):
        lam_vals, lam_d, lam_dd = lam.values, lam.partials, lam.partials2
    else:
        lam_vals = _eval_on(f.grid, lam)
        lam_d = lam_dd = None
    if np.any(lam_vals <= 0):
        raise DomainError("scale factor lambda must be positive everywhere")
    ext = lam_vals.reshape(lam_vals.shape + (1,) * f.rank)
    values = ext**n * f.values
    partials = partials2 = None
    if f.partials is not None and lam_d is not None:
        lam_de = lam_d.reshape(lam_vals.shape + (1,) * f.rank + (DIM,))
        partials = n * ext[..., None] ** (n - 1) * lam_de * f.values[..., None] + ext[..., None] ** n * f.partials
        if f.rank == 0 and f.partials2 is not None and lam_dd is not None:
            lv, ld, ldd = lam_vals, lam_d, lam_dd
            outer_ll = ld[..., :, None] * ld[..., None, :]
            cross = ld[..., :, None] * f.partials[..., None, :]
            partials2 = (
                n * (n - 1) * lv[..., None, None] ** (n - 2) * outer_ll * f.values[..., None, None]
                + n * lv[..., None, None] ** (n - 1) * ldd * f.values[..., None, None]
                + n * lv[..., None, None] ** (n - 1) * (cross + np.swapaxes(cross, -1, -2))
                + lv[..., None, None] ** n * f.partials2
            )
    return CoField(f.grid, values, f.power, f.variance, partials, partials2)


def cofield_product(a: CoField, b: CoField) -> CoField:
    """Outer product; powers add (co-tensor product law), jets via product rule."""
    if a.grid is not b.grid and a.grid != b.grid:
        raise ValueError("fields live on different grids")
    ga = len(a.grid.shape)
    av = a.values.reshape(a.values.shape + (1,) * b.rank)
    bv = b.values.reshape(b.grid.shape + (1,) * a.rank + (DIM,) * b.rank)
    values = av * bv
    partials = None
    if a.partials is not None and b.partials is not None:
        ad = a.partials.reshape(a.values.shape + (1,) * b.rank + (DIM,))
        bd = b.partials.reshape(b.grid.shape + (1,) * a.rank + (DIM,) * b.rank + (DIM,))
        partials = ad * bv[..., None] + av[..., None] * bd
    return CoField(a.grid, values, a.power + b.power, a.variance + b.variance, partials)
