"""Structured grids over a 4D (t, x, y, z) tangent space.

Tensor indices always run over the four coordinates t, x, y, z. A grid
carries axes only for the coordinates a field actually varies along;
derivatives along absent coordinates are identically zero (static /
translation-invariant directions). This keeps 1D/2D/3D problems and
static space-times in one representation while every 4D identity stays
exact.

Finite differences are 2nd order: central in the interior, one-sided at
non-periodic boundaries (numpy.gradient), wrap-around on periodic axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ExitDomainError, StencilError

COORD_NAMES = ("t", "x", "y", "z")
DIM = 4

MIN_POINTS = 5  # curvature stencils (repeated 2nd-order differences) need 5 points


@dataclass(frozen=True)
class Axis:
    """One grid axis. For periodic axes `hi` is the wrap point and is excluded."""

    name: str
    lo: float
    hi: float
    n: int
    periodic: bool = False

    def __post_init__(self):
        if self.name not in COORD_NAMES:
            raise ValueError(f"axis name must be one of {COORD_NAMES}, got {self.name!r}")
        if self.n < MIN_POINTS:
            raise StencilError(f"axis {self.name!r}: need at least {MIN_POINTS} points, got {self.n}")
        if not self.hi > self.lo:
            raise ValueError(f"axis {self.name!r}: extent [{self.lo}, {self.hi}] is empty")

    @property
    def spacing(self) -> float:
        span = self.hi - self.lo
        return span / self.n if self.periodic else span / (self.n - 1)

    @property
    def coords(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.n)


@dataclass(frozen=True)
class GridSpec:
    """Ordered axes (t first if present, then x, y, z)."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        names = [ax.name for ax in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate axis names: {names}")
        order = [COORD_NAMES.index(n) for n in names]
        if order != sorted(order):
            raise ValueError(f"axes must be ordered t, x, y, z; got {names}")
        if not any(n != "t" for n in names):
            raise ValueError("grid needs at least one spatial axis")

    # -- shape & coordinate bookkeeping -------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.n for ax in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def has_time(self) -> bool:
        return self.axes[0].name == "t"

    @property
    def spatial_axes(self) -> tuple[Axis, ...]:
        return tuple(ax for ax in self.axes if ax.name != "t")

    def axis(self, name: str) -> Axis:
        for ax in self.axes:
            if ax.name == name:
                return ax
        raise KeyError(f"grid has no {name!r} axis")

    def array_axis(self, coord: int) -> int | None:
        """Array axis holding coordinate index `coord` (0=t..3=z), or None if absent."""
        name = COORD_NAMES[coord]
        for pos, ax in enumerate(self.axes):
            if ax.name == name:
                return pos
        return None

    def meshes(self) -> dict[str, np.ndarray]:
        """Broadcastable coordinate arrays keyed by axis name."""
        arrays = np.meshgrid(*[ax.coords for ax in self.axes], indexing="ij", sparse=True)
        return {ax.name: arr for ax, arr in zip(self.axes, arrays)}

    def evaluate(self, fn: Callable) -> np.ndarray:
        """Evaluate fn(**coords) on the grid; result broadcast to full shape."""
        out = np.asarray(fn(**self.meshes()))
        if out.shape != self.shape:
            out = np.broadcast_to(out, self.shape).copy()
        return out

    @property
    def max_spacing(self) -> float:
        return max(ax.spacing for ax in self.axes)

    # -- differencing --------------------------------------------------------

    def deriv(self, values: np.ndarray, coord: int) -> np.ndarray:
        """d(values)/d(coord). Zero for coordinates the grid does not resolve.

        `values` may carry trailing tensor axes; grid axes come first.
        """
        pos = self.array_axis(coord)
        if pos is None:
            return np.zeros_like(values)
        ax = self.axes[pos]
        if ax.periodic:
            return (np.roll(values, -1, axis=pos) - np.roll(values, 1, axis=pos)) / (2.0 * ax.spacing)
        return np.gradient(values, ax.spacing, axis=pos, edge_order=2)

    def partials(self, values: np.ndarray) -> np.ndarray:
        """All four coordinate derivatives, stacked on a new trailing axis."""
        return np.stack([self.deriv(values, c) for c in range(DIM)], axis=-1)

    def interior_mask(self, margin: int) -> np.ndarray:
        """True away from non-periodic boundaries (margin cells stripped per end)."""
        mask = np.ones(self.shape, dtype=bool)
        for pos, ax in enumerate(self.axes):
            if ax.periodic or margin == 0:
                continue
            if 2 * margin >= ax.n:
                raise StencilError(f"axis {ax.name!r}: margin {margin} eats the whole axis (n={ax.n})")
            sl = [slice(None)] * self.ndim
            sl[pos] = slice(0, margin)
            mask[tuple(sl)] = False
            sl[pos] = slice(ax.n - margin, ax.n)
            mask[tuple(sl)] = False
        return mask

    # -- quadrature ----------------------------------------------------------

    def integration_weights(self) -> np.ndarray:
        """Trapezoid weights (rectangle on periodic axes), broadcast to grid shape."""
        w = np.ones(self.shape)
        for pos, ax in enumerate(self.axes):
            wa = np.full(ax.n, ax.spacing)
            if not ax.periodic:
                wa[0] *= 0.5
                wa[-1] *= 0.5
            shape = [1] * self.ndim
            shape[pos] = ax.n
            w = w * wa.reshape(shape)
        return w

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.integration_weights()))

    # -- point lookup ---------------------------------------------------------

    def contains(self, point4: Sequence[float]) -> bool:
        for pos, ax in enumerate(self.axes):
            c = point4[COORD_NAMES.index(ax.name)]
            if ax.periodic:
                continue
            if c < ax.lo or c > ax.hi:
                return False
        return True

    def nearest_index(self, point4: Sequence[float]) -> tuple[int, ...]:
        idx = []
        for ax in self.axes:
            c = point4[COORD_NAMES.index(ax.name)]
            i = int(round((c - ax.lo) / ax.spacing))
            idx.append(min(max(i, 0), ax.n - 1))
        return tuple(idx)


# -- constructors -------------------------------------------------------------


def spatial_grid_1d(lo: float, hi: float, n: int, periodic: bool = False) -> GridSpec:
    return GridSpec((Axis("x", lo, hi, n, periodic),))


def spatial_grid_2d(extent_x, extent_y, n_x: int, n_y: int, periodic: bool = False) -> GridSpec:
    return GridSpec(
        (
            Axis("x", extent_x[0], extent_x[1], n_x, periodic),
            Axis("y", extent_y[0], extent_y[1], n_y, periodic),
        )
    )


def with_time_axis(grid: GridSpec, t_lo: float, t_hi: float, n_t: int) -> GridSpec:
    """Prepend a (non-periodic) time axis to a spatial grid."""
    if grid.has_time:
        raise ValueError("grid already has a time axis")
    return GridSpec((Axis("t", t_lo, t_hi, n_t),) + grid.axes)


# -- interpolation ------------------------------------------------------------


def interpolate(grid: GridSpec, values: np.ndarray, point4: Sequence[float]) -> np.ndarray:
    """Multilinear interpolation of `values` at a 4D point.

    Trailing tensor axes of `values` are carried through. Raises
    ExitDomainError outside non-periodic extents.
    """
    out = values
    for pos, ax in enumerate(grid.axes):
        c = float(point4[COORD_NAMES.index(ax.name)])
        h = ax.spacing
        if ax.periodic:
            f = (c - ax.lo) / h % ax.n
            i0 = int(np.floor(f)) % ax.n
            i1 = (i0 + 1) % ax.n
            w = f - np.floor(f)
        else:
            if c < ax.lo - 1e-12 * max(1.0, abs(ax.lo)) or c > ax.hi + 1e-12 * max(1.0, abs(ax.hi)):
                raise ExitDomainError(f"coordinate {ax.name}={c:g} outside [{ax.lo:g}, {ax.hi:g}]")
            f = np.clip((c - ax.lo) / h, 0.0, ax.n - 1)
            i0 = min(int(np.floor(f)), ax.n - 2)
            i1 = i0 + 1
            w = f - i0
        # axis `pos` has already been collapsed for earlier axes, so it is axis 0 now
        out = (1.0 - w) * np.take(out, i0, axis=0) + w * np.take(out, i1, axis=0)
    return out


def interpolate_many(grid: GridSpec, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Vectorized multilinear interpolation on purely spatial 1D/2D grids.

    `points` has shape (n, ndim) in grid-axis order; out-of-domain points on
    non-periodic axes are clamped (callers detect exits separately).
    """
    if grid.has_time:
        raise ValueError("interpolate_many expects a spatial grid")
    pts = np.atleast_2d(points)
    idx0, weights = [], []
    for pos, ax in enumerate(grid.axes):
        f = (pts[:, pos] - ax.lo) / ax.spacing
        if ax.periodic:
            f = f % ax.n
            i0 = np.floor(f).astype(int) % ax.n
        else:
            f = np.clip(f, 0.0, ax.n - 1)
            i0 = np.minimum(np.floor(f).astype(int), ax.n - 2)
        idx0.append(i0)
        weights.append(f - np.floor(f) if ax.periodic else f - i0)
    if grid.ndim == 1:
        i0, w = idx0[0], weights[0]
        i1 = (i0 + 1) % grid.axes[0].n if grid.axes[0].periodic else i0 + 1
        return (1 - w) * values[i0] + w * values[i1]
    if grid.ndim == 2:
        i0, j0 = idx0
        wx, wy = weights
        nx, ny = grid.shape
        i1 = (i0 + 1) % nx if grid.axes[0].periodic else i0 + 1
        j1 = (j0 + 1) % ny if grid.axes[1].periodic else j0 + 1
        return (
            (1 - wx) * (1 - wy) * values[i0, j0]
            + wx * (1 - wy) * values[i1, j0]
            + (1 - wx) * wy * values[i0, j1]
            + wx * wy * values[i1, j1]
        )
    raise ValueError(f"unsupported grid dimension {grid.ndim}")
