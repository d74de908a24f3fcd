"""Integrable Weyl space geometry on grids.

A Weyl structure is a metric g_ik plus a scale vector k_l. Lengths change
under parallel transport by 2(x.x) k_l dx^l; when k is closed (integrable
case) a positive scale factor b with k = -grad(b)/b carries the same
information. All operations work in the fixed 4D tangent space of
`grids`, with signature (+,-,-,-).

Conventions (index order of returned arrays):
    christoffel / connection:  Gamma[..., i, k, l] = Gamma^i_{kl}
    covariant derivative of k: kcov[..., m, n]     = k_{m;n}
    curvature contractions:    R1[..., m, n]       = R1_{mn}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .cofields import CoField, constant_cofield, scalar_cofield, scale_values
from .errors import (
    DegenerateMetricError,
    DomainError,
    IntegrabilityError,
    UnsupportedRankError,
)
from .grids import COORD_NAMES, DIM, GridSpec

MINKOWSKI = np.diag([1.0, -1.0, -1.0, -1.0])

_EYE = np.eye(DIM)


def minkowski_metric(grid: GridSpec) -> CoField:
    return constant_cofield(grid, MINKOWSKI, power=2, variance=("d", "d"))


def zero_scale_vector(grid: GridSpec) -> CoField:
    return constant_cofield(grid, np.zeros(DIM), power=0, variance=("d",))


@dataclass(frozen=True)
class WeylStructure:
    grid: GridSpec
    g: CoField                  # rank-2 'dd', power +2
    k: CoField                  # rank-1 'd', inhomogeneous under rescaling
    b: CoField | None = None    # positive scalar, power -1
    integrable: bool = True
    b_floor: float = 1e-12

    def __post_init__(self):
        if self.g.variance != ("d", "d") or self.g.power != 2:
            raise ValueError("g must be a rank-2 covariant co-field of power +2")
        if self.k.variance != ("d",):
            raise ValueError("k must be a rank-1 covariant field")
        if not np.allclose(self.g.values, np.swapaxes(self.g.values, -1, -2), atol=0.0):
            raise ValueError("metric must be symmetric")
        if self.b is not None:
            if self.b.rank != 0 or self.b.power != -1:
                raise ValueError("b must be a scalar co-field of power -1")
            if np.any(self.b.values <= self.b_floor):
                raise DomainError(f"scale factor b has values <= b_floor={self.b_floor:g}")

    @cached_property
    def g_inv(self) -> np.ndarray:
        det = np.linalg.det(self.g.values)
        bad = np.abs(det) < 1e-12 * max(1.0, float(np.max(np.abs(self.g.values))) ** DIM)
        if np.any(bad):
            loc = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise DegenerateMetricError(loc, det[loc])
        return np.linalg.inv(self.g.values)

    # -- factories -----------------------------------------------------------

    @staticmethod
    def flat(grid: GridSpec) -> "WeylStructure":
        return WeylStructure(grid, minkowski_metric(grid), zero_scale_vector(grid))

    @staticmethod
    def from_scale_factor(grid: GridSpec, b, metric: CoField | None = None,
                          b_floor: float = 1e-12) -> "WeylStructure":
        """Integrable structure with k = -grad(b)/b (Weyl gauge of b)."""
        if not isinstance(b, CoField):
            b = scalar_cofield(grid, b, power=-1)
        elif b.power != -1:
            b = replace(b, power=-1)
        if np.any(b.values <= b_floor):
            raise DomainError(f"scale factor b must exceed b_floor={b_floor:g} everywhere")
        db = b.partial()
        k_values = -db / b.values[..., None]
        k_partials = None
        if b.partials is not None and b.partials2 is not None:
            bv = b.values[..., None, None]
            k_partials = -(b.partials2 / bv - db[..., :, None] * db[..., None, :] / bv**2)
        k = CoField(grid, k_values, 0, ("d",), k_partials)
        g = metric if metric is not None else minkowski_metric(grid)
        return WeylStructure(grid, g, k, b=b, b_floor=b_floor)

    @staticmethod
    def from_k(grid: GridSpec, k: CoField, metric: CoField | None = None,
               integrable: bool = True) -> "WeylStructure":
        g = metric if metric is not None else minkowski_metric(grid)
        return WeylStructure(grid, g, k, integrable=integrable)

    def scale_factor_consistency(self) -> float:
        """max |k + grad(b)/b|; zero (to differencing error) when consistent."""
        if self.b is None:
            raise ValueError("structure carries no scale factor b")
        db = self.b.partial()
        return float(np.max(np.abs(self.k.values + db / self.b.values[..., None])))


# -- connection ----------------------------------------------------------------


def christoffel(w: WeylStructure) -> np.ndarray:
    """Riemannian Christoffel symbols gamma^i_{kl} of g alone."""
    dg = w.g.partial()  # dg[..., a, b, c] = g_{ab,c}
    t = dg + np.swapaxes(dg, -2, -1) - np.moveaxis(dg, -1, -3)
    # t[..., m, k, l] = g_{mk,l} + g_{ml,k} - g_{kl,m}
    return 0.5 * np.einsum("...im,...mkl->...ikl", w.g_inv, t)


def weyl_connection(w: WeylStructure, gamma: np.ndarray | None = None) -> np.ndarray:
    """Affine connection Gamma^i_{kl} = gamma^i_{kl} - (d^i_k k_l + d^i_l k_k - g_kl k^i)."""
    if gamma is None:
        gamma = christoffel(w)
    k = w.k.values
    k_up = np.einsum("...il,...l->...i", w.g_inv, k)
    extra = (
        np.einsum("ik,...l->...ikl", _EYE, k)
        + np.einsum("il,...k->...ikl", _EYE, k)
        - np.einsum("...kl,...i->...ikl", w.g.values, k_up)
    )
    return gamma - extra


def _covariant_deriv_k(w: WeylStructure, gamma: np.ndarray) -> np.ndarray:
    """k_{m;n} with the Christoffel (semicolon) connection."""
    dk = w.k.partial()  # dk[..., m, n] = k_{m,n}
    return dk - np.einsum("...lmn,...l->...mn", gamma, w.k.values)


def _christoffel_partials(w: WeylStructure, gamma: np.ndarray) -> np.ndarray:
    """d(gamma^i_{kl})/dx^c; analytic when the metric carries a full jet."""
    if w.g.partials is not None and w.g.partials2 is not None:
        dg, d2g = w.g.partials, w.g.partials2
        t = dg + np.swapaxes(dg, -2, -1) - np.moveaxis(dg, -1, -3)
        dt = (
            d2g
            + np.swapaxes(d2g, -3, -2)
            - np.moveaxis(d2g, -2, -4)
        )
        # dt[..., m, k, l, c] = d_c t[..., m, k, l]
        dginv = -np.einsum("...ia,...abc,...bm->...imc", w.g_inv, dg, w.g_inv)
        return 0.5 * (
            np.einsum("...imc,...mkl->...iklc", dginv, t)
            + np.einsum("...im,...mklc->...iklc", w.g_inv, dt)
        )
    return w.grid.partials(gamma)


@dataclass(frozen=True)
class CurvatureBundle:
    """Connection and the contracted curvatures of a Weyl structure."""

    grid: GridSpec
    christoffel: np.ndarray     # gamma^i_{kl}
    connection: np.ndarray      # Gamma^i_{kl}
    R1: np.ndarray              # R1_{mn}
    R2: np.ndarray              # R2_{mn} = R1 - 2F
    R3: np.ndarray              # R3_{mn} = 4F
    F: np.ndarray               # F_{mn} = k_{n;m} - k_{m;n}
    R: np.ndarray               # Weyl scalar curvature
    r: np.ndarray               # Riemannian scalar of g
    ricci_riemann: np.ndarray   # r_{mn}


def curvature(w: WeylStructure) -> CurvatureBundle:
    """All contracted curvatures; scalar via R = r - 6 k^l_;l + 6 k^l k_l."""
    gamma = christoffel(w)
    conn = weyl_connection(w, gamma)
    kcov = _covariant_deriv_k(w, gamma)
    F = np.swapaxes(kcov, -1, -2) - kcov

    dgamma = _christoffel_partials(w, gamma)
    t1 = np.einsum("...cmcn->...mn", dgamma)          # d_n gamma^c_{mc}
    t2 = np.einsum("...cmnc->...mn", dgamma)          # d_c gamma^c_{mn}
    q1 = np.einsum("...pmc,...cpn->...mn", gamma, gamma)
    gtrace = np.einsum("...cpc->...p", gamma)
    q2 = np.einsum("...pmn,...p->...mn", gamma, gtrace)
    r_mn = t1 - t2 + q1 - q2

    k = w.k.values
    k_up = np.einsum("...il,...l->...i", w.g_inv, k)
    k_div = np.einsum("...mn,...mn->...", w.g_inv, kcov)
    k_sq = np.einsum("...l,...l->...", k_up, k)

    g = w.g.values
    sym = kcov + np.swapaxes(kcov, -1, -2)
    antisym = kcov - np.swapaxes(kcov, -1, -2)
    R1 = (
        r_mn
        - 2.0 * antisym
        - sym
        - g * k_div[..., None, None]
        - 2.0 * np.einsum("...m,...n->...mn", k, k)
        + 2.0 * g * k_sq[..., None, None]
    )
    R2 = R1 - 2.0 * F
    R3 = 4.0 * F
    r_scalar = np.einsum("...mn,...mn->...", w.g_inv, r_mn)
    R = r_scalar - 6.0 * k_div + 6.0 * k_sq
    return CurvatureBundle(w.grid, gamma, conn, R1, R2, R3, F, R, r_scalar, r_mn)


def full_curvature_tensor(w: WeylStructure) -> np.ndarray:
    """R^i_{klm} of the Weyl connection (O(d^4) storage; on demand only).

    R^i_{klm} = Gamma^i_{kl,m} - Gamma^i_{km,l} + Gamma^n_{kl} Gamma^i_{nm}
                - Gamma^n_{km} Gamma^i_{nl}
    """
    conn = weyl_connection(w)
    dG = w.grid.partials(conn)  # dG[..., i, k, l, c] = d_c Gamma^i_{kl}
    quad = np.einsum("...nkl,...inm->...iklm", conn, conn)
    return dG - np.swapaxes(dG, -1, -2) + quad - np.swapaxes(quad, -1, -2)


# -- co-covariant derivative -----------------------------------------------------


def co_derivative(f: CoField, w: WeylStructure, connection: np.ndarray | None = None) -> CoField:
    """Co-covariant derivative: ordinary covariant derivative with the Weyl
    connection, minus n k_d; adds one covariant slot, preserves the power."""
    if f.rank > 2:
        raise UnsupportedRankError(f"co_derivative supports rank <= 2, got {f.rank}")
    G = weyl_connection(w) if connection is None else connection
    n, k = f.power, w.k.values
    df = f.partial()
    v = f.values
    if f.rank == 0:
        out = df - n * k * v[..., None]
    elif f.variance == ("u",):
        out = df + np.einsum("...mdl,...l->...md", G, v) - n * k[..., None, :] * v[..., :, None]
    elif f.variance == ("d",):
        out = df - np.einsum("...lmd,...l->...md", G, v) - n * k[..., None, :] * v[..., :, None]
    else:
        nk = n * k[..., None, None, :] * v[..., :, :, None]
        if f.variance == ("d", "d"):
            out = (
                df
                - np.einsum("...mid,...mk->...ikd", G, v)
                - np.einsum("...mkd,...im->...ikd", G, v)
                - nk
            )
        elif f.variance == ("u", "u"):
            out = (
                df
                + np.einsum("...imd,...mk->...ikd", G, v)
                + np.einsum("...kmd,...im->...ikd", G, v)
                - nk
            )
        elif f.variance == ("u", "d"):
            out = (
                df
                + np.einsum("...imd,...mk->...ikd", G, v)
                - np.einsum("...mkd,...im->...ikd", G, v)
                - nk
            )
        else:  # ('d', 'u')
            out = (
                df
                - np.einsum("...mid,...mk->...ikd", G, v)
                + np.einsum("...kmd,...im->...ikd", G, v)
                - nk
            )
    return CoField(f.grid, out, f.power, f.variance + ("d",))


def metricity_residual(w: WeylStructure, margin: int = 0) -> float:
    """max |g_{ik*l}|; identically ~0 when the same derivative path feeds
    the connection and the derivative, O(h^2) for mixed paths."""
    res = co_derivative(w.g, w).values
    mask = w.grid.interior_mask(margin)
    return float(np.max(np.abs(res[mask])))


# -- scale transformations --------------------------------------------------------


def _as_scalar_jet(grid: GridSpec, lam) -> CoField:
    if isinstance(lam, CoField):
        if lam.rank != 0:
            raise ValueError("scale factor lambda must be a scalar field")
        return lam
    return scalar_cofield(grid, lam)


def scale_transform(obj, lam):
    """Apply ds -> lambda ds: g -> lambda^2 g, k -> k + grad(ln lambda),
    b -> b/lambda, and a generic co-field -> lambda^n * field."""
    if isinstance(obj, CoField):
        return scale_values(obj, lam)
    w: WeylStructure = obj
    lam_f = _as_scalar_jet(w.grid, lam)
    if np.any(lam_f.values <= 0):
        raise DomainError("scale factor lambda must be positive everywhere")
    g_bar = scale_values(w.g, lam_f)
    dlam = lam_f.partial()
    k_values = w.k.values + dlam / lam_f.values[..., None]
    k_partials = None
    if w.k.partials is not None and lam_f.partials2 is not None:
        lv = lam_f.values[..., None, None]
        k_partials = w.k.partials + lam_f.partials2 / lv - dlam[..., :, None] * dlam[..., None, :] / lv**2
    k_bar = CoField(w.grid, k_values, 0, ("d",), k_partials)
    b_bar = scale_values(w.b, lam_f) if w.b is not None else None
    return WeylStructure(w.grid, g_bar, k_bar, b_bar, w.integrable, w.b_floor)


# -- integrability and the scale factor -------------------------------------------


def integrability_residual(obj) -> float:
    """max |k_{m,n} - k_{n,m}| over the grid (curl of the scale vector)."""
    k = obj.k if isinstance(obj, WeylStructure) else obj
    dk = k.partial()
    return float(np.max(np.abs(dk - np.swapaxes(dk, -1, -2))))


def reconstruct_b(k: CoField, anchor, value: float, tol: float | None = None,
                  axis_order: tuple[int, ...] | None = None) -> CoField:
    """Scale factor b = value * exp(-int k . dl) along grid-axis paths from
    the anchor point; requires k integrable (path independence to O(h^2))."""
    if value <= 0:
        raise DomainError("anchor value for b must be positive")
    grid = k.grid
    residual = integrability_residual(k)
    if tol is None:
        tol = 1e-2 * (1.0 + float(np.max(np.abs(k.values))))
    if residual > tol:
        raise IntegrabilityError(residual, tol)
    anchor_idx = grid.nearest_index(anchor)
    order = tuple(range(grid.ndim)) if axis_order is None else tuple(axis_order)
    phi = np.zeros(grid.shape)
    done: list[int] = []
    for pos in order:
        ax = grid.axes[pos]
        coord = COORD_NAMES.index(ax.name)
        comp = k.values[..., coord]
        # fix axes not yet integrated over (and not the current one) at the anchor
        sel = [slice(None)] * grid.ndim
        for other in range(grid.ndim):
            if other != pos and other not in done:
                sel[other] = anchor_idx[other]
        sliced = comp[tuple(sel)]
        kept = sorted(done + [pos])
        along = kept.index(pos)
        cum = cumulative_trapezoid(sliced, dx=ax.spacing, axis=along, initial=0.0)
        ref = np.take(cum, anchor_idx[pos], axis=along)
        seg = cum - np.expand_dims(ref, axis=along)
        shape = [1] * grid.ndim
        for j, kp in enumerate(kept):
            shape[kp] = seg.shape[j]
        phi = phi + seg.reshape(shape)
        done.append(pos)
    return CoField(grid, value * np.exp(-phi), power=-1)


# -- Bianchi identity ---------------------------------------------------------------


def bianchi_residual(w: WeylStructure, margin: int = 3) -> float:
    """max |R^i_{k*i} - R_{*k}/2| over the interior (generalized Bianchi)."""
    bundle = curvature(w)
    conn = bundle.connection
    ric_mixed = CoField(
        w.grid,
        np.einsum("...im,...mk->...ik", w.g_inv, bundle.R1),
        power=-2,
        variance=("u", "d"),
    )
    scalar = CoField(w.grid, bundle.R, power=-2)
    div = np.einsum("...iki->...k", co_derivative(ric_mixed, w, conn).values)
    d_scalar = co_derivative(scalar, w, conn).values
    res = div - 0.5 * d_scalar
    mask = w.grid.interior_mask(margin)
    return float(np.max(np.abs(res[mask])))


# -- diagnostics ----------------------------------------------------------------------


def _field_summary(f: CoField) -> dict:
    v = f.values
    return {
        "min": float(np.min(v)),
        "max": float(np.max(v)),
        "norm": float(np.sqrt(np.mean(v**2))),
        "rank": f.rank,
        "power": f.power,
    }


def debug_dump(w: WeylStructure, path=None, include_bianchi: bool = False) -> dict:
    """JSON-ready summary: grid spec, per-field stats, residuals."""
    out = {
        "grid": {
            "axes": [
                {"name": ax.name, "lo": ax.lo, "hi": ax.hi, "n": ax.n, "periodic": ax.periodic}
                for ax in w.grid.axes
            ]
        },
        "fields": {"g": _field_summary(w.g), "k": _field_summary(w.k)},
        "residuals": {
            "integrability": integrability_residual(w),
            "metricity": metricity_residual(w, margin=2),
        },
    }
    if w.b is not None:
        out["fields"]["b"] = _field_summary(w.b)
        out["residuals"]["scale_factor_consistency"] = w.scale_factor_consistency()
    if include_bianchi:
        out["residuals"]["bianchi"] = bianchi_residual(w)
    if path is not None:
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
    return out
