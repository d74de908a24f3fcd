import numpy as np
import pytest

from weylflow.cofields import CoField, covector_cofield, scalar_cofield
from weylflow.errors import DegenerateMetricError, DomainError, IntegrabilityError, UnsupportedRankError
from weylflow.geometry import (
    MINKOWSKI,
    WeylStructure,
    bianchi_residual,
    christoffel,
    co_derivative,
    curvature,
    debug_dump,
    full_curvature_tensor,
    integrability_residual,
    metricity_residual,
    minkowski_metric,
    reconstruct_b,
    scale_transform,
    weyl_connection,
)
from weylflow.grids import GridSpec, Axis, spatial_grid_1d, spatial_grid_2d


def exp_scale_factor(grid, c=0.7):
    """b = exp(c x) with a full analytic jet."""
    return scalar_cofield(
        grid,
        lambda x: np.exp(c * x),
        power=-1,
        deriv={"x": lambda x: c * np.exp(c * x)},
        deriv2={"xx": lambda x: c * c * np.exp(c * x)},
    )


def periodic_scale_factor(grid, amp=0.4):
    """b = exp(amp sin x) on a periodic grid, full jet."""
    e = lambda x: np.exp(amp * np.sin(x))
    return scalar_cofield(
        grid,
        e,
        power=-1,
        deriv={"x": lambda x: amp * np.cos(x) * e(x)},
        deriv2={"xx": lambda x: (amp * np.cos(x) ** 2 * amp - amp * np.sin(x)) * e(x)},
    )


def analytic_lambda(grid, amp=0.2):
    e = lambda x: np.exp(amp * np.sin(x))
    return scalar_cofield(
        grid,
        e,
        deriv={"x": lambda x: amp * np.cos(x) * e(x)},
        deriv2={"xx": lambda x: (amp**2 * np.cos(x) ** 2 - amp * np.sin(x)) * e(x)},
    )


# ---------------------------------------------------------------- connection


def test_flat_connection_vanishes():
    grid = spatial_grid_1d(-1, 1, 21)
    w = WeylStructure.flat(grid)
    assert np.max(np.abs(weyl_connection(w))) == 0.0


def test_connection_scale_invariance_conformal_flat():
    # g = lambda^2 eta with k = grad(ln lambda) is gauge-equivalent to flat space
    grid = spatial_grid_1d(0, 2 * np.pi, 32, periodic=True)
    lam = analytic_lambda(grid)
    w = scale_transform(WeylStructure.flat(grid), lam)
    assert np.max(np.abs(weyl_connection(w))) < 1e-13


def test_connection_constant_k_components():
    # frozen from the symbolic expansion of the connection for flat g, k_x = -c
    c = 0.8
    grid = spatial_grid_1d(-1, 1, 11)
    k = covector_cofield(grid, {"x": lambda x: np.full_like(x, -c)})
    w = WeylStructure.from_k(grid, k)
    G = weyl_connection(w)
    t, x, y, z = 0, 1, 2, 3
    expected = {
        (t, t, x): c, (t, x, t): c,
        (x, t, t): c, (x, x, x): c,
        (x, y, y): -c, (x, z, z): -c,
        (y, x, y): c, (y, y, x): c,
        (z, x, z): c, (z, z, x): c,
    }
    for i in range(4):
        for kk in range(4):
            for l in range(4):
                want = expected.get((i, kk, l), 0.0)
                assert np.allclose(G[..., i, kk, l], want, atol=1e-13), (i, kk, l)


def test_connection_symmetric_lower_indices():
    grid = spatial_grid_1d(0, 2 * np.pi, 24, periodic=True)
    w = WeylStructure.from_scale_factor(grid, periodic_scale_factor(grid))
    G = weyl_connection(w)
    assert np.allclose(G, np.swapaxes(G, -1, -2), atol=1e-14)


def test_degenerate_metric_reported_with_location():
    grid = spatial_grid_1d(0, 1, 8)
    vals = np.broadcast_to(MINKOWSKI, grid.shape + (4, 4)).copy()
    vals[3] = 0.0
    g = CoField(grid, vals, power=2, variance=("d", "d"))
    w = WeylStructure(grid, g, covector_cofield(grid, {}), integrable=False)
    with pytest.raises(DegenerateMetricError) as err:
        weyl_connection(w)
    assert err.value.location == (3,)


# ---------------------------------------------------------------- co-derivative


def test_co_derivative_scalar_power_zero_is_gradient():
    grid = spatial_grid_1d(0, 2 * np.pi, 32, periodic=True)
    w = WeylStructure.from_scale_factor(grid, periodic_scale_factor(grid))
    s = scalar_cofield(grid, lambda x: np.sin(2 * x), power=0)
    ds = co_derivative(s, w)
    assert ds.power == 0
    assert ds.variance == ("d",)
    assert np.allclose(ds.values, s.partial(), atol=1e-14)


def test_metricity_identity_same_path():
    # same derivative arrays feed the connection and the derivative: exact
    grid = spatial_grid_1d(0, 2 * np.pi, 24, periodic=True)
    lam = analytic_lambda(grid, amp=0.3)
    w = scale_transform(WeylStructure.flat(grid), lam)
    assert metricity_residual(w) < 1e-12
    w_fd = WeylStructure(grid, w.g.without_jets(), w.k.without_jets(), integrable=w.integrable)
    assert metricity_residual(w_fd) < 1e-12


def test_metricity_mixed_path_second_order():
    errs = []
    for n in (32, 64):
        grid = spatial_grid_1d(0, 2 * np.pi, n, periodic=True)
        lam = analytic_lambda(grid, amp=0.3)
        w = scale_transform(WeylStructure.flat(grid), lam)
        # numeric derivative of g against the analytic connection
        w_mixed = WeylStructure(grid, w.g, w.k, integrable=True)
        res = co_derivative(w.g.without_jets(), w_mixed).values
        errs.append(np.max(np.abs(res)))
    assert errs[1] < errs[0] / 3.0


def test_scale_factor_is_co_covariant_constant():
    # b_{*i} = 0 exactly when k is built from the same derivative of b
    grid = spatial_grid_1d(-1, 1, 21)
    w = WeylStructure.from_scale_factor(grid, exp_scale_factor(grid))
    res = co_derivative(w.b, w).values
    assert np.max(np.abs(res)) < 1e-14
    # and with pure differencing
    w_fd = WeylStructure.from_scale_factor(grid, exp_scale_factor(grid).without_jets())
    res_fd = co_derivative(w_fd.b, w_fd).values
    assert np.max(np.abs(res_fd)) < 1e-13


def test_co_derivative_rejects_rank_3():
    grid = spatial_grid_1d(0, 1, 8)
    w = WeylStructure.flat(grid)
    vals = np.zeros(grid.shape + (4, 4, 4))
    f = CoField(grid, vals, 0, ("d", "d", "d"))
    with pytest.raises(UnsupportedRankError):
        co_derivative(f, w)


# ---------------------------------------------------------------- curvature


def test_flat_curvature_zero():
    grid = spatial_grid_2d((-1, 1), (-1, 1), 9, 9)
    bundle = curvature(WeylStructure.flat(grid))
    for arr in (bundle.R1, bundle.R2, bundle.R3, bundle.F, bundle.R, bundle.r):
        assert np.max(np.abs(arr)) == 0.0


def test_curvature_cos_scale_factor():
    # flat static 1D, b = cos x near 0: R = 6 box(b)/b = 6
    grid = spatial_grid_1d(-0.5, 0.5, 41)
    b = scalar_cofield(
        grid,
        lambda x: np.cos(x),
        power=-1,
        deriv={"x": lambda x: -np.sin(x)},
        deriv2={"xx": lambda x: -np.cos(x)},
    )
    w = WeylStructure.from_scale_factor(grid, b)
    bundle = curvature(w)
    assert np.allclose(bundle.R, 6.0, atol=1e-12)
    # numeric route converges at 2nd order
    errs = []
    for n in (41, 81):
        g2 = spatial_grid_1d(-0.5, 0.5, n)
        w2 = WeylStructure.from_scale_factor(g2, g2.evaluate(np.cos))
        e = np.abs(curvature(w2).R - 6.0)
        errs.append(np.max(e[g2.interior_mask(2)]))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0] / 3.0


def test_curvature_exponential_scale_factor():
    # b = e^{cx}: R = -6 c^2 (signature +,-,-,-)
    c = 0.7
    grid = spatial_grid_1d(-1, 1, 31)
    w = WeylStructure.from_scale_factor(grid, exp_scale_factor(grid, c))
    bundle = curvature(w)
    assert np.allclose(bundle.R, -6.0 * c * c, atol=1e-12)


def test_integrable_curvature_contractions():
    grid = spatial_grid_1d(0, 2 * np.pi, 32, periodic=True)
    w = WeylStructure.from_scale_factor(grid, periodic_scale_factor(grid))
    bundle = curvature(w)
    assert np.max(np.abs(bundle.F)) < 1e-12
    assert np.allclose(bundle.R1, bundle.R2, atol=1e-12)
    assert np.max(np.abs(bundle.R3)) < 1e-12
    # trace identity: R = g^{mn} R1_mn
    trace = np.einsum("...mn,...mn->...", w.g_inv, bundle.R1)
    assert np.allclose(trace, bundle.R, atol=1e-10)


def test_nonintegrable_k_has_R3_equal_4F():
    grid = spatial_grid_2d((-1, 1), (-1, 1), 17, 17)
    k = covector_cofield(grid, {"x": lambda x, y: -y, "y": lambda x, y: x})
    w = WeylStructure.from_k(grid, k, integrable=False)
    bundle = curvature(w)
    assert np.allclose(bundle.R3, 4.0 * bundle.F, atol=1e-12)
    assert np.allclose(bundle.R2, bundle.R1 - 2.0 * bundle.F, atol=1e-12)
    assert np.max(np.abs(bundle.F)) > 1.0


def test_full_curvature_tensor_contractions_match():
    grid = spatial_grid_1d(0, 2 * np.pi, 64, periodic=True)
    w = WeylStructure.from_scale_factor(grid, periodic_scale_factor(grid, amp=0.2).without_jets())
    bundle = curvature(w)
    riemann = full_curvature_tensor(w)
    r1 = np.einsum("...cmcn->...mn", riemann)
    r3 = np.einsum("...ccmn->...mn", riemann)
    assert np.max(np.abs(r1 - bundle.R1)) < 5e-3
    assert np.max(np.abs(r3 - bundle.R3)) < 5e-3


# ---------------------------------------------------------------- scale transform


def test_scale_transform_identity():
    grid = spatial_grid_1d(-1, 1, 16)
    w = WeylStructure.from_scale_factor(grid, exp_scale_factor(grid))
    w1 = scale_transform(w, 1.0)
    assert np.allclose(w1.g.values, w.g.values)
    assert np.allclose(w1.k.values, w.k.values)
    assert np.allclose(w1.b.values, w.b.values)


def test_scale_transform_constant_two():
    grid = spatial_grid_1d(-1, 1, 16)
    w = WeylStructure.from_scale_factor(grid, exp_scale_factor(grid))
    w2 = scale_transform(w, 2.0)
    assert np.allclose(w2.g.values, 4.0 * w.g.values)
    assert np.allclose(w2.k.values, w.k.values, atol=1e-12)
    assert np.allclose(w2.b.values, 0.5 * w.b.values)


def test_scale_transform_rejects_nonpositive():
    grid = spatial_grid_1d(-1, 1, 16)
    w = WeylStructure.flat(grid)
    with pytest.raises(DomainError):
        scale_transform(w, lambda x: x)


def test_curvature_rescales_as_power_minus_two():
    # R has power -2: curvature(scale_transform(w)) = lambda^-2 R pointwise
    grid = spatial_grid_1d(0, 2 * np.pi, 48, periodic=True)
    w = WeylStructure.from_scale_factor(grid, periodic_scale_factor(grid, amp=0.3))
    lam = analytic_lambda(grid, amp=0.25)
    R0 = curvature(w).R
    R1 = curvature(scale_transform(w, lam)).R
    assert np.allclose(R1, R0 / lam.values**2, atol=1e-10)
    # numeric-only route is O(h^2)
    errs = []
    for n in (48, 96):
        g2 = spatial_grid_1d(0, 2 * np.pi, n, periodic=True)
        w2 = WeylStructure.from_scale_factor(g2, periodic_scale_factor(g2, amp=0.3).without_jets())
        lam2 = analytic_lambda(g2, amp=0.25).without_jets()
        r0 = curvature(w2).R
        r1 = curvature(scale_transform(w2, lam2)).R
        errs.append(np.max(np.abs(r1 - r0 / lam2.values**2)))
    assert errs[1] < errs[0] / 3.0


# ---------------------------------------------------------------- integrability


def test_integrability_gradient_field():
    errs = []
    for n in (33, 65):
        grid = spatial_grid_2d((-1, 1), (-1, 1), n, n)
        k = covector_cofield(
            grid,
            {
                "x": lambda x, y: 0.3 * np.cos(x) * np.cos(y),
                "y": lambda x, y: -0.3 * np.sin(x) * np.sin(y),
            },
        )
        errs.append(integrability_residual(k))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0] / 3.0


def test_integrability_rotational_field_is_two():
    grid = spatial_grid_2d((-1, 1), (-1, 1), 21, 21)
    k = covector_cofield(grid, {"x": lambda x, y: -y + 0 * x, "y": lambda x, y: x + 0 * y})
    assert integrability_residual(k) == pytest.approx(2.0, abs=1e-12)


def test_integrability_zero_field():
    grid = spatial_grid_1d(-1, 1, 16)
    w = WeylStructure.flat(grid)
    assert integrability_residual(w) == 0.0


# ---------------------------------------------------------------- reconstruct_b


def test_reconstruct_b_zero_k():
    grid = spatial_grid_2d((-1, 1), (-1, 1), 9, 9)
    k = covector_cofield(grid, {})
    b = reconstruct_b(k, (0, 0, 0, 0), 1.0)
    assert np.allclose(b.values, 1.0)
    assert b.power == -1


def test_reconstruct_b_constant_k():
    c = 0.9
    grid = spatial_grid_1d(-1, 1, 81)
    k = covector_cofield(grid, {"x": lambda x: np.full_like(x, -c)})
    b = reconstruct_b(k, (0, 0, 0, 0), 1.0)
    x = grid.axes[0].coords
    assert np.allclose(b.values, np.exp(c * x), rtol=1e-10)


def test_reconstruct_b_path_independence():
    phi = lambda x, y: 0.3 * np.sin(x) * np.cos(y)
    diffs = []
    for n in (33, 65):
        grid = spatial_grid_2d((-1, 1), (-1, 1), n, n)
        k = covector_cofield(
            grid,
            {
                "x": lambda x, y: 0.3 * np.cos(x) * np.cos(y),
                "y": lambda x, y: -0.3 * np.sin(x) * np.sin(y),
            },
        )
        b_xy = reconstruct_b(k, (0, 0, 0, 0), 1.0, axis_order=(0, 1))
        b_yx = reconstruct_b(k, (0, 0, 0, 0), 1.0, axis_order=(1, 0))
        diffs.append(np.max(np.abs(b_xy.values - b_yx.values)))
        # both reproduce exp(-phi) up to discretization
        mesh = grid.meshes()
        exact = np.exp(-phi(mesh["x"], mesh["y"]))
        assert np.max(np.abs(b_xy.values - exact)) < 20.0 / n**2
    assert diffs[1] < diffs[0] / 3.0


def test_reconstruct_b_rejects_rotational_k():
    grid = spatial_grid_2d((-1, 1), (-1, 1), 17, 17)
    k = covector_cofield(grid, {"x": lambda x, y: -y + 0 * x, "y": lambda x, y: x + 0 * y})
    with pytest.raises(IntegrabilityError) as err:
        reconstruct_b(k, (0, 0, 0, 0), 1.0)
    assert err.value.residual == pytest.approx(2.0, abs=1e-12)


# ---------------------------------------------------------------- Bianchi


def test_bianchi_flat_exact():
    grid = spatial_grid_2d((-1, 1), (-1, 1), 11, 11)
    assert bianchi_residual(WeylStructure.flat(grid)) == 0.0


def test_bianchi_second_order_convergence():
    errs = []
    for n in (48, 96):
        grid = spatial_grid_1d(0, 2 * np.pi, n, periodic=True)
        w = WeylStructure.from_scale_factor(
            grid, grid.evaluate(lambda x: 1.0 + 0.1 * np.sin(x))
        )
        errs.append(bianchi_residual(w))
    assert errs[0] < 0.05
    assert 2.5 < errs[0] / errs[1] < 6.0


def test_bianchi_conformal_gauge_of_curved_structure():
    errs = []
    for n in (48, 96):
        grid = spatial_grid_1d(0, 2 * np.pi, n, periodic=True)
        base = WeylStructure.from_scale_factor(
            grid, grid.evaluate(lambda x: np.exp(0.1 * np.cos(x)))
        )
        w = scale_transform(base, grid.evaluate(lambda x: np.exp(0.15 * np.sin(x))))
        errs.append(bianchi_residual(w))
    assert 2.5 < errs[0] / errs[1] < 6.0


# ---------------------------------------------------------------- diagnostics


def test_debug_dump_roundtrips_through_json(tmp_path):
    import json

    grid = spatial_grid_1d(-1, 1, 21)
    w = WeylStructure.from_scale_factor(grid, exp_scale_factor(grid, c=0.3))
    path = tmp_path / "geometry.json"
    out = debug_dump(w, path=path)
    loaded = json.loads(path.read_text())
    assert loaded == out
    assert loaded["fields"]["b"]["min"] > 0
    assert loaded["residuals"]["integrability"] < 1e-10
    assert loaded["grid"]["axes"][0]["name"] == "x"
