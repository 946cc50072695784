"""Boundary-value-problem solvers against the exterior-pole manufactured
solution: interior convergence of the Dirichlet, Neumann, and mixed solves,
compatibility and parameter guards, the Neumann-to-Dirichlet composition
identity, forced solves with the Newtonian shift, and report determinism."""

import json

import numpy as np
import pytest

from bbem.errors import (
    FluxIncompatible,
    InvalidLabeling,
    UnsupportedParameter,
)
from bbem.geometry import (
    build_cube,
    build_icosphere,
    build_volume_grid,
    label_patches,
)
from bbem.kernels import (
    BrinkmanParams,
    brinkman_velocity_tensor,
    pressure_vector,
    traction_kernel,
)
from bbem.potentials import BoundaryField, VolumeField
from bbem import solvers as S

PARAMS = BrinkmanParams(alpha=1.0)
SPHERE_POLE = np.array([0.0, 0.0, 3.0])
CUBE_POLE = np.full(3, 0.5 + 2.0 / np.sqrt(3))
COLUMN = 1

INTERIOR = np.array([[0.0, 0.0, 0.0], [0.3, 0.1, -0.2], [-0.25, 0.3, 0.1],
                     [0.1, -0.35, 0.2], [-0.1, -0.1, -0.3]])


def exact_velocity(points, pole):
    return brinkman_velocity_tensor(points - pole, PARAMS.alpha)[..., :, COLUMN]


def exact_pressure(points, pole):
    return pressure_vector(points - pole)[..., COLUMN]


def exact_trace(mesh, pole):
    return BoundaryField(mesh, exact_velocity(mesh.centroids, pole))


def exact_traction(mesh, pole):
    vals = traction_kernel(mesh.centroids, pole, mesh.normals,
                           PARAMS.alpha)[:, :, COLUMN]
    return BoundaryField(mesh, vals)


def velocity_error(handle, points, pole):
    sol = S.evaluate_solution(handle, points)
    exact = exact_velocity(points, pole)
    return np.linalg.norm(sol.velocity - exact) / np.linalg.norm(exact)


def pressure_error(handle, points, pole):
    """Error of pressure differences, which are constant-free."""
    sol = S.evaluate_solution(handle, points)
    exact = exact_pressure(points, pole)
    diff = (sol.pressure - sol.pressure[0]) - (exact - exact[0])
    return np.linalg.norm(diff) / np.linalg.norm(exact - exact[0])


@pytest.fixture(scope="module")
def sphere_coarse():
    mesh = build_icosphere(1)
    return mesh, S.SolverWorkspace(mesh, PARAMS)


@pytest.fixture(scope="module")
def sphere_fine():
    mesh = build_icosphere(2)
    return mesh, S.SolverWorkspace(mesh, PARAMS)


@pytest.fixture(scope="module")
def cube_mixed():
    mesh = build_cube(1)
    labeling = label_patches(mesh, {"type": "cube_faces",
                                    "neumann_faces": ["+z"]})
    return mesh, labeling, S.SolverWorkspace(mesh, PARAMS)


MANUFACTURED_FLUX_TOL = 1.0e-4
"""Manufactured traces are divergence-free in the continuum, so their
discrete flux is pure quadrature error (about 1e-5 at level 1); the
compatibility test for these runs tolerates that scale."""


def dirichlet_spec(mesh, pole=SPHERE_POLE, **kw):
    kw.setdefault("flux_tol", MANUFACTURED_FLUX_TOL)
    return S.BVPSpec(kind=S.DIRICHLET, params=PARAMS, mesh=mesh,
                     dirichlet_data=exact_trace(mesh, pole), **kw)


def neumann_spec(mesh, pole=SPHERE_POLE, **kw):
    return S.BVPSpec(kind=S.NEUMANN, params=PARAMS, mesh=mesh,
                     neumann_data=exact_traction(mesh, pole), **kw)


# ------------------------------------------------------------ spec validation

def test_spec_rejects_unknown_kind(sphere_coarse):
    mesh, _ = sphere_coarse
    with pytest.raises(ValueError, match="kind"):
        S.BVPSpec(kind="robin", params=PARAMS, mesh=mesh,
                  dirichlet_data=exact_trace(mesh, SPHERE_POLE))


def test_spec_requires_matching_data(sphere_coarse):
    mesh, _ = sphere_coarse
    with pytest.raises(ValueError, match="dirichlet_data"):
        S.BVPSpec(kind=S.DIRICHLET, params=PARAMS, mesh=mesh)
    with pytest.raises(ValueError, match="neumann_data"):
        S.BVPSpec(kind=S.NEUMANN, params=PARAMS, mesh=mesh)
    other = build_icosphere(1)
    with pytest.raises(ValueError, match="different mesh"):
        S.BVPSpec(kind=S.DIRICHLET, params=PARAMS, mesh=mesh,
                  dirichlet_data=exact_trace(other, SPHERE_POLE))


def test_spec_requires_forcing_grid_pair(sphere_coarse):
    mesh, _ = sphere_coarse
    grid = build_volume_grid({"type": "sphere", "radius": 1.0}, 8)
    with pytest.raises(ValueError, match="together"):
        S.BVPSpec(kind=S.DIRICHLET, params=PARAMS, mesh=mesh,
                  dirichlet_data=exact_trace(mesh, SPHERE_POLE), grid=grid)
    with pytest.raises(ValueError, match="flux_tol"):
        dirichlet_spec(mesh, flux_tol=0.0)


def test_mixed_spec_labeling_guards(cube_mixed):
    mesh, labeling, _ = cube_mixed
    data = dict(dirichlet_data=exact_trace(mesh, CUBE_POLE),
                neumann_data=exact_traction(mesh, CUBE_POLE))
    with pytest.raises(InvalidLabeling, match="needs a patch labeling"):
        S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh, **data)
    all_neumann = label_patches(mesh, {"type": "cube_faces",
                                       "neumann_faces": ["+x", "-x", "+y",
                                                         "-y", "+z", "-z"]})
    with pytest.raises(InvalidLabeling, match="nonempty"):
        S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh,
                  labeling=all_neumann, **data)
    other = label_patches(build_cube(2), {"type": "cube_faces",
                                          "neumann_faces": ["+z"]})
    with pytest.raises(InvalidLabeling, match="match"):
        S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh, labeling=other,
                  **data)


def test_solvers_reject_wrong_kind(sphere_coarse):
    mesh, ws = sphere_coarse
    with pytest.raises(ValueError, match="kind"):
        S.solve_neumann(dirichlet_spec(mesh), ws)
    with pytest.raises(ValueError, match="kind"):
        S.solve_dirichlet(neumann_spec(mesh), ws)


def test_workspace_mismatch_rejected(sphere_coarse):
    mesh, _ = sphere_coarse
    other = S.SolverWorkspace(mesh, BrinkmanParams(alpha=2.0))
    with pytest.raises(ValueError, match="workspace"):
        S.solve_dirichlet(dirichlet_spec(mesh), other)


# ------------------------------------------------------------- dirichlet solve

def test_dirichlet_manufactured_convergence(sphere_coarse, sphere_fine):
    errors = []
    for mesh, ws in (sphere_coarse, sphere_fine):
        handle, report = S.solve_dirichlet(dirichlet_spec(mesh), ws)
        assert report.residual_l2 < 1.0e-10
        assert handle.tag == S.DOUBLE_LAYER
        errors.append(velocity_error(handle, INTERIOR, SPHERE_POLE))
    assert errors[0] < 5.0e-2
    assert errors[1] < 1.5e-2
    assert errors[0] / errors[1] > 2.0


def test_dirichlet_pressure_differences(sphere_fine):
    mesh, ws = sphere_fine
    handle, _ = S.solve_dirichlet(dirichlet_spec(mesh), ws)
    assert pressure_error(handle, INTERIOR, SPHERE_POLE) < 3.0e-2


def test_dirichlet_flux_incompatible(sphere_coarse):
    mesh, ws = sphere_coarse
    spec = S.BVPSpec(kind=S.DIRICHLET, params=PARAMS, mesh=mesh,
                     dirichlet_data=BoundaryField(mesh, mesh.normals.copy()))
    with pytest.raises(FluxIncompatible, match="net flux"):
        S.solve_dirichlet(spec, ws)


def test_dirichlet_zero_datum(sphere_coarse):
    mesh, ws = sphere_coarse
    spec = S.BVPSpec(kind=S.DIRICHLET, params=PARAMS, mesh=mesh,
                     dirichlet_data=BoundaryField(
                         mesh, np.zeros((mesh.n_panels, 3))))
    handle, report = S.solve_dirichlet(spec, ws)
    assert np.linalg.norm(handle.density.values) == 0.0
    assert report.residual_l2 == 0.0


def test_dirichlet_linearity(sphere_coarse):
    mesh, ws = sphere_coarse
    other_pole = np.array([0.0, 2.5, -1.5])
    h1 = exact_trace(mesh, SPHERE_POLE)
    h2 = exact_trace(mesh, other_pole)
    combo = BoundaryField(mesh, 2.0 * h1.values - 0.5 * h2.values)
    tol = dict(flux_tol=MANUFACTURED_FLUX_TOL)
    d1, _ = S.solve_dirichlet(S.BVPSpec(kind=S.DIRICHLET, params=PARAMS,
                                        mesh=mesh, dirichlet_data=h1, **tol),
                              ws)
    d2, _ = S.solve_dirichlet(S.BVPSpec(kind=S.DIRICHLET, params=PARAMS,
                                        mesh=mesh, dirichlet_data=h2, **tol),
                              ws)
    dc, _ = S.solve_dirichlet(S.BVPSpec(kind=S.DIRICHLET, params=PARAMS,
                                        mesh=mesh, dirichlet_data=combo,
                                        **tol), ws)
    expected = 2.0 * d1.density.values - 0.5 * d2.density.values
    scale = np.linalg.norm(expected)
    assert np.linalg.norm(dc.density.values - expected) < 1.0e-10 * scale


def test_dirichlet_report_sigmas(sphere_coarse):
    mesh, ws = sphere_coarse
    _, report = S.solve_dirichlet(dirichlet_spec(mesh), ws)
    assert report.sigma_min is not None and report.sigma_max is not None
    assert 0.0 < report.sigma_min < report.sigma_max
    assert report.kind == S.DIRICHLET
    assert report.alpha == PARAMS.alpha


# --------------------------------------------------------------- neumann solve

def test_neumann_manufactured_convergence(sphere_coarse, sphere_fine):
    errors = []
    for mesh, ws in (sphere_coarse, sphere_fine):
        handle, report = S.solve_neumann(neumann_spec(mesh), ws)
        assert report.residual_l2 < 1.0e-12
        assert handle.tag == S.SINGLE_LAYER
        errors.append(velocity_error(handle, INTERIOR, SPHERE_POLE))
    assert errors[0] < 1.5e-1
    assert errors[1] < 5.0e-2
    assert errors[0] / errors[1] > 2.0


def test_neumann_pressure_differences(sphere_fine):
    mesh, ws = sphere_fine
    handle, _ = S.solve_neumann(neumann_spec(mesh), ws)
    assert pressure_error(handle, INTERIOR, SPHERE_POLE) < 2.0e-2


def test_neumann_alpha_zero_unsupported(sphere_coarse):
    mesh, _ = sphere_coarse
    stokes = BrinkmanParams(alpha=0.0)
    vals = traction_kernel(mesh.centroids, SPHERE_POLE, mesh.normals,
                           0.0)[:, :, COLUMN]
    spec = S.BVPSpec(kind=S.NEUMANN, params=stokes, mesh=mesh,
                     neumann_data=BoundaryField(mesh, vals))
    with pytest.raises(UnsupportedParameter, match="alpha"):
        S.solve_neumann(spec)


def test_neumann_linearity(sphere_coarse):
    mesh, ws = sphere_coarse
    other_pole = np.array([0.0, 2.5, -1.5])
    g1 = exact_traction(mesh, SPHERE_POLE)
    g2 = exact_traction(mesh, other_pole)
    combo = BoundaryField(mesh, 0.7 * g1.values + 1.3 * g2.values)
    n1, _ = S.solve_neumann(S.BVPSpec(kind=S.NEUMANN, params=PARAMS,
                                      mesh=mesh, neumann_data=g1), ws)
    n2, _ = S.solve_neumann(S.BVPSpec(kind=S.NEUMANN, params=PARAMS,
                                      mesh=mesh, neumann_data=g2), ws)
    nc, _ = S.solve_neumann(S.BVPSpec(kind=S.NEUMANN, params=PARAMS,
                                      mesh=mesh, neumann_data=combo), ws)
    expected = 0.7 * n1.density.values + 1.3 * n2.density.values
    scale = np.linalg.norm(expected)
    assert np.linalg.norm(nc.density.values - expected) < 1.0e-12 * scale


# ----------------------------------------------------------------- mixed solve

def test_mixed_manufactured_error(cube_mixed):
    mesh, labeling, ws = cube_mixed
    spec = S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh,
                     labeling=labeling,
                     dirichlet_data=exact_trace(mesh, CUBE_POLE),
                     neumann_data=exact_traction(mesh, CUBE_POLE))
    handle, report = S.solve_mixed(spec, ws)
    assert handle.tag == S.MIXED_SINGLE_LAYER
    assert report.residual_l2 < 1.0e-12
    points = 0.5 * INTERIOR
    assert velocity_error(handle, points, CUBE_POLE) < 2.0e-2


def test_mixed_alpha_zero_unsupported(cube_mixed):
    mesh, labeling, _ = cube_mixed
    stokes = BrinkmanParams(alpha=0.0)
    data = dict(dirichlet_data=exact_trace(mesh, CUBE_POLE),
                neumann_data=exact_traction(mesh, CUBE_POLE))
    spec = S.BVPSpec(kind=S.MIXED, params=stokes, mesh=mesh,
                     labeling=labeling, **data)
    with pytest.raises(UnsupportedParameter, match="alpha"):
        S.solve_mixed(spec)


def test_mixed_reads_only_matching_patch(cube_mixed):
    """Perturbing the Dirichlet datum on Neumann panels must not change
    anything: the mixed system reads each datum only on its own patch."""
    mesh, labeling, ws = cube_mixed
    trace = exact_trace(mesh, CUBE_POLE)
    traction = exact_traction(mesh, CUBE_POLE)
    perturbed = trace.values.copy()
    perturbed[labeling.neumann_mask] += 7.0
    spec_a = S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh,
                       labeling=labeling, dirichlet_data=trace,
                       neumann_data=traction)
    spec_b = S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh,
                       labeling=labeling,
                       dirichlet_data=BoundaryField(mesh, perturbed),
                       neumann_data=traction)
    ha, _ = S.solve_mixed(spec_a, ws)
    hb, _ = S.solve_mixed(spec_b, ws)
    assert np.array_equal(ha.density.values, hb.density.values)


# ------------------------------------------------------- neumann-to-dirichlet

def test_ntd_composition_matches_solve_then_restrict(cube_mixed):
    mesh, labeling, ws = cube_mixed
    ntd = S.neumann_to_dirichlet(mesh, labeling, PARAMS, workspace=ws)
    g = exact_traction(mesh, CUBE_POLE)
    via_map = ntd.apply(g).values

    handle, _ = S.solve_neumann(S.BVPSpec(kind=S.NEUMANN, params=PARAMS,
                                          mesh=mesh, neumann_data=g), ws)
    trace = (ws.single_layer.matrix
             @ handle.density.values.reshape(-1)).reshape(-1, 3)
    trace[labeling.neumann_mask] = 0.0
    scale = np.linalg.norm(trace)
    assert np.linalg.norm(via_map - trace) < 1.0e-10 * scale


def test_ntd_rows_vanish_off_dirichlet_patch(cube_mixed):
    mesh, labeling, ws = cube_mixed
    ntd = S.neumann_to_dirichlet(mesh, labeling, PARAMS, workspace=ws)
    out = ntd.apply(exact_traction(mesh, CUBE_POLE))
    assert np.all(out.values[labeling.neumann_mask] == 0.0)
    rows = np.repeat(labeling.neumann_mask, 3)
    assert np.all(ntd.matrix[rows] == 0.0)


def test_ntd_dirichlet_submatrix_invertible(cube_mixed):
    mesh, labeling, ws = cube_mixed
    ntd = S.neumann_to_dirichlet(mesh, labeling, PARAMS, workspace=ws)
    sub = ntd.dirichlet_submatrix
    assert sub.shape == (3 * labeling.n_dirichlet, 3 * labeling.n_dirichlet)
    sigma_min = np.linalg.svd(sub, compute_uv=False)[-1]
    assert sigma_min > 1.0e-4


def test_ntd_guards(cube_mixed):
    mesh, labeling, _ = cube_mixed
    with pytest.raises(UnsupportedParameter, match="alpha"):
        S.neumann_to_dirichlet(mesh, labeling, BrinkmanParams(alpha=0.0))
    all_neumann = label_patches(mesh, {"type": "cube_faces",
                                       "neumann_faces": ["+x", "-x", "+y",
                                                         "-y", "+z", "-z"]})
    with pytest.raises(InvalidLabeling, match="empty"):
        S.neumann_to_dirichlet(mesh, all_neumann, PARAMS)


# ---------------------------------------------------------------- forced solve

def smooth_forcing(grid):
    c = grid.centers
    return VolumeField(grid, np.stack([
        np.sin(np.pi * c[:, 0]) * np.cos(np.pi * c[:, 1]),
        c[:, 2] ** 2,
        c[:, 0] + 0.2 * c[:, 1]], axis=1))


@pytest.fixture(scope="module")
def cube_volume():
    grid = build_volume_grid({"type": "cube", "side": 1.0}, 16)
    return grid


def test_poisson_requires_forcing(sphere_coarse):
    mesh, ws = sphere_coarse
    with pytest.raises(ValueError, match="forcing"):
        S.solve_poisson(dirichlet_spec(mesh), ws)


def test_poisson_zero_forcing_matches_homogeneous(cube_mixed, cube_volume):
    mesh, labeling, ws = cube_mixed
    grid = cube_volume
    zero = VolumeField(grid, np.zeros((grid.n_cells, 3)))
    spec = S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh,
                     labeling=labeling,
                     dirichlet_data=exact_trace(mesh, CUBE_POLE),
                     neumann_data=exact_traction(mesh, CUBE_POLE),
                     forcing=zero, grid=grid)
    forced, _ = S.solve_poisson(spec, ws)
    plain, _ = S.solve_mixed(S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh,
                                       labeling=labeling,
                                       dirichlet_data=exact_trace(mesh, CUBE_POLE),
                                       neumann_data=exact_traction(mesh, CUBE_POLE)),
                             ws)
    assert forced.tag == S.WITH_NEWTONIAN
    assert forced.layer_tag == S.MIXED_SINGLE_LAYER
    assert np.allclose(forced.density.values, plain.density.values,
                       rtol=0.0, atol=1.0e-14)
    points = 0.5 * INTERIOR
    fa = S.evaluate_solution(forced, points)
    fb = S.evaluate_solution(plain, points)
    assert np.allclose(fa.velocity, fb.velocity, atol=1.0e-12)
    assert np.allclose(fa.pressure, fb.pressure, atol=1.0e-12)


def test_poisson_forced_interior_residual(cube_mixed, cube_volume):
    """Finite differences of the evaluated fields on the volume lattice
    reproduce the forcing: (laplacian - alpha) u - grad p = f, div u = 0."""
    mesh, labeling, ws = cube_mixed
    grid = cube_volume
    forcing = smooth_forcing(grid)
    spec = S.BVPSpec(kind=S.MIXED, params=PARAMS, mesh=mesh,
                     labeling=labeling,
                     dirichlet_data=exact_trace(mesh, CUBE_POLE),
                     neumann_data=exact_traction(mesh, CUBE_POLE),
                     forcing=forcing, grid=grid)
    handle, report = S.solve_poisson(spec, ws)
    assert report.kind == S.MIXED

    step = grid.spacing
    centers = grid.centers.reshape(16, 16, 16, 3)
    probes = centers[[5, 8, 10], [6, 8, 9], [7, 8, 5]]
    f_probe = forcing.values.reshape(16, 16, 16, 3)[[5, 8, 10], [6, 8, 9],
                                                    [7, 8, 5]]
    offsets = np.concatenate([np.zeros((1, 3)), np.eye(3), -np.eye(3)])
    stencil = probes[:, None, :] + step * offsets[None, :, :]
    sol = S.evaluate_solution(handle, stencil.reshape(-1, 3))
    u = sol.velocity.reshape(3, 7, 3)
    p = sol.pressure.reshape(3, 7)
    lap = (u[:, 1:].sum(axis=1) - 6.0 * u[:, 0]) / step ** 2
    grad_p = (p[:, 1:4] - p[:, 4:7]) / (2.0 * step)
    residual = lap - PARAMS.alpha * u[:, 0] - grad_p - f_probe
    scale = np.linalg.norm(f_probe)
    assert np.linalg.norm(residual) / scale < 1.0e-1


def test_poisson_dirichlet_flux_checks_user_datum(sphere_coarse):
    mesh, ws = sphere_coarse
    grid = build_volume_grid({"type": "sphere", "radius": 1.0}, 8)
    forcing = VolumeField(grid, np.ones((grid.n_cells, 3)))
    spec = S.BVPSpec(kind=S.DIRICHLET, params=PARAMS, mesh=mesh,
                     dirichlet_data=BoundaryField(mesh, mesh.normals.copy()),
                     forcing=forcing, grid=grid)
    with pytest.raises(FluxIncompatible, match="net flux"):
        S.solve_poisson(spec, ws)


# ------------------------------------------------------------------ evaluation

def test_evaluate_rejects_boundary_point(sphere_coarse):
    mesh, ws = sphere_coarse
    handle, _ = S.solve_dirichlet(dirichlet_spec(mesh), ws)
    with pytest.raises(ValueError, match="boundary"):
        S.evaluate_solution(handle, mesh.centroids[0])


def test_pressure_constant_zero_probe_mean(sphere_fine):
    mesh, ws = sphere_fine
    handle, _ = S.solve_dirichlet(dirichlet_spec(mesh), ws)
    probes = S._pressure_probe_points(mesh)
    sol = S.evaluate_solution(handle, probes)
    assert abs(sol.pressure.mean()) < 1.0e-12 * max(
        1.0, np.abs(sol.pressure).max())


def test_solve_is_deterministic(sphere_coarse):
    mesh, _ = sphere_coarse
    first, ra = S.solve_dirichlet(dirichlet_spec(mesh))
    second, rb = S.solve_dirichlet(dirichlet_spec(mesh))
    assert np.array_equal(first.density.values, second.density.values)
    assert first.pressure_constant == second.pressure_constant
    assert ra.residual_l2 == rb.residual_l2
    assert ra.sigma_min == rb.sigma_min


# -------------------------------------------------------------- green identity

def test_greens_identity_residual_decreases(sphere_coarse, sphere_fine):
    exact = exact_velocity(INTERIOR, SPHERE_POLE)
    scale = np.linalg.norm(exact)
    errors = []
    for mesh, _ in (sphere_coarse, sphere_fine):
        res = S.greens_identity_residual(
            exact_trace(mesh, SPHERE_POLE), exact_traction(mesh, SPHERE_POLE),
            PARAMS, INTERIOR, exact_velocity=exact)
        errors.append(np.linalg.norm(res) / scale)
    assert errors[0] < 5.0e-2
    assert errors[1] < 1.5e-2
    assert errors[1] < errors[0]


def test_greens_identity_zero_pair(sphere_coarse):
    mesh, _ = sphere_coarse
    zero = BoundaryField(mesh, np.zeros((mesh.n_panels, 3)))
    res = S.greens_identity_residual(zero, zero, PARAMS, INTERIOR)
    assert np.all(res == 0.0)


def test_greens_identity_without_reference(sphere_coarse):
    mesh, _ = sphere_coarse
    trace = exact_trace(mesh, SPHERE_POLE)
    traction = exact_traction(mesh, SPHERE_POLE)
    exact = exact_velocity(INTERIOR, SPHERE_POLE)
    rep = S.greens_identity_residual(trace, traction, PARAMS, INTERIOR)
    res = S.greens_identity_residual(trace, traction, PARAMS, INTERIOR,
                                     exact_velocity=exact)
    assert np.allclose(rep - exact, res, atol=1.0e-15)


def test_greens_identity_mesh_mismatch(sphere_coarse):
    mesh, _ = sphere_coarse
    other = build_icosphere(1)
    with pytest.raises(ValueError, match="mesh"):
        S.greens_identity_residual(
            exact_trace(mesh, SPHERE_POLE), exact_traction(other, SPHERE_POLE),
            PARAMS, INTERIOR)


# --------------------------------------------------------------------- reports

def test_report_json_shape(sphere_coarse):
    mesh, ws = sphere_coarse
    _, report = S.solve_dirichlet(dirichlet_spec(mesh), ws)
    doc = json.loads(report.to_json())
    assert sorted(doc) == ["alpha", "kind", "pressure_constant",
                           "residual_l2", "sigma_max", "sigma_min",
                           "wall_time_s", "warnings"]
    assert doc["kind"] == S.DIRICHLET
    assert doc["alpha"] == 1.0
    assert isinstance(doc["warnings"], list)
