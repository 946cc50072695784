"""Boundary-value-problem solvers built on the dense layer operators.

Representations (interior domain, outward normal):

  Dirichlet   u = W φ with (−½I + K)φ = h₀, pressure Q^d φ
  Neumann     u = V ψ with (½I + K*)ψ = g₀, pressure Q^s ψ
  Mixed       u = V Ψ where the block-row system takes its rows from the
              single-layer trace 𝒱 at Dirichlet panels and from (½I + K*)
              at Neumann panels, pressure Q^s Ψ
  Forced      u = N f + (homogeneous solve with data shifted by the trace
              and traction of the Newtonian pair)

The Dirichlet system is solved by truncated-SVD least squares (relative
cutoff 1e-10) after projecting the datum onto the discrete zero-flux
subspace: the operator's one-dimensional defect is spanned by the weighted
normal, and a datum with net flux is rejected as incompatible.  All other
systems are square LU solves.

Pressures are defined up to a constant; each solve fixes the constant to
give zero mean over a deterministic interior probe set (domain anchor plus
six axis offsets), stores it on the handle, and evaluation subtracts it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import (
    FluxIncompatible,
    IllConditioned,
    InvalidLabeling,
    UnsupportedParameter,
)
from .geometry import (
    DIRICHLET,
    NEUMANN,
    PatchLabeling,
    SurfaceMesh,
    VolumeGrid,
    panel_quadrature,
    winding_number,
)
from .kernels import BrinkmanParams
from .potentials import (
    BoundaryField,
    VolumeField,
    adjoint_double_layer,
    assemble_double_layer,
    assemble_single_layer,
    eval_double_layer,
    eval_double_layer_pressure,
    eval_single_layer,
    eval_single_layer_pressure,
    newtonian_boundary_data,
    newtonian_pressure,
    newtonian_velocity,
    _layer_rows,
    _near_panels,
)

MIXED = "mixed"
_KINDS = (DIRICHLET, NEUMANN, MIXED)

SINGLE_LAYER = "single_layer"
DOUBLE_LAYER = "double_layer"
MIXED_SINGLE_LAYER = "mixed_single_layer"
WITH_NEWTONIAN = "with_newtonian"

_SVD_CUTOFF = 1.0e-10


# ------------------------------------------------------------------ data types

@dataclass(frozen=True)
class BVPSpec:
    """One boundary-value problem: geometry, parameters, and data.

    Data fields are full-boundary fields; for mixed problems only the values
    on the matching patch are read.
    """

    kind: str
    params: BrinkmanParams
    mesh: SurfaceMesh
    labeling: PatchLabeling | None = None
    dirichlet_data: BoundaryField | None = None
    neumann_data: BoundaryField | None = None
    forcing: VolumeField | None = None
    grid: VolumeGrid | None = None
    quadrature_order: int = 6
    flux_tol: float = 1.0e-8

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kind in (DIRICHLET, MIXED) and self.dirichlet_data is None:
            raise ValueError(f"{self.kind} problem needs dirichlet_data")
        if self.kind in (NEUMANN, MIXED) and self.neumann_data is None:
            raise ValueError(f"{self.kind} problem needs neumann_data")
        for data in (self.dirichlet_data, self.neumann_data):
            if data is not None and data.mesh is not self.mesh:
                raise ValueError("boundary data live on a different mesh")
        if self.kind == MIXED:
            if self.labeling is None:
                raise InvalidLabeling("mixed problem needs a patch labeling")
            if len(self.labeling.panel_label) != self.mesh.n_panels:
                raise InvalidLabeling("labeling does not match the mesh")
            if self.labeling.n_dirichlet == 0 or self.labeling.n_neumann == 0:
                raise InvalidLabeling(
                    "mixed problem needs nonempty Dirichlet and Neumann "
                    "patches; use the dedicated solver for pure problems")
        if (self.forcing is None) != (self.grid is None):
            raise ValueError("volume forcing and grid come together")
        if self.forcing is not None and self.forcing.grid is not self.grid:
            raise ValueError("forcing lives on a different volume grid")
        if self.flux_tol <= 0.0:
            raise ValueError("flux_tol must be positive")


@dataclass(frozen=True)
class SolutionHandle:
    """Evaluable representation of one solved problem.

    For WITH_NEWTONIAN handles, layer_tag names the wrapped homogeneous
    representation and the forcing/grid pair contributes the volume terms.
    """

    tag: str
    density: BoundaryField
    params: BrinkmanParams
    quadrature_order: int = 6
    pressure_constant: float = 0.0
    layer_tag: str | None = None
    forcing: VolumeField | None = None
    grid: VolumeGrid | None = None


@dataclass(frozen=True)
class FieldSolution:
    """Velocity and pressure samples at evaluation points."""

    points: np.ndarray
    velocity: np.ndarray
    pressure: np.ndarray


@dataclass(frozen=True)
class SolveReport:
    """Diagnostics of one solve; serializes to a flat JSON document."""

    kind: str
    alpha: float
    residual_l2: float
    sigma_min: float | None
    sigma_max: float | None
    pressure_constant: float
    wall_time_s: float
    warnings: tuple = ()

    def to_json(self):
        return json.dumps({
            "kind": self.kind,
            "alpha": self.alpha,
            "residual_l2": self.residual_l2,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "pressure_constant": self.pressure_constant,
            "wall_time_s": self.wall_time_s,
            "warnings": list(self.warnings),
        }, sort_keys=True)


class SolverWorkspace:
    """Lazily assembled operators for one (mesh, params, order) triple.

    Solvers accept a shared workspace so iterative callers pay for assembly
    and factorization once.
    """

    def __init__(self, mesh, params, quadrature_order=6):
        self.mesh = mesh
        self.params = params
        self.quadrature_order = quadrature_order
        self.quadrature = panel_quadrature(mesh, quadrature_order)
        self._single = None
        self._double = None
        self._adjoint = None
        self._mixed_sys = {}
        self._mixed_lu = {}
        self._neumann_lu = None
        self._grid_rows = {}

    def matches(self, spec):
        return (spec.mesh is self.mesh and spec.params == self.params
                and spec.quadrature_order == self.quadrature_order)

    @property
    def single_layer(self):
        if self._single is None:
            self._single = assemble_single_layer(self.mesh, self.quadrature,
                                                 self.params)
        return self._single

    @property
    def double_layer(self):
        if self._double is None:
            self._double = assemble_double_layer(self.mesh, self.quadrature,
                                                 self.params)
        return self._double

    @property
    def adjoint(self):
        if self._adjoint is None:
            self._adjoint = adjoint_double_layer(self.double_layer,
                                                 self.mesh.areas)
        return self._adjoint

    def neumann_factorization(self):
        if self._neumann_lu is None:
            n = 3 * self.mesh.n_panels
            system = 0.5 * np.eye(n) + self.adjoint.matrix
            self._neumann_lu = scipy.linalg.lu_factor(system)
        return self._neumann_lu

    def mixed_matrix(self, labeling):
        cached = self._mixed_sys.get(labeling)
        if cached is None:
            n = 3 * self.mesh.n_panels
            cached = 0.5 * np.eye(n) + self.adjoint.matrix
            rows = np.repeat(labeling.dirichlet_mask, 3)
            cached[rows] = self.single_layer.matrix[rows]
            cached.setflags(write=False)
            self._mixed_sys[labeling] = cached
        return cached

    def mixed_factorization(self, labeling):
        cached = self._mixed_lu.get(labeling)
        if cached is None:
            cached = scipy.linalg.lu_factor(self.mixed_matrix(labeling))
            self._mixed_lu[labeling] = cached
        return cached

    def grid_velocity_rows(self, grid):
        """Single-layer velocity evaluation rows at the grid cell centers,
        shape (n_cells, 3, 3N).  The cache entry keeps a reference to the
        grid so the id key stays valid for its lifetime."""
        cached = self._grid_rows.get(id(grid))
        if cached is None or cached[0] is not grid:
            rows = _layer_rows(self.mesh, self.quadrature, self.params,
                               grid.centers, "V")
            rows.setflags(write=False)
            cached = (grid, rows)
            self._grid_rows[id(grid)] = cached
        return cached[1]


def _workspace_for(spec, workspace):
    if workspace is None:
        return SolverWorkspace(spec.mesh, spec.params, spec.quadrature_order)
    if not workspace.matches(spec):
        raise ValueError("workspace was built for a different problem")
    return workspace


# ------------------------------------------------------------ pressure anchor

def _pressure_probe_points(mesh):
    """Deterministic interior probe set: the vertex-mean anchor plus six
    axis offsets, filtered to points that are safely inside."""
    anchor = mesh.vertices.mean(axis=0)
    offsets = 0.2 * mesh.scale * np.vstack([np.zeros(3), np.eye(3),
                                            -np.eye(3)])
    probes = anchor + offsets
    inside = winding_number(mesh, probes) > 0.99
    margin = 0.25 * mesh.diameters.max()
    clear = np.array([_near_panels(mesh, p)[1] > margin for p in probes])
    kept = probes[inside & clear]
    if len(kept) == 0:
        raise ValueError("no interior pressure probes found for this mesh")
    return kept


def _layer_pressure(tag, mesh, density, points, params, quadrature):
    if tag == DOUBLE_LAYER:
        return eval_double_layer_pressure(mesh, density, points, params,
                                          quadrature)
    return eval_single_layer_pressure(mesh, density, points, params,
                                      quadrature)


def _pressure_constant(tag, mesh, density, params, quadrature,
                       forcing=None, grid=None):
    probes = _pressure_probe_points(mesh)
    values = _layer_pressure(tag, mesh, density, probes, params, quadrature)
    if forcing is not None:
        values = values + newtonian_pressure(grid, forcing, probes)
    return float(values.mean())


# ------------------------------------------------------------------- solvers

def _flux_check(h0, mesh, flux_tol):
    nu = BoundaryField(mesh, mesh.normals)
    flux = h0.inner(nu)
    scale = h0.norm() * nu.norm()
    if scale == 0.0:
        return
    if abs(flux) > flux_tol * scale:
        raise FluxIncompatible(
            f"Dirichlet datum has relative net flux {abs(flux) / scale:.3e}, "
            f"above the compatibility tolerance {flux_tol:.1e}")


def solve_dirichlet(spec, workspace=None, _check_flux=True):
    """Interior Dirichlet problem via the double-layer representation."""
    if spec.kind != DIRICHLET:
        raise ValueError("spec kind must be dirichlet")
    t0 = time.perf_counter()
    ws = _workspace_for(spec, workspace)
    mesh = spec.mesh
    h0 = spec.dirichlet_data
    if _check_flux:
        _flux_check(h0, mesh, spec.flux_tol)

    nu = BoundaryField(mesh, mesh.normals)
    coef = h0.inner(nu) / nu.inner(nu)
    data = h0.values - coef * nu.values
    run_warnings = []
    scale = h0.norm() * nu.norm()
    if scale > 0.0 and abs(h0.inner(nu)) > 0.01 * spec.flux_tol * scale:
        run_warnings.append("projected out a nonzero flux component")

    n = 3 * mesh.n_panels
    system = -0.5 * np.eye(n) + ws.double_layer.matrix
    u_left, sigma, v_right = np.linalg.svd(system)
    cutoff = _SVD_CUTOFF * sigma[0]
    defect = int(np.count_nonzero(sigma <= cutoff))
    if defect > 1:
        raise IllConditioned(
            f"{defect} singular values below the relative cutoff "
            f"{_SVD_CUTOFF:.0e}; expected at most the one-dimensional defect")
    keep = sigma > cutoff
    rhs = data.reshape(-1)
    coeffs = (u_left.T @ rhs)[keep] / sigma[keep]
    phi = v_right[keep].T @ coeffs
    residual = np.linalg.norm(system @ phi - rhs)
    rhs_norm = np.linalg.norm(rhs)
    residual_l2 = float(residual / rhs_norm) if rhs_norm > 0.0 else 0.0

    density = BoundaryField(mesh, phi.reshape(-1, 3))
    constant = _pressure_constant(DOUBLE_LAYER, mesh, density.values,
                                  spec.params, ws.quadrature)
    handle = SolutionHandle(tag=DOUBLE_LAYER, density=density,
                            params=spec.params,
                            quadrature_order=spec.quadrature_order,
                            pressure_constant=constant)
    report = SolveReport(kind=DIRICHLET, alpha=spec.params.alpha,
                         residual_l2=residual_l2,
                         sigma_min=float(sigma[-1]),
                         sigma_max=float(sigma[0]),
                         pressure_constant=constant,
                         wall_time_s=time.perf_counter() - t0,
                         warnings=tuple(run_warnings))
    return handle, report


def solve_neumann(spec, workspace=None):
    """Interior Neumann problem via the single-layer representation."""
    if spec.kind != NEUMANN:
        raise ValueError("spec kind must be neumann")
    if spec.params.alpha <= 0.0:
        raise UnsupportedParameter(
            "the Neumann problem needs alpha > 0; the alpha = 0 system has "
            "rigid-motion defects")
    t0 = time.perf_counter()
    ws = _workspace_for(spec, workspace)
    mesh = spec.mesh
    g0 = spec.neumann_data

    lu = ws.neumann_factorization()
    rhs = g0.values.reshape(-1)
    try:
        psi = scipy.linalg.lu_solve(lu, rhs)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise IllConditioned(f"Neumann system factorization failed: {exc}")
    if not np.all(np.isfinite(psi)):
        raise IllConditioned("Neumann solve produced non-finite values")
    system_apply = 0.5 * psi + ws.adjoint.matrix @ psi
    rhs_norm = np.linalg.norm(rhs)
    residual_l2 = (float(np.linalg.norm(system_apply - rhs) / rhs_norm)
                   if rhs_norm > 0.0 else 0.0)

    density = BoundaryField(mesh, psi.reshape(-1, 3))
    constant = _pressure_constant(SINGLE_LAYER, mesh, density.values,
                                  spec.params, ws.quadrature)
    handle = SolutionHandle(tag=SINGLE_LAYER, density=density,
                            params=spec.params,
                            quadrature_order=spec.quadrature_order,
                            pressure_constant=constant)
    report = SolveReport(kind=NEUMANN, alpha=spec.params.alpha,
                         residual_l2=residual_l2, sigma_min=None,
                         sigma_max=None, pressure_constant=constant,
                         wall_time_s=time.perf_counter() - t0)
    return handle, report


def solve_mixed(spec, workspace=None):
    """Mixed Dirichlet-Neumann problem via the single-layer representation."""
    if spec.kind != MIXED:
        raise ValueError("spec kind must be mixed")
    if spec.params.alpha <= 0.0:
        raise UnsupportedParameter("the mixed problem needs alpha > 0")
    t0 = time.perf_counter()
    ws = _workspace_for(spec, workspace)
    mesh = spec.mesh
    labeling = spec.labeling

    rhs = np.where(labeling.dirichlet_mask[:, None],
                   spec.dirichlet_data.values,
                   spec.neumann_data.values).reshape(-1)
    lu = ws.mixed_factorization(labeling)
    try:
        psi = scipy.linalg.lu_solve(lu, rhs)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise IllConditioned(f"mixed system factorization failed: {exc}")
    if not np.all(np.isfinite(psi)):
        raise IllConditioned("mixed solve produced non-finite values")
    system = ws.mixed_matrix(labeling)
    rhs_norm = np.linalg.norm(rhs)
    residual_l2 = (float(np.linalg.norm(system @ psi - rhs) / rhs_norm)
                   if rhs_norm > 0.0 else 0.0)

    density = BoundaryField(mesh, psi.reshape(-1, 3))
    constant = _pressure_constant(SINGLE_LAYER, mesh, density.values,
                                  spec.params, ws.quadrature)
    handle = SolutionHandle(tag=MIXED_SINGLE_LAYER, density=density,
                            params=spec.params,
                            quadrature_order=spec.quadrature_order,
                            pressure_constant=constant)
    report = SolveReport(kind=MIXED, alpha=spec.params.alpha,
                         residual_l2=residual_l2, sigma_min=None,
                         sigma_max=None, pressure_constant=constant,
                         wall_time_s=time.perf_counter() - t0)
    return handle, report


class NeumannToDirichletMap:
    """Dense Neumann-to-Dirichlet operator: traction datum in, velocity
    trace restricted to the Dirichlet patch out."""

    def __init__(self, matrix, mesh, labeling):
        matrix.setflags(write=False)
        self.matrix = matrix
        self.mesh = mesh
        self.labeling = labeling

    def apply(self, data):
        values = data.values if isinstance(data, BoundaryField) else np.asarray(data)
        out = (self.matrix @ values.reshape(-1)).reshape(-1, 3)
        return BoundaryField(self.mesh, out)

    @property
    def dirichlet_submatrix(self):
        """Rows and columns restricted to Dirichlet-patch panels."""
        sel = np.repeat(self.labeling.dirichlet_mask, 3)
        return self.matrix[np.ix_(sel, sel)]


def neumann_to_dirichlet(mesh, labeling, params, quadrature_order=6,
                         workspace=None):
    """Compose the Neumann solve with the single-layer trace, restricted to
    the Dirichlet patch."""
    if params.alpha <= 0.0:
        raise UnsupportedParameter(
            "the Neumann-to-Dirichlet map needs alpha > 0")
    if labeling.n_dirichlet == 0:
        raise InvalidLabeling("the Dirichlet patch is empty")
    if workspace is None:
        workspace = SolverWorkspace(mesh, params, quadrature_order)
    n = 3 * mesh.n_panels
    inverse = scipy.linalg.lu_solve(workspace.neumann_factorization(),
                                    np.eye(n))
    composed = workspace.single_layer.matrix @ inverse
    composed[~np.repeat(labeling.dirichlet_mask, 3)] = 0.0
    return NeumannToDirichletMap(composed, mesh, labeling)


def solve_poisson(spec, workspace=None):
    """Forced problem: Newtonian particular solution plus a homogeneous
    solve with shifted boundary data."""
    if spec.forcing is None:
        raise ValueError("solve_poisson needs volume forcing and a grid")
    t0 = time.perf_counter()
    ws = _workspace_for(spec, workspace)
    mesh = spec.mesh

    if spec.kind == DIRICHLET:
        # the user datum carries the flux obstruction; the Newtonian trace
        # is divergence-free so the shift is compatible up to quadrature
        _flux_check(spec.dirichlet_data, mesh, spec.flux_tol)

    trace, traction = newtonian_boundary_data(spec.grid, spec.forcing, mesh,
                                              spec.params)
    shifted = {}
    if spec.dirichlet_data is not None:
        shifted["dirichlet_data"] = BoundaryField(
            mesh, spec.dirichlet_data.values - trace.values)
    if spec.neumann_data is not None:
        shifted["neumann_data"] = BoundaryField(
            mesh, spec.neumann_data.values - traction.values)
    inner_spec = replace(spec, forcing=None, grid=None, **shifted)

    if spec.kind == DIRICHLET:
        inner_handle, inner_report = solve_dirichlet(inner_spec, ws,
                                                     _check_flux=False)
    elif spec.kind == NEUMANN:
        inner_handle, inner_report = solve_neumann(inner_spec, ws)
    else:
        inner_handle, inner_report = solve_mixed(inner_spec, ws)

    constant = _pressure_constant(inner_handle.tag, mesh,
                                  inner_handle.density.values, spec.params,
                                  ws.quadrature, forcing=spec.forcing,
                                  grid=spec.grid)
    handle = SolutionHandle(tag=WITH_NEWTONIAN,
                            density=inner_handle.density,
                            params=spec.params,
                            quadrature_order=spec.quadrature_order,
                            pressure_constant=constant,
                            layer_tag=inner_handle.tag,
                            forcing=spec.forcing, grid=spec.grid)
    report = SolveReport(kind=spec.kind, alpha=spec.params.alpha,
                         residual_l2=inner_report.residual_l2,
                         sigma_min=inner_report.sigma_min,
                         sigma_max=inner_report.sigma_max,
                         pressure_constant=constant,
                         wall_time_s=time.perf_counter() - t0,
                         warnings=inner_report.warnings)
    return handle, report


# ---------------------------------------------------------------- evaluation

def evaluate_solution(handle, points):
    """Velocity and pressure of a solved representation at interior points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    mesh = handle.density.mesh
    quadrature = panel_quadrature(mesh, handle.quadrature_order)
    layer = handle.layer_tag if handle.tag == WITH_NEWTONIAN else handle.tag
    dens = handle.density.values
    if layer == DOUBLE_LAYER:
        velocity = eval_double_layer(mesh, dens, points, handle.params,
                                     quadrature)
        pressure = eval_double_layer_pressure(mesh, dens, points,
                                              handle.params, quadrature)
    else:
        velocity = eval_single_layer(mesh, dens, points, handle.params,
                                     quadrature)
        pressure = eval_single_layer_pressure(mesh, dens, points,
                                              handle.params, quadrature)
    if handle.tag == WITH_NEWTONIAN:
        velocity = velocity + newtonian_velocity(handle.grid, handle.forcing,
                                                 points, handle.params)
        pressure = pressure + newtonian_pressure(handle.grid, handle.forcing,
                                                 points)
    return FieldSolution(points=points, velocity=velocity,
                         pressure=pressure - handle.pressure_constant)


def greens_identity_residual(u_trace, traction, params, points,
                             exact_velocity=None, quadrature_order=6):
    """Residual of the direct representation V(traction) − W(trace) − u.

    When exact_velocity is omitted the caller receives V(traction) − W(trace)
    and subtracts their own reference field.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    mesh = u_trace.mesh
    if traction.mesh is not mesh:
        raise ValueError("trace and traction live on different meshes")
    quadrature = panel_quadrature(mesh, quadrature_order)
    rep = (eval_single_layer(mesh, traction.values, points, params, quadrature)
           - eval_double_layer(mesh, u_trace.values, points, params,
                               quadrature))
    if exact_velocity is None:
        return rep
    return rep - np.asarray(exact_velocity, dtype=float)