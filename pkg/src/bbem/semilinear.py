"""Fixed-point solver for the semilinear drag term β|u|u on the mixed problem.

The velocity solves Δu − αu − β|u|u − ∇π = f with velocity data on one patch
and traction data on the rest.  Moving the nonlinearity to the right side
gives the Picard map v ↦ A(f + β|v|v, h₀, g₀), where A is the linear mixed
solve with volume forcing; for small data the map contracts on a ball and the
iteration converges geometrically, starting from v₀ = 0.

Smallness bookkeeping uses empirical stand-ins for the contraction constants:
C_est bounds the discrete solution map on a sampled data subspace,
c1prime_est bounds the bilinear drag estimate ‖|v|w‖ ≤ c₁′‖v‖‖w‖ over sampled
pairs, and with C₂ = c₁′β the derived radii ζ = 3/(16 C₂ C²) (data ball) and
η = 1/(4 C₂ C) (iterate ball) gate the regime where contraction is expected.
All norms are discrete L² surrogates (area weights on the boundary, cell
weights in the volume).  The estimates are reported, never certified.

Each iteration's volume evaluation reuses cached single-layer rows at the
grid centers; on full cubic lattices the Newtonian term is a discrete
convolution computed with FFTs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .errors import NotConverged, SmallnessViolated, UnsupportedParameter
from .kernels import brinkman_velocity_tensor
from .potentials import BoundaryField, VolumeField, newtonian_velocity
from .solvers import (
    MIXED,
    BVPSpec,
    SolverWorkspace,
    evaluate_solution,
    solve_poisson,
)

# Seed for the constant-estimation sampler (2³²/φ, a common hashing constant);
# sample i draws from default_rng([seed, i]) so enlarging the sample count
# keeps the earlier samples unchanged.
ESTIMATION_SEED = 2_654_435_769


# ------------------------------------------------------------------ data types

@dataclass(frozen=True)
class PicardConfig:
    """Stopping rules for the fixed-point iteration.

    tol is the successive-difference threshold in the cell-weighted L² norm
    over the volume grid; damping δ blends each update as (1−δ)v + δ·A(v).
    """

    tol: float = 1.0e-8
    max_iter: int = 32
    damping: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.tol) and self.tol > 0.0):
            raise ValueError(f"tol must be finite and > 0, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be an integer >= 1, "
                             f"got {self.max_iter}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass(frozen=True)
class SmallnessConstants:
    """Empirical contraction constants; estimates, never certified bounds."""

    C_est: float
    c1prime_est: float
    C2_est: float
    zeta_est: float
    eta_est: float

    @classmethod
    def derive(cls, C_est, c1prime_est, beta):
        """Fill in C₂ = c₁′β and the radii ζ = 3/(16C₂C²), η = 1/(4C₂C).

        A vanishing product (β = 0, or degenerate samples) leaves the radii
        infinite: the linear problem imposes no smallness restriction.
        """
        C2 = c1prime_est * beta
        zeta = 3.0 / (16.0 * C2 * C_est ** 2) if C2 * C_est > 0.0 else math.inf
        eta = 1.0 / (4.0 * C2 * C_est) if C2 * C_est > 0.0 else math.inf
        return cls(C_est=C_est, c1prime_est=c1prime_est, C2_est=C2,
                   zeta_est=zeta, eta_est=eta)


@dataclass(frozen=True)
class ContractionReport:
    """Diagnostics of one fixed-point run.

    iterates holds the successive-difference norms; measured_ratio is the
    largest tail ratio of consecutive differences (the first ratio is
    excluded when more than one exists, since it reflects the v₀ = 0
    transient rather than the contraction factor).  ball_respected records
    whether every iterate stayed inside the η ball; without constants (the
    β = 0 case) there is no ball to violate and the flag is true.
    """

    iterates: tuple
    measured_ratio: float
    constants: SmallnessConstants | None
    converged: bool
    ball_respected: bool

    def to_json(self):
        def finite(value):
            if value is None or not math.isfinite(value):
                return None
            return value

        c = self.constants
        return json.dumps({
            "iterates": list(self.iterates),
            "measured_ratio": self.measured_ratio,
            "C_est": finite(c.C_est) if c else None,
            "c1prime_est": finite(c.c1prime_est) if c else None,
            "zeta_est": finite(c.zeta_est) if c else None,
            "eta_est": finite(c.eta_est) if c else None,
            "converged": self.converged,
            "ball_respected": self.ball_respected,
        }, sort_keys=True)


# ------------------------------------------------------------------- helpers

def _shared_workspace(mesh, params, quadrature_order, workspace):
    if workspace is None:
        return SolverWorkspace(mesh, params, quadrature_order)
    if (workspace.mesh is not mesh or workspace.params != params
            or workspace.quadrature_order != quadrature_order):
        raise ValueError("workspace was built for a different problem")
    return workspace


def _grid_norm(grid, values):
    return float(np.sqrt(np.einsum("c,ca,ca->", grid.volumes, values, values)))


def _drag(values, beta):
    """Pointwise Euclidean-norm-weighted vector β|v|v."""
    return beta * np.linalg.norm(values, axis=1)[:, None] * values


def _lattice_resolution(grid):
    """Cells per edge when the grid is a full cubic lattice, else None."""
    m = round(grid.n_cells ** (1.0 / 3.0))
    if m ** 3 != grid.n_cells:
        return None
    h = grid.spacing
    if not np.allclose(grid.volumes, h ** 3, rtol=1.0e-10, atol=0.0):
        return None
    mins = grid.centers.min(axis=0)
    axes = [mins[d] + h * np.arange(m) for d in range(3)]
    expected = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    if not np.allclose(expected.reshape(-1, 3), grid.centers,
                       rtol=0.0, atol=1.0e-9 * h):
        return None
    return m


def _newtonian_grid_velocity(grid, values, params):
    """Newtonian velocity sampled at the grid's own cell centers.

    On a full cubic lattice the midpoint sum is a discrete convolution and is
    computed with FFTs; other grids fall back to the direct pairwise sum.
    Both paths use the same cell kernel, including the equal-volume-ball
    self term, so they agree to rounding.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_cells, 3):
        raise ValueError("forcing shape does not match the volume grid")
    m = _lattice_resolution(grid)
    if m is None:
        return newtonian_velocity(grid, values, grid.centers, params)
    h = grid.spacing
    offsets = h * np.arange(-(m - 1), m)
    diff = np.stack(np.meshgrid(offsets, offsets, offsets, indexing="ij"),
                    axis=-1)
    center = (m - 1, m - 1, m - 1)
    diff[center] = 1.0  # placeholder; the self cell gets the ball term
    kernel = h ** 3 * brinkman_velocity_tensor(diff, params.alpha)
    radius = (3.0 * h ** 3 / (4.0 * np.pi)) ** (1.0 / 3.0)
    kernel[center] = (radius ** 2 / 3.0) * np.eye(3)
    forcing = values.reshape(m, m, m, 3)
    out = np.zeros((m, m, m, 3))
    for a in range(3):
        for b in range(3):
            full = fftconvolve(kernel[..., a, b], forcing[..., b],
                               mode="full")
            out[..., a] += full[m - 1:2 * m - 1,
                                m - 1:2 * m - 1,
                                m - 1:2 * m - 1]
    return -out.reshape(-1, 3)


def _grid_velocity(workspace, grid, handle, forcing_values, params):
    """Velocity of a forced mixed solve at every grid cell center."""
    rows = workspace.grid_velocity_rows(grid)
    flat = handle.density.values.reshape(-1)
    layer = np.einsum("cam,m->ca", rows, flat)
    return layer + _newtonian_grid_velocity(grid, forcing_values, params)


# ------------------------------------------------------------ fixed-point run

def picard_solve(mesh, labeling, grid, params, forcing, dirichlet_data,
                 neumann_data, config, initial_velocity=None, constants=None,
                 workspace=None, quadrature_order=6):
    """Solve the semilinear mixed problem by fixed-point iteration.

    Each step solves the linear mixed problem with forcing f + β|v|v sampled
    on the grid and takes the velocity at the cell centers as the next
    iterate.  Returns the forced-solve handle of the last iterate together
    with a ContractionReport.  constants may carry a precomputed
    SmallnessConstants record; when omitted (and β > 0) the estimator runs
    with its defaults so the report is always complete.  initial_velocity
    overrides the v₀ = 0 start, for basin-of-attraction experiments.

    Raises SmallnessViolated when the differences grow for three consecutive
    iterations and exceed ten times the first difference, and NotConverged
    (carrying the report) when max_iter is reached first.
    """
    if params.alpha <= 0.0:
        raise UnsupportedParameter("the fixed-point solver needs alpha > 0")
    base = BVPSpec(kind=MIXED, params=params, mesh=mesh, labeling=labeling,
                   dirichlet_data=dirichlet_data, neumann_data=neumann_data,
                   forcing=forcing, grid=grid,
                   quadrature_order=quadrature_order)
    ws = _shared_workspace(mesh, params, quadrature_order, workspace)
    beta = params.beta
    if constants is None and beta > 0.0:
        constants = estimate_constants(mesh, labeling, grid, params,
                                       samples=8,
                                       quadrature_order=quadrature_order,
                                       workspace=ws)

    if initial_velocity is None:
        v = np.zeros((grid.n_cells, 3))
    else:
        if isinstance(initial_velocity, VolumeField):
            if initial_velocity.grid is not grid:
                raise ValueError("initial velocity lives on a different grid")
            v = np.array(initial_velocity.values)
        else:
            v = np.array(initial_velocity, dtype=float)
        if v.shape != (grid.n_cells, 3):
            raise ValueError(f"initial velocity must have shape "
                             f"({grid.n_cells}, 3)")
        if not np.all(np.isfinite(v)):
            raise ValueError("initial velocity contains non-finite values")

    diffs = []
    norms = [_grid_norm(grid, v)]
    streak = 0
    converged = False
    handle = None
    for _ in range(config.max_iter):
        forcing_values = forcing.values + _drag(v, beta)
        if not np.all(np.isfinite(forcing_values)):
            raise SmallnessViolated(
                "the nonlinear forcing overflowed; data are far outside the "
                "smallness regime", diagnostics=_diagnostics(diffs, norms,
                                                             streak))
        spec = replace(base, forcing=VolumeField(grid, forcing_values))
        handle, _ = solve_poisson(spec, ws)
        raw = _grid_velocity(ws, grid, handle, forcing_values, params)
        if beta == 0.0:
            # the map does not depend on v, so its value is the fixed point;
            # damping is skipped because there is nothing to stabilize
            v_next = raw
        else:
            v_next = v + config.damping * (raw - v)
        diff = _grid_norm(grid, v_next - v)
        streak = streak + 1 if diffs and diff > diffs[-1] else 0
        diffs.append(diff)
        norms.append(_grid_norm(grid, v_next))
        v = v_next
        if beta == 0.0 or diff <= config.tol:
            converged = True
            break
        if streak >= 3 and diff > 10.0 * diffs[0]:
            raise SmallnessViolated(
                f"successive differences grew for {streak} consecutive "
                f"iterations and reached {diff:.3e}, more than ten times "
                f"the first difference {diffs[0]:.3e}; the data likely "
                f"violate the smallness condition",
                diagnostics=_diagnostics(diffs, norms, streak))

    report = _contraction_report(diffs, norms, constants, converged)
    if not converged:
        raise NotConverged(
            f"no convergence after {config.max_iter} iterations; last "
            f"difference {diffs[-1]:.3e} vs tol {config.tol:.3e}",
            report=report)
    return handle, report


def _diagnostics(diffs, norms, streak):
    return {
        "differences": list(diffs),
        "iterate_norms": list(norms),
        "first_difference": diffs[0] if diffs else None,
        "last_difference": diffs[-1] if diffs else None,
        "growth_streak": streak,
        "iterations": len(diffs),
    }


def _contraction_report(diffs, norms, constants, converged):
    ratios = [diffs[i + 1] / diffs[i] for i in range(len(diffs) - 1)
              if diffs[i] > 0.0]
    tail = ratios[1:] if len(ratios) > 1 else ratios
    measured = max(tail) if tail else 0.0
    if constants is None:
        ball = True
    else:
        ball = all(n <= constants.eta_est for n in norms)
    return ContractionReport(iterates=tuple(diffs), measured_ratio=measured,
                             constants=constants, converged=converged,
                             ball_respected=ball)


# ------------------------------------------------------- constant estimation

def _smooth_field(points, scale, rng, n_modes=4):
    """Sum of a few low-frequency plane waves with rng coefficients.

    Smooth samples overlap the dominant modes of the solution map; white
    noise at the sample points would concentrate on high frequencies the
    map damps, biasing the norm estimate low.
    """
    out = np.zeros((len(points), 3))
    for _ in range(n_modes):
        wave = rng.normal(size=3) * np.pi / scale
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amplitude = rng.normal(size=3)
        out += amplitude * np.cos(points @ wave + phase)[:, None]
    return out


def _tuple_inner(grid, mesh, first, second):
    """Inner product on data tuples (f, h, g): volume plus both boundary
    pairings."""
    f1, h1, g1 = first
    f2, h2, g2 = second
    return (np.einsum("c,ca,ca->", grid.volumes, f1, f2)
            + np.einsum("p,pa,pa->", mesh.areas, h1, h2)
            + np.einsum("p,pa,pa->", mesh.areas, g1, g2))


def estimate_constants(mesh, labeling, grid, params, samples,
                       quadrature_order=6, workspace=None,
                       seed=ESTIMATION_SEED):
    """Estimate the contraction constants from sampled solves.

    Draws `samples` smooth random data tuples, orthonormalizes them in the
    combined data inner product, and solves the linear mixed problem for
    each.  C_est is the operator norm of the solution map restricted to the
    sampled subspace (the square root of the largest eigenvalue of the
    solution Gram matrix); c1prime_est is the largest ‖|v|w‖/(‖v‖‖w‖) over
    ordered pairs of sampled solution fields.  Sampling is prefix-stable in
    `samples`, so both estimates grow monotonically with the sample count.
    """
    if samples < 8:
        raise ValueError(f"need at least 8 samples, got {samples}")
    if params.alpha <= 0.0:
        raise UnsupportedParameter("constant estimation needs alpha > 0")
    ws = _shared_workspace(mesh, params, quadrature_order, workspace)
    scale = mesh.scale

    basis = []
    for i in range(samples):
        rng = np.random.default_rng([seed, i])
        f = _smooth_field(grid.centers, scale, rng)
        h = _smooth_field(mesh.centroids, scale, rng)
        g = _smooth_field(mesh.centroids, scale, rng)
        for e in basis:
            coef = _tuple_inner(grid, mesh, (f, h, g), e)
            f = f - coef * e[0]
            h = h - coef * e[1]
            g = g - coef * e[2]
        norm = math.sqrt(_tuple_inner(grid, mesh, (f, h, g), (f, h, g)))
        if norm <= 0.0:
            continue
        basis.append((f / norm, h / norm, g / norm))

    fields = []
    for f, h, g in basis:
        spec = BVPSpec(kind=MIXED, params=params, mesh=mesh,
                       labeling=labeling,
                       dirichlet_data=BoundaryField(mesh, h),
                       neumann_data=BoundaryField(mesh, g),
                       forcing=VolumeField(grid, f), grid=grid,
                       quadrature_order=quadrature_order)
        handle, _ = solve_poisson(spec, ws)
        fields.append(_grid_velocity(ws, grid, handle, f, params))

    gram = np.array([[np.einsum("c,ca,ca->", grid.volumes, ui, uj)
                      for uj in fields] for ui in fields])
    gram = 0.5 * (gram + gram.T)
    C_est = math.sqrt(max(float(np.linalg.eigvalsh(gram)[-1]), 0.0))

    norms = [_grid_norm(grid, u) for u in fields]
    c1prime = 0.0
    for i, ui in enumerate(fields):
        speed = np.linalg.norm(ui, axis=1)
        for j, uj in enumerate(fields):
            if norms[i] == 0.0 or norms[j] == 0.0:
                continue
            mixed = _grid_norm(grid, speed[:, None] * uj)
            c1prime = max(c1prime, mixed / (norms[i] * norms[j]))

    return SmallnessConstants.derive(C_est, c1prime, params.beta)


# ------------------------------------------------------------------- residual

def semilinear_residual(handle, grid, params, forcing):
    """Relative finite-difference residual of Δu − αu − β|u|u − ∇π = f.

    Evaluates the handle's velocity and pressure at every lattice cell at
    least one layer inside the hull, forms 7-point Laplacians and centered
    pressure gradients at cells at least two layers inside, and returns the
    cell-weighted L² norm of the residual there, relative to
    ‖f‖ + α‖u‖ + β‖|u|u‖ on the same cells (zero over zero counts as zero).
    Needs a full cubic lattice grid with at least 5 cells per edge.
    """
    m = _lattice_resolution(grid)
    if m is None:
        raise ValueError("the residual stencil needs a full cubic lattice "
                         "volume grid")
    if m < 5:
        raise ValueError("the interior stencil needs at least 5 cells per "
                         "edge")
    if isinstance(forcing, VolumeField):
        if forcing.grid is not grid:
            raise ValueError("forcing lives on a different volume grid")
        f_values = forcing.values
    else:
        f_values = np.asarray(forcing, dtype=float)
        if f_values.shape != (grid.n_cells, 3):
            raise ValueError("forcing shape does not match the volume grid")

    h = grid.spacing
    layer = np.minimum(np.arange(m), np.arange(m)[::-1])
    depth = np.minimum.reduce(np.meshgrid(layer, layer, layer, indexing="ij"))
    evaluated = depth >= 1
    probe = depth >= 2

    centers = grid.centers.reshape(m, m, m, 3)
    fields = evaluate_solution(handle, centers[evaluated])
    velocity = np.full((m, m, m, 3), np.nan)
    pressure = np.full((m, m, m), np.nan)
    velocity[evaluated] = fields.velocity
    pressure[evaluated] = fields.pressure

    laplacian = np.zeros((m, m, m, 3))
    gradient = np.zeros((m, m, m, 3))
    for axis in range(3):
        # rolled-in wraparound values land only on the outermost layer,
        # which the probe mask excludes
        u_plus = np.roll(velocity, -1, axis=axis)
        u_minus = np.roll(velocity, 1, axis=axis)
        laplacian += (u_plus + u_minus - 2.0 * velocity) / h ** 2
        p_plus = np.roll(pressure, -1, axis=axis)
        p_minus = np.roll(pressure, 1, axis=axis)
        gradient[..., axis] = (p_plus - p_minus) / (2.0 * h)

    drag = _drag(velocity.reshape(-1, 3), params.beta).reshape(m, m, m, 3)
    residual = (laplacian - params.alpha * velocity - drag - gradient
                - f_values.reshape(m, m, m, 3))

    def cell_norm(block):
        return float(np.sqrt(h ** 3 * np.sum(block ** 2)))

    numerator = cell_norm(residual[probe])
    denominator = (cell_norm(f_values.reshape(m, m, m, 3)[probe])
                   + params.alpha * cell_norm(velocity[probe])
                   + cell_norm(drag[probe]))
    if denominator == 0.0:
        return 0.0
    return float(numerator / denominator)
