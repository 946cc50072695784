"""Dense boundary operators, layer-potential evaluation, volume potentials.

Conventions (bounded interior domain, outward unit normal ν):

  single layer    (V g)(x)   = ∫ G(x−y) g(y) dσ(y)
  its pressure    (Q^s g)(x) = ∫ Π(x−y)·g(y) dσ(y)
  double layer    (W h)_a(x) = ∫ T_{ba}(y, x; ν(y)) h_b(y) dσ(y)
                  (stress taken at the integration point, pole at the target)
  its pressure    (Q^d h)(x) = −∫ Λ_{ik}(x, y) h_i(y) ν_k(y) dσ(y)
  Newtonian       (N f)(x)   = −∫_Ω G(x−y) f(y) dV
  its pressure    (Q_Ω f)(x) = −∫_Ω Π(x−y)·f(y) dV

Every pair satisfies Δu − αu − ∇π = 0 (= f for the Newtonian pair) and
div u = 0 away from the sources.  Boundary traces and tractions, taken from
inside toward the outward normal:

  γ(V g) = 𝒱 g on both sides,   t_int(V g) = (½I + K*) g,
  t_ext(V g) = (−½I + K*) g,    γ_int(W h) = (−½I + K) h,
  γ_ext(W h) = (½I + K) h.

Consequences used throughout the tests: W of a constant c is −c inside and 0
outside at α = 0; V ν ≡ 0 with Q^s ν = −1 inside; the interior solution is
represented as u = V(t) − W(γu), π = Q^s(t) − Q^d(γu).

Densities are piecewise constant at panel centroids.  Assembly and evaluation
run over fixed 64-row chunks whose per-row arithmetic does not depend on the
thread count, so results are byte-identical for any BBEM_THREADS setting.
"""

from __future__ import annotations

import os
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import (
    SurfaceMesh,
    VolumeGrid,
    QuadratureSet,
    duffy_singular_rule,
    panel_quadrature,
)
from .kernels import (
    BrinkmanParams,
    brinkman_pressure_tensor,
    brinkman_velocity_tensor,
    pressure_vector,
    stress_difference_normal,
    traction_kernel,
    velocity_difference,
)

_CHUNK_ROWS = 64
_DUFFY_ORDER = 12
_NEAR_FACTOR = 2.0          # Duffy upgrade inside this many panel diameters
_WARN_FACTOR = 0.05         # accuracy warning inside this many diameters
_KIND_CODES = {"V": 0, "K": 1, "Kstar": 2, "S_mixed": 3, "custom": 255}
_CODE_KINDS = {code: kind for kind, code in _KIND_CODES.items()}
_MAGIC = b"BBEM"
_FORMAT_VERSION = 1


# ------------------------------------------------------------------ field types

@dataclass(frozen=True)
class BoundaryField:
    """Vector values at panel centroids with the area-weighted pairing."""

    mesh: SurfaceMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_panels, 3):
            raise ValueError(f"values must have shape ({self.mesh.n_panels}, 3)")
        if not np.all(np.isfinite(values)):
            raise ValueError("boundary field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def weights(self):
        return self.mesh.areas

    @property
    def flat(self):
        return self.values.reshape(-1)

    def inner(self, other):
        """Area-weighted pairing Σ_i w_i u_i·v_i."""
        return float(np.einsum("i,ij,ij->", self.weights, self.values, other.values))

    def norm(self):
        return float(np.sqrt(np.einsum("i,ij,ij->", self.weights,
                                       self.values, self.values)))


@dataclass(frozen=True)
class VolumeField:
    """Vector values at volume-grid cell centers."""

    grid: VolumeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells, 3):
            raise ValueError(f"values must have shape ({self.grid.n_cells}, 3)")
        if not np.all(np.isfinite(values)):
            raise ValueError("volume field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def inner(self, other):
        """Volume-weighted pairing Σ_c V_c u_c·v_c."""
        return float(np.einsum("i,ij,ij->", self.grid.volumes, self.values,
                               other.values))

    def norm(self):
        """Volume-weighted L² norm."""
        return float(np.sqrt(np.einsum("i,ij,ij->", self.grid.volumes,
                                       self.values, self.values)))


class DenseOperator:
    """Dense 3N×3N boundary operator acting on flattened boundary fields."""

    def __init__(self, matrix, kind, alpha=None):
        matrix = np.ascontiguousarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("operator matrix must be square")
        if matrix.shape[0] % 3:
            raise ValueError("operator size must be a multiple of 3")
        if kind not in _KIND_CODES:
            raise ValueError(f"unknown operator kind {kind!r}")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.kind = kind
        self.alpha = alpha

    @property
    def n_panels(self):
        return self.matrix.shape[0] // 3

    def apply(self, field):
        """Apply to a BoundaryField or an (N, 3) array; returns an (N, 3) array."""
        values = field.values if isinstance(field, BoundaryField) else np.asarray(field)
        return (self.matrix @ values.reshape(-1)).reshape(-1, 3)

    def save(self, path):
        """Raw binary layout: "BBEM", version u32, N u32, kind u8, then the
        3N×3N matrix as little-endian float64, row-major."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", _FORMAT_VERSION, self.n_panels))
            fh.write(struct.pack("<B", _KIND_CODES[self.kind]))
            fh.write(self.matrix.astype("<f8", copy=False).tobytes(order="C"))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            head = fh.read(13)
            if len(head) < 13 or head[:4] != _MAGIC:
                raise ValueError("not an operator file: bad magic")
            version, n = struct.unpack("<II", head[4:12])
            if version != _FORMAT_VERSION:
                raise ValueError(f"unsupported operator format version {version}")
            code = head[12]
            if code not in _CODE_KINDS:
                raise ValueError(f"unknown operator kind code {code}")
            data = fh.read()
        expected = (3 * n) ** 2 * 8
        if len(data) != expected:
            raise ValueError(f"operator payload has {len(data)} bytes, expected {expected}")
        matrix = np.frombuffer(data, dtype="<f8").astype(float).reshape(3 * n, 3 * n)
        return cls(matrix, _CODE_KINDS[code])


# ------------------------------------------------------- chunked deterministic runs

def _thread_count():
    setting = os.environ.get("BBEM_THREADS")
    if setting is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(setting))
    except ValueError:
        return 1


def _run_chunked(n_rows, worker):
    """Run worker(start, stop) over fixed 64-row chunks, optionally threaded.

    Chunk boundaries and per-row arithmetic are independent of the thread
    count, so outputs are byte-identical for any BBEM_THREADS.
    """
    chunks = [(s, min(s + _CHUNK_ROWS, n_rows)) for s in range(0, n_rows, _CHUNK_ROWS)]
    threads = _thread_count()
    if threads == 1 or len(chunks) == 1:
        for start, stop in chunks:
            worker(start, stop)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda span: worker(*span), chunks))


# ----------------------------------------------------------- geometric helpers

def _closest_points_on_panels(corners, p):
    """Closest point to p on each triangle of corners (m, 3, 3), vectorized.

    Standard barycentric region classification: test the three vertex
    regions, then the three edge regions, and default to the face interior.
    """
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    ab, ac = b - a, c - a
    ap = p - a
    d1 = np.einsum("mi,mi->m", ab, ap)
    d2 = np.einsum("mi,mi->m", ac, ap)
    bp = p - b
    d3 = np.einsum("mi,mi->m", ab, bp)
    d4 = np.einsum("mi,mi->m", ac, bp)
    cp = p - c
    d5 = np.einsum("mi,mi->m", ab, cp)
    d6 = np.einsum("mi,mi->m", ac, cp)
    va = d3 * d6 - d4 * d5
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        w_b = vb / denom
        w_c = vc / denom

    # face interior (default), then edge regions, then vertex regions;
    # later assignments win, matching the branch order of the scalar test
    out = a + w_b[:, None] * ab + w_c[:, None] * ac
    on_bc = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)
    out = np.where(on_bc[:, None], b + t_bc[:, None] * (c - b), out)
    on_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    out = np.where(on_ac[:, None], a + t_ac[:, None] * ac, out)
    on_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    out = np.where(on_ab[:, None], a + t_ab[:, None] * ab, out)
    at_c = (d6 >= 0.0) & (d5 <= d6)
    out = np.where(at_c[:, None], c, out)
    at_b = (d3 >= 0.0) & (d4 <= d3)
    out = np.where(at_b[:, None], b, out)
    at_a = (d1 <= 0.0) & (d2 <= 0.0)
    out = np.where(at_a[:, None], a, out)
    return out


def _near_panels(mesh, x, skip=-1):
    """Panels whose true distance to x is below the Duffy-upgrade threshold.

    Returns (entries, min_distance) where entries are (panel, closest_point)
    pairs.  min_distance is over the candidate panels only (inf when none),
    which is exact whenever it matters: any non-candidate panel is farther
    than every candidate cutoff.
    """
    centroid_dist = np.linalg.norm(mesh.centroids - x, axis=1)
    # centroid-to-farthest-corner is at most one diameter, so this is safe
    candidates = np.nonzero(centroid_dist < (_NEAR_FACTOR + 1.0) * mesh.diameters)[0]
    if skip >= 0:
        candidates = candidates[candidates != skip]
    if len(candidates) == 0:
        return [], np.inf
    closest = _closest_points_on_panels(mesh.panel_corners[candidates], x)
    dist = np.linalg.norm(x - closest, axis=1)
    min_dist = float(dist.min())
    keep = dist < _NEAR_FACTOR * mesh.diameters[candidates]
    entries = [(int(j), point) for j, point in
               zip(candidates[keep], closest[keep])]
    return entries, min_dist


def _near_rule_batch(mesh, near):
    """Concatenated singular rules for all near panels of one target.

    Returns (nodes (M, 3), weights (M,), normals (M, 3), slices) with slices
    a list of (panel, start, stop), or None when there are no near panels.
    Batching lets the kernel be evaluated once per target instead of once
    per panel.
    """
    if not near:
        return None
    nodes, weights, normals, slices = [], [], [], []
    start = 0
    for j, point in near:
        dn, dw = duffy_singular_rule(mesh.panel_corners[j], point, _DUFFY_ORDER)
        nodes.append(dn)
        weights.append(dw)
        normals.append(np.broadcast_to(mesh.normals[j], (len(dw), 3)))
        slices.append((j, start, start + len(dw)))
        start += len(dw)
    return (np.concatenate(nodes, axis=0), np.concatenate(weights, axis=0),
            np.concatenate(normals, axis=0), slices)


def _check_mesh_panels(mesh):
    if mesh.areas.min() < 1.0e-14 * mesh.scale ** 2:
        raise ValueError("degenerate panel: area below 1e-14 of the squared mesh scale")


def _check_quadrature(mesh, quadrature):
    if quadrature.nodes.shape[0] != mesh.n_panels:
        raise ValueError("quadrature was built for a different mesh")


# ------------------------------------------------- analytic self-panel integral

def _stokes_self_block(corners, centroid):
    """∫_panel G⁰(centroid − y) dσ(y) for the flat triangle, in closed form.

    In polar coordinates around the centroid the Stokes kernel integrates per
    edge wedge: with p the distance to the edge line, t the edge direction and
    a < b the signed offsets of the corners along t from the foot,
      ∫ dσ/r                    = p·ln((√(p²+b²)+b)/(√(p²+a²)+a))
      ∫ x̂x̂ᵀ dσ/r  (in the (u,t) frame, u the unit foot direction)
                                 = [[m₁₁, m₁₂], [m₁₂, I₁ − m₁₁]]
      m₁₁ = p(b/√(p²+b²) − a/√(p²+a²)),  m₁₂ = p²(1/√(p²+a²) − 1/√(p²+b²)).
    """
    total_inv_r = 0.0
    mat = np.zeros((3, 3))
    for e0, e1 in ((0, 1), (1, 2), (2, 0)):
        va, vb = corners[e0], corners[e1]
        t = vb - va
        t = t / np.linalg.norm(t)
        foot = va + ((centroid - va) @ t) * t
        u = foot - centroid
        p = np.linalg.norm(u)
        u = u / p
        a = (va - foot) @ t
        b = (vb - foot) @ t
        ha = np.hypot(p, a)
        hb = np.hypot(p, b)
        inv_r = p * np.log((hb + b) / (ha + a))
        m11 = p * (b / hb - a / ha)
        m12 = p * p * (1.0 / ha - 1.0 / hb)
        total_inv_r += inv_r
        mat += (m11 * np.outer(u, u) + m12 * (np.outer(u, t) + np.outer(t, u))
                + (inv_r - m11) * np.outer(t, t))
    return (total_inv_r * np.eye(3) + mat) / (8.0 * np.pi)


def _self_single_layer_block(mesh, i, alpha):
    """Self-panel ∫ G^α: analytic Stokes part plus the bounded difference."""
    corners = mesh.panel_corners[i]
    centroid = mesh.centroids[i]
    block = _stokes_self_block(corners, centroid)
    if alpha > 0.0:
        dn, dw = duffy_singular_rule(corners, centroid, _DUFFY_ORDER)
        diff = velocity_difference(centroid[None, :] - dn, alpha)
        block = block + np.einsum("q,qab->ab", dw, diff)
    return block


# ------------------------------------------------------------- operator assembly

def assemble_single_layer(mesh, quadrature, params):
    """Dense matrix of the single-layer boundary trace 𝒱_α.

    Row block i, column block j approximates ∫_{panel j} G^α(x_i − y) dσ(y):
    regular quadrature for distant panels, a singularity-clustered rule for
    panels within two diameters, and the analytic-plus-correction self block.
    """
    _check_mesh_panels(mesh)
    _check_quadrature(mesh, quadrature)
    alpha = params.alpha
    n = mesh.n_panels
    nodes, weights = quadrature.nodes, quadrature.weights
    centroids = mesh.centroids
    out = np.zeros((3 * n, 3 * n))

    def worker(start, stop):
        for i in range(start, stop):
            x = centroids[i]
            near, _ = _near_panels(mesh, x, skip=i)
            far = np.ones(n, dtype=bool)
            far[i] = False
            for j, _ in near:
                far[j] = False
            row = np.zeros((n, 3, 3))
            kernel = brinkman_velocity_tensor(x[None, None, :] - nodes[far], alpha)
            row[far] = np.einsum("fq,fqab->fab", weights[far], kernel)
            batch = _near_rule_batch(mesh, near)
            if batch is not None:
                bn, bw, _, slices = batch
                bk = bw[:, None, None] * brinkman_velocity_tensor(
                    x[None, :] - bn, alpha)
                for j, s0, s1 in slices:
                    row[j] = bk[s0:s1].sum(axis=0)
            row[i] = _self_single_layer_block(mesh, i, alpha)
            out[3 * i:3 * i + 3, :] = row.transpose(1, 0, 2).reshape(3, 3 * n)

    _run_chunked(n, worker)
    return DenseOperator(out, "V", alpha=alpha)


def assemble_double_layer(mesh, quadrature, params):
    """Dense matrix of the double-layer boundary operator K_α.

    The Stokes part carries the full singularity: its off-diagonal blocks come
    from quadrature (singularity-clustered within two diameters) and its
    diagonal from the constant identity K⁰c = −½c, i.e. the row-block diagonal
    is −½I minus the sum of off-diagonal blocks.  The remainder K_α − K⁰ has a
    bounded kernel and is integrated directly, with clustered rules on near
    and self panels.
    """
    _check_mesh_panels(mesh)
    _check_quadrature(mesh, quadrature)
    alpha = params.alpha
    n = mesh.n_panels
    nodes, weights = quadrature.nodes, quadrature.weights
    centroids, normals = mesh.centroids, mesh.normals
    out = np.zeros((3 * n, 3 * n))

    def worker(start, stop):
        for i in range(start, stop):
            x = centroids[i]
            near, _ = _near_panels(mesh, x, skip=i)
            far = np.ones(n, dtype=bool)
            far[i] = False
            for j, _ in near:
                far[j] = False
            row = np.zeros((n, 3, 3))
            batch = _near_rule_batch(mesh, near)
            # Stokes part, off-diagonal
            t0 = traction_kernel(nodes[far], x[None, None, :],
                                 normals[far][:, None, :], 0.0)
            row[far] = np.einsum("fq,fqba->fab", weights[far], t0)
            if batch is not None:
                bn, bw, bnu, slices = batch
                bt0 = bw[:, None, None] * traction_kernel(bn, x[None, :], bnu, 0.0)
                for j, s0, s1 in slices:
                    row[j] = bt0[s0:s1].sum(axis=0).T
            diag = -0.5 * np.eye(3) - row.sum(axis=0)
            # bounded difference part K_alpha - K0
            if alpha > 0.0:
                dk = stress_difference_normal(nodes[far], x[None, None, :],
                                              normals[far][:, None, :], alpha)
                row[far] += np.einsum("fq,fqba->fab", weights[far], dk)
                if batch is not None:
                    bd = bw[:, None, None] * stress_difference_normal(
                        bn, x[None, :], bnu, alpha)
                    for j, s0, s1 in slices:
                        row[j] += bd[s0:s1].sum(axis=0).T
                dn, dw = duffy_singular_rule(mesh.panel_corners[i], x, _DUFFY_ORDER)
                dd = stress_difference_normal(dn, x[None, :], normals[i][None, :],
                                              alpha)
                diag = diag + np.einsum("q,qba->ab", dw, dd)
            row[i] = diag
            out[3 * i:3 * i + 3, :] = row.transpose(1, 0, 2).reshape(3, 3 * n)

    _run_chunked(n, worker)
    return DenseOperator(out, "K", alpha=alpha)


def adjoint_double_layer(double_layer, weights):
    """Transpose of K_α with respect to the area-weighted pairing.

    (K*)_{(i,a),(j,b)} = (w_j / w_i) K_{(j,b),(i,a)}.  With exact pairing
    duality built in, (½I + K*) is the interior traction map of the single
    layer and (−½I + K*) the exterior one.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or 3 * len(weights) != double_layer.matrix.shape[0]:
        raise ValueError("weights do not match the operator's panel count")
    w = np.repeat(weights, 3)
    matrix = double_layer.matrix.T * (w[None, :] / w[:, None])
    return DenseOperator(matrix, "Kstar", alpha=double_layer.alpha)


# ----------------------------------------------------------- off-boundary evaluation

def _point_guard(mesh, x, near_entries, min_dist):
    if min_dist < 1.0e-6 * mesh.scale:
        raise ValueError("evaluation point lies on the boundary "
                         f"(distance {min_dist:.3e})")
    for j, point in near_entries:
        if np.linalg.norm(x - point) < _WARN_FACTOR * mesh.diameters[j]:
            warnings.warn("evaluation point is within 0.05 panel diameters of "
                          "the boundary; accuracy degrades", RuntimeWarning,
                          stacklevel=3)
            break


def _layer_rows(mesh, quadrature, params, points, which):
    """Evaluation matrix rows for one layer kernel at the given points.

    which: "V" and "W" give (P, 3, 3N) tensors; "Qs" and "Qd" give (P, 3N).
    Near-singular panels are integrated with singularity-clustered rules.
    """
    _check_quadrature(mesh, quadrature)
    alpha = params.alpha
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = mesh.n_panels
    n_points = len(points)
    nodes, weights = quadrature.nodes, quadrature.weights
    normals = mesh.normals
    vector_valued = which in ("V", "W")
    out = np.zeros((n_points, 3, 3 * n) if vector_valued else (n_points, 3 * n))

    def flat_rows(x, sel_nodes, sel_normals):
        # pointwise kernel values at flattened nodes: (M, 3, 3) or (M, 3)
        if which == "V":
            return brinkman_velocity_tensor(x[None, :] - sel_nodes, alpha)
        if which == "W":
            kern = traction_kernel(sel_nodes, x[None, :], sel_normals, alpha)
            return kern.transpose(0, 2, 1)
        if which == "Qs":
            return pressure_vector(x[None, :] - sel_nodes)
        kern = brinkman_pressure_tensor(x[None, :], sel_nodes, alpha)
        return -np.einsum("qik,qk->qi", kern, sel_normals)

    def worker(start, stop):
        for p in range(start, stop):
            x = points[p]
            near, min_dist = _near_panels(mesh, x)
            _point_guard(mesh, x, near, min_dist)
            far = np.ones(n, dtype=bool)
            for j, _ in near:
                far[j] = False
            blocks = np.zeros((n, 3, 3) if vector_valued else (n, 3))
            n_far = int(far.sum())
            fk = flat_rows(x, nodes[far].reshape(-1, 3),
                           np.repeat(normals[far], nodes.shape[1], axis=0))
            fk = fk.reshape((n_far, nodes.shape[1]) + fk.shape[1:])
            blocks[far] = np.einsum("jq,jq...->j...", weights[far], fk)
            batch = _near_rule_batch(mesh, near)
            if batch is not None:
                bn, bw, bnu, slices = batch
                bk = flat_rows(x, bn, bnu)
                bk = bw.reshape((-1,) + (1,) * (bk.ndim - 1)) * bk
                for j, s0, s1 in slices:
                    blocks[j] = bk[s0:s1].sum(axis=0)
            if vector_valued:
                out[p] = blocks.transpose(1, 0, 2).reshape(3, 3 * n)
            else:
                out[p] = blocks.reshape(3 * n)

    _run_chunked(n_points, worker)
    return out


def eval_single_layer(mesh, density, points, params, quadrature=None):
    """(V_α g)(x) at off-boundary points; returns a (P, 3) array."""
    quadrature, values = _eval_setup(mesh, density, quadrature)
    rows = _layer_rows(mesh, quadrature, params, points, "V")
    return np.einsum("pam,m->pa", rows, values.reshape(-1))


def eval_single_layer_pressure(mesh, density, points, params, quadrature=None):
    """(Q^s g)(x) at off-boundary points; returns a (P,) array."""
    quadrature, values = _eval_setup(mesh, density, quadrature)
    rows = _layer_rows(mesh, quadrature, params, points, "Qs")
    return rows @ values.reshape(-1)


def eval_double_layer(mesh, density, points, params, quadrature=None):
    """(W_α h)(x) at off-boundary points; returns a (P, 3) array."""
    quadrature, values = _eval_setup(mesh, density, quadrature)
    rows = _layer_rows(mesh, quadrature, params, points, "W")
    return np.einsum("pam,m->pa", rows, values.reshape(-1))


def eval_double_layer_pressure(mesh, density, points, params, quadrature=None):
    """(Q^d_α h)(x) at off-boundary points; returns a (P,) array."""
    quadrature, values = _eval_setup(mesh, density, quadrature)
    rows = _layer_rows(mesh, quadrature, params, points, "Qd")
    return rows @ values.reshape(-1)


def _eval_setup(mesh, density, quadrature):
    if quadrature is None:
        quadrature = panel_quadrature(mesh, 6)
    values = density.values if isinstance(density, BoundaryField) else np.asarray(density)
    if values.shape != (mesh.n_panels, 3):
        raise ValueError("density shape does not match the mesh")
    return quadrature, values


# --------------------------------------------------------------- volume potentials

def _volume_values(grid, forcing):
    values = forcing.values if isinstance(forcing, VolumeField) else np.asarray(forcing)
    if values.shape != (grid.n_cells, 3):
        raise ValueError("forcing shape does not match the volume grid")
    return values


def newtonian_velocity(grid, forcing, points, params):
    """(N_α f)(x) = −Σ_c V_c G^α(x − y_c) f_c by midpoint sums.

    When x coincides with a cell center the cell's own term is replaced by the
    equal-volume-ball Stokes integral −(R²/3) f(x), R = (3 V_cell / 4π)^{1/3};
    the α-dependence of that cell is O(R³) and neglected.
    """
    values = _volume_values(grid, forcing)
    alpha = params.alpha
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros((len(points), 3))
    radius = (3.0 * grid.volumes / (4.0 * np.pi)) ** (1.0 / 3.0)

    def worker(start, stop):
        diff = points[start:stop, None, :] - grid.centers[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        self_mask = dist < 1.0e-9 * grid.spacing
        diff = np.where(self_mask[:, :, None], 1.0, diff)
        kernel = brinkman_velocity_tensor(diff, alpha)
        kernel[self_mask] = 0.0
        out[start:stop] = -np.einsum("c,pcab,cb->pa", grid.volumes, kernel, values)
        rows, cols = np.nonzero(self_mask)
        out[start + rows] -= (radius[cols, None] ** 2 / 3.0) * values[cols]

    _run_chunked(len(points), worker)
    return out


def newtonian_pressure(grid, forcing, points):
    """(Q_Ω f)(x) = −Σ_c V_c Π(x − y_c)·f_c; the self cell vanishes by odd
    symmetry of Π and is skipped."""
    values = _volume_values(grid, forcing)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(points))

    def worker(start, stop):
        diff = points[start:stop, None, :] - grid.centers[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        self_mask = dist < 1.0e-9 * grid.spacing
        diff = np.where(self_mask[:, :, None], 1.0, diff)
        kernel = pressure_vector(diff)
        kernel[self_mask] = 0.0
        out[start:stop] = -np.einsum("c,pcb,cb->p", grid.volumes, kernel, values)

    _run_chunked(len(points), worker)
    return out


def newtonian_boundary_data(grid, forcing, mesh, params):
    """Trace and traction of the Newtonian pair at the panel centroids.

    The trace sums the O(1/r) velocity kernel over all cells.  The traction
    sums the O(1/r²) stress kernel, excluding cells whose center lies within
    one cell diameter of the target; the excluded ball contributes zero to
    leading order by odd symmetry.
    """
    values = _volume_values(grid, forcing)
    alpha = params.alpha
    trace = newtonian_velocity(grid, forcing, mesh.centroids, params)
    traction = np.zeros((mesh.n_panels, 3))
    cutoff = np.sqrt(3.0) * grid.spacing

    def worker(start, stop):
        diff_dist = np.linalg.norm(mesh.centroids[start:stop, None, :]
                                   - grid.centers[None, :, :], axis=2)
        keep = diff_dist >= cutoff
        kernel = traction_kernel(mesh.centroids[start:stop, None, :],
                                 grid.centers[None, :, :],
                                 mesh.normals[start:stop, None, :], alpha)
        kernel = np.where(keep[:, :, None, None], kernel, 0.0)
        traction[start:stop] = -np.einsum("c,pcib,cb->pi", grid.volumes,
                                          kernel, values)

    _run_chunked(mesh.n_panels, worker)
    return (BoundaryField(mesh, trace), BoundaryField(mesh, traction))
