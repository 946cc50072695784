"""Session fixtures shared by the acceptance tests: meshes and lazily
assembled solver workspaces for the refinement ladders on the sphere and the
creased cube."""

import pytest

from bbem.geometry import build_cube, build_icosphere, label_patches
from bbem.kernels import BrinkmanParams
from bbem.solvers import SolverWorkspace

UNIT_PARAMS = BrinkmanParams(alpha=1.0)
TOP_FACE_RULE = {"type": "cube_faces", "neumann_faces": ["+z"]}


@pytest.fixture(scope="session")
def sphere_meshes():
    return {level: build_icosphere(level) for level in (1, 2, 3)}


@pytest.fixture(scope="session")
def sphere_workspaces(sphere_meshes):
    """Unit-damping workspaces on the sphere ladder; operators assemble on
    first use and stay cached for every criterion that needs them."""
    return {level: SolverWorkspace(mesh, UNIT_PARAMS)
            for level, mesh in sphere_meshes.items()}


@pytest.fixture(scope="session")
def cube_setups():
    """(mesh, top-face labeling, unit-damping workspace) per cube level."""
    setups = {}
    for level in (1, 2, 3):
        mesh = build_cube(level)
        labeling = label_patches(mesh, TOP_FACE_RULE)
        setups[level] = (mesh, labeling, SolverWorkspace(mesh, UNIT_PARAMS))
    return setups
