"""Verification-harness tests: manufactured-solution validity, battery
sanity, suite reports and their determinism, convergence tables with CSV
round-trips, configured runs with on-disk artifacts, and the command-line
interface."""

import json
import os

import numpy as np
import pytest

from bbem.errors import InvalidSource
from bbem.geometry import build_cube, build_icosphere, winding_number
from bbem.kernels import BrinkmanParams, stokeslet
from bbem.solvers import SolverWorkspace
from bbem import cli
from bbem import harness as H

from _oracles import fd_gradient, fd_laplacian

PARAMS = BrinkmanParams(alpha=1.0)
SPHERE_POLE = [0.0, 0.0, 3.0]


# ------------------------------------------------------ manufactured fields

def test_manufactured_rejects_bad_column():
    for column in (0, 4, -1):
        with pytest.raises(ValueError, match="column"):
            H.manufactured_solution(SPHERE_POLE, column, PARAMS)


def test_manufactured_rejects_nonfinite_point():
    with pytest.raises(ValueError, match="finite"):
        H.manufactured_solution([np.inf, 0.0, 0.0], 1, PARAMS)


def test_manufactured_rejects_interior_pole():
    mesh = build_icosphere(1)
    with pytest.raises(InvalidSource, match="inside"):
        H.manufactured_solution([0.0, 0.0, 0.0], 2, PARAMS, mesh)


def test_manufactured_rejects_pole_too_close():
    mesh = build_icosphere(1)
    with pytest.raises(InvalidSource, match="quarter"):
        H.manufactured_solution([0.0, 0.0, 1.2], 2, PARAMS, mesh)


def test_manufactured_guard_runs_on_trace_and_traction():
    source = H.manufactured_solution([0.0, 0.0, 1.2], 2, PARAMS)
    mesh = build_icosphere(1)
    with pytest.raises(InvalidSource):
        source.trace(mesh)
    with pytest.raises(InvalidSource):
        source.traction(mesh)


def test_manufactured_stokes_limit_is_stokeslet_column():
    source = H.manufactured_solution(SPHERE_POLE, 2,
                                     BrinkmanParams(alpha=0.0))
    points = np.array([[0.1, -0.2, 0.3], [0.0, 0.0, 0.0], [-0.4, 0.2, 0.1]])
    expected = stokeslet(points - np.asarray(SPHERE_POLE))[:, :, 1]
    np.testing.assert_allclose(source.velocity(points), expected, rtol=1e-12)


def test_manufactured_fields_solve_the_pde():
    """Momentum and mass balance of the manufactured pair at interior
    points, checked with the shared finite-difference oracles."""
    source = H.manufactured_solution(SPHERE_POLE, 2, PARAMS)
    rng = np.random.default_rng(11)
    points = rng.uniform(-0.4, 0.4, size=(20, 3))
    lap = fd_laplacian(source.velocity, points, 1e-3)
    grad_p = fd_gradient(source.pressure, points, 1e-3, order4=True)
    resid = lap - PARAMS.alpha * source.velocity(points) - grad_p
    assert np.max(np.abs(resid)) < 1e-5
    div = np.einsum("pii->p",
                    fd_gradient(source.velocity, points, 1e-3, order4=True))
    assert np.max(np.abs(div)) < 1e-6


def test_manufactured_trace_flux_vanishes_under_refinement():
    """The exact trace is divergence-free, so its discrete boundary flux is
    pure quadrature error and shrinks with the mesh."""
    source = H.manufactured_solution(SPHERE_POLE, 2, PARAMS)
    fluxes = []
    for level in (1, 2):
        mesh = build_icosphere(level)
        trace = source.trace(mesh)
        fluxes.append(abs(float(np.sum(
            mesh.areas * np.sum(trace.values * mesh.normals, axis=1)))))
    assert fluxes[1] < fluxes[0]
    assert fluxes[1] < 1e-4


def test_interior_probes_stay_inside():
    for mesh in (build_icosphere(1), build_cube(1)):
        probes = H.interior_probes(mesh)
        assert probes.shape == H.INTERIOR_PROBES.shape
        np.testing.assert_allclose(winding_number(mesh, probes), 1.0,
                                   atol=1e-6)


def test_interior_probes_scale_with_the_mesh():
    small = H.interior_probes(build_icosphere(1, radius=1.0))
    large = H.interior_probes(build_icosphere(1, radius=2.0))
    np.testing.assert_allclose(large, 2.0 * small, rtol=1e-12)


# ----------------------------------------------------------------- batteries

def test_kernel_pde_errors_are_tiny():
    errors = H.kernel_pde_errors(n_points=20)
    assert errors["pde_residual"] < 1e-5
    assert errors["divergence"] < 1e-6


def test_stokes_limit_gaps_decrease():
    gaps = H.stokes_limit_gaps()
    assert gaps[0] > gaps[1] > gaps[2] > 0.0


def test_decay_envelope_excess_near_one():
    assert 1.0 <= H.decay_envelope_excess() < 1.05


def test_jump_battery_measures_small_jumps():
    results = H.jump_battery(build_icosphere(2), PARAMS)
    assert set(results) == {"sl_trace", "w_jump", "t_jump"}
    assert results["sl_trace"] < 1e-2
    assert results["w_jump"] < 1e-1
    assert results["t_jump"] < 2e-1


def test_operator_spectra_and_normal_defect():
    ws = SolverWorkspace(build_icosphere(1), BrinkmanParams(alpha=4.0))
    spectra = H.operator_spectra(ws)
    assert spectra["sigma_min_minus"] < 5e-2
    assert spectra["nu_cosine"] > 0.99
    assert spectra["sigma2_minus"] > 10.0 * spectra["sigma_min_minus"]
    assert spectra["sigma_min_plus"] > 0.1
    assert H.sl_normal_defect(ws) < 1e-6


def test_manufactured_errors_requires_labeling_for_mixed():
    mesh = build_cube(1)
    source = H.manufactured_solution(H.CUBE_SOURCE_POINT, 2, PARAMS)
    with pytest.raises(ValueError, match="labeling"):
        H.manufactured_errors(H.MIXED, mesh, source, H.INTERIOR_PROBES)


def test_newtonian_residual_small_and_guarded():
    assert H.newtonian_residual(12, PARAMS) < 5e-2
    with pytest.raises(ValueError, match="5 cells"):
        H.newtonian_residual(4, PARAMS)


# ------------------------------------------------------------------- checks

def test_check_comparisons():
    assert H._check("a", 1.0, 2.0).passed
    assert not H._check("a", 3.0, 2.0).passed
    assert H._check("a", 3.0, 2.0, ">=").passed
    assert not H._check("a", 2.0, 2.0, ">").passed
    assert not H._check("a", np.nan, 2.0).passed


def test_check_line_format():
    line = H._check("pde_residual", 1.23e-3, 5e-2).line()
    assert line == "PASS pde_residual: 1.230000e-03 <= 5.000000e-02"
    assert H._check("x", 3.0, 2.0).line().startswith("FAIL x: ")


def test_verify_suite_rejects_unknown_name():
    with pytest.raises(ValueError, match="unknown suite"):
        H.verify_suite("spectra")


def test_kernels_suite_passes_and_reports():
    report = H.verify_suite("kernels")
    assert report.passed
    assert report.suite == "kernels"
    assert report.seed == H.SUITE_SEED
    assert len(report.lines()) == len(report.checks)
    doc = json.loads(report.to_json())
    assert doc["wall_time_s"] == report.wall_time_s
    assert "wall_time_s" not in json.loads(report.fingerprint())


def test_kernels_suite_fingerprint_is_stable():
    assert (H.verify_suite("kernels").fingerprint()
            == H.verify_suite("kernels").fingerprint())


# -------------------------------------------------------------- convergence

STUDY = {
    "kind": "dirichlet",
    "geometry": {"type": "icosphere"},
    "levels": [1, 2],
    "alpha": 1.0,
    "source_point": SPHERE_POLE,
    "column": 2,
}


def test_convergence_study_halves_the_error():
    table = H.convergence_study(STUDY)
    first, second = table.rows
    assert (first.level, second.level) == (1, 2)
    assert (first.n_panels, second.n_panels) == (80, 320)
    assert first.ratio is None
    assert second.ratio >= 2.0
    assert second.interior_l2 < first.interior_l2
    assert second.jump_residual < first.jump_residual


def test_convergence_study_mixed_cube_decreases_monotonically():
    table = H.convergence_study({
        "kind": "mixed",
        "geometry": {"type": "cube"},
        "levels": [1, 2],
        "alpha": 1.0,
        "source_point": list(H.CUBE_SOURCE_POINT),
        "column": 2,
        "patches": {"type": "cube_faces", "neumann_faces": ["+z"]},
    })
    first, second = table.rows
    assert (first.n_panels, second.n_panels) == (48, 192)
    assert second.interior_l2 < first.interior_l2
    assert second.jump_residual < first.jump_residual


def test_convergence_study_single_level():
    table = H.convergence_study({**STUDY, "levels": [2]})
    assert len(table.rows) == 1
    assert table.rows[0].ratio is None
    assert "320" in table.to_csv()


def test_convergence_csv_round_trip():
    table = H.convergence_study(STUDY)
    text = table.to_csv()
    assert text.splitlines()[0] == "level,n_panels,trace_l2,interior_l2," \
                                   "jump_residual,ratio"
    assert H.parse_convergence_csv(text) == table
    assert H.parse_convergence_csv(text).to_csv() == text


def test_parse_convergence_csv_rejects_bad_header():
    with pytest.raises(ValueError, match="header"):
        H.parse_convergence_csv("a,b,c\n1,2,3\n")


def test_convergence_table_requires_increasing_panels():
    row = H.ConvergenceRow(level=1, n_panels=80, trace_l2=0.0,
                           interior_l2=0.1, jump_residual=0.1, ratio=None)
    with pytest.raises(ValueError, match="increase"):
        H.ConvergenceTable(rows=(row, row))


def test_convergence_study_refuses_oversized_meshes():
    with pytest.raises(H.ConfigError, match="budget"):
        H.convergence_study({**STUDY, "levels": [1, 4]})


def test_convergence_study_names_missing_keys():
    partial = {k: v for k, v in STUDY.items() if k != "source_point"}
    with pytest.raises(H.ConfigError, match="source_point"):
        H.convergence_study(partial)


def test_convergence_study_rejects_unsorted_levels():
    with pytest.raises(H.ConfigError, match="strictly"):
        H.convergence_study({**STUDY, "levels": [2, 1]})


def test_convergence_study_requires_patches_for_mixed():
    with pytest.raises(H.ConfigError, match="patches"):
        H.convergence_study({**STUDY, "kind": "mixed",
                             "geometry": {"type": "cube"}})


# ---------------------------------------------------------- configured runs

RUN = {
    "kind": "neumann",
    "geometry": {"type": "icosphere", "level": 1},
    "alpha": 1.0,
    "data": {"source": "manufactured", "source_point": SPHERE_POLE,
             "column": 2},
}


def _write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def test_run_config_writes_deterministic_artifacts(tmp_path):
    path = _write_config(tmp_path, RUN)
    first = H.run_config(path, out_dir=str(tmp_path / "a"))
    second = H.run_config(path, out_dir=str(tmp_path / "b"))
    fields_a = open(os.path.join(first, "fields.csv")).read()
    fields_b = open(os.path.join(second, "fields.csv")).read()
    assert fields_a == fields_b
    assert fields_a.splitlines()[0] == ("x,y,z,velocity_x,velocity_y,"
                                        "velocity_z,pressure")
    doc_a = json.load(open(os.path.join(first, "report.json")))
    doc_b = json.load(open(os.path.join(second, "report.json")))
    doc_a["report"].pop("wall_time_s")
    doc_b["report"].pop("wall_time_s")
    assert doc_a == doc_b


def test_run_config_manufactured_neumann_report(tmp_path):
    path = _write_config(tmp_path, RUN)
    dest = H.run_config(path, out_dir=str(tmp_path / "out"))
    doc = json.load(open(os.path.join(dest, "report.json")))
    assert doc["report"]["residual_l2"] < 1e-8
    assert doc["interior_l2"] < 2e-1
    assert doc["contraction"] is None
    assert doc["config"]["data"]["source"] == "manufactured"


def test_run_config_expression_reproduces_uniform_flow(tmp_path):
    cfg = {"kind": "dirichlet",
           "geometry": {"type": "icosphere", "level": 1},
           "alpha": 1.0, "data": {"source": "expression",
                                  "name": "uniform_x"}}
    dest = H.run_config(_write_config(tmp_path, cfg),
                        out_dir=str(tmp_path / "out"))
    doc = json.load(open(os.path.join(dest, "report.json")))
    assert doc["interior_l2"] < 1e-2
    rows = open(os.path.join(dest, "fields.csv")).read().splitlines()[1:]
    velocity_x = [float(row.split(",")[3]) for row in rows]
    np.testing.assert_allclose(velocity_x, 1.0, atol=2e-3)


def test_run_config_file_source(tmp_path):
    mesh = build_icosphere(1)
    values = np.tile([0.0, 0.0, 1.0], (mesh.n_panels, 1))
    npy = tmp_path / "trace.npy"
    np.save(npy, values)
    cfg = {"kind": "dirichlet",
           "geometry": {"type": "icosphere", "level": 1},
           "alpha": 0.5, "data": {"source": "file", "dirichlet": str(npy)}}
    dest = H.run_config(_write_config(tmp_path, cfg),
                        out_dir=str(tmp_path / "out"))
    doc = json.load(open(os.path.join(dest, "report.json")))
    assert doc["interior_l2"] is None
    assert doc["report"]["residual_l2"] < 1e-8


def test_run_config_rejects_missing_kind(tmp_path):
    cfg = {k: v for k, v in RUN.items() if k != "kind"}
    with pytest.raises(H.ConfigError, match="'kind'"):
        H.run_config(_write_config(tmp_path, cfg), out_dir=str(tmp_path))


def test_run_config_rejects_missing_data_file(tmp_path):
    cfg = {**RUN, "kind": "dirichlet",
           "data": {"source": "file", "dirichlet": str(tmp_path / "no.npy")}}
    with pytest.raises(H.ConfigError, match="does not exist"):
        H.run_config(_write_config(tmp_path, cfg), out_dir=str(tmp_path))


def test_run_config_rejects_wrong_file_shape(tmp_path):
    npy = tmp_path / "trace.npy"
    np.save(npy, np.zeros((7, 3)))
    cfg = {**RUN, "kind": "dirichlet",
           "data": {"source": "file", "dirichlet": str(npy)}}
    with pytest.raises(H.ConfigError, match="shape"):
        H.run_config(_write_config(tmp_path, cfg), out_dir=str(tmp_path))


def test_run_config_rejects_drag_without_volume(tmp_path):
    cfg = {**RUN, "beta": 1.0}
    with pytest.raises(H.ConfigError, match="beta"):
        H.run_config(_write_config(tmp_path, cfg), out_dir=str(tmp_path))


def test_run_config_rejects_interior_source(tmp_path):
    cfg = {**RUN, "data": {"source": "manufactured",
                           "source_point": [0.0, 0.0, 0.0], "column": 2}}
    with pytest.raises(InvalidSource):
        H.run_config(_write_config(tmp_path, cfg), out_dir=str(tmp_path))


def test_run_config_rejects_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(H.ConfigError, match="JSON"):
        H.run_config(str(path), out_dir=str(tmp_path))


def test_run_config_requires_an_output_directory(tmp_path):
    with pytest.raises(H.ConfigError, match="output"):
        H.run_config(_write_config(tmp_path, RUN))


# -------------------------------------------------------------------- CLI

def test_cli_verify_kernels(capsys):
    assert cli.main(["verify", "--suite", "kernels"]) == 0
    out = capsys.readouterr().out
    assert f"seed {H.SUITE_SEED}" in out
    assert "passed 4/4 checks" in out
    assert out.count("PASS") == 4


def test_cli_verify_rejects_unknown_suite(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--suite", "spectra"])
    assert info.value.code == 2


def test_cli_solve_and_artifacts(tmp_path, capsys):
    path = _write_config(tmp_path, RUN)
    out = str(tmp_path / "out")
    assert cli.main(["solve", "--config", path, "--out", out]) == 0
    assert "report.json" in capsys.readouterr().out
    assert os.path.isfile(os.path.join(out, "report.json"))
    assert os.path.isfile(os.path.join(out, "fields.csv"))


def test_cli_solve_missing_config_is_usage_error(tmp_path, capsys):
    code = cli.main(["solve", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path)])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_cli_solve_bad_config_names_the_key(tmp_path, capsys):
    cfg = {k: v for k, v in RUN.items() if k != "alpha"}
    code = cli.main(["solve", "--config", _write_config(tmp_path, cfg),
                     "--out", str(tmp_path)])
    assert code == 2
    assert "'alpha'" in capsys.readouterr().err


def test_cli_converge_prints_and_writes_csv(tmp_path, capsys):
    cfg = {**STUDY, "levels": [1], "output": str(tmp_path / "study")}
    assert cli.main(["converge", "--config",
                     _write_config(tmp_path, cfg)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("level,n_panels,")
    written = open(tmp_path / "study" / "convergence.csv").read()
    assert written.splitlines()[0] == out.splitlines()[0]


def test_cli_kernels_prints_tensor(capsys):
    assert cli.main(["kernels", "--eval", "1.0,0.5,-0.25",
                     "--alpha", "2.0"]) == 0
    out = capsys.readouterr().out
    assert "velocity tensor" in out
    assert "pressure vector" in out
    assert len(out.strip().splitlines()) == 6


def test_cli_kernels_rejects_origin(capsys):
    assert cli.main(["kernels", "--eval", "0,0,0", "--alpha", "1.0"]) == 2
    assert "singular" in capsys.readouterr().err


def test_cli_kernels_rejects_malformed_point():
    with pytest.raises(SystemExit) as info:
        cli.main(["kernels", "--eval", "1,2", "--alpha", "1.0"])
    assert info.value.code == 2
