"""
End-to-end tests: one experiment config in, data files and manifest out.
"""
import json
import os

import pandas as pd
import pytest

from config import Config
from engines.orchestrator.orchestrator import ExperimentOrchestrator
from main import ExperimentConfig, load_config
from physics.errors import LatticeDomainError

SMALL_PAIR = {
    "schema_version": 1,
    "lattice": {"Nx": 9, "Ny": 9},
    "atoms": {"positions": [[3, 5], [7, 5]], "omega": 0.0, "lambda": 0.05},
    "run": {
        "dt": 0.01,
        "T": 2.0,
        "stride": 50,
        "initial_state": {"kind": "bell", "pair": [0, 1], "sign": 1},
        "snapshot_times": [1.0],
        "gamma0": 0.5,
    },
}


CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "..", "configs")


def make_config(document):
    return ExperimentConfig.model_validate(document)


def read_manifest(out_dir):
    with open(out_dir / "manifest.json", encoding="utf-8") as handle:
        return json.load(handle)


@pytest.fixture
def orchestrator():
    return ExperimentOrchestrator()


# ============== dispersion ==============

def test_dispersion_3x3(orchestrator, tmp_path):
    config = make_config({"lattice": {"Nx": 3, "Ny": 3}})
    result = orchestrator.run("dispersion", config, str(tmp_path))

    band = pd.read_csv(tmp_path / "band.csv")
    assert list(band.columns) == ["lx", "ly", "kx", "ky", "omega"]
    assert len(band) == 9
    assert list(band["lx"]) == [1, 1, 1, 2, 2, 2, 3, 3, 3]
    center = band[(band["lx"] == 2) & (band["ly"] == 2)]
    assert abs(float(center["omega"].iloc[0])) < 1e-12
    assert result.data["rows"] == 9

    manifest = read_manifest(tmp_path)
    assert manifest["outputs"] == [{"file": "band.csv", "rows": 9}]
    assert manifest["config"]["atoms"]["lambda"] == 0.05
    assert manifest["config"]["lattice"]["orientation"] == "Standard"


def test_dispersion_tilted_with_contour(orchestrator, tmp_path):
    config = make_config({"lattice": {"Nx": 49, "Ny": 29, "orientation": "Tilted"}, "run": {"contour": True}})
    orchestrator.run("dispersion", config, str(tmp_path))

    assert len(pd.read_csv(tmp_path / "band.csv")) == 49 * 29
    with open(tmp_path / "contour.json", encoding="utf-8") as handle:
        contour = json.load(handle)
    assert contour["points"]
    files = [entry["file"] for entry in read_manifest(tmp_path)["outputs"]]
    assert files == ["band.csv", "contour.json"]


def test_dispersion_is_byte_identical_across_runs(orchestrator, tmp_path):
    config = make_config({"lattice": {"Nx": 7, "Ny": 5, "Jtilde": 0.2}})
    orchestrator.run("dispersion", config, str(tmp_path / "a"))
    orchestrator.run("dispersion", config, str(tmp_path / "b"))
    assert (tmp_path / "a" / "band.csv").read_bytes() == (tmp_path / "b" / "band.csv").read_bytes()


# ============== xtalk-map ==============

def test_xtalk_map_square(orchestrator, tmp_path):
    config = make_config({
        "lattice": {"Nx": 49, "Ny": 49},
        "atoms": {"positions": [[25, 20], [25, 30], [40, 25]]},
    })
    orchestrator.run("xtalk-map", config, str(tmp_path))

    grid = pd.read_csv(tmp_path / "map.csv")
    assert list(grid.columns) == ["x", "y", "ratio"]
    assert len(grid) == 49 * 49
    source = grid[(grid["x"] == 25) & (grid["y"] == 20)]
    assert float(source["ratio"].iloc[0]) == pytest.approx(1.0, abs=1e-12)

    pairs = pd.read_csv(tmp_path / "pairs.csv")
    assert list(pairs.columns) == ["i", "j", "gamma", "ratio"]
    assert len(pairs) == 3


def test_xtalk_map_tilted_config_with_decoupled_atom(orchestrator, tmp_path):
    config = load_config(os.path.join(CONFIG_DIR, "xtalk_tilted_49x29.json"))
    orchestrator.run("xtalk-map", config, str(tmp_path))

    pairs = pd.read_csv(tmp_path / "pairs.csv")
    assert len(pairs) == 10
    first = pairs[(pairs["i"] == 0) & (pairs["j"] == 1)]
    assert float(first["ratio"].iloc[0]) == pytest.approx(1.0, abs=1e-12)
    assert pairs[pairs["i"] == 3]["ratio"].isna().all()
    assert pairs[pairs["i"] != 3]["ratio"].notna().all()

    grid = pd.read_csv(tmp_path / "map.csv").set_index(["x", "y"])["ratio"]
    assert grid[(19, 14)] == pytest.approx(1.0, abs=1e-12)
    assert grid[(24, 14)] == pytest.approx(0.0, abs=1e-12)
    assert grid[(15, 20)] == pytest.approx(0.0, abs=1e-12)

    files = [entry["file"] for entry in read_manifest(tmp_path)["outputs"]]
    assert files == ["map.csv", "pairs.csv"]


def test_xtalk_map_decoupled_source_exit_code(orchestrator, tmp_path):
    config = make_config({
        "lattice": {"Nx": 49, "Ny": 29, "orientation": "Tilted"},
        "run": {"atom1": [14, 14]},
    })
    assert orchestrator.execute("xtalk-map", config, str(tmp_path)) == 3


# ============== evolve ==============

def test_evolve_exact_writes_trajectory_and_field(orchestrator, tmp_path):
    orchestrator.run("evolve", make_config(SMALL_PAIR), str(tmp_path), engine="exact")

    traj = pd.read_csv(tmp_path / "traj.csv")
    assert list(traj.columns) == ["t", "pop_0", "pop_1", "conc_0_1", "lattice_population"]
    assert len(traj) == 5
    assert traj["conc_0_1"].iloc[0] == pytest.approx(1.0, abs=1e-12)

    field = pd.read_csv(tmp_path / "field_t1.csv")
    assert list(field.columns) == ["x", "y", "re", "im", "population"]
    assert len(field) == 81

    files = {entry["file"]: entry["rows"] for entry in read_manifest(tmp_path)["outputs"]}
    assert files == {"traj.csv": 5, "field_t1.csv": 81}


def test_evolve_master_engine(orchestrator, tmp_path):
    orchestrator.run("evolve", make_config(SMALL_PAIR), str(tmp_path), engine="master")
    traj = pd.read_csv(tmp_path / "traj.csv")
    totals = traj["pop_0"] + traj["pop_1"] + traj["lattice_population"]
    assert totals.max() == pytest.approx(1.0, abs=1e-10)
    assert totals.min() == pytest.approx(1.0, abs=1e-10)
    assert not (tmp_path / "field_t1.csv").exists()


def test_evolve_rejects_unknown_engine(orchestrator, tmp_path):
    with pytest.raises(LatticeDomainError):
        orchestrator.run("evolve", make_config(SMALL_PAIR), str(tmp_path), engine="semiclassical")


def test_evolve_bad_initial_atom_exit_code(orchestrator, tmp_path):
    document = dict(SMALL_PAIR, run={"initial_state": {"kind": "atom", "atom": 5}})
    assert orchestrator.execute("evolve", make_config(document), str(tmp_path)) == 2


# ============== dark ==============

def test_dark_diamond_candidates(orchestrator, tmp_path):
    config = make_config({
        "lattice": {"Nx": 49, "Ny": 49},
        "design": {
            "layout": "diamond",
            "center": [25, 25],
            "d": 5,
            "candidates": [[1.0, 1.0, 1.0, 1.0]],
        },
    })
    orchestrator.run("dark", config, str(tmp_path))

    with open(tmp_path / "darkbasis.json", encoding="utf-8") as handle:
        document = json.load(handle)
    assert document["n_atoms"] == 4
    assert document["positions"] == [[25, 20], [20, 25], [25, 30], [30, 25]]
    assert document["nullity"] >= 1
    assert len(document["vectors"]) == document["nullity"]
    candidate = document["candidates"][0]
    assert candidate["amps_re"] == pytest.approx([0.5, 0.5, 0.5, 0.5])
    assert abs(candidate["collective_rate"]) < 1e-10
    assert "certificate" not in candidate


def test_dark_needs_two_atoms(orchestrator, tmp_path):
    config = make_config({"lattice": {"Nx": 9, "Ny": 9}, "atoms": {"positions": [[3, 3]]}})
    assert orchestrator.execute("dark", config, str(tmp_path)) == 2


def test_dark_multiline_capacity_exit_code(orchestrator, tmp_path):
    config = make_config({
        "lattice": {"Nx": 49, "Ny": 29, "orientation": "Tilted"},
        "design": {"layout": "multiline", "rows": 15},
    })
    assert orchestrator.execute("dark", config, str(tmp_path)) == 2


def test_dark_multiline_block_diagonal(orchestrator, tmp_path):
    config = make_config({
        "lattice": {"Nx": 49, "Ny": 29, "orientation": "Tilted"},
        "design": {
            "layout": "multiline",
            "rows": 2,
            "row_positions": [14, 16],
            "bell_pairs": [[7, 9], [32, 34]],
            "bell_signs": [-1, -1],
        },
    })
    result = orchestrator.run("dark", config, str(tmp_path))
    assert result.data["block_diagonal"] is True

    with open(tmp_path / "darkbasis.json", encoding="utf-8") as handle:
        document = json.load(handle)
    assert document["n_atoms"] == 50
    assert abs(document["candidates"][0]["collective_rate"]) < 1e-10


def test_unknown_command(orchestrator, tmp_path):
    with pytest.raises(LatticeDomainError):
        orchestrator.run("plot", make_config({"lattice": {"Nx": 3, "Ny": 3}}), str(tmp_path))


def test_dark_uncoupled_pair_has_no_dark_vectors(orchestrator, tmp_path):
    config = make_config({
        "lattice": {"Nx": 49, "Ny": 49},
        "atoms": {"positions": [[25, 20], [40, 25]]},
    })
    result = orchestrator.run("dark", config, str(tmp_path))
    assert result.data["nullity"] == 0
    assert result.data["block_diagonal"] is None


def test_manifest_records_numerics(orchestrator, tmp_path):
    orchestrator.run("dispersion", make_config({"lattice": {"Nx": 3, "Ny": 3}}), str(tmp_path), tol=1e-8)
    numerics = read_manifest(tmp_path)["numerics"]
    assert numerics["dt"] == Config.DEFAULT_DT
    assert numerics["null_cutoff"] == Config.NULL_CUTOFF
    assert numerics["resonance_tol_used"] == 1e-8
