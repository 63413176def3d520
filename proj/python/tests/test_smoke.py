import json
import math

import numpy as np
import pytest

import gdl


def test_icosphere_topology():
    mesh = gdl.icosphere(2)
    assert mesh.vertex_count == 162
    assert mesh.face_count == 320
    assert mesh.euler_characteristic() == 2
    assert mesh.is_closed()
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0)


def test_mesh_from_arrays_and_decimate():
    sphere = gdl.icosphere(3)
    ct = list(np.linspace(1.0, 3.0, sphere.vertex_count))
    mesh = gdl.Mesh(sphere.vertices, sphere.faces, {"ct": ct})
    assert mesh.channels["ct"][0] == pytest.approx(1.0)
    small = mesh.decimate(100)
    assert small.vertex_count == 100
    assert small.euler_characteristic() == 2
    assert math.isclose(sum(sphere.vertex_areas()), 4 * math.pi, rel_tol=0.02)


def test_invalid_mesh_raises():
    with pytest.raises(gdl.GdlError):
        gdl.Mesh(np.zeros((3, 3)), np.array([[0, 1, 7]]))
    with pytest.raises(ValueError):
        gdl.Mesh(np.zeros((3, 2)), np.array([[0, 1, 2]]))


def test_gradcheck_suite():
    rows = gdl.gradcheck()
    assert rows and all(r["pass"] and r["max_rel_error"] < 1e-4 for r in rows)
    control = [r for r in gdl.gradcheck(negative_control=True) if not r["pass"]]
    assert len(control) == 1


def test_cli_train_and_model_roundtrip(tmp_path):
    code, out, err = gdl.run_cli(["synth", "--count", "6", "--seed", "3", "--level", "1", "--out", str(tmp_path / "c")])
    assert code == 0, err
    manifest = str(tmp_path / "c" / "manifest.csv")
    ckpt = str(tmp_path / "g.gdlm")
    code, out, err = gdl.run_cli(
        ["train", "--arch", "gcn", "--features", "ct,curv,sd", "--manifest", manifest, "--seed", "1",
         "--epochs", "2", "--profile", "small", "--out", ckpt]
    )
    assert code == 0, err
    log = [json.loads(line) for line in open(ckpt + ".log.jsonl")]
    assert [r["epoch"] for r in log] == [1, 2]

    model = gdl.Model(ckpt)
    assert model.architecture == "gcn"
    assert model.channels == ["ct", "curv", "sd"]
    assert model.parameter_count > 0
    assert gdl.config_of(model)["hidden"] == [64, 64]

    report = model.evaluate(manifest, "test")
    meshes = [gdl.load_mesh(tmp_path / "c" / f"{r['subject_id']}_{r['scan_id']}.off",
                            tmp_path / "c" / f"{r['subject_id']}_{r['scan_id']}.csv") for r in report["rows"]]
    preds = model.predict(meshes)
    assert preds == pytest.approx([r["prediction"] for r in report["rows"]], abs=1e-12)
    assert report["mae"] == pytest.approx(np.mean([r["abs_error"] for r in report["rows"]]))


def test_cli_usage_error_code():
    code, _, err = gdl.run_cli(["train", "--arch", "nope"])
    assert code == 2
    assert "arch" in err


def test_bad_checkpoint(tmp_path):
    bad = tmp_path / "bad.gdlm"
    bad.write_bytes(b"XXXX0000")
    with pytest.raises(gdl.CheckpointError):
        gdl.Model(bad)
