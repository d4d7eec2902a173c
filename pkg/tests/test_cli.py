"""Command line: every subcommand end to end on a tiny configuration, exit codes and help text."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mindmesh.cli import build_parser, main
from mindmesh.geometry import read_obj, read_pmap, write_obj
from mindmesh.geometry.kabsch import RigidTransform, random_rotation
from mindmesh.metrics import read_report_csv
from mindmesh.runconfig import RunConfig
from mindmesh.splat import read_png

TINY = {
    "synth": {"trials": 2, "holdout_trials": 1, "segments_per_trial": 3, "duration_per_segment": 1.0,
              "grid": [12, 12], "resolution": 32},
    "encoder": {"embed_dim": 8, "heads": 2, "layers": 1, "stem_channels": 8},
    "decoder": {"embed_dim": 8, "projection_widths": [32, 16], "latent_channels": 1, "latent_size": 4,
                "upsampler_stages": 1, "upsampler_channels": [], "transposed_hidden": 4},
    "train": {"epochs": 20, "max_steps": 40, "batch": 4, "lr": 0.001, "checkpoint_every": 20},
    "render": {"size": [32, 32]},
}
SUBCOMMANDS = ["synth", "preprocess", "train", "eval", "infer", "render", "gradcheck", "align"]


def run(*argv) -> int:
    return main([str(a) for a in argv])


def files(root: Path) -> dict[str, bytes]:
    """Every output file except the timestamped log."""
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "mindmesh.log"}


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    assert run("synth", "--config", cfg, "--out", root / "data") == 0
    assert run("train", "--config", cfg, "--data", root / "data", "--out", root / "run") == 0
    return root, cfg


def test_synth_writes_manifest_and_config_echo(work):
    root, _ = work
    data = root / "data"
    assert (data / "manifest.json").exists()
    echo = RunConfig.load(data / "run_config.json")
    assert echo == RunConfig.from_dict(TINY)
    # every default is spelled out in the echo
    raw = json.loads((data / "run_config.json").read_text())
    assert raw["train"]["beta2"] == 0.999 and raw["splat_loss"]["eps_scale"] == 0.6


def test_synth_is_idempotent(work, tmp_path):
    root, cfg = work
    assert run("synth", "--config", cfg, "--out", tmp_path / "again") == 0
    assert files(tmp_path / "again") == files(root / "data")


def test_preprocess_archive(work, tmp_path):
    from mindmesh.autodiff import load_checkpoint
    root, cfg = work
    assert run("preprocess", "--config", cfg, "--data", root / "data", "--out", tmp_path) == 0
    state = load_checkpoint(tmp_path / "windows.mmck")
    assert state["trial0.windows"].shape[1:] == (1, 16, 375)
    assert state["norm.mean"].shape == (16,)
    assert set(np.unique(state["trial0.segment"])) == {0, 1, 2}


def test_train_outputs_and_determinism(work, tmp_path):
    root, cfg = work
    run_dir = root / "run"
    assert {"loss.csv", "final.mmck", "checkpoint_000020.mmck", "checkpoint_000040.mmck",
            "run_config.json"} <= {p.name for p in run_dir.iterdir()}
    assert len((run_dir / "loss.csv").read_text().splitlines()) == 41
    assert run("train", "--config", cfg, "--data", root / "data", "--out", tmp_path) == 0
    assert files(tmp_path) == files(run_dir)


def test_eval_trained_beats_untrained(work, tmp_path):
    root, cfg = work
    assert run("eval", "--config", cfg, "--data", root / "data", "--out", tmp_path / "init") == 0
    assert run("eval", "--config", cfg, "--data", root / "data", "--checkpoint", root / "run" / "final.mmck",
               "--out", tmp_path / "trained") == 0
    init = read_report_csv(tmp_path / "init" / "metrics.csv")
    trained = read_report_csv(tmp_path / "trained" / "metrics.csv")
    assert len(trained.rows) == 3
    for a, b in zip(init.rows, trained.rows):
        assert a.trial_id == b.trial_id
        assert 0 < b.nmae < a.nmae


def test_infer_then_render(work, tmp_path):
    root, cfg = work
    data = root / "data"
    assert run("infer", "--config", cfg, "--checkpoint", root / "run" / "final.mmck", "--eeg",
               data / "holdout0" / "eeg.eegb", "--template", data / "template.obj", "--out", tmp_path / "maps") == 0
    maps = sorted((tmp_path / "maps").glob("*.pmap"))
    assert len(maps) > 80
    pm = read_pmap(maps[0])
    assert pm.data.shape == (32, 32, 3) and pm.mask.any()

    truth = tmp_path / "truth"
    truth.mkdir()
    for name in ("frame_00000.pmap", "frame_00001.pmap"):
        (truth / name).write_bytes((data / "trial0" / name).read_bytes())
    assert run("render", "--config", cfg, "--pmaps", truth, "--template", data / "template.obj",
               "--out", tmp_path / "png") == 0
    img = read_png(tmp_path / "png" / "frame_00000.png")
    assert img.shape == (32, 32, 3)
    # face in the centre, white background in the corner
    assert img[16, 16].mean() < 0.9 and np.allclose(img[0, 0], 1.0)


def test_align_recovers_rigid_motion(tmp_path):
    rng = np.random.default_rng(0)
    from mindmesh.geometry import grid_mesh
    mesh = grid_mesh(5, 5)
    base = mesh.with_vertices(mesh.vertices.astype(np.float64) + rng.normal(scale=0.05, size=(25, 3)))
    src = tmp_path / "seq"
    src.mkdir()
    write_obj(src / "f0.obj", base)
    for k in range(1, 4):
        motion = RigidTransform(random_rotation(rng), rng.normal(size=3))
        write_obj(src / f"f{k}.obj", base.with_vertices(motion.apply(base.vertices)))
    assert run("align", "--objs", src, "--out", tmp_path / "out") == 0
    transforms = json.loads((tmp_path / "out" / "transforms.json").read_text())
    assert len(transforms) == 4
    assert max(t["rms"] for t in transforms) < 1e-4   # OBJ text keeps limited digits
    aligned = read_obj(tmp_path / "out" / "f3.obj")
    np.testing.assert_allclose(aligned.vertices, base.vertices, atol=1e-4)


def test_gradcheck_command(tmp_path, capsys):
    assert run("gradcheck", "--seeds", 1, "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "max rel err" in out and "end_to_end_shrunk" in out
    assert (tmp_path / "gradcheck.txt").read_text().strip() == out.strip()


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"bogus": 1}')
    assert run("synth", "--config", bad, "--out", tmp_path / "x") == 2
    bad.write_text("{not json")
    assert run("synth", "--config", bad, "--out", tmp_path / "x") == 2
    bad.write_text('{"encoder": {"embed_dim": 12, "heads": 5}}')
    assert run("synth", "--config", bad, "--out", tmp_path / "x") == 2


def test_data_errors_exit_3(tmp_path):
    assert run("eval", "--data", tmp_path / "missing", "--out", tmp_path / "x") == 3
    (tmp_path / "empty").mkdir()
    assert run("render", "--pmaps", tmp_path / "empty", "--template", tmp_path / "none.obj",
               "--out", tmp_path / "y") == 3


def test_checkpoint_mismatch_is_data_error(work, tmp_path):
    root, _ = work
    # default-sized network against the tiny checkpoint
    assert run("eval", "--data", root / "data", "--checkpoint", root / "run" / "final.mmck",
               "--out", tmp_path) == 3


def test_unknown_flag_exits_2_with_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        run("train", "--bogus")
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_thread_limit_env(monkeypatch, tmp_path):
    monkeypatch.setenv("MINDMESH_THREADS", "zero")
    assert run("gradcheck", "--seeds", 1, "--layers-only") == 2
    monkeypatch.setenv("MINDMESH_THREADS", "1")
    assert run("gradcheck", "--seeds", 1, "--layers-only") == 0


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help_documents_every_flag_default(name):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices[name]
    text = sub.format_help()
    for action in sub._actions:
        if action.dest == "help":
            continue
        assert action.option_strings[0] in text
        assert action.help and "%(default)s" not in action.help
    assert text.count("(default:") == len([a for a in sub._actions if a.dest != "help"])


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mindmesh.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in SUBCOMMANDS:
        assert name in res.stdout
