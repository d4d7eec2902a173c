"""
EEG to face, end to end on a toy dataset
=========================================

Synthesise a small EEG/face dataset, train the position-map network for a
few dozen steps, score it, decode one holdout trial and render the result.
Everything runs through the command line entry point, so each step leaves
the same files a shell user would get.  Takes about a minute on one core.

    python demos/pipeline_demo.py [out_dir]
"""

import json
import sys
import tempfile
from pathlib import Path

from mindmesh.cli import main
from mindmesh.metrics import read_report_csv

# a network and dataset small enough for a laptop demo
TOY = {
    "synth": {"trials": 2, "holdout_trials": 1, "segments_per_trial": 3, "duration_per_segment": 1.0,
              "grid": [12, 12], "resolution": 32},
    "encoder": {"embed_dim": 8, "heads": 2, "layers": 1, "stem_channels": 8},
    "decoder": {"embed_dim": 8, "projection_widths": [32, 16], "latent_channels": 1, "latent_size": 4,
                "upsampler_stages": 1, "upsampler_channels": [], "transposed_hidden": 4},
    "train": {"epochs": 20, "max_steps": 60, "batch": 4, "lr": 0.001, "checkpoint_every": 30},
    "render": {"size": [96, 96]},
}

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="mindmesh_demo_"))
root.mkdir(parents=True, exist_ok=True)
cfg = root / "toy.json"
cfg.write_text(json.dumps(TOY, indent=1))
data, run = root / "data", root / "run"


def step(*argv):
    code = main([str(a) for a in argv])
    if code:
        sys.exit(f"{argv[0]} failed with exit code {code}")


# %% 1. synthetic recordings: EEG driven by the same latents that deform the face
step("synth", "--config", cfg, "--out", data)
manifest = json.loads((data / "manifest.json").read_text())
print("trials:", [(t["id"], t["role"]) for t in manifest["trials"]])

# %% 2. score the untrained network, train, score again
step("eval", "--config", cfg, "--data", data, "--out", root / "eval_init")
step("train", "--config", cfg, "--data", data, "--out", run)
step("eval", "--config", cfg, "--data", data, "--checkpoint", run / "final.mmck", "--out", root / "eval_trained")

before = read_report_csv(root / "eval_init" / "metrics.csv")
after = read_report_csv(root / "eval_trained" / "metrics.csv")
print(f"{'trial':<10} {'nMAE init':>10} {'nMAE trained':>13}")
for a, b in zip(before.rows, after.rows):
    print(f"{a.trial_id:<10} {a.nmae:10.4f} {b.nmae:13.4f}")

# %% 3. decode the holdout EEG into position maps, one per video frame
step("infer", "--config", cfg, "--checkpoint", run / "final.mmck", "--eeg", data / "holdout0" / "eeg.eegb",
     "--template", data / "template.obj", "--out", root / "decoded")
maps = sorted((root / "decoded").glob("*.pmap"))
print(f"decoded {len(maps)} frames")

# %% 4. render the first few decoded frames with splats bound to the template
frames = root / "frames"
frames.mkdir(exist_ok=True)
for pm in maps[:4]:
    (frames / pm.name).write_bytes(pm.read_bytes())
step("render", "--config", cfg, "--pmaps", frames, "--template", data / "template.obj", "--out", root / "png")
print("images in", root / "png")
