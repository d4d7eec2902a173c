"""Fit bound splats to (mesh, camera, image) triplets with Adam."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.optim import Adam
from ..autodiff.tensor import Tape
from ..errors import ContractError
from ..geometry.mesh import TriMesh
from .camera import Camera
from .loss import SplatLossWeights, splat_loss
from .render import WHITE, render_params
from .splats import SplatParams, SplatSet

# per-parameter learning rates, relative to a base rate of 1
LEARNING_RATES = {"rotation": 1e-3, "offset": 1e-2, "log_scale": 5e-3, "opacity_logit": 5e-2, "sh": 2.5e-3}


@dataclass
class Triplet:
    mesh: TriMesh
    camera: Camera
    image: np.ndarray          # (H, W, 3) in [0, 1]


@dataclass
class FitResult:
    splats: SplatSet
    history: list[dict] = field(default_factory=list)


def optimize_splats(initial: SplatSet, triplets: Sequence[Triplet], steps: int, seed: int = 0,
                    weights: SplatLossWeights = SplatLossWeights(), lr_scale: float = 1.0,
                    background=WHITE, log_every: int = 0) -> FitResult:
    """Adam over rotation, offset, scale, opacity and SH, one random triplet per step."""
    if not triplets:
        raise ContractError("at least one (mesh, camera, image) triplet is required")
    params = SplatParams(initial)
    opt = Adam(params.parameters(), lr=lr_scale, lr_scale=LEARNING_RATES)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    result = FitResult(initial.copy())
    for step in range(steps):
        t = triplets[int(rng.integers(len(triplets)))]
        opt.zero_grad()
        with Tape() as tape:
            image = render_params(params, t.mesh, t.camera).composite(background)
            loss = splat_loss(image, t.image, params, weights)
        tape.backward(loss.total)
        opt.step()
        if log_every and (step % log_every == 0 or step == steps - 1):
            result.history.append({"step": step, "total": float(loss.total.data), "l1": loss.l1,
                                   "d_ssim": loss.d_ssim})
    if steps:
        result.splats = params.to_splats()
    return result
