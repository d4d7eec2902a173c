"""Minimal reverse-mode automatic differentiation on numpy arrays."""

from . import functional
from .checkpoint import load as load_checkpoint
from .checkpoint import save as save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .nn import Module
from .optim import Adam
from .tensor import Tape, Tensor, as_tensor, backward, current_tape

__all__ = [
    "Adam", "GradCheckReport", "Module", "Tape", "Tensor", "as_tensor", "backward",
    "current_tape", "functional", "grad_check", "load_checkpoint", "save_checkpoint",
]
