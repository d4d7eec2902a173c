"""Central finite-difference gradient checking."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .tensor import Tape, Tensor


@dataclass
class GradCheckReport:
    """Per-tensor maximum relative error between analytic and numeric gradients.

    The relative error of a tensor is ``max|a - n| / max(max|a|, max|n|)``
    over the checked entries.  A tensor whose analytic and numeric gradients
    both stay below ``zero_tol`` times the largest gradient in the check has
    a structurally zero gradient (attention key biases, biases feeding a
    training-mode batch norm).  Its ratio would only measure rounding noise,
    so it is listed in ``zero`` with its scaled magnitude instead.
    """

    errors: dict[str, float] = field(default_factory=dict)
    checked: dict[str, int] = field(default_factory=dict)
    zero: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.errors.values())

    def __str__(self):
        width = max((len(n) for n in self.errors), default=4)
        lines = [f"{'tensor':<{width}}  entries  rel_err     status"]
        for name, err in self.errors.items():
            status = "ok" if err <= self.tol else "FAIL"
            lines.append(f"{name:<{width}}  {self.checked[name]:7d}  {err:.3e}  {status}")
        for name, mag in self.zero.items():
            lines.append(f"{name:<{width}}  {self.checked[name]:7d}  zero gradient (|g| {mag:.1e} of scale)")
        lines.append(f"max rel err {self.max_error:.3e} (tol {self.tol:.1e}): "
                     f"{'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def numeric_gradient(f: Callable[[], Tensor], tensor: Tensor, indices, eps: float = 1e-5) -> np.ndarray:
    out = np.empty(len(indices), dtype=np.float64)
    flat = tensor.data.reshape(-1)
    for k, i in enumerate(indices):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f().data)
        flat[i] = orig - eps
        fm = float(f().data)
        flat[i] = orig
        out[k] = (fp - fm) / (2 * eps)
    return out


def grad_check(f: Callable[[], Tensor], tensors: dict[str, Tensor] | Tensor, tol: float = 1e-4,
               eps: float = 1e-5, max_entries: int | None = None,
               rng: np.random.Generator | None = None, zero_tol: float = 1e-8) -> GradCheckReport:
    """Compare tape gradients of the scalar ``f()`` against central differences.

    ``f`` must be deterministic (dropout off) and the checked tensors should
    be float64.  With ``max_entries`` set, large tensors are checked on a
    random subset of entries drawn from ``rng``.
    """
    if isinstance(tensors, Tensor):
        tensors = {"input": tensors}
    for name, t in tensors.items():
        if not t.requires_grad:
            raise ContractError(f"{name} does not require grad")
        if t.dtype != np.float64:
            raise ContractError(f"{name} must be float64 for finite differences, got {t.dtype}")
        t.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    analytic = {n: t.grad.copy() for n, t in tensors.items()}

    rng = rng if rng is not None else np.random.default_rng(0)
    report = GradCheckReport(tol=tol)
    pairs = {}
    for name, t in tensors.items():
        if max_entries is not None and t.size > max_entries:
            idx = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        else:
            idx = np.arange(t.size)
        pairs[name] = (analytic[name].reshape(-1)[idx], numeric_gradient(f, t, idx, eps))
        report.checked[name] = len(idx)
    scale = max((np.abs(n).max(initial=0.0) for _, n in pairs.values()), default=0.0)
    for name, (ana, num) in pairs.items():
        mag = max(np.abs(ana).max(initial=0.0), np.abs(num).max(initial=0.0))
        if mag <= zero_tol * scale:
            report.zero[name] = float(mag / scale) if scale > 0 else 0.0
            continue
        report.errors[name] = float(np.abs(ana - num).max(initial=0.0) / mag)
    return report
