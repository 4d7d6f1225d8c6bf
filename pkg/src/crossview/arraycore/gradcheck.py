"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .engine import Array, Tape, backward


def default_step(dtype) -> float:
    """Probe step matched to the dtype's noise floor."""
    return 1e-3 if np.dtype(dtype) == np.float32 else 1e-5


def grad_check(
    op_closure: Callable[[Sequence[Array]], Array],
    inputs: Sequence[np.ndarray],
    step: float | None = None,
) -> float:
    """Compare analytic gradients of a scalar closure against central differences.

    Returns the max over all input entries of
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.
    """
    inputs = [np.asarray(x) for x in inputs]
    if step is None:
        step = default_step(inputs[0].dtype)

    leaves = [Array(x, requires_grad=True) for x in inputs]
    with Tape() as tape:
        out = op_closure(leaves)
    if out.size != 1:
        raise ValueError(f"grad_check: closure output must be scalar, got shape {out.shape}")
    tape.root = out.nid
    grad_map = backward(tape, np.ones_like(out.data))
    analytic = [grad_map[leaf] for leaf in leaves]

    def eval_at(vals) -> float:
        arrs = [Array(v) for v in vals]
        return float(op_closure(arrs).data)

    worst = 0.0
    for idx, x in enumerate(inputs):
        flat = x.reshape(-1)
        a_flat = analytic[idx].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            f_plus = eval_at(inputs)
            flat[j] = orig - step
            f_minus = eval_at(inputs)
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = float(a_flat[j])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst
