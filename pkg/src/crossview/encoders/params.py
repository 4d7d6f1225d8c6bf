"""Named parameter collections and their deterministic initialization."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..arraycore import Array


class ParamSet:
    """Ordered, uniquely named map of trainable arrays."""

    def __init__(self):
        self._tensors: dict[str, Array] = {}

    def add(self, name: str, value: np.ndarray) -> Array:
        if name in self._tensors:
            raise ValueError(f"parameter {name!r} already defined")
        arr = Array(value, requires_grad=True)
        self._tensors[name] = arr
        return arr

    def __getitem__(self, name: str) -> Array:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self) -> Iterator[tuple[str, Array]]:
        return iter(self._tensors.items())

    def view(self, prefix: str) -> dict[str, Array]:
        """Sub-map of parameters under ``prefix.``, keyed by the suffix."""
        p = prefix + "."
        out = {name[len(p):]: arr for name, arr in self._tensors.items() if name.startswith(p)}
        if not out:
            raise KeyError(f"no parameters under prefix {prefix!r}")
        return out

    def total_entries(self) -> int:
        return sum(a.size for a in self._tensors.values())

    def zero_grads(self):
        for a in self._tensors.values():
            a.grad = None

    def aliases(self, other: "ParamSet") -> bool:
        """True when any tensor object is shared between the two sets."""
        mine = {id(a) for a in self._tensors.values()}
        return any(id(a) in mine for a in other._tensors.values())


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02, dtype=np.float32) -> np.ndarray:
    """Normal(0, std) samples re-drawn until they land within two deviations."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while np.any(bad):
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out.astype(dtype)
