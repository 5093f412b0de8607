"""Named parameter collections, Adam updates, and global-norm clipping.

A ``ParamStore`` owns the trainable leaves of a model plus the per-parameter
Adam moments. Tensors are immutable, so an update replaces each named tensor
with a fresh one; any graph built before the update keeps referencing the old
values, and models must re-fetch parameters from the store every step.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor

__all__ = ["ParamStore", "AdamConfig", "MissingGradientError", "adam_step", "clip_by_global_norm"]


class MissingGradientError(RuntimeError):
    """An optimizer step was asked for a parameter that has no gradient."""


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class ParamStore:
    """Ordered name -> Tensor map with Adam moment state.

    Names are unique and shapes are fixed at ``add`` time; ``replace`` swaps
    in new values of the same shape. Iteration order is insertion order,
    which makes checkpoints and checksums deterministic.
    """

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, data) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True, op=f"param:{name}")
        self._tensors[name] = t
        self._m[name] = np.zeros(t.data.shape)
        self._v[name] = np.zeros(t.data.shape)
        return t

    def replace(self, name: str, data) -> Tensor:
        old = self._tensors[name]
        t = Tensor(data, requires_grad=True, op=f"param:{name}")
        if t.data.shape != old.data.shape:
            raise ValueError(f"shape of {name!r} is fixed at {old.data.shape}, got {t.data.shape}")
        self._tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def freeze(self) -> None:
        """Stop gradient accumulation into these parameters (still usable)."""
        for t in self._tensors.values():
            t.requires_grad = False

    def gradients(self) -> dict[str, np.ndarray]:
        grads = {}
        for name, t in self._tensors.items():
            if t.grad is None:
                raise MissingGradientError(f"no gradient for parameter {name!r}")
            grads[name] = t.grad
        return grads

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._tensors.items()}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._tensors) - set(arrays)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for name in self._tensors:
            self.replace(name, arrays[name])

    def checksum(self) -> str:
        """SHA-256 over names, shapes, and little-endian float64 payloads."""
        h = hashlib.sha256()
        for name, t in self._tensors.items():
            h.update(name.encode())
            h.update(str(t.data.shape).encode())
            h.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        return h.hexdigest()


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float):
    """Scale all gradients jointly so their global L2 norm is <= max_norm.

    Returns (clipped gradients, pre-clip norm). Gradients at or under the
    threshold pass through untouched.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = float(np.sqrt(total))
    if norm <= max_norm:
        return grads, norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


def adam_step(store: ParamStore, config: AdamConfig = AdamConfig(), grads: dict | None = None) -> ParamStore:
    """One Adam update over every parameter in the store.

    Gradients default to the ``.grad`` fields left by ``backward``; a
    parameter without one raises ``MissingGradientError`` naming it. Zero
    gradients leave parameters exactly unchanged (the bias-corrected moments
    stay zero). Returns the same store with tensors replaced.
    """
    if grads is None:
        grads = store.gradients()
    else:
        for name in store.names():
            if name not in grads:
                raise MissingGradientError(f"no gradient for parameter {name!r}")
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - config.beta1 ** t
    bc2 = 1.0 - config.beta2 ** t
    for name in store.names():
        g = grads[name]
        p = store[name]
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name!r} {p.data.shape}")
        m = store._m[name]
        v = store._v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        update = (config.lr / bc1) * m / (np.sqrt(v / bc2) + config.eps)
        store.replace(name, p.data - update)
    return store
