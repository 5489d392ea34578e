"""Named parameter tensors with their optimizer state.

Every learnable tensor is addressable by a stable string path (documented in
docs/FORMATS.md along with the checkpoint layout). Initialization draws happen
in the declared spec order from a single seeded generator, so two stores built
from the same specs and seed are bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import GradTape, Tensor, truncated_normal


@dataclass(frozen=True)
class ParamSpec:
    """Declaration of one tensor: path, shape, and init rule."""

    path: str
    shape: tuple[int, ...]
    init: str = "normal"  # "normal" (truncated, config stddev) | "zeros" | "ones"
    weight_decay: bool = False  # participates in the L2 penalty


class ParamStore:
    """Parameter arrays plus Adam moments, keyed by path, in fixed order."""

    def __init__(self, specs: list[ParamSpec], tensors: dict[str, np.ndarray]):
        self.specs = list(specs)
        self.tensors = tensors
        self.adam_m = {s.path: np.zeros(s.shape) for s in specs}
        self.adam_v = {s.path: np.zeros(s.shape) for s in specs}
        self.step = 0

    @classmethod
    def initialize(cls, specs: list[ParamSpec], seed: int, stddev: float) -> "ParamStore":
        rng = np.random.default_rng(seed)
        tensors: dict[str, np.ndarray] = {}
        for spec in specs:
            if spec.init == "normal":
                tensors[spec.path] = truncated_normal(rng, spec.shape, stddev)
            elif spec.init == "zeros":
                tensors[spec.path] = np.zeros(spec.shape)
            elif spec.init == "ones":
                tensors[spec.path] = np.ones(spec.shape)
            else:
                raise ValueError(f"unknown init rule {spec.init!r} for {spec.path}")
        return cls(specs, tensors)

    def paths(self) -> list[str]:
        return [s.path for s in self.specs]

    def decayed_paths(self) -> list[str]:
        return [s.path for s in self.specs if s.weight_decay]

    def __getitem__(self, path: str) -> np.ndarray:
        return self.tensors[path]

    def leaves(self, tape: GradTape | None) -> dict[str, Tensor]:
        """Wrap every tensor as a leaf for one forward/backward pass."""
        return {path: Tensor(arr, tape) for path, arr in self.tensors.items()}

    def clone(self) -> "ParamStore":
        dup = ParamStore(self.specs, {k: v.copy() for k, v in self.tensors.items()})
        dup.adam_m = {k: v.copy() for k, v in self.adam_m.items()}
        dup.adam_v = {k: v.copy() for k, v in self.adam_v.items()}
        dup.step = self.step
        return dup
