"""Gaussian kernel pooling of translation matrices into soft-TF features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .interaction import TranslationMatrix

EPS_LOG = 1e-10


@dataclass(frozen=True)
class KernelBank:
    mus: tuple[float, ...]
    deltas: tuple[float, ...]

    def __post_init__(self):
        if len(self.mus) < 1 or len(self.mus) != len(self.deltas):
            raise ValueError("kernel bank needs K >= 1 matching (mu, delta) pairs")
        if any(d <= 0 for d in self.deltas):
            raise ValueError("kernel widths must be positive")
        if sum(1 for m in self.mus if m == 1.0) != 1:
            raise ValueError("exactly one exact-match kernel (mu = 1.0) required")

    @property
    def size(self) -> int:
        return len(self.mus)

    @property
    def exact_index(self) -> int:
        return self.mus.index(1.0)

    def mu_array(self) -> np.ndarray:
        return np.asarray(self.mus, dtype=np.float64)

    def delta_array(self) -> np.ndarray:
        return np.asarray(self.deltas, dtype=np.float64)


def default_bank(k: int = 11) -> KernelBank:
    """One exact-match kernel (mu=1, delta=0.001) plus K-1 soft kernels of
    width 0.1 on an even grid over [-1, 1]."""
    if k < 1:
        raise ValueError("K must be >= 1")
    mus = [1.0]
    deltas = [0.001]
    for i in range(1, k):
        mus.append(1.0 - (2.0 * i - 1.0) / (k - 1))
        deltas.append(0.1)
    return KernelBank(mus=tuple(mus), deltas=tuple(deltas))


def kernel_pool(matrix: TranslationMatrix, bank: KernelBank) -> Tensor:
    """K-vector of log-summed per-row soft-TF counts for one matrix."""
    return ad.kernel_pool_op(
        matrix.scores, matrix.valid, bank.mu_array(), bank.delta_array(), EPS_LOG
    )


@dataclass
class FeatureVector:
    values: Tensor  # (#matrices * K,)
    layout: list[tuple[str, int]] = field(default_factory=list)  # (matrix kind, kernel index)


def feature_layout(kinds: list[str], k: int) -> list[tuple[str, int]]:
    return [(kind, ki) for kind in kinds for ki in range(k)]


def build_phi(
    matrices: list[TranslationMatrix],
    bank: KernelBank,
    expected_kinds: list[str],
) -> FeatureVector:
    """Concatenate kernel features in the model's frozen layout order."""
    got = [m.kind for m in matrices]
    if got != expected_kinds:
        raise ValueError(f"matrix layout mismatch: expected {expected_kinds}, got {got}")
    values = ad.concat1d([kernel_pool(m, bank) for m in matrices])
    return FeatureVector(values=values, layout=feature_layout(got, bank.size))
