"""Central-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Tensor
from .params import ParamStore
from .seeds import rng


@dataclass
class ParamCheck:
    name: str
    n_checked: int
    max_rel_error: float
    passed: bool


@dataclass
class GradCheckReport:
    tolerance: float
    step: float
    params: list[ParamCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.params)

    @property
    def max_rel_error(self) -> float:
        return max((p.max_rel_error for p in self.params), default=0.0)

    def lines(self) -> list[str]:
        return [
            f"{p.name}: max_rel_err={p.max_rel_error:.3e} ({p.n_checked} components) "
            f"{'ok' if p.passed else 'FAIL'}"
            for p in self.params
        ]


def grad_check(
    loss_fn: Callable[[ParamStore], Tensor],
    store: ParamStore,
    step: float = 1e-4,
    tolerance: float = 1e-4,
    max_components: int = 100,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients with (f(x+h) - f(x-h)) / 2h per component.

    For tensors larger than ``max_components`` a seeded sample of at least
    ``max_components`` components is checked. Relative error uses the
    denominator max(|analytic|, |numeric|, 1e-8).
    """
    store.zero_grads()
    loss_fn(store).backward()
    analytic = {n: store.grad(n).copy() for n in store.names()}
    store.zero_grads()

    report = GradCheckReport(tolerance=tolerance, step=step)
    sampler = rng(seed, "gradcheck-sample")
    for name in store.names():
        value = store.value(name)
        flat = value.reshape(-1)
        size = flat.shape[0]
        if size <= max_components:
            indices = np.arange(size)
        else:
            indices = np.sort(sampler.choice(size, size=max_components, replace=False))
        worst = 0.0
        for idx in indices:
            orig = flat[idx]
            flat[idx] = orig + step
            f_plus = float(loss_fn(store).value)
            flat[idx] = orig - step
            f_minus = float(loss_fn(store).value)
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = analytic[name].reshape(-1)[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
        report.params.append(
            ParamCheck(name=name, n_checked=len(indices), max_rel_error=worst, passed=worst < tolerance)
        )
    return report
