"""Named parameter storage, the Adam update, and binary checkpoints."""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, leaf
from .seeds import rng

CHECKPOINT_MAGIC = b"EDRMCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.001
    epsilon: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    patience: int = 5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("moment decay rates must lie in (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


class ParamStore:
    """name -> (value, gradient, Adam moments, step count), lexicographic order."""

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._steps: dict[str, int] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._values:
            raise ValueError(f"duplicate parameter name: {name}")
        value = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise ValueError(f"non-finite values in parameter {name}")
        self._values[name] = value
        self._grads[name] = np.zeros_like(value)
        self._m[name] = np.zeros_like(value)
        self._v[name] = np.zeros_like(value)
        self._steps[name] = 0

    def names(self) -> list[str]:
        return sorted(self._values)

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def value(self, name: str) -> np.ndarray:
        return self._values[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def step_count(self, name: str) -> int:
        return self._steps[name]

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g[...] = 0.0

    def leaves(self) -> dict[str, Tensor]:
        """Graph leaves whose gradients accumulate into this store."""
        return {n: leaf(self._values[n], grad_buffer=self._grads[n]) for n in self.names()}

    def copy_values(self) -> dict[str, np.ndarray]:
        return {n: v.copy() for n, v in self._values.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for n, v in values.items():
            if n not in self._values:
                raise KeyError(f"unknown parameter: {n}")
            if v.shape != self._values[n].shape:
                raise ValueError(f"shape mismatch for {n}")
            self._values[n][...] = v


def adam_step(store: ParamStore, config: OptimizerConfig) -> None:
    """Bias-corrected adaptive-moment update; zeroes gradients afterward."""
    for name in store.names():
        g = store._grads[name]
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name}")
        m = store._m[name]
        v = store._v[name]
        store._steps[name] += 1
        t = store._steps[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        store._values[name] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        g[...] = 0.0


# ---------------------------------------------------------------------------
# initialization


def init_uniform(store: ParamStore, name: str, shape: tuple[int, ...], seed: int, half_width: float = 0.05) -> None:
    """Embedding-table init ~ uniform(-half_width, half_width), own stream."""
    r = rng(seed, f"init:{name}")
    store.add(name, r.uniform(-half_width, half_width, size=shape))


def init_xavier(store: ParamStore, name: str, shape: tuple[int, ...], seed: int) -> None:
    """Xavier-uniform for weight matrices / 1-D combination layers."""
    r = rng(seed, f"init:{name}")
    if len(shape) == 1:
        fan_in, fan_out = shape[0], 1
    else:
        fan_in, fan_out = shape[1], shape[0]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    store.add(name, r.uniform(-limit, limit, size=shape))


def init_zeros(store: ParamStore, name: str, shape: tuple[int, ...]) -> None:
    store.add(name, np.zeros(shape))


# ---------------------------------------------------------------------------
# checkpoints: magic, version, JSON header, then per-parameter records of
# name, shape and little-endian float64 payload. Round trips bit-exactly.


def save_checkpoint(path, store: ParamStore, header: dict) -> None:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<Q", len(header_bytes)))
    buf.write(header_bytes)
    names = store.names()
    buf.write(struct.pack("<Q", len(names)))
    for name in names:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        value = store.value(name)
        buf.write(struct.pack("<B", value.ndim))
        for dim in value.shape:
            buf.write(struct.pack("<Q", dim))
        buf.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.read()
    buf = io.BytesIO(raw)
    if buf.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<Q", buf.read(8))
    header = json.loads(buf.read(hlen).decode("utf-8"))
    (count,) = struct.unpack("<Q", buf.read(8))
    values: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", buf.read(2))
        name = buf.read(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", buf.read(1))
        shape = tuple(struct.unpack("<Q", buf.read(8))[0] for _ in range(ndim))
        n_items = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(buf.read(8 * n_items), dtype="<f8").astype(np.float64)
        value = data.reshape(shape)
        if not np.all(np.isfinite(value)):
            raise ValueError(f"{path}: non-finite values in parameter {name}")
        values[name] = value
    return header, values
