"""Random-feature shallow network: phi_j(x) = sigma(<w_j, x> + b_j).

Hidden parameters are drawn once from a seeded Philox generator and then
frozen; only the output coefficients are ever solved for.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidConfig

ACTIVATIONS = ("cosine", "tanh")


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling law for the hidden parameters.

    ``gaussian_cosine``: w ~ N(0, 2 gamma I), b ~ U[-pi, pi], cosine activation.
    ``uniform_tanh``: w, b ~ U[-R, R], tanh activation.
    """

    law: str
    scale: float
    seed: int = 0

    def __post_init__(self):
        if self.law not in ("gaussian_cosine", "uniform_tanh"):
            raise InvalidConfig(f"unknown sampling law {self.law!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidConfig("sampling scale must be positive")

    @property
    def activation(self) -> str:
        return "cosine" if self.law == "gaussian_cosine" else "tanh"

    @classmethod
    def cosine(cls, gamma: float, seed: int = 0) -> "SamplerConfig":
        return cls("gaussian_cosine", gamma, seed)

    @classmethod
    def tanh(cls, range_: float, seed: int = 0) -> "SamplerConfig":
        return cls("uniform_tanh", range_, seed)


@dataclass(frozen=True)
class FeatureBasis:
    activation: str
    weights: np.ndarray  # (M, d)
    biases: np.ndarray  # (M,)
    seed: int | None = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise InvalidConfig(f"unknown activation {self.activation!r}")
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        b = np.asarray(self.biases, dtype=float).reshape(-1)
        if w.shape[0] != b.shape[0] or w.shape[0] < 1:
            raise InvalidConfig("need as many biases as weight vectors, at least one")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InvalidConfig("hidden parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def M(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def _pre(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"points have dimension {x.shape[-1]}, basis expects {self.dim}")
        return x @ self.weights.T + self.biases

    def _sigma(self, z):
        return np.cos(z) if self.activation == "cosine" else np.tanh(z)

    def _dsigma(self, z):
        if self.activation == "cosine":
            return -np.sin(z)
        t = np.tanh(z)
        return 1.0 - t * t

    def eval(self, x):
        """Feature values, shape (..., M)."""
        return self._sigma(self._pre(x))

    def eval_normal_derivative(self, x, n):
        """sigma'(<w_j, x> + b_j) <w_j, n>, shape (..., M)."""
        n = np.asarray(n, dtype=float)
        if n.shape[-1] != self.dim:
            raise DimensionMismatch("normal has the wrong dimension")
        return self._dsigma(self._pre(x)) * (n @ self.weights.T)

    def eval_gradient(self, x):
        """Gradients of every feature, shape (..., M, d)."""
        return self._dsigma(self._pre(x))[..., None] * self.weights

    def combine(self, coefficients, x):
        """u_M(x) = sum_j beta_j phi_j(x)."""
        return self.eval(x) @ np.asarray(coefficients)

    # the trace interface shared with piecewise-constant BEM bases
    def trace(self, points, normals, element=None):
        return self.eval(points), self.eval_normal_derivative(points, normals)

    def surface_gradient(self, points, element=None):
        return self.eval_gradient(points)

    def to_text(self) -> str:
        seed = -1 if self.seed is None else self.seed
        lines = [f"{self.activation} {self.M} {self.dim} {seed}"]
        for w, b in zip(self.weights, self.biases):
            lines.append(" ".join(repr(float(v)) for v in (*w, b)))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "FeatureBasis":
        rows = [ln.split() for ln in text.strip().splitlines()]
        activation, M, d, seed = rows[0][0], int(rows[0][1]), int(rows[0][2]), int(rows[0][3])
        data = np.array(rows[1:], dtype=float)
        if data.shape != (M, d + 1):
            raise InvalidConfig(f"expected {M} rows of {d + 1} numbers, got {data.shape}")
        return cls(activation, data[:, :d], data[:, d], None if seed < 0 else seed)

    @classmethod
    def load(cls, path) -> "FeatureBasis":
        return cls.from_text(Path(path).read_text())


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by the 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def sample_basis(config: SamplerConfig, M: int, d: int) -> FeatureBasis:
    if M < 1:
        raise InvalidConfig("need at least one feature")
    if d not in (2, 3):
        raise InvalidConfig("dimension must be 2 or 3")
    rng = make_rng(config.seed)
    if config.law == "gaussian_cosine":
        weights = rng.normal(0.0, np.sqrt(2.0 * config.scale), size=(M, d))
        biases = rng.uniform(-np.pi, np.pi, size=M)
    else:
        weights = rng.uniform(-config.scale, config.scale, size=(M, d))
        biases = rng.uniform(-config.scale, config.scale, size=M)
    return FeatureBasis(config.activation, weights, biases, config.seed)
