"""L-Lipschitz generative prior: a ReLU MLP on a latent l2-ball.

The generator maps z in B_2^k(r) to R^n through affine layers with ReLU on
every hidden layer and a linear output layer. Forward, hand-rolled
backpropagation, latent-ball projection, a spectral-norm Lipschitz upper
bound, seeded random construction, and a lossless text weights format are
provided. Generators are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .streams import STREAM_A_MATRIX, counter_rng, gaussians

WEIGHTS_MAGIC = "nlgcs-weights v1"


class WeightsParseError(ValueError):
    """Raised when a weights file is malformed; message carries the line."""


@dataclass(frozen=True)
class MlpGenerator:
    """ReLU MLP generator with layer_dims [k, h1, ..., n]."""

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    latent_radius: float

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError("layer_dims needs at least two positive entries")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("one weight matrix and bias per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i} shape mismatch with dims {dims}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite parameters")
        if self.latent_radius <= 0:
            raise ValueError("latent_radius must be positive")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def latent_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]


def forward(gen: MlpGenerator, z: np.ndarray) -> np.ndarray:
    """G(z); z may be (k,) or a batch (B, k)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != gen.latent_dim:
        raise ValueError(f"latent dim {z.shape[-1]} != {gen.latent_dim}")
    h = z
    last = len(gen.weights) - 1
    for i, (w, b) in enumerate(zip(gen.weights, gen.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def backward(gen: MlpGenerator, z: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
    """J(z)^T cotangent where J is the Jacobian of G at z.

    ReLU subgradient at exactly 0 is taken as 0. Supports the same batch
    shapes as forward.
    """
    z = np.asarray(z, dtype=float)
    cot = np.asarray(cotangent, dtype=float)
    if z.shape[-1] != gen.latent_dim:
        raise ValueError(f"latent dim {z.shape[-1]} != {gen.latent_dim}")
    if cot.shape[-1] != gen.output_dim:
        raise ValueError(f"cotangent dim {cot.shape[-1]} != {gen.output_dim}")
    # Forward pass keeping hidden preactivations for the ReLU masks.
    preacts = []
    h = z
    last = len(gen.weights) - 1
    for i, (w, b) in enumerate(zip(gen.weights, gen.biases)):
        h = h @ w.T + b
        if i < last:
            preacts.append(h)
            h = np.maximum(h, 0.0)
    g = cot
    for i in range(last, -1, -1):
        if i < last:
            g = g * (preacts[i] > 0.0)
        g = g @ gen.weights[i]
    return g


def project_latent(z: np.ndarray, r: float) -> np.ndarray:
    """Euclidean projection onto the l2-ball of radius r (batch-aware)."""
    if r <= 0:
        raise ValueError("r must be positive")
    z = np.asarray(z, dtype=float)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    scale = np.where(norms > r, r / np.maximum(norms, 1e-300), 1.0)
    return z * scale


def spectral_norm(mat: np.ndarray, iters: int = 100, rtol: float = 1e-8) -> float:
    """Largest singular value by power iteration on mat^T mat."""
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0 or not np.any(mat):
        return 0.0
    rng = counter_rng(mat.shape[0] * 1_000_003 + mat.shape[1], STREAM_A_MATRIX)
    v = gaussians(rng, mat.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = mat.T @ (mat @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        prev, sigma = sigma, float(np.linalg.norm(mat @ v))
        if prev > 0 and abs(sigma - prev) <= rtol * sigma:
            break
    return sigma


def lipschitz_upper_bound(gen: MlpGenerator) -> float:
    """Product of per-layer spectral norms; valid since ReLU is 1-Lipschitz."""
    out = 1.0
    for w in gen.weights:
        out *= spectral_norm(w)
    return out


def random_generator(layer_dims, latent_radius: float | None = None, seed: int = 0) -> MlpGenerator:
    """Seeded He-initialized generator: W ~ N(0, 2/fan_in), zero biases.

    latent_radius defaults to sqrt(k), the typical norm of a standard
    normal latent.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    if latent_radius is None:
        latent_radius = float(np.sqrt(dims[0]))
    rng = counter_rng(seed, STREAM_A_MATRIX)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = gaussians(rng, (fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MlpGenerator(dims, tuple(weights), tuple(biases), latent_radius)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_weights(gen: MlpGenerator, path) -> None:
    """Write the text weights file (17 significant digits, lossless)."""
    lines = [WEIGHTS_MAGIC,
             "dims: " + " ".join(str(d) for d in gen.layer_dims),
             "radius: " + _fmt(gen.latent_radius)]
    for w, b in zip(gen.weights, gen.biases):
        lines.append("W")
        for row in w:
            lines.append(" ".join(_fmt(x) for x in row))
        lines.append("b")
        lines.append(" ".join(_fmt(x) for x in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_floats(text: str, count: int, lineno: int) -> np.ndarray:
    parts = text.split()
    if len(parts) != count:
        raise WeightsParseError(f"line {lineno}: expected {count} floats, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise WeightsParseError(f"line {lineno}: {exc}") from exc


def load_weights(path) -> MlpGenerator:
    """Read a weights file written by save_weights."""
    with open(path) as fh:
        lines = fh.read().splitlines()

    def take(i: int) -> str:
        if i >= len(lines):
            raise WeightsParseError(f"line {i + 1}: unexpected end of file")
        return lines[i]

    if take(0).strip() != WEIGHTS_MAGIC:
        raise WeightsParseError(f"line 1: bad header, expected {WEIGHTS_MAGIC!r}")
    dims_line = take(1).strip()
    if not dims_line.startswith("dims:"):
        raise WeightsParseError("line 2: expected 'dims:'")
    try:
        dims = tuple(int(p) for p in dims_line[len("dims:"):].split())
    except ValueError as exc:
        raise WeightsParseError(f"line 2: {exc}") from exc
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise WeightsParseError("line 2: dims needs at least two positive entries")
    radius_line = take(2).strip()
    if not radius_line.startswith("radius:"):
        raise WeightsParseError("line 3: expected 'radius:'")
    radius = _parse_floats(radius_line[len("radius:"):], 1, 3)[0]

    weights = []
    biases = []
    i = 3
    for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        if take(i).strip() != "W":
            raise WeightsParseError(f"line {i + 1}: expected 'W' for layer {layer}")
        i += 1
        rows = []
        for _ in range(fan_out):
            rows.append(_parse_floats(take(i), fan_in, i + 1))
            i += 1
        if take(i).strip() != "b":
            raise WeightsParseError(f"line {i + 1}: expected 'b' for layer {layer}")
        i += 1
        bias = _parse_floats(take(i), fan_out, i + 1)
        i += 1
        weights.append(np.stack(rows))
        biases.append(bias)
    while i < len(lines):
        if lines[i].strip():
            raise WeightsParseError(f"line {i + 1}: trailing content")
        i += 1
    return MlpGenerator(dims, tuple(weights), tuple(biases), float(radius))
