"""Low-level numeric building blocks: parameter vectors, seeded RNG streams,
a symmetric alpha-stable sampler and a finite-difference gradient oracle.

Parameter vectors are plain 1-D float64 numpy arrays throughout the package;
``as_params`` is the single place that coerces and validates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EvaluationError(RuntimeError):
    """A function evaluation came back non-finite.

    ``coordinate`` is the index of the perturbed coordinate when the failure
    happened inside a finite-difference probe, else None.
    """

    def __init__(self, message: str, coordinate: int | None = None):
        super().__init__(message)
        self.coordinate = coordinate


def as_params(values) -> np.ndarray:
    """Coerce ``values`` to a 1-D float64 array (the package-wide parameter format)."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise ValueError(f"parameter vector must be 1-D, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by (master_seed, stream_id).

    The pair fully determines the sample sequence; distinct stream_ids give
    statistically independent streams (numpy SeedSequence guarantees).
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id,))
        )


def derive_stream(master_seed: int, stream_id: int) -> RngStream:
    """Deterministic child stream; same arguments always yield the same sequence."""
    return RngStream(master_seed=int(master_seed), stream_id=int(stream_id))


@dataclass(frozen=True)
class StableNoiseSpec:
    """Symmetric alpha-stable noise: tail index in (0, 2] and per-coordinate scale.

    tail_index 2 is Gaussian with standard deviation sqrt(2)*scale; tail_index 1
    is Cauchy with the given scale. The characteristic function at scale 1 is
    exp(-|lambda|**tail_index).
    """

    tail_index: float
    scale: float | np.ndarray = 1.0

    def __post_init__(self):
        if not (0.0 < self.tail_index <= 2.0):
            raise ValueError(f"tail_index must lie in (0, 2], got {self.tail_index}")
        if np.any(np.asarray(self.scale) < 0.0):
            raise ValueError("scale must be nonnegative")


def sas_sample(
    spec: StableNoiseSpec,
    rng: RngStream | np.random.Generator,
    dim: int,
) -> np.ndarray:
    """Draw ``dim`` i.i.d. symmetric alpha-stable values, scaled per coordinate.

    Uses the Chambers-Mallows-Stuck construction:

        X = sin(a*U) / cos(U)**(1/a) * (cos(U - a*U) / W)**((1-a)/a)

    with U uniform on (-pi/2, pi/2) and W standard exponential. At a == 1 the
    exponent vanishes and the formula reduces exactly to tan(U) (Cauchy).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    a = spec.tail_index

    u = gen.uniform(-math.pi / 2.0, math.pi / 2.0, size=dim)
    w = gen.standard_exponential(size=dim)
    if a == 1.0:
        x = np.tan(u)
    else:
        x = (np.sin(a * u) / np.cos(u) ** (1.0 / a)) * (
            np.cos(u - a * u) / w
        ) ** ((1.0 - a) / a)
    return x * spec.scale


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``.

    Coordinate i is (f(x + h*e_i) - f(x - h*e_i)) / (2h). Exact (to rounding)
    for polynomials of degree <= 2; h = 1e-5 balances truncation against
    rounding in double precision. Raises EvaluationError with the offending
    coordinate index if a probe evaluates non-finite.
    """
    if h <= 0.0:
        raise ValueError(f"h must be > 0, got {h}")
    x = as_params(x)
    grad = np.empty_like(x)
    probe = x.copy()
    for i in range(x.size):
        xi = x[i]
        probe[i] = xi + h
        f_plus = float(f(probe))
        probe[i] = xi - h
        f_minus = float(f(probe))
        probe[i] = xi
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise EvaluationError(
                f"non-finite evaluation while probing coordinate {i}", coordinate=i
            )
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad
