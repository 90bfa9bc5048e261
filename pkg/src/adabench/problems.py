"""Objectives the harnesses optimize: analytic test functions, an online
convex loss stream with an exact comparator, a small fully-connected network
with hand-rolled backprop, noise-injection wrappers, and piecewise basin
landscapes for escape experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import RngStream, StableNoiseSpec, as_params, sas_sample


@dataclass(frozen=True)
class Problem:
    """A differentiable objective: loss and gradient callables over flat params.

    When the minimizer is known it is attached as ``optimum = (theta_star,
    f_star)`` and validated at construction (gradient below 1e-8 there).
    """

    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    optimum: tuple[np.ndarray, float] | None = None
    name: str = ""

    def __post_init__(self):
        if self.optimum is not None:
            theta_star, _ = self.optimum
            g = self.grad(as_params(theta_star))
            if np.max(np.abs(g)) > 1e-8:
                raise ValueError(
                    f"declared optimum of {self.name!r} has gradient norm "
                    f"{np.max(np.abs(g)):.3e} > 1e-8"
                )


def sphere(dim: int) -> Problem:
    """f(x) = sum_i x_i**2, gradient 2x, minimum 0 at the origin."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return Problem(
        dim=dim,
        eval=lambda x: float(np.dot(x, x)),
        grad=lambda x: 2.0 * x,
        optimum=(np.zeros(dim), 0.0),
        name=f"sphere-{dim}d",
    )


def rosenbrock(dim: int) -> Problem:
    """Chained Rosenbrock; minimum 0 at the all-ones point."""
    if dim < 2:
        raise ValueError(f"rosenbrock needs dim >= 2, got {dim}")

    def f(x):
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def g(x):
        grad = np.zeros_like(x)
        diff = x[1:] - x[:-1] ** 2
        grad[:-1] += -400.0 * x[:-1] * diff - 2.0 * (1.0 - x[:-1])
        grad[1:] += 200.0 * diff
        return grad

    return Problem(
        dim=dim, eval=f, grad=g, optimum=(np.ones(dim), 0.0), name=f"rosenbrock-{dim}d"
    )


def ill_conditioned_quadratic(dim: int, condition_number: float) -> Problem:
    """f(x) = x'Dx/2 with D diagonal, eigenvalues log-spaced from 1 to kappa."""
    if condition_number < 1.0:
        raise ValueError(f"condition_number must be >= 1, got {condition_number}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    d = np.logspace(0.0, math.log10(condition_number), dim) if dim > 1 else np.ones(1)

    return Problem(
        dim=dim,
        eval=lambda x: float(0.5 * np.dot(x, d * x)),
        grad=lambda x: d * x,
        optimum=(np.zeros(dim), 0.0),
        name=f"quadratic-k{condition_number:g}-{dim}d",
    )


# ---------------------------------------------------------------------------
# Online convex stream


@dataclass(frozen=True)
class OnlineConvexStream:
    """Quadratic tracking losses f_t(theta) = ||theta - c_t||^2 / 2.

    Centers are drawn once from a bounded box, so the best fixed comparator
    in hindsight is exactly their mean and cumulative regret can be computed
    without estimation.
    """

    dim: int
    horizon: int
    centers: np.ndarray  # (horizon, dim)
    box_radius: float

    def loss(self, t: int, theta: np.ndarray) -> float:
        """f_t at theta; t is 1-based."""
        d = theta - self.centers[t - 1]
        return float(0.5 * np.dot(d, d))

    def grad(self, t: int, theta: np.ndarray) -> np.ndarray:
        return theta - self.centers[t - 1]

    @property
    def comparator(self) -> np.ndarray:
        """Exact minimizer of the summed losses: the mean center."""
        return self.centers.mean(axis=0)

    def comparator_losses(self) -> np.ndarray:
        """f_t(theta_star) for t = 1..horizon."""
        d = self.centers - self.comparator
        return 0.5 * np.sum(d * d, axis=1)


def online_quadratic_stream(
    dim: int, horizon: int, rng: RngStream, box_radius: float = 1.0
) -> OnlineConvexStream:
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    gen = rng.generator()
    centers = gen.uniform(-box_radius, box_radius, size=(horizon, dim))
    return OnlineConvexStream(dim=dim, horizon=horizon, centers=centers, box_radius=box_radius)


# ---------------------------------------------------------------------------
# Small fully-connected network with hand-rolled backprop


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a small dense network; weights live in one flat vector."""

    widths: tuple[int, ...]
    activation: str = "tanh"
    loss: str = "mse"

    def __post_init__(self):
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ValueError(f"widths must be >= 2 positive layer sizes, got {self.widths}")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.loss not in ("mse", "softmax_cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")

    @property
    def n_params(self) -> int:
        return sum(
            fan_in * fan_out + fan_out
            for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:])
        )


def _unpack(spec: MlpSpec, weights: np.ndarray):
    if weights.size != spec.n_params:
        raise ValueError(
            f"weights length {weights.size} does not match spec ({spec.n_params})"
        )
    layers = []
    pos = 0
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        w = weights[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = weights[pos : pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def init_weights(spec: MlpSpec, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Seeded uniform init, each layer on (-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    chunks = []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        chunks.append(gen.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(gen.uniform(-bound, bound, size=fan_out))
    return np.concatenate(chunks)


def mlp_predict(spec: MlpSpec, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Network outputs for a batch of inputs (hidden activations, linear head)."""
    layers = _unpack(spec, weights)
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        if i < len(layers) - 1:
            a = np.tanh(z) if spec.activation == "tanh" else np.maximum(z, 0.0)
        else:
            a = z
    return a


def mlp_forward(spec: MlpSpec, weights: np.ndarray, batch) -> tuple[float, dict]:
    """Loss over a batch plus the cache mlp_backward needs.

    mse: mean over the batch of ||y_hat - y||^2 / 2. softmax_cross_entropy:
    mean negative log-likelihood of integer labels.
    """
    x, y = batch
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    if x.shape[1] != spec.widths[0]:
        raise ValueError(f"batch width {x.shape[1]} does not match input size {spec.widths[0]}")
    layers = _unpack(spec, weights)

    acts = [x]
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        if i < len(layers) - 1:
            a = np.tanh(z) if spec.activation == "tanh" else np.maximum(z, 0.0)
        else:
            a = z
        acts.append(a)

    out = acts[-1]
    n = x.shape[0]
    if spec.loss == "mse":
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        resid = out - y
        loss = float(0.5 * np.sum(resid * resid) / n)
        dout = resid / n
    else:
        labels = np.asarray(y, dtype=np.intp)
        shifted = out - out.max(axis=1, keepdims=True)
        logz = np.log(np.sum(np.exp(shifted), axis=1))
        loss = float(np.mean(logz - shifted[np.arange(n), labels]))
        p = np.exp(shifted - logz[:, None])
        p[np.arange(n), labels] -= 1.0
        dout = p / n

    cache = {"spec": spec, "layers": layers, "acts": acts, "dout": dout}
    return loss, cache


def mlp_backward(spec: MlpSpec, cache: dict) -> np.ndarray:
    """Exact gradient of the forward loss with respect to the flat weights."""
    layers = cache["layers"]
    acts = cache["acts"]
    delta = cache["dout"]
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        a_prev = acts[i]
        grads[i] = (a_prev.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ w.T
            a = acts[i]
            if spec.activation == "tanh":
                delta = delta * (1.0 - a * a)
            else:
                delta = delta * (a > 0.0)
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def mlp_problem(spec: MlpSpec, x: np.ndarray, y: np.ndarray, name: str = "mlp") -> Problem:
    """Full-batch training objective over a fixed dataset as a Problem."""

    def f(w):
        loss, _ = mlp_forward(spec, w, (x, y))
        return loss

    def g(w):
        _, cache = mlp_forward(spec, w, (x, y))
        return mlp_backward(spec, cache)

    return Problem(dim=spec.n_params, eval=f, grad=g, name=name)


def synthetic_regression(
    spec: MlpSpec, n_samples: int, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian inputs with targets from a frozen teacher of the same shape.

    The teacher weights come from a child of ``rng`` so dataset and teacher
    are reproducible together.
    """
    gen = rng.generator()
    x = gen.standard_normal(size=(n_samples, spec.widths[0]))
    teacher = init_weights(spec, gen)
    y = mlp_predict(spec, teacher, x)
    return x, y


# ---------------------------------------------------------------------------
# Stochastic gradient wrapper


class NoisyProblem:
    """A problem whose gradient oracle adds symmetric alpha-stable noise.

    Each ``grad`` call draws fresh noise from the held stream, so two wrappers
    built from the same RngStream replay identical noise sequences. ``eval``
    stays noiseless.
    """

    def __init__(self, base: Problem, noise: StableNoiseSpec, rng: RngStream):
        self.base = base
        self.noise = noise
        self.rng = rng
        self._gen = rng.generator()
        self.dim = base.dim
        self.optimum = base.optimum
        self.name = f"{base.name}+noise(a={noise.tail_index:g})"

    def eval(self, theta: np.ndarray) -> float:
        return self.base.eval(theta)

    def grad(self, theta: np.ndarray) -> np.ndarray:
        return self.base.grad(theta) + sas_sample(self.noise, self._gen, self.dim)


def noisy_grad(p: NoisyProblem, theta: np.ndarray) -> np.ndarray:
    """Stochastic gradient: true gradient plus one fresh stable-noise draw."""
    return p.grad(theta)


# ---------------------------------------------------------------------------
# Basin landscapes (1-D piecewise polynomials, C1 at the joints)


@dataclass(frozen=True)
class Basin:
    center: float
    half_width: float
    escape_radius: float
    curvature: float  # second derivative at the basin minimum


@dataclass(frozen=True)
class BasinLandscape:
    """A 1-D objective with named regions and basins carrying escape radii.

    ``value_at`` / ``grad_at`` are vectorized over positions, which lets the
    escape harness run a whole batch of independent trials elementwise.
    """

    kind: str
    problem: Problem
    regions: dict[str, tuple[float, float]]
    basins: dict[str, Basin]
    value_at: Callable[[np.ndarray], np.ndarray]
    grad_at: Callable[[np.ndarray], np.ndarray]

    def escaped(self, theta: np.ndarray, basin: str) -> bool:
        """True once the iterate has left the basin's escape ball."""
        b = self.basins[basin]
        return bool(abs(float(theta[0]) - b.center) > b.escape_radius)

    def start(self, basin: str) -> np.ndarray:
        """The designated start point: the basin minimum."""
        return np.array([self.basins[basin].center])


def _hermite(a: float, b: float, va: float, vb: float, sa: float, sb: float):
    """Cubic on [a, b] matching values and slopes at both ends; returns (f, f')."""
    h = b - a

    def f(x):
        u = (x - a) / h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return va * h00 + h * sa * h10 + vb * h01 + h * sb * h11

    def df(x):
        u = (x - a) / h
        d00 = 6 * u**2 - 6 * u
        d10 = 3 * u**2 - 4 * u + 1
        d01 = -6 * u**2 + 6 * u
        d11 = 3 * u**2 - 2 * u
        return (va * d00 + h * sa * d10 + vb * d01 + h * sb * d11) / h

    return f, df


def _wrap_landscape(kind, name, value_at, grad_at, regions, basins, optimum=None):
    problem = Problem(
        dim=1,
        eval=lambda theta: float(value_at(theta)[0]),
        grad=lambda theta: grad_at(theta),
        optimum=optimum,
        name=name,
    )
    return BasinLandscape(
        kind=kind,
        problem=problem,
        regions=regions,
        basins=basins,
        value_at=value_at,
        grad_at=grad_at,
    )


def _double_well(depth: float, w_flat: float, w_sharp: float) -> BasinLandscape:
    if w_sharp >= w_flat:
        raise ValueError(
            f"sharp half-width ({w_sharp}) must be smaller than flat ({w_flat})"
        )
    if w_flat + w_sharp >= 2.0:
        raise ValueError("wells at -1/+1 overlap; need w_flat + w_sharp < 2")
    cf, cs = -1.0, 1.0
    af = depth / w_flat**2
    a_s = depth / w_sharp**2
    x1 = cf + w_flat  # inner edge of the flat well
    x2 = cs - w_sharp  # inner edge of the sharp well
    bridge, dbridge = _hermite(x1, x2, depth, depth, 2 * depth / w_flat, -2 * depth / w_sharp)

    def value_at(x):
        x = np.asarray(x, dtype=np.float64)
        return np.select(
            [x <= x1, x >= x2],
            [af * (x - cf) ** 2, a_s * (x - cs) ** 2],
            default=bridge(x),
        )

    def grad_at(x):
        x = np.asarray(x, dtype=np.float64)
        return np.select(
            [x <= x1, x >= x2],
            [2.0 * af * (x - cf), 2.0 * a_s * (x - cs)],
            default=dbridge(x),
        )

    return _wrap_landscape(
        "double_well_flat_sharp",
        "double-well",
        value_at,
        grad_at,
        regions={
            "flat_well": (cf - w_flat, x1),
            "barrier": (x1, x2),
            "sharp_well": (x2, cs + w_sharp),
        },
        basins={
            "flat": Basin(cf, w_flat, 0.9 * w_flat, 2.0 * af),
            "sharp": Basin(cs, w_sharp, 0.9 * w_sharp, 2.0 * a_s),
        },
    )


def _asymmetric_valley(depth: float, width: float, asymmetry: float) -> BasinLandscape:
    if asymmetry <= 1.0:
        raise ValueError(f"asymmetry must exceed 1, got {asymmetry}")
    a_left = depth / width**2
    a_right = asymmetry * a_left

    def value_at(x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x < 0, a_left, a_right) * x * x

    def grad_at(x):
        x = np.asarray(x, dtype=np.float64)
        return 2.0 * np.where(x < 0, a_left, a_right) * x

    return _wrap_landscape(
        "asymmetric_valley",
        "asymmetric-valley",
        value_at,
        grad_at,
        regions={"flat_side": (-width, 0.0), "steep_side": (0.0, width / math.sqrt(asymmetry))},
        basins={"valley": Basin(0.0, width, 0.9 * width, 2.0 * a_left)},
        optimum=(np.zeros(1), 0.0),
    )


def _plateau_slope_basin(
    plateau_grad: float,
    slope_grad: float,
    basin_half_width: float,
    plateau_len: float = 2.0,
    transition_len: float = 1.0,
    slope_len: float = 2.0,
) -> BasinLandscape:
    # Piecewise-linear derivative profile integrated exactly, so f is a C1
    # piecewise quadratic: near-flat plateau, ramp to a steep downgrade, then
    # a quadratic well whose left edge continues the slope.
    p1 = plateau_len
    s0 = p1 + transition_len
    s1 = s0 + slope_len
    center = s1 + basin_half_width
    curv = slope_grad / basin_half_width  # f'' inside the well

    # antiderivative values at the breakpoints, with f(center) = 0
    f_p1 = -plateau_grad * p1
    f_s0 = f_p1 + (-plateau_grad - slope_grad) * 0.5 * transition_len
    f_s1 = f_s0 - slope_grad * slope_len
    f_center = f_s1 - slope_grad * basin_half_width + 0.5 * curv * basin_half_width**2

    def grad_at(x):
        x = np.asarray(x, dtype=np.float64)
        return np.select(
            [x <= p1, x <= s0, x <= s1],
            [
                np.full_like(x, -plateau_grad),
                -plateau_grad + (plateau_grad - slope_grad) * (x - p1) / transition_len,
                np.full_like(x, -slope_grad),
            ],
            default=-slope_grad + curv * (x - s1),
        )

    def value_at(x):
        x = np.asarray(x, dtype=np.float64)
        u_t = x - p1
        u_b = x - s1
        return (
            np.select(
                [x <= p1, x <= s0, x <= s1],
                [
                    -plateau_grad * x,
                    f_p1
                    - plateau_grad * u_t
                    + (plateau_grad - slope_grad) * u_t * u_t / (2 * transition_len),
                    f_s0 - slope_grad * (x - s0),
                ],
                default=f_s1 - slope_grad * u_b + 0.5 * curv * u_b * u_b,
            )
            - f_center
        )

    return _wrap_landscape(
        "plateau_slope_basin",
        "plateau-slope-basin",
        value_at,
        grad_at,
        regions={
            "plateau": (0.0, p1),
            "transition": (p1, s0),
            "slope": (s0, s1),
            "basin": (s1, center + basin_half_width),
        },
        basins={"basin": Basin(center, basin_half_width, 0.9 * basin_half_width, curv)},
        optimum=(np.array([center]), 0.0),
    )


def basin_landscape(kind: str, **params) -> BasinLandscape:
    """Piecewise 1-D landscapes for escape and stepsize-trace experiments.

    kinds: double_well_flat_sharp (depth, w_flat, w_sharp; wells at -1 and +1),
    asymmetric_valley (depth, width, asymmetry), plateau_slope_basin
    (plateau_grad, slope_grad, basin_half_width, ...). Escape radii default to
    90% of the basin half-width.
    """
    if kind == "double_well_flat_sharp":
        return _double_well(
            depth=params.get("depth", 1.0),
            w_flat=params.get("w_flat", 1.0),
            w_sharp=params.get("w_sharp", 0.25),
        )
    if kind == "asymmetric_valley":
        return _asymmetric_valley(
            depth=params.get("depth", 1.0),
            width=params.get("width", 1.0),
            asymmetry=params.get("asymmetry", 10.0),
        )
    if kind == "plateau_slope_basin":
        return _plateau_slope_basin(
            plateau_grad=params.get("plateau_grad", 1e-4),
            slope_grad=params.get("slope_grad", 1.0),
            basin_half_width=params.get("basin_half_width", 1.0),
            plateau_len=params.get("plateau_len", 2.0),
            transition_len=params.get("transition_len", 1.0),
            slope_len=params.get("slope_len", 2.0),
        )
    raise ValueError(f"unknown landscape kind {kind!r}")
