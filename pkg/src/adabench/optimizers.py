"""One update kernel for the Adam family.

Every optimizer here follows the same two-EMA recursion

    m_t = beta1_t * m_{t-1} + (1 - beta1_t) * g_t
    v_t = beta2   * v_{t-1} + (1 - beta2)   * k_t**2   (+ epsilon, per kernel)
    theta_t = theta_{t-1} - alpha_t * m_hat / denom

and differs only in what feeds the second moment (k_t), where the damping
epsilon enters (inside the v accumulator vs. added to sqrt(v_hat)), and
whether bias correction applies. KernelSpec holds exactly those switches, so
e.g. the epsilon-placement ablation is a one-flag change.

Kernels:
    adamomentum   k = m,     epsilon inside,  bias correction on
    adam / adamw  k = g,     epsilon outside, bias correction on
    rmsprop       k = g,     epsilon outside, bias correction off (beta1 = 0)
    adabelief     k = g - m, epsilon inside,  bias correction on
    sgd           no second moment (denominator 1)
    rprop         sign-only update
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import EvaluationError

SECOND_MOMENT_INPUTS = ("raw_grad", "momentum", "grad_minus_momentum", "none")
EPS_PLACEMENTS = ("inside_accumulator", "outside_sqrt")
DECAY_MODES = ("none", "coupled", "decoupled")
SCHEDULE_KINDS = (
    "constant",
    "inverse_sqrt",
    "exp_decay",
    "step_decay",
    "cosine",
    "one_minus_inverse_sqrt",
)


@dataclass(frozen=True)
class ScheduleSpec:
    """Per-step scaling rule for a base hyperparameter value.

    kinds: constant; inverse_sqrt (base/sqrt(t)); exp_decay (base*decay**t);
    step_decay (base*factor**#{milestones <= t}); cosine (anneal to floor over
    t_max steps); one_minus_inverse_sqrt (1 - (1-base)/sqrt(t), a beta1 ramp
    whose complement decays like 1/sqrt(t)).
    """

    kind: str = "constant"
    decay: float | None = None
    milestones: tuple[int, ...] = ()
    factor: float | None = None
    t_max: int | None = None
    floor: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "exp_decay" and not (
            self.decay is not None and 0.0 < self.decay < 1.0
        ):
            raise ValueError(f"exp_decay needs decay in (0, 1), got {self.decay}")
        if self.kind == "step_decay" and (self.factor is None or not self.milestones):
            raise ValueError("step_decay needs milestones and a factor")
        if self.kind == "cosine" and not (self.t_max and self.t_max >= 1):
            raise ValueError(f"cosine needs t_max >= 1, got {self.t_max}")

    @classmethod
    def constant(cls) -> "ScheduleSpec":
        return cls("constant")

    @classmethod
    def inverse_sqrt(cls) -> "ScheduleSpec":
        return cls("inverse_sqrt")

    @classmethod
    def exp_decay(cls, decay: float) -> "ScheduleSpec":
        return cls("exp_decay", decay=decay)

    @classmethod
    def step_decay(cls, milestones, factor: float) -> "ScheduleSpec":
        return cls("step_decay", milestones=tuple(int(m) for m in milestones), factor=factor)

    @classmethod
    def cosine(cls, t_max: int, floor: float = 0.0) -> "ScheduleSpec":
        return cls("cosine", t_max=int(t_max), floor=floor)

    @classmethod
    def one_minus_inverse_sqrt(cls) -> "ScheduleSpec":
        return cls("one_minus_inverse_sqrt")


def schedule_value(spec: ScheduleSpec, base: float, t: int) -> float:
    """Value of the scheduled quantity at step t (t >= 1)."""
    if t < 1:
        raise ValueError(f"schedules are defined for t >= 1, got t={t}")
    if spec.kind == "constant":
        return base
    if spec.kind == "inverse_sqrt":
        return base / math.sqrt(t)
    if spec.kind == "exp_decay":
        return base * spec.decay**t
    if spec.kind == "step_decay":
        hits = sum(1 for m in spec.milestones if m <= t)
        return base * spec.factor**hits
    if spec.kind == "cosine":
        frac = min(t, spec.t_max) / spec.t_max
        return spec.floor + (base - spec.floor) * 0.5 * (1.0 + math.cos(math.pi * frac))
    if spec.kind == "one_minus_inverse_sqrt":
        return 1.0 - (1.0 - base) / math.sqrt(t)
    raise ValueError(f"unknown schedule kind {spec.kind!r}")


@dataclass(frozen=True)
class KernelSpec:
    """The switches that tell the Adam-family optimizers apart."""

    second_moment_input: str = "raw_grad"
    eps_placement: str = "outside_sqrt"
    bias_correction: bool = True
    sign_only: bool = False

    def __post_init__(self):
        if self.second_moment_input not in SECOND_MOMENT_INPUTS:
            raise ValueError(f"unknown second_moment_input {self.second_moment_input!r}")
        if self.eps_placement not in EPS_PLACEMENTS:
            raise ValueError(f"unknown eps_placement {self.eps_placement!r}")


KERNELS: dict[str, KernelSpec] = {
    "adamomentum": KernelSpec("momentum", "inside_accumulator", bias_correction=True),
    "adam": KernelSpec("raw_grad", "outside_sqrt", bias_correction=True),
    "adamw": KernelSpec("raw_grad", "outside_sqrt", bias_correction=True),
    "rmsprop": KernelSpec("raw_grad", "outside_sqrt", bias_correction=False),
    "adabelief": KernelSpec("grad_minus_momentum", "inside_accumulator", bias_correction=True),
    "sgd": KernelSpec("none", "outside_sqrt", bias_correction=False),
    "rprop": KernelSpec("raw_grad", "outside_sqrt", bias_correction=False, sign_only=True),
}


@dataclass(frozen=True)
class HyperParams:
    """Stepsize, EMA decays, damping and weight-decay knobs plus their schedules."""

    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    decay_mode: str = "none"
    alpha_schedule: ScheduleSpec = field(default_factory=ScheduleSpec.constant)
    beta1_schedule: ScheduleSpec = field(default_factory=ScheduleSpec.constant)

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (0.0 <= self.beta1 < 1.0):
            raise ValueError(f"beta1 must lie in [0, 1), got {self.beta1}")
        if not (0.0 <= self.beta2 < 1.0):
            raise ValueError(f"beta2 must lie in [0, 1), got {self.beta2}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.decay_mode not in DECAY_MODES:
            raise ValueError(f"unknown decay_mode {self.decay_mode!r}")


@dataclass(frozen=True)
class OptimizerConfig:
    """A kernel plus hyperparameters; what the experiment harnesses consume."""

    name: str
    kernel: KernelSpec
    hp: HyperParams


def configure(name: str, **hp_kwargs) -> OptimizerConfig:
    """Named optimizer with spec defaults (alpha=1e-3, betas 0.9/0.999, eps=1e-8).

    'adamw' selects the Adam kernel with decoupled weight decay; 'rmsprop'
    defaults beta1 to 0 so the numerator is the raw gradient.
    """
    if name not in KERNELS:
        raise ValueError(f"unknown optimizer {name!r}; known: {sorted(KERNELS)}")
    if name == "adamw":
        hp_kwargs.setdefault("decay_mode", "decoupled")
    if name in ("rmsprop", "sgd", "rprop"):
        hp_kwargs.setdefault("beta1", 0.0)
    return OptimizerConfig(name=name, kernel=KERNELS[name], hp=HyperParams(**hp_kwargs))


@dataclass(frozen=True)
class OptimizerState:
    """Step counter, the two EMAs, and the running debias products."""

    t: int
    m: np.ndarray
    v: np.ndarray
    kernel: KernelSpec
    beta1_prod: float = 1.0
    beta2_prod: float = 1.0


def init_state(dim: int, kernel: KernelSpec) -> OptimizerState:
    """Fresh state: t = 0 and both EMAs at zero."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return OptimizerState(
        t=0, m=np.zeros(dim), v=np.zeros(dim), kernel=kernel
    )


def step(
    state: OptimizerState,
    params: np.ndarray,
    grad: np.ndarray,
    hp: HyperParams,
) -> tuple[np.ndarray, OptimizerState]:
    """One optimizer step; returns the new parameters and the advanced state.

    alpha and beta1 are read through their schedules at the new step index.
    Coupled weight decay adds wd*theta to the gradient before the moment
    updates; decoupled subtracts alpha_t*wd*theta from the result afterwards.
    """
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError(
            f"length mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise EvaluationError("non-finite gradient passed to step")

    t = state.t + 1
    hpv = hp
    alpha_t = schedule_value(hpv.alpha_schedule, hpv.alpha, t)
    beta1_t = schedule_value(hpv.beta1_schedule, hpv.beta1, t)
    beta2 = hpv.beta2
    kernel = state.kernel

    g = grad
    if hpv.decay_mode == "coupled" and hpv.weight_decay != 0.0:
        g = grad + hpv.weight_decay * params

    if kernel.sign_only:
        new_params = params - alpha_t * np.sign(g)
        new_state = replace(
            state,
            t=t,
            m=g.copy(),
            v=g * g,
            beta1_prod=state.beta1_prod * beta1_t,
            beta2_prod=state.beta2_prod * beta2,
        )
        return new_params, new_state

    m = beta1_t * state.m + (1.0 - beta1_t) * g
    if kernel.second_moment_input == "none":
        v = state.v
    else:
        if kernel.second_moment_input == "raw_grad":
            k = g
        elif kernel.second_moment_input == "momentum":
            k = m
        else:
            k = g - m
        v = beta2 * state.v + (1.0 - beta2) * (k * k)
        if kernel.eps_placement == "inside_accumulator":
            v = v + hpv.epsilon

    beta1_prod = state.beta1_prod * beta1_t
    beta2_prod = state.beta2_prod * beta2
    if kernel.bias_correction:
        m_hat = m / (1.0 - beta1_prod)
        v_hat = v / (1.0 - beta2_prod)
    else:
        m_hat = m
        v_hat = v

    if kernel.second_moment_input == "none":
        update = alpha_t * m_hat
    elif kernel.eps_placement == "inside_accumulator":
        update = alpha_t * (m_hat / np.sqrt(v_hat))
    else:
        update = alpha_t * (m_hat / (np.sqrt(v_hat) + hpv.epsilon))

    new_params = params - update
    if hpv.decay_mode == "decoupled" and hpv.weight_decay != 0.0:
        new_params = new_params - alpha_t * hpv.weight_decay * params

    new_state = OptimizerState(
        t=t, m=m, v=v, kernel=kernel, beta1_prod=beta1_prod, beta2_prod=beta2_prod
    )
    return new_params, new_state


def debiased_moments(state: OptimizerState) -> tuple[np.ndarray, np.ndarray]:
    """Bias-corrected EMAs m/(1 - prod(beta1_i)) and v/(1 - prod(beta2_i)).

    With constant betas the products are beta1**t and beta2**t. Requires at
    least one step taken.
    """
    if state.t < 1:
        raise RuntimeError("debiased_moments needs at least one step")
    return state.m / (1.0 - state.beta1_prod), state.v / (1.0 - state.beta2_prod)


def effective_stepsize(state: OptimizerState, hp: HyperParams) -> np.ndarray:
    """Elementwise multiplier applied to m_hat at the last step taken.

    alpha_t / sqrt(v_hat) when epsilon sits inside the accumulator,
    alpha_t / (sqrt(v_hat) + epsilon) when it is added outside the root.
    """
    if state.t < 1:
        raise RuntimeError("effective_stepsize needs at least one step")
    alpha_t = schedule_value(hp.alpha_schedule, hp.alpha, state.t)
    kernel = state.kernel
    if kernel.second_moment_input == "none":
        return np.full_like(state.v, alpha_t)
    v_hat = state.v / (1.0 - state.beta2_prod) if kernel.bias_correction else state.v
    if kernel.sign_only or kernel.eps_placement == "inside_accumulator":
        return alpha_t / np.sqrt(v_hat)
    return alpha_t / (np.sqrt(v_hat) + hp.epsilon)
