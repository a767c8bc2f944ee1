"""Laplacian-weighted gradient descent and its noisy variant.

The feasible update premultiplies the stacked gradient by the lifted
Laplacian: theta <- theta - alpha * (L (x) I_n) grad F(theta). Because
the Laplacian's rows sum to zero the block sum of theta never changes,
so every iterate of a feasible start stays feasible. The noisy variant
adds an S-lifted Gaussian kick, S being the Laplacian square root, which
keeps feasibility for the same reason while letting the iterate leave
strict saddles.

Both algorithms are exactly mirrored by plain (noisy) gradient descent
on the auxiliary function psi(x) = F(theta_start + S-lift of x): running
``aux_gd`` / ``aux_ngd`` reproduces the lap-weighted theta sequence
identically, noise streams included. The aux routes exist as genuinely
separate code paths so the equivalence can be tested rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .network import NetworkOperator, apply_lifted, block_sum
from .objectives import (
    ProblemInstance,
    lipschitz_constants,
    stacked_gradient,
    stacked_value,
)
from .stationarity import tangent_min_curvature

DIVERGENCE_NORM = 1e12
START_FEAS_RTOL = 1e-10


class Algorithm(str, Enum):
    LGD = "lgd"
    NLGD = "nlgd"
    AUX_GD = "aux_gd"
    AUX_NGD = "aux_ngd"


NOISY = (Algorithm.NLGD, Algorithm.AUX_NGD)
AUX = (Algorithm.AUX_GD, Algorithm.AUX_NGD)


class InfeasibleStartError(ValueError):
    """Starting point's blocks do not sum to the demand vector."""


class DivergenceError(RuntimeError):
    """Iterate escaped to non-finite values or past the norm guard.

    Carries the offending iteration and the trace recorded so far.
    """

    def __init__(self, iteration: int, trace):
        super().__init__(f"divergence at iteration {iteration}")
        self.iteration = iteration
        self.trace = trace


class DescentViolationError(RuntimeError):
    """Noiseless sufficient-descent inequality failed at a recorded step."""

    def __init__(self, iteration: int, drop: float, bound: float):
        super().__init__(
            f"descent violation at iteration {iteration}: "
            f"objective changed by {drop:g}, bound {bound:g}"
        )
        self.iteration = iteration


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs besides the problem and the network.

    ``noise_variance`` is the per-coordinate variance of the Gaussian
    perturbation (must be 0 for the noiseless algorithms). ``seed``
    controls the perturbation stream; identical config and inputs give
    identical traces. Records land every ``record_every`` iterations.
    ``track_auxiliary`` co-runs the auxiliary recursion alongside the
    lap-weighted one. ``monitor_descent`` checks the noiseless
    sufficient-descent inequality at recorded steps. Setting ``stop_eps``
    and ``stop_gamma`` flags the first recorded iterate whose projected
    gradient and tangent curvature meet them; with ``early_exit`` the run
    stops there.
    """

    algorithm: Algorithm
    step_size: float
    max_iters: int
    noise_variance: float = 0.0
    seed: int = 0
    record_every: int = 1
    track_auxiliary: bool = False
    record_curvature: bool = False
    monitor_descent: bool = False
    stop_eps: float | None = None
    stop_gamma: float | None = None
    early_exit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.noise_variance < 0:
            raise ValueError(
                f"noise_variance must be >= 0, got {self.noise_variance}"
            )
        if self.noise_variance > 0 and self.algorithm not in NOISY:
            raise ValueError(
                f"noise_variance > 0 is invalid for {self.algorithm.value}"
            )
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if (self.stop_eps is None) != (self.stop_gamma is None):
            raise ValueError("stop_eps and stop_gamma must be set together")
        if self.stop_eps is not None and not self.record_curvature:
            raise ValueError("certification thresholds need record_curvature=True")
        if self.early_exit and self.stop_eps is None:
            raise ValueError("early_exit requires stop_eps and stop_gamma")


@dataclass(frozen=True)
class IterateState:
    """One iterate: the allocation, the iteration counter, and (when the
    auxiliary recursion is live) the auxiliary point and its anchor.
    Whenever ``aux_x`` is present, theta equals the anchor plus the
    S-lift of aux_x up to rounding."""

    theta: np.ndarray
    iteration: int
    aux_x: np.ndarray | None = None
    anchor: np.ndarray | None = None


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    f_value: float
    feas_residual: float
    proj_grad_norm: float
    tangent_curvature: float | None = None
    dist_to_ref: float | None = None


@dataclass(frozen=True)
class Trace:
    """Recorded diagnostics plus the final iterate. Record iterations are
    strictly increasing; the last record is the final iterate."""

    records: tuple
    final_theta: np.ndarray
    final_aux_x: np.ndarray | None
    iterations_run: int
    first_certified_iter: int | None = None


def initial_state(theta_start: np.ndarray, with_aux: bool) -> IterateState:
    theta = np.array(theta_start, dtype=float)
    aux = np.zeros_like(theta) if with_aux else None
    anchor = theta.copy() if with_aux else None
    return IterateState(theta=theta, iteration=0, aux_x=aux, anchor=anchor)


def sample_perturbation(
    m: int, n: int, noise_variance: float, rng: np.random.Generator
) -> np.ndarray:
    """Stacked Gaussian kick with per-coordinate variance noise_variance.

    Zero variance returns the zero vector without consuming the stream,
    so a zero-noise run is bitwise identical to its noiseless twin.
    """
    if noise_variance < 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")
    if noise_variance == 0:
        return np.zeros(m * n)
    return math.sqrt(noise_variance) * rng.standard_normal(m * n)


def lgd_step(
    state: IterateState,
    problem: ProblemInstance,
    net: NetworkOperator,
    step_size: float,
) -> IterateState:
    """One lap-weighted descent step; co-advances the auxiliary point when
    it is tracked."""
    grad = stacked_gradient(problem, state.theta)
    theta = state.theta - step_size * apply_lifted(net.laplacian, grad, problem.n)
    aux = state.aux_x
    if aux is not None:
        aux = aux - step_size * apply_lifted(net.sqrt_laplacian, grad, problem.n)
    return replace(state, theta=theta, aux_x=aux, iteration=state.iteration + 1)


def nlgd_step(
    state: IterateState,
    problem: ProblemInstance,
    net: NetworkOperator,
    step_size: float,
    noise_variance: float,
    rng: np.random.Generator,
) -> IterateState:
    """One noisy lap-weighted step: the gradient direction is lifted by
    the Laplacian, the Gaussian kick by its square root."""
    grad = stacked_gradient(problem, state.theta)
    direction = apply_lifted(net.laplacian, grad, problem.n)
    aux_direction = None
    if state.aux_x is not None:
        aux_direction = apply_lifted(net.sqrt_laplacian, grad, problem.n)
    if noise_variance > 0:
        kick = sample_perturbation(problem.m, problem.n, noise_variance, rng)
        direction = direction + apply_lifted(net.sqrt_laplacian, kick, problem.n)
        if aux_direction is not None:
            aux_direction = aux_direction + kick
    theta = state.theta - step_size * direction
    aux = state.aux_x
    if aux is not None:
        aux = aux - step_size * aux_direction
    return replace(state, theta=theta, aux_x=aux, iteration=state.iteration + 1)


def aux_gd_step(
    state: IterateState,
    problem: ProblemInstance,
    net: NetworkOperator,
    step_size: float,
) -> IterateState:
    """One plain gradient step on the auxiliary function: x moves against
    the S-lifted gradient, theta is re-derived from the anchor."""
    if state.aux_x is None or state.anchor is None:
        raise ValueError("auxiliary step needs a state carrying aux_x and anchor")
    grad = stacked_gradient(problem, state.theta)
    aux = state.aux_x - step_size * apply_lifted(net.sqrt_laplacian, grad, problem.n)
    theta = state.anchor + apply_lifted(net.sqrt_laplacian, aux, problem.n)
    return replace(state, theta=theta, aux_x=aux, iteration=state.iteration + 1)


def aux_ngd_step(
    state: IterateState,
    problem: ProblemInstance,
    net: NetworkOperator,
    step_size: float,
    noise_variance: float,
    rng: np.random.Generator,
) -> IterateState:
    """Noisy auxiliary step; the kick enters unlifted, matching the noisy
    lap-weighted route through the change of variables."""
    if state.aux_x is None or state.anchor is None:
        raise ValueError("auxiliary step needs a state carrying aux_x and anchor")
    grad = stacked_gradient(problem, state.theta)
    direction = apply_lifted(net.sqrt_laplacian, grad, problem.n)
    if noise_variance > 0:
        direction = direction + sample_perturbation(
            problem.m, problem.n, noise_variance, rng
        )
    aux = state.aux_x - step_size * direction
    theta = state.anchor + apply_lifted(net.sqrt_laplacian, aux, problem.n)
    return replace(state, theta=theta, aux_x=aux, iteration=state.iteration + 1)


# ---------------------------------------------------------------------------
# parameter calculators


def theoretical_step_bound(
    failure_prob: float, lip_grad: float, sqrt_norm_sq: float
) -> float:
    """Largest safe step size min{1, -2 ln p} / (||S||^2 L_grad) for
    failure probability p in (0, 1)."""
    if not 0.0 < failure_prob < 1.0:
        raise ValueError(f"failure_prob must be in (0, 1), got {failure_prob}")
    if lip_grad <= 0 or sqrt_norm_sq <= 0:
        raise ValueError("lip_grad and sqrt_norm_sq must be positive")
    base = 1.0 / (sqrt_norm_sq * lip_grad)
    return min(base, -2.0 * math.log(failure_prob) * base)


def variance_for_tolerance(grad_tol: float, m: int, n: int) -> float:
    """Per-coordinate noise variance grad_tol^2 / (12 m n) matched to a
    projected-gradient tolerance."""
    if grad_tol <= 0:
        raise ValueError(f"grad_tol must be positive, got {grad_tol}")
    if m < 1 or n < 1:
        raise ValueError(f"need m >= 1 and n >= 1, got m={m}, n={n}")
    return grad_tol**2 / (12.0 * m * n)


def iteration_budget(
    psi_start: float,
    min_sum: float,
    lip_grad_aux: float,
    grad_tol: float,
    step_size: float,
    rho: float | None = None,
) -> int:
    """Iterations sufficient to shrink the expected auxiliary gradient
    below grad_tol: ceil(gap / (L_aux * tol^2 * alpha^2)) with gap the
    start-to-lower-bound objective gap. Passing ``rho`` switches to the
    alternative form ceil(gap * rho^7 / (tol^2 * alpha)). Clamped to at
    least 1; a negative gap (lower bound above the start value) raises.
    """
    gap = psi_start - min_sum
    if gap < 0:
        raise ValueError(
            f"start value {psi_start:g} is below the lower bound {min_sum:g}"
        )
    if grad_tol <= 0 or step_size <= 0:
        raise ValueError("grad_tol and step_size must be positive")
    if rho is None:
        if lip_grad_aux <= 0:
            raise ValueError(f"lip_grad_aux must be positive, got {lip_grad_aux}")
        denom = lip_grad_aux * grad_tol**2 * step_size**2
    else:
        if rho <= 0:
            raise ValueError(f"rho must be positive, got {rho}")
        denom = grad_tol**2 * step_size / rho**7
    return max(math.ceil(gap / denom), 1)


# ---------------------------------------------------------------------------
# the run loop


def _record(
    state: IterateState,
    problem: ProblemInstance,
    net: NetworkOperator,
    config: RunConfig,
    theta_ref: np.ndarray | None,
) -> TraceRecord:
    grad = stacked_gradient(problem, state.theta)
    curvature = None
    if config.record_curvature:
        curvature = tangent_min_curvature(state.theta, problem)
    dist = None
    if theta_ref is not None:
        dist = float(np.linalg.norm(state.theta - theta_ref))
    return TraceRecord(
        iteration=state.iteration,
        f_value=stacked_value(problem, state.theta),
        feas_residual=float(
            np.linalg.norm(block_sum(state.theta, problem.n) - problem.demand)
        ),
        proj_grad_norm=float(
            np.linalg.norm(apply_lifted(net.sqrt_laplacian, grad, problem.n))
        ),
        tangent_curvature=curvature,
        dist_to_ref=dist,
    )


def _certified(record: TraceRecord, config: RunConfig) -> bool:
    if config.stop_eps is None:
        return False
    return (
        record.proj_grad_norm <= config.stop_eps
        and record.tangent_curvature >= -config.stop_gamma
    )


def run(
    problem: ProblemInstance,
    net: NetworkOperator,
    theta_start: np.ndarray,
    config: RunConfig,
    theta_ref: np.ndarray | None = None,
) -> Trace:
    """Run the configured algorithm from a feasible start.

    Guards: the start must satisfy the demand constraint to relative
    precision; iterates past the norm guard or containing non-finite
    values raise ``DivergenceError`` carrying the partial trace. With
    ``monitor_descent`` and a noiseless algorithm, each recorded step is
    checked against the sufficient-descent inequality. Identical inputs,
    config and seed reproduce the identical trace.
    """
    theta_start = np.asarray(theta_start, dtype=float)
    if net.agent_dim != problem.n:
        raise ValueError(
            f"network agent_dim {net.agent_dim} != problem dimension {problem.n}"
        )
    if theta_start.shape != (problem.m * problem.n,):
        raise ValueError(
            f"start has shape {theta_start.shape}, "
            f"expected ({problem.m * problem.n},)"
        )
    start_residual = float(
        np.linalg.norm(block_sum(theta_start, problem.n) - problem.demand)
    )
    feas_limit = START_FEAS_RTOL * (1.0 + float(np.linalg.norm(problem.demand)))
    if start_residual > feas_limit:
        raise InfeasibleStartError(
            f"starting blocks sum to residual {start_residual:g}, "
            f"limit {feas_limit:g}; the demand constraint must hold at entry"
        )
    if theta_ref is not None:
        theta_ref = np.asarray(theta_ref, dtype=float)

    algorithm = config.algorithm
    rng = np.random.default_rng(config.seed)
    with_aux = algorithm in AUX or config.track_auxiliary
    state = initial_state(theta_start, with_aux)

    descent_slope = None
    if config.monitor_descent and algorithm not in NOISY:
        lip_grad, _ = lipschitz_constants(problem)
        lip_aux = net.lambda_max * lip_grad
        descent_slope = -1.0 / config.step_size + lip_aux / 2.0

    def advance(current: IterateState) -> IterateState:
        if algorithm is Algorithm.LGD:
            return lgd_step(current, problem, net, config.step_size)
        if algorithm is Algorithm.NLGD:
            return nlgd_step(
                current, problem, net, config.step_size, config.noise_variance, rng
            )
        if algorithm is Algorithm.AUX_GD:
            return aux_gd_step(current, problem, net, config.step_size)
        return aux_ngd_step(
            current, problem, net, config.step_size, config.noise_variance, rng
        )

    records = []
    first_certified = None
    stopped_early = False

    for _ in range(config.max_iters):
        record = None
        if state.iteration % config.record_every == 0:
            record = _record(state, problem, net, config, theta_ref)
            records.append(record)
            if first_certified is None and _certified(record, config):
                first_certified = record.iteration
                if config.early_exit:
                    stopped_early = True
                    break

        state = advance(state)
        norm = float(np.linalg.norm(state.theta))
        if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
            partial = Trace(
                records=tuple(records),
                final_theta=state.theta,
                final_aux_x=state.aux_x,
                iterations_run=state.iteration,
            )
            raise DivergenceError(state.iteration, partial)

        if record is not None and descent_slope is not None:
            after = stacked_value(problem, state.theta)
            step_sq = (config.step_size * record.proj_grad_norm) ** 2
            bound = descent_slope * step_sq
            if after - record.f_value > bound + 1e-9:
                raise DescentViolationError(
                    state.iteration - 1, after - record.f_value, bound
                )

    if not stopped_early and (not records or records[-1].iteration != state.iteration):
        record = _record(state, problem, net, config, theta_ref)
        records.append(record)
        if first_certified is None and _certified(record, config):
            first_certified = record.iteration

    return Trace(
        records=tuple(records),
        final_theta=state.theta,
        final_aux_x=state.aux_x,
        iterations_run=state.iteration,
        first_certified_iter=first_certified,
    )
