"""Saddle-escape studies: scenario builders, batch runs, trace export.

A scenario bundles a problem instance, its network operator, a feasible
reference point (the saddle the noiseless method stalls near), and a set
of labeled run configurations. Batch helpers run every (seed, config)
pair from a shared per-seed start, measure when each run escapes the
reference value, and certify the final iterate.

Randomness is split deterministically: the scenario seed spawns child
streams for the graph, the objective parameters and the scenario's own
starting point, in that order; each batch seed s derives its start
perturbation from SeedSequence([s, 0]) and the noise seed of the j-th
config from SeedSequence([s, 1 + j]). Re-running a manifest therefore
reproduces every trace byte for byte.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .network import Graph, NetworkOperator, build_laplacian, watts_strogatz
from .objectives import (
    ProblemInstance,
    lipschitz_constants,
    sample_portfolio_params,
    sample_smart_grid_params,
    smart_grid_problem,
    portfolio_problem,
    stacked_value,
)
from .optimizer import Algorithm, RunConfig, Trace, run
from .stationarity import StationarityReport, classify

TRACE_HEADER = "iter,f_value,feas_residual,proj_grad_norm,tangent_curvature,dist_to_ref"

SUMMARY_FIELDS = (
    "seed",
    "config",
    "escape_iter",
    "final_f",
    "final_feas_residual",
    "final_proj_grad_norm",
    "final_tangent_curvature",
    "eps",
    "gamma",
    "classification",
)


@dataclass(frozen=True)
class Scenario:
    """A reproducible experiment setup. ``base_point`` is the feasible
    anchor that per-seed starts perturb; ``theta_start`` is the start for
    the scenario's own seed; ``theta_ref`` the escape reference."""

    name: str
    seed: int
    problem: ProblemInstance
    net: NetworkOperator
    graph: Graph
    theta_start: np.ndarray
    theta_ref: np.ndarray
    base_point: np.ndarray
    init_scale: float
    configs: dict


@dataclass(frozen=True)
class RunResult:
    seed: int
    label: str
    config: RunConfig
    trace: Trace
    escape_iteration: int | None
    final_report: StationarityReport


@dataclass(frozen=True)
class BatchResult:
    scenario_name: str
    scenario_seed: int
    seeds: tuple
    configs: dict
    runs: tuple
    f_ref: float
    escape_delta: float


def tangent_perturbation(
    m: int, n: int, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """Gaussian direction projected to zero block sum, rescaled to norm
    ``scale``. Adding it to a feasible point keeps it feasible."""
    if scale == 0:
        return np.zeros(m * n)
    direction = rng.standard_normal((m, n))
    direction -= direction.mean(axis=0)
    flat = direction.reshape(-1)
    norm = float(np.linalg.norm(flat))
    if norm == 0:
        return np.zeros(m * n)
    return flat * (scale / norm)


def _scenario_streams(seed: int) -> tuple:
    graph_ss, param_ss, init_ss = np.random.SeedSequence(seed).spawn(3)
    graph_seed = int(graph_ss.generate_state(1)[0])
    return graph_seed, np.random.default_rng(param_ss), np.random.default_rng(init_ss)


def start_for_seed(scenario: Scenario, seed: int) -> np.ndarray:
    """The shared starting point every config uses under batch seed s."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    kick = tangent_perturbation(
        scenario.problem.m, scenario.problem.n, scenario.init_scale, rng
    )
    return scenario.base_point + kick


def _noise_seed(seed: int, config_index: int) -> int:
    return int(np.random.SeedSequence([seed, 1 + config_index]).generate_state(1)[0])


def build_smart_grid_scenario(seed: int = 0) -> Scenario:
    """Twenty generators on a small-world grid, each with a quadratic
    cost minus a log satisfaction term, zero net demand. The origin is a
    feasible stationary saddle; starts are tiny tangent perturbations of
    it. Noise level 0.05 (standard deviation) with step 0.001, budget
    2e5 iterations, recording every 100."""
    m, n = 20, 1
    graph_seed, param_rng, init_rng = _scenario_streams(seed)
    graph = watts_strogatz(m, 4, 0.2, graph_seed)
    net = build_laplacian(graph, agent_dim=n)
    a, b = sample_smart_grid_params(m, param_rng)
    problem = smart_grid_problem(a, b, demand=0.0, agent_dim=n)

    base = np.zeros(m * n)
    scale = 1e-3
    theta_start = base + tangent_perturbation(m, n, scale, init_rng)
    step, sigma, budget, stride = 1e-3, 0.05, 200_000, 100
    configs = {
        "lgd": RunConfig(
            algorithm=Algorithm.LGD,
            step_size=step,
            max_iters=budget,
            record_every=stride,
            record_curvature=True,
            monitor_descent=True,
        ),
        "nlgd": RunConfig(
            algorithm=Algorithm.NLGD,
            step_size=step,
            max_iters=budget,
            noise_variance=sigma**2,
            record_every=stride,
            record_curvature=True,
        ),
    }
    return Scenario(
        name="smart_grid",
        seed=seed,
        problem=problem,
        net=net,
        graph=graph,
        theta_start=theta_start,
        theta_ref=base.copy(),
        base_point=base,
        init_scale=scale,
        configs=configs,
    )


def build_portfolio_scenario(seed: int = 0) -> Scenario:
    """Twenty traders with five assets each on the same small-world
    topology; expected-return, risk and log-penalty parameters are drawn
    from the documented defaults. Demand is the all-ones vector, split
    uniformly for the reference point. Step 0.005 with noise levels 0.1,
    0.5 and 1 plus a noiseless baseline, budget 1e5, recording every 100."""
    m, n = 20, 5
    graph_seed, param_rng, init_rng = _scenario_streams(seed)
    graph = watts_strogatz(m, 4, 0.2, graph_seed)
    net = build_laplacian(graph, agent_dim=n)
    mu, cov, rw, lw = sample_portfolio_params(m, n, param_rng)
    demand = np.ones(n)
    problem = portfolio_problem(mu, cov, rw, lw, demand)

    base = np.tile(demand / m, m)
    scale = 1e-3
    theta_start = base + tangent_perturbation(m, n, scale, init_rng)
    step, budget, stride = 5e-3, 100_000, 100
    configs = {
        "lgd": RunConfig(
            algorithm=Algorithm.LGD,
            step_size=step,
            max_iters=budget,
            record_every=stride,
            record_curvature=True,
            monitor_descent=True,
        ),
    }
    for sigma in (0.1, 0.5, 1.0):
        configs[f"nlgd_sigma_{sigma:g}"] = RunConfig(
            algorithm=Algorithm.NLGD,
            step_size=step,
            max_iters=budget,
            noise_variance=sigma**2,
            record_every=stride,
            record_curvature=True,
        )
    return Scenario(
        name="portfolio",
        seed=seed,
        problem=problem,
        net=net,
        graph=graph,
        theta_start=theta_start,
        theta_ref=base.copy(),
        base_point=base,
        init_scale=scale,
        configs=configs,
    )


SCENARIO_BUILDERS = {
    "smart_grid": build_smart_grid_scenario,
    "portfolio": build_portfolio_scenario,
}


def escape_iteration(trace: Trace, f_ref: float, delta: float) -> int | None:
    """First recorded iteration whose objective sits below f_ref - delta,
    None when the trace never does."""
    for record in trace.records:
        if record.f_value < f_ref - delta:
            return record.iteration
    return None


def final_report(
    trace: Trace, problem: ProblemInstance, net: NetworkOperator
) -> StationarityReport:
    # Self-consistent tolerances: the gradient tolerance is the measured
    # final projected gradient; the curvature tolerance follows from it
    # through the declared Hessian smoothness and the spectral gap.
    eps = trace.records[-1].proj_grad_norm
    _, lip_hess = lipschitz_constants(problem)
    curv_tol = float(np.sqrt(eps * net.lambda_max**1.5 * lip_hess))
    gamma = curv_tol / net.lambda_min_plus
    return classify(trace.final_theta, problem, net, eps=eps, gamma=gamma)


def run_batch(scenario: Scenario, seeds, configs: dict) -> BatchResult:
    """Run every (seed, config) pair sequentially in deterministic order:
    seeds outermost, configs in insertion order. All configs under one
    seed share the same starting point."""
    seeds = tuple(int(s) for s in seeds)
    if any(s < 0 for s in seeds):
        raise ValueError("batch seeds must be non-negative")
    f_ref = stacked_value(scenario.problem, scenario.theta_ref)
    delta = 1e-4 * (1.0 + abs(f_ref))

    runs = []
    for seed in seeds:
        theta_start = start_for_seed(scenario, seed)
        for index, (label, config) in enumerate(configs.items()):
            seeded = replace(config, seed=_noise_seed(seed, index))
            trace = run(
                scenario.problem,
                scenario.net,
                theta_start,
                seeded,
                theta_ref=scenario.theta_ref,
            )
            runs.append(
                RunResult(
                    seed=seed,
                    label=label,
                    config=seeded,
                    trace=trace,
                    escape_iteration=escape_iteration(trace, f_ref, delta),
                    final_report=final_report(trace, scenario.problem, scenario.net),
                )
            )
    return BatchResult(
        scenario_name=scenario.name,
        scenario_seed=scenario.seed,
        seeds=seeds,
        configs=dict(configs),
        runs=tuple(runs),
        f_ref=f_ref,
        escape_delta=delta,
    )


def run_comparison(scenario: Scenario, seeds) -> BatchResult:
    """Noiseless-versus-noisy comparison over the scenario's own configs."""
    return run_batch(scenario, seeds, scenario.configs)


def sweep_sigma(scenario: Scenario, sigmas, seeds) -> BatchResult:
    """Noise-level sweep: one noisy config per sigma (variance sigma^2)
    alongside the scenario's noiseless baseline."""
    if "lgd" not in scenario.configs:
        raise ValueError("scenario has no 'lgd' baseline config")
    baseline = scenario.configs["lgd"]
    configs = {"lgd": baseline}
    for sigma in sigmas:
        sigma = float(sigma)
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        configs[f"nlgd_sigma_{sigma:g}"] = replace(
            baseline,
            algorithm=Algorithm.NLGD,
            noise_variance=sigma**2,
            monitor_descent=False,
        )
    return run_batch(scenario, seeds, configs)


# ---------------------------------------------------------------------------
# export and replay


def fmt_float(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def summary_rows(batch: BatchResult) -> list:
    """One dict per run, sorted by (config label, seed) so the summary is
    independent of execution order."""
    rows = []
    for result in sorted(batch.runs, key=lambda r: (r.label, r.seed)):
        report = result.final_report
        last = result.trace.records[-1]
        rows.append(
            {
                "seed": result.seed,
                "config": result.label,
                "escape_iter": result.escape_iteration,
                "final_f": last.f_value,
                "final_feas_residual": report.feasibility_residual,
                "final_proj_grad_norm": report.projected_grad_norm,
                "final_tangent_curvature": report.tangent_min_curvature,
                "eps": report.eps,
                "gamma": report.gamma,
                "classification": report.classification.value,
            }
        )
    return rows


def config_to_dict(config: RunConfig) -> dict:
    """Manifest form of a config. The per-run seed is omitted: batch runs
    derive it from the batch seed and config position."""
    return {
        "algorithm": config.algorithm.value,
        "step_size": config.step_size,
        "max_iters": config.max_iters,
        "noise_variance": config.noise_variance,
        "record_every": config.record_every,
        "track_auxiliary": config.track_auxiliary,
        "record_curvature": config.record_curvature,
        "monitor_descent": config.monitor_descent,
        "stop_eps": config.stop_eps,
        "stop_gamma": config.stop_gamma,
        "early_exit": config.early_exit,
    }


def export_traces(batch: BatchResult, out_dir) -> list:
    """Write one CSV per run, a summary CSV, and a replay manifest.

    Floats are serialized with repr, so identical batches produce
    byte-identical files. Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    for result in batch.runs:
        path = out / f"trace_{result.label}_seed{result.seed}.csv"
        lines = [TRACE_HEADER]
        for rec in result.trace.records:
            lines.append(
                ",".join(
                    [
                        str(rec.iteration),
                        fmt_float(rec.f_value),
                        fmt_float(rec.feas_residual),
                        fmt_float(rec.proj_grad_norm),
                        fmt_float(rec.tangent_curvature),
                        fmt_float(rec.dist_to_ref),
                    ]
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_FIELDS)
        for row in summary_rows(batch):
            writer.writerow(
                [
                    row["seed"],
                    row["config"],
                    "" if row["escape_iter"] is None else row["escape_iter"],
                    fmt_float(row["final_f"]),
                    fmt_float(row["final_feas_residual"]),
                    fmt_float(row["final_proj_grad_norm"]),
                    fmt_float(row["final_tangent_curvature"]),
                    fmt_float(row["eps"]),
                    fmt_float(row["gamma"]),
                    row["classification"],
                ]
            )
    written.append(summary_path)

    manifest = {
        "kind": "batch",
        "scenario": {"name": batch.scenario_name, "seed": batch.scenario_seed},
        "seeds": list(batch.seeds),
        "configs": {
            label: config_to_dict(config) for label, config in batch.configs.items()
        },
    }
    manifest_path = out / "manifest.yaml"
    with open(manifest_path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(manifest, handle, sort_keys=False)
    written.append(manifest_path)
    return written


def replay_manifest(manifest_path, out_dir) -> BatchResult:
    """Rebuild the scenario named in a manifest, re-run its batch, and
    export to ``out_dir``; output files match the original byte for byte."""
    with open(manifest_path, "r", encoding="utf-8") as handle:
        manifest = yaml.safe_load(handle)
    name = manifest["scenario"]["name"]
    if name not in SCENARIO_BUILDERS:
        raise ValueError(f"unknown scenario {name!r} in manifest")
    scenario = SCENARIO_BUILDERS[name](int(manifest["scenario"]["seed"]))
    configs = {
        label: RunConfig(**fields) for label, fields in manifest["configs"].items()
    }
    batch = run_batch(scenario, manifest["seeds"], configs)
    export_traces(batch, out_dir)
    return batch
