"""Command-line harness.

Subcommands: run (one configured run), compare (noiseless vs noisy batch
on a named scenario), sweep (noise-level sweep), check (certify a saved
allocation), spectrum (graph spectral summary), params (theory-backed
parameter calculator).

Exit codes: 0 success, 1 negative domain answer (not certified,
disconnected graph), 2 input or config error, 3 runtime failure
(infeasible start, divergence).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .config import ConfigError, load_bundle
from .experiments import (
    SCENARIO_BUILDERS,
    TRACE_HEADER,
    export_traces,
    final_report,
    fmt_float,
    run_batch,
    sweep_sigma,
)
from .network import (
    DisconnectedGraphError,
    build_laplacian,
    component_count,
    read_edge_list,
)
from .objectives import estimate_global_min_sum, lipschitz_constants, stacked_value
from .optimizer import (
    DivergenceError,
    InfeasibleStartError,
    iteration_budget,
    run,
    theoretical_step_bound,
    variance_for_tolerance,
)
from .stationarity import Classification, classify, format_report

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3


def _default_out_dir() -> str:
    return os.environ.get("LAPGD_OUT_DIR", "lapgd_out")


def _write_trace_csv(trace, path: Path) -> None:
    lines = [TRACE_HEADER]
    for rec in trace.records:
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


def cmd_run(args) -> int:
    bundle = load_bundle(args.config, require_run=True)
    trace = run(bundle.problem, bundle.net, bundle.theta_start, bundle.run_config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.csv"
    _write_trace_csv(trace, trace_path)
    manifest_path = out / "manifest.yaml"
    with open(manifest_path, "w", encoding="utf-8") as handle:
        yaml.safe_dump({"kind": "run", "config": bundle.raw}, handle, sort_keys=False)
    report = final_report(trace, bundle.problem, bundle.net)
    print(format_report(report))
    print(f"iterations: {trace.iterations_run}")
    print(f"trace: {trace_path}")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def _scenario_from_args(args):
    builder = SCENARIO_BUILDERS[args.scenario]
    return builder(args.scenario_seed)


def _truncated_configs(configs: dict, max_iters: int | None) -> dict:
    if max_iters is None:
        return dict(configs)
    return {
        label: replace(cfg, max_iters=max_iters) for label, cfg in configs.items()
    }


def _print_batch_summary(batch) -> None:
    labels = list(batch.configs)
    for label in labels:
        results = [r for r in batch.runs if r.label == label]
        escapes = [r.escape_iteration for r in results if r.escape_iteration is not None]
        line = (
            f"{label}: escaped {len(escapes)}/{len(results)} runs"
        )
        if escapes:
            line += f", median escape iteration {int(np.median(escapes))}"
        print(line)


def cmd_compare(args) -> int:
    scenario = _scenario_from_args(args)
    configs = _truncated_configs(scenario.configs, args.max_iters)
    batch = run_batch(scenario, range(args.seeds), configs)
    written = export_traces(batch, args.out_dir)
    _print_batch_summary(batch)
    print(f"wrote {len(written)} files to {args.out_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _scenario_from_args(args)
    sigmas = [float(s) for s in args.sigmas.split(",") if s.strip() != ""]
    if not sigmas:
        raise ConfigError("--sigmas needs at least one value")
    scenario = replace(
        scenario, configs=_truncated_configs(scenario.configs, args.max_iters)
    )
    batch = sweep_sigma(scenario, sigmas, range(args.seeds))
    written = export_traces(batch, args.out_dir)
    _print_batch_summary(batch)
    print(f"wrote {len(written)} files to {args.out_dir}")
    return EXIT_OK


def cmd_check(args) -> int:
    bundle = load_bundle(args.config, require_run=False)
    try:
        values = np.loadtxt(args.state, dtype=float).reshape(-1)
    except Exception as exc:
        raise ConfigError(f"{args.state}: cannot read allocation values: {exc}")
    expected = bundle.problem.m * bundle.problem.n
    if values.shape != (expected,):
        raise ConfigError(
            f"{args.state}: holds {values.shape[0]} values, expected {expected}"
        )
    report = classify(values, bundle.problem, bundle.net, args.eps, args.gamma)
    print(format_report(report))
    if report.classification is Classification.SECOND_ORDER:
        return EXIT_OK
    return EXIT_NEGATIVE


def cmd_spectrum(args) -> int:
    graph = read_edge_list(args.graph)
    components = component_count(graph)
    print(f"nodes: {graph.m}")
    print(f"edges: {graph.edge_count}")
    print(f"components: {components}")
    if components != 1:
        print("disconnected: spectral quantities need a connected graph")
        return EXIT_NEGATIVE
    net = build_laplacian(graph)
    residual = np.linalg.norm(
        net.sqrt_laplacian @ net.sqrt_laplacian - net.laplacian
    ) / max(np.linalg.norm(net.laplacian), 1e-300)
    print(f"lambda_min_plus: {net.lambda_min_plus!r}")
    print(f"lambda_max: {net.lambda_max!r}")
    print(f"sqrt_norm_sq: {net.lambda_max!r}")
    print(f"sqrt_residual: {float(residual)!r}")
    return EXIT_OK


def cmd_params(args) -> int:
    bundle = load_bundle(args.config, require_run=False)
    lip_grad, lip_hess = lipschitz_constants(bundle.problem)
    net = bundle.net
    step_bound = theoretical_step_bound(args.failure_prob, lip_grad, net.lambda_max)
    variance = variance_for_tolerance(
        args.grad_tol, bundle.problem.m, bundle.problem.n
    )
    curv_tol = float(np.sqrt(args.grad_tol * net.lambda_max**1.5 * lip_hess))
    min_sum = bundle.problem.global_min_sum
    if min_sum is None:
        min_sum = estimate_global_min_sum(bundle.problem)
    psi_start = stacked_value(bundle.problem, bundle.theta_start)
    budget = iteration_budget(
        psi_start, min_sum, net.lambda_max * lip_grad, args.grad_tol, step_bound
    )
    print(f"step_size_bound: {step_bound!r}")
    print(f"noise_variance: {variance!r}")
    print(f"curvature_tolerance: {curv_tol!r}")
    print(f"iteration_budget: {budget}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lapgd",
        description=(
            "Laplacian-weighted gradient descent for coupled resource "
            "allocation: run it, compare its noisy variant's saddle escape, "
            "and certify the results."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("config", help="YAML config with problem/network/run/init")
    p_run.add_argument(
        "--out-dir",
        default=_default_out_dir(),
        help="output directory (default: $LAPGD_OUT_DIR or ./lapgd_out)",
    )
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser(
        "compare", help="noiseless vs noisy batch on a named scenario"
    )
    p_cmp.add_argument("scenario", choices=sorted(SCENARIO_BUILDERS))
    p_cmp.add_argument("--seeds", type=int, default=20, help="run seeds 0..N-1")
    p_cmp.add_argument(
        "--scenario-seed", type=int, default=0, help="instance-generation seed"
    )
    p_cmp.add_argument("--max-iters", type=int, default=None, help="budget override")
    p_cmp.add_argument("--out-dir", default=_default_out_dir())
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="noise-level sweep on a named scenario")
    p_sweep.add_argument("scenario", choices=sorted(SCENARIO_BUILDERS))
    p_sweep.add_argument(
        "--sigmas", required=True, help="comma-separated noise levels (std dev)"
    )
    p_sweep.add_argument("--seeds", type=int, default=5, help="run seeds 0..N-1")
    p_sweep.add_argument("--scenario-seed", type=int, default=0)
    p_sweep.add_argument("--max-iters", type=int, default=None, help="budget override")
    p_sweep.add_argument("--out-dir", default=_default_out_dir())
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser(
        "check", help="certify a saved allocation against a problem config"
    )
    p_check.add_argument("config", help="YAML config with problem/network sections")
    p_check.add_argument(
        "state", help="text file of allocation values, whitespace separated"
    )
    p_check.add_argument("--eps", type=float, default=1e-6,
                         help="projected-gradient tolerance")
    p_check.add_argument("--gamma", type=float, default=1e-6,
                         help="tangent-curvature tolerance")
    p_check.set_defaults(func=cmd_check)

    p_spec = sub.add_parser("spectrum", help="spectral summary of an edge list")
    p_spec.add_argument("graph", help="edge-list file: first line m, then 'i j' lines")
    p_spec.set_defaults(func=cmd_spectrum)

    p_par = sub.add_parser(
        "params", help="step bound, noise variance, curvature tolerance, budget"
    )
    p_par.add_argument("config", help="YAML config with problem/network/init")
    p_par.add_argument(
        "--grad-tol", type=float, required=True, help="target projected-gradient accuracy"
    )
    p_par.add_argument(
        "--failure-prob",
        type=float,
        default=0.1,
        help="acceptable per-run failure probability (default 0.1)",
    )
    p_par.set_defaults(func=cmd_params)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleStartError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DisconnectedGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
