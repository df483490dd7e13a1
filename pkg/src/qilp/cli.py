"""Command-line front end.

Subcommands: ``gen`` (instances and datasets), ``infer`` (fit cost vectors),
``stability`` (bounds and shift experiments), ``online`` (batch streams),
``plot-data`` (tidy tables from experiment logs).  All outputs are
deterministic for fixed inputs, flags and seeds; wall-clock timings are
only written when ``--timings`` is passed, keeping default outputs
byte-stable.

Exit codes: 0 success, 2 usage error, 3 infeasible model, 4 limit reached.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import fileio
from ._util import default_thread_count
from .biclique import dbar_alg_exact, dbar_alg_heuristic, dtilde_alg_heuristic
from .errors import InverseInfeasibleError, IterationLimitError, QilpError
from .instances import (
    diet_instance,
    gen_noisy_data,
    gen_random_instance,
    gen_transshipment_stream,
    transshipment_instance,
)
from .inverse import (
    MqioOptions,
    QioConfig,
    facet_distance_matrix,
    feasible_facets,
    min_tau,
    solution_from_facets,
    solve_mqio,
    solve_previous_model,
)
from .online import cost_in_cone, run_online
from .polytope import facet_diameter, row_norm
from .stability import (
    ShiftExperimentConfig,
    StabilityReport,
    empirical_inverse_stability,
    forward_stability,
    forward_stability_sweep,
    forward_stability_ub,
    inverse_stability_lb,
    per_facet_stability_bounds,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qilp",
        description="Fit LP cost vectors to noisy observed decisions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate instances and datasets")
    gen_sub = gen.add_subparsers(dest="target", required=True)

    g_rand = gen_sub.add_parser("random", help="random bounded instance")
    g_rand.add_argument("--n", type=int, required=True)
    g_rand.add_argument("--m", type=int, required=True)
    g_rand.add_argument("--seed", type=int, default=0)
    g_rand.add_argument("--p", type=float, default=2.0)
    g_rand.add_argument("--out", required=True)
    g_rand.add_argument("--with-data", action="store_true")
    g_rand.add_argument("--points", type=int, default=35)
    g_rand.add_argument("--sigma", type=float, default=0.1)
    g_rand.add_argument("--outliers", type=float, default=0.0)
    g_rand.add_argument("--data-seed", type=int, default=None)
    g_rand.add_argument("--data-out", default=None)

    g_diet = gen_sub.add_parser("diet", help="nutrition case study")
    g_diet.add_argument("--out", required=True)
    g_diet.add_argument("--p", type=float, default=2.0)
    g_diet.add_argument("--literal", action="store_true")

    g_tr = gen_sub.add_parser("transshipment", help="network case study")
    g_tr.add_argument("--demand", default="0.0,0.0")
    g_tr.add_argument("--p", type=float, default=2.0)
    g_tr.add_argument("--out", required=True)

    infer = sub.add_parser("infer", help="fit cost vectors to a dataset")
    infer.add_argument("--instance", required=True)
    infer.add_argument("--data", required=True)
    infer.add_argument(
        "--method",
        choices=["mip", "dbar-exact", "dbar-heur", "dtilde-heur", "previous"],
        default="mip",
    )
    infer.add_argument("--tau", type=float, default=None)
    infer.add_argument("--auto-tau", action="store_true")
    infer.add_argument("--margin", type=float, default=0.1)
    infer.add_argument("--theta", type=float, default=0.75)
    infer.add_argument("--norm", choices=["inf", "l1"], default="inf")
    infer.add_argument("--p", type=float, default=None)
    infer.add_argument("--parallel", type=int, default=None)
    infer.add_argument("--threads", type=int, default=None)
    infer.add_argument("--iterations", type=int, default=200)
    infer.add_argument("--out", required=True)
    infer.add_argument("--matrix-out", default=None)
    infer.add_argument("--timings", action="store_true")

    stab = sub.add_parser("stability", help="stability bounds and experiments")
    stab.add_argument("--instance", required=True)
    stab.add_argument("--data", required=True)
    stab.add_argument(
        "--mode",
        choices=["inverse-lb", "inverse-empirical", "forward"],
        required=True,
    )
    stab.add_argument("--tau", type=float, default=None)
    stab.add_argument("--auto-tau", action="store_true")
    stab.add_argument("--margin", type=float, default=0.1)
    stab.add_argument("--theta", type=float, default=0.75)
    stab.add_argument("--norm", choices=["inf", "l1"], default="inf")
    stab.add_argument("--p", type=float, default=None)
    stab.add_argument("--gamma-grid", default="0.25:5.0:0.25")
    stab.add_argument("--trials", type=int, default=5)
    stab.add_argument("--seed", type=int, default=0)
    stab.add_argument("--samples", type=int, default=20)
    stab.add_argument("--h-sweep", action="store_true")
    stab.add_argument("--out", required=True)
    stab.add_argument("--log", default=None)

    onl = sub.add_parser("online", help="run the online loop on a batch stream")
    onl.add_argument("--instance", default=None)
    onl.add_argument("--stream", default=None)
    onl.add_argument("--simulate", default=None, metavar="T,SIGMA")
    onl.add_argument("--theta", type=float, default=0.75)
    onl.add_argument("--tau", type=float, default=0.05)
    onl.add_argument("--batch-size", type=int, default=3)
    onl.add_argument("--probe", type=int, default=5)
    onl.add_argument("--seed", type=int, default=0)
    onl.add_argument("--out", required=True)
    onl.add_argument("--log", default=None)

    plot = sub.add_parser("plot-data", help="tidy tables from experiment logs")
    plot.add_argument(
        "--figure", choices=["fwstab", "invstab", "diet", "online"], required=True
    )
    plot.add_argument("--in", dest="inputs", action="append", required=True)
    plot.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "infer":
            return _cmd_infer(args)
        if args.command == "stability":
            return _cmd_stability(args)
        if args.command == "online":
            return _cmd_online(args)
        if args.command == "plot-data":
            return _cmd_plot(args)
        parser.error(f"unknown command {args.command}")
    except InverseInfeasibleError as exc:
        hint = ""
        if exc.min_tau is not None:
            hint = f" (smallest feasible threshold: {exc.min_tau!r})"
        print(f"infeasible: {exc}{hint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IterationLimitError as exc:
        print(f"limit reached: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (QilpError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def console_main() -> None:
    sys.exit(main())


# ---------------------------------------------------------------------------


def _cmd_gen(args) -> int:
    if args.target == "random":
        inst = gen_random_instance(args.n, args.m, args.seed, args.p)
        rng = np.random.default_rng([args.seed, 988])
        raw = rng.normal(size=args.n)
        c_true = raw / row_norm(raw, args.p)
        meta = {"generator": "random", "seed": args.seed, "c_true": c_true.tolist()}
        fileio.save_instance(inst, args.out, meta)
        if args.with_data or args.data_out:
            data_seed = args.seed if args.data_seed is None else args.data_seed
            data = gen_noisy_data(
                inst, c_true, args.points, args.sigma, args.outliers, data_seed
            )
            fileio.save_dataset(data, args.data_out or (args.out + ".data"))
    elif args.target == "diet":
        inst, meta = diet_instance(args.p, literal=args.literal)
        fileio.save_instance(inst, args.out, dict(meta, generator="diet"))
    else:
        demand = _parse_floats(args.demand, 2, "--demand")
        inst, _, meta = transshipment_instance(demand, args.p)
        fileio.save_instance(inst, args.out, dict(meta, generator="transshipment"))
    return EXIT_OK


def _resolve_cfg(args, inst, data):
    p = args.p if args.p is not None else inst.normalization_p
    if args.auto_tau or args.tau is None:
        mt = min_tau(inst, data, args.theta, args.norm)
        tau = mt.tau_star * (1.0 + args.margin)
    else:
        tau = args.tau
    return QioConfig(tau, args.theta, args.norm, p)


def _cmd_infer(args) -> int:
    inst, _ = fileio.load_instance(args.instance)
    data = fileio.load_dataset(args.data)
    cfg = _resolve_cfg(args, inst, data)
    threads = args.threads if args.threads is not None else default_thread_count()
    started = time.monotonic()

    config_echo = {
        "instance": args.instance,
        "data": args.data,
        "method": args.method,
        "tau": cfg.tau,
        "theta": cfg.theta,
        "norm": cfg.error_norm,
        "p": cfg.normalization_p,
        "auto_tau": bool(args.auto_tau or args.tau is None),
        "margin": args.margin,
        "parallel_prefix": args.parallel,
        "iteration_limit": args.iterations,
    }
    doc = {"command": "infer", "config": config_echo}
    matrix = None

    if args.method == "previous":
        res = solve_previous_model(inst, data, cfg.error_norm)
        doc.update(
            objective=res.objective,
            facets=[res.facet],
            representative_c=res.cost.tolist(),
            per_facet_objectives=res.per_facet_objectives.tolist(),
            errors={str(k): res.errors[k].tolist() for k in range(len(data))},
            diagnostics={},
        )
    elif args.method == "mip":
        sol = solve_mqio(inst, data, cfg)
        doc.update(_solution_fields(sol))
        doc["diagnostics"] = {}
    else:
        if args.method == "dbar-exact":
            res = dbar_alg_exact(
                inst, data, cfg,
                iteration_limit=args.iterations,
                parallel_prefix=args.parallel,
                threads=threads,
            )
        elif args.method == "dbar-heur":
            res = dbar_alg_heuristic(
                inst, data, cfg, parallel_prefix=args.parallel, threads=threads
            )
        else:
            res = dtilde_alg_heuristic(inst, data, cfg)
        matrix = res.matrix
        doc["diagnostics"] = {
            "iterations": res.iterations,
            "condition_u1_held": res.condition_u1_held,
            "limit_hit": res.limit_hit,
        }
        if res.objective > 0:
            sol = solution_from_facets(inst, data, cfg, res.facet_set)
            doc.update(_solution_fields(sol))
        else:
            doc.update(objective=0, facets=[], representative_c=None)

    doc["diagnostics"]["timings"] = (
        {"wall_seconds": time.monotonic() - started} if args.timings else None
    )
    fileio.dump_json(doc, args.out)
    if args.matrix_out and matrix is not None:
        fileio.save_biadjacency(matrix, args.matrix_out, cfg.theta)
    return EXIT_OK


def _solution_fields(sol) -> dict:
    return {
        "objective": sol.objective,
        "facets": list(sol.selected_facets),
        "selected_points": list(sol.selected_points),
        "representative_c": sol.representative_c.tolist(),
        "certificate": sol.dual_certificate.tolist(),
        "cone_weights": {str(i): w for i, w in sorted(sol.cone_weights.items())},
        "errors": {str(k): sol.errors[k].tolist() for k in sol.selected_points},
    }


def _cmd_stability(args) -> int:
    inst, _ = fileio.load_instance(args.instance)
    data = fileio.load_dataset(args.data)
    cfg = _resolve_cfg(args, inst, data)
    distances = facet_distance_matrix(inst, data, cfg.error_norm, cfg.tolerances)
    report = {
        "command": "stability",
        "mode": args.mode,
        "config": {
            "instance": args.instance,
            "data": args.data,
            "tau": cfg.tau,
            "theta": cfg.theta,
            "norm": cfg.error_norm,
            "seed": args.seed,
        },
        "emptiness_criterion": "facet_sufficient",
    }
    log_rows = []
    log_header = ()

    if args.mode in ("inverse-lb", "inverse-empirical"):
        sol = solve_mqio(inst, data, cfg, distances=distances)
        bounds = per_facet_stability_bounds(
            inst, data, cfg, sol.selected_facets, distances
        )
        lb = max(bounds.values())
        report["lower_bound"] = lb
        report["per_facet_bounds"] = {str(i): v for i, v in sorted(bounds.items())}
        report["facets"] = list(sol.selected_facets)
        if args.mode == "inverse-empirical":
            grid = _parse_grid(args.gamma_grid)
            exp = ShiftExperimentConfig(
                gamma_grid=grid, rng_seed=args.seed, trials=args.trials
            )
            base, _ = feasible_facets(inst, data, cfg, distances)
            estimates = []
            log_header = ("trial", "gamma_star", "distance")
            for trial in range(args.trials):
                out = empirical_inverse_stability(
                    inst, data, cfg, exp, trial, base, distances
                )
                if out is None:
                    log_rows.append((trial, "", ""))
                else:
                    dist, gamma = out
                    estimates.append(dist)
                    log_rows.append((trial, gamma, dist))
            report["empirical_upper"] = min(estimates) if estimates else None
            report["trials"] = args.trials
            StabilityReport(
                lb, report["empirical_upper"], bounds, None
            )
    else:
        sol = solve_mqio(inst, data, cfg, distances=distances)
        fs = forward_stability(inst, data, sol.representative_c, sol.selected_points)
        rho = {i: facet_diameter(inst, i) for i in sol.selected_facets}
        ub = forward_stability_ub(inst, data, sol, rho)
        report["forward_stability"] = fs
        report["forward_stability_ub"] = ub
        report["facets"] = list(sol.selected_facets)
        if args.h_sweep:
            rows, _ = forward_stability_sweep(
                inst, data, cfg, samples=args.samples, rng_seed=args.seed
            )
            log_header = ("h", "sample", "distance")
            log_rows = rows

    fileio.dump_json(report, args.out)
    if args.log and log_rows:
        fileio.write_csv(args.log, log_header, log_rows)
    return EXIT_OK


def _cmd_online(args) -> int:
    c_true = None
    if args.simulate is not None:
        t_count, sigma = _parse_floats(args.simulate, 2, "--simulate")
        template, batches, c_true = gen_transshipment_stream(
            int(t_count), sigma, seed=args.seed,
            points_per_batch=args.batch_size, tau=args.tau,
        )
    else:
        if not args.instance or not args.stream:
            raise ValueError("online needs --simulate or both --instance and --stream")
        template, meta = fileio.load_instance(args.instance)
        batches, _ = fileio.load_stream(args.stream)
        if meta.get("c_true"):
            c_true = np.array(meta["c_true"], dtype=float)
    cfg = QioConfig(args.tau, args.theta)
    state, records = run_online(
        template, batches, cfg,
        probe_samples=args.probe, c_true=c_true, rng_seed=args.seed,
    )
    final_cone = state.current_cone
    stabilized_at = None
    for t in range(len(state.cone_history), 0, -1):
        if state.cone_history[t - 1] != final_cone:
            stabilized_at = t + 1
            break
    if stabilized_at is None:
        stabilized_at = 1
    member = (
        cost_in_cone(template, c_true, final_cone)
        if c_true is not None and final_cone
        else None
    )
    doc = {
        "command": "online",
        "config": {
            "theta": args.theta,
            "tau": args.tau,
            "probe": args.probe,
            "seed": args.seed,
            "steps": len(batches),
        },
        "final_cone": list(final_cone),
        "stabilized_at": stabilized_at,
        "c_true_in_final_cone": member,
        "infeasible_steps": list(state.infeasible_steps),
    }
    fileio.dump_json(doc, args.out)
    if args.log:
        rows = [
            (r.t, r.cone_size, r.distance, r.cum_err_true, r.cum_err_sampled)
            for r in records
        ]
        fileio.write_csv(
            args.log,
            ("t", "cone_size", "distance", "cum_err_true", "cum_err_sampled"),
            rows,
        )
    return EXIT_OK


_PLOT_SCHEMAS = {
    "fwstab": ("h", "sample", "distance"),
    "invstab": ("trial", "gamma_star", "distance"),
    "online": ("t", "cone_size", "distance", "cum_err_true", "cum_err_sampled"),
    "diet": ("food", "source", "servings"),
}


def _cmd_plot(args) -> int:
    expected = _PLOT_SCHEMAS[args.figure]
    merged = []
    for path in args.inputs:
        header, rows = fileio.read_csv(path)
        if tuple(header) != expected:
            raise ValueError(
                f"{path}: expected columns {expected}, found {tuple(header)}"
            )
        merged.extend(tuple(row) for row in rows)
    merged.sort(key=lambda row: tuple(_sort_key(v) for v in row))
    fileio.write_csv(args.out, expected, merged)
    return EXIT_OK


def _sort_key(cell: str):
    try:
        return (0, float(cell), "")
    except ValueError:
        return (1, 0.0, cell)


def _parse_floats(text: str, count: int, flag: str):
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != count:
        raise ValueError(f"{flag} expects {count} comma-separated values")
    return tuple(float(p) for p in parts)


def _parse_grid(text: str):
    lo, hi, step = (float(v) for v in text.split(":"))
    grid = []
    g = lo
    while g <= hi + 1e-12:
        grid.append(round(g, 12))
        g += step
    return tuple(grid)


if __name__ == "__main__":
    console_main()
