"""Command-line interface.

Subcommands: gen-data, run, sweep, rate, bound-check, figure1, constants,
verify, wasserstein.  Every flag can also be supplied through a TOML config
file (one section per subcommand, keys named like the long flags with
underscores); explicit command-line flags win over the file.

Exit codes: 0 success, 1 validation error or failed check, 2 chain
divergence, 3 violated bound.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .chain import ChainConfig, ChainDivergenceError, run_chain, write_samples_csv
from .constants import BudgetOverflowError, budget, compute_constants_report
from .experiments import (
    ExperimentConfig,
    bound_check,
    gen_figure1_data,
    load_figure1_data,
    rate_experiment,
    run_figure1,
    write_cells_csv,
    write_manifest,
    FIGURE1,
)
from .models import LogisticDataset, make_model, model_names
from .verify import estimate_moments, verify_assumptions
from .wasserstein import (
    EmpiricalMeasure,
    sliced_wasserstein,
    w12_functional,
    wasserstein_1d,
    wasserstein_exact,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGENCE = 2
EXIT_BOUND_VIOLATION = 3


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=model_names(), required=False)
    p.add_argument("--a-hat", type=str, default="3,-3",
                   help="comma-separated prior mode, e.g. '3,-3'")
    p.add_argument("--dim", type=int, default=1, help="dimension for gaussian/linear_mse")
    p.add_argument("--sigma-data", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--data", type=str, default=None,
                   help="CSV dataset for logreg/vi (columns z*,y)")
    p.add_argument("--data-seed", type=int, default=0,
                   help="seed for the synthetic dataset when --data is absent")


def _load_dataset(args) -> LogisticDataset:
    if args.data:
        return load_figure1_data(Path(args.data))
    return gen_figure1_data(args.data_seed)


def _build_model(args):
    if not args.model:
        raise SystemExit("error: --model is required")
    name = args.model
    if name == "gaussian":
        return make_model(name, dim=args.dim, sigma_data=args.sigma_data)
    if name == "linear_mse":
        return make_model(name, dim=args.dim)
    if name == "mixture":
        return make_model(name, a_hat=_parse_vector(args.a_hat))
    dataset = _load_dataset(args)
    if name == "logreg":
        return make_model(name, dataset=dataset, a_hat=_parse_vector(args.a_hat),
                          n_batch=args.batch_size, beta=args.beta)
    return make_model(name, dataset=dataset, a_hat=_parse_vector(args.a_hat))


def _model_params_dict(args) -> dict:
    name = args.model
    if name == "gaussian":
        return {"dim": args.dim, "sigma_data": args.sigma_data}
    if name == "linear_mse":
        return {"dim": args.dim}
    if name == "mixture":
        return {"a_hat": _parse_vector(args.a_hat)}
    dataset = _load_dataset(args)
    params = {"dataset": dataset, "a_hat": _parse_vector(args.a_hat)}
    if name == "logreg":
        params.update(n_batch=args.batch_size, beta=args.beta)
    return params


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    gen_figure1_data(args.seed, out)
    write_manifest(out.parent, out.stem, {
        "command": "gen-data", "seed": args.seed, "out": str(out),
        "spec": FIGURE1, "wall_clock_s": time.time() - t0,
    })
    print(f"wrote {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    model = _build_model(args)
    config = ChainConfig(
        lam=args.lam, beta=args.beta, n_steps=args.steps,
        burn_in=args.burn_in, thinning=args.thinning, seed=args.seed,
    )
    t0 = time.time()
    out = run_chain(config, model)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_samples_csv(out, path)
    if args.plot:
        from .plots import save_trace_plot

        save_trace_plot(out.samples, path.with_suffix(".png"))
    write_manifest(path.parent, path.stem, {
        "command": "run", "model": model.name, "seed": args.seed,
        "lam": args.lam, "beta": args.beta, "n_steps": args.steps,
        "burn_in": args.burn_in, "thinning": args.thinning,
        "warnings": out.warnings, "wall_clock_s": time.time() - t0,
    })
    print(f"wrote {path} ({out.samples.shape[0]} samples)")
    for w in out.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        model=args.model,
        model_params=_model_params_dict(args),
        lambda_grid=tuple(sorted(_parse_floats(args.lambdas))),
        n_chains=args.chains,
        beta=args.beta,
        reference=args.reference,
        metric=args.metric,
        seed=args.seed,
        mix_time=args.mix_time,
        output_dir=args.outdir,
    )


def _constants_for_model(model, args):
    moments = estimate_moments(model, n_mc=args.n_mc, seed=args.seed + 1)
    return moments, compute_constants_report(
        model.constants, moments, d=model.dim_theta, beta=args.beta, c_hat=args.c_hat
    )


def cmd_sweep(args, fit: bool = False) -> int:
    config = _experiment_config(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    ratefit = rate_experiment(config)
    write_cells_csv(ratefit.cells, outdir / "sweep_cells.csv")
    name = "rate" if fit else "sweep"
    if fit:
        (outdir / "ratefit.json").write_text(ratefit.to_json(indent=2))
        from .plots import save_rate_plot

        save_rate_plot(ratefit, outdir / "rate.png")
    write_manifest(outdir, name, {
        "command": name, "model": config.model, "seed": config.seed,
        "lambda_grid": config.lambda_grid, "n_chains": config.n_chains,
        "metric": config.metric, "reference": config.reference,
        "warnings": ratefit.warnings, "wall_clock_s": time.time() - t0,
    })
    print(f"wrote {outdir}/sweep_cells.csv")
    if fit:
        print(f"fitted exponent alpha = {ratefit.alpha:.4f} "
              f"+/- {ratefit.alpha_halfwidth:.4f}")
    for w in ratefit.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_bound_check(args) -> int:
    config = _experiment_config(args)
    model = config.build_model()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    moments, report = _constants_for_model(model, args)
    result = bound_check(config, report)
    (outdir / "bound_check.json").write_text(result.to_json(indent=2))
    (outdir / "constants.json").write_text(report.to_json(indent=2))
    from .plots import save_bound_plot

    save_bound_plot(result, outdir / "bound_check.png")
    write_manifest(outdir, "bound_check", {
        "command": "bound-check", "model": config.model, "seed": config.seed,
        "lambda_grid": config.lambda_grid, "n_chains": config.n_chains,
        "c_hat": args.c_hat, "n_mc": args.n_mc,
        "violations": result.violations, "warnings": result.warnings,
        "wall_clock_s": time.time() - t0,
    })
    print(f"wrote {outdir}/bound_check.json ({result.violations} violations)")
    if result.violations:
        print("error: a finite computed bound was violated beyond 3 MC standard "
              "errors; this indicates an implementation bug", file=sys.stderr)
        return EXIT_BOUND_VIOLATION
    return EXIT_OK


def cmd_figure1(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    if args.data:
        dataset = load_figure1_data(Path(args.data))
        data_path = Path(args.data)
    else:
        data_path = outdir / "figure1_data.csv"
        dataset = gen_figure1_data(args.seed, data_path)
    result = run_figure1(dataset, seed=args.seed + 1, outdir=outdir)
    from .plots import save_figure1_plot

    save_figure1_plot(result["samples"], result["axes"], result["density"],
                      outdir / "figure1.png")
    write_manifest(outdir, "figure1", {
        "command": "figure1", "seed": args.seed, "data": str(data_path),
        "spec": FIGURE1, "kde_integral": result["kde_integral"],
        "moment_trail_max": result["moment_trail_max"],
        "bounded": result["bounded"], "warnings": result["warnings"],
        "wall_clock_s": time.time() - t0,
    })
    print(f"wrote {outdir}/figure1_samples.csv, figure1_kde.csv, figure1.png "
          f"(kde integral {result['kde_integral']:.4f})")
    return EXIT_OK


def cmd_constants(args) -> int:
    model = _build_model(args)
    moments, report = _constants_for_model(model, args)
    text = report.to_json(indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    print()
    print(report.table())
    if args.budget_epsilon:
        for metric in ("W1", "W2"):
            try:
                res = budget(args.budget_epsilon, report, metric=metric)
                print(f"budget {metric}: lam* = {res.lam_star:.6g}, "
                      f"n* = {res.n_star}")
            except (BudgetOverflowError, ValueError) as exc:
                print(f"budget {metric}: {exc}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    model = _build_model(args)
    radius_x = args.radius_x if args.radius_x is not None else np.inf
    report = verify_assumptions(
        model,
        region_radius_theta=args.radius_theta,
        region_radius_x=radius_x,
        trials=args.trials,
        seed=args.seed,
    )
    text = report.to_json(indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    checks = [report.lipschitz_theta, report.lipschitz_x,
              report.dissipativity, report.growth_bound]
    if report.unbiasedness:
        checks.append(report.unbiasedness)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: "
              f"worst margin {c.worst_margin:.3e}")
    return EXIT_OK if report.all_passed else EXIT_VALIDATION


def cmd_wasserstein(args) -> int:
    from .chain import read_samples_csv

    _, a = read_samples_csv(args.a)
    _, b = read_samples_csv(args.b)
    mu, nu = EmpiricalMeasure(a, label=args.a), EmpiricalMeasure(b, label=args.b)
    if args.method == "exact":
        est = wasserstein_exact(mu, nu, p=args.p)
    elif args.method == "sorted1d":
        est = wasserstein_1d(mu, nu, p=args.p)
    elif args.method == "sliced":
        est = sliced_wasserstein(mu, nu, p=args.p,
                                 n_projections=args.projections, seed=args.seed)
    else:
        est = w12_functional(mu, nu)
    out = {"value": est.value, "p": est.p, "method": est.method,
           "n_projections": est.n_projections, "std_error": est.std_error,
           "n_a": mu.n, "n_b": nu.n}
    print(json.dumps(out, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly and config-file merging
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgldlab",
        description="SGLD sampling, regularity verification, explicit "
                    "constants and transport-distance experiments",
    )
    parser.add_argument("--config", type=str, default=None,
                        help="TOML file with one section per subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the synthetic logistic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default="figure1_data.csv")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="run one chain and export samples")
    _add_model_flags(p)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default="samples.csv")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_run)

    for name, fit in (("sweep", False), ("rate", True)):
        p = sub.add_parser(name, help="stepsize sweep" + (" with rate fit" if fit else ""))
        _add_model_flags(p)
        p.add_argument("--lambdas", type=str, default="0.025,0.05,0.1,0.2")
        p.add_argument("--chains", type=int, default=1024)
        p.add_argument("--metric", choices=("W1", "W2", "sliced"), default="W1")
        p.add_argument("--reference", choices=("exact_sampler", "long_run_chain"),
                       default="exact_sampler")
        p.add_argument("--mix-time", type=float, default=30.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--outdir", type=str, default=name + "_out")
        p.set_defaults(func=lambda a, fit=fit: cmd_sweep(a, fit=fit))

    p = sub.add_parser("bound-check", help="empirical vs computed bounds")
    _add_model_flags(p)
    p.add_argument("--lambdas", type=str, default="0.025,0.05,0.1,0.2")
    p.add_argument("--chains", type=int, default=512)
    p.add_argument("--metric", choices=("W1", "W2", "sliced"), default="W1")
    p.add_argument("--reference", choices=("exact_sampler", "long_run_chain"),
                   default="exact_sampler")
    p.add_argument("--mix-time", type=float, default=30.0)
    p.add_argument("--c-hat", type=float, default=1.0)
    p.add_argument("--n-mc", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", type=str, default="bound_check_out")
    p.set_defaults(func=cmd_bound_check)

    p = sub.add_parser("figure1", help="reproduce the worked posterior pipeline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--outdir", type=str, default="figure1_out")
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("constants", help="compute the full constants report")
    _add_model_flags(p)
    p.add_argument("--c-hat", type=float, default=1.0)
    p.add_argument("--n-mc", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget-epsilon", type=float, default=None)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("verify", help="check the declared model conditions")
    _add_model_flags(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--radius-theta", type=float, default=10.0)
    p.add_argument("--radius-x", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("wasserstein", help="distance between two sample CSVs")
    p.add_argument("--a", type=str, required=True)
    p.add_argument("--b", type=str, required=True)
    p.add_argument("--p", type=int, choices=(1, 2), default=2)
    p.add_argument("--method", choices=("exact", "sorted1d", "sliced", "w12"),
                   default="exact")
    p.add_argument("--projections", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_wasserstein)

    return parser


def _merge_config(argv, args, parser) -> argparse.Namespace:
    """Apply config-file values for flags the user did not set explicitly."""
    if not args.config:
        return args
    with open(args.config, "rb") as fh:
        table = tomllib.load(fh)
    section = table.get(args.command.replace("-", "_"), {})
    if not section:
        return args
    given = {a.split("=")[0].lstrip("-").replace("-", "_")
             for a in argv if a.startswith("--")}
    for key, value in section.items():
        key = key.replace("-", "_")
        if key in given or not hasattr(args, key):
            continue
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _merge_config(argv, args, parser)
    try:
        return args.func(args)
    except ChainDivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
