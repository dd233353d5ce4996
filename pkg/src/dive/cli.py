"""Command-line front end: simulate, fit, effects, benchmark, landscape.

Datasets travel as ``z,d,y`` CSV files; everything else is JSON carrying
a run manifest and validated against the schemas shipped with the
package. Exit codes: 0 success, 2 usage or parse errors, 3 the fit did
not converge, 4 an effect could not be evaluated on its grid.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from importlib import resources

import jsonschema
import numpy as np
from referencing import Registry
from referencing.jsonschema import DRAFT202012
from scipy.special import ndtr

from . import __version__
from .bench import run_benchmark, worker_count
from .bernstein import (
    LINK_KINDS,
    DegenerateCDFError,
    LinkFunction,
    ParametricCDF,
    QuantileRangeError,
)
from .criteria import KernelSpec, clamp_residuals, div_loss
from .data import IVDataset, Z_TYPES, infer_z_type
from .effects import ace, dok, dte, logit_ce, qte
from .estimator import DiveConfig, dive_fit
from .optimizer import OptimizerConfig
from .simulate import SCENARIOS, sample, sample_gaussian_linear

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_EFFECT_DOMAIN = 4

EFFECT_CHOICES = ("dte", "qte", "dok", "logitce", "ace")


class CSVFormatError(ValueError):
    """Malformed dataset CSV, with row/column diagnostics in the message."""


# ---------------------------------------------------------------------------
# manifests and schema validation

def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        moment = datetime.datetime.now(tz=datetime.timezone.utc)
    return moment.isoformat()


def build_manifest(command: str, config: dict, seed,
                   inputs: list, outputs: list) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": None if seed is None else int(seed),
        "created_at": _timestamp(),
        "version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }


def load_schema(name: str) -> dict:
    text = resources.files("dive.schemas").joinpath(name).read_text()
    return json.loads(text)


def _schema_registry() -> Registry:
    registry = Registry()
    for name in ("manifest.schema.json", "fit.schema.json", "curve.schema.json",
                 "ace.schema.json", "benchmark.schema.json"):
        schema = load_schema(name)
        registry = registry.with_resource(schema["$id"], DRAFT202012.create_resource(schema))
    return registry


_REGISTRY = _schema_registry()


def validate_payload(payload: dict, schema_name: str) -> None:
    schema = load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema, registry=_REGISTRY)
    validator.validate(payload)


def write_json(payload: dict, path: str, schema_name: str) -> None:
    validate_payload(payload, schema_name)
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


# ---------------------------------------------------------------------------
# dataset CSV format

CSV_HEADER = ["z", "d", "y"]


def write_dataset_csv(data: IVDataset, path: str) -> None:
    if data.z.ndim != 1:
        raise ValueError("the CSV schema carries a single instrument column")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for z, d, y in zip(data.z, data.d, data.y):
            writer.writerow([repr(float(z)), int(d), repr(float(y))])


def read_dataset_csv(path: str, z_type: str | None = None) -> IVDataset:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CSVFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise CSVFormatError(
                f"{path}: line 1: expected header 'z,d,y', got {','.join(header)!r}"
            )
        z, d, y = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise CSVFormatError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            for column, cell, target in zip(CSV_HEADER, row, (z, d, y)):
                try:
                    target.append(float(cell))
                except ValueError:
                    raise CSVFormatError(
                        f"{path}: line {lineno}, column {column!r}: "
                        f"could not parse {cell!r} as a number"
                    ) from None
    if not y:
        raise CSVFormatError(f"{path}: no data rows")
    d_arr = np.asarray(d)
    if not np.all(np.isin(d_arr, (0.0, 1.0))):
        bad = int(np.flatnonzero(~np.isin(d_arr, (0.0, 1.0)))[0])
        raise CSVFormatError(f"{path}: line {bad + 2}, column 'd': treatment must be 0 or 1")
    z_arr = np.asarray(z)
    if z_type is None:
        z_type = infer_z_type(z_arr)
        distinct = np.unique(z_arr).size
        print(f"info: treating z as {z_type} ({distinct} distinct values)", file=sys.stderr)
    if d_arr.min() == d_arr.max():
        raise CSVFormatError(f"{path}: both treatment arms required")
    return IVDataset(z=z_arr, d=d_arr.astype(np.int64), y=np.asarray(y), z_type=z_type)


# ---------------------------------------------------------------------------
# argparse plumbing

def _alpha_type(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _int_list(text: str):
    return [int(part) for part in text.split(",") if part]


def _float_list(text: str):
    return [float(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dive",
        description="Estimate interventional CDFs from instrumental-variable data "
                    "and derive distributional causal effects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="draw a benchmark scenario to CSV")
    p_sim.add_argument("--scenario", required=True, choices=SCENARIOS)
    p_sim.add_argument("--n", type=_positive_int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)

    p_fit = sub.add_parser("fit", help="fit the interventional CDF pair to a CSV dataset")
    p_fit.add_argument("--in", dest="in_path", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--order", type=_positive_int, default=50)
    p_fit.add_argument("--alpha", type=_alpha_type, default=0.1)
    p_fit.add_argument("--max-restarts", type=_positive_int, default=10)
    p_fit.add_argument("--nu", type=_positive_float, default=5.0)
    p_fit.add_argument("--link", choices=LINK_KINDS, default="standard-normal")
    p_fit.add_argument("--beta", choices=("sum", "max"), default="sum")
    p_fit.add_argument("--lr", type=_positive_float, default=0.1)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--z-type", choices=Z_TYPES, default=None,
                       help="kernel choice for the instrument; inferred when omitted")

    p_eff = sub.add_parser("effects", help="derive an effect curve from a fit JSON")
    p_eff.add_argument("--fit", dest="fit_path", required=True)
    p_eff.add_argument("--kind", required=True, choices=EFFECT_CHOICES)
    p_eff.add_argument("--out", required=True)
    p_eff.add_argument("--grid-min", type=float, default=None)
    p_eff.add_argument("--grid-max", type=float, default=None)
    p_eff.add_argument("--grid-points", type=_positive_int, default=201)
    p_eff.add_argument("--tau-min", type=float, default=0.05)
    p_eff.add_argument("--tau-max", type=float, default=0.95)
    p_eff.add_argument("--tau-step", type=_positive_float, default=0.01)

    p_bench = sub.add_parser("benchmark", help="replicate error benchmark over scenarios")
    p_bench.add_argument("--scenarios", type=str, default="S1-linear",
                         help="comma-separated scenario names")
    p_bench.add_argument("--n-list", type=_int_list, default=[100, 400, 1600])
    p_bench.add_argument("--replicates", type=_positive_int, default=10)
    p_bench.add_argument("--order", type=_positive_int, default=50)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True)

    p_land = sub.add_parser("landscape", help="loss surface over interventional means")
    p_land.add_argument("--mu-min", type=float, default=-4.0)
    p_land.add_argument("--mu-max", type=float, default=6.0)
    p_land.add_argument("--mu-points", type=_positive_int, default=11)
    p_land.add_argument("--lambdas", type=_float_list, default=[0.01, 0.1, 1.0])
    p_land.add_argument("--sigma", type=_positive_float, default=2.0)
    p_land.add_argument("--n", type=_positive_int, default=500)
    p_land.add_argument("--seed", type=int, default=0)
    p_land.add_argument("--out", required=True)

    return parser


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    data = sample(args.scenario, args.n, args.seed)
    write_dataset_csv(data, args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_dataset_csv(args.in_path, z_type=args.z_type)
    config = DiveConfig(
        order=args.order,
        alpha=args.alpha,
        max_restarts=args.max_restarts,
        nu=args.nu,
        link=LinkFunction(args.link),
        beta=args.beta,
        optimizer=OptimizerConfig(learning_rate=args.lr, seed=args.seed),
        seed=args.seed,
    )
    fit = dive_fit(data, config)
    manifest_config = config.to_dict()
    manifest_config["z_type"] = data.z_type
    payload = {
        "manifest": build_manifest("fit", manifest_config, args.seed,
                                   [args.in_path], [args.out]),
        **fit.to_dict(config),
    }
    write_json(payload, args.out, "fit.schema.json")
    if not fit.converged:
        print("Warning: DIVE did not converge.", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_fit_cdfs(path: str):
    with open(path) as handle:
        payload = json.load(handle)
    try:
        return (
            ParametricCDF.from_dict(payload["cdf0"]),
            ParametricCDF.from_dict(payload["cdf1"]),
        )
    except (KeyError, TypeError) as exc:
        raise CSVFormatError(f"{path}: not a fit JSON ({exc})") from None


def cmd_effects(args) -> int:
    cdf0, cdf1 = _load_fit_cdfs(args.fit_path)
    config = {
        "kind": args.kind,
        "grid_min": args.grid_min,
        "grid_max": args.grid_max,
        "grid_points": args.grid_points,
        "tau_min": args.tau_min,
        "tau_max": args.tau_max,
        "tau_step": args.tau_step,
    }
    manifest = build_manifest("effects", config, None, [args.fit_path], [args.out])

    if args.kind == "ace":
        payload = {"manifest": manifest, "kind": "ACE", "value": ace(cdf0, cdf1)}
        write_json(payload, args.out, "ace.schema.json")
        return EXIT_OK

    if args.kind == "qte":
        taus = np.arange(args.tau_min, args.tau_max + 1e-12, args.tau_step)
        curve = qte(cdf0, cdf1, taus)
    else:
        lo = cdf0.scaler.lower if args.grid_min is None else args.grid_min
        hi = cdf0.scaler.upper if args.grid_max is None else args.grid_max
        grid = np.linspace(lo, hi, args.grid_points)
        fn = {"dte": dte, "dok": dok, "logitce": logit_ce}[args.kind]
        curve = fn(cdf0, cdf1, grid)

    if args.out.endswith(".json"):
        payload = {"manifest": manifest, **curve.to_dict()}
        write_json(payload, args.out, "curve.schema.json")
    else:
        curve.write_csv(args.out)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    scenarios = [s for s in args.scenarios.split(",") if s]
    for scenario in scenarios:
        if scenario not in SCENARIOS:
            raise CSVFormatError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    config = DiveConfig(order=args.order)
    manifest_config = {
        "scenarios": scenarios,
        "n_list": args.n_list,
        "replicates": args.replicates,
        "order": args.order,
        "workers": worker_count(),
    }
    manifest = build_manifest("benchmark", manifest_config, args.seed, [], [args.out])

    def flush(rows):
        write_json({"manifest": manifest, "rows": rows}, args.out, "benchmark.schema.json")

    rows = run_benchmark(scenarios, args.n_list, args.replicates, args.seed,
                         config=config, on_progress=flush)
    flush(rows)
    return EXIT_OK


def cmd_landscape(args) -> int:
    data = sample_gaussian_linear(args.n, args.seed)
    mu_grid = np.linspace(args.mu_min, args.mu_max, args.mu_points)
    k_z = KernelSpec().resolve(data.z)
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["lambda", "mu0", "mu1", "loss"])
        for lam in args.lambdas:
            for mu0 in mu_grid:
                for mu1 in mu_grid:
                    locs = np.where(data.d == 1, mu1, mu0)
                    r = clamp_residuals(ndtr((data.y - locs) / args.sigma))
                    loss = div_loss(r, data.z, lam, "sum", KernelSpec(), k_z)
                    writer.writerow([
                        repr(float(lam)), repr(float(mu0)),
                        repr(float(mu1)), repr(float(loss)),
                    ])
    return EXIT_OK


_HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "effects": cmd_effects,
    "benchmark": cmd_benchmark,
    "landscape": cmd_landscape,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except CSVFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateCDFError, QuantileRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EFFECT_DOMAIN
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
