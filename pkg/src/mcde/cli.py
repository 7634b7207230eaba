"""Command-line interface: fit, generate, impute, corrupt, evaluate, oracle-check.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric failure.
Every subcommand is deterministic under a fixed --seed; all randomness flows
through named substreams of that one seed. JSON outputs use stable key order.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import checkpoint as ckpt
from .dataset import ColumnKind, Table, load_csv, load_schema, write_csv
from .discretize import fit_column_cdfs, uniform_grid
from .errors import ConfigError, DataError, McdeError, NumericError
from .generate import SynthesisConfig, multiple_impute, rubin_evaluate, synthesize
from .masking import (
    corrupt_mar,
    corrupt_mcar,
    corrupt_mnar_logistic,
    corrupt_mnar_quantile,
)
from .metrics import MetricsReport, dcr, gof, kl_marginal, mmd, utility_proxy, wasserstein1
from .model import ModelConfig, train
from .rng import substream

_CONFIG_FILE_KEYS = {"train_csv", "schema", "checkpoint_out", "seed"}


def _load_fit_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    model_keys = set(ModelConfig().to_json())
    unknown = set(raw) - _CONFIG_FILE_KEYS - model_keys
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("train_csv", "schema", "checkpoint_out"):
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")
    return raw


def cmd_fit(args: argparse.Namespace) -> int:
    raw = _load_fit_config(args.config)
    if args.epochs is not None:
        raw["epochs"] = args.epochs
    if args.seed is not None:
        raw["seed"] = args.seed
    out_path = args.out or raw["checkpoint_out"]
    seed = int(raw.get("seed", 0))
    config = ModelConfig.from_json({k: v for k, v in raw.items() if k not in _CONFIG_FILE_KEYS})
    schema = load_schema(raw["schema"])
    table = load_csv(raw["train_csv"], schema)
    grid = uniform_grid(config.n_bins)
    cdfs = fit_column_cdfs(table)
    params, losses = train(table, config, grid, cdfs, seed)
    for epoch, loss in enumerate(losses):
        print(json.dumps({"epoch": epoch, "loss": loss}, sort_keys=True), file=sys.stderr)
    ckpt.save(ckpt.Checkpoint(schema, config, grid, cdfs, params, seed), out_path)
    print(out_path)
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    ck = ckpt.load(args.checkpoint)
    cfg = SynthesisConfig(n_samples=args.n, temperature=args.temperature, seed=args.seed)
    table = synthesize(ck.params, ck.schema, ck.cdfs, ck.grid, cfg)
    write_csv(table, args.out)
    return 0


def cmd_impute(args: argparse.Namespace) -> int:
    ck = ckpt.load(args.checkpoint)
    corrupted = load_csv(args.data, ck.schema)
    pool = multiple_impute(
        ck.params, ck.schema, ck.cdfs, ck.grid, corrupted,
        M=args.M, temperature=args.temperature, seed=args.seed,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    for m, table in enumerate(pool.tables):
        write_csv(table, os.path.join(args.out_dir, f"imputed_{m:03d}.csv"))
    if args.complete is not None:
        complete = load_csv(args.complete, ck.schema)
        if complete.n != corrupted.n:
            raise DataError("ground-truth table size differs from the corrupted table")
        report = {}
        for j, col in enumerate(ck.schema):
            if col.kind is ColumnKind.CONTINUOUS:
                res = rubin_evaluate(pool, complete, j)
                report[col.name] = {
                    "bias": res.bias,
                    "covered": res.covered,
                    "width": res.width,
                }
        out = json.dumps(report, sort_keys=True, indent=2)
        with open(os.path.join(args.out_dir, "rubin.json"), "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
        print(out)
    return 0


def cmd_corrupt(args: argparse.Namespace) -> int:
    schema = load_schema(args.schema)
    table = load_csv(args.data, schema)
    rng = substream(args.seed, "corrupt")
    if args.rate == 0.0:
        out = table
    elif args.mechanism == "mcar":
        out = corrupt_mcar(table, args.rate, rng)
    elif args.mechanism == "mar":
        out = corrupt_mar(table, args.rate, _anchors(args, table), rng)
    elif args.mechanism == "mnarl":
        out = corrupt_mnar_logistic(table, args.rate, _anchors(args, table), rng)
    elif args.mechanism == "mnarq":
        out = corrupt_mnar_quantile(table, args.rate, args.quantile, args.subset_fraction, rng)
    else:  # argparse choices make this unreachable
        raise ConfigError(f"unknown mechanism {args.mechanism!r}")
    write_csv(out, args.out)
    return 0


def _anchors(args: argparse.Namespace, table: Table) -> int:
    return args.n_anchor if args.n_anchor is not None else max(1, math.ceil(table.p / 3))


def cmd_evaluate(args: argparse.Namespace) -> int:
    schema = load_schema(args.schema)
    real = load_csv(args.real, schema)
    synth = load_csv(args.synth, schema)
    report = MetricsReport()
    report.kl = kl_marginal(real, synth)
    report.gof_ks, report.gof_chi2 = gof(real, synth)
    report.mmd = mmd(real, synth)
    report.wd = wasserstein1(real, synth)
    if any(c.kind is ColumnKind.CONTINUOUS for c in schema):
        report.dcr = dcr(real, synth)
    if args.test is not None:
        if args.target is None:
            raise ConfigError("--target is required with --test")
        test = load_csv(args.test, schema)
        names = [c.name for c in schema]
        if args.target not in names:
            raise ConfigError(f"--target {args.target!r} is not a schema column")
        j = names.index(args.target)
        value = utility_proxy(real, synth, test, j)
        if schema[j].kind is ColumnKind.CONTINUOUS:
            report.smape = value
        else:
            report.f1_macro = value
    out = json.dumps(report.to_json(), sort_keys=True, indent=2)
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    else:
        print(out)
    return 0


def cmd_oracle_check(args: argparse.Namespace) -> int:
    from . import oracle as orc
    from .discretize import uniform_grid as ug

    rng = np.random.default_rng(0)
    rows: list[tuple[str, bool, str]] = []

    def check(name: str, fn) -> None:
        try:
            detail = fn()
            rows.append((name, True, detail or ""))
        except Exception as err:  # failures land in the table, not a traceback
            rows.append((name, False, str(err)))

    def tv_axioms():
        for _ in range(200):
            a, b, c = (rng.dirichlet(np.ones(5)) for _ in range(3))
            assert abs(orc.tv(a, b) - orc.tv(b, a)) < 1e-12
            assert orc.tv(a, a) < 1e-12
            assert orc.tv(a, c) <= orc.tv(a, b) + orc.tv(b, c) + 1e-12
        return "200 random simplex triples"

    def chain_rule():
        import itertools

        probs = rng.dirichlet(np.ones(12)).reshape(2, 3, 2)
        joint = orc.DiscreteJoint(probs)
        for perm in itertools.permutations(range(3)):
            for cell in np.ndindex(*joint.levels):
                prob = 1.0
                cond: dict[int, int] = {}
                for col in perm:
                    vec = orc.exact_conditional(joint, col, cond)
                    prob *= vec[cell[col]]
                    cond[col] = cell[col] + 1
                assert abs(prob - joint.probs[cell]) < 1e-12
        return "all 6 factorizations of a random 2x3x2 joint"

    def histogram_normalizes():
        grid = ug(7)
        pi = rng.dirichlet(np.ones(7))
        total = sum(
            orc.histogram_estimate(pi, grid, 0.5 * (grid.cuts[l] + grid.cuts[l + 1]))
            * (grid.cuts[l + 1] - grid.cuts[l])
            for l in range(7)
        )
        assert abs(total - 1.0) < 1e-9
        return "piecewise-constant density integrates to 1"

    def sine_bound():
        density = lambda u: 1.0 + 0.5 * np.sin(2 * np.pi * u)
        tvs = {}
        for L in (5, 10, 25, 50):
            grid = ug(L)
            measured, bound = orc.check_histogram_tv_bound(
                density, np.pi, grid, orc.bin_masses(density, grid)
            )
            assert measured <= bound + 1e-7
            tvs[L] = measured
        assert tvs[50] <= 0.25 * tvs[10] * 1.1
        return f"TV(L=10)={tvs[10]:.4g}, TV(L=50)={tvs[50]:.4g}"

    def triangular_bound():
        density = lambda u: 2.0 * u
        grid = ug(50)
        measured, bound = orc.check_histogram_tv_bound(
            density, 2.0, grid, orc.bin_masses(density, grid)
        )
        assert measured <= min(bound, 0.02)
        return f"TV={measured:.4g} <= {bound:.4g}"

    def constant_density():
        grid = ug(10)
        measured, bound = orc.check_histogram_tv_bound(
            lambda u: 1.0, 0.0, grid, orc.bin_masses(lambda u: 1.0, grid)
        )
        assert measured <= 1e-9 and bound == 0.0
        return "flat density is represented exactly"

    check("tv-metric-axioms", tv_axioms)
    check("conditional-chain-rule", chain_rule)
    check("histogram-normalization", histogram_normalizes)
    check("lipschitz-tv-bound-sine", sine_bound)
    check("lipschitz-tv-bound-triangular", triangular_bound)
    check("lipschitz-tv-bound-constant", constant_density)

    width = max(len(name) for name, _, _ in rows)
    ok = True
    for name, passed, detail in rows:
        status = "PASS" if passed else "FAIL"
        ok &= passed
        print(f"{name:<{width}}  {status}  {detail}")
    return 0 if ok else 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcde",
        description="Masked conditional density estimation for mixed-type tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model from a JSON config")
    p.add_argument("--config", required=True, help="path to the fit config JSON")
    p.add_argument("--epochs", type=int, default=None, help="override config epochs")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", default=None, help="override checkpoint output path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("generate", help="sample synthetic rows from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("impute", help="complete a CSV with missing cells M times")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="corrupted CSV")
    p.add_argument("-M", type=int, default=10, help="number of imputations")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--complete", default=None, help="ground-truth CSV for pooled inference")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("corrupt", help="inject missingness into a complete CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--mechanism", required=True, choices=("mcar", "mar", "mnarl", "mnarq"))
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-anchor", type=int, default=None, help="mar/mnarl anchors (default ceil(p/3))")
    p.add_argument("--quantile", type=float, default=0.25, help="mnarq tail quantile")
    p.add_argument("--subset-fraction", type=float, default=1.0, help="mnarq column fraction")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("evaluate", help="fidelity/privacy metrics for a synthetic CSV")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--test", default=None, help="held-out CSV for the utility proxy")
    p.add_argument("--target", default=None, help="target column for the utility proxy")
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle-check", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"missing file: {err.filename}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as err:
        print(f"invalid JSON: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 4
    except (DataError, McdeError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
