"""Command-line front end.

Subcommands: ``simulate`` (benchmark data to CSV), ``train`` (fit the
conditional generator, write checkpoint + manifest), ``evaluate``
(calibration table at true conditional quantiles), ``intervals``
(per-subject prediction intervals on a test set), ``coxph``
(proportional-hazards baseline fit/report/intervals).

Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure.
The output directory can be overridden with the GCSE_OUT_DIR
environment variable.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .coxph import CoxError, cox_survival_curve, fit_coxph, fit_report
from .estimators import (
    CensoredSample,
    censoring_classification,
    kaplan_meier,
    prediction_interval,
)
from .kernel import backend_name
from .pipeline_io import (
    CalibrationRow,
    CsvSchema,
    DataError,
    Dataset,
    IntervalRow,
    RunConfig,
    TransformRecord,
    load_csv,
    load_run_config,
    load_schema,
    log_times,
    standardize,
    write_results,
)
from .simulation import (
    SimModelSpec,
    calibration_metric,
    derive_seed,
    oracle_sampler,
    simulate,
)
from .trainer import (
    NumericalError,
    TrainConfig,
    load_train_state,
    make_sampler,
    params_checksum,
    sample_conditional,
    save_train_state,
    train,
)

_EXIT_DATA = 3
_EXIT_NUMERIC = 4


def _out_dir(requested: str) -> Path:
    override = os.environ.get("GCSE_OUT_DIR")
    path = Path(override) if override else Path(requested)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _default_schema(path: str) -> CsvSchema:
    """Schema for our own simulate output: every non-reserved column is a
    covariate."""
    import csv as _csv

    with open(path, encoding="utf-8", newline="") as fh:
        header = next(_csv.reader(fh))
    reserved = {"time", "status", "true_t", "true_c"}
    covs = [c for c in header if c not in reserved]
    return CsvSchema(time_col="time", status_col="status", covariate_cols=covs)


def _load_dataset(path: str, schema_path: str | None) -> tuple[Dataset, int]:
    schema = load_schema(schema_path) if schema_path else _default_schema(path)
    return load_csv(path, schema)


def _parse_x(tokens: list[str], dim: int) -> list[tuple[str, np.ndarray]]:
    """Covariate points from CLI tokens: a scalar replicates across all
    coordinates, a comma list gives them explicitly."""
    points = []
    for tok in tokens:
        parts = [p for p in tok.split(",") if p.strip()]
        if len(parts) == 1:
            vec = np.full(dim, float(parts[0]))
        elif len(parts) == dim:
            vec = np.array([float(p) for p in parts])
        else:
            raise DataError(f"--x {tok!r}: expected 1 or {dim} values")
        points.append((tok, vec))
    return points


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    spec = SimModelSpec(args.model, args.censoring, args.truncation)
    labeled = simulate(spec, args.n, args.seed)
    latent = (labeled.true_time, labeled.censor_time) if args.keep_latent else None
    from .pipeline_io import write_dataset_csv

    write_dataset_csv(args.out, labeled.data, latent)
    frac = float(np.mean(labeled.data.delta == 0))
    print(f"wrote {args.n} rows to {args.out} (censoring fraction {frac:.4f})")
    return 0


def cmd_train(args) -> int:
    if args.config:
        run = load_run_config(args.config)
    else:
        run = RunConfig(train=TrainConfig())
    cfg = run.train
    overrides = {
        "preset": args.preset,
        "total_generator_steps": args.steps,
        "seed": args.seed,
        "batch_size": args.batch_size,
        "lambda_gp": args.lambda_gp,
        "critic_steps": args.critic_steps,
        "lr_generator": args.lr_generator,
        "lr_discriminator": args.lr_discriminator,
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    if args.interpolate_penalty is not None:
        cfg.interpolate_penalty = args.interpolate_penalty
    dataset_path = args.dataset or run.dataset_path
    if not dataset_path:
        raise DataError("no dataset given (use --dataset or the config file)")
    schema_path = args.schema or run.schema_path
    out = _out_dir(args.out_dir or run.out_dir)

    ds, dropped = _load_dataset(dataset_path, schema_path)
    if args.standardize or run.standardize_covariates:
        ds = standardize(ds)
    else:
        ds = log_times(ds)

    state = None
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        state, saved_cfg = load_train_state(f"{args.resume}.state", ckpt.generator, ckpt.discriminator)
        saved_cfg.total_generator_steps = cfg.total_generator_steps
        cfg = saved_cfg
        state.gen, state.disc = ckpt.generator, ckpt.discriminator

    gen, disc, report, final_state = train(ds, cfg, state=state)

    ckpt_path = out / "checkpoint.txt"
    save_checkpoint(str(ckpt_path), gen, disc, cfg.preset)
    save_train_state(f"{ckpt_path}.state", final_state, cfg)
    if ds.transform is not None:
        _write_transform(out / "transform.txt", ds.transform)
    manifest = {
        **{f"train.{k}": v for k, v in asdict(cfg).items()},
        "dataset": dataset_path,
        "dataset_sha256": _sha256(dataset_path),
        "rows": ds.n,
        "covariates": ds.d,
        "rows_dropped": dropped,
        "backend": backend_name(),
        "steps_completed": report.steps_completed,
        "wall_seconds": f"{report.wall_seconds:.3f}",
        "final_critic": report.critic_values[-1] if report.critic_values else "",
        "final_penalty": report.penalty_values[-1] if report.penalty_values else "",
        "final_generator": report.generator_values[-1] if report.generator_values else "",
        "checksum": report.checksum,
    }
    lines = [f"{k} = {v}" for k, v in manifest.items()]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"trained {report.steps_completed} generator steps in {report.wall_seconds:.1f}s")
    print(f"checkpoint: {ckpt_path}")
    print(f"checksum: {report.checksum}")
    return 0


def _write_transform(path: Path, record: TransformRecord) -> None:
    lines = [
        "gcse-transform v1",
        f"logged_time {int(record.logged_time)}",
        "means " + " ".join(float(v).hex() for v in record.means),
        "sds " + " ".join(float(v).hex() for v in record.sds),
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_transform(path: str) -> TransformRecord:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "gcse-transform v1":
        raise DataError(f"{path}: not a transform file")
    logged = bool(int(lines[1].split()[1]))
    means = np.array([float.fromhex(v) for v in lines[2].split()[1:]])
    sds = np.array([float.fromhex(v) for v in lines[3].split()[1:]])
    return TransformRecord(means, sds, logged)


def cmd_evaluate(args) -> int:
    spec = SimModelSpec(args.model, args.censoring)
    levels = tuple(float(p) / 100.0 for p in args.levels.split(","))
    if args.oracle:
        sampler = oracle_sampler(spec)
    else:
        if not args.checkpoint:
            raise DataError("evaluate needs --checkpoint or --oracle")
        ckpt = load_checkpoint(args.checkpoint)
        sampler = make_sampler(ckpt.generator)
    points = _parse_x(args.x, dim=5)
    out = _out_dir(args.out_dir)
    rows: list[CalibrationRow] = []
    print(f"x\tlevel\tmean\tse\t(replicates={args.replicates}, m={args.m})")
    for label, xvec in points:
        per_rep = np.empty((args.replicates, len(levels)))
        for r in range(args.replicates):
            seed_r = derive_seed(args.seed, r)
            per_rep[r] = calibration_metric(sampler, spec, xvec, levels, args.m, seed_r)
        mean = per_rep.mean(axis=0)
        se = (
            per_rep.std(axis=0, ddof=1) / np.sqrt(args.replicates)
            if args.replicates > 1
            else [None] * len(levels)
        )
        for j, lv in enumerate(levels):
            rows.append(CalibrationRow(label, 100.0 * lv, float(mean[j]),
                                       None if se[j] is None else float(se[j])))
            se_txt = "" if se[j] is None else f"{se[j]:.3f}"
            print(f"{label}\t{100 * lv:.0f}\t{mean[j]:.2f}\t{se_txt}")
    write_results(out, calibration=rows)
    return 0


def cmd_intervals(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ds, dropped = _load_dataset(args.test_csv, args.schema)
    record = None
    if args.transform:
        record = _read_transform(args.transform)
        x = record.apply_x(ds.x)
    else:
        x = ds.x
    y_log = np.log(ds.y)
    if x.shape[1] != ckpt.generator.covariate_dim:
        raise DataError(
            f"test covariate width {x.shape[1]} != generator width "
            f"{ckpt.generator.covariate_dim}"
        )
    out = _out_dir(args.out_dir)
    rows: list[IntervalRow] = []
    n_pred_cens = 0
    for i in range(ds.n):
        seed_i = derive_seed(args.seed, i)
        ys, deltas = sample_conditional(ckpt.generator, x[i], args.m, seed_i)
        sample = CensoredSample(ys, deltas, scale="log")
        label, _ = censoring_classification(sample)
        predicted_censored = label == "censored"
        n_pred_cens += int(predicted_censored)
        curve = kaplan_meier(sample)
        lo, hi, saturated = prediction_interval(curve, args.coverage)
        rows.append(
            IntervalRow(
                id=str(i),
                predicted_censored=predicted_censored,
                lo=lo,
                hi=hi,
                hi_saturated=saturated,
                true_y=float(y_log[i]),
                true_delta=int(ds.delta[i]),
            )
        )
    uncens = [r for r in rows if r.true_delta == 1]
    covered = sum(1 for r in uncens if r.covered)
    summary = {
        "subjects": ds.n,
        "rows_dropped": dropped,
        "coverage_level": args.coverage,
        "m": args.m,
        "predicted_censored": n_pred_cens,
        "actual_censored": int(np.sum(ds.delta == 0)),
        "uncensored_subjects": len(uncens),
        "covered_uncensored": covered if uncens else "n/a",
        "coverage_rate": f"{covered / len(uncens):.4f}" if uncens else "n/a",
    }
    write_results(out, intervals=rows, summary=summary, m=args.m)
    for key, val in summary.items():
        print(f"{key} = {val}")
    return 0


def cmd_coxph(args) -> int:
    ds, dropped = _load_dataset(args.train_csv, args.schema)
    fit = fit_coxph(ds)
    out = _out_dir(args.out_dir)
    (out / "cox_fit.txt").write_text(fit_report(fit), encoding="utf-8")
    curves = {"cox_baseline_hazard": fit.baseline_hazard}
    rows = None
    if args.test_csv:
        test, _ = _load_dataset(args.test_csv, args.schema)
        rows = []
        for i in range(test.n):
            curve = cox_survival_curve(fit, test.x[i])
            lo, hi, saturated = prediction_interval(curve, args.coverage)
            rows.append(
                IntervalRow(
                    id=str(i),
                    predicted_censored=False,  # the model carries no censoring law
                    lo=float(np.log(lo)),
                    hi=float(np.log(hi)),
                    hi_saturated=saturated,
                    true_y=float(np.log(test.y[i])),
                    true_delta=int(test.delta[i]),
                )
            )
    write_results(out, curves=curves, intervals=rows)
    print(fit_report(fit), end="")
    if rows is not None:
        uncens = [r for r in rows if r.true_delta == 1]
        covered = sum(1 for r in uncens if r.covered)
        denom = f"{covered}/{len(uncens)}" if uncens else "n/a"
        print(f"covered_uncensored = {denom}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcse",
        description="Generative conditional survival estimation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"gcse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("simulate", help="write a benchmark dataset to CSV", formatter_class=fmt)
    p.add_argument("--model", required=True, choices=["M1", "M2", "M3", "M4"])
    p.add_argument("--censoring", default="independent", choices=["independent", "dependent"])
    p.add_argument("--truncation", default="condition", choices=["condition", "cap"],
                   help="dependent-censoring truncation mode")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--keep-latent", action="store_true",
                   help="also write the latent event/censoring times")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the conditional generator", formatter_class=fmt)
    p.add_argument("--config", help="run-config file (sections: data/trainer/sampling/output)")
    p.add_argument("--dataset", help="training CSV")
    p.add_argument("--schema", help="schema file for the CSV")
    p.add_argument("--preset", help="architecture preset (default M1-independent)")
    p.add_argument("--steps", type=int, help="total generator steps (default 20000)")
    p.add_argument("--seed", type=int, help="training seed (default 0)")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="minibatch size (default 256)")
    p.add_argument("--lambda-gp", dest="lambda_gp", type=float,
                   help="gradient-penalty coefficient (default 10)")
    p.add_argument("--critic-steps", dest="critic_steps", type=int,
                   help="critic updates per generator update (default 5)")
    p.add_argument("--lr-generator", dest="lr_generator", type=float,
                   help="generator learning rate (default 1e-4)")
    p.add_argument("--lr-discriminator", dest="lr_discriminator", type=float,
                   help="critic learning rate (default 1e-4)")
    p.add_argument("--interpolate-penalty", dest="interpolate_penalty",
                   action=argparse.BooleanOptionalAction, default=None,
                   help="penalty at real/generated mixtures instead of real points")
    p.add_argument("--standardize", action="store_true",
                   help="standardize covariates (times are always log-scale)")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default runs)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="calibration at true conditional quantiles",
                       formatter_class=fmt)
    p.add_argument("--checkpoint", help="trained checkpoint file")
    p.add_argument("--oracle", action="store_true",
                   help="replace the generator with the true conditional law")
    p.add_argument("--model", required=True, choices=["M1", "M2", "M3", "M4"])
    p.add_argument("--censoring", default="independent", choices=["independent", "dependent"])
    p.add_argument("--x", action="append", required=True,
                   help="covariate point; scalar replicates, or 5 comma-separated values")
    p.add_argument("--levels", default="25,50,75", help="percent survival levels")
    p.add_argument("--m", type=int, default=10_000, help="generated samples per query")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", default="runs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("intervals", help="prediction intervals on a test set",
                       formatter_class=fmt)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test-csv", dest="test_csv", required=True)
    p.add_argument("--schema", help="schema file for the CSV")
    p.add_argument("--transform", help="transform file from training (for standardized runs)")
    p.add_argument("--coverage", type=float, default=0.90)
    p.add_argument("--m", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", default="runs")
    p.set_defaults(func=cmd_intervals)

    p = sub.add_parser("coxph", help="proportional-hazards baseline", formatter_class=fmt)
    p.add_argument("--train-csv", dest="train_csv", required=True)
    p.add_argument("--schema", help="schema file for the CSVs")
    p.add_argument("--test-csv", dest="test_csv", help="optional test CSV for intervals")
    p.add_argument("--coverage", type=float, default=0.90)
    p.add_argument("--out-dir", dest="out_dir", default="runs")
    p.set_defaults(func=cmd_coxph)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_DATA
    except (NumericalError, CoxError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
