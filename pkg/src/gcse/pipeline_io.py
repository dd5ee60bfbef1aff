"""Data ingestion, preprocessing, and result serialization.

CSV loading with an explicit schema (no column guessing), listwise
deletion of missing values, dummy expansion of categorical covariates,
covariate standardization with an invertible transform record, seeded
train/test splitting where the test part is standardized by training
statistics only, and the flat-text writers for curves, interval tables,
and calibration tables.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .estimators import StepCurve, curve_to_text

if TYPE_CHECKING:  # avoid a module cycle; trainer imports Dataset from here
    from .trainer import TrainConfig

_MISSING = {"", "na", "nan", "null", "."}


class DataError(ValueError):
    """Malformed input data or schema."""


@dataclass(frozen=True)
class TransformRecord:
    """Invertible preprocessing state: per-column moments + time scale."""

    means: np.ndarray
    sds: np.ndarray
    logged_time: bool

    def apply_x(self, x: np.ndarray) -> np.ndarray:
        return (x - self.means) / self.sds

    def invert_x(self, x: np.ndarray) -> np.ndarray:
        return x * self.sds + self.means

    def apply_y(self, y_raw: np.ndarray) -> np.ndarray:
        return np.log(y_raw) if self.logged_time else y_raw.copy()

    def invert_y(self, y: np.ndarray) -> np.ndarray:
        return np.exp(y) if self.logged_time else y.copy()


@dataclass(frozen=True)
class Dataset:
    """Covariates, observed times, and 0/1 event indicators."""

    x: np.ndarray
    y: np.ndarray
    delta: np.ndarray
    columns: tuple[str, ...]
    time_scale: str = "raw"
    transform: TransformRecord | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        d = np.asarray(self.delta)
        if x.ndim != 2 or y.shape != (x.shape[0],) or d.shape != y.shape:
            raise DataError("inconsistent dataset shapes")
        if len(self.columns) != x.shape[1]:
            raise DataError("column names do not match covariate count")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise DataError("dataset contains non-finite values")
        if d.size and not np.isin(d, (0, 1)).all():
            raise DataError("status must be 0/1")
        if self.time_scale not in ("raw", "log"):
            raise DataError("time_scale must be 'raw' or 'log'")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", d.astype(np.int8))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass
class CsvSchema:
    """Which columns to use and how to read the status column."""

    time_col: str
    status_col: str
    covariate_cols: list[str]
    status_map: dict[str, int] = field(default_factory=lambda: {"0": 0, "1": 1})
    categorical_cols: list[str] = field(default_factory=list)


def load_schema(path: str) -> CsvSchema:
    """Read a key=value schema file.

    Keys: time_col, status_col, covariate_cols (comma separated),
    status_map (comma-separated label:0/1 pairs), categorical_cols.
    """
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key = value")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    try:
        schema = CsvSchema(
            time_col=values["time_col"],
            status_col=values["status_col"],
            covariate_cols=[c.strip() for c in values["covariate_cols"].split(",") if c.strip()],
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing schema key {exc}") from None
    if "status_map" in values:
        mapping = {}
        for pair in values["status_map"].split(","):
            label, _, code = pair.strip().rpartition(":")
            if code not in ("0", "1") or not label:
                raise DataError(f"{path}: bad status_map entry {pair.strip()!r}")
            mapping[label.strip()] = int(code)
        schema.status_map = mapping
    if "categorical_cols" in values:
        schema.categorical_cols = [
            c.strip() for c in values["categorical_cols"].split(",") if c.strip()
        ]
    return schema


def _is_missing(token: str) -> bool:
    return token.strip().lower() in _MISSING


def load_csv(path: str, schema: CsvSchema) -> tuple[Dataset, int]:
    """Load a dataset; returns (dataset, rows dropped for missing values).

    Rows missing any used column are dropped; unmappable status labels
    and nonpositive times are errors naming the offending row.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        used = [schema.time_col, schema.status_col, *schema.covariate_cols]
        for col in used:
            if col not in reader.fieldnames:
                raise DataError(f"{path}: unknown column {col!r}")
        raw_rows = []
        dropped = 0
        for rownum, row in enumerate(reader, 2):  # header is line 1
            if any(_is_missing(row[c]) for c in used):
                dropped += 1
                continue
            raw_rows.append((rownum, row))
    if not raw_rows:
        raise DataError(f"{path}: no complete rows")

    numeric_cols = [c for c in schema.covariate_cols if c not in schema.categorical_cols]
    # dummy-encode categoricals: one 0/1 column per non-reference level
    levels: dict[str, list[str]] = {}
    for col in schema.categorical_cols:
        seen = sorted({row[col].strip() for _, row in raw_rows})
        if len(seen) < 2:
            raise DataError(f"{path}: categorical column {col!r} has a single level")
        levels[col] = seen

    columns = list(numeric_cols)
    for col in schema.categorical_cols:
        columns.extend(f"{col}={lv}" for lv in levels[col][1:])

    n = len(raw_rows)
    x = np.empty((n, len(columns)))
    y = np.empty(n)
    delta = np.empty(n, dtype=np.int8)
    for i, (rownum, row) in enumerate(raw_rows):
        try:
            t = float(row[schema.time_col])
        except ValueError:
            raise DataError(f"{path}: row {rownum}: bad time {row[schema.time_col]!r}") from None
        if not t > 0.0:
            raise DataError(f"{path}: row {rownum}: nonpositive time {t}")
        y[i] = t
        status = row[schema.status_col].strip()
        if status not in schema.status_map:
            raise DataError(f"{path}: row {rownum}: unmappable status {status!r}")
        delta[i] = schema.status_map[status]
        j = 0
        for col in numeric_cols:
            try:
                x[i, j] = float(row[col])
            except ValueError:
                raise DataError(f"{path}: row {rownum}: bad value in {col!r}") from None
            j += 1
        for col in schema.categorical_cols:
            val = row[col].strip()
            for lv in levels[col][1:]:
                x[i, j] = 1.0 if val == lv else 0.0
                j += 1
    return Dataset(x, y, delta, tuple(columns), time_scale="raw"), dropped


def standardize(ds: Dataset) -> Dataset:
    """Zero-mean/unit-sd covariates (sd with n-1 denominator), log times."""
    if ds.transform is not None:
        raise DataError("dataset is already standardized")
    if ds.n < 2:
        raise DataError("standardization needs at least 2 rows")
    means = ds.x.mean(axis=0)
    sds = ds.x.std(axis=0, ddof=1)
    for j, s in enumerate(sds):
        if not s > 0.0:
            raise DataError(f"zero-variance column {ds.columns[j]!r}")
    logged = ds.time_scale == "raw"
    record = TransformRecord(means, sds, logged)
    return Dataset(
        record.apply_x(ds.x),
        record.apply_y(ds.y) if logged else ds.y,
        ds.delta,
        ds.columns,
        time_scale="log",
        transform=record,
    )


def log_times(ds: Dataset) -> Dataset:
    """Log-transform times only (covariates untouched, no record)."""
    if ds.time_scale == "log":
        return ds
    return replace(ds, y=np.log(ds.y), time_scale="log")


def _subset(ds: Dataset, idx: np.ndarray) -> Dataset:
    return replace(ds, x=ds.x[idx], y=ds.y[idx], delta=ds.delta[idx])


def split(
    ds: Dataset, test_fraction: float, seed: int, standardize_parts: bool = True
) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-split; test part standardized by training statistics.

    With ``standardize_parts`` (the default) both parts come back
    log-timed and covariate-standardized, sharing the transform record
    fitted on the training rows alone. A pre-standardized dataset is
    just partitioned.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must be in (0, 1)")
    n_test = int(ds.n * test_fraction + 0.5)
    if n_test == 0 or n_test == ds.n:
        raise DataError(f"test_fraction {test_fraction} yields an empty part")
    perm = np.random.default_rng(seed).permutation(ds.n)
    test_raw = _subset(ds, np.sort(perm[:n_test]))
    train_raw = _subset(ds, np.sort(perm[n_test:]))
    if not standardize_parts or ds.transform is not None:
        return train_raw, test_raw
    train = standardize(train_raw)
    record = train.transform
    test = Dataset(
        record.apply_x(test_raw.x),
        record.apply_y(test_raw.y),
        test_raw.delta,
        test_raw.columns,
        time_scale="log",
        transform=record,
    )
    return train, test


# ---------------------------------------------------------------------------
# dataset CSV output (simulate command) and result writers


def _fmt(v: float) -> str:
    return repr(float(v))


def write_dataset_csv(
    path: str,
    ds: Dataset,
    latent: tuple[np.ndarray, np.ndarray] | None = None,
) -> None:
    """Write covariates + raw-scale time + status (+ optional latent truths)."""
    y_raw = np.exp(ds.y) if ds.time_scale == "log" else ds.y
    header = [*ds.columns, "time", "status"]
    if latent is not None:
        header += ["true_t", "true_c"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [_fmt(v) for v in ds.x[i]] + [_fmt(y_raw[i]), str(int(ds.delta[i]))]
            if latent is not None:
                row += [_fmt(latent[0][i]), _fmt(latent[1][i])]
            writer.writerow(row)


@dataclass
class IntervalRow:
    """One subject's prediction-interval record."""

    id: str
    predicted_censored: bool
    lo: float
    hi: float
    hi_saturated: bool
    true_y: float
    true_delta: int

    @property
    def covered(self) -> bool | None:
        """Interval coverage of the true time; None for censored subjects."""
        if self.true_delta == 0:
            return None
        return bool(self.lo <= self.true_y <= self.hi)


def write_intervals_csv(path: str, rows: list[IntervalRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "predicted_censored", "lo", "hi", "hi_saturated", "true_y", "true_delta", "covered"]
        )
        for r in rows:
            covered = "" if r.covered is None else str(int(r.covered))
            writer.writerow(
                [
                    r.id,
                    str(int(r.predicted_censored)),
                    _fmt(r.lo),
                    _fmt(r.hi),
                    str(int(r.hi_saturated)),
                    _fmt(r.true_y),
                    str(int(r.true_delta)),
                    covered,
                ]
            )


@dataclass
class CalibrationRow:
    x_label: str
    level: float
    mean: float
    se: float | None


def write_calibration_csv(path: str, rows: list[CalibrationRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "level", "mean", "se"])
        for r in rows:
            writer.writerow(
                [r.x_label, _fmt(r.level), _fmt(r.mean), "" if r.se is None else _fmt(r.se)]
            )


def read_calibration_csv(path: str) -> list[CalibrationRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                CalibrationRow(
                    rec["x"],
                    float(rec["level"]),
                    float(rec["mean"]),
                    None if rec["se"] == "" else float(rec["se"]),
                )
            )
    return rows


def write_results(
    out_dir,
    curves: dict[str, StepCurve] | None = None,
    intervals: list[IntervalRow] | None = None,
    calibration: list[CalibrationRow] | None = None,
    summary: dict[str, object] | None = None,
    m: int | None = None,
) -> list[str]:
    """Write all provided artifacts under out_dir; returns written paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if curves:
        cdir = out / "curves"
        cdir.mkdir(exist_ok=True)
        for name, curve in sorted(curves.items()):
            p = cdir / f"{name}.txt"
            p.write_text(curve_to_text(curve, m=m), encoding="utf-8")
            written.append(str(p))
    if intervals is not None:
        p = out / "intervals.csv"
        write_intervals_csv(str(p), intervals)
        written.append(str(p))
    if calibration is not None:
        p = out / "calibration.csv"
        write_calibration_csv(str(p), calibration)
        written.append(str(p))
    if summary is not None:
        p = out / "summary.txt"
        lines = [f"{k} = {v}" for k, v in summary.items()]
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(str(p))
    return written


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Everything one training/evaluation run needs, file-overridable."""

    train: "TrainConfig"
    dataset_path: str | None = None
    schema_path: str | None = None
    out_dir: str = "runs"
    m: int = 10_000
    coverage: float = 0.90
    standardize_covariates: bool = False

    def __post_init__(self):
        if not 0.0 < self.coverage < 1.0:
            raise DataError("coverage must be in (0, 1)")


def load_run_config(path: str) -> RunConfig:
    """Parse the sectioned key=value run-config file.

    Sections: [data] (dataset, schema, standardize_covariates), [trainer]
    (any TrainConfig field), [sampling] (m, coverage), [output] (dir).
    Unknown keys are errors so typos do not silently fall back to
    defaults.
    """
    from .trainer import TrainConfig

    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise DataError(f"cannot read config {path!r}")
    known = {"data", "trainer", "sampling", "output"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise DataError(f"{path}: unknown config sections {sorted(unknown)}")

    tkwargs = {}
    if parser.has_section("trainer"):
        valid = set(TrainConfig.__dataclass_fields__)
        for key, val in parser.items("trainer"):
            if key not in valid:
                raise DataError(f"{path}: unknown trainer option {key!r}")
            ftype = TrainConfig.__dataclass_fields__[key].type
            if ftype == "bool":
                tkwargs[key] = val.strip().lower() in ("1", "true", "yes", "on")
            elif ftype == "int":
                tkwargs[key] = int(val)
            elif ftype == "float":
                tkwargs[key] = float(val)
            else:
                tkwargs[key] = val.strip()
    cfg = RunConfig(train=TrainConfig(**tkwargs))
    if parser.has_section("data"):
        for key, val in parser.items("data"):
            if key == "dataset":
                cfg.dataset_path = val.strip()
            elif key == "schema":
                cfg.schema_path = val.strip()
            elif key == "standardize_covariates":
                cfg.standardize_covariates = val.strip().lower() in ("1", "true", "yes", "on")
            else:
                raise DataError(f"{path}: unknown data option {key!r}")
    if parser.has_section("sampling"):
        for key, val in parser.items("sampling"):
            if key == "m":
                cfg.m = int(val)
            elif key == "coverage":
                cfg.coverage = float(val)
            else:
                raise DataError(f"{path}: unknown sampling option {key!r}")
    if parser.has_section("output"):
        for key, val in parser.items("output"):
            if key == "dir":
                cfg.out_dir = val.strip()
            else:
                raise DataError(f"{path}: unknown output option {key!r}")
    return cfg
