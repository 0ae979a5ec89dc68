"""Measurement ingest, aggregation, fusion, cleaning, and synthetic campaigns.

The pipeline turns raw multi-sensor streams into an hourly calibration
dataset:

1. ingest raw rows (``timestamp_iso8601,sensor_id,quantity,value``),
2. aggregate each (sensor, quantity) stream to minute or hour means,
3. fuse the per-sensor hourly series into one median series per quantity,
4. align the fused features against the hourly reference instrument,
   interpolating short feature gaps (at most two consecutive hours) and
   dropping hours that cannot be repaired,
5. scale features/targets with a [-1, +1] range map fitted on training
   rows only, window the rows, and split chronologically.

A deterministic synthetic campaign generator emits the same CSV schemas,
so every downstream stage can be exercised without the field recordings.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DataError

HOUR = 3600
MINUTE = 60

QUANTITIES = ("pm25", "temp", "hum", "press")
FEATURE_COLUMNS = QUANTITIES  # cached-dataset column order
DATASET_HEADER = ("timestamp", "pm25", "temp", "hum", "press", "ref_pm25")
RAW_HEADER = ("timestamp_iso8601", "sensor_id", "quantity", "value")
REFERENCE_HEADER = ("timestamp_iso8601", "pm25_ug_m3")
PREDICTIONS_HEADER = ("timestamp", "raw_pm25", "calibrated_pm25", "reference_pm25")

GRANULARITIES = {"minute": MINUTE, "hour": HOUR}


def parse_timestamp(text: str) -> int:
    """ISO-8601 (UTC assumed when unzoned) to epoch seconds."""
    raw = text.strip()
    try:
        stamp = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise DataError(f"bad timestamp {text!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def format_timestamp(seconds: int) -> str:
    return (
        datetime.fromtimestamp(int(seconds), tz=timezone.utc)
        .isoformat()
        .replace("+00:00", "Z")
    )


@dataclass(frozen=True)
class RawSample:
    timestamp: int  # epoch seconds, UTC
    sensor_id: str
    quantity: str
    value: float


@dataclass
class IngestResult:
    samples: list[RawSample]
    malformed: int


@dataclass(frozen=True)
class Series:
    """A time-indexed value series; timestamps strictly increasing."""

    timestamps: np.ndarray  # int64 epoch seconds
    values: np.ndarray  # float64

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise ConfigurationError("series timestamps/values shapes disagree")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ConfigurationError("series timestamps must strictly increase")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.timestamps.size)


@dataclass(frozen=True)
class CalibrationDataset:
    """Hour-aligned features and reference target for calibration models."""

    timestamps: np.ndarray  # int64, strictly increasing, on the hour grid
    feature_names: tuple[str, ...]
    features: np.ndarray  # [n_hours, n_features]
    target: np.ndarray  # [n_hours] reference PM2.5

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.int64)
        feats = np.asarray(self.features, dtype=float)
        target = np.asarray(self.target, dtype=float)
        if feats.ndim != 2 or feats.shape != (ts.size, len(self.feature_names)):
            raise ConfigurationError("feature matrix shape disagrees with names/rows")
        if target.shape != (ts.size,):
            raise ConfigurationError("target length disagrees with timestamps")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ConfigurationError("dataset timestamps must strictly increase")
        if np.any(ts % HOUR != 0):
            raise ConfigurationError("dataset timestamps must lie on the hour grid")
        if not (np.all(np.isfinite(feats)) and np.all(np.isfinite(target))):
            raise DataError("dataset contains non-finite entries")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "target", target)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def subset(self, indices: Sequence[int]) -> "CalibrationDataset":
        idx = np.asarray(indices, dtype=int)
        return CalibrationDataset(
            self.timestamps[idx],
            self.feature_names,
            self.features[idx],
            self.target[idx],
        )

    def select_features(self, names: Sequence[str]) -> "CalibrationDataset":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise ConfigurationError(f"dataset lacks features {missing}")
        cols = [self.feature_names.index(n) for n in names]
        return CalibrationDataset(
            self.timestamps, tuple(names), self.features[:, cols], self.target
        )


# ---------------------------------------------------------------------------
# ingest


def _read_csv_rows(path: Path, expected_header: tuple[str, ...]) -> Iterable[list[str]]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    if [h.strip() for h in header] != list(expected_header):
        raise DataError(
            f"{path}: expected header {','.join(expected_header)!r}, "
            f"got {','.join(header)!r}"
        )
    return list(reader)


def ingest(paths: Sequence[str | Path]) -> IngestResult:
    """Parse raw sample CSVs; malformed rows are counted, never silently lost."""
    samples: list[RawSample] = []
    malformed = 0
    for path in paths:
        for row in _read_csv_rows(Path(path), RAW_HEADER):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                malformed += 1
                continue
            stamp_text, sensor_id, quantity, value_text = (c.strip() for c in row)
            try:
                stamp = parse_timestamp(stamp_text)
                value = float(value_text)
            except (DataError, ValueError):
                malformed += 1
                continue
            if quantity not in QUANTITIES or not sensor_id or not math.isfinite(value):
                malformed += 1
                continue
            samples.append(RawSample(stamp, sensor_id, quantity, value))
    return IngestResult(samples=samples, malformed=malformed)


def load_reference(path: str | Path) -> Series:
    """Load the hourly reference-instrument CSV."""
    stamps: list[int] = []
    values: list[float] = []
    for row in _read_csv_rows(Path(path), REFERENCE_HEADER):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise DataError(f"{path}: reference row needs 2 columns, got {row}")
        stamps.append(parse_timestamp(row[0]))
        values.append(float(row[1]))
    order = np.argsort(stamps, kind="stable")
    ts = np.asarray(stamps, dtype=np.int64)[order]
    if np.any(ts % HOUR != 0):
        raise DataError(f"{path}: reference timestamps must be on the hour")
    return Series(ts, np.asarray(values, dtype=float)[order])


# ---------------------------------------------------------------------------
# aggregation and fusion


def aggregate(
    samples: Sequence[RawSample], granularity: str = "hour"
) -> dict[tuple[str, str], Series]:
    """Mean of raw samples per (sensor, quantity) time bucket."""
    if granularity not in GRANULARITIES:
        raise ConfigurationError(
            f"granularity must be one of {tuple(GRANULARITIES)}, got {granularity!r}"
        )
    width = GRANULARITIES[granularity]
    # cell = [running sum, count, first value, all-equal flag]; the flag lets a
    # constant bucket average to exactly that constant instead of sum/count
    sums: dict[tuple[str, str], dict[int, list]] = {}
    for s in samples:
        bucket = (s.timestamp // width) * width
        acc = sums.setdefault((s.sensor_id, s.quantity), {})
        cell = acc.setdefault(bucket, [0.0, 0, s.value, True])
        if cell[3] and s.value != cell[2]:
            cell[3] = False
        cell[0] += s.value
        cell[1] += 1
    out = {}
    for key, acc in sums.items():
        buckets = np.array(sorted(acc), dtype=np.int64)
        means = np.array(
            [acc[b][2] if acc[b][3] else acc[b][0] / acc[b][1] for b in buckets]
        )
        out[key] = Series(buckets, means)
    return out


def median_fuse(series_by_sensor: dict[str, Series]) -> Series:
    """Per-bucket median over the sensors that reported that bucket."""
    if not series_by_sensor:
        raise ConfigurationError("median fusion needs at least one sensor series")
    collected: dict[int, list[float]] = {}
    for series in series_by_sensor.values():
        for t, v in zip(series.timestamps, series.values):
            collected.setdefault(int(t), []).append(float(v))
    buckets = np.array(sorted(collected), dtype=np.int64)
    values = np.array([float(np.median(collected[int(b)])) for b in buckets])
    return Series(buckets, values)


def fuse_by_quantity(
    aggregated: dict[tuple[str, str], Series]
) -> dict[str, Series]:
    """Group aggregated streams by quantity and median-fuse across sensors."""
    grouped: dict[str, dict[str, Series]] = {}
    for (sensor_id, quantity), series in aggregated.items():
        grouped.setdefault(quantity, {})[sensor_id] = series
    return {q: median_fuse(by_sensor) for q, by_sensor in grouped.items()}


# ---------------------------------------------------------------------------
# alignment and cleaning


@dataclass
class CleanReport:
    n_hours: int
    interpolated_cells: int
    dropped_rows: int


MAX_GAP_HOURS = 2


def _interpolate_short_gaps(values: np.ndarray, max_gap: int) -> tuple[np.ndarray, int]:
    """Linearly fill NaN runs of length <= max_gap that are bounded by data."""
    out = values.copy()
    filled = 0
    n = out.size
    i = 0
    while i < n:
        if not np.isnan(out[i]):
            i += 1
            continue
        j = i
        while j < n and np.isnan(out[j]):
            j += 1
        run = j - i
        if run <= max_gap and i > 0 and j < n:
            left, right = out[i - 1], out[j]
            for k in range(run):
                out[i + k] = left + (right - left) * (k + 1) / (run + 1)
            filled += run
        i = j
    return out, filled


def align_and_clean(
    features: dict[str, Series], reference: Series
) -> tuple[CalibrationDataset, CleanReport]:
    """Inner-join fused hourly features with the reference grid and repair gaps.

    Hours without a reference value never enter the grid.  Feature gaps of
    up to two consecutive reference hours are linearly interpolated; rows
    whose features cannot be repaired are dropped.
    """
    if "pm25" not in features:
        raise ConfigurationError("aligned features require a 'pm25' series")
    if len(reference) == 0:
        raise DataError("reference series is empty")
    grid = reference.timestamps
    names = tuple(q for q in FEATURE_COLUMNS if q in features)
    matrix = np.full((grid.size, len(names)), np.nan)
    interpolated = 0
    for col, name in enumerate(names):
        series = features[name]
        lookup = {int(t): v for t, v in zip(series.timestamps, series.values)}
        column = np.array([lookup.get(int(t), np.nan) for t in grid])
        column, filled = _interpolate_short_gaps(column, MAX_GAP_HOURS)
        interpolated += filled
        matrix[:, col] = column
    keep = ~np.isnan(matrix).any(axis=1)
    dropped = int(np.sum(~keep))
    if not np.any(keep):
        raise DataError("no hours with complete features remain after cleaning")
    dataset = CalibrationDataset(
        grid[keep], names, matrix[keep], reference.values[keep]
    )
    report = CleanReport(
        n_hours=len(dataset), interpolated_cells=interpolated, dropped_rows=dropped
    )
    return dataset, report


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class RangeScaler:
    """Per-column affine map onto [-1, +1], fitted on training data only."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.minimum, dtype=float))
        hi = np.atleast_1d(np.asarray(self.maximum, dtype=float))
        if lo.shape != hi.shape:
            raise ConfigurationError("scaler bounds shapes disagree")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    @property
    def halfspan(self) -> np.ndarray:
        return 0.5 * (self.maximum - self.minimum)


def fit_scaler(
    values: np.ndarray, names: Optional[Sequence[str]] = None
) -> RangeScaler:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.size == 0:
        raise ConfigurationError("cannot fit a scaler on empty data")
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    degenerate = np.nonzero(hi <= lo)[0]
    if degenerate.size:
        col = int(degenerate[0])
        label = names[col] if names is not None else f"column {col}"
        raise ConfigurationError(
            f"cannot scale constant feature {label!r} (min == max == {lo[col]})"
        )
    return RangeScaler(lo, hi)


def apply_scaler(scaler: RangeScaler, values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return (arr - scaler.minimum) / (scaler.maximum - scaler.minimum) * 2.0 - 1.0


def invert_scaler(scaler: RangeScaler, values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return (arr + 1.0) / 2.0 * (scaler.maximum - scaler.minimum) + scaler.minimum


def identity_scaler(n_columns: int = 1) -> RangeScaler:
    """Maps [-1, 1] to itself; useful for already-normalised data."""
    return RangeScaler(-np.ones(n_columns), np.ones(n_columns))


# ---------------------------------------------------------------------------
# windows and splits


def make_windows(
    dataset: CalibrationDataset, window: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sliding windows over contiguous hourly runs only.

    Returns ``(x [n, window, n_features], y [n], end_timestamps [n])`` where
    the target is the reference value at each window's final hour.  Any gap
    in the hourly grid splits runs; no window crosses a gap.
    """
    if window < 1:
        raise ConfigurationError("window length must be at least 1")
    xs, ys, ends = [], [], []
    n = len(dataset)
    run_start = 0
    for i in range(1, n + 1):
        contiguous = i < n and dataset.timestamps[i] - dataset.timestamps[i - 1] == HOUR
        if contiguous:
            continue
        run = slice(run_start, i)
        feats = dataset.features[run]
        targs = dataset.target[run]
        stamps = dataset.timestamps[run]
        for end in range(window - 1, feats.shape[0]):
            xs.append(feats[end - window + 1 : end + 1])
            ys.append(targs[end])
            ends.append(stamps[end])
        run_start = i
    if not xs:
        if n:
            warnings.warn(
                f"no contiguous run is {window} hours long; no windows emitted",
                stacklevel=2,
            )
        x = np.zeros((0, window, dataset.features.shape[1]))
        return x, np.zeros(0), np.zeros(0, dtype=np.int64)
    return np.stack(xs), np.asarray(ys), np.asarray(ends, dtype=np.int64)


def chronological_split(
    dataset: CalibrationDataset, train_fraction: float
) -> tuple[CalibrationDataset, CalibrationDataset]:
    """First ceil(fraction * n) hours train, the remainder test."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError("train fraction must lie strictly between 0 and 1")
    n = len(dataset)
    if n < 2:
        raise ConfigurationError("need at least two rows to split")
    n_train = math.ceil(train_fraction * n - 1e-9)
    n_train = min(max(n_train, 1), n - 1)
    idx = np.arange(n)
    return dataset.subset(idx[:n_train]), dataset.subset(idx[n_train:])


# ---------------------------------------------------------------------------
# cached-dataset CSV round trip


def dataset_to_csv(dataset: CalibrationDataset, path: str | Path) -> None:
    rows = [",".join(DATASET_HEADER)]
    name_to_col = {n: i for i, n in enumerate(dataset.feature_names)}
    for r in range(len(dataset)):
        cells = [format_timestamp(dataset.timestamps[r])]
        for name in FEATURE_COLUMNS:
            if name in name_to_col:
                cells.append(repr(float(dataset.features[r, name_to_col[name]])))
            else:
                cells.append("")
        cells.append(repr(float(dataset.target[r])))
        rows.append(",".join(cells))
    Path(path).write_text("\n".join(rows) + "\n")


def dataset_from_csv(path: str | Path) -> CalibrationDataset:
    body = _read_csv_rows(Path(path), DATASET_HEADER)
    stamps: list[int] = []
    rows: list[list[float]] = []
    targets: list[float] = []
    present: Optional[list[bool]] = None
    for row in body:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(DATASET_HEADER):
            raise DataError(f"{path}: dataset row has {len(row)} columns")
        stamps.append(parse_timestamp(row[0]))
        cells = row[1:5]
        flags = [bool(c.strip()) for c in cells]
        if present is None:
            present = flags
        elif flags != present:
            raise DataError(f"{path}: inconsistent feature columns across rows")
        rows.append([float(c) for c, ok in zip(cells, flags) if ok])
        targets.append(float(row[5]))
    if not stamps:
        raise DataError(f"{path}: dataset file holds no rows")
    names = tuple(n for n, ok in zip(FEATURE_COLUMNS, present) if ok)
    return CalibrationDataset(
        np.asarray(stamps, dtype=np.int64),
        names,
        np.asarray(rows, dtype=float),
        np.asarray(targets, dtype=float),
    )


def predictions_to_csv(rows: Sequence[dict], path: str | Path) -> None:
    lines = [",".join(PREDICTIONS_HEADER)]
    for row in rows:
        lines.append(
            ",".join(
                [
                    format_timestamp(row["timestamp"]),
                    repr(float(row["raw_pm25"])),
                    repr(float(row["calibrated_pm25"])),
                    repr(float(row["reference_pm25"])),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# synthetic campaign generation


@dataclass(frozen=True)
class SynthProfile:
    """Distortion applied to the simulated low-cost sensors.

    With the default (all-zero distortion) profile every sensor reports the
    reference signal exactly, so the uncalibrated benchmark loss is zero.
    """

    n_pm_sensors: int = 4
    n_env_sensors: int = 2
    gain: float = 1.0
    offset: float = 0.0
    humidity_coeff: float = 0.0  # extra ug/m3 per %RH above the knee
    humidity_knee: float = 70.0
    noise_std: float = 0.0
    sensor_spread: float = 0.1  # per-sensor relative jitter on the distortions
    sample_period_s: int = 120


@dataclass
class SyntheticCampaign:
    samples: list[RawSample]
    reference: Series
    truth: dict[str, np.ndarray]  # hourly pm25/temp/hum/press ground truth


DEFAULT_EPOCH = 1672531200  # 2023-01-01T00:00:00Z


def _ar1(rng: np.random.Generator, n: int, rho: float, sigma: float) -> np.ndarray:
    noise = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = rho * acc + noise[i]
        out[i] = acc
    return out


def synthesize(
    seed: int, n_hours: int, profile: SynthProfile = SynthProfile()
) -> SyntheticCampaign:
    """Deterministic synthetic campaign with seasonal and diurnal structure."""
    if n_hours < 48:
        raise ConfigurationError("synthetic campaigns need at least 48 hours")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2210]))
    hours = np.arange(n_hours, dtype=float)
    day_phase = 2.0 * np.pi * (hours % 24) / 24.0
    season_phase = 2.0 * np.pi * hours / (24.0 * 30.0)

    ref = (
        14.0
        + 6.0 * np.sin(season_phase)
        + 4.0 * np.sin(day_phase - 0.8 * np.pi)
        + _ar1(rng, n_hours, 0.9, 1.1)
    )
    ref = np.clip(ref, 1.0, None)
    temp = (
        12.0
        + 6.0 * np.sin(season_phase + 0.9)
        + 7.0 * np.sin(day_phase - 0.55 * np.pi)
        + _ar1(rng, n_hours, 0.95, 0.35)
    )
    hum = np.clip(76.0 - 1.6 * (temp - 12.0) + _ar1(rng, n_hours, 0.9, 1.4), 25.0, 98.0)
    press = 1012.0 + 6.0 * np.sin(2.0 * np.pi * hours / (24.0 * 15.0)) + _ar1(
        rng, n_hours, 0.98, 0.12
    )
    truth = {"pm25": ref, "temp": temp, "hum": hum, "press": press}

    stamps = DEFAULT_EPOCH + HOUR * np.arange(n_hours, dtype=np.int64)
    reference = Series(stamps, ref)

    samples: list[RawSample] = []
    per_hour = max(1, HOUR // int(profile.sample_period_s))
    period = HOUR // per_hour

    for s in range(profile.n_pm_sensors):
        jitter = profile.sensor_spread * rng.uniform(-1.0, 1.0, 3)
        gain = 1.0 + (profile.gain - 1.0) * (1.0 + jitter[0])
        offset = profile.offset * (1.0 + jitter[1])
        hum_coeff = profile.humidity_coeff * (1.0 + jitter[2])
        sensor_id = f"pm-{s:02d}"
        for h in range(n_hours):
            base = (
                ref[h] * gain
                + offset
                + hum_coeff * max(0.0, hum[h] - profile.humidity_knee)
            )
            noise = (
                rng.normal(0.0, profile.noise_std, per_hour)
                if profile.noise_std > 0
                else np.zeros(per_hour)
            )
            for k in range(per_hour):
                samples.append(
                    RawSample(
                        int(stamps[h]) + k * period,
                        sensor_id,
                        "pm25",
                        float(base + noise[k]),
                    )
                )

    env_quants = {"temp": temp, "hum": hum, "press": press}
    for s in range(profile.n_env_sensors):
        sensor_id = f"env-{s:02d}"
        for quantity, series in env_quants.items():
            for h in range(n_hours):
                noise = (
                    rng.normal(0.0, 0.05 * profile.noise_std)
                    if profile.noise_std > 0
                    else 0.0
                )
                samples.append(
                    RawSample(
                        int(stamps[h]) + (s % per_hour) * period,
                        sensor_id,
                        quantity,
                        float(series[h] + noise),
                    )
                )
    samples.sort(key=lambda r: (r.timestamp, r.sensor_id, r.quantity))
    return SyntheticCampaign(samples=samples, reference=reference, truth=truth)


def write_campaign(campaign: SyntheticCampaign, out_dir: str | Path) -> dict[str, Path]:
    """Write sensors.csv / reference.csv in the ingest schemas."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sensors_path = out / "sensors.csv"
    lines = [",".join(RAW_HEADER)]
    for s in campaign.samples:
        lines.append(
            f"{format_timestamp(s.timestamp)},{s.sensor_id},{s.quantity},{s.value!r}"
        )
    sensors_path.write_text("\n".join(lines) + "\n")

    reference_path = out / "reference.csv"
    lines = [",".join(REFERENCE_HEADER)]
    for t, v in zip(campaign.reference.timestamps, campaign.reference.values):
        lines.append(f"{format_timestamp(t)},{float(v)!r}")
    reference_path.write_text("\n".join(lines) + "\n")
    return {"sensors": sensors_path, "reference": reference_path}


def prepare_dataset(
    sensor_paths: Sequence[str | Path],
    reference_path: str | Path,
    granularity: str = "hour",
) -> tuple[CalibrationDataset, CleanReport, int]:
    """Full ingest-to-dataset pipeline; returns (dataset, clean report, malformed)."""
    result = ingest(sensor_paths)
    if not result.samples:
        raise DataError("no valid samples found in the sensor files")
    aggregated = aggregate(result.samples, granularity)
    if granularity != "hour":
        # re-bucket the finer series to the hourly grid expected by alignment
        hourly_samples = [
            RawSample(int(t), sensor, quantity, float(v))
            for (sensor, quantity), series in aggregated.items()
            for t, v in zip(series.timestamps, series.values)
        ]
        aggregated = aggregate(hourly_samples, "hour")
    fused = fuse_by_quantity(aggregated)
    reference = load_reference(reference_path)
    dataset, report = align_and_clean(fused, reference)
    return dataset, report, result.malformed
