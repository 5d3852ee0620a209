"""Training corpus: theoretical sweeps, experimental CSV, spline interpolation,
weighting by duplication, min-max scaling and the train/val/test split.

CSV schema (header mandatory, comma separated, ``.`` decimal)::

    T_K,m_cat_g,SC,NC,CC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,source,regime
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from msr_surrogate import seeding
from msr_surrogate.equilibrium import solve_equilibrium
from msr_surrogate.errors import DataError, NumericalError
from msr_surrogate.kinetics import KineticParams, reaction_rate, shift_extent
from msr_surrogate.state import (
    ATM,
    INPUT_NAMES,
    Conversions,
    GasComposition,
    OperatingPoint,
    dry_composition,
    outlet_moles,
)
from msr_surrogate.thermo import ReactionId, k_equilibrium

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "T_K", "m_cat_g", "SC", "NC", "CC", "f_CH4_mol_s",
    "y_H2", "y_CH4", "y_CO", "y_CO2", "source", "regime",
)
SOURCES = ("experimental", "interpolated", "simulated")
REGIMES = ("kinetic", "equilibrium", "transition", "unknown")
SOURCE_WEIGHTS = {"experimental": 4, "interpolated": 2, "simulated": 1}

KINETIC_MAX_RATIO = 0.8
EQUILIBRIUM_MIN_RATIO = 1.2

SUM_WARN_TOL = 1e-3
SUM_REJECT_TOL = 0.05
RENORM_TOL = 1e-12

BUNDLED_EXPERIMENTAL = "data/synthetic_experimental.csv"


@dataclass(frozen=True)
class DataRecord:
    """One training atom: raw inputs, dry-gas target, provenance."""

    T: float
    m_cat: float
    SC: float
    NC: float
    f_CH4: float
    target: GasComposition
    source: str = "simulated"
    regime: str = "unknown"
    CC: float = 0.0

    def inputs(self) -> np.ndarray:
        return np.array([self.T, self.m_cat, self.SC, self.NC, self.f_CH4])

    def input_value(self, name: str) -> float:
        return getattr(self, name)

    def operating_point(self, P: float = ATM) -> OperatingPoint:
        return OperatingPoint(T=self.T, m_cat=self.m_cat, SC=self.SC, NC=self.NC, f_CH4=self.f_CH4, P=P, CC=self.CC)


def records_to_arrays(records: Sequence[DataRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Raw inputs ``(n, 5)`` and targets ``(n, 4)``."""
    X = np.array([r.inputs() for r in records], dtype=float).reshape(-1, len(INPUT_NAMES))
    Y = np.array([r.target.as_array() for r in records], dtype=float).reshape(-1, 4)
    return X, Y


# --------------------------------------------------------------------------
# regime rule and theoretical data


def classify_regime(rho: float, kinetic_max: float = KINETIC_MAX_RATIO,
                    equilibrium_min: float = EQUILIBRIUM_MIN_RATIO) -> str:
    if rho <= kinetic_max:
        return "kinetic"
    if rho >= equilibrium_min:
        return "equilibrium"
    return "transition"


@dataclass(frozen=True)
class ReferenceResult:
    """Model outputs at one operating point.

    ``rho`` is the unclamped kinetic reforming extent over the equilibrium
    extent. ``composition`` follows the regime rule and is ``None`` inside
    the transition band; ``saturating`` is the kinetic model clamped at
    equilibrium, defined everywhere.
    """

    rho: float
    regime: str
    composition: GasComposition | None
    kinetic: GasComposition
    equilibrium: GasComposition
    saturating: GasComposition
    equilibrium_conv: Conversions


def reference_state(
    op: OperatingPoint,
    params: KineticParams = KineticParams(),
    equilibrium_conv: Conversions | None = None,
    kinetic_max: float = KINETIC_MAX_RATIO,
    equilibrium_min: float = EQUILIBRIUM_MIN_RATIO,
    shift_residual: str = "mass-action",
) -> ReferenceResult:
    if equilibrium_conv is None:
        equilibrium_conv = solve_equilibrium(op, shift_residual=shift_residual).conv
    x_eq = equilibrium_conv.x_st
    k_sh = k_equilibrium(ReactionId.WGSR, op.T)
    x_kin = reaction_rate(params, op) / op.f_CH4
    rho = x_kin / x_eq if x_eq > 0 else math.inf

    def kinetic_at(x):
        conv = Conversions(x, shift_extent(x, op.SC, op.CC, k_sh))
        return dry_composition(outlet_moles(conv, op.SC, op.NC, op.CC))

    equilibrium = dry_composition(outlet_moles(equilibrium_conv, op.SC, op.NC, op.CC))
    # The unclamped kinetic extent can exceed the feed; cap it at the feasible maximum.
    x_cap = min(x_kin, 1.0, op.SC)
    kinetic = kinetic_at(x_cap)
    saturating = equilibrium if x_kin >= x_eq else kinetic_at(x_kin)
    regime = classify_regime(rho, kinetic_max, equilibrium_min)
    composition = {"kinetic": kinetic, "equilibrium": equilibrium}.get(regime)
    return ReferenceResult(rho, regime, composition, kinetic, equilibrium, saturating, equilibrium_conv)


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.count <= 0:
            return np.empty(0)
        if self.count == 1:
            return np.array([self.lo])
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        if self.scale == "linear":
            return np.linspace(self.lo, self.hi, self.count)
        raise ValueError(f"unknown axis scale {self.scale!r}")


@dataclass(frozen=True)
class GridSpec:
    T: Axis = Axis(773.15, 1073.15, 7)
    m_cat: Axis = Axis(0.1, 20.0, 6, "log")
    SC: Axis = Axis(1.0, 4.0, 4)
    NC: Axis = Axis(0.0, 6.0, 4)
    f_CH4: Axis = Axis(1e-5, 2e-4, 5, "log")
    P: float = ATM
    CC: float = 0.0

    def size(self) -> int:
        return math.prod(getattr(self, n).count for n in INPUT_NAMES)

    @classmethod
    def empty(cls) -> "GridSpec":
        return cls(T=Axis(773.15, 1073.15, 0))

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        kw = {}
        for name in INPUT_NAMES:
            if name in d:
                a = d[name]
                kw[name] = Axis(float(a[0]), float(a[1]), int(a[2]), a[3] if len(a) > 3 else "linear")
        for name in ("P", "CC"):
            if name in d:
                kw[name] = float(d[name])
        return cls(**kw)


def generate_theoretical(
    grid: GridSpec = GridSpec(),
    params: KineticParams = KineticParams(),
    kinetic_max: float = KINETIC_MAX_RATIO,
    equilibrium_min: float = EQUILIBRIUM_MIN_RATIO,
    shift_residual: str = "mass-action",
    stats: dict | None = None,
) -> list[DataRecord]:
    """Sweep the grid and emit model records outside the transition band.

    Records come out in grid order (T, m_cat, SC, NC, f_CH4 nested, last
    fastest). Points whose equilibrium solve fails are skipped and counted
    under ``stats['failed']``.
    """
    counts = {"kinetic": 0, "equilibrium": 0, "transition": 0, "failed": 0}
    axes = [getattr(grid, n).values() for n in INPUT_NAMES]
    cache: dict[tuple, Conversions | None] = {}
    out = []
    for T, m, sc, nc, f in itertools.product(*axes):
        op = OperatingPoint(T=float(T), m_cat=float(m), SC=float(sc), NC=float(nc), f_CH4=float(f),
                            P=grid.P, CC=grid.CC)
        key = (op.T, op.SC, op.NC)
        if key not in cache:
            try:
                cache[key] = solve_equilibrium(op, shift_residual=shift_residual).conv
            except NumericalError as exc:
                log.warning("skipping T=%g SC=%g NC=%g: %s", op.T, op.SC, op.NC, exc)
                cache[key] = None
        conv = cache[key]
        if conv is None:
            counts["failed"] += 1
            continue
        ref = reference_state(op, params, conv, kinetic_max, equilibrium_min)
        counts[ref.regime] += 1
        if ref.composition is None:
            continue
        out.append(DataRecord(op.T, op.m_cat, op.SC, op.NC, op.f_CH4, ref.composition,
                              "simulated", ref.regime, op.CC))
    if stats is not None:
        stats.update(counts)
    return out


# --------------------------------------------------------------------------
# CSV I/O


def _fmt(x: float) -> str:
    return repr(float(x))


def format_records(records: Iterable[DataRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        t = r.target
        w.writerow([_fmt(r.T), _fmt(r.m_cat), _fmt(r.SC), _fmt(r.NC), _fmt(r.CC), _fmt(r.f_CH4),
                    _fmt(t.H2), _fmt(t.CH4), _fmt(t.CO), _fmt(t.CO2), r.source, r.regime])
    return buf.getvalue()


def write_records(path, records: Iterable[DataRecord]) -> None:
    Path(path).write_text(format_records(records), encoding="utf-8", newline="")


def parse_records(text: str, source_name: str = "<csv>") -> list[DataRecord]:
    """Parse dataset CSV text.

    Malformed rows raise :class:`DataError` naming the line. Rows with
    physically impossible fractions are dropped with a warning; small
    normalisation defects are repaired.
    """
    rows = csv.reader(io.StringIO(text))
    try:
        header = next(rows)
    except StopIteration:
        raise DataError(f"{source_name}: empty file, header required") from None
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise DataError(f"{source_name}: line 1: header must be {','.join(CSV_COLUMNS)}")
    out = []
    for row in rows:
        lineno = rows.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            raise DataError(f"{source_name}: line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        try:
            nums = [float(c) for c in row[:10]]
        except ValueError as exc:
            raise DataError(f"{source_name}: line {lineno}: {exc}") from None
        source, regime = row[10].strip(), row[11].strip()
        if source not in SOURCES:
            raise DataError(f"{source_name}: line {lineno}: source must be one of {SOURCES}, got {source!r}")
        if regime not in REGIMES:
            raise DataError(f"{source_name}: line {lineno}: regime must be one of {REGIMES}, got {regime!r}")
        if not all(math.isfinite(v) for v in nums):
            raise DataError(f"{source_name}: line {lineno}: non-finite value")
        T, m, sc, nc, cc, f = nums[:6]
        y = np.array(nums[6:10])
        if np.any(y < 0) or np.any(y > 1) or abs(y.sum() - 1.0) > SUM_REJECT_TOL:
            log.warning("%s: line %d rejected: non-physical fractions %s (sum %.6g)",
                        source_name, lineno, y.tolist(), y.sum())
            continue
        if abs(y.sum() - 1.0) > SUM_WARN_TOL:
            log.warning("%s: line %d: fractions sum to %.6g, renormalised", source_name, lineno, y.sum())
        try:
            # leave already-normalised rows bit-exact so files round-trip
            target = GasComposition.from_array(y, renormalize=abs(y.sum() - 1.0) > RENORM_TOL)
            record = DataRecord(T, m, sc, nc, f, target, source, regime, cc)
            record.operating_point()
        except ValueError as exc:
            raise DataError(f"{source_name}: line {lineno}: {exc}") from None
        out.append(record)
    return out


def read_records(path) -> list[DataRecord]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return parse_records(text, str(path))


def ingest_experimental(path) -> list[DataRecord]:
    """Read an experimental CSV; every record is tagged ``experimental``."""
    return [replace(r, source="experimental") for r in read_records(path)]


def load_bundled_experimental() -> list[DataRecord]:
    """The synthetic pseudo-experimental bundle shipped with the package."""
    text = resources.files("msr_surrogate").joinpath(BUNDLED_EXPERIMENTAL).read_text(encoding="utf-8")
    return [replace(r, source="experimental") for r in parse_records(text, BUNDLED_EXPERIMENTAL)]


# --------------------------------------------------------------------------
# pseudo-experimental bundle

#: Conditions of the synthetic temperature series (figure-caption operating points).
PSEUDO_SERIES = (
    {"m_cat": 1.48, "SC": 3.0, "NC": 3.0, "f_CH4": 3.38e-5},
    {"m_cat": 5.03, "SC": 2.0, "NC": 0.0, "f_CH4": 1.01e-4},
    {"m_cat": 6.50, "SC": 3.0, "NC": 1.0, "f_CH4": 3.38e-5},
    {"m_cat": 15.0, "SC": 3.0, "NC": 3.0, "f_CH4": 1.0e-5},
)
PSEUDO_TEMPERATURES = tuple(823.15 + 25.0 * k for k in range(9))


def make_pseudo_experimental(seed: int = 2024, noise: float = 0.01,
                             params: KineticParams = KineticParams()) -> list[DataRecord]:
    """Model compositions (kinetic model clamped at equilibrium) with seeded
    relative Gaussian noise. Synthetic stand-in for measured data."""
    rng = seeding.substream(seed, "data", 1)
    out = []
    for cond in PSEUDO_SERIES:
        for T in PSEUDO_TEMPERATURES:
            op = OperatingPoint(T=T, **cond)
            ref = reference_state(op, params)
            y = ref.saturating.as_array() * (1.0 + noise * rng.standard_normal(4))
            y = np.clip(y, 0.0, None)
            out.append(DataRecord(op.T, op.m_cat, op.SC, op.NC, op.f_CH4,
                                  GasComposition.from_array(y), "experimental", ref.regime))
    return out


# --------------------------------------------------------------------------
# spline interpolation


class NaturalCubicSpline:
    """Natural cubic spline through ``(x, y)``; ``y`` may be ``(n,)`` or ``(n, k)``.

    Second derivatives vanish at both ends. Evaluation outside the knot
    range raises.
    """

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or len(x) < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(x) <= 0):
            raise ValueError("knots must be strictly increasing")
        self.x, self.y = x, y
        n = len(x)
        h = np.diff(x)
        Y = y.reshape(n, -1)
        M = np.zeros_like(Y)
        m = n - 2
        if m > 0:
            # tridiagonal system for the interior second derivatives (Thomas algorithm)
            slope = np.diff(Y, axis=0) / h[:, None]
            rhs = 6.0 * np.diff(slope, axis=0)
            diag = 2.0 * (h[:-1] + h[1:])
            c = np.zeros(m)
            d = np.zeros_like(rhs)
            denom = diag[0]
            for i in range(m):
                if i > 0:
                    denom = diag[i] - h[i] * c[i - 1]
                    d[i] = (rhs[i] - h[i] * d[i - 1]) / denom
                else:
                    d[0] = rhs[0] / denom
                if i < m - 1:
                    c[i] = h[i + 1] / denom
            for i in range(m - 2, -1, -1):
                d[i] -= c[i] * d[i + 1]
            M[1:-1] = d
        self.M = M.reshape(y.shape)

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        if np.any(xq < self.x[0]) or np.any(xq > self.x[-1]):
            raise ValueError("spline evaluation outside the knot range")
        i = np.clip(np.searchsorted(self.x, xq, side="right") - 1, 0, len(self.x) - 2)
        h = self.x[i + 1] - self.x[i]
        a = (self.x[i + 1] - xq) / h
        b = (xq - self.x[i]) / h
        if self.y.ndim > 1:
            a, b, h = a[..., None], b[..., None], h[..., None]
        return (a * self.y[i] + b * self.y[i + 1]
                + ((a**3 - a) * self.M[i] + (b**3 - b) * self.M[i + 1]) * h * h / 6.0)


def interpolate_series(records: Sequence[DataRecord], axis: str = "T",
                       n_points: int | None = None) -> list[DataRecord]:
    """Spline-interpolate one experimental series along ``axis``.

    All records must agree on every other input. Returns ``n_points``
    (default twice the series length) equally spaced interior samples,
    each renormalised and tagged ``interpolated``.
    """
    if axis not in INPUT_NAMES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {INPUT_NAMES}")
    if len(records) < 4:
        raise DataError(f"cubic spline needs at least 4 points, got {len(records)}")
    others = [n for n in INPUT_NAMES if n != axis] + ["CC"]
    first = records[0]
    for r in records:
        if any(r.input_value(n) != first.input_value(n) for n in others):
            raise DataError("series records differ in inputs other than the interpolation axis")
    recs = sorted(records, key=lambda r: r.input_value(axis))
    xs = np.array([r.input_value(axis) for r in recs])
    if np.any(np.diff(xs) == 0):
        raise DataError(f"duplicate {axis} values in series")
    if n_points is None:
        n_points = 2 * len(recs)
    spline = NaturalCubicSpline(xs, np.array([r.target.as_array() for r in recs]))
    xq = xs[0] + (xs[-1] - xs[0]) * np.arange(1, n_points + 1) / (n_points + 1)
    yq = np.clip(spline(xq), 0.0, None)
    out = []
    for x, y in zip(xq, yq):
        k = int(np.searchsorted(xs, x)) - 1
        left, right = recs[k].regime, recs[k + 1].regime
        regime = left if left == right else "unknown"
        out.append(replace(first, **{axis: float(x)}, target=GasComposition.from_array(y),
                           source="interpolated", regime=regime))
    return out


def interpolate_experimental(records: Sequence[DataRecord], axis: str = "T",
                             n_points: int | None = None) -> list[DataRecord]:
    """Group experimental records into series along ``axis`` and interpolate each.

    Series with fewer than four points are skipped with a log message.
    """
    others = [n for n in INPUT_NAMES if n != axis] + ["CC"]
    groups: dict[tuple, list[DataRecord]] = {}
    for r in records:
        if r.source == "experimental":
            groups.setdefault(tuple(r.input_value(n) for n in others), []).append(r)
    out = []
    for key, series in groups.items():
        if len(series) < 4:
            log.info("series %s has %d points; not interpolated", key, len(series))
            continue
        out.extend(interpolate_series(series, axis, n_points))
    return out


# --------------------------------------------------------------------------
# weighting, scaling, splitting


def augment(records: Sequence[DataRecord], weights: dict[str, int] = SOURCE_WEIGHTS) -> list[DataRecord]:
    """Repeat each record by its source weight, duplicates adjacent."""
    out = []
    for r in records:
        out.extend([r] * weights[r.source])
    return out


@dataclass
class Scaler:
    """Per-input min-max scaling to [0, 1]."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=float)
        self.max = np.asarray(self.max, dtype=float)
        degenerate = [INPUT_NAMES[i] for i in np.nonzero(~(self.max > self.min))[0]]
        if degenerate:
            raise DataError(f"cannot scale degenerate input dimension(s): {', '.join(degenerate)}")

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.min) / (self.max - self.min)

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * (self.max - self.min) + self.min

    def outside(self, X) -> np.ndarray:
        """Boolean mask of rows outside the fitted hull."""
        X = np.atleast_2d(X)
        return np.any((X < self.min) | (X > self.max), axis=1)

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Scaler":
        return cls(np.array(d["min"], dtype=float), np.array(d["max"], dtype=float))


def fit_scaler(records_or_X) -> Scaler:
    if len(records_or_X) == 0:
        raise DataError("cannot fit a scaler on no data")
    if isinstance(records_or_X[0], DataRecord):
        X, _ = records_to_arrays(records_or_X)
    else:
        X = np.asarray(records_or_X, dtype=float)
    return Scaler(X.min(axis=0), X.max(axis=0))


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 42

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ValueError("split fractions must be three positive numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


def split(records: Sequence[DataRecord], spec: SplitSpec = SplitSpec()):
    """Seeded shuffle, then contiguous cuts at floor(f_train n) and floor((f_train + f_val) n)."""
    n = len(records)
    if n < 10:
        raise DataError(f"need at least 10 records to split, got {n}")
    perm = seeding.substream(spec.seed, "split").permutation(n)
    a = int(math.floor(spec.fractions[0] * n + 1e-9))
    b = int(math.floor((spec.fractions[0] + spec.fractions[1]) * n + 1e-9))
    shuffled = [records[i] for i in perm]
    return shuffled[:a], shuffled[a:b], shuffled[b:]


@dataclass
class Corpus:
    train: list[DataRecord]
    val: list[DataRecord]
    test: list[DataRecord]
    scaler: Scaler
    meta: dict = field(default_factory=dict)

    def arrays(self, part: str) -> tuple[np.ndarray, np.ndarray]:
        X, Y = records_to_arrays(getattr(self, part))
        return self.scaler.transform(X), Y


def prepare_corpus(records: Sequence[DataRecord], spec: SplitSpec = SplitSpec(),
                   split_before_augment: bool = False) -> Corpus:
    """Augment, fit the scaler on everything, and split.

    With ``split_before_augment`` the distinct records are split first and
    each fold is augmented on its own, so duplicates never straddle folds.
    """
    if split_before_augment:
        train, val, test = (augment(part) for part in split(records, spec))
        everything = train + val + test
    else:
        everything = augment(records)
        train, val, test = split(everything, spec)
    scaler = fit_scaler(everything)
    counts = {s: sum(1 for r in records if r.source == s) for s in SOURCES}
    return Corpus(train, val, test, scaler, {"distinct": counts, "augmented": len(everything)})
