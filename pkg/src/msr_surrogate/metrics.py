"""Evaluation statistics, parameter sweeps and a derivative-smoothness probe.

All statistics accept optional record weights; weighting a deduplicated
set by multiplicity gives the same numbers as evaluating the duplicated set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from msr_surrogate.dataset import DataRecord, records_to_arrays, reference_state
from msr_surrogate.errors import DataError, SurrogateError
from msr_surrogate.kinetics import KineticParams
from msr_surrogate.state import DRY_SPECIES, INPUT_NAMES, OperatingPoint

log = logging.getLogger(__name__)

Predictor = Callable[[np.ndarray], np.ndarray]


def _weights(n, w):
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,) or np.any(w < 0):
        raise ValueError("weights must be a non-negative vector, one per record")
    return w


def pearson(x, y, w=None) -> float | None:
    """Weighted Pearson correlation; ``None`` when either side has zero variance."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    w = _weights(x.size, w)
    W = w.sum()
    dx = x - (w @ x) / W
    dy = y - (w @ y) / W
    sxx, syy = w @ (dx * dx), w @ (dy * dy)
    # rounding noise around a constant is not variance
    if sxx <= W * (1e-14 * np.max(np.abs(x))) ** 2 or syy <= W * (1e-14 * np.max(np.abs(y))) ** 2:
        return None
    r = (w @ (dx * dy)) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def midranks(x, w=None) -> np.ndarray:
    """Average ranks (1-based) of ``x`` with each element counted ``w`` times."""
    x = np.asarray(x, dtype=float)
    w = _weights(x.size, w)
    order = np.argsort(x, kind="mergesort")
    xs, ws = x[order], w[order]
    ranks = np.empty_like(x)
    start, before = 0, 0.0
    while start < xs.size:
        stop = start
        while stop + 1 < xs.size and xs[stop + 1] == xs[start]:
            stop += 1
        block = ws[start:stop + 1].sum()
        ranks[order[start:stop + 1]] = before + (block + 1.0) / 2.0
        before += block
        start = stop + 1
    return ranks


def spearman(x, y, w=None) -> float | None:
    return pearson(midranks(x, w), midranks(y, w), w)


@dataclass
class EvalReport:
    n: float
    mse: float
    mse_components: list[float]
    pearson: list[float | None]
    spearman: list[float | None]
    pearson_pooled: float | None
    spearman_pooled: float | None
    notes: list[str] = field(default_factory=list)

    @staticmethod
    def _mean(values):
        present = [v for v in values if v is not None]
        return float(np.mean(present)) if present else None

    @property
    def pearson_mean(self) -> float | None:
        return self._mean(self.pearson)

    @property
    def spearman_mean(self) -> float | None:
        return self._mean(self.spearman)

    def to_csv(self) -> str:
        def cell(v):
            return "" if v is None else repr(float(v))

        lines = ["component,mse,pearson,spearman"]
        for name, m, p, s in zip(DRY_SPECIES, self.mse_components, self.pearson, self.spearman):
            lines.append(f"{name},{cell(m)},{cell(p)},{cell(s)}")
        lines.append(f"mean,{cell(self.mse)},{cell(self.pearson_mean)},{cell(self.spearman_mean)}")
        lines.append(f"pooled,{cell(self.mse)},{cell(self.pearson_pooled)},{cell(self.spearman_pooled)}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        def f(v):
            return "n/a" if v is None else f"{v:.6f}"

        text = (f"n={self.n:g}  MSE={self.mse:.6e}  Pearson(mean)={f(self.pearson_mean)}  "
                f"Spearman(mean)={f(self.spearman_mean)}  Spearman(pooled)={f(self.spearman_pooled)}")
        return "\n".join([text, *self.notes])


def evaluate_arrays(pred, target, weights=None) -> EvalReport:
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if pred.shape != target.shape or pred.shape[1] != len(DRY_SPECIES):
        raise DataError(f"prediction shape {pred.shape} does not match targets {target.shape}")
    w = _weights(pred.shape[0], weights)
    if pred.shape[0] < 3 or w.sum() < 3:
        raise DataError(f"need at least 3 records to evaluate, got {pred.shape[0]}")
    sq = (pred - target) ** 2
    comp_mse = (w @ sq) / w.sum()
    rs, rhos, notes = [], [], []
    for j, name in enumerate(DRY_SPECIES):
        r = pearson(pred[:, j], target[:, j], w)
        rho = spearman(pred[:, j], target[:, j], w)
        if r is None or rho is None:
            notes.append(f"note: {name} has zero variance; correlation undefined and excluded from the mean")
        rs.append(r)
        rhos.append(rho)
    wp = np.repeat(w, pred.shape[1])
    return EvalReport(
        n=float(w.sum()),
        mse=float(comp_mse.mean()),
        mse_components=[float(v) for v in comp_mse],
        pearson=rs,
        spearman=rhos,
        pearson_pooled=pearson(pred.ravel(), target.ravel(), wp),
        spearman_pooled=spearman(pred.ravel(), target.ravel(), wp),
        notes=notes,
    )


def evaluate(net, records: Sequence[DataRecord], weights=None) -> EvalReport:
    """Score a network (anything with ``predict(X)``) on ``records``."""
    if len(records) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    X, Y = records_to_arrays(records)
    return evaluate_arrays(net.predict(X), Y, weights)


# -- sweeps --------------------------------------------------------------------


def _check_parameter(name):
    if name not in INPUT_NAMES:
        raise ValueError(f"unknown parameter {name!r}; choose from {', '.join(INPUT_NAMES)}")


def sweep_inputs(vary: str, grid, fixed: OperatingPoint) -> np.ndarray:
    _check_parameter(vary)
    base = fixed.inputs()
    X = np.tile(base, (len(grid), 1))
    X[:, INPUT_NAMES.index(vary)] = grid
    return X


@dataclass
class SweepTable:
    vary: str
    grid: np.ndarray
    fixed: OperatingPoint
    ann: np.ndarray  # (n, 4)
    reference: np.ndarray | None  # (n, 4); NaN rows where no reference applies
    regimes: list[str]

    def to_csv(self) -> str:
        cols = ["vary_name", "vary_value"]
        cols += [f"y_{s}_ann" for s in DRY_SPECIES] + [f"y_{s}_ref" for s in DRY_SPECIES] + ["regime"]
        lines = [",".join(cols)]
        for i, v in enumerate(self.grid):
            ann = [repr(float(a)) for a in self.ann[i]]
            if self.reference is None or np.isnan(self.reference[i]).any():
                ref = [""] * len(DRY_SPECIES)
            else:
                ref = [repr(float(a)) for a in self.reference[i]]
            lines.append(",".join([self.vary, repr(float(v)), *ann, *ref, self.regimes[i]]))
        return "\n".join(lines) + "\n"


def reference_sweep(vary: str, grid, fixed: OperatingPoint, *, mode: str = "regime",
                    params: KineticParams = KineticParams(),
                    shift_residual: str = "mass-action") -> tuple[np.ndarray, list[str]]:
    """Reference-model compositions along a one-parameter grid.

    ``mode="regime"`` applies the regime rule (NaN inside the transition band);
    ``mode="saturating"`` uses the equilibrium-capped kinetic model everywhere.
    Solver failures leave a NaN row labelled ``failed``.
    """
    if mode not in ("regime", "saturating"):
        raise ValueError("mode must be 'regime' or 'saturating'")
    _check_parameter(vary)
    out = np.full((len(grid), len(DRY_SPECIES)), np.nan)
    regimes = []
    for i, v in enumerate(grid):
        try:
            ref = reference_state(fixed.with_value(vary, float(v)), params, shift_residual=shift_residual)
        except (SurrogateError, ValueError) as exc:
            log.warning("reference model failed at %s=%g: %s", vary, v, exc)
            regimes.append("failed")
            continue
        comp = ref.saturating if mode == "saturating" else ref.composition
        if comp is not None:
            out[i] = comp.as_array()
        regimes.append(ref.regime)
    return out, regimes


def sweep(net, vary: str, grid, fixed: OperatingPoint, with_reference: bool = True,
          params: KineticParams = KineticParams(), shift_residual: str = "mass-action") -> SweepTable:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("sweep grid must be a non-empty 1-D sequence")
    if grid.size > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
        raise ValueError("sweep grid must be strictly monotone")
    X = sweep_inputs(vary, grid, fixed)
    ann = net.predict(X)
    if with_reference:
        ref, regimes = reference_sweep(vary, grid, fixed, params=params, shift_residual=shift_residual)
    else:
        ref, regimes = None, [""] * grid.size
    return SweepTable(vary, grid, fixed, ann, ref, regimes)


def smoothness_probe(predict: Predictor, vary: str, grid, fixed: OperatingPoint) -> float:
    """Largest jump between neighbouring central-difference derivatives.

    ``grid`` must be uniform with at least 16 points. For a C^2 response the
    value scales like ``h * max|f''|`` and halves with the spacing; a kink or
    step keeps it at O(1) or makes it grow.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 16:
        raise ValueError("smoothness probe needs at least 16 grid points")
    h = np.diff(grid)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("smoothness probe needs a uniform grid")
    Y = np.asarray(predict(sweep_inputs(vary, grid, fixed)), dtype=float)
    d = (Y[2:] - Y[:-2]) / (2.0 * h[0])
    return float(np.max(np.abs(np.diff(d, axis=0))))
