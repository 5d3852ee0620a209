"""Equilibrium-regime reformer model.

Unknowns are the reforming extent ``x`` and the shift extent ``y`` per mole
of inlet methane. Both reactions obey mass action with partial pressures

    p_i = n_i / (1 + SC + NC + CC + 2x) * P

where ``n_i`` are the outlet amounts of the reformer mole balance.

The solver runs a damped Newton iteration on the logarithmic form of the
two mass-action laws, ``ln(forward) - ln(backward) = 0``, in the variables
``(x, c)`` with ``c = x - y`` the CO amount; at low temperature CO is many
orders of magnitude below CO2 and ``x - y`` would cancel. Its reported
residual ``(forward - backward) / (forward + backward)`` equals
``tanh(g / 2)`` of the log residual ``g``, is dimensionless and lies in
[-1, 1] regardless of pressure or the size of the equilibrium constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from msr_surrogate import thermo
from msr_surrogate.errors import ConvergenceError
from msr_surrogate.state import (
    Conversions,
    GasComposition,
    OperatingPoint,
    dry_composition,
    outlet_moles,
)

SHIFT_RESIDUAL_MODES = ("mass-action", "paper")

RESIDUAL_TOL = 1e-12
# accepted when Newton steps have shrunk to rounding level (x_st -> 1 or -> 0)
STAGNATION_TOL = 1e-9
STEP_FLOOR = 1e-15
MAX_ITER = 200
BOUNDARY_FRACTION = 0.99
DEFAULT_STARTS = ((0.1, 0.05), (0.5, 0.1), (0.9, 0.2))

# d n_i / d(x, c) for (CH4, H2O, H2, CO, CO2, total)
_DMOLES = np.array(
    [
        [-1.0, 0.0],
        [-2.0, 1.0],
        [4.0, -1.0],
        [0.0, 1.0],
        [1.0, -1.0],
        [2.0, 0.0],
    ]
)
# log-residual exponents over (CH4, H2O, H2, CO, CO2, total)
_REFORMING_EXP = np.array([1.0, 1.0, -3.0, -1.0, 0.0, 2.0])
_SHIFT_EXP = {
    "mass-action": np.array([0.0, 1.0, -1.0, 1.0, -1.0, 0.0]),
    "paper": np.array([1.0, 1.0, -1.0, 0.0, -1.0, 0.0]),
}


@dataclass(frozen=True)
class PartialPressures:
    p_CH4: float
    p_H2O: float
    p_H2: float
    p_CO: float
    p_CO2: float
    p_N2: float

    def total(self) -> float:
        return math.fsum((self.p_CH4, self.p_H2O, self.p_H2, self.p_CO, self.p_CO2, self.p_N2))


@dataclass(frozen=True)
class EquilibriumSolution:
    conv: Conversions
    residual_norm: float
    iterations: int
    multi_start_index: int


def partial_pressures(conv: Conversions, SC: float, NC: float, CC: float, P: float) -> PartialPressures:
    m = outlet_moles(conv, SC, NC, CC)
    denom = 1.0 + SC + NC + CC + 2.0 * conv.x_st
    f = P / denom
    return PartialPressures(m["CH4"] * f, m["H2O"] * f, m["H2"] * f, m["CO"] * f, m["CO2"] * f, m["N2"] * f)


def _relative(forward: float, backward: float) -> float:
    s = forward + backward
    return 0.0 if s == 0.0 else (forward - backward) / s


def residuals(
    conv: Conversions,
    T: float,
    SC: float,
    NC: float,
    CC: float,
    P: float,
    *,
    shift_residual: str = "mass-action",
    k_st: float | None = None,
    k_sh: float | None = None,
    table: thermo.SpeciesThermoTable | None = None,
) -> tuple[float, float]:
    """Scaled mass-action residuals ``(f1, f2)`` for reforming and shift.

    ``f1 > 0`` means the reforming reaction still runs forward. Explicit
    ``k_st`` [Pa^2] and ``k_sh`` override the thermochemical constants.
    """
    if k_st is None:
        k_st = thermo.k_equilibrium(thermo.ReactionId.MSRR, T, table=table)
    if k_sh is None:
        k_sh = thermo.k_equilibrium(thermo.ReactionId.WGSR, T, table=table)
    pp = partial_pressures(conv, SC, NC, CC, P)
    f1 = _relative(k_st * pp.p_CH4 * pp.p_H2O, pp.p_CO * pp.p_H2**3)
    if shift_residual == "mass-action":
        f2 = _relative(k_sh * pp.p_CO * pp.p_H2O, pp.p_CO2 * pp.p_H2)
    elif shift_residual == "paper":
        f2 = _relative(k_sh * pp.p_CH4 * pp.p_H2O, pp.p_CO2 * pp.p_H2)
    else:
        raise ValueError(f"shift_residual must be one of {SHIFT_RESIDUAL_MODES}")
    return f1, f2


class _LogSystem:
    """Log-form mass-action system in (x, c) with analytic Jacobian."""

    def __init__(self, SC, NC, CC, P, k_st, k_sh, shift_residual):
        self.SC, self.NC, self.CC = SC, NC, CC
        # reforming: K_st/P^2 * CH4 * H2O * total^2 = CO * H2^3
        self.const = np.array([math.log(k_st) - 2.0 * math.log(P), math.log(k_sh)])
        self.exps = np.vstack([_REFORMING_EXP, _SHIFT_EXP[shift_residual]])

    def moles(self, z):
        x, c = z
        return np.array([
            1.0 - x,
            self.SC - 2.0 * x + c,
            4.0 * x - c,
            c,
            self.CC + x - c,
            1.0 + self.SC + self.NC + self.CC + 2.0 * x,
        ])

    def feasible(self, z) -> bool:
        return bool(np.all(self.moles(z) > 0.0))

    def value(self, z):
        n = self.moles(z)
        return self.const + self.exps @ np.log(n)

    def jacobian(self, z):
        n = self.moles(z)
        return (self.exps / n) @ _DMOLES

    def max_step(self, z, dz) -> float:
        n = self.moles(z)
        dn = _DMOLES @ dz
        shrinking = dn < 0.0
        if not shrinking.any():
            return 1.0
        return min(1.0, BOUNDARY_FRACTION * float(np.min(-n[shrinking] / dn[shrinking])))


def _newton(system: _LogSystem, z0, tol: float, max_iter: int):
    z = np.array(z0, dtype=float)
    g = system.value(z)
    norm = float(np.max(np.abs(np.tanh(g / 2.0))))
    for it in range(max_iter):
        if norm <= tol:
            return z, norm, it, True
        J = system.jacobian(z)
        try:
            dz = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(J, -g, rcond=None)[0]
        if not np.all(np.isfinite(dz)):
            break
        if np.max(np.abs(dz)) <= STEP_FLOOR and norm <= STAGNATION_TOL:
            return z, norm, it, True
        alpha = system.max_step(z, dz)
        merit = float(g @ g)
        while alpha > 1e-14:
            z_new = z + alpha * dz
            if system.feasible(z_new):
                g_new = system.value(z_new)
                if float(g_new @ g_new) <= (1.0 - 1e-4 * alpha) * merit:
                    break
            alpha *= 0.5
        else:
            break
        z, g = z_new, g_new
        norm = float(np.max(np.abs(np.tanh(g / 2.0))))
    return z, norm, max_iter, norm <= tol


def solve_equilibrium(
    op: OperatingPoint,
    warm: Conversions | None = None,
    *,
    shift_residual: str = "mass-action",
    tol: float = RESIDUAL_TOL,
    max_iter: int = MAX_ITER,
    table: thermo.SpeciesThermoTable | None = None,
) -> EquilibriumSolution:
    """Solve the coupled reforming/shift equilibrium at ``op``.

    Starts are tried in order: the three default guesses, then ``warm``.
    Infeasible starts are skipped. Raises :class:`ConvergenceError` carrying
    the best residual if every start fails.

    ``residual_norm`` is evaluated on the solver's internal amounts. Feeding
    the returned extents back into :func:`residuals` agrees with it except
    where ``x_st - x_sh`` cancels (CO traces below roughly 600 K).
    """
    if shift_residual not in SHIFT_RESIDUAL_MODES:
        raise ValueError(f"shift_residual must be one of {SHIFT_RESIDUAL_MODES}")
    k_st = thermo.k_equilibrium(thermo.ReactionId.MSRR, op.T, table=table)
    k_sh = thermo.k_equilibrium(thermo.ReactionId.WGSR, op.T, table=table)
    system = _LogSystem(op.SC, op.NC, op.CC, op.P, k_st, k_sh, shift_residual)

    starts = list(DEFAULT_STARTS)
    if warm is not None:
        starts.append((warm.x_st, warm.x_sh))
    # small-SC fallback so at least one start is interior
    s = min(0.1, op.SC / 4.0)
    starts.append((s, s / 2.0))
    starts = [(x, x - y) for x, y in starts]

    best = math.inf
    for index, z0 in enumerate(starts):
        if not system.feasible(z0):
            continue
        z, norm, iters, ok = _newton(system, z0, tol, max_iter)
        if ok:
            x, c = float(z[0]), float(z[1])
            return EquilibriumSolution(Conversions(x, x - c), norm, iters, index)
        best = min(best, norm)
    raise ConvergenceError(f"equilibrium solve failed at {op} (best residual {best:.3e})", best)


def equilibrium_composition(op: OperatingPoint, **kw) -> GasComposition:
    sol = solve_equilibrium(op, **kw)
    return dry_composition(outlet_moles(sol.conv, op.SC, op.NC, op.CC))
