"""Reactor state types shared by the kinetic and equilibrium models.

All amounts are expressed per mole of inlet methane, following the outlet row
of the reformer mole balance::

    H2O = SC - x_st - x_sh      CH4 = 1 - x_st      H2 = 3 x_st + x_sh
    CO2 = CC + x_sh             CO  = x_st - x_sh   N2 = NC
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from msr_surrogate.errors import InvariantError

#: Order of the dry-gas components everywhere (network outputs, CSV columns).
DRY_SPECIES = ("H2", "CH4", "CO", "CO2")
#: Order of the network inputs.
INPUT_NAMES = ("T", "m_cat", "SC", "NC", "f_CH4")

ATM = 101325.0


@dataclass(frozen=True)
class OperatingPoint:
    """One reactor condition.

    T [K], m_cat [g], SC/NC/CC feed ratios to methane [mol/mol],
    f_CH4 inlet methane flow [mol/s], P total pressure [Pa].
    """

    T: float
    m_cat: float
    SC: float
    NC: float
    f_CH4: float
    P: float = ATM
    CC: float = 0.0

    def __post_init__(self):
        bad = []
        if not self.T > 0:
            bad.append("T > 0")
        if not self.P > 0:
            bad.append("P > 0")
        if not self.f_CH4 > 0:
            bad.append("f_CH4 > 0")
        if not self.m_cat >= 0:
            bad.append("m_cat >= 0")
        if not self.SC > 0:
            bad.append("SC > 0")
        if not self.NC >= 0:
            bad.append("NC >= 0")
        if not self.CC >= 0:
            bad.append("CC >= 0")
        if bad:
            raise ValueError(f"invalid operating point {self}: requires {', '.join(bad)}")

    def inputs(self) -> np.ndarray:
        """Raw network input vector in ``INPUT_NAMES`` order."""
        return np.array([self.T, self.m_cat, self.SC, self.NC, self.f_CH4])

    def with_value(self, name: str, value: float) -> "OperatingPoint":
        if name not in {f.name for f in fields(self)}:
            raise KeyError(name)
        return replace(self, **{name: float(value)})


@dataclass(frozen=True)
class Conversions:
    """Reforming extent ``x_st`` and shift extent ``x_sh`` per mole of inlet CH4."""

    x_st: float
    x_sh: float


@dataclass(frozen=True)
class GasComposition:
    """Dry, nitrogen-free mole fractions."""

    H2: float
    CH4: float
    CO: float
    CO2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.H2, self.CH4, self.CO, self.CO2])

    @classmethod
    def from_array(cls, values, renormalize: bool = True) -> "GasComposition":
        v = np.asarray(values, dtype=float)
        if v.shape != (4,):
            raise ValueError(f"expected 4 fractions, got shape {v.shape}")
        if renormalize:
            v = v / v.sum()
        return cls(*(float(a) for a in v))


def outlet_moles(conv: Conversions, SC: float, NC: float, CC: float = 0.0) -> dict[str, float]:
    """Outlet amounts of every species per mole of inlet methane."""
    x, y = conv.x_st, conv.x_sh
    moles = {
        "H2O": SC - x - y,
        "CH4": 1.0 - x,
        "H2": 3.0 * x + y,
        "CO2": CC + y,
        "CO": x - y,
        "N2": NC,
    }
    negative = {k: v for k, v in moles.items() if v < 0.0}
    if negative:
        raise InvariantError(f"negative outlet amounts {negative} for {conv}, SC={SC}, CC={CC}")
    return moles


def dry_composition(moles: dict[str, float]) -> GasComposition:
    """Water- and nitrogen-free fractions of H2, CH4, CO, CO2."""
    values = np.array([moles[s] for s in DRY_SPECIES], dtype=float)
    total = math.fsum(values)
    if not total > 0.0:
        raise InvariantError(f"empty dry gas: {moles}")
    return GasComposition.from_array(values / total)


def element_totals(moles: dict[str, float]) -> dict[str, float]:
    """C, H, O atom totals of a species mapping (N2 excluded)."""
    g = moles.get
    return {
        "C": g("CH4", 0.0) + g("CO", 0.0) + g("CO2", 0.0),
        "H": 4 * g("CH4", 0.0) + 2 * g("H2O", 0.0) + 2 * g("H2", 0.0),
        "O": g("H2O", 0.0) + g("CO", 0.0) + 2 * g("CO2", 0.0),
    }


def inlet_moles(SC: float, NC: float, CC: float = 0.0) -> dict[str, float]:
    return {"H2O": SC, "CH4": 1.0, "H2": 0.0, "CO2": CC, "CO": 0.0, "N2": NC}
