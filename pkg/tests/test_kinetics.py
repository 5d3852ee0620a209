import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msr_surrogate import kinetics as kin
from msr_surrogate import thermo
from msr_surrogate.errors import InvariantError
from msr_surrogate.state import (
    Conversions,
    OperatingPoint,
    dry_composition,
    element_totals,
    inlet_moles,
    outlet_moles,
)
from oracles import shift_bisection

P = kin.KineticParams()
FIG3_KINETIC = OperatingPoint(T=898.15, m_cat=1.48, SC=3.0, NC=3.0, f_CH4=3.38e-5)


def test_rate_constant_values():
    assert kin.rate_constant(P, 898.15) == pytest.approx(5.12e-11, rel=2e-3)
    assert kin.rate_constant(P, 973.15) == pytest.approx(1.68e-10, rel=2e-3)


def test_rate_constant_linear_in_prefactor():
    doubled = kin.KineticParams(A=2 * P.A)
    assert kin.rate_constant(doubled, 950.0) == pytest.approx(2 * kin.rate_constant(P, 950.0), rel=1e-15)
    with pytest.raises(ValueError):
        kin.KineticParams(A=0.0)


def test_rate_constant_increasing():
    ks = [kin.rate_constant(P, T) for T in range(500, 1500, 10)]
    assert all(b > a for a, b in zip(ks, ks[1:]))


def test_reaction_rate_fig3():
    p_ch4, _ = kin.inlet_partial_pressures(FIG3_KINETIC)
    assert p_ch4 == pytest.approx(101325 / 7)
    # chain: 1.48 g * k(898.15) * 14475 Pa
    expected = 1.48 * 2.582e-4 * math.exp(-115255 / (8.314472 * 898.15)) * (101325 / 7)
    assert kin.reaction_rate(P, FIG3_KINETIC) == pytest.approx(expected, rel=1e-14)
    assert kin.reaction_rate(P, FIG3_KINETIC) == pytest.approx(1.10e-6, rel=5e-3)


def test_reaction_rate_zero_catalyst():
    assert kin.reaction_rate(P, FIG3_KINETIC.with_value("m_cat", 0.0)) == 0.0


def test_reaction_rate_b_zero_depends_on_sc_only_via_dilution():
    a = FIG3_KINETIC.with_value("SC", 2.0)
    b = FIG3_KINETIC.with_value("SC", 1.0).with_value("NC", 4.0)
    assert kin.reaction_rate(P, a) == pytest.approx(kin.reaction_rate(P, b), rel=1e-15)


def test_kinetic_conversion_fig3_unclamped():
    kc = kin.kinetic_reforming_conversion(P, FIG3_KINETIC)
    assert kc.x_st == pytest.approx(0.0324, abs=5e-4)
    assert not kc.clamped


def test_kinetic_conversion_zero_rate():
    kc = kin.kinetic_reforming_conversion(P, FIG3_KINETIC.with_value("m_cat", 0.0))
    assert kc.x_st == 0.0 and not kc.clamped


def test_kinetic_conversion_clamps_at_equilibrium():
    kc = kin.kinetic_reforming_conversion(P, FIG3_KINETIC.with_value("m_cat", 1e6))
    assert kc.clamped and kc.x_st == kc.x_eq
    assert 0.5 < kc.x_eq < 1


def test_kinetic_conversion_monotone_in_mass_and_temperature():
    masses = [0.1 * 1.5**k for k in range(25)]
    xs = [kin.kinetic_reforming_conversion(P, FIG3_KINETIC.with_value("m_cat", m)).x_st for m in masses]
    assert all(b >= a for a, b in zip(xs, xs[1:]))
    assert any(kin.kinetic_reforming_conversion(P, FIG3_KINETIC.with_value("m_cat", m)).clamped for m in masses)
    temps = [700 + 10 * k for k in range(50)]
    op = FIG3_KINETIC.with_value("m_cat", 10.0)
    xs = [kin.kinetic_reforming_conversion(P, op.with_value("T", T)).x_st for T in temps]
    assert all(b >= a for a, b in zip(xs, xs[1:]))


def test_shift_extent_limits():
    assert kin.shift_extent(0.3, 3.0, 0.0, 1e-300) == pytest.approx(0.0, abs=1e-12)
    assert kin.shift_extent(0.0, 3.0, 0.0, 2.0) == 0.0


def test_shift_extent_fig3_matches_bisection():
    k_sh = thermo.k_equilibrium(thermo.ReactionId.WGSR, 898.15)
    got = kin.shift_extent(0.0324, 3.0, 0.0, k_sh)
    assert got == pytest.approx(shift_bisection(0.0324, 3.0, 0.0, k_sh), abs=1e-10)


def test_shift_extent_degenerate_branch():
    x_st, SC = 0.4, 2.5
    got = kin.shift_extent(x_st, SC, 0.0, 1.0)
    assert got == pytest.approx(shift_bisection(x_st, SC, 0.0, 1.0), abs=1e-12)
    near = kin.shift_extent(x_st, SC, 0.0, 1.0 + 1e-9)
    assert near == pytest.approx(got, abs=1e-8)


def test_shift_extent_random_cases_match_bisection():
    rng = random.Random(7)
    for _ in range(1000):
        SC = rng.uniform(0.5, 6.0)
        x_st = rng.uniform(0.0, min(1.0, SC) * 0.999)
        CC = rng.choice([0.0, rng.uniform(0.0, 2.0)])
        K = 10 ** rng.uniform(-3, 3)
        assert kin.shift_extent(x_st, SC, CC, K) == pytest.approx(shift_bisection(x_st, SC, CC, K), abs=1e-10)


@settings(max_examples=300, deadline=None)
@given(
    SC=st.floats(0.2, 8.0),
    frac=st.floats(0.0, 1.0),
    CC=st.floats(0.0, 3.0),
    logK=st.floats(-3.0, 3.0),
)
def test_shift_extent_always_admissible(SC, frac, CC, logK):
    x_st = frac * min(1.0, SC)
    x_sh = kin.shift_extent(x_st, SC, CC, 10**logK)
    lo, hi = kin.shift_bounds(x_st, SC, CC)
    assert lo <= x_sh <= hi
    if CC == 0.0:
        assert 0.0 <= x_sh <= x_st


def test_outlet_moles_example():
    m = outlet_moles(Conversions(0.5, 0.1), SC=3.0, NC=0.0, CC=0.0)
    assert m["H2O"] == pytest.approx(2.4)
    assert m["CH4"] == pytest.approx(0.5)
    assert m["H2"] == pytest.approx(1.6)
    assert m["CO2"] == pytest.approx(0.1)
    assert m["CO"] == pytest.approx(0.4)
    assert m["CH4"] + m["CO"] + m["CO2"] == pytest.approx(1.0, abs=1e-15)


def test_outlet_moles_identity_and_invariant():
    assert outlet_moles(Conversions(0.0, 0.0), 2.0, 1.0, 0.5) == inlet_moles(2.0, 1.0, 0.5)
    with pytest.raises(InvariantError):
        outlet_moles(Conversions(0.5, 0.6), 3.0, 0.0)


def test_dry_composition_example():
    c = dry_composition(outlet_moles(Conversions(0.5, 0.1), 3.0, 0.0))
    assert c.H2 == pytest.approx(1.6 / 2.6)
    assert c.CH4 == pytest.approx(0.5 / 2.6)
    assert c.CO == pytest.approx(0.4 / 2.6)
    assert c.CO2 == pytest.approx(0.1 / 2.6)
    assert c.as_array().round(4).tolist() == [0.6154, 0.1923, 0.1538, 0.0385]
    feed = dry_composition(outlet_moles(Conversions(0.0, 0.0), 3.0, 3.0))
    assert feed.as_array().tolist() == [0.0, 1.0, 0.0, 0.0]


@settings(max_examples=300, deadline=None)
@given(SC=st.floats(0.5, 6.0), NC=st.floats(0.0, 6.0), CC=st.floats(0.0, 2.0), a=st.floats(0, 1), b=st.floats(0, 1))
def test_elemental_balance_and_normalisation(SC, NC, CC, a, b):
    x_st = a * min(1.0, SC)
    lo, hi = kin.shift_bounds(x_st, SC, CC)
    x_sh = lo + b * (hi - lo)
    out = outlet_moles(Conversions(x_st, x_sh), SC, NC, CC)
    e_in = element_totals(inlet_moles(SC, NC, CC))
    e_out = element_totals(out)
    for el in "CHO":
        assert e_out[el] == pytest.approx(e_in[el], rel=1e-12, abs=1e-14)
    assert abs(dry_composition(out).as_array().sum() - 1.0) <= 1e-15


def test_kinetic_composition_fig3():
    comp = kin.kinetic_composition(P, FIG3_KINETIC)
    assert abs(comp.as_array().sum() - 1.0) < 1e-15
    assert comp.CH4 > 0.8  # low-conversion kinetic regime


def test_clamped_conversion_never_exceeds_equilibrium():
    rng = random.Random(3)
    for _ in range(60):
        op = OperatingPoint(
            T=rng.uniform(773, 1073), m_cat=10 ** rng.uniform(-1, 2), SC=rng.uniform(1, 4),
            NC=rng.uniform(0, 6), f_CH4=10 ** rng.uniform(-5, -3.7),
        )
        kc = kin.kinetic_reforming_conversion(P, op)
        assert kc.x_st <= kc.x_eq + 1e-12
