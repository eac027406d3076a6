"""Tests for the exact planar potential kernel and its consistency checks.

Verification strategy: the table's first entries are classical exact values
asserted verbatim; every interior point must satisfy the four-neighbour
mean property exactly, with the origin carrying a defect of exactly one;
an independent Dirichlet solve on a small patch must reproduce a table
entry; the large-distance residual against the logarithmic asymptote must
approach the known +-1/(6 pi) direction-dependent correction; Monte Carlo
visit counts are held to four standard errors at a fixed seed.
"""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recurmartin.potential import (
    PiRational,
    asymptotic_residual,
    origin_killed_green,
    potential_float_array,
    potential_mc,
    potential_table,
    verify_harmonicity,
)

TABLE = potential_table(26)


# ---------------------------------------------------------------------------
# Exact pi-rational arithmetic


def test_pirational_algebra():
    u = PiRational.of(1, 2)
    v = PiRational.of(3, -1)
    assert u + v == PiRational.of(4, 1)
    assert u - v == PiRational.of(-2, 3)
    assert -u == PiRational.of(-1, -2)
    assert 3 * u == PiRational.of(3, 6)
    assert u / 2 == PiRational.of(Fraction(1, 2), 1)
    assert u + 1 == PiRational.of(2, 2)
    assert bool(PiRational.of(0, 0)) is False
    assert bool(PiRational.of(0, 1)) is True


def test_pirational_products_are_refused():
    with pytest.raises(TypeError):
        PiRational.of(1, 0) * PiRational.of(0, 1)


def test_pirational_float_and_decimal():
    assert float(PiRational.of(1, 0)) == 1.0
    assert float(PiRational.of(0, 4)) == pytest.approx(4 / math.pi, rel=1e-15)
    text = PiRational.of(0, 4).decimal(30)
    assert text.startswith("1.2732395447351626861510701069")


# ---------------------------------------------------------------------------
# Table anchors


def test_first_table_entries_are_the_classical_values():
    assert TABLE.value((0, 0)) == PiRational.of(0, 0)
    assert TABLE.value((1, 0)) == PiRational.of(1, 0)
    assert TABLE.value((1, 1)) == PiRational.of(0, 4)
    assert TABLE.value((2, 0)) == PiRational.of(4, -8)
    assert TABLE.value((2, 1)) == PiRational.of(-1, 8)
    assert TABLE.value((2, 2)) == PiRational.of(0, Fraction(16, 3))


def test_table_respects_dihedral_symmetry():
    for i, j in ((3, 2), (5, 0), (4, 4), (6, 1)):
        v = TABLE.value((i, j))
        assert TABLE.value((j, i)) == v
        assert TABLE.value((-i, j)) == v
        assert TABLE.value((i, -j)) == v
        assert TABLE.value((-j, -i)) == v


def test_table_grows_along_the_axis():
    floats = [TABLE.float_value((n, 0)) for n in range(1, 12)]
    assert all(a < b for a, b in zip(floats, floats[1:]))


def test_points_outside_the_table_are_rejected():
    with pytest.raises(ValueError):
        TABLE.value((27, 0))
    with pytest.raises(ValueError):
        potential_table(0)


@settings(max_examples=40, deadline=None)
@given(i=st.integers(-10, 10), j=st.integers(-10, 10))
def test_four_neighbour_mean_property(i, j):
    if (i, j) == (0, 0):
        s = sum(
            (TABLE.value((i + di, j + dj)) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))),
            PiRational.of(0, 0),
        )
        assert s == PiRational.of(4, 0)  # defect of exactly one
    else:
        s = sum(
            (TABLE.value((i + di, j + dj)) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))),
            PiRational.of(0, 0),
        )
        assert s == 4 * TABLE.value((i, j))


# ---------------------------------------------------------------------------
# Consistency report


def test_harmonicity_report_is_clean():
    report = verify_harmonicity(potential_table(10))
    assert report.all_ok
    assert report.checked == 19 * 19 - 1
    assert report.violations == []
    assert report.origin_defect == 1
    assert report.symmetry_ok
    assert report.patch_oracle_ok is True
    assert "odd denominators" in report.odd_denominator_note


def test_patch_oracle_skipped_on_tiny_tables():
    report = verify_harmonicity(potential_table(4))
    assert report.patch_oracle_ok is None
    assert report.all_ok


# ---------------------------------------------------------------------------
# Killed Green values through the potential kernel


def test_origin_killed_green_closed_values():
    assert origin_killed_green(TABLE, (1, 0), (1, 0)) == PiRational.of(2, 0)
    assert origin_killed_green(TABLE, (1, 0), (0, 1)) == PiRational.of(2, -4)
    # visits are symmetric under swapping start and target (uniform weights)
    for x, y in (((2, 1), (1, 3)), ((4, 0), (1, 1))):
        assert origin_killed_green(TABLE, x, y) == origin_killed_green(TABLE, y, x)


def test_origin_killed_green_rejects_origin_start():
    with pytest.raises(ValueError):
        origin_killed_green(TABLE, (0, 0), (1, 0))


def test_origin_killed_green_nonnegative_on_sample():
    for x in ((1, 0), (2, 2), (5, 1)):
        for y in ((1, 0), (3, 2), (0, 4)):
            assert float(origin_killed_green(TABLE, x, y)) >= 0


# ---------------------------------------------------------------------------
# Asymptotics


def test_residual_decays_along_the_axis():
    r5 = abs(asymptotic_residual(TABLE, (5, 0)))
    r12 = abs(asymptotic_residual(TABLE, (12, 0)))
    r24 = abs(asymptotic_residual(TABLE, (24, 0)))
    assert r5 > r12 > r24
    assert r24 < 1e-4


def test_residual_approaches_direction_dependent_constant():
    # second-order term of the expansion: -1/(6 pi |x|^2) on the axis,
    # +1/(6 pi |x|^2) on the diagonal
    axis = asymptotic_residual(TABLE, (24, 0)) * 24**2
    diag = asymptotic_residual(TABLE, (24, 24)) * (2 * 24**2)
    assert axis * 6 * math.pi == pytest.approx(-1.0, abs=0.01)
    assert diag * 6 * math.pi == pytest.approx(1.0, abs=0.01)


def test_residual_rejects_origin():
    with pytest.raises(ValueError):
        asymptotic_residual(TABLE, (0, 0))


# ---------------------------------------------------------------------------
# Float rendering


def test_float_array_matches_exact_table():
    arr = potential_float_array(8)
    assert arr.shape[0] >= 9
    assert arr[0, 0] == 0.0
    assert arr[3, 1] == pytest.approx(TABLE.float_value((3, 1)), rel=1e-15)
    assert arr[1, 3] == arr[3, 1]
    small = potential_float_array(5)
    assert small.shape[0] >= 6
    assert np.array_equal(small[:9, :9][3:4, 1], arr[3:4, 1])


# ---------------------------------------------------------------------------
# Monte Carlo route


def test_potential_mc_within_four_stderr():
    oracle = potential_table(34)
    targets = [(1, 0), (2, 1), (30, 0)]
    results = potential_mc(
        (1, 0), targets, 3000, seed=515, escape_radius=24, on_cap="truncate"
    )
    for y, res in zip(targets, results):
        exact = float(origin_killed_green(oracle, (1, 0), y))
        assert abs(res.value - exact) <= 4 * res.stderr
    # far targets approach a(x): direct visits vanish, the tail carries all
    assert abs(results[-1].value - 1.0) < 0.15


def test_potential_mc_rejects_origin_start():
    with pytest.raises(ValueError):
        potential_mc((0, 0), [(1, 0)], 100, seed=1)
