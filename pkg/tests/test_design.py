import math

import pytest
from hypothesis import given, strategies as st

from ndmetro.design import (
    DIAMOND, REFERENCE_PILLARS, PillarSpec, check_design, compute_atom_count, compute_mass,
    plan_etch_stack,
)
from ndmetro.errors import InvalidArgumentError, InvalidSpecError

# independent constants: CODATA atomic mass unit and carbon's standard atomic weight
AMU = 1.66053906660e-27
M_C = 12.011 * AMU
RHO = 3515.0


def oracle_mass(l, w, h):
    return RHO * (l * 1e-9) * (w * 1e-9) * (h * 1e-9)


@pytest.mark.parametrize("dims, expected", [
    ((200, 100, 300), 2.109e-17),
    ((900, 400, 1600), 2.02464e-15),
    ((65, 45, 80), 8.2251e-19),
])
def test_mass_matches_volume_times_density(dims, expected):
    m = compute_mass(PillarSpec(*dims))
    assert m == pytest.approx(oracle_mass(*dims), rel=1e-12)
    assert m == pytest.approx(expected, rel=1e-4)


def test_mass_close_to_table():
    nd2, nd3 = REFERENCE_PILLARS["nd2"], REFERENCE_PILLARS["nd3"]
    m2 = compute_mass(PillarSpec(nd2.length, nd2.width, nd2.height))
    m3 = compute_mass(PillarSpec(nd3.length, nd3.width, nd3.height))
    assert abs(m2 / nd2.mass_kg - 1) < 0.01
    # 2.025e-15 against a table entry rounded to 2.0e-15
    assert m3 == pytest.approx(2.02e-15, rel=0.01)
    assert abs(m3 / nd3.mass_kg - 1) < 0.03


def test_atom_counts_against_table():
    assert compute_atom_count(2.02e-15) == pytest.approx(1.0e11, rel=0.02)
    assert compute_atom_count(2.11e-17) == pytest.approx(1.1e9, rel=0.04)
    assert compute_atom_count(0.0) == 0.0
    assert compute_atom_count(2.11e-17) == pytest.approx(2.11e-17 / M_C, rel=1e-12)


def test_negative_mass_rejected():
    with pytest.raises(InvalidArgumentError):
        compute_atom_count(-1e-20)


@pytest.mark.parametrize("dims", [(0, 1, 1), (1, -2, 1), (1, 1, float("nan")),
                                  (1, 1, float("inf"))])
def test_degenerate_dimensions_rejected(dims):
    with pytest.raises(InvalidSpecError):
        PillarSpec(*dims)


def test_small_pillar_design_rules():
    rep = check_design(PillarSpec(65, 45, 80))
    assert rep.nv_margin == pytest.approx(22.5)
    assert rep.pass_20nm and not rep.pass_30nm
    assert rep.distinct_dims and rep.height_is_largest
    assert not rep.gravity_test_eligible
    # published mass for this row is ~5 % below volume x density
    assert rep.reference["mass_discrepancy"] is True
    assert rep.reference["reference_mass_kg"] == 7.8e-19


def test_equal_sides_not_distinct():
    assert check_design(PillarSpec(100, 100, 300)).distinct_dims is False


def test_large_pillar_gravity_eligible():
    rep = check_design(PillarSpec(900, 400, 1600))
    assert rep.mass == pytest.approx(2.02e-15, rel=0.01)
    assert rep.gravity_test_eligible


def test_threshold_parameter_changes_verdict():
    spec = PillarSpec(65, 45, 80)
    assert check_design(spec, 20).passes_threshold
    assert not check_design(spec, 25).passes_threshold


def test_report_json_keys():
    doc = check_design(PillarSpec(200, 100, 300)).to_json()
    for key in ("mass_kg", "atom_count", "nv_margin_nm", "pass_20nm", "pass_30nm",
                "distinct_dims", "height_is_largest", "gravity_test_eligible"):
        assert key in doc
    assert "reference" in doc


def test_unlisted_design_has_no_reference():
    assert check_design(PillarSpec(10, 20, 30)).reference is None


@given(st.floats(1, 5000), st.floats(1, 5000), st.floats(1, 5000))
def test_mass_scales_with_volume(l, w, h):
    m = compute_mass(PillarSpec(l, w, h))
    assert m == pytest.approx(oracle_mass(l, w, h), rel=1e-9)
    assert compute_mass(PillarSpec(2 * l, w, h)) == pytest.approx(2 * m, rel=1e-9)


@given(st.floats(1, 5000), st.floats(1, 5000), st.floats(1, 5000))
def test_margin_is_half_smallest_dimension(l, w, h):
    rep = check_design(PillarSpec(l, w, h))
    assert rep.nv_margin == pytest.approx(min(l, w, h) / 2)
    assert rep.pass_20nm == (min(l, w, h) / 2 >= 20)
    assert (not rep.pass_30nm) or rep.pass_20nm
    assert rep.gravity_test_eligible == (rep.mass >= 1e-15)


@given(st.floats(1, 5000))
def test_etch_plan_composes(d):
    plan = plan_etch_stack(d)
    assert plan.mask_thickness * 1.43 == pytest.approx(d, rel=1e-12)
    assert plan.resist_thickness * 0.32 == pytest.approx(plan.mask_thickness, rel=1e-12)
    assert plan.feasible_with_maN == (plan.resist_thickness <= 1000)


def test_etch_plan_small():
    plan = plan_etch_stack(300)
    assert plan.mask_thickness == pytest.approx(300 / 1.43)
    assert plan.resist_thickness == pytest.approx(300 / 1.43 / 0.32)
    assert plan.mask_thickness == pytest.approx(210, abs=1)
    assert plan.resist_thickness == pytest.approx(656, abs=1)
    assert plan.feasible_with_maN


def test_etch_plan_large():
    plan = plan_etch_stack(1600)
    assert plan.mask_thickness == pytest.approx(1119, abs=1)
    assert plan.resist_thickness == pytest.approx(3497, abs=1)
    assert plan.resist_thickness_sxarn == pytest.approx(414, abs=1)
    assert not plan.feasible_with_maN


@pytest.mark.parametrize("args", [(0,), (-5,), (300, 0), (300, 1.43, -1), (300, 1.43, 0.32, 0)])
def test_etch_plan_rejects_non_positive(args):
    with pytest.raises(InvalidArgumentError):
        plan_etch_stack(*args)


@given(st.floats(1, 1e4))
def test_etch_plan_linear_in_depth(d):
    a, b = plan_etch_stack(d), plan_etch_stack(2 * d)
    assert b.mask_thickness == pytest.approx(2 * a.mask_thickness)
    assert b.resist_thickness == pytest.approx(2 * a.resist_thickness)


def test_default_material_is_diamond():
    assert DIAMOND.density == RHO
    assert DIAMOND.atomic_mass == pytest.approx(M_C, rel=1e-12)
    assert math.isclose(compute_mass(PillarSpec(1, 1, 1)), RHO * 1e-27)
