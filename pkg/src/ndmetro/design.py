"""Pillar design model: mass, atom count, design rules and etch-stack planning.

All lengths are in nanometres unless a name says otherwise; masses are in kg.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field

from .errors import InvalidArgumentError, InvalidSpecError

NM3_TO_M3 = 1e-27
ATOMIC_MASS_UNIT_KG = 1.66053906660e-27

GRAVITY_TEST_MIN_MASS_KG = 1e-15
MASS_RSD_GOAL = 0.02
NV_DEPTH_THRESHOLDS_NM = (20.0, 30.0)
MAN_RESIST_MAX_NM = 1000.0
RELATIVE_MISMATCH_FLAG = 0.03


@dataclass(frozen=True)
class PillarSpec:
    length: float
    width: float
    height: float
    label: str = ""

    def __post_init__(self):
        for name in ("length", "width", "height"):
            value = getattr(self, name)
            if not isinstance(value, numbers.Real) or not math.isfinite(value):
                raise InvalidSpecError(f"{name} must be a finite number, got {value!r}")
            if value <= 0:
                raise InvalidSpecError(f"{name} must be positive, got {value!r}")

    @property
    def volume_nm3(self) -> float:
        return self.length * self.width * self.height


@dataclass(frozen=True)
class MaterialConstants:
    """Bulk diamond density and carbon atomic mass."""

    density: float = 3515.0
    atomic_mass: float = 12.011 * ATOMIC_MASS_UNIT_KG

    def __post_init__(self):
        if not (self.density > 0 and self.atomic_mass > 0):
            raise InvalidSpecError("density and atomic_mass must be positive")


DIAMOND = MaterialConstants()


@dataclass(frozen=True)
class ReferenceRow:
    label: str
    length: float
    width: float
    height: float
    mass_kg: float
    atom_count: float


# Published nominal pillar table. The first row's mass does not follow from
# density x volume (~5 % low); it is kept verbatim and flagged on use.
REFERENCE_PILLARS = {
    "nd1": ReferenceRow("ND1", 65, 45, 80, 7.8e-19, 3.9e7),
    "nd2": ReferenceRow("ND2", 200, 100, 300, 2.1e-17, 1.1e9),
    "nd3": ReferenceRow("ND3", 900, 400, 1600, 2.0e-15, 1.0e11),
}


@dataclass
class DesignReport:
    mass: float
    atom_count: float
    nv_margin: float
    nv_depth_threshold: float
    passes_threshold: bool
    pass_20nm: bool
    pass_30nm: bool
    distinct_dims: bool
    height_is_largest: bool
    gravity_test_eligible: bool
    mass_rsd_goal: float = MASS_RSD_GOAL
    reference: dict | None = field(default=None)

    def to_json(self) -> dict:
        out = {
            "mass_kg": self.mass,
            "atom_count": self.atom_count,
            "nv_margin_nm": self.nv_margin,
            "nv_depth_threshold_nm": self.nv_depth_threshold,
            "passes_threshold": self.passes_threshold,
            "pass_20nm": self.pass_20nm,
            "pass_30nm": self.pass_30nm,
            "distinct_dims": self.distinct_dims,
            "height_is_largest": self.height_is_largest,
            "gravity_test_eligible": self.gravity_test_eligible,
            "mass_rsd_goal": self.mass_rsd_goal,
        }
        if self.reference is not None:
            out["reference"] = self.reference
        return out


@dataclass(frozen=True)
class EtchStackPlan:
    etch_depth: float
    mask_thickness: float
    resist_thickness: float
    resist_thickness_sxarn: float
    selectivity_diamond_to_mask: float = 1.43
    selectivity_diamond_to_resist: float = 0.32
    selectivity_resist2_to_mask: float = 2.7
    feasible_with_maN: bool = True

    def to_json(self) -> dict:
        return {
            "etch_depth_nm": self.etch_depth,
            "mask_thickness_nm": self.mask_thickness,
            "resist_thickness_nm": self.resist_thickness,
            "resist_thickness_sxarn_nm": self.resist_thickness_sxarn,
            "selectivity_diamond_to_mask": self.selectivity_diamond_to_mask,
            "selectivity_diamond_to_resist": self.selectivity_diamond_to_resist,
            "selectivity_resist2_to_mask": self.selectivity_resist2_to_mask,
            "feasible_with_maN": self.feasible_with_maN,
        }


def compute_mass(spec: PillarSpec, mat: MaterialConstants = DIAMOND) -> float:
    """Mass of a solid cuboid pillar in kg."""
    if not isinstance(spec, PillarSpec):
        raise InvalidSpecError("expected a PillarSpec")
    return mat.density * spec.volume_nm3 * NM3_TO_M3


def compute_atom_count(mass: float, mat: MaterialConstants = DIAMOND) -> float:
    if not math.isfinite(mass) or mass < 0:
        raise InvalidArgumentError(f"mass must be a non-negative finite number, got {mass!r}")
    return mass / mat.atomic_mass


def match_reference(spec: PillarSpec) -> ReferenceRow | None:
    for row in REFERENCE_PILLARS.values():
        if (row.length, row.width, row.height) == (spec.length, spec.width, spec.height):
            return row
    return None


def compare_with_reference(row: ReferenceRow, mass: float, atoms: float) -> dict:
    """Relative deviation of computed values from a published table row.

    A row is flagged as a discrepancy when either quantity deviates by more
    than 3 %.
    """
    mass_dev = (mass - row.mass_kg) / row.mass_kg
    atom_dev = (atoms - row.atom_count) / row.atom_count
    return {
        "label": row.label,
        "reference_mass_kg": row.mass_kg,
        "reference_atom_count": row.atom_count,
        "mass_rel_dev": mass_dev,
        "atom_count_rel_dev": atom_dev,
        "mass_discrepancy": abs(mass_dev) > RELATIVE_MISMATCH_FLAG,
        "atom_count_discrepancy": abs(atom_dev) > RELATIVE_MISMATCH_FLAG,
    }


def check_design(spec: PillarSpec, nv_depth_threshold: float = 20.0,
                 mat: MaterialConstants = DIAMOND) -> DesignReport:
    """Evaluate the geometric design rules for a pillar.

    The NV centre is assumed to sit at the pillar centre, so its distance to
    the nearest face is half the smallest dimension. The margin is reported
    against ``nv_depth_threshold`` and against both ends of the 20-30 nm range.
    """
    if not math.isfinite(nv_depth_threshold) or nv_depth_threshold < 0:
        raise InvalidArgumentError("nv_depth_threshold must be a non-negative finite number")
    mass = compute_mass(spec, mat)
    atoms = compute_atom_count(mass, mat)
    margin = min(spec.length, spec.width, spec.height) / 2.0
    ref = match_reference(spec)
    return DesignReport(
        mass=mass,
        atom_count=atoms,
        nv_margin=margin,
        nv_depth_threshold=nv_depth_threshold,
        passes_threshold=margin >= nv_depth_threshold,
        pass_20nm=margin >= NV_DEPTH_THRESHOLDS_NM[0],
        pass_30nm=margin >= NV_DEPTH_THRESHOLDS_NM[1],
        distinct_dims=len({spec.length, spec.width, spec.height}) == 3,
        height_is_largest=spec.height > max(spec.length, spec.width),
        gravity_test_eligible=mass >= GRAVITY_TEST_MIN_MASS_KG,
        reference=compare_with_reference(ref, mass, atoms) if ref else None,
    )


def plan_etch_stack(etch_depth: float,
                    selectivity_diamond_to_mask: float = 1.43,
                    selectivity_diamond_to_resist: float = 0.32,
                    selectivity_resist2_to_mask: float = 2.7,
                    man_max_thickness: float = MAN_RESIST_MAX_NM) -> EtchStackPlan:
    """Hard-mask and resist thicknesses needed for a given diamond etch depth.

    The nitride mask must survive ``etch_depth / s_dm``. The resist that
    patterns the mask is sized by dividing the mask thickness by the resist
    selectivity: ``s_dr`` for the ma-N route, ``s_rm`` for the SX AR-N route.
    """
    for name, value in (("etch_depth", etch_depth),
                        ("selectivity_diamond_to_mask", selectivity_diamond_to_mask),
                        ("selectivity_diamond_to_resist", selectivity_diamond_to_resist),
                        ("selectivity_resist2_to_mask", selectivity_resist2_to_mask)):
        if not math.isfinite(value) or value <= 0:
            raise InvalidArgumentError(f"{name} must be positive, got {value!r}")
    mask = etch_depth / selectivity_diamond_to_mask
    resist = mask / selectivity_diamond_to_resist
    resist2 = mask / selectivity_resist2_to_mask
    return EtchStackPlan(
        etch_depth=etch_depth,
        mask_thickness=mask,
        resist_thickness=resist,
        resist_thickness_sxarn=resist2,
        selectivity_diamond_to_mask=selectivity_diamond_to_mask,
        selectivity_diamond_to_resist=selectivity_diamond_to_resist,
        selectivity_resist2_to_mask=selectivity_resist2_to_mask,
        feasible_with_maN=resist <= man_max_thickness,
    )
