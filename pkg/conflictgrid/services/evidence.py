"""
Belief-mass algebra over the {occupied, empty} frame.

The kernels below take plain floats or numpy arrays alike, so the scalar API and
the grid share one implementation. Sums are grouped so that swapping the two
operands yields bit-identical results.
"""
import math
from typing import NamedTuple

import numpy as np

from conflictgrid.core.exceptions import EvidenceDomainError, SaturationError
from conflictgrid.schemas.evidence import BeliefMass, ConflictObservation

SATURATION_EPS = 1e-9
K_CAP = 1.0 - SATURATION_EPS


class MassArrays(NamedTuple):
    """Masses on O, E, Θ, ∅ as parallel floats or arrays."""
    o: np.ndarray
    e: np.ndarray
    t: np.ndarray
    c: np.ndarray


class ConflictWeight(NamedTuple):
    value: float
    saturated: bool


def conflict_factor_arrays(a: MassArrays, b: MassArrays) -> np.ndarray:
    """Mass landing on ∅: O∩E, E∩O, and anything meeting ∅."""
    return np.minimum((a.o * b.e + a.e * b.o) + (a.c + b.c) - a.c * b.c, 1.0)


def conjunctive_arrays(a: MassArrays, b: MassArrays) -> MassArrays:
    """Unnormalized conjunctive combination; ∅ keeps the conflict."""
    o = a.o * b.o + (a.o * b.t + a.t * b.o)
    e = a.e * b.e + (a.e * b.t + a.t * b.e)
    t = a.t * b.t
    return MassArrays(o, e, t, conflict_factor_arrays(a, b))


def weight_of_conflict_arrays(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise ln(1/(1-k)) with k capped at 1-ε; returns (con, saturated)."""
    saturated = k >= K_CAP
    con = -np.log1p(-np.minimum(k, K_CAP))
    return con, saturated


def dempster_arrays(
    a: MassArrays, b: MassArrays
) -> tuple[MassArrays, np.ndarray, np.ndarray, np.ndarray]:
    """
    Normalized combination for ∅-free inputs.

    Saturated elements come back vacuous. Returns (masses, k, con, saturated).
    """
    joint = conjunctive_arrays(a, b)
    k = joint.c
    con, saturated = weight_of_conflict_arrays(k)
    # o + e + t is 1 - k up to rounding.
    norm = np.where(saturated, 1.0, joint.o + joint.e + joint.t)
    o = np.where(saturated, 0.0, joint.o / norm)
    e = np.where(saturated, 0.0, joint.e / norm)
    t = np.where(saturated, 1.0, joint.t / norm)
    return MassArrays(o, e, t, np.zeros_like(o)), k, con, saturated


def _as_arrays(mass: BeliefMass) -> MassArrays:
    return MassArrays(*(np.float64(v) for v in mass.as_tuple()))


def conflict_k(a: BeliefMass, b: BeliefMass) -> float:
    """
    Conflict factor k between two belief masses.

    Args:
        a: First belief mass
        b: Second belief mass

    Returns:
        Total product mass on empty intersections, in [0, 1]
    """
    return float(conflict_factor_arrays(_as_arrays(a), _as_arrays(b)))


def weight_of_conflict(k: float) -> ConflictWeight:
    """
    Weight of conflict Con = ln(1/(1-k)), natural log.

    k is capped at 1-1e-9 so that total contradiction stays finite; the result is
    flagged as saturated when the cap applied.

    Raises:
        EvidenceDomainError: k is outside [0, 1]
    """
    if not 0.0 <= k <= 1.0:
        raise EvidenceDomainError(k, f"conflict factor {k!r} is outside [0, 1]")
    saturated = k >= K_CAP
    return ConflictWeight(-math.log1p(-min(k, K_CAP)), saturated)


def combine_dempster(a: BeliefMass, b: BeliefMass) -> tuple[BeliefMass, ConflictObservation]:
    """
    Dempster's rule: conjunctive combination renormalized by (1-k).

    Raises:
        EvidenceDomainError: either input carries mass on ∅
        SaturationError: k >= 1-1e-9
    """
    for operand in (a, b):
        if operand.m_conflict > 0.0:
            raise EvidenceDomainError(
                operand.m_conflict, "Dempster combination does not accept mass on the empty set"
            )
    joint = conjunctive_arrays(_as_arrays(a), _as_arrays(b))
    k = float(joint.c)
    weight = weight_of_conflict(k)
    if weight.saturated:
        raise SaturationError(k)
    norm = float(joint.o + joint.e + joint.t)
    combined = BeliefMass(
        m_occupied=float(joint.o) / norm,
        m_empty=float(joint.e) / norm,
        m_theta=float(joint.t) / norm,
    )
    return combined, ConflictObservation(k=k, con=weight.value)


def combine_smets(a: BeliefMass, b: BeliefMass) -> tuple[BeliefMass, ConflictObservation]:
    """
    Smets' unnormalized conjunctive rule; the empty set accumulates conflict.

    The observation's k is the conflict of this combination alone (mass reaching ∅
    from O/E disagreement and from ∅ operands), and its delta is the change in m(∅)
    relative to `a`.
    """
    joint = conjunctive_arrays(_as_arrays(a), _as_arrays(b))
    combined = BeliefMass(
        m_occupied=float(joint.o),
        m_empty=float(joint.e),
        m_theta=float(joint.t),
        m_conflict=float(joint.c),
    )
    k = float(joint.c)
    weight = weight_of_conflict(k)
    observation = ConflictObservation(
        k=k,
        con=weight.value,
        smets_empty_delta=combined.m_conflict - a.m_conflict,
        saturated=weight.saturated,
    )
    return combined, observation
