"""
Belief masses over the {occupied, empty} frame.
"""
from pydantic import Field, model_validator

from conflictgrid.schemas.base import BaseSchema

MASS_TOLERANCE = 1e-9


class BeliefMass(BaseSchema):
    """Masses on O, E, Θ and ∅; they sum to one."""
    m_occupied: float = Field(0.0, ge=0.0, le=1.0, description="Mass on {occupied}")
    m_empty: float = Field(0.0, ge=0.0, le=1.0, description="Mass on {empty}")
    m_theta: float = Field(0.0, ge=0.0, le=1.0, description="Mass on Θ (ignorance)")
    m_conflict: float = Field(0.0, ge=0.0, le=1.0, description="Mass on ∅ (Smets only)")

    @model_validator(mode="after")
    def check_total(self) -> "BeliefMass":
        total = self.m_occupied + self.m_empty + self.m_theta + self.m_conflict
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"masses must sum to 1, got {total!r}")
        return self

    @classmethod
    def vacuous(cls) -> "BeliefMass":
        return cls(m_theta=1.0)

    @classmethod
    def from_masses(
        cls, occupied: float = 0.0, empty: float = 0.0, conflict: float = 0.0
    ) -> "BeliefMass":
        """Build a mass with the remainder assigned to Θ."""
        theta = 1.0 - occupied - empty - conflict
        if -MASS_TOLERANCE < theta < 0.0:
            theta = 0.0
        return cls(m_occupied=occupied, m_empty=empty, m_theta=theta, m_conflict=conflict)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.m_occupied, self.m_empty, self.m_theta, self.m_conflict)


class ConflictObservation(BaseSchema):
    """Conflict produced by one combination."""
    k: float = Field(..., ge=0.0, le=1.0, description="Mass on empty intersections")
    con: float = Field(..., ge=0.0, description="Weight of conflict ln(1/(1-k))")
    smets_empty_delta: float = Field(0.0, description="Change in m(∅) from this update")
    saturated: bool = Field(False, description="k was capped before taking the log")
