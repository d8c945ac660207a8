"""
Base Pydantic schemas with common configurations.
"""
from pydantic import BaseModel, ConfigDict


class BaseSchema(BaseModel):
    """Base schema: immutable value objects that reject unknown fields."""
    model_config = ConfigDict(frozen=True, extra="forbid")
