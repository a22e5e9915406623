from typing import List

from pydantic import BaseModel, Field, model_validator

from zbstein.models import DependentFamily, FamilyOutcome, JointLaw


# Distribution file
class DistributionFile(BaseModel):
    """Schema for a distribution file: {"atoms": [...], "probs": [...]}."""
    atoms: List[float] = Field(..., min_length=1)
    probs: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_lengths(self) -> "DistributionFile":
        if len(self.atoms) != len(self.probs):
            raise ValueError("[length-mismatch] atoms and probs must have equal length")
        return self


# Family file
class JointLawFile(BaseModel):
    """Schema for the base law of (X_1..X_n)."""
    outcomes: List[List[float]] = Field(..., min_length=1)
    probs: List[float] = Field(..., min_length=1)


class FamilyLawEntry(BaseModel):
    """One weighted outcome of the law for index i."""
    values: List[float]
    alt: float
    prob: float = Field(..., ge=0.0)


class FamilyFile(BaseModel):
    """Schema for a dependent family file: base law plus one outcome list per index."""
    base: JointLawFile
    laws: List[List[FamilyLawEntry]]

    def to_family(self) -> DependentFamily:
        return DependentFamily(
            base=JointLaw(
                outcomes=tuple(tuple(o) for o in self.base.outcomes),
                probs=tuple(self.base.probs),
            ),
            laws=tuple(
                tuple(FamilyOutcome(values=tuple(e.values), alt=e.alt, prob=e.prob) for e in law)
                for law in self.laws
            ),
        )

    @classmethod
    def from_family(cls, family: DependentFamily) -> "FamilyFile":
        return cls(
            base=JointLawFile(
                outcomes=[list(o) for o in family.base.outcomes],
                probs=list(family.base.probs),
            ),
            laws=[
                [FamilyLawEntry(values=list(o.values), alt=o.alt, prob=o.prob) for o in law]
                for law in family.laws
            ],
        )
