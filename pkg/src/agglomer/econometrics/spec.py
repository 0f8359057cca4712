"""Declarative regression specifications.

JSON form:
    {"family": "logistic", "response": "entry",
     "covariates": [{"col": "M_immi", "transform": "identity"}, ...],
     "interactions": [["omega_immi", "omega_births"]],
     "fixed_effects": [["broad_category", "region", "century"], ["category", "century"]],
     "clusters": ["region", "century"]}
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

FAMILIES = ("logistic", "negbin", "gaussian")

TRANSFORMS = {
    "identity": lambda x: x,
    "asinh": np.arcsinh,
    "log": np.log,
}


def covariate_name(col, transform):
    return col if transform == "identity" else f"{transform}({col})"


@dataclass(frozen=True)
class Covariate:
    col: str
    transform: str = "identity"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValidationError(f"unknown transform {self.transform!r}")

    @property
    def name(self):
        return covariate_name(self.col, self.transform)

    def apply(self, values):
        return TRANSFORMS[self.transform](np.asarray(values, dtype=np.float64))


@dataclass(frozen=True)
class RegressionSpec:
    family: str
    response: str
    covariates: tuple = ()
    interactions: tuple = ()  # pairs of covariate source-column names
    fixed_effects: tuple = ()  # tuples of panel columns, each an interacted factor
    clusters: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        if any(c.col == self.response for c in self.covariates):
            raise ValidationError("response cannot appear among covariates")
        cov_cols = {c.col for c in self.covariates}
        for a, b in self.interactions:
            if a not in cov_cols or b not in cov_cols:
                raise ValidationError(f"interaction ({a}, {b}) references a non-covariate")

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=d["family"],
            response=d["response"],
            covariates=tuple(
                Covariate(c["col"], c.get("transform", "identity"))
                for c in d.get("covariates", [])
            ),
            interactions=tuple(tuple(p) for p in d.get("interactions", [])),
            fixed_effects=tuple(tuple(f) for f in d.get("fixed_effects", [])),
            clusters=tuple(d.get("clusters", [])),
        )

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "family": self.family,
            "response": self.response,
            "covariates": [{"col": c.col, "transform": c.transform} for c in self.covariates],
            "interactions": [list(p) for p in self.interactions],
            "fixed_effects": [list(f) for f in self.fixed_effects],
            "clusters": list(self.clusters),
        }
