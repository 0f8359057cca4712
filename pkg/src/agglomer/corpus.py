"""Biography ingestion, century assignment, mobility roles and count tensors.

Input files are plain CSV (see the README for the exact headers). The
ingested corpus is an immutable bundle of biographies, taxonomy, region
registry and population data, from which integer count tensors per mobility
role are tabulated.
"""

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import (
    EmptyAfterFilter,
    MissingRegion,
    OutOfRange,
    UnknownOccupation,
    ValidationError,
)

ROLES = ("births", "deaths", "immi", "emi")
CENTURY_MIN = 11
CENTURY_MAX = 20
CENTURIES = tuple(range(CENTURY_MIN, CENTURY_MAX + 1))

# Occupation removed from every analysis regardless of counts.
DROPPED_OCCUPATION = "companion"


@dataclass(frozen=True)
class Biography:
    id: str
    occupation: str
    birth_year: Optional[int]
    birth_region: Optional[str]
    death_year: Optional[int]
    death_region: Optional[str]


@dataclass(frozen=True)
class RegionRecord:
    region_code: str
    name: str
    country: str
    centroid_lat: float
    centroid_lon: float


@dataclass(frozen=True)
class MobilityRecord:
    id: str
    occupation: str
    century: int
    birth_region: Optional[str]
    death_region: Optional[str]

    @property
    def is_migrant(self):
        return (
            self.birth_region is not None
            and self.death_region is not None
            and self.birth_region != self.death_region
        )


class Taxonomy:
    """Occupation -> (category, broad category) mapping.

    The category -> broad category relation must be functional: one
    category cannot sit under two broad categories.
    """

    def __init__(self, mapping):
        self._map = dict(mapping)
        cat_to_broad = {}
        for occ, (cat, broad) in self._map.items():
            if cat in cat_to_broad and cat_to_broad[cat] != broad:
                raise ValidationError(
                    f"category {cat!r} mapped to both {cat_to_broad[cat]!r} and {broad!r}"
                )
            cat_to_broad[cat] = broad
        self._cat_to_broad = cat_to_broad

    def __contains__(self, occupation):
        return occupation in self._map

    def occupations(self):
        return sorted(self._map)

    def category(self, occupation):
        try:
            return self._map[occupation][0]
        except KeyError:
            raise UnknownOccupation(occupation) from None

    def broad_category(self, occupation):
        try:
            return self._map[occupation][1]
        except KeyError:
            raise UnknownOccupation(occupation) from None

    def to_dict(self):
        return {occ: list(pair) for occ, pair in sorted(self._map.items())}


def assign_century(birth_year):
    """Century index of a birth year: 1600-1699 -> 17."""
    if not CENTURY_MIN * 100 - 100 <= birth_year <= CENTURY_MAX * 100 - 1:
        raise OutOfRange(f"birth year {birth_year} outside [1000, 1999]")
    return birth_year // 100 + 1


def classify_mobility(b: Biography) -> MobilityRecord:
    """Derive century and mobility roles from a biography.

    The century is anchored at the birth year only. Migration flags are
    set only when both regions are known and differ; a biography missing
    one region contributes only to the single-ended counts.
    """
    if b.birth_region is None and b.death_region is None:
        raise MissingRegion(f"biography {b.id}: no birth or death region")
    return MobilityRecord(
        id=b.id,
        occupation=b.occupation,
        century=assign_century(b.birth_year),
        birth_region=b.birth_region,
        death_region=b.death_region,
    )


class CountTensor:
    """Integer counts indexed by (region, occupation, century, role).

    Regions and occupations are kept sorted so that every downstream
    artifact is deterministic.
    """

    def __init__(self, regions, occupations):
        self.regions = tuple(sorted(regions))
        self.occupations = tuple(sorted(occupations))
        self._region_idx = {r: i for i, r in enumerate(self.regions)}
        self._occ_idx = {k: i for i, k in enumerate(self.occupations)}
        self.counts = {
            role: np.zeros(
                (len(self.regions), len(self.occupations), len(CENTURIES)), dtype=np.int64
            )
            for role in ROLES
        }

    def region_index(self, region):
        return self._region_idx[region]

    def occupation_index(self, occupation):
        return self._occ_idx[occupation]

    @staticmethod
    def century_axis(t):
        if t not in CENTURIES:
            raise OutOfRange(f"century {t} outside {CENTURY_MIN}..{CENTURY_MAX}")
        return t - CENTURY_MIN

    def add(self, role, region, occupation, t, n=1):
        self.counts[role][
            self._region_idx[region], self._occ_idx[occupation], self.century_axis(t)
        ] += n

    def slice(self, role, t):
        """Copy of the (region x occupation) count matrix for one role/century."""
        return self.counts[role][:, :, self.century_axis(t)].copy()

    def total(self, role):
        return int(self.counts[role].sum())


def tabulate_counts(records, regions, occupations):
    """Aggregate mobility records into a CountTensor.

    Births count everyone born in a region, deaths everyone who died
    there; immi/emi count each cross-region move once at each end.
    """
    tensor = CountTensor(regions, occupations)
    for rec in records:
        if rec.birth_region is not None:
            tensor.add("births", rec.birth_region, rec.occupation, rec.century)
        if rec.death_region is not None:
            tensor.add("deaths", rec.death_region, rec.occupation, rec.century)
        if rec.is_migrant:
            tensor.add("immi", rec.death_region, rec.occupation, rec.century)
            tensor.add("emi", rec.birth_region, rec.occupation, rec.century)
    return tensor


def sparse_cutoff(t):
    """Row/column count at or below which a region/occupation is dropped."""
    return 5 if t >= 16 else 3


def filter_sparse(matrix, t):
    """Single-pass sparse-cell filter on one (region x occupation) count matrix.

    Returns boolean masks (kept_regions, kept_occupations). Margins are
    computed once on the input matrix; dropping is not iterated.
    """
    matrix = np.asarray(matrix)
    cutoff = sparse_cutoff(t)
    kept_regions = matrix.sum(axis=1) > cutoff
    kept_occupations = matrix.sum(axis=0) > cutoff
    if not kept_regions.any() or not kept_occupations.any():
        raise EmptyAfterFilter(f"no regions or occupations above cutoff {cutoff} at t={t}")
    return kept_regions, kept_occupations


def nearest_centroid_geocode(lat, lon, regions):
    """Region with the closest centroid; ties break to the smallest code."""
    if not regions:
        raise ValidationError("empty region registry")
    regs = sorted(regions, key=lambda r: r.region_code)
    lats = np.array([r.centroid_lat for r in regs])
    lons = np.array([r.centroid_lon for r in regs])
    d = kernels.haversine_matrix(
        np.concatenate(([lat], lats)), np.concatenate(([lon], lons))
    )[0, 1:]
    return regs[int(np.argmin(d))].region_code


class Corpus:
    """Immutable ingest result: biographies, registries and the count tensor."""

    def __init__(self, biographies, taxonomy, regions, population, exclusions=None):
        self.biographies = tuple(biographies)
        self.taxonomy = taxonomy
        self.regions = {r.region_code: r for r in regions}
        self.population = dict(population)  # (region_code, century) -> persons
        self.exclusions = dict(exclusions or {})
        self.records = tuple(classify_mobility(b) for b in self.biographies)
        self.tensor = tabulate_counts(
            self.records, sorted(self.regions), self.taxonomy.occupations()
        )

    @property
    def n_individuals(self):
        return len(self.biographies)

    def centuries_present(self):
        totals = sum(self.tensor.counts[role] for role in ROLES)
        return [t for t in CENTURIES if totals[:, :, CountTensor.century_axis(t)].sum() > 0]

    def region_records_sorted(self):
        return [self.regions[c] for c in sorted(self.regions)]

    def to_dict(self):
        return {
            "biographies": [
                {
                    "id": b.id,
                    "occupation": b.occupation,
                    "birth_year": b.birth_year,
                    "birth_region": b.birth_region,
                    "death_year": b.death_year,
                    "death_region": b.death_region,
                }
                for b in self.biographies
            ],
            "taxonomy": self.taxonomy.to_dict(),
            "regions": [
                {
                    "region_code": r.region_code,
                    "name": r.name,
                    "country": r.country,
                    "centroid_lat": r.centroid_lat,
                    "centroid_lon": r.centroid_lon,
                }
                for r in self.region_records_sorted()
            ],
            "population": [
                {"region_code": rc, "century": t, "population": p}
                for (rc, t), p in sorted(self.population.items())
            ],
            "exclusions": dict(sorted(self.exclusions.items())),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            biographies=[Biography(**row) for row in d["biographies"]],
            taxonomy=Taxonomy({k: tuple(v) for k, v in d["taxonomy"].items()}),
            regions=[RegionRecord(**row) for row in d["regions"]],
            population={
                (row["region_code"], row["century"]): row["population"]
                for row in d["population"]
            },
            exclusions=d.get("exclusions", {}),
        )

    def save(self, path, fmt="bin"):
        """Deterministic serialization; 'bin' is compact JSON, 'json' indented."""
        d = self.to_dict()
        if fmt == "json":
            data = json.dumps(d, sort_keys=True, indent=2)
        else:
            data = json.dumps(d, sort_keys=True, separators=(",", ":"))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _opt(value):
    value = (value or "").strip()
    return value if value else None


def _opt_int(value):
    value = _opt(value)
    return int(value) if value is not None else None


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        yield from csv.DictReader(fh)


def load_taxonomy(path):
    return Taxonomy(
        {row["occupation"]: (row["category"], row["broad_category"]) for row in _read_csv(path)}
    )


def load_regions(path):
    regions = []
    seen = set()
    for row in _read_csv(path):
        code = row["region_code"]
        if code in seen:
            raise ValidationError(f"duplicate region code {code!r}")
        seen.add(code)
        lat = float(row["centroid_lat"])
        lon = float(row["centroid_lon"])
        if abs(lat) > 90 or abs(lon) > 180:
            raise ValidationError(f"region {code!r}: coordinates out of range")
        regions.append(RegionRecord(code, row["name"], row["country"], lat, lon))
    return regions


def load_population(path):
    population = {}
    for row in _read_csv(path):
        pop = float(row["population"])
        if pop < 0:
            raise ValidationError(f"negative population for {row['region_code']}")
        population[(row["region_code"], int(row["century"]))] = pop
    return population


def ingest(
    biographies_path,
    taxonomy_path,
    regions_path,
    population_path=None,
    geocode_nearest=False,
):
    """Load and validate the corpus from CSV files.

    Rows are excluded (with counts reported in Corpus.exclusions) when the
    birth year is missing or outside [1000, 1999], or when the occupation
    is the always-dropped one. Unknown occupations and missing regions on
    both ends are hard errors. When geocode_nearest is set, rows may carry
    `birth_lat`/`birth_lon` (and death_*) columns in place of region codes.
    """
    taxonomy = load_taxonomy(taxonomy_path)
    regions = load_regions(regions_path)
    population = load_population(population_path) if population_path else {}
    region_codes = {r.region_code for r in regions}

    biographies = []
    exclusions = {"missing_birth_year": 0, "birth_year_out_of_range": 0, "dropped_occupation": 0}
    for row in _read_csv(biographies_path):
        occupation = row["occupation"]
        if occupation == DROPPED_OCCUPATION:
            exclusions["dropped_occupation"] += 1
            continue
        if occupation not in taxonomy:
            raise UnknownOccupation(f"biography {row['id']}: occupation {occupation!r}")
        birth_year = _opt_int(row.get("birth_year"))
        if birth_year is None:
            exclusions["missing_birth_year"] += 1
            continue
        try:
            assign_century(birth_year)
        except OutOfRange:
            exclusions["birth_year_out_of_range"] += 1
            continue
        death_year = _opt_int(row.get("death_year"))
        if death_year is not None and birth_year > death_year:
            raise ValidationError(f"biography {row['id']}: birth year after death year")

        birth_region = _opt(row.get("birth_region"))
        death_region = _opt(row.get("death_region"))
        if geocode_nearest:
            if birth_region is None and _opt(row.get("birth_lat")) is not None:
                birth_region = nearest_centroid_geocode(
                    float(row["birth_lat"]), float(row["birth_lon"]), regions
                )
            if death_region is None and _opt(row.get("death_lat")) is not None:
                death_region = nearest_centroid_geocode(
                    float(row["death_lat"]), float(row["death_lon"]), regions
                )
        for code in (birth_region, death_region):
            if code is not None and code not in region_codes:
                raise ValidationError(f"biography {row['id']}: unknown region {code!r}")
        if birth_region is None and death_region is None:
            raise MissingRegion(f"biography {row['id']}: no birth or death region")
        biographies.append(
            Biography(row["id"], occupation, birth_year, birth_region, death_year, death_region)
        )

    if exclusions["dropped_occupation"]:
        warnings.warn(
            f"dropped {exclusions['dropped_occupation']} biographies with "
            f"occupation {DROPPED_OCCUPATION!r}",
            stacklevel=2,
        )
    return Corpus(biographies, taxonomy, regions, population, exclusions)
