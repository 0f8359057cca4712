"""Shared builders for in-memory corpora and on-disk CSV fixtures."""

import csv

import numpy as np

from agglomer.corpus import Biography, Corpus, RegionRecord, Taxonomy


def make_regions(n, spacing_deg=2.0):
    return [
        RegionRecord(
            region_code=f"R{i:03d}",
            name=f"Region {i}",
            country="XX",
            centroid_lat=35.0 + (i % 10) * spacing_deg,
            centroid_lon=-5.0 + (i // 10) * spacing_deg,
        )
        for i in range(n)
    ]


def make_taxonomy(occupations, n_categories=4, n_broad=2):
    mapping = {}
    for k, occ in enumerate(occupations):
        cat = f"cat{k % n_categories}"
        broad = f"broad{(k % n_categories) % n_broad}"
        mapping[occ] = (cat, broad)
    return Taxonomy(mapping)


def corpus_from_counts(count_spec, regions=None, taxonomy=None, population=None):
    """Build a Corpus whose tensors equal the given counts exactly.

    count_spec: list of (role, region_code, occupation, century, n) where
    role is 'local' (birth+death in the region) or 'move' (born in one
    region, died in another: supply (birth_region, death_region) tuple).
    """
    bios = []
    bid = 0
    region_codes = set()
    occupations = set()
    for entry in count_spec:
        role, where, occ, t, n = entry
        occupations.add(occ)
        year = (t - 1) * 100 + 50
        for _ in range(n):
            if role == "local":
                region_codes.add(where)
                bios.append(Biography(f"b{bid}", occ, year, where, year + 50, where))
            elif role == "move":
                br, dr = where
                region_codes.update((br, dr))
                bios.append(Biography(f"b{bid}", occ, year, br, year + 50, dr))
            else:
                raise ValueError(role)
            bid += 1
    if regions is None:
        codes = sorted(region_codes)
        base = make_regions(len(codes))
        regions = [
            RegionRecord(c, r.name, r.country, r.centroid_lat, r.centroid_lon)
            for c, r in zip(codes, base)
        ]
    if taxonomy is None:
        taxonomy = make_taxonomy(sorted(occupations))
    return Corpus(bios, taxonomy, regions, population or {})


def write_corpus_csvs(tmpdir, biographies, taxonomy_rows, region_rows, population_rows=None):
    """Write the four input CSVs; returns a dict of paths."""
    paths = {}

    def _write(name, header, rows):
        path = str(tmpdir / name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        paths[name.split(".")[0]] = path
        return path

    _write(
        "biographies.csv",
        ["id", "occupation", "birth_year", "birth_region", "death_year", "death_region"],
        biographies,
    )
    _write("taxonomy.csv", ["occupation", "category", "broad_category"], taxonomy_rows)
    _write(
        "regions.csv",
        ["region_code", "name", "country", "centroid_lat", "centroid_lon"],
        region_rows,
    )
    if population_rows is not None:
        _write("population.csv", ["region_code", "century", "population"], population_rows)
    return paths


def random_corpus_rows(seed=0, n_regions=20, n_occupations=8, centuries=(17, 18, 19),
                       mean_count=3.0, migrate_p=0.3):
    """Random but reproducible biography/taxonomy/region CSV row lists."""
    rng = np.random.default_rng(seed)
    regions = [f"R{i:02d}" for i in range(n_regions)]
    occs = [f"occ{k:02d}" for k in range(n_occupations)]
    taxonomy_rows = [
        [o, f"cat{k % 4}", f"broad{(k % 4) % 2}"] for k, o in enumerate(occs)
    ]
    region_rows = [
        [r, f"Name{i}", "XX", 40.0 + (i % 5) * 2.0, 5.0 + (i // 5) * 3.0]
        for i, r in enumerate(regions)
    ]
    population_rows = [
        [r, t, int(rng.integers(10_000, 500_000))] for r in regions for t in centuries
    ]
    bios = []
    bid = 0
    for t in centuries:
        for i, r in enumerate(regions):
            for k, o in enumerate(occs):
                lam = mean_count * np.exp(0.4 * np.sin(i + 2 * k + t))
                for _ in range(rng.poisson(lam)):
                    by = (t - 1) * 100 + int(rng.integers(0, 100))
                    if rng.random() < migrate_p:
                        dr = regions[int(rng.integers(0, n_regions))]
                    else:
                        dr = r
                    bios.append([f"b{bid}", o, by, r, by + 60, dr])
                    bid += 1
    return bios, taxonomy_rows, region_rows, population_rows


def planted_entry_corpus(seed, n_regions=48, n_occupations=24, slope=0.3,
                         base_logit=-0.85, null=False):
    """Corpus with a planted entry process over centuries 17-19.

    Each (region, activity) cell carries a specialization state: state
    cells get a large birth base (far above the margins-preserving
    expectation), the rest a small one (far below). A quarter of the cells
    start specialized via an exact checkerboard so margins stay flat. At
    t in {18, 19}, at-risk cells (state 0 at t-1) enter with probability
    logistic(base_logit + slope * M_immi(t-1)), where M_immi is planted by
    giving half the cells an excess immigrant flow at t-1. With null=True
    entry is independent of the immigration indicator (same base rate).

    Returns (Corpus, truth dict).
    """
    assert n_regions % 4 == 0 and n_occupations % 4 == 0
    rng = np.random.default_rng(seed)
    regions = [f"R{i:03d}" for i in range(n_regions)]
    occs = [f"occ{k:03d}" for k in range(n_occupations)]
    taxonomy = Taxonomy({o: (f"cat{k % 4}", "broad0") for k, o in enumerate(occs)})
    region_recs = [
        RegionRecord(r, f"Name{i}", "XX", 36.0 + (i % 8) * 1.5, -8.0 + (i // 8) * 2.5)
        for i, r in enumerate(regions)
    ]

    ii, kk = np.meshgrid(np.arange(n_regions), np.arange(n_occupations), indexing="ij")
    state = {17: (ii + kk) % 4 == 0}
    m_immi = {}
    entered = {}
    p_base = 1.0 / (1.0 + np.exp(-(base_logit + slope * 0.5)))
    for t in (18, 19):
        m = rng.random((n_regions, n_occupations)) < 0.5
        m_immi[t - 1] = m
        if null:
            p = np.full(m.shape, p_base)
        else:
            p = 1.0 / (1.0 + np.exp(-(base_logit + slope * m)))
        entry = (rng.random(m.shape) < p) & ~state[t - 1]
        entered[t] = entry
        state[t] = state[t - 1] | entry

    bios = []
    bid = 0

    def add(n, occ, by, br, dr):
        nonlocal bid
        for _ in range(int(n)):
            bios.append(Biography(f"b{bid}", occ, by, br, by + 30, dr))
            bid += 1

    high, low = 30, 5
    for i, r in enumerate(regions):
        for k, o in enumerate(occs):
            for t in (17, 18, 19):
                by = (t - 1) * 100 + 40
                add(high if state[t][i, k] else low, o, by, r, r)
                if t in m_immi:
                    donor = regions[(i + 1 + k) % n_regions]
                    add(8 if m_immi[t][i, k] else 1, o, by + 10, donor, r)
    corp = Corpus(bios, taxonomy, region_recs, {})
    return corp, {"m_immi": m_immi, "entered": entered, "state": state,
                  "regions": regions, "occupations": occs}
