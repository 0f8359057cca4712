"""Panel assembly and end-to-end estimation suites."""

import numpy as np
import pandas as pd

from . import relatedness, spatial
from .corpus import CENTURIES
from .econometrics import (
    Covariate,
    RegressionSpec,
    average_marginal_effects,
    build_design,
    clustered_vcov,
    counterfactual_count_ame,
    fit_model,
    fit_negbin,
)
from .errors import (
    DegenerateMatrix,
    EmptyAfterFilter,
    EmptySubset,
    MissingAdjacentCentury,
    ValidationError,
)
from .specialization import SpecializationSet, expected_naive, rca_ratio
from .corpus import filter_sparse

ROLE_CHOICES = ("births", "immi", "emi", "joint")


def compute_specialization(corpus, role, t, expectation="naive", expectation_nhat=None):
    """Filtered specialization set for one role and century.

    Filtering always uses raw counts; under the model-based expectation the
    fitted values replace the naive expectation only inside the ratio.
    """
    if role == "joint":
        Nb = corpus.tensor.slice("births", t)
        Nd = corpus.tensor.slice("deaths", t)
        raw = Nb + Nd
    else:
        raw = corpus.tensor.slice(role, t)
    kept_r, kept_k = filter_sparse(raw, t)
    regions = tuple(r for r, k in zip(corpus.tensor.regions, kept_r) if k)
    occupations = tuple(o for o, k in zip(corpus.tensor.occupations, kept_k) if k)

    if role == "joint":
        Nb = Nb[np.ix_(kept_r, kept_k)].astype(np.float64)
        Nd = Nd[np.ix_(kept_r, kept_k)].astype(np.float64)
        N = Nb + Nd
        if Nd.sum() == 0:
            N_hat = expected_naive(Nb)
        elif Nb.sum() == 0:
            N_hat = expected_naive(Nd)
        else:
            N_hat = expected_naive(Nb) + expected_naive(Nd)
    else:
        N = raw[np.ix_(kept_r, kept_k)].astype(np.float64)
        if expectation == "naive":
            N_hat = expected_naive(N)
        elif expectation == "negbin":
            if expectation_nhat is None or t not in expectation_nhat.get(role, {}):
                raise MissingAdjacentCentury(
                    f"no model-based expectation available for role {role!r} at t={t}"
                )
            N_hat = expectation_nhat[role][t][np.ix_(kept_r, kept_k)]
        else:
            raise ValidationError(f"unknown expectation {expectation!r}")
    return SpecializationSet(
        role=role, century=t, regions=regions, occupations=occupations, N=N, N_hat=N_hat
    )


def _births_rca_full(corpus, t):
    """Unfiltered naive births RCA on the full grid; zero if the slice is empty."""
    N = corpus.tensor.slice("births", t).astype(np.float64)
    if N.sum() == 0:
        return np.zeros_like(N)
    return rca_ratio(N, expected_naive(N))


def fit_expectation_models(corpus, roles=("births", "immi", "emi")):
    """Negative-binomial expected counts per role.

    Each role's counts at t are regressed on the same role's counts at t-1
    and the previous births specialization ratio, with region-century and
    occupation-century fixed effects. Returns per-role fits and fitted
    values on the full (region x occupation) grid per century.
    """
    present = corpus.centuries_present()
    pairs = [(t - 1, t) for t in present if t - 1 in present]
    if not pairs:
        raise MissingAdjacentCentury("model-based expectation needs two adjacent centuries")
    regions = corpus.tensor.regions
    occupations = corpus.tensor.occupations
    n_r, n_k = len(regions), len(occupations)

    out = {}
    for role in roles:
        frames = []
        for prev, t in pairs:
            S_prev = _births_rca_full(corpus, prev)
            frames.append(
                pd.DataFrame(
                    {
                        "region": np.repeat(regions, n_k),
                        "occupation": np.tile(occupations, n_r),
                        "century": t,
                        "N": corpus.tensor.slice(role, t).ravel(),
                        "N_prev": corpus.tensor.slice(role, prev).ravel(),
                        "S_births_prev": S_prev.ravel(),
                    }
                )
            )
        panel = pd.concat(frames, ignore_index=True)
        spec = RegressionSpec(
            family="negbin",
            response="N",
            covariates=(Covariate("N_prev"), Covariate("S_births_prev")),
            fixed_effects=(("region", "century"), ("occupation", "century")),
            clusters=("region", "century"),
        )
        design = build_design(panel, spec)
        fit = fit_negbin(design)
        clustered_vcov(fit)
        fitted = fit.predict()
        nhat = {}
        used = panel.loc[design.rows]
        for (prev, t) in pairs:
            grid = np.full((n_r, n_k), np.nan)
            mask = (used["century"] == t).to_numpy()
            ridx = used.loc[mask, "region"].map({r: i for i, r in enumerate(regions)})
            kidx = used.loc[mask, "occupation"].map({o: i for i, o in enumerate(occupations)})
            grid[ridx.to_numpy(), kidx.to_numpy()] = fitted[mask]
            nhat[t] = grid
        out[role] = {"fit": fit, "nhat": nhat}
    return out


def label_entries_exits(M_prev, M_curr):
    """Entry/Exit indicators with the at-risk conditioning.

    Entry is defined only where the prior specialization is absent, Exit
    only where it is present; the other cells are NaN (not at risk).
    """
    M_prev = np.asarray(M_prev, dtype=np.float64)
    M_curr = np.asarray(M_curr, dtype=np.float64)
    entry = np.where(M_prev == 0, (M_curr == 1).astype(np.float64), np.nan)
    exit_ = np.where(M_prev == 1, (M_curr == 0).astype(np.float64), np.nan)
    return entry, exit_


def label_first_last(N_prev, N_curr):
    """First/last-birth entry and exit labels on raw counts."""
    N_prev = np.asarray(N_prev, dtype=np.float64)
    N_curr = np.asarray(N_curr, dtype=np.float64)
    entry2 = np.where(N_prev == 0, (N_curr > 0).astype(np.float64), np.nan)
    exit2 = np.where(N_prev > 0, (N_curr == 0).astype(np.float64), np.nan)
    return entry2, exit2


def _lookup(values, set_, regions, occupations):
    """Align a (region x occupation) matrix of a specialization set onto
    row/column code lists, NaN where the set does not define the cell."""
    r_idx = {r: i for i, r in enumerate(set_.regions)}
    k_idx = {k: i for i, k in enumerate(set_.occupations)}
    out = np.full((len(regions), len(occupations)), np.nan)
    rows = [(i, r_idx[r]) for i, r in enumerate(regions) if r in r_idx]
    cols = [(j, k_idx[k]) for j, k in enumerate(occupations) if k in k_idx]
    for i, si in rows:
        for j, sj in cols:
            out[i, j] = values[si, sj]
    return out


def assemble_panel(
    corpus,
    expectation="naive",
    proximity_mode="separate",
    spatial_on=True,
    exclude_self=False,
):
    """One row per (region, occupation, outcome century) with lagged regressors.

    Rows exist where the births matrices at t-1 and t are both defined
    (sparse filter survived at both ends); regressors defined on other
    roles' filtered sets are NaN outside them and dropped per model spec.
    """
    present = corpus.centuries_present()
    pairs = [(t - 1, t) for t in CENTURIES if t in present and t - 1 in present]
    if not pairs:
        raise MissingAdjacentCentury(
            "panel assembly needs at least two adjacent centuries of data"
        )

    nhat = None
    if expectation == "negbin":
        models = fit_expectation_models(corpus)
        nhat = {role: m["nhat"] for role, m in models.items()}

    frames = []
    for prev, t in pairs:
        try:
            births_prev = compute_specialization(corpus, "births", prev, expectation, nhat)
            births_curr = compute_specialization(corpus, "births", t, expectation, nhat)
        except (EmptyAfterFilter, DegenerateMatrix, MissingAdjacentCentury):
            continue
        role_sets = {"births": births_prev}
        for role in ("immi", "emi"):
            try:
                role_sets[role] = compute_specialization(corpus, role, prev, expectation, nhat)
            except (EmptyAfterFilter, DegenerateMatrix, ValidationError):
                role_sets[role] = None

        if proximity_mode == "joint":
            try:
                joint_prev = compute_specialization(corpus, "joint", prev)
                phi_for = {
                    role: relatedness.proximity(joint_prev.M) for role in ROLE_CHOICES
                }
                phi_base = {"joint": joint_prev}
            except (EmptyAfterFilter, DegenerateMatrix):
                continue
        elif proximity_mode == "separate":
            phi_for = {}
            phi_base = {}
        else:
            raise ValidationError(f"unknown proximity mode {proximity_mode!r}")

        def omega_of(role):
            s = role_sets.get(role)
            if s is None:
                return None
            if proximity_mode == "joint":
                base = phi_base["joint"]
                # densities need M and phi on a common activity index
                M = _lookup(s.M, s, base.regions, base.occupations)
                M = np.nan_to_num(M, nan=0.0)
                omega = relatedness.relatedness_density(M, phi_for[role], exclude_self)
                return base, omega
            phi = relatedness.proximity(s.M)
            return s, relatedness.relatedness_density(s.M, phi, exclude_self)

        regions = [r for r in births_prev.regions if r in births_curr.regions]
        occupations = [k for k in births_prev.occupations if k in births_curr.occupations]
        if not regions or not occupations:
            continue

        Mb_prev = _lookup(births_prev.M, births_prev, regions, occupations)
        Mb_curr = _lookup(births_curr.M, births_curr, regions, occupations)
        entry, exit_ = label_entries_exits(Mb_prev, Mb_curr)

        raw_prev = corpus.tensor.slice("births", prev)
        raw_curr = corpus.tensor.slice("births", t)
        r_all = {r: i for i, r in enumerate(corpus.tensor.regions)}
        k_all = {k: i for i, k in enumerate(corpus.tensor.occupations)}
        ri = [r_all[r] for r in regions]
        ki = [k_all[k] for k in occupations]
        entry2, exit2 = label_first_last(
            raw_prev[np.ix_(ri, ki)], raw_curr[np.ix_(ri, ki)]
        )

        R_births = _lookup(births_prev.R, births_prev, regions, occupations)
        div_prev = births_prev.diversity
        ubi_prev = births_prev.ubiquity
        diversity = np.array(
            [div_prev[births_prev.regions.index(r)] for r in regions], dtype=np.float64
        )
        ubiq = np.array(
            [ubi_prev[births_prev.occupations.index(k)] for k in occupations],
            dtype=np.float64,
        )

        omega_cols = {}
        for role in ("births", "immi", "emi"):
            res = omega_of(role)
            if res is None:
                omega_cols[f"omega_{role}"] = np.full((len(regions), len(occupations)), np.nan)
            else:
                base, omega = res
                omega_cols[f"omega_{role}"] = _lookup(omega, base, regions, occupations)

        role_M = {}
        for role in ("immi", "emi"):
            s = role_sets[role]
            role_M[f"M_{role}"] = (
                _lookup(s.M, s, regions, occupations)
                if s is not None
                else np.full((len(regions), len(occupations)), np.nan)
            )

        if spatial_on:
            regs_b = [corpus.regions[r] for r in births_prev.regions]
            W = spatial.weight_matrix(regs_b) if len(regs_b) > 1 else None
            if W is not None:
                rho_M_full = spatial.spatial_lag(W, births_prev.M.astype(np.float64))
                phi_b = relatedness.proximity(births_prev.M)
                omega_b_full = relatedness.relatedness_density(
                    births_prev.M, phi_b, exclude_self
                )
                rho_omega_full = spatial.spatial_lag(W, omega_b_full)
                rho_M = _lookup(rho_M_full, births_prev, regions, occupations)
                rho_omega = _lookup(rho_omega_full, births_prev, regions, occupations)
            else:
                rho_M = np.full((len(regions), len(occupations)), np.nan)
                rho_omega = np.full((len(regions), len(occupations)), np.nan)
        else:
            rho_M = np.full((len(regions), len(occupations)), np.nan)
            rho_omega = np.full((len(regions), len(occupations)), np.nan)

        # raw counts and margins for the decomposition models
        raw_cols = {}
        for role in ("immi", "emi"):
            mat = corpus.tensor.slice(role, prev)
            raw_cols[f"N_{role}"] = mat[np.ix_(ri, ki)].astype(np.float64)
            raw_cols[f"sum_k_N_{role}"] = np.repeat(
                mat.sum(axis=1)[ri][:, None], len(ki), axis=1
            ).astype(np.float64)
            raw_cols[f"sum_i_N_{role}"] = np.repeat(
                mat.sum(axis=0)[ki][None, :], len(ri), axis=0
            ).astype(np.float64)
        raw_cols["N_births_prev"] = raw_prev[np.ix_(ri, ki)].astype(np.float64)
        raw_cols["N_births"] = raw_curr[np.ix_(ri, ki)].astype(np.float64)
        raw_cols["sum_k_N_births"] = np.repeat(
            raw_curr.sum(axis=1)[ri][:, None], len(ki), axis=1
        ).astype(np.float64)
        raw_cols["sum_i_N_births"] = np.repeat(
            raw_curr.sum(axis=0)[ki][None, :], len(ri), axis=0
        ).astype(np.float64)

        pop = np.array(
            [corpus.population.get((r, t), np.nan) for r in regions], dtype=np.float64
        )
        log_pop = np.where(pop > 0, np.log(np.where(pop > 0, pop, 1.0)), np.nan)

        n_rows = len(regions) * len(occupations)
        frame = pd.DataFrame(
            {
                "region": np.repeat(regions, len(occupations)),
                "occupation": np.tile(occupations, len(regions)),
                "century": np.full(n_rows, t, dtype=np.int64),
                "entry": entry.ravel(),
                "exit": exit_.ravel(),
                "entry2": entry2.ravel(),
                "exit2": exit2.ravel(),
                "M_immi": role_M["M_immi"].ravel(),
                "M_emi": role_M["M_emi"].ravel(),
                "omega_immi": omega_cols["omega_immi"].ravel(),
                "omega_emi": omega_cols["omega_emi"].ravel(),
                "omega_births": omega_cols["omega_births"].ravel(),
                "R_births": R_births.ravel(),
                "ubiquity": np.tile(ubiq, len(regions)),
                "diversity": np.repeat(diversity, len(occupations)),
                "rho_M": rho_M.ravel(),
                "rho_omega": rho_omega.ravel(),
                "pop": np.repeat(pop, len(occupations)),
                "log_pop": np.repeat(log_pop, len(occupations)),
            }
        )
        for name, mat in raw_cols.items():
            frame[name] = mat.ravel()
        frame["category"] = frame["occupation"].map(corpus.taxonomy.category)
        frame["broad_category"] = frame["occupation"].map(corpus.taxonomy.broad_category)
        frames.append(frame)

    if not frames:
        raise MissingAdjacentCentury("no century pair produced any panel rows")
    panel = pd.concat(frames, ignore_index=True)
    panel = panel.sort_values(["century", "region", "occupation"], kind="mergesort")
    return panel.reset_index(drop=True)


def subset(panel, centuries=None, broad_categories=None, city_size=None):
    """Row filter: century range, broad-category set, or city-size half.

    The city-size split uses the per-century median population among the
    regions present in that century; rows without population are dropped
    by that split.
    """
    out = panel
    if centuries is not None:
        lo, hi = centuries
        out = out[(out["century"] >= lo) & (out["century"] <= hi)]
    if broad_categories is not None:
        out = out[out["broad_category"].isin(set(broad_categories))]
    if city_size is not None:
        if city_size not in ("small", "large"):
            raise ValidationError("city_size must be 'small' or 'large'")
        out = out[out["pop"].notna()]
        pieces = []
        for t, grp in out.groupby("century"):
            med = grp.drop_duplicates("region")["pop"].median()
            keep = grp["pop"] <= med if city_size == "small" else grp["pop"] > med
            pieces.append(grp[keep])
        out = pd.concat(pieces) if pieces else out.iloc[:0]
    if len(out) == 0:
        raise EmptySubset("no panel rows match the requested subset")
    return out.copy()


BASE_CONTROLS = ("ubiquity", "rho_M", "rho_omega", "R_births")
OMEGAS = ("omega_immi", "omega_emi", "omega_births")


def _ladder_specs(response):
    """Column ladder of the main-results table for one outcome.

    Columns add the relatedness densities one at a time on top of the
    same-activity migration indicators and controls.
    """
    extra_sets = [(), ("omega_immi",), ("omega_emi",), ("omega_births",), OMEGAS]
    specs = []
    for extras in extra_sets:
        covs = ("M_immi", "M_emi") + extras + BASE_CONTROLS
        specs.append(
            RegressionSpec(
                family="logistic",
                response=response,
                covariates=tuple(Covariate(c) for c in covs),
                fixed_effects=(("broad_category", "region", "century"), ("category", "century")),
                clusters=("region", "century"),
            )
        )
    return specs


def _fe_ladder_specs(response):
    """Less restrictive FE specifications with extra observed controls."""
    full = ("M_immi", "M_emi") + OMEGAS
    ladders = [
        {
            "fixed_effects": (("century", "region"), ("category",)),
            "covariates": full + BASE_CONTROLS,
        },
        {
            "fixed_effects": (("century",), ("region",), ("category",)),
            "covariates": full + BASE_CONTROLS + ("diversity", "log_pop"),
        },
        {
            "fixed_effects": (("century",), ("region",)),
            "covariates": full + BASE_CONTROLS + ("diversity", "log_pop"),
        },
        {
            "fixed_effects": (("century",),),
            "covariates": full + BASE_CONTROLS + ("diversity", "log_pop"),
        },
    ]
    return [
        RegressionSpec(
            family="logistic",
            response=response,
            covariates=tuple(Covariate(c) for c in lad["covariates"]),
            fixed_effects=lad["fixed_effects"],
            clusters=("region", "century"),
        )
        for lad in ladders
    ]


def _decomposed_spec(response):
    """Count-decomposition model: ratio terms entered separately as asinh."""
    covs = (
        Covariate("N_immi", "asinh"),
        Covariate("sum_i_N_immi", "asinh"),
        Covariate("N_emi", "asinh"),
        Covariate("sum_i_N_emi", "asinh"),
        Covariate("sum_i_N_births", "asinh"),
        Covariate("omega_immi"),
        Covariate("omega_emi"),
        Covariate("omega_births"),
        Covariate("ubiquity"),
        Covariate("rho_M"),
        Covariate("rho_omega"),
    )
    return RegressionSpec(
        family="logistic",
        response=response,
        covariates=covs,
        fixed_effects=(("category",), ("century", "region")),
        clusters=("region", "century"),
    )


SUITES = ("table1", "entries-ladder", "exits-ladder", "decomposed")


def run_suite(panel, name):
    """Run a named specification ladder on an assembled panel.

    Returns a list of result dicts (one per column), each with the spec,
    fit summary and any marginal-effect summaries.
    """
    if name == "table1":
        jobs = [("entry", i + 1, s) for i, s in enumerate(_ladder_specs("entry"))]
        jobs += [("exit", i + 6, s) for i, s in enumerate(_ladder_specs("exit"))]
    elif name == "entries-ladder":
        jobs = [("entry", i + 1, s) for i, s in enumerate(_fe_ladder_specs("entry"))]
    elif name == "exits-ladder":
        jobs = [("exit", i + 1, s) for i, s in enumerate(_fe_ladder_specs("exit"))]
    elif name == "decomposed":
        jobs = [
            ("entry", 1, _decomposed_spec("entry")),
            ("exit", 2, _decomposed_spec("exit")),
        ]
    else:
        raise ValidationError(f"unknown suite {name!r}")

    results = []
    for response, column, spec in jobs:
        design = build_design(panel, spec)
        fit = fit_model(design)
        clustered_vcov(fit)
        entry = {
            "response": response,
            "column": column,
            "spec": spec.to_dict(),
            "fit": fit.summary_dict(),
        }
        margins = {}
        cov_names = [c.name for c in spec.covariates]
        is_full = {"M_immi", "omega_immi", "omega_emi", "omega_births"} <= set(cov_names)
        if name == "table1" and is_full:
            margins["M_immi:binary01"] = average_marginal_effects(fit, "M_immi", "binary01")
            for om in OMEGAS:
                margins[f"{om}:sd_increase"] = average_marginal_effects(
                    fit, om, "sd_increase"
                )
        if name == "decomposed":
            raw = panel.loc[design.rows, "N_immi"].to_numpy(dtype=np.float64)
            margins["N_immi:+1"] = counterfactual_count_ame(
                fit, raw, "asinh(N_immi)", "+1"
            )
            margins["N_immi:+1%"] = counterfactual_count_ame(
                fit, raw, "asinh(N_immi)", "+1%"
            )
        entry["margins"] = margins
        entry["_fit"] = fit  # kept for programmatic consumers; stripped on save
        results.append(entry)
    return results
