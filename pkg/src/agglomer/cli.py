"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 estimation non-convergence.
All outputs are deterministic: fixed float formatting, sorted JSON keys,
LF line endings.
"""

import functools
import json
import sys

import click
import numpy as np
import pandas as pd

from . import concentration, corpus as corpus_mod, pipeline, relatedness, spatial, svgout
from .econometrics import (
    FitResult,
    RegressionSpec,
    average_marginal_effects,
    build_design,
    clustered_vcov,
    fit_model,
    robust_vcov,
)
from .errors import AgglomerError, NonConvergence, ValidationError

FLOAT_FMT = "%.12g"


def _write_csv(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FMT, lineterminator="\n")


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NonConvergence as exc:
            click.echo(f"error: {exc}", err=True)
            if exc.gradient_norm is not None:
                click.echo(f"gradient norm at last iterate: {exc.gradient_norm:.3e}", err=True)
            sys.exit(3)
        except AgglomerError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
def main():
    """Biographic agglomeration analytics: specialization, relatedness,
    spatial lags and fixed-effects regression suites."""


@main.command()
@click.option("--biographies", required=True, type=click.Path(exists=True))
@click.option("--taxonomy", required=True, type=click.Path(exists=True))
@click.option("--regions", required=True, type=click.Path(exists=True))
@click.option("--population", type=click.Path(exists=True))
@click.option("--geocode-nearest", is_flag=True, default=False)
@click.option("--out", required=True, type=click.Path())
@click.option("--out-format", type=click.Choice(["bin", "json"]), default="bin")
@_handle_errors
def ingest(biographies, taxonomy, regions, population, geocode_nearest, out, out_format):
    """Load the CSV inputs into a validated corpus file."""
    corp = corpus_mod.ingest(
        biographies, taxonomy, regions, population, geocode_nearest=geocode_nearest
    )
    corp.save(out, fmt=out_format)
    excl = ", ".join(f"{k}={v}" for k, v in sorted(corp.exclusions.items()))
    click.echo(f"ingested {corp.n_individuals} biographies ({excl})")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def entropy(corpus_path, out):
    """Per-century spatial entropy and effective number of places."""
    corp = corpus_mod.Corpus.load(corpus_path)
    rows = concentration.concentration_series(corp)
    _write_csv(pd.DataFrame(rows), out)
    click.echo(f"wrote {len(rows)} centuries to {out}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--expectation", type=click.Choice(["naive", "negbin"]), default="naive")
@click.option("--role", type=click.Choice(list(pipeline.ROLE_CHOICES)), default="births")
@click.option("--century", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--svg", type=click.Path())
@_handle_errors
def specialize(corpus_path, expectation, role, century, out, svg):
    """Specialization ratios and binary matrix for one role and century."""
    corp = corpus_mod.Corpus.load(corpus_path)
    nhat = None
    if expectation == "negbin":
        models = pipeline.fit_expectation_models(corp, roles=(role,))
        nhat = {role: models[role]["nhat"]}
    s = pipeline.compute_specialization(corp, role, century, expectation, nhat)
    n_r, n_k = s.N.shape
    frame = pd.DataFrame(
        {
            "region": np.repeat(s.regions, n_k),
            "occupation": np.tile(s.occupations, n_r),
            "N": s.N.ravel(),
            "Nhat": s.N_hat.ravel(),
            "R": s.R.ravel(),
            "M": s.M.ravel(),
        }
    )
    _write_csv(frame, out)
    if svg:
        with open(svg, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svgout.heatmap_svg(s.M, list(s.regions), list(s.occupations)))
    click.echo(f"wrote {n_r}x{n_k} specialization set to {out}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--role", type=click.Choice(list(pipeline.ROLE_CHOICES)), default="births")
@click.option("--century", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--densities", type=click.Path())
@click.option("--exclude-self", is_flag=True, default=False)
@click.option("--svg", type=click.Path())
@click.option("--layout", type=click.Choice(["geographic", "none"]), default="none")
@_handle_errors
def relate(corpus_path, role, century, out, densities, exclude_self, svg, layout):
    """Activity proximity matrix and relatedness densities."""
    corp = corpus_mod.Corpus.load(corpus_path)
    s = pipeline.compute_specialization(corp, role, century)
    phi = relatedness.proximity(s.M)
    n_k = len(s.occupations)
    frame = pd.DataFrame(
        {
            "activity_a": np.repeat(s.occupations, n_k),
            "activity_b": np.tile(s.occupations, n_k),
            "phi": phi.ravel(),
        }
    )
    _write_csv(frame, out)
    if densities:
        omega = relatedness.relatedness_density(s.M, phi, exclude_self=exclude_self)
        dens = pd.DataFrame(
            {
                "region": np.repeat(s.regions, n_k),
                "occupation": np.tile(s.occupations, len(s.regions)),
                "omega": omega.ravel(),
            }
        )
        dens["self_term"] = "excluded" if exclude_self else "included"
        _write_csv(dens, densities)
    if svg:
        sizes = s.N.sum(axis=0)
        # geographic layout needs node coordinates; activities have none,
        # so only region-level networks could use it — keep circle layout
        # for activities and ignore the flag with a note.
        if layout == "geographic":
            click.echo("note: activities have no coordinates; using circle layout", err=True)
        with open(svg, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svgout.network_svg(phi, list(s.occupations), sizes, edge_cutoff=0.0))
    click.echo(f"wrote {n_k}x{n_k} proximity matrix to {out}")


@main.command("spatial")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--century", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--exclude-self", is_flag=True, default=False)
@_handle_errors
def spatial_cmd(corpus_path, century, out, exclude_self):
    """Inverse-distance spatial lags of specialization and density."""
    corp = corpus_mod.Corpus.load(corpus_path)
    s = pipeline.compute_specialization(corp, "births", century)
    regs = [corp.regions[r] for r in s.regions]
    W = spatial.weight_matrix(regs)
    rho_M = spatial.spatial_lag(W, s.M.astype(np.float64))
    phi = relatedness.proximity(s.M)
    omega = relatedness.relatedness_density(s.M, phi, exclude_self=exclude_self)
    rho_omega = spatial.spatial_lag(W, omega)
    n_k = len(s.occupations)
    frame = pd.DataFrame(
        {
            "region": np.repeat(s.regions, n_k),
            "occupation": np.tile(s.occupations, len(s.regions)),
            "rho_M": rho_M.ravel(),
            "rho_omega": rho_omega.ravel(),
        }
    )
    _write_csv(frame, out)
    click.echo(f"wrote spatial lags for {len(s.regions)} regions to {out}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--expectation", type=click.Choice(["naive", "negbin"]), default="naive")
@click.option("--proximity", type=click.Choice(["separate", "joint"]), default="separate")
@click.option("--no-spatial", is_flag=True, default=False)
@click.option("--exclude-self", is_flag=True, default=False)
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def panel(corpus_path, expectation, proximity, no_spatial, exclude_self, out):
    """Assemble the regression panel with lagged regressors and labels."""
    corp = corpus_mod.Corpus.load(corpus_path)
    frame = pipeline.assemble_panel(
        corp,
        expectation=expectation,
        proximity_mode=proximity,
        spatial_on=not no_spatial,
        exclude_self=exclude_self,
    )
    _write_csv(frame, out)
    click.echo(f"wrote {len(frame)} panel rows to {out}")


def _fit_payload(fit):
    payload = fit.summary_dict()
    payload["spec"] = fit.design.spec.to_dict()
    payload["beta"] = [float(b) for b in fit.beta]
    payload["names"] = list(fit.names)
    return payload


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def fit(panel_path, spec_path, out):
    """Estimate one model from a JSON spec on a panel CSV."""
    frame = pd.read_csv(panel_path)
    spec = RegressionSpec.from_json(spec_path)
    design = build_design(frame, spec)
    result = fit_model(design)
    if spec.clusters:
        clustered_vcov(result)
    else:
        result.vcov = robust_vcov(result)
        result.vcov_mode = "robust"
    _write_json(_fit_payload(result), out)
    click.echo(
        f"fit {spec.family} model: n={result.n_used}, "
        f"loglik={result.loglik:.4f}, wrote {out}"
    )


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--name", required=True, type=click.Choice(list(pipeline.SUITES)))
@click.option("--expectation", type=click.Choice(["naive", "negbin"]), default="naive")
@click.option("--proximity", type=click.Choice(["separate", "joint"]), default="separate")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_handle_errors
def suite(corpus_path, name, expectation, proximity, out_dir):
    """Run a named specification ladder end to end."""
    import os

    corp = corpus_mod.Corpus.load(corpus_path)
    frame = pipeline.assemble_panel(
        corp, expectation=expectation, proximity_mode=proximity
    )
    results = pipeline.run_suite(frame, name)
    os.makedirs(out_dir, exist_ok=True)
    report = []
    coef_rows = []
    for res in results:
        res = dict(res)
        res.pop("_fit", None)
        report.append(res)
        for coef in res["fit"]["coefficients"]:
            if coef["name"].startswith("fe("):
                continue
            coef_rows.append(
                {
                    "response": res["response"],
                    "column": res["column"],
                    "name": coef["name"],
                    "estimate": coef["estimate"],
                    "se": coef["se"],
                    "z": coef["z"],
                    "p": coef["p"],
                    "stars": coef["stars"],
                }
            )
    _write_json(report, os.path.join(out_dir, f"{name}.json"))
    _write_csv(pd.DataFrame(coef_rows), os.path.join(out_dir, "coefficients.csv"))
    click.echo(f"wrote {len(report)} model columns to {out_dir}")


@main.command()
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--var", required=True)
@click.option(
    "--kind", type=click.Choice(["binary01", "sd_increase", "unit"]), default="binary01"
)
@_handle_errors
def margins(fit_path, panel_path, var, kind):
    """Average marginal effect of a variable from a saved fit.

    Rebuilds the design from the spec embedded in the fit file and the
    stored coefficients; no refitting.
    """
    with open(fit_path, encoding="utf-8") as fh:
        payload = json.load(fh)
    spec = RegressionSpec.from_dict(payload["spec"])
    frame = pd.read_csv(panel_path)
    design = build_design(frame, spec)
    if design.names != payload["names"]:
        raise ValidationError("panel does not reproduce the design the fit was made on")
    beta = np.asarray(payload["beta"], dtype=np.float64)
    result = FitResult(
        design,
        payload["family"],
        beta,
        payload["loglik"],
        info=np.eye(len(beta)),
        score_obs=np.zeros((design.n, len(beta))),
        dispersion=payload.get("dispersion"),
    )
    ame = average_marginal_effects(result, var, kind)
    unit = "pp" if payload["family"] == "logistic" else "units"
    click.echo(f"AME[{var}, {kind}] = {ame:.6f} {unit}")


if __name__ == "__main__":
    main()
