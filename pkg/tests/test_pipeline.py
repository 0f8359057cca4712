import numpy as np
import pandas as pd
import pytest

from agglomer import pipeline
from agglomer.corpus import RegionRecord
from agglomer.errors import EmptySubset, MissingAdjacentCentury, ValidationError
from agglomer.pipeline import (
    assemble_panel,
    compute_specialization,
    label_entries_exits,
    label_first_last,
    subset,
)
from helpers import corpus_from_counts


def test_label_entries_exits_conditioning():
    M_prev = np.array([[0, 0, 1, 1]])
    M_curr = np.array([[1, 0, 0, 1]])
    entry, exit_ = label_entries_exits(M_prev, M_curr)
    # 0->1 entry, 0->0 no entry, 1->0 exit, 1->1 stay
    assert entry[0].tolist()[:2] == [1.0, 0.0]
    assert np.isnan(entry[0][2]) and np.isnan(entry[0][3])
    assert exit_[0].tolist()[2:] == [1.0, 0.0]
    assert np.isnan(exit_[0][0]) and np.isnan(exit_[0][1])
    # disjoint conditioning: never both defined
    assert not np.any(~np.isnan(entry) & ~np.isnan(exit_))


def test_label_first_last_on_raw_counts():
    N_prev = np.array([[0, 0, 2, 5]])
    N_curr = np.array([[3, 0, 0, 1]])
    entry2, exit2 = label_first_last(N_prev, N_curr)
    assert entry2[0].tolist()[:2] == [1.0, 0.0]
    assert np.isnan(entry2[0][2])
    assert exit2[0].tolist()[2:] == [1.0, 0.0]
    assert np.isnan(exit2[0][0])


# ------------------------------------------------------- hand-built corpus

# Births at t=12 (locals + migrant births must sum to these targets):
#   A: [24, 0, 6]; B: [6, 18, 6]; C: [0, 12, 18]  (all margins 30, total 90)
# Expected counts are 10 everywhere -> M12 = [[1,0,0],[0,1,0],[0,1,1]].
# Births at t=13: A: [6,12,12]; B: [24,6,0]; C: [0,12,18]
#   -> M13 = [[0,1,1],[1,0,0],[0,1,1]].
# Immigrants at t=12: 4 to (A,x) born in B, 4 to (B,y) born in C,
# 4 to (C,z) born in A -> M_immi = I, M_emi = [[0,0,1],[1,0,0],[0,1,0]].


def _toy_corpus(population=None):
    spec = [
        # locals t=12 (births targets minus migrant birth contributions)
        ("local", "A", "x", 12, 24),
        ("local", "A", "z", 12, 2),
        ("local", "B", "x", 12, 2),
        ("local", "B", "y", 12, 18),
        ("local", "B", "z", 12, 6),
        ("local", "C", "y", 12, 8),
        ("local", "C", "z", 12, 18),
        # migrants t=12
        ("move", ("B", "A"), "x", 12, 4),
        ("move", ("C", "B"), "y", 12, 4),
        ("move", ("A", "C"), "z", 12, 4),
        # locals t=13
        ("local", "A", "x", 13, 6),
        ("local", "A", "y", 13, 12),
        ("local", "A", "z", 13, 12),
        ("local", "B", "x", 13, 24),
        ("local", "B", "y", 13, 6),
        ("local", "C", "y", 13, 12),
        ("local", "C", "z", 13, 18),
    ]
    # three mutually equidistant centroids (quarter circumference apart)
    regions = [
        RegionRecord("A", "A", "XX", 0.0, 0.0),
        RegionRecord("B", "B", "XX", 0.0, 90.0),
        RegionRecord("C", "C", "XX", 90.0, 0.0),
    ]
    return corpus_from_counts(spec, regions=regions, population=population)


M12 = np.array([[1, 0, 0], [0, 1, 0], [0, 1, 1]])
M13 = np.array([[0, 1, 1], [1, 0, 0], [0, 1, 1]])


def test_toy_specialization_matrices():
    corp = _toy_corpus()
    s12 = compute_specialization(corp, "births", 12)
    assert s12.regions == ("A", "B", "C") and s12.occupations == ("x", "y", "z")
    assert np.allclose(s12.N.sum(), 90)
    assert np.allclose(s12.N_hat, 10.0)
    assert np.array_equal(s12.M, M12)
    assert s12.R[0, 0] == pytest.approx(2.4)
    s13 = compute_specialization(corp, "births", 13)
    assert np.array_equal(s13.M, M13)
    si = compute_specialization(corp, "immi", 12)
    assert np.array_equal(si.M, np.eye(3, dtype=int))
    se = compute_specialization(corp, "emi", 12)
    assert np.array_equal(se.M, np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]]))


def test_toy_panel_hand_oracle():
    pops = {("A", 13): 100.0, ("B", 13): 200.0, ("C", 13): 300.0}
    corp = _toy_corpus(population=pops)
    panel = assemble_panel(corp)
    assert len(panel) == 9
    assert set(panel["century"]) == {13}
    panel = panel.set_index(["region", "occupation"])

    # entries and exits from M12 -> M13
    assert panel.loc[("A", "y"), "entry"] == 1.0
    assert panel.loc[("A", "z"), "entry"] == 1.0
    assert panel.loc[("B", "x"), "entry"] == 1.0
    assert panel.loc[("B", "z"), "entry"] == 0.0
    assert panel.loc[("C", "x"), "entry"] == 0.0
    assert np.isnan(panel.loc[("A", "x"), "entry"])
    assert panel.loc[("A", "x"), "exit"] == 1.0
    assert panel.loc[("B", "y"), "exit"] == 1.0
    assert panel.loc[("C", "y"), "exit"] == 0.0
    assert panel.loc[("C", "z"), "exit"] == 0.0

    # raw-count labels: A,y had 0 births at 12 and 12 at 13
    assert panel.loc[("A", "y"), "entry2"] == 1.0
    assert panel.loc[("B", "z"), "exit2"] == 1.0  # 6 -> 0
    assert panel.loc[("C", "x"), "entry2"] == 0.0  # 0 -> 0

    # lagged migration indicators (diagonal immigration pattern)
    assert panel.loc[("A", "x"), "M_immi"] == 1.0
    assert panel.loc[("A", "y"), "M_immi"] == 0.0
    assert panel.loc[("B", "y"), "M_immi"] == 1.0
    assert panel.loc[("A", "z"), "M_emi"] == 1.0
    assert panel.loc[("B", "x"), "M_emi"] == 1.0

    # relatedness densities from M12: phi(y,z) = 0.5, else disjoint
    assert panel.loc[("A", "x"), "omega_births"] == pytest.approx(100.0)
    assert panel.loc[("B", "y"), "omega_births"] == pytest.approx(100 / 1.5)
    assert panel.loc[("B", "z"), "omega_births"] == pytest.approx(100 * 0.5 / 1.5)
    assert panel.loc[("C", "y"), "omega_births"] == pytest.approx(100.0)
    # immigration proximity is the identity -> density = 100 * M_immi
    assert panel.loc[("A", "x"), "omega_immi"] == pytest.approx(100.0)
    assert panel.loc[("A", "y"), "omega_immi"] == pytest.approx(0.0)

    # controls dated t-1
    assert panel.loc[("A", "x"), "R_births"] == pytest.approx(2.4)
    assert panel.loc[("A", "x"), "ubiquity"] == 1.0
    assert panel.loc[("C", "x"), "diversity"] == 2.0

    # equidistant regions: spatial lag = mean of the other two rows
    assert panel.loc[("A", "y"), "rho_M"] == pytest.approx(1.0)
    assert panel.loc[("A", "x"), "rho_M"] == pytest.approx(0.0)
    assert panel.loc[("B", "z"), "rho_M"] == pytest.approx(0.5)
    omega12 = np.array([[100.0, 0.0, 0.0],
                        [0.0, 100 / 1.5, 50 / 1.5],
                        [0.0, 100.0, 100.0]])
    lag_A = omega12[[1, 2]].mean(axis=0)
    assert panel.loc[("A", "x"), "rho_omega"] == pytest.approx(lag_A[0])
    assert panel.loc[("A", "z"), "rho_omega"] == pytest.approx(lag_A[2])

    # raw counts and margins
    assert panel.loc[("A", "x"), "N_immi"] == 4.0
    assert panel.loc[("A", "x"), "sum_k_N_immi"] == 4.0
    assert panel.loc[("A", "x"), "sum_i_N_immi"] == 4.0
    assert panel.loc[("A", "x"), "N_births_prev"] == 24.0
    assert panel.loc[("A", "x"), "N_births"] == 6.0
    assert panel.loc[("A", "x"), "sum_i_N_births"] == 30.0

    # population joins at the outcome century
    assert panel.loc[("A", "x"), "pop"] == 100.0
    assert panel.loc[("A", "x"), "log_pop"] == pytest.approx(np.log(100.0))


def test_panel_regressors_strictly_lagged():
    """Every regressor matches a recomputation from t-1 slices only."""
    corp = _toy_corpus()
    panel = assemble_panel(corp).set_index(["region", "occupation"])
    s12 = compute_specialization(corp, "births", 12)
    for i, r in enumerate(s12.regions):
        for k, o in enumerate(s12.occupations):
            assert panel.loc[(r, o), "R_births"] == pytest.approx(s12.R[i, k])


def test_panel_determinism():
    corp = _toy_corpus()
    p1 = assemble_panel(corp)
    p2 = assemble_panel(corp)
    pd.testing.assert_frame_equal(p1, p2)


def test_single_century_corpus_raises():
    spec = [("local", "A", "x", 15, 10), ("local", "B", "y", 15, 10),
            ("local", "A", "y", 15, 5), ("local", "B", "x", 15, 5)]
    corp = corpus_from_counts(spec)
    with pytest.raises(MissingAdjacentCentury):
        assemble_panel(corp)


def test_exclude_self_changes_densities():
    corp = _toy_corpus()
    with_self = assemble_panel(corp).set_index(["region", "occupation"])
    without = assemble_panel(corp, exclude_self=True).set_index(["region", "occupation"])
    # (A, x): only the self term present -> density collapses to 0
    assert with_self.loc[("A", "x"), "omega_births"] == pytest.approx(100.0)
    assert without.loc[("A", "x"), "omega_births"] == pytest.approx(0.0)


def test_joint_proximity_mode_runs():
    corp = _toy_corpus()
    panel = assemble_panel(corp, proximity_mode="joint")
    assert len(panel) == 9
    assert panel["omega_births"].notna().any()


def test_spatial_off_leaves_lags_missing():
    corp = _toy_corpus()
    panel = assemble_panel(corp, spatial_on=False)
    assert panel["rho_M"].isna().all()
    assert panel["rho_omega"].isna().all()


def test_subset_filters():
    pops = {("A", 13): 100.0, ("B", 13): 200.0, ("C", 13): 300.0}
    corp = _toy_corpus(population=pops)
    panel = assemble_panel(corp)

    assert len(subset(panel, centuries=(11, 13))) == 9
    with pytest.raises(EmptySubset):
        subset(panel, centuries=(14, 20))

    broads = set(panel["broad_category"])
    some = sorted(broads)[0]
    sub = subset(panel, broad_categories=[some])
    assert set(sub["broad_category"]) == {some}

    small = subset(panel, city_size="small")
    large = subset(panel, city_size="large")
    # per-century median of (100, 200, 300) is 200
    assert set(small["region"]) == {"A", "B"}
    assert set(large["region"]) == {"C"}
    with pytest.raises(ValidationError):
        subset(panel, city_size="medium")


def test_subset_identity_filter():
    corp = _toy_corpus()
    panel = assemble_panel(corp)
    same = subset(panel, centuries=(11, 20))
    assert len(same) == len(panel)
