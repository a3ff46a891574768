"""Feature-selection ensemble: MI estimator, rankings, union."""

import numpy as np
import pytest

from startdetect.features import Column, FeatureMatrix
from startdetect.selection import (SelectionConfig, SelectionError,
                                   SelectionReport, mutual_information,
                                   run_selection, select_elasticnet,
                                   select_gbt, select_mifs, select_mrmr,
                                   union_select)


def _fm(values, prefix="f"):
    cols = [Column(f"{prefix}{i}", "x") for i in range(values.shape[1])]
    return FeatureMatrix(columns=cols, values=values)


class TestMutualInformation:
    def test_perfectly_informative_three_classes(self):
        # [DERIVED] x identical to a balanced 3-class label: MI = ln 3
        y = np.repeat([0, 1, 2], 2000)
        x = y.astype(float)
        assert mutual_information(x, y) == pytest.approx(np.log(3),
                                                         abs=1e-6)

    def test_binary_closed_form(self):
        # [DERIVED] p(x=y)=0.9, balanced: MI = 0.9 ln 1.8 + 0.1 ln 0.2
        n = 100_000
        x = np.zeros(n)
        y = np.zeros(n, dtype=int)
        x[n // 2:] = 1.0
        y[n // 2:] = 1
        # flip 5% of each half to the other label
        flip = int(0.05 * n)
        y[:flip] = 1
        y[n // 2:n // 2 + flip] = 0
        expected = 0.9 * np.log(1.8) + 0.1 * np.log(0.2)
        assert mutual_information(x, y) == pytest.approx(expected, abs=0.01)

    def test_independent_feature_near_zero(self, rng):
        n = 100_000
        x = rng.normal(size=n)
        y = rng.integers(0, 2, size=n)
        assert mutual_information(x, y) < 0.01

    def test_affine_rescale_invariance(self, rng):
        x = rng.normal(size=5000)
        y = (x + rng.normal(scale=0.5, size=5000) > 0).astype(int)
        assert mutual_information(3.7 * x + 11.0, y) == \
            pytest.approx(mutual_information(x, y), abs=1e-12)

    def test_constant_column_zero(self):
        y = np.array([0, 1] * 50)
        assert mutual_information(np.full(100, 2.5), y) == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(SelectionError, match="2 classes"):
            mutual_information(np.arange(10.0), np.zeros(10, dtype=int))

    def test_nan_rejected(self):
        with pytest.raises(SelectionError, match="NaN"):
            mutual_information(np.array([1.0, np.nan]), np.array([0, 1]))


def _redundancy_fixture(rng, n=3000):
    """col0 = label (strong), col1 = copy of col0 (redundant),
    col2 = independent extra information, col3 = noise."""
    y = rng.integers(0, 2, size=n)
    extra = rng.integers(0, 2, size=n)
    col0 = y + 0.01 * rng.normal(size=n)
    col1 = col0 + 1e-6 * rng.normal(size=n)
    col2 = extra + 0.01 * rng.normal(size=n)
    noise = rng.normal(size=n)
    # make the label partially depend on `extra` so col2 is informative
    y = np.where(rng.random(n) < 0.3, extra, y)
    col0 = y + 0.01 * rng.normal(size=n)
    col1 = col0 + 1e-6 * rng.normal(size=n)
    return _fm(np.column_stack([col0, col1, col2, noise])), y


class TestGreedySelectors:
    def test_mifs_penalizes_redundant_copy(self, rng):
        fm, y = _redundancy_fixture(rng)
        ranked = [name for name, _ in select_mifs(fm, y, k=3, beta=0.5)]
        assert ranked[0] in ("f0.x", "f1.x")   # strongest single feature
        assert ranked[1] == "f2.x"           # the copy is penalized away

    def test_mrmr_penalizes_redundant_copy(self, rng):
        fm, y = _redundancy_fixture(rng)
        ranked = [name for name, _ in select_mrmr(fm, y, k=3)]
        assert ranked[0] in ("f0.x", "f1.x")
        assert ranked[1] == "f2.x"

    def test_mifs_beta_zero_ranks_by_relevance_only(self, rng):
        fm, y = _redundancy_fixture(rng)
        ranked = [name for name, _ in select_mifs(fm, y, k=3, beta=0.0)]
        # without the redundancy term the near-identical copy comes second
        assert set(ranked[:2]) == {"f0.x", "f1.x"}

    def test_first_pick_matches_marginal_mi(self, rng):
        fm, y = _redundancy_fixture(rng)
        mis = [mutual_information(fm.values[:, j], y) for j in range(4)]
        best = fm.names[int(np.argmax(mis))]
        assert select_mifs(fm, y, k=1)[0][0] == best
        assert select_mrmr(fm, y, k=1)[0][0] == best

    def test_deterministic_tie_break_is_lexicographic(self):
        # identical columns tie on every score; names decide
        vals = np.tile(np.array([0.0, 1.0] * 50)[:, None], (1, 3))
        y = np.array([0, 1] * 50)
        fm = FeatureMatrix(columns=[Column("b", "x"), Column("a", "x"),
                                    Column("c", "x")], values=vals)
        ranked = [name for name, _ in select_mifs(fm, y, k=3)]
        assert ranked[0] == "a.x"


class TestElasticNet:
    def test_informative_column_ranked_first(self, rng):
        n = 400
        y = rng.integers(0, 3, size=n)
        x = np.column_stack([y + 0.1 * rng.normal(size=n)]
                            + [rng.normal(size=n) for _ in range(6)])
        ranked = select_elasticnet(_fm(x), y, k=3)
        assert ranked[0][0] == "f0.x"
        assert ranked[0][1] > 0
        # pure-noise columns carry (near-)zero weight
        assert ranked[1][1] < 0.05 * ranked[0][1]

    def test_raises_when_not_converged(self, rng):
        n = 100
        y = rng.integers(0, 2, size=n)
        x = rng.normal(size=(n, 4))
        with pytest.raises(SelectionError, match="did not converge"):
            select_elasticnet(_fm(x), y, max_iter=1)

    def test_strong_l1_zeroes_noise_columns(self, rng):
        n = 600
        y = rng.integers(0, 2, size=n)
        x = np.column_stack([2.0 * y + 0.1 * rng.normal(size=n),
                             rng.normal(size=n), rng.normal(size=n)])
        ranked = select_elasticnet(_fm(x), y, k=3, alpha=0.2, l1_ratio=1.0)
        scores = dict(ranked)
        assert scores["f0.x"] > 0
        assert scores["f1.x"] == pytest.approx(0.0, abs=1e-12)
        assert scores["f2.x"] == pytest.approx(0.0, abs=1e-12)


class TestGbt:
    def test_informative_column_dominates_gain(self, rng):
        n = 500
        y = rng.integers(0, 2, size=n)
        x = np.column_stack([y + 0.05 * rng.normal(size=n),
                             rng.normal(size=n), rng.normal(size=n)])
        ranked = select_gbt(_fm(x), y, k=3, n_trees=10)
        assert ranked[0][0] == "f0.x"
        assert ranked[0][1] > 10 * max(ranked[1][1], 1e-12)

    def test_zero_trees_rejected(self, rng):
        with pytest.raises(SelectionError, match="n_trees"):
            select_gbt(_fm(np.zeros((10, 2))), np.array([0, 1] * 5),
                       n_trees=0)

    def test_deterministic(self, rng):
        n = 300
        y = rng.integers(0, 3, size=n)
        x = rng.normal(size=(n, 5))
        x[:, 2] += y
        a = select_gbt(_fm(x), y, n_trees=5)
        b = select_gbt(_fm(x), y, n_trees=5)
        assert a == b


class TestUnion:
    def test_order_stable_dedup(self):
        per = {
            "mifs": [("a", 1.0), ("b", 0.5)],
            "mrmr": [("b", 2.0), ("c", 1.0)],
            "elasticnet": [("d", 0.1)],
            "gbt": [("a", 9.0), ("e", 0.2)],
        }
        rep = union_select(per, fold_id=3)
        assert rep.union == ["a", "b", "c", "d", "e"]
        assert rep.fold_id == 3

    def test_union_size_bounds(self, rng):
        # 4 selectors x top 10 on 60 columns: 10 <= |union| <= 40
        n = 1200
        y = rng.integers(0, 3, size=n)
        x = rng.normal(size=(n, 60))
        x[:, 0] += y
        x[:, 1] += 2 * y
        x[:, 2] -= y
        rep = run_selection(_fm(x), y, config=SelectionConfig(
            enet_max_iter=8000, gbt_trees=10))
        assert 10 <= len(rep.union) <= 40
        for name in ("mifs", "mrmr", "elasticnet", "gbt"):
            assert len(rep.per_selector[name]) == 10

    def test_empty_ensemble_rejected(self):
        with pytest.raises(SelectionError):
            union_select({})


class TestRunSelection:
    def test_informative_columns_found_by_all_selectors(self, rng):
        n = 2000
        y = rng.integers(0, 2, size=n)
        informative = np.column_stack([
            y + 0.2 * rng.normal(size=n),
            -1.5 * y + 0.2 * rng.normal(size=n),
            0.8 * y + 0.2 * rng.normal(size=n)])
        x = np.hstack([informative, rng.normal(size=(n, 17))])
        rep = run_selection(_fm(x), y, config=SelectionConfig(gbt_trees=10))
        for name, ranking in rep.per_selector.items():
            top = {col for col, _ in ranking}
            hits = len(top & {"f0.x", "f1.x", "f2.x"})
            assert hits >= 2, f"{name} found only {hits} informative columns"

    def test_row_subsample_is_deterministic(self, rng):
        n = 3000
        y = rng.integers(0, 2, size=n)
        x = rng.normal(size=(n, 8))
        x[:, 3] += y
        cfg = SelectionConfig(max_rows=500, gbt_trees=5)
        a = run_selection(_fm(x), y, config=cfg, seed=9)
        b = run_selection(_fm(x), y, config=cfg, seed=9)
        assert a.union == b.union and a.per_selector == b.per_selector

    def test_report_json_roundtrip(self, tmp_path, rng):
        n = 400
        y = rng.integers(0, 2, size=n)
        x = rng.normal(size=(n, 6))
        x[:, 1] += y
        rep = run_selection(_fm(x), y,
                            config=SelectionConfig(gbt_trees=3), fold_id=2)
        path = tmp_path / "sel.json"
        rep.save(path)
        back = SelectionReport.load(path)
        assert back.union == rep.union
        assert back.fold_id == 2
        assert back.per_selector == rep.per_selector

    def test_length_mismatch_rejected(self):
        with pytest.raises(SelectionError, match="mismatch"):
            run_selection(_fm(np.zeros((5, 2))), np.zeros(4, dtype=int))
