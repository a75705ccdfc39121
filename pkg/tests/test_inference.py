import warnings

import numpy as np
import pytest
from scipy import stats

from catamva.ca import fit_ca
from catamva.errors import (
    DegenerateEllipseWarning,
    EmptyBrick,
    EmptyGroup,
    GroupTooSmall,
    SpaceMismatch,
)
from catamva.ingest import ContingencyTable, ResponseBrick, sum_to_contingency
from catamva.inference import (
    bootstrap_group_means,
    bootstrap_means,
    ellipse_from_cloud,
    permutation_p_values,
    permutation_test_eigen,
    permutation_test_plsc,
    run_replicates,
    shuffle_excerpts,
    welch_t,
)
from catamva.mds import MDSModel
from catamva.synth import planted_brick, random_brick


def constant_responder_brick(rng, P=6, E=5, L=4, per=3):
    presented = np.zeros((P, E), bool)
    for i in range(P):
        presented[i, rng.choice(E, per, replace=False)] = True
    answers = rng.random((P, L)) < 0.5
    answers[np.arange(P), np.arange(P) % L] = True
    values = presented[:, :, None] & answers[:, None, :]
    return ResponseBrick([f"p{i}" for i in range(P)], [f"e{j}" for j in range(E)],
                         [("A", f"l{k}") for k in range(L)], values.astype(float), presented, ["g"] * P)


class TestReplicates:
    def test_serial_equals_parallel(self):
        f = lambda r, g: g.random(3)
        a = np.stack(run_replicates(f, 42, 50, 1))
        b = np.stack(run_replicates(f, 42, 50, 4))
        assert np.array_equal(a, b)

    def test_seed_changes_stream(self):
        f = lambda r, g: g.random()
        assert run_replicates(f, 1, 5) != run_replicates(f, 2, 5)

    def test_p_value_smoothing(self):
        p = permutation_p_values([1.0, 0.5], [[0.0, 0.9], [0.2, 0.8]])
        np.testing.assert_allclose(p, [1 / 3, 1.0])


class TestShuffle:
    def test_preserves_multiset_and_mask(self, rng):
        b = random_brick(rng, P=8, E=6, L=3, per=4)
        out = shuffle_excerpts(b.values, b.presented, rng)
        assert np.all(out[~b.presented] == 0)
        for p in range(8):
            before = sorted(map(tuple, b.values[p][b.presented[p]]))
            after = sorted(map(tuple, out[p][b.presented[p]]))
            assert before == after


class TestPermutationEigen:
    def test_constant_responders_p_one(self, rng):
        b = constant_responder_brick(rng)
        res = permutation_test_eigen(b, B=50, seed=3)
        assert res.observed.size > 0
        np.testing.assert_array_equal(res.p_values, 1.0)

    def test_planted_signal(self, rng):
        res = permutation_test_eigen(planted_brick(rng, P=30, E=10, L=8), B=200, seed=1)
        assert res.p_values[0] <= 0.01

    def test_p_range_and_determinism(self, rng):
        b = random_brick(rng)
        a = permutation_test_eigen(b, B=40, seed=9)
        c = permutation_test_eigen(b, B=40, seed=9, n_jobs=3)
        assert np.array_equal(a.replicates, c.replicates)
        assert np.all(a.p_values >= 1 / 41) and np.all(a.p_values <= 1)

    def test_observed_matches_fit(self, rng):
        b = random_brick(rng)
        res = permutation_test_eigen(b, B=5, seed=0)
        np.testing.assert_allclose(res.observed, fit_ca(sum_to_contingency(b).drop_empty()[0]).eigenvalues,
                                   rtol=1e-12)

    def test_empty(self):
        b = ResponseBrick(["p"], ["e"], [("A", "x")], np.zeros((1, 1, 1)), np.ones((1, 1), bool), ["g"])
        with pytest.raises(EmptyBrick):
            permutation_test_eigen(b, B=2)


class TestPermutationPLSC:
    def tables(self, rng, n=12):
        rows = [f"r{i:02d}" for i in range(n)]
        X = rng.uniform(0, 5, (n, 4))
        Y = X[:, :3] + rng.uniform(0, 0.5, (n, 3))
        return ContingencyTable(rows, list("abcd"), X), ContingencyTable(rows, list("xyz"), Y)

    def test_self_pair_minimum_p(self, rng):
        x, _ = self.tables(rng)
        res = permutation_test_plsc(x, x, B=99, seed=4)
        assert res.p_values[0] == pytest.approx(1 / 100)

    def test_joint_relabeling_invariance(self, rng):
        x, y = self.tables(rng)
        perm = rng.permutation(len(x.rows))
        rows = [x.rows[i] for i in perm]
        a = permutation_test_plsc(x, y, B=60, seed=8)
        b = permutation_test_plsc(x.select_rows(rows), y.select_rows(rows), B=60, seed=8)
        np.testing.assert_allclose(a.observed, b.observed, rtol=1e-12)
        np.testing.assert_array_equal(a.p_values, b.p_values)


class TestBootstrap:
    def test_zero_variance_group(self):
        pts = np.array([[1.0, 2.0]] * 4 + [[0, 0], [1, 1], [2, 0]])
        with pytest.warns(DegenerateEllipseWarning):
            res = bootstrap_means(pts, ["a"] * 4 + ["b"] * 3, B=30, seed=0)
        e = res.ellipses["a"]
        assert e.degenerate and e.area == 0
        assert np.all(res.replicates[:, 0] == [1.0, 2.0])

    def test_determinism(self, rng):
        pts = rng.normal(size=(40, 2))
        g = ["a", "b"] * 20
        a = bootstrap_means(pts, g, B=100, seed=5)
        b = bootstrap_means(pts, g, B=100, seed=5, n_jobs=2)
        assert np.array_equal(a.replicates, b.replicates)
        for k in ("a", "b"):
            assert np.array_equal(a.ellipses[k].semi_axes, b.ellipses[k].semi_axes)

    def test_center_converges(self, rng):
        pts = rng.normal(size=(60, 2)) * [2, 0.5]
        res = bootstrap_means(pts, ["a"] * 60, B=2000, seed=11)
        cloud = res.replicates[:, 0]
        se = cloud.std(axis=0, ddof=1) / np.sqrt(2000)
        assert np.all(np.abs(res.ellipses["a"].center - res.observed[0]) <= 3 * se)

    def test_ellipse_geometry(self, rng):
        cloud = rng.normal(size=(5000, 2)) * [3, 1]
        e = ellipse_from_cloud(cloud, 0.95)
        q = stats.chi2.ppf(0.95, 2)
        assert e.semi_axes[0] == pytest.approx(3 * np.sqrt(q), rel=0.05)
        assert abs(np.sin(e.angle)) < 0.05
        inside = np.mean([e.contains(p) for p in cloud[:1000]])
        assert 0.92 <= inside <= 0.98

    def test_mds_space(self, rng):
        space = MDSModel(rng.normal(size=(10, 3)), np.array([3.0, 2.0, 1.0]), 0.0,
                         tuple("abcdefghij"), ("F",) * 5 + ("U",) * 5)
        res = bootstrap_group_means(None, space, B=50, seed=2, dims=(0, 2))
        np.testing.assert_allclose(res.observed[0], space.scores[:5][:, [0, 2]].mean(axis=0))
        assert res.labels == ("F", "U")

    def test_ca_space(self, rng):
        b = planted_brick(rng, P=20, groups=["F"] * 10 + ["U"] * 10)
        model = fit_ca(sum_to_contingency(b).drop_empty()[0])
        res = bootstrap_group_means(b, model, B=40, seed=1)
        assert res.replicates.shape == (40, 2, 2)
        assert set(res.ellipses) == {"F", "U"}

    def test_errors(self, rng):
        space = MDSModel(rng.normal(size=(4, 2)), np.array([2.0, 1.0]), 0.0, tuple("abcd"), ("F",) * 4)
        with pytest.raises(SpaceMismatch):
            bootstrap_group_means(None, space, groups=["F"] * 3, B=5)
        with pytest.raises(EmptyGroup):
            bootstrap_means(np.zeros((2, 2)), ["a", "a"], B=2, group_order=["a", "b"])


class TestWelch:
    def test_identical_groups(self):
        res = welch_t([1, 2, 3, 1, 2, 3], ["a"] * 3 + ["b"] * 3)
        assert res.t == 0 and res.p == 1

    def test_hand_formula(self):
        res = welch_t([1, 2, 3, 2, 3, 4], ["a"] * 3 + ["b"] * 3)
        se2 = 1 / 3 + 1 / 3
        t = -1 / np.sqrt(se2)
        df = se2**2 / (2 * (1 / 3) ** 2 / 2)
        assert res.t == pytest.approx(t, rel=1e-12)
        assert res.df == pytest.approx(df, rel=1e-12) == pytest.approx(4.0)
        assert res.p == pytest.approx(2 * stats.t.sf(abs(t), df), rel=1e-12)

    def test_matches_scipy(self, rng):
        a, b = rng.normal(0, 1, 30), rng.normal(0.5, 2, 45)
        ours = welch_t(np.r_[a, b], ["a"] * 30 + ["b"] * 45)
        ref = stats.ttest_ind(a, b, equal_var=False)
        assert ours.t == pytest.approx(ref.statistic, rel=1e-10)
        assert ours.p == pytest.approx(ref.pvalue, rel=1e-8)
        assert ours.df > 0

    def test_report(self):
        res = welch_t([0.0, 0.1, 5, 5.1, 5.2], ["a", "a", "b", "b", "b"])
        assert res.report().startswith("t(") and "p < .001" in res.report()

    def test_too_small(self):
        with pytest.raises(GroupTooSmall):
            welch_t([1, 2, 3], ["a", "b", "b"])
