import numpy as np
import pytest

from oracles import kruskal_mst_weight, mutual_reachability_matrix
from semtopic.cluster import (
    ClusterConfig,
    ClusterError,
    build_mst,
    cluster_points,
    cluster_stabilities,
    condense_tree,
    core_distances,
    extract_clusters,
    mst_from_points,
    mutual_reachability,
    select_clusters,
)


def two_gaussian_blobs(rng, n_per=60, sigma=0.05, separation=10.0):
    a = rng.normal(scale=sigma, size=(n_per, 2))
    b = rng.normal(scale=sigma, size=(n_per, 2)) + np.array([separation, 0.0])
    points = np.vstack([a, b])
    truth = np.array([0] * n_per + [1] * n_per)
    return points, truth


class TestCoreDistances:
    def test_nearest_neighbor_distances(self):
        points = np.array([[0.0], [1.0], [3.0]])
        np.testing.assert_allclose(core_distances(points, 1), [1.0, 1.0, 2.0])

    def test_second_neighbor_hand_table(self):
        points = np.array([[0.0], [1.0], [3.0]])
        np.testing.assert_allclose(core_distances(points, 2), [3.0, 2.0, 3.0])

    def test_duplicates_have_zero_core(self):
        points = np.array([[2.0, 2.0], [2.0, 2.0], [5.0, 5.0]])
        assert core_distances(points, 1)[0] == 0.0

    def test_min_samples_too_large(self):
        with pytest.raises(ClusterError):
            core_distances(np.zeros((3, 1)), 3)


class TestMutualReachability:
    def test_max_of_three(self):
        assert mutual_reachability(1.0, 2.0, 3.0) == 3.0
        assert mutual_reachability(5.0, 2.0, 3.0) == 5.0

    def test_dominates_raw_distances(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(50, 3))
        mreach = mutual_reachability_matrix(points, 5)
        diff = points[:, None, :] - points[None, :, :]
        raw = np.sqrt((diff * diff).sum(axis=2))
        assert (mreach >= raw - 1e-12).all()


class TestBuildMst:
    def test_triangle_hand_case(self):
        weights = np.array([[0.0, 1.0, 3.0], [1.0, 0.0, 2.0], [3.0, 2.0, 0.0]])
        edges = build_mst(weights)
        assert edges.shape == (2, 3)
        chosen = {frozenset((int(u), int(v))) for u, v, _ in edges}
        assert chosen == {frozenset((0, 1)), frozenset((1, 2))}
        assert edges[:, 2].sum() == 3.0

    def test_single_point(self):
        assert build_mst(np.zeros((1, 1))).shape == (0, 3)

    def test_matches_kruskal_oracle(self):
        rng = np.random.default_rng(1)
        points = rng.normal(size=(200, 4))
        mreach = mutual_reachability_matrix(points, 5)
        edges = build_mst(mreach)
        assert abs(edges[:, 2].sum() - kruskal_mst_weight(mreach)) < 1e-9

    def test_matches_scipy_oracle(self):
        from scipy.sparse.csgraph import minimum_spanning_tree

        rng = np.random.default_rng(2)
        points = rng.normal(size=(80, 3))
        mreach = mutual_reachability_matrix(points, 4)
        edges = build_mst(mreach)
        oracle = minimum_spanning_tree(mreach).sum()
        assert abs(edges[:, 2].sum() - oracle) < 1e-9

    def test_point_variant_equals_matrix_variant(self):
        rng = np.random.default_rng(3)
        points = rng.normal(size=(60, 2))
        core = core_distances(points, 5)
        from_points = mst_from_points(points, core)
        mreach = mutual_reachability_matrix(points, 5)
        np.testing.assert_allclose(
            from_points[:, 2].sum(), build_mst(mreach)[:, 2].sum(), atol=1e-9
        )


class TestCondensedTree:
    def _tree(self, points, mcs=10, min_samples=None):
        core = core_distances(points, min_samples or mcs)
        edges = mst_from_points(points, core)
        return condense_tree(edges, mcs, n_points=len(points))

    def test_child_sizes_sum_at_splits(self):
        rng = np.random.default_rng(4)
        points, _ = two_gaussian_blobs(rng)
        tree = self._tree(points)
        sizes = {tree.root: tree.n_points}
        for parent, child, size in zip(tree.parent, tree.child, tree.child_size):
            if child >= tree.n_points:
                sizes[int(child)] = int(size)
        for node, size in sizes.items():
            out = tree.child_size[tree.parent == node].sum()
            if out:
                assert out == size

    def test_lambda_non_decreasing_toward_leaves(self):
        rng = np.random.default_rng(5)
        points, _ = two_gaussian_blobs(rng)
        tree = self._tree(points)
        birth = {tree.root: 0.0}
        for parent, child, lam in zip(tree.parent, tree.child, tree.lam):
            if child >= tree.n_points:
                birth[int(child)] = float(lam)
        for parent, lam in zip(tree.parent, tree.lam):
            assert lam >= birth[int(parent)]

    def test_selected_nodes_form_antichain(self):
        rng = np.random.default_rng(6)
        points = np.vstack(
            [
                rng.normal(scale=0.05, size=(40, 2)),
                rng.normal(scale=0.05, size=(40, 2)) + [4, 0],
                rng.normal(scale=0.05, size=(40, 2)) + [0, 4],
                rng.uniform(-2, 6, size=(15, 2)),
            ]
        )
        tree = self._tree(points)
        chosen = select_clusters(tree)
        parent_of = {
            int(child): int(parent)
            for parent, child in zip(tree.parent, tree.child)
            if child >= tree.n_points
        }
        for c in chosen:
            node = c
            while node in parent_of:
                node = parent_of[node]
                assert node not in chosen

    def test_selection_rule_stability_dominance(self):
        rng = np.random.default_rng(7)
        points, _ = two_gaussian_blobs(rng)
        tree = self._tree(points)
        stability = cluster_stabilities(tree)
        chosen = set(select_clusters(tree))
        children = {c: [] for c in stability}
        for parent, child in zip(tree.parent, tree.child):
            if child >= tree.n_points:
                children[int(parent)].append(int(child))

        def selected_descendant_sum(c):
            total = 0.0
            stack = list(children[c])
            while stack:
                node = stack.pop()
                if node in chosen:
                    total += stability[node]
                else:
                    stack.extend(children[node])
            return total

        for c in chosen:
            assert stability[c] > selected_descendant_sum(c) or not children[c]


class TestExtractClusters:
    def test_two_blobs_recovered(self):
        from sklearn.metrics import adjusted_rand_score

        rng = np.random.default_rng(8)
        points, truth = two_gaussian_blobs(rng)
        assignment = cluster_points(points, ClusterConfig(min_cluster_size=10))
        assert assignment.n_clusters == 2
        assert adjusted_rand_score(truth, assignment.labels) >= 0.95

    def test_single_blob_single_cluster(self):
        rng = np.random.default_rng(9)
        points = rng.normal(scale=0.05, size=(50, 2))
        assignment = cluster_points(points, ClusterConfig(min_cluster_size=10))
        assert assignment.n_clusters == 1
        assert (assignment.labels == 0).all()

    def test_scattered_points_size_floor(self):
        rng = np.random.default_rng(10)
        points = rng.uniform(size=(20, 2))
        assignment = cluster_points(points, ClusterConfig(min_cluster_size=10))
        for label in range(assignment.n_clusters):
            assert (assignment.labels == label).sum() >= 10

    def test_cluster_ids_by_decreasing_size(self):
        rng = np.random.default_rng(11)
        small = rng.normal(scale=0.05, size=(20, 2))
        large = rng.normal(scale=0.05, size=(60, 2)) + [8, 0]
        assignment = cluster_points(
            np.vstack([small, large]), ClusterConfig(min_cluster_size=10)
        )
        assert assignment.n_clusters == 2
        sizes = [(assignment.labels == c).sum() for c in range(2)]
        assert sizes[0] >= sizes[1]

    def test_noise_probability_zero_members_positive(self):
        rng = np.random.default_rng(12)
        points = np.vstack(
            [
                rng.normal(scale=0.05, size=(30, 2)),
                rng.normal(scale=0.05, size=(30, 2)) + [6, 0],
                rng.uniform(-3, 9, size=(12, 2)),
            ]
        )
        assignment = cluster_points(points, ClusterConfig(min_cluster_size=10))
        noise = assignment.labels == -1
        assert (assignment.probabilities[noise] == 0).all()
        assert (assignment.probabilities[~noise] > 0).all()
        assert (assignment.probabilities <= 1).all()

    def test_partition_and_determinism(self):
        rng = np.random.default_rng(13)
        points, _ = two_gaussian_blobs(rng, n_per=40)
        cfg = ClusterConfig(min_cluster_size=10)
        first = cluster_points(points, cfg)
        second = cluster_points(points, cfg)
        np.testing.assert_array_equal(first.labels, second.labels)
        np.testing.assert_array_equal(first.probabilities, second.probabilities)
        labels = set(first.labels.tolist())
        assert labels <= ({-1} | set(range(first.n_clusters)))

    def test_stabilities_align_with_labels(self):
        rng = np.random.default_rng(14)
        points, _ = two_gaussian_blobs(rng)
        assignment = cluster_points(points, ClusterConfig(min_cluster_size=10))
        assert len(assignment.stabilities) == assignment.n_clusters
        assert all(s > 0 for s in assignment.stabilities)


class TestClusterConfig:
    def test_min_samples_defaults_to_min_cluster_size(self):
        assert ClusterConfig(min_cluster_size=12).effective_min_samples == 12
        assert ClusterConfig(min_cluster_size=12, min_samples=5).effective_min_samples == 5

    def test_validation(self):
        with pytest.raises(ClusterError):
            ClusterConfig(min_cluster_size=1).validate()
        with pytest.raises(ClusterError):
            ClusterConfig(min_samples=0).validate()
        with pytest.raises(ClusterError):
            ClusterConfig(metric="cosine").validate()

    def test_presets_documented(self):
        from semtopic.cluster import PRESET_MIN_CLUSTER_SIZE

        assert PRESET_MIN_CLUSTER_SIZE["newsgroups"] == 10
        assert PRESET_MIN_CLUSTER_SIZE["tweets"] == 8
