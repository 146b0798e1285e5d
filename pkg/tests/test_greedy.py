import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from predclust.core import Assignment, ClusterParams, Dataset, LossKind, LossSpec, Task, augment, total_loss
from predclust.greedy import (
    ClusterType,
    GreedyConfig,
    assignment_step,
    fit,
    optimize_per_cluster,
    repair_empty_clusters,
)
from predclust.metrics import adjusted_rand_index
from predclust.synth import SynthSpec, gen_classification, gen_regression

MSE = LossSpec(LossKind.MSE)


def one_cluster(ds):
    return Assignment(np.zeros(ds.n, int), 1)


# -- optimize ----------------------------------------------------------------------

def test_two_points_determine_line():
    ds = Dataset(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
    p = optimize_per_cluster(ds, one_cluster(ds), MSE)
    np.testing.assert_allclose(p.weights[0], [2.0, 1.0], atol=1e-9)


def test_identical_x_fits_mean():
    ds = Dataset(np.full((4, 1), 2.0), np.array([1.0, 2.0, 4.0, 9.0]))
    p = optimize_per_cluster(ds, one_cluster(ds), MSE)
    assert (augment(np.array([[2.0]])) @ p.weights[0]).item() == pytest.approx(4.0, abs=1e-6)


def test_residuals_orthogonal_to_design(rng):
    ds = Dataset(rng.normal(size=(20, 3)), rng.normal(size=20))
    p = optimize_per_cluster(ds, one_cluster(ds), MSE)
    resid = ds.target - ds.design @ p.weights[0]
    np.testing.assert_allclose(ds.design.T @ resid, 0.0, atol=1e-8)


def test_optimize_rejects_empty_cluster():
    ds = Dataset(np.zeros((3, 1)), np.zeros(3))
    with pytest.raises(ValueError, match="empty"):
        optimize_per_cluster(ds, Assignment(np.zeros(3, int), 2), MSE)


# -- assignment ----------------------------------------------------------------------

def test_arbitrary_assigns_to_best_model():
    ds = Dataset(np.array([[2.0, 3.0]]), np.array([2.0]))
    p = ClusterParams(Task.REGRESSION, np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    asg, _ = assignment_step(ds, p, MSE, ClusterType.ARBITRARY)
    assert asg.labels[0] == 0


def test_closest_center_routes_by_l2():
    ds = Dataset(np.array([[0.0, 0.0], [10.0, 10.0], [1.0, 1.0]]), np.array([0.0, 5.0, 5.0]))
    p = ClusterParams(Task.REGRESSION, np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 5.0]]))
    # tentative clusters {0} and {1, 2}: centroids (0,0) and (5.5,5.5); (1,1) is nearer (0,0)
    asg, z = assignment_step(ds, p, MSE, ClusterType.CLOSEST_CENTER)
    np.testing.assert_allclose(z, [[0.0, 0.0], [5.5, 5.5]])
    assert asg.labels[2] == 0


def test_bounding_box_routes_by_l1():
    # tentative clusters {0} at (0,0) and {1, 2}; centroid of {(4,0)... } set up so
    # that the query (1.9, 0) sees L1 distances 1.9 and 2.1
    ds = Dataset(np.array([[0.0, 0.0], [6.1, 0.0], [1.9, 0.0]]), np.array([0.0, 5.0, 5.0]))
    p = ClusterParams(Task.REGRESSION, np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 5.0]]))
    asg, z = assignment_step(ds, p, MSE, ClusterType.BOUNDING_BOX)
    np.testing.assert_allclose(z[1], [4.0, 0.0])
    assert asg.labels[2] == 0


def test_distance_tie_goes_to_lower_index():
    ds = Dataset(np.array([[0.0], [4.0], [2.0], [2.0]]), np.array([0.0, 5.0, 0.0, 5.0]))
    p = ClusterParams(Task.REGRESSION, np.array([[0.0, 0.0], [0.0, 5.0]]))
    # tentative {0, 2} and {1, 3}: centroids 1 and 3, the points at 2 are equidistant
    asg, _ = assignment_step(ds, p, MSE, ClusterType.CLOSEST_CENTER)
    assert list(asg.labels[2:]) == [0, 0]


# -- empty-cluster repair ---------------------------------------------------------------

def test_repair_moves_worst_point():
    ds = Dataset(np.zeros((4, 1)), np.array([0.0, 0.1, 7.0, 0.2]))
    p = ClusterParams(Task.REGRESSION, np.zeros((2, 2)))
    out = repair_empty_clusters(ds, Assignment(np.zeros(4, int), 2), p, MSE)
    np.testing.assert_array_equal(out.labels, [0, 0, 1, 0])


def test_repair_identity_without_empties():
    ds = Dataset(np.zeros((3, 1)), np.zeros(3))
    a = Assignment(np.array([0, 1, 0]), 2)
    assert repair_empty_clusters(ds, a, None, MSE) is a


def test_repair_two_empty_clusters_use_distinct_points():
    ds = Dataset(np.zeros((5, 1)), np.arange(5.0))
    p = ClusterParams(Task.REGRESSION, np.zeros((3, 2)))
    out = repair_empty_clusters(ds, Assignment(np.zeros(5, int), 3), p, MSE)
    assert list(out.sizes) == [3, 1, 1]
    assert out.labels[4] != out.labels[3]


# -- fit -----------------------------------------------------------------------------

def test_n_equals_k_interpolates(rng):
    ds = Dataset(rng.normal(size=(3, 2)), rng.normal(size=3))
    rep = fit(ds, MSE, GreedyConfig(k=3, cluster_type="arbitrary", restarts=2))
    assert rep.loss == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("geometry", ["arbitrary", "cc", "bb"])
def test_fit_is_deterministic_across_workers(geometry):
    ds, _, _ = gen_regression(SynthSpec(n=120, seed=4))
    a = fit(ds, MSE, GreedyConfig(k=3, cluster_type=geometry, restarts=4, seed=9, workers=1))
    b = fit(ds, MSE, GreedyConfig(k=3, cluster_type=geometry, restarts=4, seed=9, workers=3))
    assert a.assignment == b.assignment
    np.testing.assert_array_equal(a.params.weights, b.params.weights)
    assert a.loss_trace == b.loss_trace
    assert a.restart_losses == b.restart_losses


def test_best_restart_is_minimum():
    ds, _, _ = gen_regression(SynthSpec(n=90, seed=2))
    rep = fit(ds, MSE, GreedyConfig(k=3, cluster_type="arbitrary", restarts=6))
    assert rep.loss == min(rep.restart_losses)
    assert rep.restart_index_of_best == int(np.argmin(rep.restart_losses))


def test_reported_loss_matches_params():
    ds, _, _ = gen_regression(SynthSpec(n=90, seed=5))
    for geometry in ClusterType:
        rep = fit(ds, MSE, GreedyConfig(k=3, cluster_type=geometry, restarts=3, max_iters=4))
        assert total_loss(ds, rep.assignment, rep.params, MSE) == pytest.approx(rep.loss, rel=1e-12)
        assert rep.iterations <= 4


@given(st.integers(0, 10_000), st.integers(2, 4))
def test_arbitrary_mse_trace_non_increasing(seed, k):
    ds, _, _ = gen_regression(SynthSpec(n=60, k_true=3, seed=seed))
    rep = fit(ds, MSE, GreedyConfig(k=k, cluster_type="arbitrary", restarts=1, seed=seed))
    t = rep.loss_trace
    assert all(b <= a + 1e-9 for a, b in zip(t, t[1:]))
    assert np.all(rep.assignment.sizes > 0)


def test_closest_center_points_nearest_own_center():
    ds, _, _ = gen_regression(SynthSpec(n=300, seed=1))
    rep = fit(ds, MSE, GreedyConfig(k=3, cluster_type="cc", restarts=3))
    c = rep.params.centers
    d2 = ((ds.features[:, None, :] - c[None]) ** 2).sum(axis=2)
    np.testing.assert_array_equal(np.argmin(d2, axis=1), rep.assignment.labels)


def test_bounding_boxes_contain_members():
    ds, _, _ = gen_regression(SynthSpec(n=300, seed=1))
    rep = fit(ds, MSE, GreedyConfig(k=3, cluster_type="bb", restarts=3))
    lo, hi = rep.params.boxes
    lab = rep.assignment.labels
    assert np.all(ds.features >= lo[lab] - 1e-9)
    assert np.all(ds.features <= hi[lab] + 1e-9)


def test_recovers_synthetic_clusters():
    ds, truth, _ = gen_regression(SynthSpec(n=600, k_true=3, noise_sigma=0.5, seed=0))
    rep = fit(ds, MSE, GreedyConfig(k=3, cluster_type="cc", restarts=5))
    assert adjusted_rand_index(truth, rep.assignment.labels) >= 0.9


def test_mae_request_routes_to_mse_with_warning():
    ds, _, _ = gen_regression(SynthSpec(n=60, seed=0))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = fit(ds, LossSpec(LossKind.MAE), GreedyConfig(k=2, restarts=1))
    assert any("MSE" in str(w.message) for w in caught)
    assert rep.loss >= 0
    with pytest.raises(ValueError):
        fit(ds, LossSpec(LossKind.MAE), GreedyConfig(k=2, restarts=1, strict_loss=True))


def test_fit_rejects_task_mismatch_and_large_k():
    ds, _, _ = gen_regression(SynthSpec(n=10, seed=0))
    with pytest.raises(ValueError):
        fit(ds, LossSpec.hinge_l2(), GreedyConfig(k=2))
    with pytest.raises(ValueError):
        fit(ds, MSE, GreedyConfig(k=11))


def test_classification_fit_beats_single_model():
    ds, truth, _ = gen_classification(SynthSpec(task=Task.CLASSIFICATION, k_true=2, n=400, seed=0))
    from predclust.evaluation import standardized

    ds = standardized(ds)
    one = fit(ds, LossSpec.hinge_l2(), GreedyConfig(k=1, restarts=1))
    two = fit(ds, LossSpec.hinge_l2(), GreedyConfig(k=2, restarts=3))
    assert two.metrics["train_accuracy"] > one.metrics["train_accuracy"]
    assert two.loss <= one.loss
