import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from oracles import ww_hinge_reference
from predclust.core import (
    Assignment,
    ClusterParams,
    DataError,
    Dataset,
    LossKind,
    LossSpec,
    Regularization,
    Scaler,
    Task,
    augment,
    data_loss,
    load_csv,
    loss_matrix,
    per_datum_loss,
    regularization_term,
    total_loss,
    write_csv,
)

MAE, MSE = LossSpec(LossKind.MAE), LossSpec(LossKind.MSE)
HINGE = LossSpec(LossKind.HINGE_WW)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- loading ------------------------------------------------------------------

def test_load_three_rows(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n"), "y", standardize=False)
    assert (ds.n, ds.d) == (3, 2)
    assert ds.column_names == ("a", "b")
    np.testing.assert_array_equal(ds.target, [3, 6, 9])


def test_missing_target_names_column(tmp_path):
    with pytest.raises(DataError, match="'y'"):
        load_csv(write(tmp_path, "a,b,z\n1,2,3\n"), "y")


def test_constant_column_standardizes_to_zero(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y\n5,1,0\n5,2,1\n5,4,2\n"), "y")
    np.testing.assert_array_equal(ds.features[:, 0], 0.0)
    assert np.all(np.isfinite(ds.features))
    np.testing.assert_allclose(ds.features[:, 1].mean(), 0.0, atol=1e-12)
    np.testing.assert_allclose(ds.features[:, 1].std(), 1.0)


def test_non_numeric_cell_reports_line_and_column(tmp_path):
    with pytest.raises(DataError, match=r"line 3.*'b'"):
        load_csv(write(tmp_path, "a,b,y\n1,2,3\n4,oops,6\n"), "y")


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "absent.csv", "y")


def test_classification_labels_are_coded(tmp_path):
    ds = load_csv(write(tmp_path, "a,label\n0,cat\n1,dog\n2,cat\n3,emu\n"), "label", Task.CLASSIFICATION)
    assert ds.n_classes == 3
    assert list(ds.label_map) == ["cat", "dog", "emu"]
    np.testing.assert_array_equal(ds.target, [0, 1, 0, 2])


def test_exclude_drops_columns(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y,true_cluster\n1,2,3,0\n4,5,6,1\n"), "y", exclude=["true_cluster"])
    assert ds.column_names == ("a", "b")


def test_csv_round_trip(tmp_path):
    ds = Dataset(np.array([[0.1, 2.0], [3.5, -1.0]]), np.array([1.25, -7.0]), column_names=("u", "v"))
    p = tmp_path / "out.csv"
    write_csv(p, ds, "t", extra={"tag": [0, 1]})
    back = load_csv(p, "t", standardize=False, exclude=["tag"])
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.target, ds.target)


def test_dataset_rejects_bad_input():
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(DataError):
        Dataset(np.ones((3, 1)), np.ones(2))
    with pytest.raises(DataError):
        Dataset(np.ones((2, 1)), np.array([0, 2]), Task.CLASSIFICATION)


def test_scaler_inverse():
    x = np.array([[1.0, 10.0], [3.0, 10.0], [5.0, 10.0]])
    sc = Scaler.fit(x)
    np.testing.assert_allclose(sc.inverse(sc.transform(x)), x)


def test_augment_appends_intercept():
    np.testing.assert_array_equal(augment(np.array([[2.0, 3.0]])), [[2.0, 3.0, 1.0]])


# -- assignments ----------------------------------------------------------------

def test_assignment_matrix_round_trip():
    a = Assignment(np.array([0, 2, 1, 2]), 3)
    m = a.matrix
    assert m.shape == (4, 3)
    np.testing.assert_array_equal(m.sum(axis=1), 1)
    assert Assignment.from_matrix(m) == a
    np.testing.assert_array_equal(a.sizes, [1, 1, 2])


def test_assignment_rejects_bad_rows():
    with pytest.raises(ValueError):
        Assignment.from_matrix(np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        Assignment(np.array([0, 3]), 2)


# -- per-datum losses -------------------------------------------------------------

def test_mae_and_mse_examples():
    x = np.array([1.0])  # only the intercept
    assert per_datum_loss(x, 3.0, np.array([1.0]), MAE) == 2.0
    assert per_datum_loss(x, 3.0, np.array([1.0]), MSE) == 4.0


def test_hinge_examples():
    x = np.array([1.0])
    # class order is zero-based: true class 0 scores 3, the other scores 0
    assert per_datum_loss(x, 0, np.array([[3.0], [0.0]]), HINGE) == 0.0
    assert per_datum_loss(x, 0, np.array([[0.0], [0.0]]), HINGE) == 2.0


def test_per_datum_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        per_datum_loss(np.ones(3), 1.0, np.ones(2), MSE)


@given(
    arrays(np.float64, (4, 3), elements=st.floats(-5, 5)),
    arrays(np.float64, 3, elements=st.floats(-5, 5)),
    st.integers(0, 3),
)
def test_hinge_matches_reference_loop(theta, x, y):
    assert per_datum_loss(x, y, theta, HINGE) == pytest.approx(ww_hinge_reference(theta @ x, y), abs=1e-9)


def test_hinge_equals_lp_slack():
    # min sum xi s.t. xi_m >= 2 - (s_y - s_m), xi >= 0 has the hinge sum as optimum
    rng = np.random.default_rng(3)
    for _ in range(10):
        s = rng.normal(size=4) * 2
        y = int(rng.integers(4))
        others = [m for m in range(4) if m != y]
        res = linprog(
            np.ones(3), A_ub=-np.eye(3), b_ub=-(2 - (s[y] - s[others])), bounds=[(0, None)] * 3
        )
        theta = np.diag(s)
        assert per_datum_loss(np.ones(4), y, theta, HINGE) == pytest.approx(res.fun, abs=1e-9)


@given(
    arrays(np.float64, 3, elements=st.floats(-10, 10)),
    arrays(np.float64, 3, elements=st.floats(-10, 10)),
    st.floats(-10, 10),
)
def test_regression_losses_nonnegative_and_related(theta, x, y):
    mae = per_datum_loss(x, y, theta, MAE)
    mse = per_datum_loss(x, y, theta, MSE)
    assert mae >= 0 and mse >= 0
    assert mse == pytest.approx(mae * mae, rel=1e-9, abs=1e-9)


# -- totals -------------------------------------------------------------------------

def test_total_zero_for_exact_plane():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 2))
    w = np.array([1.5, -2.0, 0.5])
    ds = Dataset(x, augment(x) @ w)
    p = ClusterParams(Task.REGRESSION, w[None])
    assert total_loss(ds, Assignment(np.zeros(20, int), 1), p, MAE) == pytest.approx(0.0, abs=1e-12)


def test_total_is_additive_over_assigned_clusters():
    # intercept-only models: cluster 0 predicts 0, cluster 1 predicts 3
    ds = Dataset(np.zeros((2, 1)), np.array([2.0, 5.0]))
    p = ClusterParams(Task.REGRESSION, np.array([[0.0, 0.0], [0.0, 3.0]]))
    assert total_loss(ds, Assignment(np.array([0, 0]), 2), p, MAE) == 7.0
    # row 0 moves to cluster 1 where its loss is 1
    assert total_loss(ds, Assignment(np.array([1, 0]), 2), p, MAE) == 6.0


def test_total_rejects_mismatched_assignment():
    ds = Dataset(np.zeros((3, 1)), np.zeros(3))
    p = ClusterParams(Task.REGRESSION, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        total_loss(ds, Assignment(np.array([0, 1]), 2), p, MSE)


def test_regularization_terms():
    p = ClusterParams(Task.CLASSIFICATION, np.array([[[1.0, -2.0], [0.5, 0.0]]]))
    assert regularization_term(p, LossSpec.hinge_l1(strength=2.0)) == pytest.approx(7.0)
    assert regularization_term(p, LossSpec.hinge_l2(strength=2.0)) == pytest.approx(5.25)
    assert regularization_term(p, LossSpec(LossKind.MSE)) == 0.0


def test_hinge_total_weights_data_term_by_c():
    ds = Dataset(np.zeros((2, 1)), np.array([0, 1]), Task.CLASSIFICATION)
    p = ClusterParams(Task.CLASSIFICATION, np.zeros((1, 2, 2)))
    asg = Assignment(np.zeros(2, int), 1)
    spec = LossSpec(LossKind.HINGE_WW, svm_c=3.0, regularization=Regularization.L1, reg_strength=1.0)
    assert data_loss(ds, asg, p, spec) == 4.0
    assert total_loss(ds, asg, p, spec) == 12.0


@given(st.integers(1, 4), st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_loss_matrix_matches_per_datum(k, n, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.normal(size=(n, 2)), rng.normal(size=n))
    p = ClusterParams(Task.REGRESSION, rng.normal(size=(k, 3)))
    lm = loss_matrix(ds, p, MSE)
    for i in range(n):
        for q in range(k):
            assert lm[i, q] == pytest.approx(per_datum_loss(ds.design[i], ds.target[i], p.weights[q], MSE))
    labels = rng.integers(0, k, n)
    assert data_loss(ds, Assignment(labels, k), p, MSE) == pytest.approx(lm[np.arange(n), labels].sum())
