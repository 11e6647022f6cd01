import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbmgnn import nmi
from sbmgnn.sbm import PlantedPartition

GEN = np.random.default_rng(99)


def _random_joints(count):
    for _ in range(count):
        k = int(GEN.integers(2, 5))
        m = int(GEN.integers(2, 5))
        t = GEN.dirichlet(np.full(k * m, GEN.uniform(0.2, 3.0))).reshape(k, m)
        if GEN.random() < 0.2:
            t[GEN.integers(k), GEN.integers(m)] = 0.0
            t /= t.sum()
        yield t


def test_closed_form_matches_definition():
    worst = 0.0
    for t in _random_joints(1000):
        j = nmi.JointDistribution(t)
        a, b = nmi.nmi_value(j), nmi.nmi_definitional(j)
        worst = max(worst, abs(a - b))
        assert -1e-12 <= a <= 1 + 1e-12
    assert worst < 1e-12


def test_hand_values():
    assert nmi.nmi_value(nmi.JointDistribution(np.diag([0.5, 0.5]))) == 1.0
    assert nmi.nmi_value(nmi.JointDistribution(np.full((2, 2), 0.25))) == 0.0


def test_column_permutation_invariance():
    for t in _random_joints(200):
        perm = GEN.permutation(t.shape[1])
        assert nmi.nmi_value(nmi.JointDistribution(t[:, perm])) == pytest.approx(
            nmi.nmi_value(nmi.JointDistribution(t)), abs=1e-15)


def test_degenerate_partitions_warn():
    with pytest.warns(RuntimeWarning):
        assert nmi.nmi_value(nmi.JointDistribution(np.array([[1.0, 0.0], [0.0, 0.0]]))) == 0.0
    with pytest.warns(RuntimeWarning):
        assert nmi.nmi_definitional(nmi.JointDistribution(np.array([[1.0]]))) == 0.0


def test_floored_path_close_to_exact():
    t = np.array([[0.5, 0.0], [0.0, 0.5]])
    assert nmi.nmi_closed_form(t, floor=1e-12) == pytest.approx(1.0, abs=1e-9)


def test_softmax_properties():
    x = GEN.normal(size=(30, 4))
    p = nmi.readout_probs(x, np.zeros((4, 3)))
    assert np.all(p == 1 / 3)
    p = nmi.softmax(np.array([[50.0, -50.0]]))
    assert p[0, 0] == 1.0 and p[0, 1] < 1e-43
    a = GEN.normal(size=(10, 3))
    np.testing.assert_allclose(nmi.softmax(a + 7.5), nmi.softmax(a), rtol=1e-15, atol=1e-16)
    p = nmi.readout_probs(x, GEN.normal(size=(4, 2)))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        nmi.readout_probs(x, np.zeros((3, 2)))


def test_joint_examples():
    planted = PlantedPartition.balanced(8)
    onehot = np.eye(2)[planted.labels]
    np.testing.assert_array_equal(nmi.joint_from_soft(onehot, planted).table, np.diag([0.5, 0.5]))
    np.testing.assert_array_equal(nmi.joint_from_soft(np.full((8, 2), 0.5), planted).table,
                                  np.full((2, 2), 0.25))
    p = nmi.softmax(GEN.normal(size=(8, 2)))
    j = nmi.joint_from_soft(p, planted)
    brute = np.array([[sum(p[i, h] for i in range(8) if planted.labels[i] == s) / 8 for h in range(2)]
                      for s in range(2)])
    np.testing.assert_allclose(j.table, brute, atol=1e-14, rtol=0)
    assert j.table.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(j.planted_marginal, [0.5, 0.5])


def test_label_path():
    truth = np.array([1, 1, 2, 2])
    assert nmi.nmi_labels(truth, truth) == 1.0
    assert nmi.nmi_labels(np.array([5, 5, 0, 0]), truth) == 1.0
    assert nmi.nmi_labels(np.array([0, 1, 0, 1]), truth) == 0.0
    with pytest.raises(ValueError):
        nmi.nmi_labels(np.array([0, 1]), truth)


@given(st.lists(st.floats(1e-6, 1.0), min_size=4, max_size=4))
def test_bounds_two_by_two(vals):
    t = np.array(vals).reshape(2, 2)
    t /= t.sum()
    v = nmi.nmi_value(nmi.JointDistribution(t))
    assert -1e-12 <= v <= 1 + 1e-12
    assert math.isfinite(v)
