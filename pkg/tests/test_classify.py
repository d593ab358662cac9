import numpy as np
import pytest

from edgequery.classify import (
    Decision, ImagePackage, SyntheticClassifierSpec, cloud_classify, confidences, decide, edge_classify,
)


def pkg(i, label="car"):
    return ImagePackage(i, "cam", 0.0, 100, label)


def test_uniform_shape_has_mean_half():
    f = confidences(np.arange(10_000), np.ones(10_000, bool), SyntheticClassifierSpec((1, 1), (2, 8), seed=4))
    assert abs(f.mean() - 0.5) <= 0.02


def test_beta_8_2_mean():
    f = confidences(np.arange(10_000), np.ones(10_000, bool), SyntheticClassifierSpec(seed=9))
    assert abs(f.mean() - 0.8) <= 0.02
    g = confidences(np.arange(10_000), np.zeros(10_000, bool), SyntheticClassifierSpec(seed=9))
    assert abs(g.mean() - 0.2) <= 0.02


def test_edge_classify_deterministic_and_consistent():
    spec = SyntheticClassifierSpec(seed=3)
    a = edge_classify(pkg(17, "moped"), spec, "moped")
    assert a == edge_classify(pkg(17, "moped"), spec, "moped")
    batch = confidences([5, 17, 2], [False, True, False], spec)
    assert batch[1] == a
    assert a != edge_classify(pkg(17, "moped"), SyntheticClassifierSpec(seed=4), "moped")


@pytest.mark.parametrize("f,a,b,want", [
    (0.95, 0.8, 0.1, Decision.POSITIVE),
    (0.5, 0.5, 0.5, Decision.UNCERTAIN),
    (0.05, 0.8, 0.1, Decision.NEGATIVE),
    (0.8, 0.8, 0.1, Decision.UNCERTAIN),
    (0.1, 0.8, 0.1, Decision.UNCERTAIN),
])
def test_decide(f, a, b, want):
    assert decide(f, a, b).decision is want


@pytest.mark.parametrize("a,b", [(0.4, 0.1), (0.8, 0.6), (1.1, 0.1), (0.8, -0.1)])
def test_decide_rejects_bad_thresholds(a, b):
    with pytest.raises(ValueError):
        decide(0.5, a, b)


def test_cloud_is_ground_truth():
    assert cloud_classify(pkg(1, "moped"), "moped").positive
    assert not cloud_classify(pkg(1, "car"), "moped").positive
    rng = np.random.default_rng(0)
    labels = rng.choice(["moped", "car", "person"], 1000)
    for i, lab in enumerate(labels):
        assert cloud_classify(pkg(i, lab), "moped").positive == (lab == "moped")


def test_package_validation():
    with pytest.raises(ValueError):
        ImagePackage(1, "c", 0.0, 0, "car")
    with pytest.raises(ValueError):
        ImagePackage(1, "c", -1.0, 10, "car")
    with pytest.raises(ValueError):
        SyntheticClassifierSpec((0, 1))
