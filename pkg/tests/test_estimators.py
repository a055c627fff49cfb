import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from gibbsk.errors import InputError
from gibbsk.estimators import (
    FEATURES,
    CoercivityProbe,
    ConstantsFitter,
    FunctionalTransformer,
    PartitionFunctionEstimator,
    ThresholdEstimator,
    check_coefficients,
)
from gibbsk.geometry import PolarizedModel, random_family


@pytest.fixture(scope="module")
def X():
    fam = random_family(2, 12, 4, PolarizedModel(1))
    return np.array([p.coefficients for p in fam])


def test_coefficient_check():
    with pytest.raises(InputError):
        check_coefficients(np.zeros((2, 5)))
    _, l_max = check_coefficients(np.zeros((2, 9)))
    assert l_max == 2


def test_transformer_columns(X):
    tr = FunctionalTransformer(n_polar=32, n_azimuth=64)
    out = tr.fit_transform(X)
    assert out.shape == (len(X), len(FEATURES))
    assert list(tr.get_feature_names_out()) == list(FEATURES)
    j = out[:, FEATURES.index("J")]
    assert np.all(j >= -1e-8)
    with pytest.raises(InputError):
        tr.transform(np.zeros((1, 16)))


def test_transformer_in_pipeline(X):
    pipe = make_pipeline(FunctionalTransformer(n_polar=32, n_azimuth=64), StandardScaler())
    assert pipe.fit_transform(X).shape == (len(X), len(FEATURES))
    assert clone(pipe).get_params()["functionaltransformer__gamma"] == 0.5


def test_constants_fitter(X):
    est = ConstantsFitter(n_polar=32, n_azimuth=64, ks=(2,)).fit(X)
    assert est.C_ >= 0 and est.c_ == 0.0
    assert est.score(X) >= -1e-9


def test_coercivity_probe(X):
    est = CoercivityProbe("J", n_polar=32, n_azimuth=64).fit(X)
    assert est.slope_ == pytest.approx(1.0, abs=1e-9)
    assert est.predict(X).shape == (len(X),)
    with pytest.raises(InputError):
        CoercivityProbe("nope").fit(X)


def test_threshold_estimator_exact():
    est = ThresholdEstimator().fit([[1, 1]])
    pred = est.predict([[1, 1], [2, 1], [1, 3]])
    assert np.allclose(pred, [1.0, 2 / 3, 1.5])
    assert est.predict_interval([[1, 1]]).shape == (1, 2)
    with pytest.raises(InputError):
        ThresholdEstimator().fit([[0, 1]])


def test_partition_estimator():
    est = PartitionFunctionEstimator(n_samples=50_000, seed=1).fit()
    z = est.predict([0.2])
    assert z[0] == pytest.approx(1 / 0.8, rel=0.02)
    assert est.predict_log([0.2])[0] == pytest.approx(np.log(z[0]))
