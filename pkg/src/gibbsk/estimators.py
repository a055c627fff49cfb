"""scikit-learn style wrappers.

Rows of ``X`` are spherical-harmonic coefficient vectors of potentials
(length ``(l_max + 1)^2``); functionals become feature columns.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .errors import InputError
from .functionals import (
    COERCIVITY_TAGS,
    coercivity_probe,
    constants_margins,
    ding,
    energy_E,
    entropy,
    fit_constants,
    j_chi,
    j_functional,
    twisting_form,
)
from .geometry import PolarizedModel, Potential, build_quadrature, omega_form
from .gibbs import draw_slater, gamma_k_exact_p1, gamma_k_tail_estimate, partition_from_sample

FEATURES = ("E", "J", "J_omega", "Ent", "J_twist", "M", "D")


def check_coefficients(X) -> tuple[np.ndarray, int]:
    """Validate a coefficient matrix and return it with its ``l_max``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    n = X.shape[1]
    l_max = math.isqrt(n) - 1
    if (l_max + 1) ** 2 != n or l_max < 0:
        raise InputError(f"coefficient rows must have (l_max+1)^2 entries, got {n}")
    return X, l_max


def potentials(X) -> list[Potential]:
    X, l_max = check_coefficients(X)
    return [Potential(row.copy(), l_max) for row in X]


class _QuadratureMixin:
    def _setup(self):
        self.model_ = PolarizedModel(self.m)
        self.quadrature_ = build_quadrature(self.n_polar, self.n_azimuth, self.model_)


class FunctionalTransformer(_QuadratureMixin, TransformerMixin, BaseEstimator):
    """Map potentials to the columns ``E, J, J_omega, Ent, J_twist, M, D``."""

    def __init__(self, m=1, n_polar=64, n_azimuth=128, gamma=0.5, density=None, eta=None):
        self.m = m
        self.n_polar = n_polar
        self.n_azimuth = n_azimuth
        self.gamma = gamma
        self.density = density
        self.eta = eta

    def fit(self, X, y=None):
        X, self.l_max_ = check_coefficients(X)
        self.n_features_in_ = X.shape[1]
        self._setup()
        return self

    def transform(self, X):
        check_is_fitted(self, "quadrature_")
        X, _ = check_coefficients(X)
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"expected {self.n_features_in_} coefficients per row, got {X.shape[1]}")
        q, model, f = self.quadrature_, self.model_, self.density
        twist = twisting_form(self.eta, model)
        out = np.empty((len(X), len(FEATURES)))
        for i, phi in enumerate(potentials(X)):
            ent = entropy(phi, f, q, model)
            jt = j_chi(phi, twist, q, model)
            out[i] = (
                energy_E(phi, q, model),
                j_functional(phi, q, model),
                j_chi(phi, omega_form(model), q, model),
                ent,
                jt,
                ent + jt,
                ding(phi, self.gamma, f, q, model),
            )
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURES, dtype=object)


class ConstantsFitter(_QuadratureMixin, BaseEstimator):
    """Fit the inequality constants over the potentials in ``X``."""

    def __init__(self, m=1, n_polar=64, n_azimuth=128, ks=(2, 3, 4), gamma=0.5, density=None, safety=0.1):
        self.m = m
        self.n_polar = n_polar
        self.n_azimuth = n_azimuth
        self.ks = ks
        self.gamma = gamma
        self.density = density
        self.safety = safety

    def fit(self, X, y=None):
        fam = potentials(X)
        self._setup()
        self.constants_ = fit_constants(
            fam, self.quadrature_, self.model_, tuple(self.ks), self.gamma, self.density, safety=self.safety
        )
        for name in ("A", "B", "C", "C0", "C1", "c"):
            setattr(self, name + "_", getattr(self.constants_, name))
        return self

    def margins(self, X) -> dict:
        check_is_fitted(self, "constants_")
        return constants_margins(self.constants_, potentials(X), self.quadrature_, self.model_, self.density)

    def score(self, X, y=None) -> float:
        """Worst margin over all fitted inequalities (nonnegative when they hold)."""
        return float(min(self.margins(X).values()))


class CoercivityProbe(_QuadratureMixin, BaseEstimator):
    """Lower-envelope fit ``F >= slope * J + intercept`` (a diagnostic, not a proof)."""

    def __init__(self, functional="mabuchi", m=1, n_polar=64, n_azimuth=128, gamma=0.5, density=None, eta=None):
        self.functional = functional
        self.m = m
        self.n_polar = n_polar
        self.n_azimuth = n_azimuth
        self.gamma = gamma
        self.density = density
        self.eta = eta

    def fit(self, X, y=None):
        if self.functional not in COERCIVITY_TAGS:
            raise InputError(f"unknown functional {self.functional!r}; choose from {COERCIVITY_TAGS}")
        self._setup()
        self.report_ = coercivity_probe(
            self.functional, potentials(X), self.quadrature_, self.model_, self.density, self.eta, self.gamma
        )
        self.slope_, self.intercept_ = self.report_.slope, self.report_.intercept
        return self

    def predict(self, X):
        """Envelope values ``slope * J + intercept`` at the potentials in ``X``."""
        check_is_fitted(self, "report_")
        J = np.array([j_functional(p, self.quadrature_, self.model_) for p in potentials(X)])
        return self.slope_ * J + self.intercept_


def _check_levels(X) -> np.ndarray:
    X = check_array(X, dtype=np.int64, ensure_2d=True)
    if X.shape[1] != 2 or np.any(X < 1):
        raise InputError("rows must be positive (m, k) pairs")
    return X


class ThresholdEstimator(BaseEstimator):
    """Predict ``gamma_k`` for rows of ``(m, k)``.

    ``method='exact'`` uses the collision-exponent formula, ``'tail'`` the
    Monte Carlo tail-index estimate. Fitting only validates the input.
    """

    def __init__(self, method="exact", density=None, n_samples=1_000_000, seed=0):
        self.method = method
        self.density = density
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, X, y=None):
        X = _check_levels(X)
        if self.method not in ("exact", "tail"):
            raise InputError(f"method must be 'exact' or 'tail', got {self.method!r}")
        self.n_features_in_ = 2
        return self

    def estimate(self, m: int, k: int):
        if self.method == "exact":
            return gamma_k_exact_p1(m, k, self.density)
        return gamma_k_tail_estimate(k, self.density, self.n_samples, self.seed, m=m)

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        self.estimates_ = [self.estimate(int(m), int(k)) for m, k in _check_levels(X)]
        return np.array([e.value for e in self.estimates_])

    def predict_interval(self, X):
        self.predict(X)
        return np.array([e.interval for e in self.estimates_])


class PartitionFunctionEstimator(BaseEstimator):
    """Draw one Slater sample at ``fit``; ``predict`` maps ``gamma`` values to ``Z(-gamma)``."""

    def __init__(self, m=1, k=1, density=None, n_samples=1_000_000, seed=0):
        self.m = m
        self.k = k
        self.density = density
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, X=None, y=None):
        self.sample_ = draw_slater(self.k, self.density, self.n_samples, self.seed, m=self.m)
        return self

    def estimates(self, gammas):
        check_is_fitted(self, "sample_")
        g = check_array(np.asarray(gammas, dtype=float).reshape(-1, 1), ensure_2d=True).ravel()
        return [partition_from_sample(self.sample_, float(x)) for x in g]

    def predict(self, X):
        return np.array([e.mean for e in self.estimates(X)])

    def predict_log(self, X):
        return np.array([e.log_mean for e in self.estimates(X)])
