"""Estimator-style front end composing the identification pipeline.

``UnknownInputRealizer.fit`` consumes a measurement record of a known
plant and produces the recovered input statistics, the fitted AR model,
the whitened innovations model, and the augmented filter;  ``predict``
then filters new measurements into plant-state estimates.  Parameters
follow scikit-learn conventions (``get_params`` / ``set_params`` work and
the class composes with pipelines that pass array data through).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import armodel as armod
from . import filtering, recovery
from .autocorr import sample_autocorrelation, subtract_noise_floor
from .lti import markov_parameters


def _validate_measurements(Y, q):
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise ValueError(f"measurements must be 2-D (T, q), got shape {Y.shape}")
    if Y.shape[1] != q:
        raise ValueError(f"measurements must have {q} columns, got {Y.shape[1]}")
    if Y.shape[0] < 2:
        raise ValueError("need at least two measurement samples")
    if not np.all(np.isfinite(Y.real)) or not np.all(np.isfinite(Y.imag)):
        raise ValueError("measurements contain non-finite values")
    return Y.astype(np.complex128)


class UnknownInputRealizer(BaseEstimator):
    """Recover unknown-input statistics of a known plant from its outputs.

    Parameters
    ----------
    plant : LtiSystem
        The known system driven by the unknown stationary input.
    markov_count : int
        Impulse-response truncation length used by the coefficient matrix.
    input_lags, output_lags : int
        Lag windows of the recovered input and estimated output
        autocorrelations (input window must not exceed the output window).
    ar_order : int or "auto"
        AR model order; "auto" minimizes the final prediction error.
    solver : {"direct", "cg"}
        Dense QR least squares or conjugate gradients on the normal
        equations.
    era_order : int or "auto"
        State count of the realized innovations model.
    memory_budget : int
        Maximum dense entries of the coefficient matrix.
    """

    def __init__(
        self,
        plant=None,
        markov_count=400,
        input_lags=40,
        output_lags=200,
        ar_order="auto",
        solver="direct",
        era_order="auto",
        memory_budget=recovery.DEFAULT_MEMORY_BUDGET,
    ):
        self.plant = plant
        self.markov_count = markov_count
        self.input_lags = input_lags
        self.output_lags = output_lags
        self.ar_order = ar_order
        self.solver = solver
        self.era_order = era_order
        self.memory_budget = memory_budget

    def fit(self, Y, y=None):
        """Identify the input model from a measurement record of shape (T, q)."""
        if self.plant is None:
            raise ValueError("a plant must be provided before fitting")
        Y = _validate_measurements(Y, self.plant.q)
        markov = markov_parameters(self.plant, self.markov_count)
        Ryy = sample_autocorrelation(Y, self.output_lags)
        Ryy_hat = subtract_noise_floor(Ryy, self.plant.Omega)
        Cm = recovery.build_coefficient_matrix(
            markov,
            self.input_lags,
            self.output_lags,
            memory_budget=self.memory_budget,
        )
        Ruu, info = recovery.solve_input_autocorr(Cm, Ryy_hat, method=self.solver)
        if self.ar_order == "auto":
            order = armod.select_ar_order(Ruu, sample_count=Y.shape[0])
        else:
            order = int(self.ar_order)
        self.ar_model_ = armod.fit_yule_walker(Ruu, order)
        self.innovations_ = armod.realize_innovations(
            self.ar_model_, era_order=self.era_order
        )
        self.augmented_ = filtering.build_augmented(self.plant, self.innovations_)
        self.input_autocorr_ = Ruu
        self.output_autocorr_ = Ryy
        self.coefficient_matrix_ = Cm
        self.solve_info_ = info
        self.n_features_in_ = self.plant.q
        return self

    def _check_fitted(self):
        if not hasattr(self, "augmented_"):
            raise RuntimeError("estimator is not fitted; call fit() first")

    def predict(self, Y):
        """Filter measurements into posterior plant-state estimates (T, n)."""
        self._check_fitted()
        Y = _validate_measurements(Y, self.plant.q)
        run = filtering.run_filter(self.augmented_, Y)
        return run["means"][:, : self.plant.n]

    def transform(self, Y):
        """Alias of predict, for transformer-style composition."""
        return self.predict(Y)

    def score(self, Y, X_true):
        """Negative ARMSE of the filtered estimates against true states."""
        estimates = self.predict(Y)
        return -filtering.armse(estimates, np.asarray(X_true))
