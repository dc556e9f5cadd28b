# src/synthetic_intervention.py
# Synthetic intervention: a unit's counterfactual trajectory under an
# intervention it never received, written as a ridge-weighted combination of
# donor units that did receive it.
import logging
from dataclasses import dataclass, replace

import numpy as np
from sklearn.linear_model import LinearRegression, Ridge
from sklearn.metrics import mean_squared_error
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

import config
from src.errors import ConfigError, InsufficientDataError, InsufficientDonorsError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SiParams:
    r_train_val: float = config.R_TRAIN_VAL
    ridge_grid: tuple = config.RIDGE_GRID
    pre_period_end: int = config.PRE_PERIOD_END

    def __post_init__(self):
        if self.r_train_val <= 0:
            raise ConfigError(f"r_train_val must be > 0, got {self.r_train_val}")
        if len(self.ridge_grid) == 0 or any(g < 0 for g in self.ridge_grid):
            raise ConfigError("ridge_grid must be a nonempty sequence of values >= 0")
        if self.pre_period_end is not None and self.pre_period_end < 1:
            raise ConfigError(f"pre_period_end must be >= 1, got {self.pre_period_end}")

    def resolved(self, baseline_index):
        """Fill in the default fitting segment: every visit up to and
        including the baseline."""
        if self.pre_period_end is not None:
            return self
        return replace(self, pre_period_end=baseline_index + 1)

    def fitting_end(self, visits):
        if self.pre_period_end is None:
            raise ConfigError("SiParams.pre_period_end is unset; call resolved(baseline_index) first")
        if not 1 <= self.pre_period_end < visits:
            raise ConfigError(f"pre_period_end must lie in [1, {visits}), got {self.pre_period_end}")
        return self.pre_period_end

    def to_dict(self):
        return {"r_train_val": self.r_train_val, "ridge_grid": list(self.ridge_grid),
                "pre_period_end": self.pre_period_end}


def donor_scaler(donors):
    """Per-visit standardization fitted on the donor pool. Constant visit
    columns keep scale 1."""
    return StandardScaler().fit(donors)


def fit_weights(donor_pre, target_pre, regularization):
    """Weights (targets x donors) expressing each target's fitting segment
    as a combination of the donors' segments. Zero regularization gives the
    minimum-norm least-squares solution."""
    # rows are visits, features are donors
    if regularization > 0:
        model = Ridge(alpha=regularization, fit_intercept=False)
    else:
        model = LinearRegression(fit_intercept=False)
    model.fit(donor_pre.T, target_pre.T)
    return np.atleast_2d(model.coef_)


class SyntheticIntervention:
    """Donor pool plus one regularization strength; predicts counterfactual
    trajectories for any number of target units."""

    def __init__(self, donors, regularization, pre_period_end):
        donors = np.asarray(donors, dtype=float)
        if donors.ndim != 2 or donors.shape[0] == 0:
            raise InsufficientDataError("synthetic intervention needs at least one donor")
        self.donors = donors
        self.regularization = regularization
        self.pre_period_end = pre_period_end
        self.scaler = donor_scaler(donors)
        self._donors_norm = self.scaler.transform(donors)

    def weights(self, targets):
        targets_norm = self.scaler.transform(np.atleast_2d(targets))
        return fit_weights(self._donors_norm[:, :self.pre_period_end],
                           targets_norm[:, :self.pre_period_end], self.regularization)

    def predict(self, targets):
        weights = self.weights(targets)
        return self.scaler.inverse_transform(weights @ self._donors_norm), weights


def predict_counterfactual(donors, target, regularization, params):
    donors = np.asarray(donors, dtype=float)
    target = np.asarray(target, dtype=float)
    model = SyntheticIntervention(donors, regularization, params.fitting_end(donors.shape[1]))
    counterfactual, weights = model.predict(target)
    if target.ndim == 1:
        return counterfactual[0], weights[0]
    return counterfactual, weights


def split_donors(n_donors, r_train_val, rng):
    n_train = int(round(n_donors * r_train_val / (1.0 + r_train_val)))
    n_train = min(max(n_train, 1), n_donors - 1)
    train, val = train_test_split(np.arange(n_donors), train_size=n_train,
                                  random_state=int(rng.integers(2 ** 31 - 1)))
    return train, val


def validation_errors(donors, params, rng):
    """Held-out reconstruction MSE, in normalized units, for every grid value.

    Weights are fitted on the fitting segment only, but the error is scored
    over the held-out donors' whole trajectory, post-period included. With
    fewer fitting visits than training donors the unregularized fit
    interpolates the fitting segment exactly, so a fitting-segment score would
    always pick the smallest grid value.
    """
    donors = np.asarray(donors, dtype=float)
    if donors.shape[0] < config.MIN_SI_DONORS:
        raise InsufficientDonorsError(
            f"SI tuning needs at least {config.MIN_SI_DONORS} donors, got {donors.shape[0]}")
    pre_end = params.fitting_end(donors.shape[1])
    train_idx, val_idx = split_donors(donors.shape[0], params.r_train_val, rng)
    errors = []
    for regularization in params.ridge_grid:
        model = SyntheticIntervention(donors[train_idx], regularization, pre_end)
        predicted, _ = model.predict(donors[val_idx])
        errors.append(float(mean_squared_error(model.scaler.transform(donors[val_idx]),
                                               model.scaler.transform(predicted))))
    return errors


def tune_si_hyperparams(donors, params, rng):
    errors = validation_errors(donors, params, rng)
    best_error = min(errors)
    tolerance = 1e-12 * max(best_error, 1.0)
    # ties go to the stronger regularization
    tied = [g for g, e in zip(params.ridge_grid, errors) if e - best_error <= tolerance]
    choice = max(tied)
    logger.debug("SI regularization %s chosen (validation mse %.3g)", choice, best_error)
    return choice
