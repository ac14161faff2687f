"""Scikit-learn style front end for the inference pipeline.

``LassoInference`` behaves like an estimator: construct with configuration,
``fit(X, y)`` runs the lasso and the selection-adjusted inference, fitted
attributes carry the results, ``predict`` uses the lasso coefficients.
Penalties are on the per-observation scale here (the scale cross-validation
works on and the scale quoted throughout the docs); the solver's sum-scale
value is ``lam * n``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .cv import cv_lambda
from .inference import AnalyzeOptions, SigmaSpec, analyze_with_fit
from .validation import ValidationError, check_pair


class LassoInference(BaseEstimator, RegressorMixin):
    """Lasso selection plus truncated-Z inference for the selected variables.

    Parameters
    ----------
    lam : float or "cv"
        Per-observation penalty; "cv" picks it by seeded 10-fold
        cross-validation on the training data.
    methods : sequence of str
        Any of naive, bonferroni, tz_v, tz_m, tz_ms, tz_stab_t, tz_stab_l1.
    target : str
        "auto" (full when n > p, else partial), "full", or "partial";
        stabilized methods always use their own targets.
    alpha : float
        Miscoverage level; intervals are (1 - alpha).
    sigma : float or "ols" or "reid"
        Known noise standard deviation, the full-model OLS estimate, or the
        cross-validated-lasso plug-in estimate.
    cutoff : float, optional
        High-value t threshold for tz_stab_t; defaults to
        ``Phi^{-1}(1 - alpha / (2 p))``.
    lambda_high : float, optional
        Per-observation stabilization penalty for tz_stab_l1; defaults to
        the universal threshold (or 1.25x lam when lam is already there).
    fit_intercept : bool
        Center X and y before solving; the intercept is exact.
    random_state : int
        Seeds cross-validation folds and the Reid estimate.

    Attributes
    ----------
    coef_, intercept_ : lasso solution on the original scale.
    active_set_, signs_ : the selection event.
    lambda_ : the per-observation penalty actually used.
    sigma_ : the noise scale actually used.
    results_ : list of per-variable, per-method ``InferenceResult`` rows.
    """

    def __init__(
        self,
        lam="cv",
        methods=("tz_v",),
        target="auto",
        alpha=0.1,
        sigma="reid",
        cutoff=None,
        lambda_high=None,
        fit_intercept=True,
        random_state=0,
    ):
        self.lam = lam
        self.methods = methods
        self.target = target
        self.alpha = alpha
        self.sigma = sigma
        self.cutoff = cutoff
        self.lambda_high = lambda_high
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    def fit(self, X, y, names=None):
        X, y = check_pair(X, y)
        n, p = X.shape

        if self.lam == "cv":
            rng = np.random.default_rng(self.random_state)
            lam_obs = cv_lambda(
                X, y, rng, include_intercept=self.fit_intercept
            )
        elif isinstance(self.lam, (int, float)) and self.lam >= 0:
            lam_obs = float(self.lam)
        else:
            raise ValidationError("lam must be a nonnegative number or 'cv'")

        if isinstance(self.sigma, (int, float)):
            sigma_spec = SigmaSpec("known", float(self.sigma))
        elif self.sigma in ("ols", "ols_full"):
            sigma_spec = SigmaSpec("ols_full")
        elif self.sigma == "reid":
            sigma_spec = SigmaSpec("reid")
        else:
            raise ValidationError("sigma must be a number, 'ols' or 'reid'")

        options = AnalyzeOptions(
            include_intercept=self.fit_intercept,
            cutoff=self.cutoff,
            lambda_high=(
                None if self.lambda_high is None else float(self.lambda_high) * n
            ),
            seed=self.random_state,
        )
        fit, sigma_val, results = analyze_with_fit(
            X,
            y,
            lam_obs * n,
            methods=tuple(self.methods),
            target_kind=self.target,
            sigma=sigma_spec,
            alpha=self.alpha,
            options=options,
            names=names,
        )

        self.n_features_in_ = p
        self.coef_ = fit.coefficients
        if fit.intercept is not None:
            self.intercept_ = fit.intercept
        elif self.fit_intercept:
            # the engine solves on centered data; recover the exact intercept
            self.intercept_ = float(y.mean() - X.mean(axis=0) @ fit.coefficients)
        else:
            self.intercept_ = 0.0
        self.active_set_ = fit.active_set
        self.signs_ = fit.signs
        self.lambda_ = lam_obs
        self.sigma_ = sigma_val
        self.results_ = results
        return self

    def predict(self, X):
        if not hasattr(self, "coef_"):
            raise ValidationError("estimator is not fitted; call fit first")
        X = np.asarray(X, dtype=float)
        return X @ self.coef_ + self.intercept_

    def summary(self) -> list[dict]:
        """Flat result rows (one dict per selected variable and method)."""
        if not hasattr(self, "results_"):
            raise ValidationError("estimator is not fitted; call fit first")
        rows = []
        for r in self.results_:
            iv = r.interval
            rows.append(
                {
                    "variable": r.variable,
                    "name": r.name,
                    "method": r.method,
                    "target": r.target.kind if r.target else None,
                    "context": list(r.target.context) if r.target else None,
                    "high_value": r.target.high_value if r.target else None,
                    "z_obs": r.z_obs,
                    "sigma_eta": r.sigma_eta,
                    "estimate": r.point_estimate,
                    "lower": iv.lower if iv else None,
                    "upper": iv.upper if iv else None,
                    "level": iv.level if iv else None,
                    "p_value": r.p_value,
                    "truncation": str(r.truncation) if r.truncation else None,
                    "flags": list(r.flags),
                }
            )
        return rows
