"""
SRBM Model
The data triple (Sigma, mu, R), its validation, and the polynomials gamma and gamma_i
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

import matrix_kernel as mk
from config_manager import DEFAULT_TOLERANCES, Tolerances
from exceptions import (IndexOutOfRange, InstanceError, InvalidMatrix, InvalidSigma,
                        NotSymmetric, SingularMatrix)


@dataclass(frozen=True, eq=False)
class SrbmData:
    """Covariance sigma, drift mu and reflection matrix r of a d-dimensional SRBM.

    sigma is symmetrized on construction; an asymmetry above
    1e-8 * max(1, ||sigma||_inf) is rejected.
    """
    sigma: np.ndarray
    mu: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        sigma = mk.as_square_matrix(self.sigma, "sigma")
        r = mk.as_square_matrix(self.r, "R")
        try:
            mu = np.array(self.mu, dtype=float).reshape(-1)
        except (TypeError, ValueError) as e:
            raise InvalidMatrix(f"mu is not numeric: {e}")
        d = sigma.shape[0]
        if r.shape[0] != d or mu.shape[0] != d:
            raise InvalidMatrix(
                f"inconsistent dimensions: sigma {sigma.shape}, mu {mu.shape}, R {r.shape}")
        if not np.all(np.isfinite(mu)):
            raise InvalidMatrix("mu has non-finite entries")

        asymmetry = float(np.max(np.abs(sigma - sigma.T)))
        if asymmetry > 1e-8 * mk.matrix_scale(sigma):
            raise NotSymmetric(f"sigma is not symmetric (max asymmetry {asymmetry:.3e})")
        sigma = 0.5 * (sigma + sigma.T)

        for arr in (sigma, mu, r):
            arr.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "r", r)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {"sigma": self.sigma.tolist(), "mu": self.mu.tolist(), "r": self.r.tolist()}

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "SrbmData":
        try:
            return cls(doc["sigma"], doc["mu"], doc["r"])
        except KeyError as e:
            raise InstanceError(f"instance is missing field {e}")


@dataclass(frozen=True, eq=False)
class ValidationReport:
    exists: bool
    stable_necessary: bool
    nonsingular: bool
    marginal: bool
    b: Optional[np.ndarray]
    r_inv_mu: Optional[np.ndarray]
    classification: mk.ClassificationReport
    sigma_positive_definite: bool = True

    @property
    def is_valid(self) -> bool:
        """Existence plus the necessary stability condition"""
        return self.exists and self.stable_necessary

    def to_dict(self) -> Dict[str, Any]:
        return {
            "exists": self.exists,
            "stable_necessary": self.stable_necessary,
            "nonsingular": self.nonsingular,
            "marginal": self.marginal,
            "b": None if self.b is None else self.b.tolist(),
            "r_inv_mu": None if self.r_inv_mu is None else self.r_inv_mu.tolist(),
            "sigma_positive_definite": self.sigma_positive_definite,
            "classification": self.classification.to_dict(),
        }


def validate(data: SrbmData, tol: Tolerances = DEFAULT_TOLERANCES,
             skip_lp: bool = False) -> ValidationReport:
    """Compute existence and stability flags for an SRBM instance.

    Raises InvalidSigma when sigma is not positive definite. b = -R^{-1} mu
    is reported only when R is nonsingular.
    """
    if not mk.is_positive_definite(data.sigma, tol.pivot):
        raise InvalidSigma("sigma is not positive definite")

    classification = mk.classify(data.r, tol.minor, tol.s_matrix, tol.pivot, skip_lp=skip_lp)

    try:
        r_inv = mk.invert(data.r, tol.singular)
    except SingularMatrix:
        logging.warning("R is singular; the stability condition cannot hold")
        return ValidationReport(
            exists=classification.is_completely_s, stable_necessary=False,
            nonsingular=False, marginal=False, b=None, r_inv_mu=None,
            classification=classification)

    r_inv_mu = r_inv @ data.mu
    stable = bool(np.all(r_inv_mu < -tol.stability))
    band = tol.marginal_band * max(1.0, float(np.max(np.abs(r_inv_mu))))
    marginal = bool(np.any(np.abs(r_inv_mu) <= band))
    if marginal:
        logging.warning(f"Stability is marginal: R^-1 mu = {r_inv_mu.tolist()}")
    if not classification.is_completely_s:
        logging.warning("R is not completely-S; no SRBM exists for this data")

    return ValidationReport(
        exists=classification.is_completely_s,
        stable_necessary=stable,
        nonsingular=True,
        marginal=marginal,
        b=-r_inv_mu,
        r_inv_mu=r_inv_mu,
        classification=classification,
    )


def gamma(data: SrbmData, theta) -> Any:
    """gamma(theta) = -1/2 <theta, Sigma theta> - <mu, theta>.

    theta may carry leading batch dimensions; the last axis is the coordinate.
    """
    th = np.asarray(theta, dtype=float)
    quad = np.einsum("...i,ij,...j->...", th, data.sigma, th)
    value = -0.5 * quad - th @ data.mu
    return float(value) if np.ndim(value) == 0 else value


def gamma_i(data: SrbmData, i: int, theta) -> Any:
    """gamma_i(theta) = <R^(i), theta> for the 0-based column index i"""
    if not 0 <= i < data.d:
        raise IndexOutOfRange(f"index {i} outside 0..{data.d - 1}")
    value = np.asarray(theta, dtype=float) @ data.r[:, i]
    return float(value) if np.ndim(value) == 0 else value


def check_index(data: SrbmData, *indices: int):
    for i in indices:
        if not 0 <= i < data.d:
            raise IndexOutOfRange(f"index {i} outside 0..{data.d - 1}")
