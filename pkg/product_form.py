"""
Product Form
Skew symmetry and symmetry-point decisions, the exponential rates alpha,
and the product-form densities and moment generating functions
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import geometry as geo
import matrix_kernel as mk
from config_manager import DEFAULT_TOLERANCES, Tolerances
from exceptions import (DomainError, IndexOutOfRange, NotProductForm, SingularMatrix,
                        SingularR, ZeroDiagonalR)
from srbm_model import SrbmData, gamma, gamma_i


class FailureReason(Enum):
    NOT_P_MATRIX = "not-P-matrix"
    SYMMETRY_MISMATCH = "symmetry-mismatch"
    DEGENERATE_PAIR = "degenerate-pair"
    TAU_OFF_ELLIPSE = "tau-off-ellipse"
    RAY_AT_TAU = "ray-at-tau"


@dataclass(frozen=True)
class FailingPair:
    i: int
    j: int
    reason: FailureReason
    gamma_at_tau: Optional[float] = None
    gap: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair": [self.i + 1, self.j + 1],
            "reason": self.reason.value,
            "gamma_at_tau": self.gamma_at_tau,
            "gap": self.gap,
        }


@dataclass(frozen=True, eq=False)
class ProductFormReport:
    skew_ok: bool
    skew_residual: float
    geometric_ok: bool
    failing_pairs: List[FailingPair]
    ellipse_ok: bool
    ellipse_failures: List[FailingPair]
    alpha: Optional[np.ndarray]
    c_consts: Optional[np.ndarray]
    characterization_residual: Optional[float]
    tolerance: float
    pairs: List[geo.PairGeometry] = field(default_factory=list)

    @property
    def agree(self) -> bool:
        return self.skew_ok == self.geometric_ok

    @property
    def ellipse_agree(self) -> bool:
        return self.ellipse_ok == self.geometric_ok

    @property
    def product_form(self) -> bool:
        return self.skew_ok and self.geometric_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "product_form": self.product_form,
            "skew_ok": self.skew_ok,
            "skew_residual": self.skew_residual,
            "geometric_ok": self.geometric_ok,
            "failing_pairs": [p.to_dict() for p in self.failing_pairs],
            "ellipse_ok": self.ellipse_ok,
            "ellipse_failures": [p.to_dict() for p in self.ellipse_failures],
            "agree": self.agree,
            "ellipse_agree": self.ellipse_agree,
            "alpha": None if self.alpha is None else self.alpha.tolist(),
            "c_consts": None if self.c_consts is None else self.c_consts.tolist(),
            "characterization_residual": self.characterization_residual,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True, eq=False)
class ExpProductLaw:
    """Product of exponentials with rates alpha; boundary_scale_i = C_i alpha_i"""
    alpha: np.ndarray
    c_consts: np.ndarray

    @property
    def boundary_scale(self) -> np.ndarray:
        return self.c_consts * self.alpha

    @property
    def d(self) -> int:
        return self.alpha.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha.tolist(),
            "c_consts": self.c_consts.tolist(),
            "boundary_scale": self.boundary_scale.tolist(),
        }


def _check_diagonal(data: SrbmData):
    if np.any(np.diag(data.r) == 0.0):
        raise ZeroDiagonalR("R has a zero diagonal entry")


def check_skew_symmetry(data: SrbmData, tol: Tolerances = DEFAULT_TOLERANCES) -> Tuple[bool, float]:
    """2 Sigma = R D_R^{-1} D_Sigma + D_Sigma D_R^{-1} R^T, up to tol * ||Sigma||_inf"""
    _check_diagonal(data)
    weights = np.diag(data.sigma) / np.diag(data.r)
    rhs = data.r * weights + (data.r * weights).T
    residual = float(np.linalg.norm(2.0 * data.sigma - rhs, ord=np.inf))
    return residual <= tol.verdict * float(np.linalg.norm(data.sigma, ord=np.inf)), residual


def alpha_formula(data: SrbmData, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """alpha = -2 D_Sigma^{-1} D_R R^{-1} mu"""
    try:
        r_inv_mu = mk.invert(data.r, tol.singular) @ data.mu
    except SingularMatrix as e:
        raise SingularR(str(e))
    return -2.0 * np.diag(data.r) / np.diag(data.sigma) * r_inv_mu


def c_constants(data: SrbmData) -> np.ndarray:
    """C_i = Sigma_ii / (2 R_ii)"""
    _check_diagonal(data)
    return np.diag(data.sigma) / (2.0 * np.diag(data.r))


def characterization_residual(data: SrbmData, alpha) -> float:
    """Largest coefficient gap between gamma(theta) and sum_i C_i gamma_i(theta)(alpha_i - theta_i).

    Both sides are quadratic polynomials without constant term. Linear
    coefficients: -mu against R diag(C) alpha. Quadratic: the symmetric
    matrices -Sigma/2 and -(R C + C R^T)/2; a cross term theta_k theta_l
    carries twice the off-diagonal entry.
    """
    _check_diagonal(data)
    alpha = np.asarray(alpha, dtype=float)
    cc = np.diag(c_constants(data))
    linear_gap = np.abs(-data.mu - data.r @ cc @ alpha)
    quad_gap = np.abs(-0.5 * data.sigma + 0.5 * (data.r @ cc + cc @ data.r.T))
    quad_gap = quad_gap * (2.0 - np.eye(data.d))
    return float(max(linear_gap.max(), quad_gap.max()))


def check_geometric(data: SrbmData, bundle: Optional[geo.GeometryBundle],
                    tol: Tolerances = DEFAULT_TOLERANCES,
                    is_p: Optional[bool] = None) -> Tuple[bool, List[FailingPair]]:
    """Product form iff R is a P-matrix and both symmetry points of every pair coincide.

    The P-matrix test runs first; when it fails every pair is listed with
    reason not-P-matrix and no pair geometry is computed.
    """
    ok, failures, _ = _geometric_pairs(data, bundle, tol, is_p)
    return ok, failures


def _pairs(d: int):
    for i in range(d):
        for j in range(i + 1, d):
            yield i, j


def _geometric_pairs(data, bundle, tol, is_p):
    if is_p is None:
        is_p = mk.is_p_matrix(data.r, tol.minor)[0]
    if not is_p or bundle is None:
        return False, [FailingPair(i, j, FailureReason.NOT_P_MATRIX) for i, j in _pairs(data.d)], []

    failures, pairs = [], []
    band = tol.symmetry * geo.tau_scale(bundle)
    for i, j in _pairs(data.d):
        if geo.is_degenerate(bundle, i, j, tol):
            failures.append(FailingPair(i, j, FailureReason.DEGENERATE_PAIR))
            continue
        pair = geo.symmetry_point(data, bundle, i, j, tol)
        pairs.append(pair)
        if pair.pair_gap > band:
            tau_image = geo.map_f_ij(bundle, i, j, [bundle.tau[i], bundle.tau[j]], tol)
            failures.append(FailingPair(i, j, FailureReason.SYMMETRY_MISMATCH,
                                        gamma_at_tau=gamma(data, tau_image), gap=pair.pair_gap))
    return not failures, failures, pairs


def check_tau_on_ellipse(data: SrbmData, bundle: Optional[geo.GeometryBundle],
                    tol: Tolerances = DEFAULT_TOLERANCES,
                    is_p: Optional[bool] = None) -> Tuple[bool, List[FailingPair]]:
    """Pairwise form: A^ij a P-matrix, gamma(f^ij(tau^ij)) = 0, and no ray point at tau.

    theta^(i,r)_j must differ from tau_j unless the ray point is tangent,
    and symmetrically for j. gamma is compared with
    tol * max(1, ||Sigma|| ||tau||^2 + ||mu|| ||tau||).
    """
    if is_p is None:
        is_p = mk.is_p_matrix(data.r, tol.minor)[0]
    if not is_p or bundle is None:
        return False, [FailingPair(i, j, FailureReason.NOT_P_MATRIX) for i, j in _pairs(data.d)]

    tau_norm = float(np.max(np.abs(bundle.tau)))
    gamma_band = tol.verdict * max(
        1.0, float(np.max(np.abs(data.sigma))) * tau_norm ** 2 + float(np.max(np.abs(data.mu))) * tau_norm)
    band = tol.symmetry * geo.tau_scale(bundle)
    a = bundle.a_matrix

    failures = []
    for i, j in _pairs(data.d):
        a_ij = geo.pair_matrix(bundle, i, j)
        if geo.is_degenerate(bundle, i, j, tol):
            failures.append(FailingPair(i, j, FailureReason.DEGENERATE_PAIR))
            continue
        if not (a_ij[0, 0] > 0 and a_ij[1, 1] > 0 and bundle.c[i, j] > 0):
            failures.append(FailingPair(i, j, FailureReason.NOT_P_MATRIX))
            continue
        value = gamma(data, geo.map_f_ij(bundle, i, j, [bundle.tau[i], bundle.tau[j]], tol))
        if abs(value) > gamma_band:
            failures.append(FailingPair(i, j, FailureReason.TAU_OFF_ELLIPSE, gamma_at_tau=value))
            continue
        pair = geo.symmetry_point(data, bundle, i, j, tol)
        if (not pair.tangent_i and abs(a[j, i] - bundle.tau[j]) <= band) or \
                (not pair.tangent_j and abs(a[i, j] - bundle.tau[i]) <= band):
            failures.append(FailingPair(i, j, FailureReason.RAY_AT_TAU, gamma_at_tau=value))
    return not failures, failures


def diagnose_product_form(data: SrbmData, bundle: Optional[geo.GeometryBundle] = None,
                          tol: Tolerances = DEFAULT_TOLERANCES,
                          is_p: Optional[bool] = None) -> ProductFormReport:
    """Run both decision procedures and the tau-on-ellipse form on one instance"""
    try:
        skew_ok, skew_residual = check_skew_symmetry(data, tol)
    except ZeroDiagonalR:
        logging.warning("R has a zero diagonal entry; skew symmetry is undefined")
        skew_ok, skew_residual = False, float("inf")

    if is_p is None:
        is_p = mk.is_p_matrix(data.r, tol.minor)[0]
    if bundle is None and is_p:
        try:
            bundle = geo.compute_rays(data, tol)
        except SingularR:
            bundle = None

    geometric_ok, failing_pairs, pairs = _geometric_pairs(data, bundle, tol, is_p)
    ellipse_ok, ellipse_failures = check_tau_on_ellipse(data, bundle, tol, is_p)

    alpha = c_consts = residual = None
    try:
        formula = alpha_formula(data, tol)
        residual = characterization_residual(data, formula)
        if skew_ok:
            alpha, c_consts = formula, c_constants(data)
    except (SingularR, ZeroDiagonalR):
        pass

    if skew_ok != geometric_ok:
        logging.warning(
            f"Skew symmetry ({skew_ok}) and symmetry points ({geometric_ok}) disagree")
    if ellipse_ok != geometric_ok:
        logging.warning(
            f"Tau-on-ellipse form ({ellipse_ok}) and symmetry points ({geometric_ok}) disagree")
    logging.debug(f"Product form: skew={skew_ok} (residual {skew_residual:.3e}), "
                  f"geometric={geometric_ok}, ellipse={ellipse_ok}")

    return ProductFormReport(
        skew_ok=skew_ok,
        skew_residual=skew_residual,
        geometric_ok=geometric_ok,
        failing_pairs=failing_pairs,
        ellipse_ok=ellipse_ok,
        ellipse_failures=ellipse_failures,
        alpha=alpha,
        c_consts=c_consts,
        characterization_residual=residual,
        tolerance=tol.verdict,
        pairs=pairs,
    )


def product_form_law(data: SrbmData, tol: Tolerances = DEFAULT_TOLERANCES) -> ExpProductLaw:
    """Exponential product law from alpha_formula; alpha must be positive"""
    alpha = alpha_formula(data, tol)
    if np.any(alpha <= 0):
        raise NotProductForm(f"alpha is not positive: {alpha.tolist()}")
    return ExpProductLaw(alpha=alpha, c_consts=c_constants(data))


def _check_domain(law: ExpProductLaw, theta: np.ndarray, skip: Optional[int] = None):
    mask = theta >= law.alpha
    if skip is not None:
        mask[..., skip] = False
    if np.any(mask):
        raise DomainError("moment generating function needs theta < alpha")


def stationary_mgf(law: ExpProductLaw, theta) -> Any:
    """phi(theta) = prod alpha_i / (alpha_i - theta_i)"""
    theta = np.asarray(theta, dtype=float)
    _check_domain(law, theta)
    value = np.prod(law.alpha / (law.alpha - theta), axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def boundary_mgf(law: ExpProductLaw, i: int, theta) -> Any:
    """phi_i(theta) = C_i alpha_i prod_{k != i} alpha_k / (alpha_k - theta_k)"""
    if not 0 <= i < law.d:
        raise IndexOutOfRange(f"index {i} outside 0..{law.d - 1}")
    theta = np.array(theta, dtype=float)
    _check_domain(law, theta, skip=i)
    factors = law.alpha / (law.alpha - theta)
    factors[..., i] = 1.0
    value = law.c_consts[i] * law.alpha[i] * np.prod(factors, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def bar_residual(data: SrbmData, law: ExpProductLaw, theta) -> Any:
    """gamma(theta) phi(theta) - sum_i gamma_i(theta) phi_i(theta)"""
    total = gamma(data, theta) * stationary_mgf(law, theta)
    for i in range(data.d):
        total = total - gamma_i(data, i, theta) * boundary_mgf(law, i, theta)
    return total


def stationary_density(law: ExpProductLaw, y) -> Any:
    """prod alpha_i exp(-alpha_i y_i) on the orthant"""
    y = np.asarray(y, dtype=float)
    value = np.prod(law.alpha * np.exp(-law.alpha * y), axis=-1)
    value = np.where(np.all(y >= 0, axis=-1), value, 0.0)
    return float(value) if np.ndim(value) == 0 else value


def boundary_density(law: ExpProductLaw, i: int, y) -> Any:
    """Density of the boundary measure on the face y_i = 0.

    C_i alpha_i prod_{k != i} alpha_k exp(-alpha_k y_k); its transform is
    boundary_mgf and its total mass is C_i alpha_i. The i-th coordinate of
    y is ignored.
    """
    if not 0 <= i < law.d:
        raise IndexOutOfRange(f"index {i} outside 0..{law.d - 1}")
    y = np.array(y, dtype=float)
    y[..., i] = 0.0
    factors = law.alpha * np.exp(-law.alpha * y)
    factors[..., i] = 1.0
    value = law.c_consts[i] * law.alpha[i] * np.prod(factors, axis=-1)
    value = np.where(np.all(y >= 0, axis=-1), value, 0.0)
    return float(value) if np.ndim(value) == 0 else value
