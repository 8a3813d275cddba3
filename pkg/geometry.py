"""
Geometry
Ray points, the matrix A, the minors c_ij, the hyperplane maps f^ij and
the symmetry points of the two-dimensional slices of the ellipse gamma = 0
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
import scipy.linalg

import matrix_kernel as mk
from config_manager import DEFAULT_TOLERANCES, Tolerances
from exceptions import DegeneratePair, EmptySlice, IndexOutOfRange, SingularMatrix, SingularR
from srbm_model import SrbmData, check_index, gamma


@dataclass(frozen=True, eq=False)
class GeometryBundle:
    """Column k of a_matrix is the ray point theta^(k,r) = delta_k B^(k)"""
    b_matrix: np.ndarray
    delta: np.ndarray
    a_matrix: np.ndarray
    c: np.ndarray
    tau: np.ndarray

    @property
    def d(self) -> int:
        return self.delta.shape[0]

    @property
    def theta_ray(self) -> np.ndarray:
        """Row k is theta^(k,r)"""
        return self.a_matrix.T

    def ray(self, k: int) -> np.ndarray:
        return self.a_matrix[:, k]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta": self.delta.tolist(),
            "tau": self.tau.tolist(),
            "rays": self.theta_ray.tolist(),
            "a_matrix": self.a_matrix.tolist(),
            "c": self.c.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PairGeometry:
    i: int
    j: int
    a_ij: np.ndarray
    c_ij: float
    sym_i: np.ndarray
    sym_j: np.ndarray
    tangent_i: bool
    tangent_j: bool
    z_j_star: float
    z_i_star: float

    @property
    def pair_gap(self) -> float:
        return float(np.max(np.abs(self.sym_i - self.sym_j)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair": [self.i + 1, self.j + 1],
            "a_ij": self.a_ij.tolist(),
            "c_ij": self.c_ij,
            "sym_i": self.sym_i.tolist(),
            "sym_j": self.sym_j.tolist(),
            "tangent_i": self.tangent_i,
            "tangent_j": self.tangent_j,
            "z_j_star": self.z_j_star,
            "z_i_star": self.z_i_star,
        }


def compute_rays(data: SrbmData, tol: Tolerances = DEFAULT_TOLERANCES) -> GeometryBundle:
    """Ray points theta^(i,r) = Delta_i B^(i) with B = (R^{-1})^T.

    Delta_i = -2 <mu, B^(i)> / <B^(i), Sigma B^(i)>.
    """
    try:
        r_inv = mk.invert(data.r, tol.singular)
    except SingularMatrix as e:
        raise SingularR(str(e))
    b = r_inv.T
    delta = -2.0 * (data.mu @ b) / np.einsum("ki,kl,li->i", b, data.sigma, b)
    a = b * delta

    d = data.d
    c = np.empty((d, d))
    for i in range(d):
        c[i, i] = a[i, i]
        for j in range(i + 1, d):
            c[i, j] = c[j, i] = a[i, i] * a[j, j] - a[i, j] * a[j, i]

    for k in range(d):
        if abs(gamma(data, a[:, k])) > tol.membership * _gamma_scale(data, a[:, k]):
            logging.warning(f"Ray point {k + 1} is off the ellipse by {gamma(data, a[:, k]):.3e}")
    logging.debug(f"Rays computed: tau = {np.diag(a).tolist()}")

    for arr in (b, delta, a, c):
        arr.setflags(write=False)
    return GeometryBundle(b_matrix=b, delta=delta, a_matrix=a, c=c, tau=np.diag(a).copy())


def _gamma_scale(data: SrbmData, theta: np.ndarray) -> float:
    norm = float(np.max(np.abs(theta))) if theta.size else 0.0
    return max(1.0, float(np.max(np.abs(data.sigma))) * norm ** 2 + float(np.max(np.abs(data.mu))) * norm)


def pair_matrix(bundle: GeometryBundle, i: int, j: int) -> np.ndarray:
    """A^ij: the (i, j) coordinates of theta^(i,r) and theta^(j,r) as columns"""
    idx = [i, j]
    return bundle.a_matrix[np.ix_(idx, idx)].copy()


def tau_scale(bundle: GeometryBundle) -> float:
    """||tau||_inf, or 1 when tau vanishes; bands on ray coordinates are relative to it"""
    scale = float(np.max(np.abs(bundle.tau))) if bundle.tau.size else 0.0
    return scale if np.isfinite(scale) and scale > 0.0 else 1.0


def is_degenerate(bundle: GeometryBundle, i: int, j: int,
                  tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """|c_ij| <= tol * |theta^(i,r)| |theta^(j,r)|, a bound homogeneous in the rays.

    The full rays are used rather than the columns of A^ij, which may
    vanish up to roundoff.
    """
    bound = float(np.linalg.norm(bundle.ray(i)) * np.linalg.norm(bundle.ray(j)))
    return abs(bundle.c[i, j]) <= tol.degenerate * bound


def check_pair(bundle: GeometryBundle, i: int, j: int, tol: Tolerances):
    if i == j or not (0 <= i < bundle.d and 0 <= j < bundle.d):
        raise IndexOutOfRange(f"pair ({i}, {j}) is not two distinct indices in 0..{bundle.d - 1}")
    if is_degenerate(bundle, i, j, tol):
        raise DegeneratePair(f"c_{i + 1}{j + 1} = {bundle.c[i, j]:.3e} vanishes")


def map_f_ij(bundle: GeometryBundle, i: int, j: int, z,
             tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """f^ij(z) = a theta^(i,r) + b theta^(j,r) with (a, b) = (A^ij)^{-1} z.

    The result has coordinates z_i, z_j at positions i, j and lies on
    every face hyperplane gamma_k = 0, k not in {i, j}. z may be batched
    with shape (..., 2).
    """
    check_pair(bundle, i, j, tol)
    a = bundle.a_matrix
    c = bundle.c[i, j]
    z = np.asarray(z, dtype=float)
    zi, zj = z[..., 0], z[..., 1]
    coef_i = np.asarray((a[j, j] * zi - a[i, j] * zj) / c)
    coef_j = np.asarray((-a[j, i] * zi + a[i, i] * zj) / c)
    return coef_i[..., None] * a[:, i] + coef_j[..., None] * a[:, j]


def slice_form(data: SrbmData, bundle: GeometryBundle, i: int, j: int,
               tol: Tolerances = DEFAULT_TOLERANCES) -> Tuple[np.ndarray, np.ndarray]:
    """Quadratic of gamma restricted to the (i, j) slice, in (z_i, z_j) coordinates.

    With G = [theta^(i,r), theta^(j,r)] (A^ij)^{-1}, gamma(f^ij(z)) =
    -1/2 z^T (G^T Sigma G) z - (G^T mu)^T z.
    """
    check_pair(bundle, i, j, tol)
    g = np.column_stack([bundle.ray(i), bundle.ray(j)]) @ np.linalg.inv(pair_matrix(bundle, i, j))
    sigma_t = g.T @ data.sigma @ g
    return 0.5 * (sigma_t + sigma_t.T), g.T @ data.mu


def ray_in_pair(bundle: GeometryBundle, i: int, j: int, k: int) -> np.ndarray:
    """(i, j) coordinates of theta^(k,r)"""
    return np.array([bundle.a_matrix[i, k], bundle.a_matrix[j, k]])


def symmetry_point(data: SrbmData, bundle: GeometryBundle, i: int, j: int,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> PairGeometry:
    """Symmetry points of the (i, j) slice.

    On the line z_i = tau_i the slice quadratic has the ray coordinate
    theta^(i,r)_j as one root; the other follows from the sum of roots.
    When the two roots coincide within tolerance the line is tangent and
    the symmetry point is the ray point itself.
    """
    check_index(data, i, j)
    sigma_t, mu_t = slice_form(data, bundle, i, j, tol)
    a = bundle.a_matrix
    tau_i, tau_j = a[i, i], a[j, j]
    band = tol.tangency * tau_scale(bundle)

    z_j_star = -2.0 * (sigma_t[0, 1] * tau_i + mu_t[1]) / sigma_t[1, 1] - a[j, i]
    tangent_i = abs(z_j_star - a[j, i]) <= band
    if tangent_i:
        sym_i = a[:, i].copy()
    else:
        sym_i = map_f_ij(bundle, i, j, [tau_i, z_j_star], tol)

    z_i_star = -2.0 * (sigma_t[0, 1] * tau_j + mu_t[0]) / sigma_t[0, 0] - a[i, j]
    tangent_j = abs(z_i_star - a[i, j]) <= band
    if tangent_j:
        sym_j = a[:, j].copy()
    else:
        sym_j = map_f_ij(bundle, i, j, [z_i_star, tau_j], tol)

    return PairGeometry(
        i=i, j=j,
        a_ij=pair_matrix(bundle, i, j),
        c_ij=float(bundle.c[i, j]),
        sym_i=sym_i, sym_j=sym_j,
        tangent_i=bool(tangent_i), tangent_j=bool(tangent_j),
        z_j_star=float(z_j_star), z_i_star=float(z_i_star),
    )


def slice_roots(data: SrbmData, bundle: GeometryBundle, i: int, j: int,
                tol: Tolerances = DEFAULT_TOLERANCES) -> Tuple[float, float]:
    """Both roots in z_j of gamma(f^ij(tau_i, z_j)) = 0"""
    pair = symmetry_point(data, bundle, i, j, tol)
    return float(bundle.a_matrix[j, i]), pair.z_j_star


def sample_ellipse_slice(data: SrbmData, bundle: GeometryBundle, i: int, j: int, n: int,
                         tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """n points of the slice ellipse in (z_i, z_j) coordinates, counterclockwise.

    The ellipse is (z - c)^T S (z - c) = rho with c = -S^{-1} mu~ and
    rho = c^T S c. Points are z = c + sqrt(rho) L^{-T} (cos phi, sin phi)
    with S = L L^T; the angles start at the origin, so the first sample is
    (0, 0).
    """
    if n < 8:
        raise ValueError(f"at least 8 samples are required, got {n}")
    sigma_t, mu_t = slice_form(data, bundle, i, j, tol)
    try:
        chol = scipy.linalg.cholesky(sigma_t, lower=True)
    except scipy.linalg.LinAlgError:
        raise EmptySlice("slice quadratic is not positive definite")
    center = -scipy.linalg.cho_solve((chol, True), mu_t)
    rho = float(center @ sigma_t @ center)
    if rho <= tol.pivot * float(np.max(np.abs(sigma_t))) * float(np.max(np.abs(center))) ** 2:
        raise EmptySlice("slice ellipse collapses to a point")

    radius = np.sqrt(rho)
    origin = chol.T @ (-center) / radius
    phi0 = np.arctan2(origin[1], origin[0])
    phi = phi0 + 2.0 * np.pi * np.arange(n) / n
    unit = np.stack([np.cos(phi), np.sin(phi)])
    # L^{-T} has positive determinant so orientation is kept
    offsets = scipy.linalg.solve_triangular(chol.T, unit, lower=False)
    return (center[:, None] + radius * offsets).T
