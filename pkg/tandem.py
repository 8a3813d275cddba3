"""
Tandem Queues
SRBM data of a d-station tandem queue in heavy traffic, together with the
closed forms of its rays, symmetry points, pair data, entrance velocities
and the three-segment path conjectured for the variational problem
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import geometry as geo
import matrix_kernel as mk
import projection as pj
from config_manager import DEFAULT_TOLERANCES, Tolerances
from exceptions import (DomainError, IndexOutOfRange, InfeasiblePath, InstanceError,
                        InvalidSpec, NotProductForm)
from srbm_model import SrbmData

PATH_STATUS = "conjecture (not proven optimal)"


@dataclass(frozen=True, eq=False)
class TandemSpec:
    """Arrival rate beta_0, service rates beta_1..beta_d and the squared
    coefficients of variation c_0..c_d of interarrival and service times"""
    beta: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        try:
            beta = np.array(self.beta, dtype=float)
            c = np.array(self.c, dtype=float)
        except (TypeError, ValueError) as e:
            raise InvalidSpec(f"beta and c must be numeric vectors: {e}") from e
        if beta.ndim != 1 or c.ndim != 1:
            raise InvalidSpec("beta and c must be vectors")
        if beta.shape != c.shape:
            raise InvalidSpec(f"beta has {beta.size} entries but c has {c.size}")
        if beta.size < 2:
            raise InvalidSpec("a tandem needs at least one station")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(c))):
            raise InvalidSpec("beta and c must be finite")
        if np.any(beta[1:] <= beta[0]):
            raise InvalidSpec("every service rate must exceed the arrival rate beta_0")
        if np.any(c < 0):
            raise InvalidSpec("squared coefficients of variation must be nonnegative")
        if not np.any(c > 0):
            raise InvalidSpec("at least one squared coefficient of variation must be positive")
        beta.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "c", c)

    @property
    def d(self) -> int:
        return self.beta.size - 1

    @property
    def b(self) -> np.ndarray:
        """b_i = beta_i - beta_0, which equals -R^{-1} mu"""
        return self.beta[1:] - self.beta[0]

    def to_dict(self) -> Dict[str, Any]:
        return {"beta": self.beta.tolist(), "c": self.c.tolist()}

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "TandemSpec":
        try:
            return cls(doc["beta"], doc["c"])
        except (KeyError, TypeError) as e:
            raise InstanceError(f"tandem spec needs 'beta' and 'c': {e}") from e


@dataclass(frozen=True, eq=False)
class PathSegment:
    start: np.ndarray
    end: np.ndarray
    velocity: np.ndarray
    duration: float
    face: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "start": self.start.tolist(),
            "end": self.end.tolist(),
            "velocity": self.velocity.tolist(),
            "duration": self.duration,
            "face": self.face,
        }


@dataclass(frozen=True, eq=False)
class VpReport:
    velocities: Dict[Tuple[int, int], np.ndarray]
    normal: np.ndarray
    path: Optional[List[PathSegment]] = None
    status: str = field(default=PATH_STATUS)

    def to_dict(self) -> Dict[str, Any]:
        doc = {
            "velocities": [
                {"pair": [i + 1, j + 1], "velocity": v.tolist()}
                for (i, j), v in sorted(self.velocities.items())
            ],
            "normal": self.normal.tolist(),
        }
        if self.path is not None:
            doc["path"] = [s.to_dict() for s in self.path]
            doc["path_status"] = self.status
        return doc


def build_srbm(spec: TandemSpec) -> SrbmData:
    """Banded tandem data: R_{k,k-1} = -1, Sigma_kk = c_{k-1} + c_k,
    Sigma_{k,k-1} = -c_{k-1}, mu_k = beta_{k-1} - beta_k (stations 1..d)"""
    d = spec.d
    c = spec.c
    r = np.eye(d)
    sigma = np.zeros((d, d))
    for k in range(d):
        sigma[k, k] = c[k] + c[k + 1]
        if k > 0:
            r[k, k - 1] = -1.0
            sigma[k, k - 1] = sigma[k - 1, k] = -c[k]
    mu = spec.beta[:-1] - spec.beta[1:]

    if not mk.is_positive_definite(sigma):
        raise InvalidSpec(f"covariance is not positive definite for c = {c.tolist()}")
    logging.debug(f"Built {d}-station tandem SRBM")
    return SrbmData(sigma, mu, r)


def tau_closed_form(spec: TandemSpec) -> np.ndarray:
    return 2.0 * spec.b / (spec.c[0] + spec.c[1:])


def product_form_condition(spec: TandemSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """c_0 = c_i for every station i < d; c_d is unconstrained"""
    inner = spec.c[1:spec.d]
    return bool(np.all(np.abs(inner - spec.c[0]) <= tol.verdict * max(1.0, abs(spec.c[0]))))


def ray_closed_form(spec: TandemSpec) -> np.ndarray:
    """Column k holds theta^(k,r): tau_k on coordinates 0..k, zero below"""
    tau = tau_closed_form(spec)
    return np.triu(np.tile(tau, (spec.d, 1)))


def closed_form_bundle(spec: TandemSpec) -> geo.GeometryBundle:
    """Geometry bundle assembled without solving any linear system"""
    tau = tau_closed_form(spec)
    a = ray_closed_form(spec)
    c = np.outer(tau, tau)
    np.fill_diagonal(c, tau)
    return geo.GeometryBundle(b_matrix=a / tau, delta=tau.copy(), a_matrix=a, c=c, tau=tau)


def _check_tandem_pair(spec: TandemSpec, i: int, j: int):
    if not (0 <= i < j < spec.d):
        raise IndexOutOfRange(f"pair ({i + 1}, {j + 1}) needs 1 <= i < j <= {spec.d}")


def symmetry_points_closed_form(spec: TandemSpec, i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """Both symmetry points of the pair i < j as d-vectors"""
    _check_tandem_pair(spec, i, j)
    c0, ci, cj = spec.c[0], spec.c[i + 1], spec.c[j + 1]
    bi, bj = spec.b[i], spec.b[j]
    tau = tau_closed_form(spec)
    bundle = closed_form_bundle(spec)

    z_j = (2.0 * ci * tau[i] + 2.0 * bj - 2.0 * bi) / (ci + cj)
    z_i = (2.0 * bi + (ci - c0) * tau[j]) / (c0 + ci)
    sym_i = geo.map_f_ij(bundle, i, j, [tau[i], z_j])
    sym_j = geo.map_f_ij(bundle, i, j, [z_i, tau[j]])
    return sym_i, sym_j


def pair_closed_form(spec: TandemSpec, i: int, j: int) -> pj.PairSrbm:
    _check_tandem_pair(spec, i, j)
    c0, ci, cj = spec.c[0], spec.c[i + 1], spec.c[j + 1]
    beta = spec.beta
    return pj.PairSrbm(
        i=i, j=j,
        sigma_tilde=np.array([[c0 + ci, -ci], [-ci, ci + cj]]),
        mu_tilde=np.array([beta[0] - beta[i + 1], beta[i + 1] - beta[j + 1]]),
        r_tilde=np.array([[1.0, 0.0], [-1.0, 1.0]]),
        is_p=True,
    )


def sigma_mu_star_closed_form(spec: TandemSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Sigma*_ij = c_0 tau_i tau_j off the diagonal, tau_i^2 (c_0 + c_i) on it"""
    tau = tau_closed_form(spec)
    sigma_star = spec.c[0] * np.outer(tau, tau)
    np.fill_diagonal(sigma_star, tau ** 2 * (spec.c[0] + spec.c[1:]))
    mu_star = tau * (spec.beta[0] - spec.beta[1:])
    return sigma_star, mu_star


def pair_velocity(pair: pj.PairSrbm, theta) -> np.ndarray:
    """Sigma~ theta + mu~ at a point in pair coordinates"""
    return pair.sigma_tilde @ np.asarray(theta, dtype=float) + pair.mu_tilde


def normal_vector(data: SrbmData, theta) -> np.ndarray:
    return data.sigma @ np.asarray(theta, dtype=float) + data.mu


def entrance_velocities(spec: TandemSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> VpReport:
    if not product_form_condition(spec, tol):
        raise NotProductForm("entrance velocity closed forms need c_0 = c_i for i < d")

    beta, c = spec.beta, spec.c
    d = spec.d
    velocities = {}
    for i in range(d):
        for j in range(i + 1, d):
            if j < d - 1:
                first = beta[i + 1] - beta[j + 1]
            else:
                first = beta[i + 1] - (2.0 * c[0] * beta[d] + (c[d] - c[0]) * beta[0]) / (c[0] + c[d])
            velocities[(i, j)] = np.array([first, beta[j + 1] - beta[0]])

    normal = normal_vector(build_srbm(spec), tau_closed_form(spec))
    return VpReport(velocities=velocities, normal=normal)


def conjectured_path(spec: TandemSpec, z, tol: Tolerances = DEFAULT_TOLERANCES) -> VpReport:
    """Three-segment path from the origin to z for a three-station tandem.

    The last segment runs along the normal at tau into z from a point y on
    the face x_3 = 0; the middle one reaches y inside that face with the
    pair (1, 2) velocity; the first runs along the first axis. Junctions
    are found backwards from z.
    """
    if spec.d != 3:
        raise InvalidSpec("the conjectured path is stated for three stations")
    c, beta = spec.c, spec.beta
    if not (product_form_condition(spec, tol) and abs(c[0] - c[3]) <= tol.verdict * max(1.0, abs(c[0]))):
        raise NotProductForm("the conjectured path needs c_0 = c_1 = c_2 = c_3")
    if not (beta[1] < beta[2] < beta[3]):
        raise InfeasiblePath("the path shape needs beta_1 < beta_2 < beta_3")
    z = np.asarray(z, dtype=float)
    if z.shape != (3,) or np.any(z < 0) or z[2] <= 0:
        raise DomainError("target must be a nonnegative 3-vector with z_3 > 0")

    report = entrance_velocities(spec, tol)
    normal = report.normal
    v12 = np.append(report.velocities[(0, 1)], 0.0)

    last = z[2] / normal[2]
    y = z - last * normal
    y[2] = 0.0
    middle = y[1] / v12[1]
    x = y - middle * v12
    x[1] = 0.0
    floor = -tol.verdict * max(1.0, float(np.max(z)))
    if np.any(y < floor) or np.any(x < floor):
        raise InfeasiblePath(f"junctions {x.tolist()} and {y.tolist()} leave the orthant")

    first_velocity = np.array([beta[1] - beta[0], 0.0, 0.0])
    origin = np.zeros(3)
    path = [
        PathSegment(origin, x, first_velocity, float(x[0] / first_velocity[0]), "x_2 = x_3 = 0"),
        PathSegment(x, y, v12, float(middle), "x_3 = 0"),
        PathSegment(y, z, normal, float(last), "interior"),
    ]
    logging.info(f"Conjectured path through {x.tolist()} and {y.tolist()}")
    return VpReport(velocities=report.velocities, normal=normal, path=path)
