"""
Projection
Two-dimensional SRBM data attached to each coordinate pair and the
pairwise product-form table
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import geometry as geo
import matrix_kernel as mk
import product_form as pf
from config_manager import DEFAULT_TOLERANCES, Tolerances
from exceptions import NotPMatrix
from srbm_model import SrbmData


@dataclass(frozen=True, eq=False)
class PairSrbm:
    i: int
    j: int
    sigma_tilde: np.ndarray
    mu_tilde: np.ndarray
    r_tilde: np.ndarray
    is_p: bool

    def to_srbm(self) -> SrbmData:
        return SrbmData(self.sigma_tilde, self.mu_tilde, self.r_tilde)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair": [self.i + 1, self.j + 1],
            "sigma_tilde": self.sigma_tilde.tolist(),
            "mu_tilde": self.mu_tilde.tolist(),
            "r_tilde": self.r_tilde.tolist(),
            "is_p": self.is_p,
        }


@dataclass(frozen=True, eq=False)
class PairEntry:
    pair: PairSrbm
    verdict: bool
    sym_i: np.ndarray
    sym_j: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        doc = self.pair.to_dict()
        doc.update({
            "product_form": self.verdict,
            "sym_i": self.sym_i.tolist(),
            "sym_j": self.sym_j.tolist(),
        })
        return doc


@dataclass(frozen=True, eq=False)
class PairTable:
    entries: List[PairEntry]
    full_verdict: bool

    @property
    def all_pairs(self) -> bool:
        return all(e.verdict for e in self.entries)

    @property
    def consistent(self) -> bool:
        return self.all_pairs == self.full_verdict

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pairs": [e.to_dict() for e in self.entries],
            "all_pairs": self.all_pairs,
            "full_verdict": self.full_verdict,
            "consistent": self.consistent,
        }


def sigma_mu_star(data: SrbmData, bundle: geo.GeometryBundle) -> Tuple[np.ndarray, np.ndarray]:
    """Sigma* = A^T Sigma A and mu* = A^T mu"""
    a = bundle.a_matrix
    sigma_star = a.T @ data.sigma @ a
    return 0.5 * (sigma_star + sigma_star.T), a.T @ data.mu


def pair_srbm(data: SrbmData, bundle: geo.GeometryBundle, i: int, j: int,
              tol: Tolerances = DEFAULT_TOLERANCES) -> PairSrbm:
    """Pair data from the (i, j) blocks of Sigma* and mu*.

    Sigma~ = (A^ij)^{-T} Sigma*^{ij} (A^ij)^{-1}, mu~ = (A^ij)^{-T} mu*^{ij},
    R~ = (A^ij)^{-T} diag(Delta_i, Delta_j).
    """
    geo.check_pair(bundle, i, j, tol)
    sigma_star, mu_star = sigma_mu_star(data, bundle)
    idx = [i, j]
    inv_t = np.linalg.inv(geo.pair_matrix(bundle, i, j)).T
    sigma_t = inv_t @ sigma_star[np.ix_(idx, idx)] @ inv_t.T
    mu_t = inv_t @ mu_star[idx]
    r_t = inv_t @ np.diag(bundle.delta[idx])
    return PairSrbm(
        i=i, j=j,
        sigma_tilde=0.5 * (sigma_t + sigma_t.T),
        mu_tilde=mu_t,
        r_tilde=r_t,
        is_p=mk.is_p_matrix(r_t, tol.minor)[0],
    )


def gamma_tilde(pair: PairSrbm, z) -> Any:
    """-1/2 <z, Sigma~ z> - <mu~, z>"""
    z = np.asarray(z, dtype=float)
    value = -0.5 * np.einsum("...i,ij,...j->...", z, pair.sigma_tilde, z) - z @ pair.mu_tilde
    return float(value) if np.ndim(value) == 0 else value


def pair_diagnosis(pair: PairSrbm, tol: Tolerances = DEFAULT_TOLERANCES) -> pf.ProductFormReport:
    """Product-form decision for the two-dimensional pair SRBM"""
    return pf.diagnose_product_form(pair.to_srbm(), tol=tol)


def pair_symmetry_points(pair: PairSrbm, tol: Tolerances = DEFAULT_TOLERANCES) -> geo.PairGeometry:
    data = pair.to_srbm()
    return geo.symmetry_point(data, geo.compute_rays(data, tol), 0, 1, tol)


def pairwise_independence_report(data: SrbmData, bundle: Optional[geo.GeometryBundle] = None,
                                 tol: Tolerances = DEFAULT_TOLERANCES) -> PairTable:
    """2-D product-form verdict of every pair, next to the full verdict.

    Requires R to be a P-matrix. All pairs hold iff the full SRBM has
    product form; a mismatch is logged.
    """
    if not mk.is_p_matrix(data.r, tol.minor)[0]:
        raise NotPMatrix("pairwise table requires R to be a P-matrix")
    if bundle is None:
        bundle = geo.compute_rays(data, tol)

    entries = []
    for i in range(data.d):
        for j in range(i + 1, data.d):
            pair = pair_srbm(data, bundle, i, j, tol)
            report = pair_diagnosis(pair, tol)
            sym = pair_symmetry_points(pair, tol)
            entries.append(PairEntry(pair=pair, verdict=report.geometric_ok,
                                     sym_i=sym.sym_i, sym_j=sym.sym_j))

    full_verdict, _ = pf.check_geometric(data, bundle, tol, is_p=True)
    table = PairTable(entries=entries, full_verdict=full_verdict)
    if not table.consistent:
        logging.warning("Pairwise verdicts disagree with the full-dimensional verdict")
    return table
