"""
Slice Figures
The ellipse gamma = 0 cut by the (i, j) face slice, drawn in pair
coordinates (z_i, z_j) with the two ray points, the two symmetry points and
the lines z_i = tau_i and z_j = tau_j
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import geometry as geo
from config_manager import DEFAULT_TOLERANCES, Tolerances
from srbm_model import SrbmData

SVG_RC = {
    "svg.hashsalt": "srbm-pf",
    "svg.fonttype": "none",
    "path.simplify": False,
}


@dataclass(frozen=True, eq=False)
class SliceFigure:
    i: int
    j: int
    ellipse: np.ndarray
    rays: np.ndarray
    symmetry: np.ndarray
    tau: np.ndarray
    coincide: bool

    def bounds(self, margin: float = 0.1):
        """(xmin, xmax, ymin, ymax) of the slice and its points, widened by margin"""
        pts = np.vstack([self.ellipse, self.rays, self.symmetry])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = margin * np.maximum(hi - lo, 1e-12)
        return lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1]


def slice_figure(data: SrbmData, bundle: geo.GeometryBundle, i: int, j: int,
                 n: int = 360, tol: Tolerances = DEFAULT_TOLERANCES) -> SliceFigure:
    """Raises DegeneratePair when c_ij vanishes"""
    geo.check_pair(bundle, i, j, tol)
    ellipse = geo.sample_ellipse_slice(data, bundle, i, j, n, tol)
    pair = geo.symmetry_point(data, bundle, i, j, tol)
    band = tol.symmetry * geo.tau_scale(bundle)
    return SliceFigure(
        i=i, j=j,
        ellipse=ellipse,
        rays=np.array([geo.ray_in_pair(bundle, i, j, i), geo.ray_in_pair(bundle, i, j, j)]),
        symmetry=np.array([pair.sym_i[[i, j]], pair.sym_j[[i, j]]]),
        tau=np.array([bundle.tau[i], bundle.tau[j]]),
        coincide=pair.pair_gap <= band,
    )


def write_svg(fig_data: SliceFigure, path: Union[str, Path], margin: float = 0.1,
              width: float = 6.0, height: float = 6.0):
    i, j = fig_data.i + 1, fig_data.j + 1
    xmin, xmax, ymin, ymax = fig_data.bounds(margin)
    closed = np.vstack([fig_data.ellipse, fig_data.ellipse[:1]])

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(width, height))
        try:
            ax.plot(closed[:, 0], closed[:, 1], color="black", lw=1.2, gid="slice-ellipse",
                    label="slice of gamma = 0")
            ax.axvline(fig_data.tau[0], color="tab:gray", ls="--", lw=0.8, gid="tau-i",
                       label=f"z{i} = tau{i}")
            ax.axhline(fig_data.tau[1], color="tab:gray", ls=":", lw=0.8, gid="tau-j",
                       label=f"z{j} = tau{j}")
            ax.plot(fig_data.rays[:, 0], fig_data.rays[:, 1], ls="none", marker="o",
                    color="tab:blue", gid="ray-points", label="ray points")
            if fig_data.coincide:
                ax.plot(fig_data.symmetry[:1, 0], fig_data.symmetry[:1, 1], ls="none", marker="s",
                        color="tab:red", gid="symmetry-point", label="symmetry point")
            else:
                for k, name in ((0, "i"), (1, "j")):
                    ax.plot(fig_data.symmetry[k:k + 1, 0], fig_data.symmetry[k:k + 1, 1], ls="none",
                            marker="s" if k == 0 else "D", color="tab:red",
                            gid=f"symmetry-point-{name}", label=f"symmetry point {name}")
            ax.set_xlim(xmin, xmax)
            ax.set_ylim(ymin, ymax)
            ax.set_xlabel(f"z{i}")
            ax.set_ylabel(f"z{j}")
            ax.set_title(f"Slice ({i}, {j})")
            ax.legend(loc="best", fontsize="small")
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logging.info(f"Wrote {path}")


def write_slice_csv(fig_data: SliceFigure, path: Union[str, Path]):
    """One row per ellipse sample; coordinates with 17 significant digits"""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["k", f"z{fig_data.i + 1}", f"z{fig_data.j + 1}"])
        for k, (x, y) in enumerate(fig_data.ellipse):
            w.writerow([k, f"{x:.17g}", f"{y:.17g}"])
    logging.info(f"Wrote {path}")
