"""Distortion metrics between clean and adversarial clouds.

Data-domain measures (index-corresponded l2, Chamfer, Hausdorff, a curvature
based regularity proxy) plus the spectral perturbation energy, the Frobenius
norm of the transform-coefficient difference. With both clouds expressed in
the same orthonormal basis the spectral energy equals the l2 distance, which
ties the spectral budget to data-domain distortion.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .spectral import Eigensystem, SpectralCoefficients


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class DistortionReport:
    d_norm: float
    d_chamfer: float
    d_hausdorff: float
    d_geo: float
    e_delta: float

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def csv_header() -> str:
        return "d_norm,d_chamfer,d_hausdorff,d_geo,e_delta"

    def csv_row(self) -> str:
        return ",".join(
            repr(v) for v in (self.d_norm, self.d_chamfer, self.d_hausdorff, self.d_geo, self.e_delta)
        )


def _cross_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def l2_distance(adv: np.ndarray, clean: np.ndarray) -> float:
    """Frobenius norm of the pointwise difference (clouds corresponded by index)."""
    adv = np.asarray(adv, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    if adv.shape != clean.shape:
        raise MetricError(f"shape mismatch {adv.shape} vs {clean.shape}")
    return float(np.linalg.norm(adv - clean))


def chamfer(adv: np.ndarray, clean: np.ndarray) -> float:
    """Symmetric mean squared nearest-neighbor distance.

    Average of the two directed terms; each directed term is the mean over
    one cloud of the squared distance to the nearest point of the other.
    """
    adv = np.asarray(adv, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    if len(adv) == 0 or len(clean) == 0:
        raise MetricError("empty cloud")
    d2 = _cross_sq_dists(adv, clean)
    return float(0.5 * (d2.min(axis=1).mean() + d2.min(axis=0).mean()))


def hausdorff(adv: np.ndarray, clean: np.ndarray) -> float:
    """Symmetric Hausdorff distance (unsquared, worst case over both directions)."""
    adv = np.asarray(adv, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    if len(adv) == 0 or len(clean) == 0:
        raise MetricError("empty cloud")
    d = np.sqrt(_cross_sq_dists(adv, clean))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _curvature_proxy(points: np.ndarray, k: int) -> np.ndarray:
    """Per-point mean angular deviation of neighbor directions from the tangent plane.

    The local normal is the smallest-variance PCA axis of the k nearest
    neighbors. Values are 1 for locally planar neighborhoods and drop toward
    0 as neighbors leave the tangent plane.
    """
    n = len(points)
    if not 1 <= k < n:
        raise MetricError(f"need 1 <= k < n, got k={k}, n={n}")
    d2 = _cross_sq_dists(points, points)
    np.fill_diagonal(d2, np.inf)
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k]

    neigh = points[nbrs]                      # (n, k, 3)
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)             # batched 3x3; ascending
    normals = vecs[:, :, 0]                   # smallest-variance axis

    offsets = neigh - points[:, None, :]
    dists = np.sqrt((offsets ** 2).sum(axis=2))
    kappa = np.empty(n)
    for i in range(n):
        valid = dists[i] > 0.0
        if not valid.any():
            raise MetricError(f"degenerate neighborhood at point {i}: all neighbors identical")
        dirs = offsets[i, valid] / dists[i, valid][:, None]
        kappa[i] = np.mean(1.0 - np.abs(dirs @ normals[i]))
    return kappa


def geo_regularity(adv: np.ndarray, clean: np.ndarray, k: int = 10) -> float:
    """Curvature-proxy discrepancy between a cloud and its clean counterpart.

    Directed from adversarial to clean: each adversarial point's proxy is
    compared against the proxy of its nearest clean point. This is a
    documented variant of the usual geometric-regularity score; values are
    comparable only within this library.
    """
    adv = np.asarray(adv, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    kappa_adv = _curvature_proxy(adv, k)
    kappa_clean = _curvature_proxy(clean, k)
    nearest = _cross_sq_dists(adv, clean).argmin(axis=1)
    return float(np.mean(np.abs(kappa_adv - kappa_clean[nearest])))


def spectral_perturbation_energy(adv_coeffs: SpectralCoefficients,
                                 clean_coeffs: SpectralCoefficients) -> float:
    """Frobenius norm of the coefficient difference; both sides must share a basis."""
    if adv_coeffs.basis is not clean_coeffs.basis:
        raise MetricError("coefficients come from different eigensystems")
    return float(np.linalg.norm(adv_coeffs.coeffs - clean_coeffs.coeffs))


def distortion_report(adv: np.ndarray, clean: np.ndarray, eig: Eigensystem,
                      k: int = 10) -> DistortionReport:
    """All five metrics at once; e_delta uses the clean cloud's basis."""
    e_delta = float(np.linalg.norm(eig.eigenvectors.T @ (np.asarray(adv) - np.asarray(clean))))
    return DistortionReport(
        d_norm=l2_distance(adv, clean),
        d_chamfer=chamfer(adv, clean),
        d_hausdorff=hausdorff(adv, clean),
        d_geo=geo_regularity(adv, clean, k),
        e_delta=e_delta,
    )
