"""Graph Fourier transform and spectral filtering.

The Laplacian L = U diag(lam) U^T is symmetric positive semi-definite, so
its eigenvalues are real graph frequencies (ascending, lam_1 = 0) and the
orthonormal eigenvector columns of U form the transform basis. Forward
transform: C_hat = U^T P, one coefficient column per coordinate axis.
Because U is orthonormal the transform is lossless and norm-preserving.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import Laplacian


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Eigensystem:
    """GFT basis: ascending eigenvalues and orthonormal eigenvectors of L."""

    eigenvalues: np.ndarray   # (n,) ascending
    eigenvectors: np.ndarray  # (n, n), column i pairs with eigenvalues[i]

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass(frozen=True)
class SpectralCoefficients:
    """Per-frequency transform coefficients C_hat = U^T P (n rows, 3 columns)."""

    coeffs: np.ndarray
    basis: Eigensystem

    def __post_init__(self):
        self.coeffs.setflags(write=False)


class BandSplit(NamedTuple):
    """Low band [0, low_end), mid [low_end, mid_end), high [mid_end, n)."""

    low_end: int
    mid_end: int


def eigendecompose(lap: Laplacian) -> Eigensystem:
    """Full symmetric eigendecomposition of the Laplacian.

    Eigenvalues come back ascending. Each eigenvector is sign-normalized so
    its first component of magnitude > 1e-12 is positive, which makes the
    basis deterministic for identical input (up to degenerate eigenspaces,
    where only rotation-invariant quantities are meaningful).
    """
    mat = lap.matrix if isinstance(lap, Laplacian) else np.asarray(lap, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise SpectralError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(mat)  # raises LinAlgError if iteration fails
    first = (np.abs(vecs) > 1e-12).argmax(axis=0)
    signs = np.where(vecs[first, np.arange(vecs.shape[1])] < 0.0, -1.0, 1.0)
    return Eigensystem(eigenvalues=vals, eigenvectors=vecs * signs)


def gft(points: np.ndarray, basis: Eigensystem) -> SpectralCoefficients:
    """Forward transform: project each coordinate signal onto the basis."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] != basis.n:
        raise SpectralError(f"cloud has {pts.shape[0]} points, basis expects {basis.n}")
    return SpectralCoefficients(coeffs=basis.eigenvectors.T @ pts, basis=basis)


def igft(coeffs: SpectralCoefficients) -> np.ndarray:
    """Inverse transform back to coordinates: P = U C_hat."""
    return coeffs.basis.eigenvectors @ coeffs.coeffs


def ideal_band_response(n: int, keep) -> np.ndarray:
    """Response that is 1 on the kept frequency indices and 0 elsewhere."""
    idx = np.asarray(list(keep), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise SpectralError(f"keep indices out of range [0, {n})")
    g = np.zeros(n)
    g[idx] = 1.0
    return g


def haar_lowpass_response(eig: Eigensystem) -> np.ndarray:
    """Linear low-pass response 1 - lam/lam_max (1 at DC, 0 at the top)."""
    if eig.lambda_max <= 0.0:
        raise SpectralError("lambda_max is zero (edgeless graph)")
    return 1.0 - eig.eigenvalues / eig.lambda_max


def normalized_eigenvalues(eig: Eigensystem) -> np.ndarray:
    """Eigenvalues rescaled to [0, 1]; polynomial filters evaluate on these."""
    if eig.lambda_max <= 0.0:
        raise SpectralError("lambda_max is zero (edgeless graph)")
    return eig.eigenvalues / eig.lambda_max


def poly_response(coeffs: np.ndarray, lam_tilde: np.ndarray) -> np.ndarray:
    """Evaluate sum_k h_k * lam_tilde^k at each frequency."""
    h = np.asarray(coeffs, dtype=np.float64)
    return np.vander(lam_tilde, len(h), increasing=True) @ h


def chebyshev_anchor_indices(eig: Eigensystem, length: int) -> np.ndarray:
    """Default anchor frequencies for a polynomial fit.

    Picks, for each Chebyshev node on [0, 1], the nearest eigenvalue with a
    value not already taken, so the Vandermonde system below is never
    singular by construction. Raises if fewer than `length` distinct
    eigenvalues exist.
    """
    lam = normalized_eigenvalues(eig)
    uniq_vals, first_idx = np.unique(lam, return_index=True)
    if uniq_vals.size < length:
        raise SpectralError(
            f"need {length} distinct eigenvalues, spectrum has {uniq_vals.size}"
        )
    j = np.arange(length)
    nodes = 0.5 * (1.0 - np.cos((2 * j + 1) * np.pi / (2 * length)))
    taken = np.zeros(uniq_vals.size, dtype=bool)
    chosen = []
    for t in nodes:
        order = np.argsort(np.abs(uniq_vals - t), kind="stable")
        pick = next(o for o in order if not taken[o])
        taken[pick] = True
        chosen.append(first_idx[pick])
    return np.array(sorted(chosen), dtype=np.int64)


def fit_polynomial_filter(eig: Eigensystem, sample_freqs, targets) -> np.ndarray:
    """Solve for polynomial coefficients hitting target responses exactly.

    The filter h(lam) = sum_k h_k * lam_tilde^k must satisfy h(lam_i) = c_i
    at each sampled frequency; this is a square Vandermonde system in the
    normalized eigenvalues. Repeated eigenvalues among the samples make the
    system singular and raise.
    """
    idx = np.asarray(list(sample_freqs), dtype=np.int64)
    c = np.asarray(list(targets), dtype=np.float64)
    if idx.shape != c.shape:
        raise SpectralError("sample_freqs and targets must have equal length")
    lam = normalized_eigenvalues(eig)[idx]
    if np.unique(lam).size != lam.size:
        raise SpectralError("repeated eigenvalues among the sampled frequencies")
    vand = np.vander(lam, len(lam), increasing=True)
    try:
        h = np.linalg.solve(vand, c)
    except np.linalg.LinAlgError:
        raise SpectralError("singular Vandermonde system") from None
    resid = np.abs(vand @ h - c).max()
    if not np.isfinite(resid) or resid > 1e-6:
        raise SpectralError(f"ill-conditioned fit, residual {resid:.3g}")
    return h


def apply_response(coeffs: SpectralCoefficients, g: np.ndarray) -> SpectralCoefficients:
    """Scale coefficient row i by response g_i (diagonal operator)."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape[0] != coeffs.coeffs.shape[0]:
        raise SpectralError("response length does not match coefficient rows")
    return SpectralCoefficients(coeffs=coeffs.coeffs * g[:, None], basis=coeffs.basis)


def row_energies(coeffs: SpectralCoefficients) -> np.ndarray:
    """Squared coefficient magnitude per frequency, summed over x, y, z."""
    return (coeffs.coeffs ** 2).sum(axis=1)


def band_energy(coeffs: SpectralCoefficients, split: BandSplit):
    """Total energy in the (low, mid, high) bands; sums to the Frobenius energy."""
    n = coeffs.coeffs.shape[0]
    if not (0 < split.low_end < split.mid_end <= n):
        raise SpectralError(f"invalid band split {split} for n={n}")
    e = row_energies(coeffs)
    return (
        float(e[: split.low_end].sum()),
        float(e[split.low_end : split.mid_end].sum()),
        float(e[split.mid_end :].sum()),
    )


def default_band_split(n: int) -> BandSplit:
    """Proportional version of the (100, 400)-of-1024 band boundaries.

    Boundaries scale linearly with n and round half up, so n=1024 gives
    (100, 400), n=512 gives (50, 200).
    """
    if n < 16:
        raise SpectralError(f"band split needs n >= 16, got {n}")
    low = int(np.floor(n * 100.0 / 1024.0 + 0.5))
    mid = int(np.floor(n * 400.0 / 1024.0 + 0.5))
    return BandSplit(low_end=low, mid_end=mid)


def write_spectrum_csv(eig: Eigensystem, coeffs: SpectralCoefficients, path) -> None:
    """Per-frequency energy table: index,lambda,energy_x,energy_y,energy_z,energy_total."""
    sq = coeffs.coeffs ** 2
    with open(path, "w") as fh:
        fh.write("index,lambda,energy_x,energy_y,energy_z,energy_total\n")
        for i in range(eig.n):
            ex, ey, ez = (float(v) for v in sq[i])
            fh.write(
                f"{i},{float(eig.eigenvalues[i])!r},{ex!r},{ey!r},{ez!r},{ex + ey + ez!r}\n"
            )
