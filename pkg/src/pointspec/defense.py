"""Defenses: low-pass retraining plus the classic input-transformation baselines.

The low-pass defense exploits the attack's own structure: perturbations are
steered into high frequencies, so a model trained on a mixture of originals
and their low-band reconstructions, and evaluated on low-band inputs only,
sees mostly the clean shape. SRS, SOR and Gaussian noise are transfer-style
baselines applied to adversarial clouds before plain inference.
"""

from dataclasses import dataclass

import numpy as np

from .classifier import ToyClassifier, accuracy, fit, split_dataset
from .graph import build_knn_graph, laplacian
from .rng import stage_rng
from .spectral import eigendecompose


class DefenseError(ValueError):
    pass


@dataclass(frozen=True)
class DefenseConfig:
    kind: str = "none"            # none | srs | sor | gaussian | lowpass_retrain
    drop_fraction: float = 0.1    # srs
    sor_k: int = 2                # sor
    sor_m: float = 1.0            # sor threshold multiplier
    noise_fraction: float = 0.01  # gaussian, as a fraction of the bounding radius
    b_fraction: float = 400.0 / 1024.0  # lowpass band bound as a fraction of n
    k: int = 10                   # graph K for lowpass reconstruction
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "srs", "sor", "gaussian", "lowpass_retrain"):
            raise DefenseError(f"unknown defense kind {self.kind!r}")
        if not 0.0 <= self.drop_fraction < 1.0:
            raise DefenseError("drop_fraction must be in [0, 1)")
        if self.sor_k < 1:
            raise DefenseError("sor_k must be >= 1")


def lowpass_reconstruct(points: np.ndarray, k: int, b: int) -> np.ndarray:
    """Rebuild a cloud from its lowest b graph frequencies only."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if not 1 <= b <= n:
        raise DefenseError(f"band bound must satisfy 1 <= b <= n, got b={b}, n={n}")
    eig = eigendecompose(laplacian(build_knn_graph(pts, k)))
    coeffs = eig.eigenvectors.T @ pts
    coeffs[b:] = 0.0
    return eig.eigenvectors @ coeffs


def srs(points: np.ndarray, drop_fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Simple random subsampling: keep a uniform subset, original order."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    n_keep = n - int(round(n * drop_fraction))
    if n_keep < 2:
        raise DefenseError(f"dropping {drop_fraction:.0%} of {n} points leaves fewer than 2")
    if n_keep == n:
        return pts.copy()
    keep = np.sort(rng.choice(n, size=n_keep, replace=False))
    return pts[keep]


def sor(points: np.ndarray, k: int = 2, m: float = 1.0):
    """Statistical outlier removal by mean k-NN distance thresholding.

    A point is dropped when its mean distance to its k nearest neighbors
    exceeds mean + m * std of that statistic over the cloud. Returns the
    filtered cloud and the number of dropped points.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if not 1 <= k < n:
        raise DefenseError(f"need 1 <= k < n, got k={k}, n={n}")
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k]
    mean_dist = np.sqrt(np.take_along_axis(d2, nbrs, axis=1)).mean(axis=1)
    threshold = mean_dist.mean() + m * mean_dist.std()
    keep = mean_dist <= threshold
    if keep.sum() < 2:
        raise DefenseError("outlier removal would leave fewer than 2 points")
    return pts[keep], int(n - keep.sum())


def gaussian_noise(points: np.ndarray, fraction: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Add isotropic noise with sigma = fraction * bounding-sphere radius."""
    pts = np.asarray(points, dtype=np.float64)
    if fraction == 0.0:
        return pts.copy()
    centered = pts - pts.mean(axis=0)
    radius = float(np.sqrt((centered ** 2).sum(axis=1).max()))
    return pts + rng.normal(0.0, fraction * radius, size=pts.shape)


def train_with_lowpass_augmentation(dataset, b_fraction: float = 400.0 / 1024.0,
                                    k: int = 10, hidden: int = 64, epochs: int = 45,
                                    lr: float = 0.05, momentum: float = 0.9,
                                    batch_size: int = 32, seed: int = 0,
                                    holdout_frac: float = 0.25):
    """Train on originals plus their low-band reconstructions.

    Uses the same deterministic split as classifier.train for the same seed,
    so defended and undefended models share train/holdout samples. Holdout
    accuracy is reported under the defended inference path (low-pass first);
    the doubled pool needs a few more epochs than plain training to reach
    accuracy parity on clean data.
    """
    clouds = dataset.points_array()
    labels = dataset.labels_array()
    n_points = clouds.shape[1]
    b = int(np.floor(n_points * b_fraction + 0.5))
    train_idx, hold_idx = split_dataset(len(labels), holdout_frac, seed)

    low = np.stack([lowpass_reconstruct(clouds[i], k, b) for i in train_idx])
    pool = np.concatenate([clouds[train_idx], low])
    pool_labels = np.concatenate([labels[train_idx], labels[train_idx]])

    model = ToyClassifier(hidden=hidden, classes=len(dataset.class_names),
                          rng=stage_rng(seed, "train/init"))
    fit(model, pool, pool_labels, epochs=epochs, lr=lr, momentum=momentum,
        batch_size=batch_size, rng=stage_rng(seed, "train/shuffle"))

    hold_low = np.stack([lowpass_reconstruct(clouds[i], k, b) for i in hold_idx]) \
        if len(hold_idx) else np.empty((0, n_points, 3))
    report = {
        "band_bound": b,
        "train_accuracy": accuracy(model, pool, pool_labels),
        "holdout_accuracy": accuracy(model, hold_low, labels[hold_idx]) if len(hold_idx) else float("nan"),
        "train_indices": train_idx.tolist(),
        "holdout_indices": hold_idx.tolist(),
    }
    return model, report


def lowpass_inference(model: ToyClassifier, points: np.ndarray, k: int, b: int) -> int:
    """Classify the low-band reconstruction of a cloud."""
    return model.predict(lowpass_reconstruct(points, k, b))


def apply_defense(points: np.ndarray, cfg: DefenseConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """Input transformation for the preprocessing defenses (not lowpass_retrain)."""
    if cfg.kind == "none":
        return np.asarray(points, dtype=np.float64)
    if cfg.kind == "srs":
        return srs(points, cfg.drop_fraction, rng)
    if cfg.kind == "sor":
        return sor(points, cfg.sor_k, cfg.sor_m)[0]
    if cfg.kind == "gaussian":
        return gaussian_noise(points, cfg.noise_fraction, rng)
    raise DefenseError(f"{cfg.kind} is not an input transformation")


def evaluate_under_defense(records, cfg: DefenseConfig, model: ToyClassifier,
                           defended_model: ToyClassifier = None) -> float:
    """Fraction of adversarial clouds that stay misclassified under a defense.

    records is a sequence of (adversarial_points, true_label) pairs generated
    against the undefended model (transfer protocol). For lowpass_retrain a
    defended model must be supplied; the other kinds preprocess the input and
    reuse the undefended model.
    """
    if not records:
        raise DefenseError("no attack records to evaluate")
    still_fooled = 0
    for i, (adv, label) in enumerate(records):
        if cfg.kind == "lowpass_retrain":
            if defended_model is None:
                raise DefenseError("lowpass_retrain evaluation needs a defended model")
            b = int(np.floor(len(adv) * cfg.b_fraction + 0.5))
            pred = lowpass_inference(defended_model, adv, cfg.k, b)
        else:
            rng = stage_rng(cfg.seed, f"defense/{cfg.kind}/{i}")
            pred = model.predict(apply_defense(adv, cfg, rng))
        if pred != label:
            still_fooled += 1
    return still_fooled / len(records)
