"""Graph-spectral processing of 3D point clouds.

Builds K-NN graphs on point clouds, transforms coordinates into the graph
spectral domain, filters there, and uses the machinery for a learnable
spectral-domain adversarial attack and a low-pass defense against a small
trainable classifier.
"""

__version__ = "0.1.0"

from .cloud import CloudError, PointCloud, load_xyz, normalize_unit_ball, save_xyz
from .mesh import MeshError, TriangleMesh, load_off, parse_off, sample_surface
from .graph import KnnGraph, Laplacian, build_knn_graph, laplacian, write_edge_csv
from .spectral import (
    BandSplit,
    Eigensystem,
    SpectralCoefficients,
    apply_response,
    band_energy,
    chebyshev_anchor_indices,
    default_band_split,
    eigendecompose,
    fit_polynomial_filter,
    gft,
    haar_lowpass_response,
    ideal_band_response,
    igft,
    normalized_eigenvalues,
    row_energies,
    write_spectrum_csv,
)
from .metrics import (
    DistortionReport,
    chamfer,
    distortion_report,
    geo_regularity,
    hausdorff,
    l2_distance,
    spectral_perturbation_energy,
)
from .synthetic import CLASS_NAMES, SyntheticDataset, gen_synthetic, make_cloud, shape_points
from .classifier import ToyClassifier, accuracy, load_model, save_model, train
from .attack import (
    AttackConfig,
    AttackResult,
    SpectralFilterParams,
    adv_loss,
    binary_search_beta,
    grad_params,
    lfc_loss,
    perturb,
    project_epsilon,
    run_attack,
)
from .defense import (
    DefenseConfig,
    evaluate_under_defense,
    gaussian_noise,
    lowpass_inference,
    lowpass_reconstruct,
    sor,
    srs,
    train_with_lowpass_augmentation,
)
