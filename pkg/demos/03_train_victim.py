"""Train the small point-cloud classifier on the synthetic shape dataset.

Six surface classes (sphere, cube, cylinder, torus, cone, plane) with
randomized proportions, pose and jitter. The classifier is a per-point MLP
with a global max-pool, so it is exactly permutation invariant. Saves the
trained checkpoint for the attack and defense demos.
"""

from pathlib import Path

import numpy as np

import pointspec as ps
from pointspec.classifier import save_model

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

dataset = ps.gen_synthetic(per_class=50, n_points=256, seed=42)
print(f"dataset: {len(dataset)} clouds, classes {dataset.class_names}")

model, report = ps.train(dataset, hidden=64, epochs=30, lr=0.05, seed=42)
print(f"train accuracy:   {report['train_accuracy']:.3f}")
print(f"holdout accuracy: {report['holdout_accuracy']:.3f}")

# permutation invariance in action
cloud = dataset.samples[0].points
rng = np.random.default_rng(0)
shuffled = cloud[rng.permutation(len(cloud))]
print(f"logits drift under point shuffling: "
      f"{np.abs(model.logits(cloud) - model.logits(shuffled)).max():.2e}")

ckpt = out_dir / "victim.json"
save_model(model, ckpt)
np.save(out_dir / "holdout_indices.npy", np.array(report["holdout_indices"]))
print(f"checkpoint written to {ckpt}")
