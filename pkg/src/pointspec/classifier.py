"""Small permutation-invariant point-cloud classifier with analytic gradients.

Architecture: a shared per-point MLP (3 -> h -> h, ReLU), a global max-pool
over points per feature channel, and a linear head (h -> c). Max-pooling
over the point axis makes predictions exactly invariant to point order.
Backpropagation is written out by hand so the input-coordinate gradients
consumed by the attack are auditable; the max-pool subgradient routes to
the channel argmax point, ties to the lowest index (numpy argmax order).
"""

import json

import numpy as np

from .rng import stage_rng


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class ToyClassifier:
    """Per-point MLP + max-pool + linear head, weights in plain numpy arrays."""

    def __init__(self, hidden: int = 64, classes: int = 6, rng=None):
        self.hidden = hidden
        self.classes = classes
        if rng is None:
            rng = np.random.default_rng(0)
        self.w1 = rng.normal(0.0, np.sqrt(2.0 / 3), size=(hidden, 3))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, hidden))
        self.b2 = np.zeros(hidden)
        self.w3 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(classes, hidden))
        self.b3 = np.zeros(classes)

    # parameter plumbing -------------------------------------------------

    _PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")

    def params(self) -> dict:
        return {name: getattr(self, name) for name in self._PARAM_NAMES}

    def set_params(self, params: dict) -> None:
        for name in self._PARAM_NAMES:
            setattr(self, name, np.asarray(params[name], dtype=np.float64))

    def copy(self) -> "ToyClassifier":
        clone = ToyClassifier.__new__(ToyClassifier)
        clone.hidden = self.hidden
        clone.classes = self.classes
        clone.set_params({k: v.copy() for k, v in self.params().items()})
        return clone

    # forward ------------------------------------------------------------

    def _forward(self, points):
        z1 = points @ self.w1.T + self.b1
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ self.w2.T + self.b2
        a2 = np.maximum(z2, 0.0)
        pool_idx = a2.argmax(axis=-2)
        pooled = np.take_along_axis(a2, pool_idx[..., None, :], axis=-2).squeeze(-2)
        logits = pooled @ self.w3.T + self.b3
        return logits, (a1, a2, pool_idx, pooled)

    def logits(self, points: np.ndarray) -> np.ndarray:
        return self._forward(np.asarray(points, dtype=np.float64))[0]

    def predict(self, points: np.ndarray) -> int:
        return int(self.logits(points).argmax())

    def predict_batch(self, batch: np.ndarray) -> np.ndarray:
        """Predictions for a stacked (B, n, 3) batch."""
        return self.logits(batch).argmax(axis=-1)

    # gradients ----------------------------------------------------------

    def loss_grad_points(self, points: np.ndarray, label: int, targeted: bool = False,
                         with_logits: bool = False):
        """Adversarial cross-entropy loss and its exact gradient in the inputs.

        targeted: loss = -log p_label (push toward the target label)
        untargeted: loss = +log p_label (push away from the true label)
        Returns (scalar loss, (n, 3) gradient), plus the logits when asked.
        """
        pts = np.asarray(points, dtype=np.float64)
        if not 0 <= label < self.classes:
            raise ValueError(f"label {label} out of range for {self.classes} classes")
        logits, (a1, a2, pool_idx, pooled) = self._forward(pts)
        p = softmax(logits)
        logp = logits[label] - (np.log(np.exp(logits - logits.max()).sum()) + logits.max())
        onehot = np.zeros(self.classes)
        onehot[label] = 1.0
        if targeted:
            loss = -logp
            dlogits = p - onehot
        else:
            loss = logp
            dlogits = onehot - p

        dpool = dlogits @ self.w3
        da2 = np.zeros_like(a2)
        da2[pool_idx, np.arange(self.hidden)] = dpool
        dz2 = da2 * (a2 > 0.0)
        da1 = dz2 @ self.w2
        dz1 = da1 * (a1 > 0.0)
        grad = dz1 @ self.w1
        if with_logits:
            return float(loss), grad, logits
        return float(loss), grad

    def _loss_grad_weights(self, batch, labels):
        """Mean cross-entropy over a batch and its weight gradients (training)."""
        logits, (a1, a2, pool_idx, pooled) = self._forward(batch)
        p = softmax(logits)
        bsz = batch.shape[0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted[np.arange(bsz), labels] - np.log(np.exp(shifted).sum(axis=1))
        loss = -logp.mean()

        dlogits = p.copy()
        dlogits[np.arange(bsz), labels] -= 1.0
        dlogits /= bsz

        grads = {}
        grads["w3"] = dlogits.T @ pooled
        grads["b3"] = dlogits.sum(axis=0)
        dpool = dlogits @ self.w3                      # (B, h)
        da2 = np.zeros_like(a2)
        np.put_along_axis(da2, pool_idx[:, None, :], dpool[:, None, :], axis=1)
        dz2 = da2 * (a2 > 0.0)
        h = self.hidden
        grads["w2"] = dz2.reshape(-1, h).T @ a1.reshape(-1, h)
        grads["b2"] = dz2.sum(axis=(0, 1))
        da1 = dz2 @ self.w2
        dz1 = da1 * (a1 > 0.0)
        grads["w1"] = dz1.reshape(-1, h).T @ batch.reshape(-1, 3)
        grads["b1"] = dz1.sum(axis=(0, 1))
        return float(loss), grads


def accuracy(model: ToyClassifier, batch: np.ndarray, labels: np.ndarray) -> float:
    return float((model.predict_batch(batch) == labels).mean())


def fit(model: ToyClassifier, batch: np.ndarray, labels: np.ndarray,
        epochs: int, lr: float, momentum: float, batch_size: int,
        rng: np.random.Generator, weight_decay: float = 3e-3) -> ToyClassifier:
    """Minibatch gradient descent with momentum on cross-entropy, in place.

    The small L2 penalty on the weight matrices keeps the logit scale (and
    hence the softmax confidence) calibrated instead of saturating.
    """
    n = batch.shape[0]
    velocity = {name: np.zeros_like(arr) for name, arr in model.params().items()}
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            sel = order[start : start + batch_size]
            _, grads = model._loss_grad_weights(batch[sel], labels[sel])
            for name in model._PARAM_NAMES:
                g = grads[name]
                if not name.startswith("b"):
                    g = g + weight_decay * getattr(model, name)
                velocity[name] = momentum * velocity[name] - lr * g
                setattr(model, name, getattr(model, name) + velocity[name])
    return model


def split_dataset(n_samples: int, holdout_frac: float, seed: int):
    """Deterministic shuffled (train_idx, holdout_idx) split."""
    rng = stage_rng(seed, "train/split")
    order = rng.permutation(n_samples)
    n_hold = int(round(n_samples * holdout_frac))
    return order[n_hold:], order[:n_hold]


def train(dataset, hidden: int = 64, epochs: int = 30, lr: float = 0.05,
          momentum: float = 0.9, batch_size: int = 32, seed: int = 0,
          holdout_frac: float = 0.25, weight_decay: float = 3e-3):
    """Train a fresh classifier on a SyntheticDataset.

    Returns (model, report) where report carries train/holdout accuracy and
    the split indices so callers can reuse the same holdout.
    """
    clouds = dataset.points_array()
    labels = dataset.labels_array()
    train_idx, hold_idx = split_dataset(len(labels), holdout_frac, seed)
    model = ToyClassifier(hidden=hidden, classes=len(dataset.class_names),
                          rng=stage_rng(seed, "train/init"))
    fit(model, clouds[train_idx], labels[train_idx], epochs=epochs, lr=lr,
        momentum=momentum, batch_size=batch_size, rng=stage_rng(seed, "train/shuffle"),
        weight_decay=weight_decay)
    report = {
        "train_accuracy": accuracy(model, clouds[train_idx], labels[train_idx]),
        "holdout_accuracy": accuracy(model, clouds[hold_idx], labels[hold_idx]) if len(hold_idx) else float("nan"),
        "train_indices": train_idx.tolist(),
        "holdout_indices": hold_idx.tolist(),
    }
    return model, report


# checkpoints -----------------------------------------------------------

CHECKPOINT_FORMAT = "pointspec-model"
CHECKPOINT_VERSION = 1


def save_model(model: ToyClassifier, path) -> None:
    """JSON weight dump; float repr round-trips exactly."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hidden": model.hidden,
        "classes": model.classes,
        "weights": {name: arr.tolist() for name, arr in model.params().items()},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_model(path) -> ToyClassifier:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    model = ToyClassifier.__new__(ToyClassifier)
    model.hidden = int(payload["hidden"])
    model.classes = int(payload["classes"])
    model.set_params(payload["weights"])
    return model
