"""Desk-scale differentiable softmax classifiers on synthetic blob data, with
closed-form cross-entropy training and output-statistics measurement."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, RngStream


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) int
    n_classes: int

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i}" for i in range(self.dim)] + ["label"])
            for x, y in zip(self.inputs, self.labels):
                writer.writerow([repr(float(v)) for v in x] + [int(y)])

    @classmethod
    def load_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in row[:-1]] for row in rows[1:]])
        labels = np.array([int(row[-1]) for row in rows[1:]], dtype=np.int64)
        return cls(inputs=data, labels=labels, n_classes=int(labels.max()) + 1)


@dataclass
class Model:
    """Linear-softmax or one-hidden-layer tanh classifier."""

    kind: str  # "linear" | "mlp"
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        key = "W" if self.kind == "linear" else "W1"
        return self.weights[key].shape[1]

    @property
    def n_classes(self) -> int:
        key = "W" if self.kind == "linear" else "W2"
        return self.weights[key].shape[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.kind == "linear":
            z = x @ self.weights["W"].T + self.weights["b"]
        else:
            h = np.tanh(x @ self.weights["W1"].T + self.weights["b1"])
            z = h @ self.weights["W2"].T + self.weights["b2"]
        return z

    def save_json(self, path) -> None:
        doc = {
            "kind": self.kind,
            "d": self.dim,
            "C": self.n_classes,
            "weights": {k: v.tolist() for k, v in self.weights.items()},
        }
        if self.kind == "mlp":
            doc["h"] = self.weights["W1"].shape[0]
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load_json(cls, path) -> "Model":
        with open(path) as fh:
            doc = json.load(fh)
        weights = {k: np.asarray(v, dtype=np.float64) for k, v in doc["weights"].items()}
        return cls(kind=doc["kind"], weights=weights)

    @classmethod
    def from_document(cls, doc: dict) -> "Model":
        weights = {k: np.asarray(v, dtype=np.float64) for k, v in doc["weights"].items()}
        return cls(kind=doc["kind"], weights=weights)

    def to_document(self) -> dict:
        doc = {
            "kind": self.kind,
            "d": self.dim,
            "C": self.n_classes,
            "weights": {k: v.tolist() for k, v in self.weights.items()},
        }
        if self.kind == "mlp":
            doc["h"] = self.weights["W1"].shape[0]
        return doc


def init_model(kind: str, d: int, n_classes: int, rng: RngStream, hidden: int = 64) -> Model:
    if kind == "linear":
        weights = {
            "W": 0.01 * rng.standard_normal((n_classes, d)),
            "b": np.zeros(n_classes),
        }
    elif kind == "mlp":
        weights = {
            "W1": rng.standard_normal((hidden, d)) / np.sqrt(d),
            "b1": np.zeros(hidden),
            "W2": rng.standard_normal((n_classes, hidden)) / np.sqrt(hidden),
            "b2": np.zeros(n_classes),
        }
    else:
        raise DomainError(f"unknown model kind {kind!r}")
    return Model(kind=kind, weights=weights)


def gen_blobs(d: int, n_classes: int, n_per_class: int, spread: float, rng: RngStream) -> Dataset:
    """Gaussian clusters around unit-norm random centers, rescaled into [0,1]^d."""
    if d < 2 or n_classes < 2 or spread <= 0:
        raise DomainError("need d >= 2, n_classes >= 2, spread > 0")
    centers = []
    for _ in range(n_classes):
        # resample centers that land too close to an existing one, so tiny
        # class counts in low dimension still give distinct clusters
        for _attempt in range(1000):
            c = rng.standard_normal(d)
            c /= np.linalg.norm(c)
            if all(np.linalg.norm(c - prev) > 0.8 for prev in centers):
                break
        centers.append(c)
    xs, ys = [], []
    for label, center in enumerate(centers):
        pts = center + spread * rng.standard_normal((n_per_class, d))
        xs.append(pts)
        ys.append(np.full(n_per_class, label, dtype=np.int64))
    inputs = np.concatenate(xs)
    # affine map [-2, 2] -> [0, 1], then clip
    inputs = np.clip(0.25 * inputs + 0.5, 0.0, 1.0)
    return Dataset(inputs=inputs, labels=np.concatenate(ys), n_classes=n_classes)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(model: Model, x: np.ndarray) -> np.ndarray:
    """Clean softmax output for a single input; positive, sums to 1."""
    return softmax(model.logits(x))[0]


def predict_batch(model: Model, xs: np.ndarray) -> np.ndarray:
    return softmax(model.logits(xs))


def cross_entropy_loss(model: Model, data: Dataset) -> float:
    p = predict_batch(model, data.inputs)
    return float(-np.mean(np.log(p[np.arange(data.n), data.labels] + 1e-30)))


def loss_gradients(model: Model, data: Dataset) -> dict[str, np.ndarray]:
    """Closed-form full-batch gradient of the mean cross-entropy loss."""
    x, y = data.inputs, data.labels
    n = data.n
    if model.kind == "linear":
        p = softmax(x @ model.weights["W"].T + model.weights["b"])
        dz = p
        dz[np.arange(n), y] -= 1.0
        dz /= n
        return {"W": dz.T @ x, "b": dz.sum(axis=0)}
    h_pre = x @ model.weights["W1"].T + model.weights["b1"]
    h = np.tanh(h_pre)
    p = softmax(h @ model.weights["W2"].T + model.weights["b2"])
    dz = p
    dz[np.arange(n), y] -= 1.0
    dz /= n
    dh = (dz @ model.weights["W2"]) * (1.0 - h * h)
    return {
        "W1": dh.T @ x,
        "b1": dh.sum(axis=0),
        "W2": dz.T @ h,
        "b2": dz.sum(axis=0),
    }


def train(model: Model, data: Dataset, lr: float, epochs: int, rng: RngStream | None = None) -> Model:
    """Full-batch gradient descent on the cross-entropy loss.

    Returns a new trained model; the input model is left untouched.
    """
    weights = {k: v.copy() for k, v in model.weights.items()}
    out = Model(kind=model.kind, weights=weights)
    for _ in range(epochs):
        if lr == 0:
            break
        grads = loss_gradients(out, data)
        for key, g in grads.items():
            weights[key] -= lr * g
        loss = cross_entropy_loss(out, data)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss}")
    return out


def accuracy(model: Model, data: Dataset) -> float:
    pred = predict_batch(model, data.inputs).argmax(axis=1)
    return float(np.mean(pred == data.labels))


def estimate_lipschitz(model: Model, region_samples: int, rng: RngStream) -> float:
    """Empirical max of ||F(x)-F(y)|| / ||x-y|| over sampled pairs in [0,1]^d.

    A lower bound on the true constant; used only inside SNR upper bounds.
    """
    if region_samples < 2:
        raise DomainError("need at least 2 samples")
    xs = rng.uniform(size=(region_samples, model.dim))
    probs = predict_batch(model, xs)
    best = 0.0
    for i in range(region_samples):
        dx = np.linalg.norm(xs[i + 1:] - xs[i], axis=1)
        df = np.linalg.norm(probs[i + 1:] - probs[i], axis=1)
        mask = dx > 0
        if mask.any():
            best = max(best, float((df[mask] / dx[mask]).max()))
    return best


@dataclass(frozen=True)
class OutputStats:
    acc: float
    mean_ft: float
    mean_dft: float
    median_dft: float
    std_dft: float
    beta: float


def output_stats(model: Model, data: Dataset, beta: float, trials: int, rng: RngStream) -> OutputStats:
    """Probe-pair output variation statistics, non-top-1 classes only.

    For each trial: a dataset point x, a random unit direction u and a random
    class t other than the clean top-1; records |F_t(x-bu) - F_t(x+bu)| and
    F_t(x).
    """
    if beta <= 0 or trials < 1:
        raise DomainError("need beta > 0 and trials >= 1")
    dfts = np.empty(trials)
    fts = np.empty(trials)
    for i in range(trials):
        idx = int(rng.integers(0, data.n))
        x = data.inputs[idx]
        u = rng.standard_normal(data.dim)
        u /= np.linalg.norm(u)
        p = predict(model, x)
        top = int(np.argmax(p))
        others = [c for c in range(data.n_classes) if c != top]
        t = others[int(rng.integers(0, len(others)))]
        f_minus = predict(model, x - beta * u)[t]
        f_plus = predict(model, x + beta * u)[t]
        dfts[i] = abs(f_minus - f_plus)
        fts[i] = p[t]
    return OutputStats(
        acc=accuracy(model, data),
        mean_ft=float(fts.mean()),
        mean_dft=float(dfts.mean()),
        median_dft=float(np.median(dfts)),
        std_dft=float(dfts.std()),
        beta=beta,
    )
