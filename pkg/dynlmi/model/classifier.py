import logging
import numpy as np

from collections import namedtuple
from scipy.spatial.distance import cdist
from typing import Optional

from dynlmi.core.vectors import DimensionError, as_components


log = logging.getLogger(__name__)

Hyperparams = namedtuple(
    "Hyperparams",
    field_names=["hidden", "epochs", "batch_size", "learning_rate", "momentum"],
    defaults=[128, 30, 256, 0.01, 0.9],
)

KINDS = ("centroid", "mlp")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    exps = np.exp(z)
    return exps / np.sum(exps, axis=-1, keepdims=True)


class ClassifierModel:
    """A trained categorical classifier mapping a vector to per-child probabilities.

    Models are immutable once trained; `remove_output` returns a new model.
    """

    kind = None

    def __init__(self, n_classes: int, dimension: int, seed: int):
        assert n_classes >= 1

        self.n_classes = n_classes
        self.dimension = dimension
        self.seed = seed
        # distance-equivalent operations spent training, for the build cost proxy
        self.train_ops = 0

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dimension:
            raise DimensionError(
                f"input dimension {X.shape[1]} != model dimension {self.dimension}"
            )
        return X

    def logits(self, X) -> np.ndarray:
        raise NotImplementedError()

    def predict_proba_batch(self, X) -> np.ndarray:
        logits = self.logits(self._check(X))
        with np.errstate(invalid="ignore"):
            return softmax(logits)

    def predict_proba(self, v) -> np.ndarray:
        v = as_components(v)
        if v.ndim != 1:
            raise DimensionError(f"expected a single vector, got shape {v.shape}")
        return self.predict_proba_batch(v)[0]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(self._check(X)), axis=1)

    def remove_output(self, class_index: int) -> tuple["ClassifierModel", dict]:
        if self.n_classes < 2:
            raise ValueError("cannot remove the only output of a model")
        if not 0 <= class_index < self.n_classes:
            raise IndexError(f"class {class_index} out of range [0, {self.n_classes})")

        remap = {
            old: (old if old < class_index else old - 1)
            for old in range(self.n_classes)
            if old != class_index
        }
        return self._without(class_index), remap

    def _without(self, class_index: int) -> "ClassifierModel":
        raise NotImplementedError()

    def arrays(self) -> dict[str, np.ndarray]:
        """Named parameter arrays, in a fixed order, for persistence."""
        raise NotImplementedError()


class CentroidClassifier(ClassifierModel):
    """Softmax over negated distances to one centroid per class.

    A class with no training objects gets an infinitely distant centroid and
    so never receives probability.
    """

    kind = "centroid"

    def __init__(self, centroids: np.ndarray, seed: int = 0):
        centroids = np.asarray(centroids, dtype=np.float64)
        super().__init__(centroids.shape[0], centroids.shape[1], seed)
        self.centroids = centroids

    def logits(self, X) -> np.ndarray:
        return -np.sqrt(cdist(X, self.centroids, "sqeuclidean"))

    def _without(self, class_index):
        return CentroidClassifier(
            np.delete(self.centroids, class_index, axis=0), seed=self.seed
        )

    def arrays(self):
        return {"centroids": self.centroids}


class MLPClassifier(ClassifierModel):
    """One hidden ReLU layer, softmax output.

    Inputs are standardized with the training mean and scale before the first
    layer. `w_out` holds one row per output class.
    """

    kind = "mlp"

    def __init__(
        self,
        mean: np.ndarray,
        scale: np.ndarray,
        w_hidden: np.ndarray,
        b_hidden: np.ndarray,
        w_out: np.ndarray,
        b_out: np.ndarray,
        hyperparams: Hyperparams = Hyperparams(),
        seed: int = 0,
    ):
        super().__init__(w_out.shape[0], w_hidden.shape[1], seed)

        self.mean = mean
        self.scale = scale
        self.w_hidden = w_hidden
        self.b_hidden = b_hidden
        self.w_out = w_out
        self.b_out = b_out
        self.hyperparams = hyperparams

    @classmethod
    def initialize(
        cls,
        mean: np.ndarray,
        scale: np.ndarray,
        n_classes: int,
        hyperparams: Hyperparams,
        seed: int,
    ) -> "MLPClassifier":
        rng = np.random.default_rng(seed)
        d = len(mean)
        h = hyperparams.hidden

        def glorot(fan_out, fan_in):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_out, fan_in))

        return cls(
            mean=mean,
            scale=scale,
            w_hidden=glorot(h, d),
            b_hidden=np.zeros(h),
            w_out=glorot(n_classes, h),
            b_out=np.zeros(n_classes),
            hyperparams=hyperparams,
            seed=seed,
        )

    def hidden(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean) / self.scale
        return np.maximum(0.0, Z @ self.w_hidden.T + self.b_hidden)

    def logits(self, X) -> np.ndarray:
        return self.hidden(X) @ self.w_out.T + self.b_out

    def loss_and_gradients(self, X, y) -> tuple[float, dict[str, np.ndarray]]:
        """Mean softmax cross-entropy over the batch and its parameter gradients."""
        X = self._check(X)
        y = np.asarray(y)
        n = X.shape[0]

        Z = (X - self.mean) / self.scale
        pre = Z @ self.w_hidden.T + self.b_hidden
        H = np.maximum(0.0, pre)
        P = softmax(H @ self.w_out.T + self.b_out)

        loss = float(-np.mean(np.log(np.maximum(P[np.arange(n), y], 1e-300))))

        error = P.copy()
        error[np.arange(n), y] -= 1.0
        error /= n

        d_hidden = error @ self.w_out
        d_hidden[pre <= 0] = 0.0

        return loss, {
            "w_out": error.T @ H,
            "b_out": error.sum(axis=0),
            "w_hidden": d_hidden.T @ Z,
            "b_hidden": d_hidden.sum(axis=0),
        }

    def fit(self, X: np.ndarray, y: np.ndarray):
        """Mini-batch SGD with momentum. Mutates in place, only used while training."""
        hp = self.hyperparams
        rng = np.random.default_rng(self.seed + 1)
        params = ("w_hidden", "b_hidden", "w_out", "b_out")
        velocity = {p: np.zeros_like(getattr(self, p)) for p in params}

        n = X.shape[0]
        for epoch in range(hp.epochs):
            order = rng.permutation(n)
            for start in range(0, n, hp.batch_size):
                batch = order[start : start + hp.batch_size]
                _, grads = self.loss_and_gradients(X[batch], y[batch])

                for p in params:
                    velocity[p] = hp.momentum * velocity[p] - hp.learning_rate * grads[p]
                    setattr(self, p, getattr(self, p) + velocity[p])

        # forward plus backward is roughly three passes over both weight matrices,
        # counted in units of one d-dimensional distance
        flops = 3 * hp.hidden * (self.dimension + self.n_classes)
        self.train_ops += hp.epochs * n * flops // self.dimension

    def _without(self, class_index):
        return MLPClassifier(
            mean=self.mean,
            scale=self.scale,
            w_hidden=self.w_hidden,
            b_hidden=self.b_hidden,
            w_out=np.delete(self.w_out, class_index, axis=0),
            b_out=np.delete(self.b_out, class_index),
            hyperparams=self.hyperparams,
            seed=self.seed,
        )

    def arrays(self):
        return {
            "mean": self.mean,
            "scale": self.scale,
            "w_hidden": self.w_hidden,
            "b_hidden": self.b_hidden,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }


def train_classifier(
    objects,
    labels,
    n_classes: int,
    kind: str = "centroid",
    hyperparams: Optional[Hyperparams] = None,
    seed: int = 0,
) -> tuple[ClassifierModel, np.ndarray]:
    """Train a classifier on k-means labels.

    Returns the model and each training object's predicted position.
    """
    X = np.asarray(objects, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)

    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot train a classifier on an empty object list")
    if labels.shape != (X.shape[0],):
        raise ValueError(f"expected {X.shape[0]} labels, got {labels.shape}")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind: {kind}")

    n, d = X.shape

    if kind == "centroid":
        centroids = np.full((n_classes, d), np.inf)
        for j in np.unique(labels):
            centroids[j] = X[labels == j].mean(axis=0)
        model = CentroidClassifier(centroids, seed=seed)
    else:
        hyperparams = hyperparams or Hyperparams()
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        model = MLPClassifier.initialize(
            X.mean(axis=0), scale, n_classes, hyperparams, seed
        )
        if n_classes > 1:
            model.fit(X, labels)

    positions = model.predict(X)
    model.train_ops += n * n_classes

    log.debug(
        "trained %s classifier: %d objects, %d classes, accuracy %.3f",
        kind,
        n,
        n_classes,
        np.mean(positions == labels),
    )

    return model, positions


def predict_proba(model: ClassifierModel, v) -> np.ndarray:
    return model.predict_proba(v)


def remove_output(model: ClassifierModel, class_index: int) -> tuple[ClassifierModel, dict]:
    return model.remove_output(class_index)
