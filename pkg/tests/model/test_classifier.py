import pytest
import numpy as np

from dynlmi.core.vectors import DimensionError, synthetic_dataset
from dynlmi.model import classifier
from dynlmi.model.classifier import CentroidClassifier, Hyperparams, MLPClassifier
from dynlmi.model.kmeans import kmeans


def two_blobs():
    rng = np.random.default_rng(1)
    X = np.concatenate(
        [rng.normal(-5, 0.5, size=(40, 3)), rng.normal(5, 0.5, size=(40, 3))]
    )
    y = np.array([0] * 40 + [1] * 40)
    return X, y


def test_softmax():
    p = classifier.softmax(np.array([[1.0, 1.0], [0.0, np.log(3.0)]]))
    assert p[0].tolist() == pytest.approx([0.5, 0.5])
    assert p[1].tolist() == pytest.approx([0.25, 0.75])


@pytest.mark.parametrize("kind", ["centroid", "mlp"])
def test_train_classifier(kind):
    X, y = two_blobs()
    model, positions = classifier.train_classifier(
        X, y, 2, kind=kind, hyperparams=Hyperparams(hidden=16, epochs=20, batch_size=16), seed=0
    )

    assert model.kind == kind
    assert model.n_classes == 2
    assert model.dimension == 3
    assert np.mean(positions == y) == 1.0
    assert model.train_ops > 0

    p = classifier.predict_proba(model, X[0])
    assert p.shape == (2,)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)


def test_empty_class_gets_no_probability():
    X, y = two_blobs()
    model, positions = classifier.train_classifier(X, y, 3, kind="centroid")

    p = model.predict_proba(X[0])
    assert p[2] == 0.0
    assert 2 not in positions


def test_train_classifier_errors():
    X, y = two_blobs()

    with pytest.raises(ValueError):
        classifier.train_classifier(np.empty((0, 3)), [], 2)

    with pytest.raises(ValueError):
        classifier.train_classifier(X, y, 1)

    with pytest.raises(ValueError):
        classifier.train_classifier(X, y, 2, kind="forest")


def test_dimension_check():
    X, y = two_blobs()
    model, _ = classifier.train_classifier(X, y, 2)

    with pytest.raises(DimensionError):
        model.predict_proba([1.0, 2.0])


def test_remove_output_centroid():
    model = CentroidClassifier(np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]]))

    smaller, remap = classifier.remove_output(model, 1)

    assert smaller.n_classes == 2
    assert remap == {0: 0, 2: 1}
    assert smaller.centroids.tolist() == [[0.0, 0.0], [20.0, 0.0]]
    # the original is untouched
    assert model.n_classes == 3

    # remaining outputs keep their relative order
    q = np.array([18.0, 0.0])
    assert np.argmax(smaller.predict_proba(q)) == remap[int(np.argmax(model.predict_proba(q)))]


def test_remove_output_mlp():
    X, y = two_blobs()
    y3 = np.where(X[:, 0] > 0, 2, 0)
    y3[:5] = 1
    model, _ = classifier.train_classifier(
        X, y3, 3, kind="mlp", hyperparams=Hyperparams(hidden=8, epochs=5), seed=2
    )

    smaller, remap = model.remove_output(1)

    assert smaller.n_classes == 2
    assert remap == {0: 0, 2: 1}
    assert smaller.w_out.shape == (2, 8)
    assert np.array_equal(smaller.w_out[1], model.w_out[2])
    assert np.array_equal(smaller.w_hidden, model.w_hidden)

    # surviving logits are untouched, probabilities renormalize over them
    full = model.logits(X)
    assert np.array_equal(smaller.logits(X), full[:, [0, 2]])

    p = model.predict_proba_batch(X)[:, [0, 2]]
    expected = p / p.sum(axis=1, keepdims=True)
    assert np.allclose(smaller.predict_proba_batch(X), expected, rtol=0, atol=1e-6)


def test_remove_output_errors():
    model = CentroidClassifier(np.array([[0.0, 0.0], [1.0, 1.0]]))

    with pytest.raises(IndexError):
        model.remove_output(2)

    single, _ = model.remove_output(0)
    with pytest.raises(ValueError):
        single.remove_output(0)


def test_mlp_gradients():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(6, 3))
    y = np.array([0, 1, 2, 0, 1, 2])

    model = MLPClassifier.initialize(
        np.zeros(3), np.ones(3), 3, Hyperparams(hidden=5), seed=0
    )
    _, grads = model.loss_and_gradients(X, y)

    eps = 1e-6
    for name in ("w_out", "b_out", "w_hidden", "b_hidden"):
        param = getattr(model, name)
        numeric = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            saved = param[idx]
            param[idx] = saved + eps
            up, _ = model.loss_and_gradients(X, y)
            param[idx] = saved - eps
            down, _ = model.loss_and_gradients(X, y)
            param[idx] = saved
            numeric[idx] = (up - down) / (2 * eps)

        assert np.allclose(grads[name], numeric, atol=1e-5), name


def test_mlp_training_is_deterministic():
    X, y = two_blobs()
    hp = Hyperparams(hidden=8, epochs=3)

    a, _ = classifier.train_classifier(X, y, 2, kind="mlp", hyperparams=hp, seed=5)
    b, _ = classifier.train_classifier(X, y, 2, kind="mlp", hyperparams=hp, seed=5)

    for name, values in a.arrays().items():
        assert np.array_equal(values, b.arrays()[name])


def test_mlp_forward_pass():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(12, 4))
    model = MLPClassifier.initialize(
        rng.normal(size=4), rng.uniform(0.5, 2.0, size=4), 3, Hyperparams(hidden=7), seed=1
    )
    model.b_hidden = rng.normal(size=7)
    model.b_out = rng.normal(size=3)

    expected = np.zeros((12, 3))
    for i, x in enumerate(X):
        z = [(x[j] - model.mean[j]) / model.scale[j] for j in range(4)]
        h = [
            max(0.0, sum(model.w_hidden[u, j] * z[j] for j in range(4)) + model.b_hidden[u])
            for u in range(7)
        ]
        logits = [
            sum(model.w_out[c, u] * h[u] for u in range(7)) + model.b_out[c] for c in range(3)
        ]
        exps = [np.exp(l - max(logits)) for l in logits]
        expected[i] = [e / sum(exps) for e in exps]

    assert np.allclose(model.predict_proba_batch(X), expected, rtol=0, atol=1e-12)
    assert np.allclose(model.predict_proba(X[3]), expected[3], rtol=0, atol=1e-12)


def test_mlp_matches_centroid_accuracy():
    ds = synthetic_dataset(5000, 8, 5, seed=0)
    labels = kmeans(ds.vectors, 5, seed=0).labels

    _, by_centroid = classifier.train_classifier(ds.vectors, labels, 5, kind="centroid")
    _, by_mlp = classifier.train_classifier(ds.vectors, labels, 5, kind="mlp", seed=0)

    centroid_accuracy = np.mean(by_centroid == labels)
    mlp_accuracy = np.mean(by_mlp == labels)
    assert mlp_accuracy >= centroid_accuracy - 0.05
