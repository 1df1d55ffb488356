"""Feature-quality evaluation: k-NN accuracy, linear probe, recall@k.

All metrics operate on tables of unit-norm embeddings, so cosine
similarity is a plain dot product and every evaluator is invariant to a
common positive rescaling of the features it was given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import LabeledDataset
from .errors import ContractError, ShapeError
from .nn import MlpParams, mlp_forward
from .tensor import Tensor


@dataclass
class EmbeddingTable:
    """Unit-norm embedding rows with labels and a provenance tag."""

    embeddings: np.ndarray
    labels: np.ndarray
    source: str = ""
    epoch: int = -1

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2 or len(self.embeddings) < 1:
            raise ContractError(f"embeddings must be a non-empty [N, d] matrix, got {self.embeddings.shape}")
        if len(self.labels) != len(self.embeddings):
            raise ContractError("one label per embedding row required")
        norms = np.linalg.norm(self.embeddings, axis=1)
        if np.abs(norms - 1.0).max() > 1e-10:
            raise ContractError("embedding rows must be unit norm (off by more than 1e-10)")

    @staticmethod
    def from_features(features: np.ndarray, labels: np.ndarray, source: str = "",
                      epoch: int = -1) -> "EmbeddingTable":
        """Build a table from raw features, normalising rows first."""
        features = np.asarray(features, dtype=np.float64).reshape(len(labels), -1)
        norms = np.linalg.norm(features, axis=1, keepdims=True)
        return EmbeddingTable(features / np.maximum(norms, 1e-12), labels, source, epoch)


def embed_dataset(encoder: MlpParams, ds: LabeledDataset, source: str = "",
                  epoch: int = -1, batch_size: int = 512) -> EmbeddingTable:
    """Encode a dataset without building any differentiation graph."""
    params = encoder.detached()
    x = ds.as_matrix()
    chunks = []
    for start in range(0, len(x), batch_size):
        out = mlp_forward(params, Tensor(x[start:start + batch_size]))
        chunks.append(out.data)
    features = np.concatenate(chunks, axis=0)
    if not encoder.spec.final_normalize:
        norms = np.linalg.norm(features, axis=1, keepdims=True)
        features = features / np.maximum(norms, 1e-12)
    return EmbeddingTable(features, ds.labels, source=source, epoch=epoch)


def knn_eval(train: EmbeddingTable, test: EmbeddingTable, k: int = 5) -> float:
    """k-nearest-neighbour accuracy under cosine similarity with majority vote.

    A split vote falls back to the label of the single nearest neighbour.
    Equal similarities rank by train-row index (stable sort), so results
    are deterministic.
    """
    if k < 1:
        raise ContractError("knn_eval: k must be at least 1")
    if k > len(train.labels):
        raise ContractError(f"knn_eval: k={k} exceeds train size {len(train.labels)}")
    if train.embeddings.shape[1] != test.embeddings.shape[1]:
        raise ShapeError("knn_eval: embedding dims disagree")
    sims = test.embeddings @ train.embeddings.T
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    neighbour_labels = train.labels[order]
    correct = 0
    for row, truth in zip(neighbour_labels, test.labels):
        votes = np.bincount(row)
        winners = np.flatnonzero(votes == votes.max())
        pred = winners[0] if len(winners) == 1 else row[0]
        correct += int(pred == truth)
    return correct / len(test.labels)


def linear_probe(train: EmbeddingTable, test: EmbeddingTable, epochs: int = 200,
                 lr: float = 1.0) -> float:
    """Accuracy of a single affine layer trained by full-batch gradient descent.

    Weights start at zero (no randomness), the inputs are the frozen
    unit-norm embeddings, and prediction argmax breaks ties toward the
    lowest class id.
    """
    classes = np.unique(train.labels)
    if len(classes) < 2:
        raise ContractError("linear_probe: need at least 2 classes in the train table")
    col_of = {int(c): i for i, c in enumerate(classes)}
    n, d = train.embeddings.shape
    c = len(classes)
    onehot = np.zeros((n, c))
    onehot[np.arange(n), [col_of[int(y)] for y in train.labels]] = 1.0

    w = Tensor.parameter(np.zeros((d, c)))
    b = Tensor.parameter(np.zeros(c))
    x = Tensor(train.embeddings)
    target = Tensor(onehot)
    for _ in range(epochs):
        logits = T.add(T.matmul(x, w), b)
        logp = T.log_softmax(logits)
        loss = T.mul(T.neg(T.tensor_sum(T.mul(logp, target))), 1.0 / n)
        w.zero_grad()
        b.zero_grad()
        T.backward(loss)
        w.data -= lr * w.grad
        b.data -= lr * b.grad

    scores = test.embeddings @ w.data + b.data
    preds = classes[np.argmax(scores, axis=1)]
    return float(np.mean(preds == test.labels))


def recall_at_k(table: EmbeddingTable, ks: list[int]) -> list[float]:
    """R@k: fraction of rows with a same-class row among their k nearest non-self neighbours."""
    labels = table.labels
    counts = np.bincount(labels)
    singles = np.flatnonzero(counts == 1)
    if len(singles):
        raise ContractError(f"recall_at_k: class {int(singles[0])} has a single member")
    if any(k < 1 for k in ks):
        raise ContractError("recall_at_k: every k must be at least 1")
    n = len(labels)
    sims = table.embeddings @ table.embeddings.T
    np.fill_diagonal(sims, -np.inf)
    order = np.argsort(-sims, axis=1, kind="stable")
    recalls = []
    for k in ks:
        kk = min(k, n - 1)
        hits = (labels[order[:, :kk]] == labels[:, None]).any(axis=1)
        recalls.append(float(hits.mean()))
    return recalls
