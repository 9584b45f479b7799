"""Scalar losses, each returning ``(value, gradient w.r.t. the prediction)``.

Values are accumulated in float64; gradients come back in the prediction's dtype.
"""
import numpy as np
from scipy.special import expit, log_softmax, softmax


def mse(x, x_hat):
    """Mean over every element of (x_hat - x)^2."""
    diff = np.asarray(x_hat, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    grad = 2.0 * diff / diff.size
    return float(np.mean(diff ** 2)), grad.astype(np.asarray(x_hat).dtype)


def squared_error(x, x_hat):
    """Per-example squared L2 error, averaged over the batch axis."""
    diff = np.asarray(x_hat, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    n = diff.shape[0]
    return float(np.sum(diff ** 2) / n), (2.0 * diff / n).astype(np.asarray(x_hat).dtype)


def bce_logit(logits, target: float):
    """Binary cross-entropy of sigmoid(logits) against a constant target, batch mean."""
    z = np.asarray(logits, dtype=np.float64)
    value = np.mean(np.logaddexp(0.0, z) - target * z)
    grad = (expit(z) - target) / z.size
    return float(value), grad.astype(np.asarray(logits).dtype)


def cross_entropy(logits, labels):
    """Softmax cross-entropy with integer labels, batch mean."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = z.shape[0]
    if labels.shape != (n,) or labels.min() < 0 or labels.max() >= z.shape[1]:
        raise ValueError("labels must be one in-range class index per row")
    rows = np.arange(n)
    value = -np.mean(log_softmax(z, axis=1)[rows, labels])
    grad = softmax(z, axis=1)
    grad[rows, labels] -= 1.0
    return float(value), (grad / n).astype(np.asarray(logits).dtype)
