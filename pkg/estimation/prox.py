"""Proximal maps of the l1 and nuclear penalties."""
import numpy as np

from lsvar.exceptions import InvalidInputError


def soft_threshold(x, threshold):
    """sign(x) * max(|x| - threshold, 0), elementwise."""
    if np.any(np.asarray(threshold) < 0):
        raise InvalidInputError(f"Threshold must be nonnegative, got {threshold}")
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0)


def singular_value_threshold(M, threshold):
    """Shrink every singular value of M by `threshold`, flooring at zero."""
    if threshold < 0:
        raise InvalidInputError(f"Threshold must be nonnegative, got {threshold}")
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("Singular value thresholding needs a finite matrix")
    if threshold == 0:
        return M.copy()
    U, d, Vt = np.linalg.svd(M, full_matrices=False)
    shrunk = np.maximum(d - threshold, 0)
    keep = shrunk > 0
    return (U[:, keep] * shrunk[keep]) @ Vt[keep]
