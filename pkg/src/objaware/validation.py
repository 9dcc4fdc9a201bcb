"""Input checks shared by the estimator, the metrics and the CLI.

Each helper returns a cleaned array or raises ``ValueError`` with the name of
the offending argument.
"""

import numpy as np


def check_frames(frames, name="frames", allow_single=True):
    """Clip stack ``(N, T, H, W, 3)`` as float64 in ``[0, 1]``.

    uint8 input is scaled by 1/255. A single clip ``(T, H, W, 3)`` is promoted
    to a batch of one when ``allow_single`` is set.
    """
    arr = np.asarray(frames)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    elif not np.issubdtype(arr.dtype, np.number):
        raise ValueError(f"{name}: expected numeric frames, got dtype {arr.dtype}")
    else:
        arr = arr.astype(np.float64)
    if allow_single and arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5 or arr.shape[-1] != 3:
        raise ValueError(f"{name}: expected shape (N, T, H, W, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    if arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise ValueError(f"{name}: float frames must lie in [0, 1]")
    return arr


def check_boxes(boxes, name="boxes"):
    """``(n, 4)`` center-format boxes with non-negative sizes."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 4)
    if arr.ndim == 1:
        arr = arr[None]
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"{name}: expected shape (n, 4), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    if (arr[:, 2:] < 0).any():
        raise ValueError(f"{name}: negative width or height")
    return arr


def check_embeddings(x, name="embeddings", dim=None, nonzero=True):
    """2-D finite embedding matrix, optionally of a fixed width."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{name}: expected width {dim}, got {arr.shape[1]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    if nonzero and len(arr) and (np.linalg.norm(arr, axis=1) == 0).any():
        raise ValueError(f"{name}: zero-norm row")
    return arr


def check_cost_matrix(cost, name="cost"):
    """Finite 2-D cost matrix with no more rows than columns."""
    arr = np.asarray(cost, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] > arr.shape[1]:
        raise ValueError(f"{name}: {arr.shape[0]} rows exceed {arr.shape[1]} columns; transpose it")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite entries")
    return arr


def check_relevance(rel, shape=None, binary=False, name="relevance"):
    """Relevance grid with grades in ``[0, 1]`` (0/1 only when ``binary``)."""
    arr = np.asarray(rel, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name}: shape {arr.shape} does not match similarities {tuple(shape)}")
    if not np.isfinite(arr).all() or arr.min(initial=0.0) < 0 or arr.max(initial=0.0) > 1:
        raise ValueError(f"{name}: grades must lie in [0, 1]")
    if binary and not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError(f"{name}: expected binary relevance")
    return arr
