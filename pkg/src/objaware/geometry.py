"""Normalized bounding boxes: conversions, IoU/GIoU, the per-pair box loss
and the center-containment test used for grounding accuracy.

Boxes are stored as ``[cx, cy, w, h]`` fractions of the frame. Every function
accepts numpy arrays or torch tensors with a trailing dimension of 4 and
returns the same kind it was given, so the loss path stays differentiable
while the metric path stays in numpy.
"""

import numpy as np
import torch


def _is_torch(x):
    return isinstance(x, torch.Tensor)


def _as_float64(x):
    if _is_torch(x):
        return x.double()
    return np.asarray(x, dtype=np.float64)


def _stack(parts, like):
    if _is_torch(like):
        return torch.stack(parts, dim=-1)
    return np.stack(parts, axis=-1)


def _clip01(x):
    if _is_torch(x):
        return x.clamp(0.0, 1.0)
    return np.clip(x, 0.0, 1.0)


def _maximum(a, b):
    return torch.maximum(a, b) if _is_torch(a) else np.maximum(a, b)


def _minimum(a, b):
    return torch.minimum(a, b) if _is_torch(a) else np.minimum(a, b)


def _unbind(b):
    return tuple(b[..., i] for i in range(4))


def corners_unclamped(boxes):
    """Center format to ``[x1, y1, x2, y2]`` without clamping to the frame."""
    boxes = _as_float64(boxes)
    cx, cy, w, h = _unbind(boxes)
    return _stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], boxes)


def to_corners(boxes):
    """Center format to corner format, clamped to ``[0, 1]``.

    >>> to_corners(np.array([0.25, 0.25, 0.5, 0.5]))
    array([0. , 0. , 0.5, 0.5])
    """
    return _clip01(corners_unclamped(boxes))


def to_center(corners):
    """Corner format ``[x1, y1, x2, y2]`` to center format."""
    corners = _as_float64(corners)
    x1, y1, x2, y2 = _unbind(corners)
    return _stack([(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1], corners)


def _area(c):
    x1, y1, x2, y2 = _unbind(c)
    return (x2 - x1) * (y2 - y1)


def _overlap(a, b):
    ax1, ay1, ax2, ay2 = _unbind(a)
    bx1, by1, bx2, by2 = _unbind(b)
    iw = _minimum(ax2, bx2) - _maximum(ax1, bx1)
    ih = _minimum(ay2, by2) - _maximum(ay1, by1)
    if _is_torch(iw):
        return iw.clamp(min=0.0) * ih.clamp(min=0.0)
    return np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)


def _hull(a, b):
    ax1, ay1, ax2, ay2 = _unbind(a)
    bx1, by1, bx2, by2 = _unbind(b)
    return (_maximum(ax2, bx2) - _minimum(ax1, bx1)) * (_maximum(ay2, by2) - _minimum(ay1, by1))


def _safe_div(num, den):
    # den == 0 only in the zero-area/zero-area case, which is masked out afterwards
    if _is_torch(den):
        return num / torch.where(den > 0, den, torch.ones_like(den))
    return num / np.where(den > 0, den, 1.0)


def iou(a, b):
    """Elementwise IoU of broadcastable center-format boxes."""
    ca, cb = corners_unclamped(a), corners_unclamped(b)
    inter = _overlap(ca, cb)
    union = _area(ca) + _area(cb) - inter
    return _safe_div(inter, union)


def giou(a, b):
    """Elementwise generalized IoU in ``[-1, 1]``.

    Two zero-area boxes give 0. A zero-area box against a positive-area box
    uses the usual formula with IoU = 0.
    """
    ca, cb = corners_unclamped(a), corners_unclamped(b)
    inter = _overlap(ca, cb)
    union = _area(ca) + _area(cb) - inter
    hull = _hull(ca, cb)
    value = _safe_div(inter, union) - _safe_div(hull - union, hull)
    degenerate = (union <= 0) | (hull <= 0)
    if _is_torch(value):
        return torch.where(degenerate, torch.zeros_like(value), value)
    value = np.where(degenerate, 0.0, value)
    return value if value.ndim else float(value)


def pairwise_iou(a, b):
    """``(N, 4) x (M, 4) -> (N, M)`` IoU matrix."""
    a, b = _as_float64(a), _as_float64(b)
    return iou(a[:, None, :], b[None, :, :])


def box_pair_loss(gt, pred):
    """GIoU loss plus L1 distance over ``(cx, cy, w, h)``; zero iff equal."""
    gt, pred = _as_float64(gt), _as_float64(pred)
    diff = gt - pred
    l1 = diff.abs().sum(-1) if _is_torch(diff) else np.abs(diff).sum(-1)
    return (1.0 - giou(gt, pred)) + l1


def center_inside(pred, gt):
    """True where the center of ``pred`` lies in the closed rectangle of ``gt``."""
    pred, gt = _as_float64(pred), _as_float64(gt)
    cx, cy = pred[..., 0], pred[..., 1]
    x1, y1, x2, y2 = _unbind(corners_unclamped(gt))
    inside = (cx >= x1) & (cx <= x2) & (cy >= y1) & (cy <= y2)
    if _is_torch(inside):
        return inside
    return inside if inside.ndim else bool(inside)
