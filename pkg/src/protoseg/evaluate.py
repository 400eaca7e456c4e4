"""Segmentation metrics: confusion accumulation, mIoU, and optimal
cluster-to-class matching for unsupervised predictions.

The confusion matrix counts ground-truth rows against predicted columns;
pixels whose ground truth equals `ignore_label` (255 by the usual dataset
convention) are skipped. Plain mIoU averages TP / (TP + FP + FN) over
classes present in ground truth or prediction. For anonymous cluster
predictions, clusters are matched to classes by minimum-cost assignment
with cost = -intersection; unmatched clusters are pooled into a sink
column that counts as error against every class.

The assignment solver is an O(n^3) shortest-augmenting-path method with
row/column potentials, run on the padded square matrix. Among cost ties
the result is canonicalized to the lexicographically smallest
row-to-column mapping (unmatched sorts after every real column), so
outputs are reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IGNORE_LABEL = 255


class EvaluationError(ValueError):
    pass


class ConfusionMatrix:
    """Ground-truth-by-prediction pixel counts."""

    def __init__(self, num_gt: int = 0, num_pred: int | None = None,
                 counts: np.ndarray | None = None, ignore_label: int = IGNORE_LABEL):
        if counts is not None:
            self.counts = np.array(counts, dtype=np.int64)
            if self.counts.ndim != 2 or (self.counts < 0).any():
                raise EvaluationError("counts must be a non-negative 2-D matrix")
        else:
            if num_pred is None:
                num_pred = num_gt
            self.counts = np.zeros((num_gt, num_pred), dtype=np.int64)
        self.ignore_label = ignore_label

    @property
    def num_gt(self) -> int:
        return self.counts.shape[0]

    @property
    def num_pred(self) -> int:
        return self.counts.shape[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merged(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.counts.shape != other.counts.shape:
            raise EvaluationError("cannot merge confusion matrices of different shapes")
        return ConfusionMatrix(counts=self.counts + other.counts,
                               ignore_label=self.ignore_label)

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix)
                and np.array_equal(self.counts, other.counts)
                and self.ignore_label == other.ignore_label)


def accumulate(cm: ConfusionMatrix, gt, pred) -> ConfusionMatrix:
    """Add per-pixel (gt, pred) counts into `cm` (in place) and return it."""
    gt = np.asarray(getattr(gt, "labels", gt))
    pred = np.asarray(getattr(pred, "labels", pred))
    if gt.shape != pred.shape:
        raise EvaluationError(
            f"resolution mismatch: gt {gt.shape} vs pred {pred.shape}"
        )
    keep = gt.reshape(-1) != cm.ignore_label
    g = gt.reshape(-1)[keep].astype(np.int64)
    p = pred.reshape(-1)[keep].astype(np.int64)
    if g.size == 0:
        return cm
    if g.min() < 0 or g.max() >= cm.num_gt:
        raise EvaluationError(
            f"ground-truth label outside [0, {cm.num_gt}): {g.min()}..{g.max()}"
        )
    if p.min() < 0 or p.max() >= cm.num_pred:
        raise EvaluationError(
            f"predicted label outside [0, {cm.num_pred}): {p.min()}..{p.max()}"
        )
    flat = np.bincount(g * cm.num_pred + p, minlength=cm.num_gt * cm.num_pred)
    cm.counts += flat.reshape(cm.num_gt, cm.num_pred)
    return cm


def _iou_over_classes(matrix: np.ndarray, num_classes: int) -> tuple[np.ndarray, float]:
    """Per-class IoU over the first `num_classes` columns of `matrix`.

    Rows are ground truth. Extra columns (e.g. the unmatched-cluster sink)
    only contribute false negatives. Classes absent from both axes get NaN
    and are excluded from the mean.
    """
    tp = np.diagonal(matrix[:, :num_classes]).astype(np.float64)
    fn = matrix.sum(axis=1).astype(np.float64) - tp
    fp = matrix[:, :num_classes].sum(axis=0).astype(np.float64) - tp
    denom = tp + fp + fn
    present = denom > 0
    if not present.any():
        raise EvaluationError("every class is empty in both gt and prediction")
    ious = np.full(num_classes, np.nan)
    ious[present] = tp[present] / denom[present]
    return ious, float(np.nanmean(ious))


def miou(cm: ConfusionMatrix) -> tuple[np.ndarray, float]:
    """Per-class IoU and its mean over classes present in gt or prediction."""
    if cm.num_gt != cm.num_pred:
        raise EvaluationError(
            f"mIoU needs a square matrix, got {cm.num_gt}x{cm.num_pred}; "
            "match clusters first"
        )
    return _iou_over_classes(cm.counts, cm.num_gt)


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EvaluationError("confusion matrix is empty")
    return float(np.diagonal(cm.counts).sum() / total)


@dataclass(frozen=True)
class AssignmentResult:
    """Injective minimum-cost pairing between cost-matrix rows and columns."""

    mapping: dict[int, int] = field(default_factory=dict)  # row -> column
    total_cost: float = 0.0


def _solve_square(cost: np.ndarray) -> np.ndarray:
    """Column assigned to each row of a square matrix, by augmenting paths.

    Column index n acts as the virtual start of each alternating path;
    potentials keep reduced costs non-negative so every augmentation is a
    shortest path.
    """
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n + 1)
    match = np.full(n + 1, -1, dtype=np.intp)  # match[j] = row sitting on column j
    way = np.full(n, -1, dtype=np.intp)  # predecessor column on the path
    for i in range(n):
        match[n] = i
        j0 = n
        minv = np.full(n, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            cur = cost[i0] - u[i0] - v[:n]
            unused = ~used[:n]
            improve = unused & (cur < minv)
            minv[improve] = cur[improve]
            way[improve] = j0
            masked = np.where(unused, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[match[used]] += delta
            v[used] -= delta
            minv[unused] -= delta
            j0 = j1
            if match[j0] == -1:
                break
        while j0 != n:
            j_prev = way[j0]
            match[j0] = match[j_prev]
            j0 = j_prev
    cols = np.full(n, -1, dtype=np.intp)
    for j in range(n):
        if match[j] >= 0:
            cols[match[j]] = j
    return cols


def _assignment_value(cost: np.ndarray) -> float:
    cols = _solve_square(cost)
    return float(cost[np.arange(cost.shape[0]), cols].sum())


def hungarian(cost: np.ndarray) -> AssignmentResult:
    """Minimum-total-cost injective assignment of min(n, m) row/col pairs.

    Rectangular inputs are padded square with the maximum entry, which
    leaves the optimum over real pairs unchanged. Ties between optimal
    assignments resolve to the lexicographically smallest mapping:
    scanning rows upward, each takes the smallest column that still admits
    an optimal completion, with "unmatched" ordered after all columns.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise EvaluationError(f"cost must be a non-empty 2-D matrix, got {cost.shape}")
    if not np.isfinite(cost).all():
        raise EvaluationError("cost matrix contains non-finite entries")
    n, m = cost.shape
    size = max(n, m)
    padded = np.full((size, size), float(cost.max()))
    padded[:n, :m] = cost

    total = _assignment_value(padded)
    tol = 1e-9 * (1.0 + abs(total))

    rows_left = list(range(size))
    cols_left = list(range(size))
    mapping: dict[int, int] = {}
    residual = total
    canonical = True
    for row in range(n):
        real = [c for c in cols_left if c < m]
        dummy = [c for c in cols_left if c >= m]
        fixed = False
        for col in real + dummy[:1]:  # dummy columns are interchangeable
            sub_rows = [r for r in rows_left if r != row]
            sub_cols = [c for c in cols_left if c != col]
            sub_total = (
                _assignment_value(padded[np.ix_(sub_rows, sub_cols)])
                if sub_rows
                else 0.0
            )
            if abs(padded[row, col] + sub_total - residual) <= tol:
                mapping[row] = col
                residual -= padded[row, col]
                rows_left.remove(row)
                cols_left.remove(col)
                fixed = True
                break
        if not fixed:  # numerical corner: keep the raw solve instead
            canonical = False
            break
    if not canonical:
        cols = _solve_square(padded)
        mapping = {r: int(cols[r]) for r in range(n)}

    real_mapping = {r: c for r, c in mapping.items() if c < m}
    real_total = float(sum(cost[r, c] for r, c in real_mapping.items()))
    return AssignmentResult(mapping=real_mapping, total_cost=real_total)


def unsupervised_miou(
    cm: ConfusionMatrix, objective: str = "intersection"
) -> tuple[dict[int, int], float]:
    """Match clusters to classes, then score mIoU on the remapped matrix.

    Matching maximizes total intersection by default (cost =
    -intersection); `objective="iou"` instead maximizes the summed
    per-pair IoU. Clusters without a class partner are pooled into a sink
    column where they count as false negatives for every ground-truth
    class. Returns the cluster -> class mapping and the mean IoU.
    """
    counts = cm.counts
    if counts.size == 0:
        raise EvaluationError("confusion matrix is empty")
    num_classes, num_clusters = counts.shape
    if objective == "intersection":
        cost = -counts.astype(np.float64)
    elif objective == "iou":
        inter = counts.astype(np.float64)
        union = counts.sum(axis=1, keepdims=True) + counts.sum(axis=0, keepdims=True) - inter
        cost = -np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
    else:
        raise EvaluationError(f"unknown matching objective {objective!r}")
    result = hungarian(cost)
    cluster_to_class = {c: g for g, c in result.mapping.items()}
    remapped = np.zeros((num_classes, num_classes + 1), dtype=np.int64)
    for cluster in range(num_clusters):
        target = cluster_to_class.get(cluster, num_classes)
        remapped[:, target] += counts[:, cluster]
    _, mean = _iou_over_classes(remapped, num_classes)
    return cluster_to_class, mean
