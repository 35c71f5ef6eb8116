"""Pure-Python/numpy versions of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, or when
``TOOLLOC_PURE=1`` is set. Both implementations return identical results.
"""

from collections import deque

import numpy as np


def histogram_edges(lo, hi, bins):
    width = (hi - lo) / bins
    return np.array([lo + j * width for j in range(bins + 1)], dtype=np.float64)


def bin_values(values, lo, hi, bins):
    """Bin index = number of interior edges strictly below the value."""
    edges = histogram_edges(lo, hi, bins)
    return np.searchsorted(edges[1:bins], np.asarray(values, dtype=np.float64), side="left")


def otsu_scan(values, lo, hi, bins):
    """Index ``k`` of the best split (bins ``0..k`` vs ``k+1..``), or -1.

    Between-class variance is compared exactly: on bin indices it is
    proportional to ``D**2 / (n0 * n1)`` with ``D = S0*N - S*n0``.
    """
    idx = bin_values(values, lo, hi, bins)
    counts = np.bincount(idx, minlength=bins).tolist()
    total_n = sum(counts)
    total_s = sum(j * c for j, c in enumerate(counts))
    best_k, best_num, best_den = -1, 0, 1
    n0 = s0 = 0
    for k in range(bins):
        n0 += counts[k]
        s0 += k * counts[k]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        d = s0 * total_n - total_s * n0
        num, den = d * d, n0 * n1
        if num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    return best_k


_OFFSETS4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_OFFSETS8 = _OFFSETS4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def label_components(mask, connectivity):
    """Label foreground pixels; labels start at 1 in raster order of first pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    offsets = _OFFSETS8 if connectivity == 8 else _OFFSETS4
    labels = np.zeros((h, w), dtype=np.int32)
    bits = mask.tolist()
    lab = labels.tolist()
    n = 0
    for r in range(h):
        row = bits[r]
        for c in range(w):
            if not row[c] or lab[r][c]:
                continue
            n += 1
            lab[r][c] = n
            queue = deque([(r, c)])
            while queue:
                y, x = queue.popleft()
                for dy, dx in offsets:
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and bits[yy][xx] and not lab[yy][xx]:
                        lab[yy][xx] = n
                        queue.append((yy, xx))
    labels[:] = lab
    return labels, n


def greedy_match(pred_boxes, pred_frames, gt_boxes, gt_frames, iou_thr):
    """Match score-sorted predictions to the best unmatched same-frame GT.

    Returns the matched GT index per prediction (-1 when unmatched).
    """
    by_frame = {}
    for j, f in enumerate(np.asarray(gt_frames).tolist()):
        by_frame.setdefault(f, []).append(j)
    gt = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4).tolist()
    used = [False] * len(gt)
    out = np.full(len(pred_frames), -1, dtype=np.int64)
    for i, (box, f) in enumerate(zip(np.asarray(pred_boxes, dtype=np.float64).reshape(-1, 4).tolist(),
                                     np.asarray(pred_frames).tolist())):
        best_j, best_iou = -1, -1.0
        px0, py0, px1, py1 = box
        parea = (px1 - px0) * (py1 - py0)
        for j in by_frame.get(f, ()):
            if used[j]:
                continue
            gx0, gy0, gx1, gy1 = gt[j]
            iw = min(px1, gx1) - max(px0, gx0)
            ih = min(py1, gy1) - max(py0, gy0)
            if iw <= 0 or ih <= 0:
                v = 0.0
            else:
                inter = iw * ih
                v = inter / (parea + (gx1 - gx0) * (gy1 - gy0) - inter)
            if v > best_iou:
                best_j, best_iou = j, v
        if best_j >= 0 and best_iou >= iou_thr:
            used[best_j] = True
            out[i] = best_j
    return out
