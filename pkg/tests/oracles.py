"""Brute-force reference implementations used only by the tests.

Each oracle takes a deliberately different route from the library code:
pixel sets instead of interval arithmetic, exact fractions instead of
cumulative sums, recursion instead of union-find, explicit inverses
instead of Cholesky solves.
"""

import sys
from fractions import Fraction

import numpy as np


def pixel_iou(a, b):
    """IoU of integer half-open boxes by counting grid pixels."""
    pa = {(x, y) for x in range(int(a[0]), int(a[2])) for y in range(int(a[1]), int(a[3]))}
    pb = {(x, y) for x in range(int(b[0]), int(b[2])) for y in range(int(b[1]), int(b[3]))}
    return Fraction(len(pa & pb), len(pa | pb))


def plain_iou(a, b):
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    if inter == 0:
        return 0.0
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def otsu_oracle(values, bins=256):
    """Exhaustive scan over the ``bins`` candidate edges with exact between-class variance.

    Pixel intensities are represented by their bin index (bin centers are an
    affine function of it, which leaves the argmax unchanged).
    """
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    width = (hi - lo) / bins
    edges = [lo + j * width for j in range(bins + 1)]
    interior = np.array(edges[1:bins])
    idx = (v[:, None] > interior[None, :]).sum(axis=1)
    n = len(v)
    best, best_k = Fraction(-1), None
    for k in range(bins):
        fg = v > edges[k + 1]
        n1 = int(fg.sum())
        n0 = n - n1
        if n0 == 0 or n1 == 0:
            var = Fraction(0)
        else:
            mu0 = Fraction(int(idx[~fg].sum()), n0)
            mu1 = Fraction(int(idx[fg].sum()), n1)
            var = Fraction(n0, n) * Fraction(n1, n) * (mu0 - mu1) ** 2
        if var > best:
            best, best_k = var, k
    return edges[best_k + 1]


def flood_fill_components(mask, connectivity):
    """Components as frozensets of (row, col), found by recursive flood fill."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    nbrs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        nbrs += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * h * w + 100))

    def fill(r, c, acc):
        seen[r, c] = True
        acc.add((r, c))
        for dr, dc in nbrs:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                fill(rr, cc, acc)

    comps = []
    try:
        for r in range(h):
            for c in range(w):
                if mask[r, c] and not seen[r, c]:
                    acc = set()
                    fill(r, c, acc)
                    comps.append(frozenset(acc))
    finally:
        sys.setrecursionlimit(old)
    return comps


def min_box(pixels):
    rows = [p[0] for p in pixels]
    cols = [p[1] for p in pixels]
    return (min(cols), min(rows), max(cols) + 1, max(rows) + 1)


def greedy_dedup(dets, thr):
    """dets: list of (score, class_id, box tuple). Returns kept list."""
    order = sorted(dets, key=lambda d: (-d[0], d[1], d[2]))
    kept = []
    for d in order:
        ok = True
        for k in kept:
            if plain_iou(d[2], k[2]) >= thr:
                ok = False
        if ok:
            kept.append(d)
    return kept


def ap_oracle(preds, gts, thr):
    """preds: list of (frame, score, box); gts: list of (frame, box).

    Matching re-derived with plain loops; AP as a sum over distinct recall
    levels of (recall gain) x (best precision at that recall or beyond).
    """
    if not gts:
        return None
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][1], preds[i][0], tuple(preds[i][2])))
    used = set()
    tp_flags = []
    for i in order:
        f, _, box = preds[i]
        best, best_j = -1.0, None
        for j, (gf, gbox) in enumerate(gts):
            if gf != f or j in used:
                continue
            v = plain_iou(box, gbox)
            if v > best:
                best, best_j = v, j
        if best_j is not None and best >= thr:
            used.add(best_j)
            tp_flags.append(1)
        else:
            tp_flags.append(0)
    points = []
    tp = 0
    for rank, flag in enumerate(tp_flags, start=1):
        tp += flag
        points.append((tp / len(gts), tp / rank))
    levels = sorted({r for r, _ in points if r > 0})
    area, prev = 0.0, 0.0
    for r in levels:
        area += (r - prev) * max(p for rr, p in points if rr >= r)
        prev = r
    return area


def f1_counts(pred, truth):
    tp = sum(1 for p, t in zip(pred, truth) if p and t)
    fp = sum(1 for p, t in zip(pred, truth) if p and not t)
    fn = sum(1 for p, t in zip(pred, truth) if not p and t)
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def best_threshold_f1(probs, truth):
    """Max F1 over every cut ``p >= t`` for t in the observed values, plus 'predict none'."""
    probs = np.asarray(probs)
    truth = np.asarray(truth).astype(bool)
    best = f1_counts(np.zeros_like(truth), truth)
    for t in np.unique(probs):
        best = max(best, f1_counts(probs >= t, truth))
    return best


def kalman_dense(mean, cov, q_std, r_std, z=None):
    """Textbook constant-velocity predict (z None) or update, with explicit inverse."""
    F = np.zeros((8, 8))
    for i in range(8):
        F[i, i] = 1.0
    for i in range(4):
        F[i, i + 4] = 1.0
    H = np.zeros((4, 8))
    for i in range(4):
        H[i, i] = 1.0
    if z is None:
        Q = np.diag(np.square(q_std))
        return F.dot(mean), F.dot(cov).dot(F.T) + Q
    R = np.eye(4) * r_std**2
    S = H.dot(cov).dot(H.T) + R
    K = cov.dot(H.T).dot(np.linalg.inv(S))
    return mean + K.dot(z - H.dot(mean)), (np.eye(8) - K.dot(H)).dot(cov)


def bce(p, y):
    return -(y * np.log(p) + (1 - y) * np.log(1 - p))
