"""Brute-force single-class AP, written independently of nanonav.metrics.

The PR curve is enumerated by sweeping a score cutoff over every distinct
detection score and counting true positives among the detections kept, with
exact rational arithmetic. Matching: per frame, detections in descending
score order each claim the unmatched ground truth of largest IoU (>= the
threshold; equal IoUs go to the later ground truth).
"""
from fractions import Fraction

from nanonav.metrics import FrameRecord
from nanonav.perception import BoundingBox


def _iou(a, b):
    ix = max(0.0, min(a.xM, b.xM) - max(a.xm, b.xm))
    iy = max(0.0, min(a.yM, b.yM) - max(a.ym, b.ym))
    inter = ix * iy
    ua = (a.xM - a.xm) * (a.yM - a.ym) + (b.xM - b.xm) * (b.yM - b.ym) - inter
    return inter / ua if ua > 0 else 0.0


def _label(frames, thr):
    labelled = []
    for f in frames:
        dets = sorted(f.detections, key=lambda d: d[1], reverse=True)
        free = list(range(len(f.ground_truths)))
        for box, score in dets:
            best, best_iou = None, None
            for j in free:
                o = _iou(box, f.ground_truths[j])
                if o >= thr and (best_iou is None or o >= best_iou):
                    best, best_iou = j, o
            if best is not None:
                free.remove(best)
            labelled.append((score, best is not None))
    return labelled


def oracle_ap(frames, thr):
    n_gt = sum(len(f.ground_truths) for f in frames)
    if n_gt == 0:
        return float("nan")
    labelled = _label(frames, thr)
    points = []  # (recall, precision) per cutoff
    for cut in sorted({s for s, _ in labelled}, reverse=True):
        kept = [tp for s, tp in labelled if s >= cut]
        tp = sum(kept)
        points.append((Fraction(tp, n_gt), Fraction(tp, len(kept))))
    total = Fraction(0)
    for i in range(101):
        r = Fraction(i, 100)
        ok = [p for rec, p in points if rec >= r]
        total += max(ok) if ok else 0
    return float(total / 101 * 100)


def oracle_window(frames, window=10):
    vals = [oracle_ap(frames[i:i + window], 0.5) for i in range(len(frames) - window + 1)]
    finite = [v for v in vals if v == v]
    return vals, (sum(finite) / len(finite) if finite else float("nan"))


def random_log(rng, n_frames=10):
    frames = []
    for k in range(n_frames):
        gts = []
        for _ in range(int(rng.integers(0, 3))):
            x, y = rng.uniform(0, 250), rng.uniform(0, 180)
            gts.append(BoundingBox(x, y, x + rng.uniform(10, 70), y + rng.uniform(10, 60)))
        dets = []
        for g in gts:
            if rng.random() < 0.8:
                j = rng.normal(0, 6, 4)
                dets.append((BoundingBox(g.xm + j[0], g.ym + j[1], g.xM + j[2], g.yM + j[3]),
                             float(rng.uniform(0.3, 1.0))))
        for _ in range(int(rng.integers(0, 2))):
            x, y = rng.uniform(0, 250), rng.uniform(0, 180)
            dets.append((BoundingBox(x, y, x + 40, y + 30), float(rng.uniform(0.3, 1.0))))
        frames.append(FrameRecord(k, dets, gts))
    return frames
