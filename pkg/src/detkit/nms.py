"""Greedy non-maximum suppression with standard or IOU-guided scoring.

Standard mode ranks by classification confidence alone; IOU-guided mode
attenuates it by the predicted IOU (score = p_cls * p_iou), so a
confidently classified but badly localized box loses to a better
localized rival. Suppression is per class; candidates below a small
score floor are dropped up front. A brute-force oracle re-derives the
greedy fixed point on tiny instances.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .geometry import Box, iou_value

MODES = ("standard", "iou_guided")
DEFAULT_IOU_THRESHOLD = 0.5
SCORE_FLOOR = 0.01
BRUTEFORCE_LIMIT = 12

DETECTIONS_CSV_HEADER = ["image_id", "class_id", "x1", "y1", "x2", "y2", "p_cls", "p_iou"]


@dataclass(frozen=True)
class Detection:
    box: Box
    class_id: int
    p_cls: float
    p_iou: float

    def __post_init__(self):
        if not (0.0 <= self.p_cls <= 1.0 and 0.0 <= self.p_iou <= 1.0):
            raise ValueError(f"probabilities out of range: p_cls={self.p_cls}, p_iou={self.p_iou}")


def score(d: Detection, mode: str) -> float:
    """Ranking score: p_cls, or p_cls * p_iou in iou_guided mode."""
    if mode == "standard":
        return d.p_cls
    if mode == "iou_guided":
        return d.p_cls * d.p_iou
    raise ValueError(f"unknown NMS mode {mode!r}")


def _priority_order(dets: list[Detection], mode: str, floor: float) -> list[int]:
    """Indices above the floor, by descending score, then descending area,
    then ascending index."""
    idx = [i for i, d in enumerate(dets) if score(d, mode) >= floor]
    idx.sort(key=lambda i: (-score(dets[i], mode), -dets[i].box.area, i))
    return idx


def greedy_nms(
    dets: list[Detection],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    mode: str = "standard",
    score_floor: float = SCORE_FLOOR,
) -> list[Detection]:
    """Per-class greedy suppression; kept detections return in priority order."""
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError("iou_threshold must lie in (0, 1)")
    kept: list[Detection] = []
    order = _priority_order(dets, mode, score_floor)
    alive = set(order)
    for i in order:
        if i not in alive:
            continue
        d = dets[i]
        kept.append(d)
        alive.discard(i)
        for j in list(alive):
            other = dets[j]
            if other.class_id == d.class_id and iou_value(d.box, other.box) > iou_threshold:
                alive.discard(j)
    return kept


def nms_bruteforce(
    dets: list[Detection],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    mode: str = "standard",
    score_floor: float = SCORE_FLOOR,
) -> list[Detection]:
    """Test oracle: a detection is kept iff no earlier-priority kept
    detection of its class overlaps it beyond the threshold. Refuses more
    than BRUTEFORCE_LIMIT detections."""
    if len(dets) > BRUTEFORCE_LIMIT:
        raise ValueError(f"oracle limited to {BRUTEFORCE_LIMIT} detections")
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError("iou_threshold must lie in (0, 1)")
    order = _priority_order(dets, mode, score_floor)
    kept_idx: list[int] = []
    for i in order:
        suppressed = any(
            dets[k].class_id == dets[i].class_id and iou_value(dets[k].box, dets[i].box) > iou_threshold
            for k in kept_idx
        )
        if not suppressed:
            kept_idx.append(i)
    return [dets[i] for i in kept_idx]


def detections_to_csv(rows: list[tuple[str, Detection]]) -> str:
    """Serialize (image_id, detection) pairs under the pinned schema."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DETECTIONS_CSV_HEADER)
    for image_id, d in rows:
        cells = (d.box.x1, d.box.y1, d.box.x2, d.box.y2, d.p_cls, d.p_iou)
        w.writerow([image_id, d.class_id] + [repr(float(v)) for v in cells])
    return buf.getvalue()


def detections_from_csv(text: str) -> list[tuple[str, Detection]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != DETECTIONS_CSV_HEADER:
        raise ValueError(f"bad detections CSV header: {header}")
    out = []
    for row in reader:
        if not row:
            continue
        image_id, class_id, x1, y1, x2, y2, p_cls, p_iou = row
        box = Box(float(x1), float(y1), float(x2), float(y2))
        out.append((image_id, Detection(box, int(class_id), float(p_cls), float(p_iou))))
    return out
