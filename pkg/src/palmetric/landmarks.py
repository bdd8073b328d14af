"""Geometry core: from a binary hand mask to calibrated finger measurements.

The chain is: isolate the hand and the reference square, trace the hand
outline wrist-to-wrist, build the radial profile from the wrist reference
point, pick fingertip/valley extrema, complete the missing baseline
endpoints with isosceles matches, and convert pixel distances to cm with
the reference-square scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .config import MAX_LENGTH_CM, MIN_LENGTH_CM, MeasureConfig
from .errors import PairingError, PipelineError
from .raster import BinaryImage, ColorImage, preprocess
from . import stats

HANDS = ("left", "right")
POSES = ("relaxed", "extended")
FINGER_CODES = ("F1", "F2", "F3", "F4", "F5")  # thumb .. pinky

# minimum candidate size when picking the reference square, as a fraction of
# the hand area (with an absolute floor); smaller blobs are noise specks
_SQUARE_MIN_AREA_FRACTION = 0.01
_SQUARE_MIN_AREA_PX = 64

_EIGHT = np.ones((3, 3), dtype=bool)

# clockwise Moore neighborhood (y grows downward): W, NW, N, NE, E, SE, S, SW
_RING = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_RING_INDEX = {d: i for i, d in enumerate(_RING)}


@dataclass(frozen=True)
class Contour:
    """Ordered outline of the hand, wrist cut to wrist cut.

    Consecutive points are 8-connected; the first and last point lie on the
    image edge the wrist crosses.
    """

    points: np.ndarray  # (n, 2) int, columns (x, y)

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("contour points must be an (n, 2) array")
        if len(self.points) < 3:
            raise ValueError("contour needs at least 3 points")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RadialProfile:
    """Distance from the wrist reference to each contour point, in order."""

    distances: np.ndarray

    def __post_init__(self):
        if self.distances.ndim != 1:
            raise ValueError("profile must be one-dimensional")
        if np.any(self.distances < 0):
            raise ValueError("distances must be non-negative")

    def __len__(self) -> int:
        return len(self.distances)


@dataclass(frozen=True)
class ReferenceSquare:
    """Calibration marker: corner estimates and the derived cm-per-pixel scale."""

    corners: np.ndarray  # (4, 2) float: upper-left, upper-right, lower-right, lower-left
    side_px: float
    side_cm: float
    scale: float  # cm per pixel
    rotation_deg: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class HandLandmarks:
    """Detected fingertips, valleys, synthesized baseline endpoints and baselines.

    Arrays follow contour order (outer finger at the wrist start first).
    """

    tips: np.ndarray              # (5, 2) int
    valleys: np.ndarray           # (4, 2) int
    synthetic_points: np.ndarray  # (k, 2) int, k <= 6 (one per missing baseline side)
    baselines: np.ndarray         # (5, 2, 2) float endpoints
    midpoints: np.ndarray         # (5, 2) float
    tip_indices: tuple[int, ...] = ()
    valley_indices: tuple[int, ...] = ()
    # sub-pixel tip estimates (distance-weighted centroids of the tip arcs);
    # fall back to the integer contour points when no profile was supplied
    tips_precise: np.ndarray | None = None

    def tip_points(self) -> np.ndarray:
        return self.tips_precise if self.tips_precise is not None else self.tips.astype(np.float64)


@dataclass(frozen=True)
class HandMeasurements:
    """Calibrated per-finger lengths and the pinky span for one hand image."""

    hand: str
    pose: str
    lengths_cm: dict[str, float]  # F1 (thumb) .. F5 (pinky)
    pir_cm: float | None = None
    pie_cm: float | None = None
    source: str = "auto"
    alt_span_cm: float | None = None  # secondary span pair, when requested

    def __post_init__(self):
        if self.hand not in HANDS:
            raise ValueError(f"hand must be one of {HANDS}")
        if self.pose not in POSES:
            raise ValueError(f"pose must be one of {POSES}")
        if set(self.lengths_cm) != set(FINGER_CODES):
            raise ValueError("lengths_cm must provide exactly F1..F5")
        for code, value in self.lengths_cm.items():
            if not MIN_LENGTH_CM < value < MAX_LENGTH_CM:
                raise ValueError(f"{code}={value} cm outside ({MIN_LENGTH_CM}, {MAX_LENGTH_CM})")
        if (self.pose == "relaxed") != (self.pir_cm is not None):
            raise ValueError("PIR must be present exactly when pose is relaxed")
        if (self.pose == "extended") != (self.pie_cm is not None):
            raise ValueError("PIE must be present exactly when pose is extended")
        span = self.pir_cm if self.pose == "relaxed" else self.pie_cm
        if not MIN_LENGTH_CM < span < MAX_LENGTH_CM:
            raise ValueError(f"span={span} cm outside ({MIN_LENGTH_CM}, {MAX_LENGTH_CM})")

    @property
    def span_cm(self) -> float:
        return self.pir_cm if self.pose == "relaxed" else self.pie_cm


@dataclass(frozen=True)
class MeasurementDetail:
    """measure_hand output plus the geometry that produced it."""

    measurements: HandMeasurements
    landmarks: HandLandmarks
    square: ReferenceSquare
    contour_length: int


def isolate_components(img: BinaryImage) -> tuple[BinaryImage, BinaryImage]:
    """Split the mask into the hand (largest component) and the reference square.

    The square is the remaining component maximizing bounding-box fill ratio
    times aspect-ratio closeness to one; blobs far below the hand's size are
    treated as noise and never considered.
    """
    labels, count = ndimage.label(img.pixels, structure=_EIGHT)
    if count < 2:
        raise PipelineError("isolate", f"found {count} foreground component(s); need the hand and the reference square")
    areas = np.bincount(labels.ravel())
    areas[0] = 0
    hand_label = int(np.argmax(areas))
    hand_area = int(areas[hand_label])
    min_area = max(_SQUARE_MIN_AREA_PX, int(_SQUARE_MIN_AREA_FRACTION * hand_area))

    slices = ndimage.find_objects(labels)
    scored: list[tuple[float, int, tuple]] = []
    for label in range(1, count + 1):
        if label == hand_label or areas[label] < min_area:
            continue
        sl = slices[label - 1]
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        fill = areas[label] / float(h * w)
        aspect = min(w, h) / float(max(w, h))
        scored.append((fill * aspect, label, sl))
    if not scored:
        raise PipelineError("isolate", "no reference-square candidate after noise filtering")
    scored.sort(key=lambda s: (-s[0], s[1]))
    if len(scored) > 1 and abs(scored[0][0] - scored[1][0]) < 1e-9:
        boxes = ", ".join(f"label {lab} bbox {sl}" for _, lab, sl in scored[:4])
        raise PipelineError("isolate", f"ambiguous square candidates with equal scores: {boxes}")
    best = scored[0][1]
    return BinaryImage(labels == hand_label), BinaryImage(labels == best)


def _wrap_angle_deg(angle: float) -> float:
    """Map an edge angle to the equivalent square rotation in [-45, 45)."""
    a = math.fmod(angle, 90.0)
    if a >= 45.0:
        a -= 90.0
    elif a < -45.0:
        a += 90.0
    return a


def detect_reference_square(
    img: BinaryImage,
    side_cm: float = 5.0,
    tolerance: float = 0.05,
    growth_px: float = 0.0,
) -> ReferenceSquare:
    """Estimate the marker corners and the cm-per-pixel scale.

    Corners come from the diagonal extreme pixels and drive the squareness
    checks; the side length itself is the area-based estimate (robust to
    sub-pixel placement and corner rounding), corrected for ``growth_px``,
    the net per-side boundary growth the mask-extraction morphology applied.
    A candidate whose shape deviates more than ``tolerance`` from a square
    is rejected.
    """
    ys, xs = np.nonzero(img.pixels)
    if len(xs) == 0:
        raise PipelineError("square", "empty square candidate")
    s = xs + ys
    d = xs - ys
    ul = np.array([xs[np.argmin(s)], ys[np.argmin(s)]], dtype=float)
    lr = np.array([xs[np.argmax(s)], ys[np.argmax(s)]], dtype=float)
    ur = np.array([xs[np.argmax(d)], ys[np.argmax(d)]], dtype=float)
    ll = np.array([xs[np.argmin(d)], ys[np.argmin(d)]], dtype=float)
    corners = np.stack([ul, ur, lr, ll])

    sides = np.array([
        np.linalg.norm(ur - ul),
        np.linalg.norm(lr - ur),
        np.linalg.norm(ll - lr),
        np.linalg.norm(ul - ll),
    ]) + 1.0
    diagonals = np.array([np.linalg.norm(lr - ul), np.linalg.norm(ll - ur)]) + 1.0
    corner_side = float(np.mean(sides))
    if corner_side <= 1.0:
        raise PipelineError("square", "square candidate is degenerate")
    if np.max(np.abs(sides - corner_side)) > tolerance * corner_side:
        raise PipelineError(
            "square",
            f"side lengths {np.round(sides, 1).tolist()} deviate more than {tolerance:.0%} from square",
        )
    expected_diag = corner_side * math.sqrt(2.0)
    if np.max(np.abs(diagonals - expected_diag)) > tolerance * expected_diag:
        raise PipelineError(
            "square",
            f"diagonals {np.round(diagonals, 1).tolist()} deviate more than {tolerance:.0%} from square",
        )
    side_px = math.sqrt(float(len(xs))) - 2.0 * growth_px
    if side_px <= 1.0:
        raise PipelineError("square", "square candidate is degenerate after growth correction")

    top = _wrap_angle_deg(math.degrees(math.atan2(ur[1] - ul[1], ur[0] - ul[0])))
    bottom = _wrap_angle_deg(math.degrees(math.atan2(lr[1] - ll[1], lr[0] - ll[0])))
    rotation = 0.5 * (top + bottom)

    # rectify and verify the axis-aligned corner equalities
    center = corners.mean(axis=0)
    phi = math.radians(-rotation)
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    rect = (corners - center) @ rot.T + center
    tol_px = tolerance * side_px
    rux, ruy = rect[:, 0], rect[:, 1]
    checks = (
        abs(rux[0] - rux[3]),  # x_ul == x_ll
        abs(rux[1] - rux[2]),  # x_ur == x_lr
        abs(ruy[0] - ruy[1]),  # y_ul == y_ur
        abs(ruy[3] - ruy[2]),  # y_ll == y_lr
    )
    if max(checks) > tol_px:
        raise PipelineError("square", "rectified corners do not satisfy the square equalities")

    return ReferenceSquare(
        corners=corners,
        side_px=side_px,
        side_cm=side_cm,
        scale=side_cm / side_px,
        rotation_deg=rotation,
    )


def _touched_edges(mask: np.ndarray) -> list[str]:
    edges = []
    if mask[-1].any():
        edges.append("bottom")
    if mask[0].any():
        edges.append("top")
    if mask[:, 0].any():
        edges.append("left")
    if mask[:, -1].any():
        edges.append("right")
    return edges


def trace_boundary(hand: BinaryImage) -> Contour:
    """Trace the outline from one wrist-cut corner to the other.

    The hand must touch exactly one image edge (the wrist cut).  The trace
    starts at the wrist pixel with minimal coordinate on that edge, walks up
    one flank, across the fingers and down the other flank, visiting every
    boundary pixel once.
    """
    mask = hand.pixels
    _, count = ndimage.label(mask, structure=_EIGHT)
    if count != 1:
        raise PipelineError("trace", f"expected a single component, found {count}")
    edges = _touched_edges(mask)
    if len(edges) != 1:
        raise PipelineError("trace", f"hand touches {len(edges)} image edges ({edges or 'none'}); exactly one wrist cut required")

    # rotate so the wrist edge is the bottom row, trace, then map back
    turns = {"bottom": 0, "left": 1, "top": 2, "right": 3}[edges[0]]
    work = np.rot90(mask, turns) if turns else mask
    pts = _moore_trace(work)
    if turns:
        h0, w0 = mask.shape
        pts = np.array([_unrotate(x, y, turns, h0, w0) for x, y in pts], dtype=np.int64)
    return Contour(pts)


def _unrotate(x: int, y: int, turns: int, h0: int, w0: int) -> tuple[int, int]:
    """Map a coordinate traced in the rotated frame back to the original image."""
    if turns == 1:  # original left edge was rotated to the bottom
        return w0 - 1 - y, x
    if turns == 2:
        return w0 - 1 - x, h0 - 1 - y
    if turns == 3:
        return y, h0 - 1 - x
    return x, y


def _moore_trace(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    bottom_cols = np.flatnonzero(mask[h - 1])
    start = (int(bottom_cols[0]), h - 1)
    points = [start]
    current = start
    back_dir = 0  # backtrack points west of the start pixel
    limit = 4 * int(mask.sum()) + 8
    for _ in range(limit):
        found_dir = -1
        for step in range(1, 9):
            cand = (back_dir + step) % 8
            dx, dy = _RING[cand]
            nx, ny = current[0] + dx, current[1] + dy
            if 0 <= nx < w and 0 <= ny < h and mask[ny, nx]:
                found_dir = cand
                break
        if found_dir < 0:
            break  # isolated pixel
        prev_bg_dx, prev_bg_dy = _RING[(found_dir - 1) % 8]
        bg = (current[0] + prev_bg_dx, current[1] + prev_bg_dy)
        current = (current[0] + _RING[found_dir][0], current[1] + _RING[found_dir][1])
        back_dir = _RING_INDEX[(bg[0] - current[0], bg[1] - current[1])]
        points.append(current)
        if current[1] == h - 1:
            break
    else:
        raise PipelineError("trace", "boundary trace did not terminate")
    if len(points) < 3:
        raise PipelineError("trace", f"degenerate contour of {len(points)} point(s)")
    return np.array(points, dtype=np.int64)


def wrist_reference(c: Contour) -> tuple[int, int]:
    """Wrist reference point: ceiling midpoint of the first and last contour points."""
    x1, y1 = (int(v) for v in c.points[0])
    x2, y2 = (int(v) for v in c.points[-1])
    return ((x1 + x2 + 1) // 2, (y1 + y2 + 1) // 2)


def radial_profile(c: Contour, cr: tuple[int, int]) -> RadialProfile:
    """Euclidean distance from the wrist reference to each contour point."""
    delta = c.points.astype(np.float64) - np.asarray(cr, dtype=np.float64)
    return RadialProfile(np.hypot(delta[:, 0], delta[:, 1]))


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return values.astype(np.float64)
    half = window // 2
    padded = np.pad(values.astype(np.float64), half, mode="edge")
    return np.convolve(padded, np.full(window, 1.0 / window), mode="valid")


def detect_extrema(profile: RadialProfile, sigma: float, smooth_window: int = 11) -> tuple[list[int], list[int]]:
    """Find the five fingertip and four valley indices of the radial profile.

    The profile is smoothed with a moving average, runs of consecutive
    near-flat steps (|difference| < sigma * max distance) are collapsed to
    their midpoint index, and each run is classified as a tip or a valley
    against its neighboring runs.  Runs touching the profile ends (the wrist
    cut) and monotone shoulders are discarded.
    """
    d = profile.distances
    n = len(d)
    if n < 9:
        raise PipelineError("extrema", f"profile of {n} points is too short")
    if not 0.0 < sigma < 1.0:
        raise PipelineError("extrema", "sigma must be in (0, 1)")
    smoothed = _smooth(d, smooth_window)
    threshold = sigma * float(d.max())
    flat = np.abs(np.diff(smoothed)) < threshold
    # quantization ripple fragments plateaus; gaps shorter than the
    # smoothing scale between flat runs are noise, so close them
    run_starts = np.flatnonzero(flat & ~np.roll(flat, 1))
    run_ends = np.flatnonzero(flat & ~np.roll(flat, -1))
    if flat.size and flat[0]:
        run_starts = np.concatenate([[0], run_starts[run_starts > 0]])
    if flat.size and flat[-1]:
        run_ends = np.concatenate([run_ends[run_ends < flat.size - 1], [flat.size - 1]])
    for end, start in zip(run_ends[:-1], run_starts[1:]):
        if start - end - 1 < smooth_window:
            flat[end : start + 1] = True

    def collapse(a: int, b: int) -> int:
        # midpoint of the run's extremal core: the samples within half a
        # pixel of the run's own extreme value, which centers the collapsed
        # index on the peak (or notch bottom) regardless of resolution
        seg = smoothed[a : b + 1]
        lo, hi = float(seg.min()), float(seg.max())
        ends = 0.5 * (float(seg[0]) + float(seg[-1]))
        anchor = hi if hi - ends > ends - lo else lo
        weights = np.maximum(0.0, 1.0 - np.abs(seg - anchor))
        centroid = float(np.dot(weights, np.arange(len(seg)))) / float(weights.sum())
        return a + int(round(centroid))

    # maximal runs of flat steps; a step run [a, b] covers samples a..b+1
    runs: list[tuple[int, int, int]] = []
    i = 0
    while i < len(flat):
        if flat[i]:
            j = i
            while j + 1 < len(flat) and flat[j + 1]:
                j += 1
            runs.append((i, j + 1, collapse(i, j + 1)))
            i = j + 1
        i += 1

    labeled: list[tuple[int, str]] = []
    for k, (a, b, mid) in enumerate(runs):
        if a == 0 or b == n - 1:
            continue  # touches the wrist cut
        prev_anchor = runs[k - 1][2] if k > 0 else 0
        next_anchor = runs[k + 1][2] if k + 1 < len(runs) else n - 1
        cur, prev_v, next_v = smoothed[mid], smoothed[prev_anchor], smoothed[next_anchor]
        if cur > prev_v and cur > next_v:
            labeled.append((mid, "tip"))
        elif cur < prev_v and cur < next_v:
            labeled.append((mid, "valley"))

    tips = [idx for idx, kind in labeled if kind == "tip"]
    valleys = [idx for idx, kind in labeled if kind == "valley"]
    kinds = [kind for _, kind in labeled]
    expected = ["tip", "valley"] * 4 + ["tip"]
    if len(tips) != 5 or len(valleys) != 4:
        raise PipelineError("extrema", f"expected 5 tips and 4 valleys, found {len(tips)} tips and {len(valleys)} valleys")
    if kinds != expected:
        raise PipelineError("extrema", f"extrema do not alternate tip/valley: {kinds}")
    return tips, valleys


def synth_valley(
    c: Contour,
    tip_index: int,
    valley_index: int,
    side: str,
    bound_index: int | None = None,
) -> np.ndarray:
    """Find the flank point completing an isosceles triangle with apex at the tip.

    Searches the contour segment on ``side`` ("before"/"after") of the tip,
    optionally bounded by ``bound_index`` (an adjacent landmark), for the
    point whose distance to the tip is closest to the valley's.
    """
    pts = c.points
    tip = pts[tip_index].astype(np.float64)
    valley = pts[valley_index].astype(np.float64)
    target = float(np.hypot(*(valley - tip)))
    if side == "before":
        lo = 0 if bound_index is None else bound_index + 1
        segment = pts[lo:tip_index]
    elif side == "after":
        hi = len(pts) if bound_index is None else bound_index
        segment = pts[tip_index + 1 : hi]
    else:
        raise ValueError("side must be 'before' or 'after'")
    if len(segment) == 0:
        raise PipelineError("landmarks", f"empty contour flank on the '{side}' side of tip index {tip_index}")
    dist = np.hypot(segment[:, 0] - tip[0], segment[:, 1] - tip[1])
    best = int(np.argmin(np.abs(dist - target)))
    return segment[best].copy()


def _refine_point(pts: np.ndarray, distances: np.ndarray, idx: int, window: int, kind: str) -> np.ndarray:
    """Sub-pixel landmark estimate: distance-weighted centroid near an extremum.

    Weighting by closeness to the extremal distance centers the estimate on
    the arc apex (or notch bottom) and averages away pixel quantization.
    """
    lo = max(0, idx - window)
    hi = min(len(pts), idx + window + 1)
    d = distances[lo:hi]
    if kind == "tip":
        inside = d >= float(d.max()) - 3.0
        center = int(np.argmax(d))
    else:
        inside = d <= float(d.min()) + 1.0
        center = int(np.argmin(d))
    # contiguous level set around the extremum; its mean is tangentially
    # centered regardless of how the distances tilt across the cap
    a = center
    while a > 0 and inside[a - 1]:
        a -= 1
    b = center
    while b + 1 < len(d) and inside[b + 1]:
        b += 1
    return pts[lo + a : lo + b + 1].mean(axis=0)


def assemble_landmarks(
    c: Contour,
    tips: Sequence[int],
    valleys: Sequence[int],
    hand: str,
    profile: RadialProfile | None = None,
    refine_window: int = 11,
) -> HandLandmarks:
    """Pair each fingertip with its two baseline endpoints.

    Middle and ring fingers use their two flanking true valleys; the thumb,
    index and pinky get one synthesized endpoint on the flank that has no
    valley.  The contour runs thumb-first for a right hand (palm down,
    wrist at the lower edge) and pinky-first for a left hand.
    """
    if hand not in HANDS:
        raise ValueError(f"hand must be one of {HANDS}")
    pts = c.points
    thumb_first = hand == "right"
    index_pos = 1 if thumb_first else 3

    if profile is not None:
        d = profile.distances
        tip_pts = np.stack([_refine_point(pts, d, i, refine_window, "tip") for i in tips])
        valley_pts = np.stack([_refine_point(pts, d, i, refine_window, "valley") for i in valleys])
    else:
        tip_pts = pts[list(tips)].astype(np.float64)
        valley_pts = pts[list(valleys)].astype(np.float64)

    baselines = np.zeros((5, 2, 2), dtype=np.float64)
    synthetic: list[np.ndarray] = []
    for pos in range(5):
        tip_i = tips[pos]
        if pos == 0:
            synth = synth_valley(c, tip_i, valleys[0], side="before")
            pair = (synth, valley_pts[0])
            synthetic.append(synth)
        elif pos == 4:
            synth = synth_valley(c, tip_i, valleys[3], side="after")
            pair = (valley_pts[3], synth)
            synthetic.append(synth)
        elif pos == index_pos:
            # the finger adjacent to the thumb: its thumb-side web belongs
            # to the thumb, so synthesize on that side
            if thumb_first:
                synth = synth_valley(c, tip_i, valleys[1], side="before", bound_index=valleys[0])
                pair = (synth, valley_pts[1])
            else:
                synth = synth_valley(c, tip_i, valleys[2], side="after", bound_index=valleys[3])
                pair = (valley_pts[2], synth)
            synthetic.append(synth)
        else:
            pair = (valley_pts[pos - 1], valley_pts[pos])
        baselines[pos, 0] = pair[0]
        baselines[pos, 1] = pair[1]

    midpoints = baselines.mean(axis=1)
    return HandLandmarks(
        tips=pts[list(tips)].copy(),
        valleys=pts[list(valleys)].copy(),
        synthetic_points=np.array(synthetic, dtype=np.int64),
        baselines=baselines,
        midpoints=midpoints,
        tip_indices=tuple(int(i) for i in tips),
        valley_indices=tuple(int(i) for i in valleys),
        tips_precise=tip_pts,
    )


def finger_geometry(lm: HandLandmarks) -> list[tuple[np.ndarray, np.ndarray]]:
    """(tip, baseline midpoint) pairs, one per finger in contour order."""
    tip_pts = lm.tip_points()
    return [(tip_pts[k], lm.midpoints[k]) for k in range(5)]


def measure_hand_detailed(
    img: ColorImage,
    hand: str,
    pose: str,
    cfg: MeasureConfig = MeasureConfig(),
) -> MeasurementDetail:
    """Full measurement with the intermediate geometry retained."""
    if hand not in HANDS:
        raise ValueError(f"hand must be one of {HANDS}")
    if pose not in POSES:
        raise ValueError(f"pose must be one of {POSES}")
    mask = preprocess(img, cfg.preprocess)
    hand_mask, square_mask = isolate_components(mask)
    pre = cfg.preprocess
    growth = pre.dilate_passes * pre.dilate_radius - pre.erode_passes * pre.erode_radius
    square = detect_reference_square(square_mask, cfg.square_side_cm, cfg.square_tolerance, growth_px=float(growth))
    contour = trace_boundary(hand_mask)
    cr = wrist_reference(contour)
    profile = radial_profile(contour, cr)
    tips, valleys = detect_extrema(profile, cfg.sigma, cfg.smooth_window)
    lm = assemble_landmarks(contour, tips, valleys, hand, profile=profile, refine_window=cfg.smooth_window)

    thumb_first = hand == "right"
    codes = FINGER_CODES if thumb_first else tuple(reversed(FINGER_CODES))
    lengths: dict[str, float] = {}
    for pos, (tip, mid) in enumerate(finger_geometry(lm)):
        value = square.scale * float(np.hypot(*(tip - mid)))
        code = codes[pos]
        if not MIN_LENGTH_CM < value < MAX_LENGTH_CM:
            raise PipelineError("measure", f"{code}={value:.2f} cm fails the sanity bounds")
        lengths[code] = value

    pos_of = {"thumb": 0 if thumb_first else 4, "index": index_pos(hand), "pinky": 4 if thumb_first else 0}
    span_pairs = {
        "pinky-index": (pos_of["pinky"], pos_of["index"]),
        "pinky-thumb": (pos_of["pinky"], pos_of["thumb"]),
    }

    span_tips = lm.tip_points()

    def span_between(a: int, b: int) -> float:
        value = square.scale * float(np.hypot(*(span_tips[a] - span_tips[b])))
        if not MIN_LENGTH_CM < value < MAX_LENGTH_CM:
            raise PipelineError("measure", f"span={value:.2f} cm fails the sanity bounds")
        return value

    primary_pair = "pinky-thumb" if cfg.span_fingers == "pinky-thumb" else "pinky-index"
    span = span_between(*span_pairs[primary_pair])
    alt = span_between(*span_pairs["pinky-thumb"]) if cfg.span_fingers == "both" else None

    measurements = HandMeasurements(
        hand=hand,
        pose=pose,
        lengths_cm=lengths,
        pir_cm=span if pose == "relaxed" else None,
        pie_cm=span if pose == "extended" else None,
        source="auto",
        alt_span_cm=alt,
    )
    return MeasurementDetail(measurements, lm, square, len(contour))


def index_pos(hand: str) -> int:
    """Contour position of the index finger (thumb-first for a right hand)."""
    return 1 if hand == "right" else 3


def measure_hand(img: ColorImage, hand: str, pose: str, cfg: MeasureConfig = MeasureConfig()) -> HandMeasurements:
    """Measure F1..F5 and the pinky span from one image, in cm."""
    return measure_hand_detailed(img, hand, pose, cfg).measurements


@dataclass(frozen=True)
class ComparisonRow:
    """One line of the manual-versus-program accuracy table."""

    hand: str
    dimension: str
    count: int
    mean_actual: float
    sd_actual: float
    mean_program: float
    sd_program: float
    mean_abs_diff: float


def measurement_comparison(
    manual: Iterable[tuple[str, HandMeasurements]],
    auto: Iterable[tuple[str, HandMeasurements]],
) -> list[ComparisonRow]:
    """Per-dimension accuracy table for paired manual/program measurements.

    Records pair on (subject, hand, pose); unpaired records on either side
    are an error.  F1..F5 pool both poses; PIR/PIE come from their pose.
    """

    def keyed(records: Iterable[tuple[str, HandMeasurements]], label: str) -> dict:
        table: dict[tuple[str, str, str], HandMeasurements] = {}
        for subject, m in records:
            key = (subject, m.hand, m.pose)
            if key in table:
                raise PairingError(f"duplicate {label} record for {key}")
            table[key] = m
        return table

    left = keyed(manual, "manual")
    right = keyed(auto, "auto")
    orphans = sorted(set(left) ^ set(right))
    if orphans:
        raise PairingError(f"unpaired records: {orphans}")
    if not left:
        raise PairingError("no records to compare")

    rows: list[ComparisonRow] = []
    for hand in HANDS:
        dims: list[tuple[str, list[float], list[float]]] = []
        for code in FINGER_CODES:
            a = [left[k].lengths_cm[code] for k in sorted(left) if k[1] == hand]
            b = [right[k].lengths_cm[code] for k in sorted(right) if k[1] == hand]
            if a:
                dims.append((code, a, b))
        for dim, pose in (("PIR", "relaxed"), ("PIE", "extended")):
            keys = [k for k in sorted(left) if k[1] == hand and k[2] == pose]
            if keys:
                a = [left[k].span_cm for k in keys]
                b = [right[k].span_cm for k in keys]
                dims.append((dim, a, b))
        for dim, actual, program in dims:
            sa = stats.summarize(actual)
            sp = stats.summarize(program)
            rows.append(
                ComparisonRow(
                    hand=hand,
                    dimension=dim,
                    count=len(actual),
                    mean_actual=sa.mean,
                    sd_actual=sa.sd,
                    mean_program=sp.mean,
                    sd_program=sp.sd,
                    mean_abs_diff=stats.mean_abs_diff(actual, program),
                )
            )
    return rows
