"""Ground-truth generators for the two measurement pipelines.

``render_hand`` draws a parametric hand silhouette (capsule fingers on a
palm polygon) next to a reference square and returns the exact landmark
geometry it was built from, so the vision pipeline can be checked against
analytic truth.  ``simulate_observations`` draws repeated surveyor
measurements from the additive subject/surveyor/time model, so the ANOVA
decomposition can be checked against closed-form sums of squares.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import PalmetricError
from .landmarks import HandMeasurements
from .raster import BinaryImage, ColorImage
from .stats import Observation

FINGER_CODES = ("F1", "F2", "F3", "F4", "F5")  # thumb .. pinky

DEFAULT_LENGTHS = {"F1": 6.0, "F2": 6.9, "F3": 7.7, "F4": 7.1, "F5": 5.7}
DEFAULT_WIDTHS = {"F1": 1.7, "F2": 1.5, "F3": 1.5, "F4": 1.4, "F5": 1.2}


class LayoutError(PalmetricError):
    """The requested hand geometry cannot be drawn consistently."""


@dataclass(frozen=True)
class HandSpec:
    """Parametric hand: lengths/widths in cm plus layout and rendering knobs."""

    finger_lengths_cm: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LENGTHS))
    finger_widths_cm: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WIDTHS))
    hand: str = "right"
    pose: str = "relaxed"
    px_per_cm: float = 20.0
    rotation_deg: float = 0.0
    seed: int = 0
    # palm layout
    wrist_width_cm: float = 6.0
    palm_length_cm: float = 7.0
    stem_length_cm: float = 2.0
    finger_gap_cm: float = 0.75
    web_dip_cm: float = 0.35
    web_bottom_cm: float = 0.26
    thumb_web_dip_cm: float = 0.8
    thumb_web_bottom_cm: float = 0.45
    thumb_drop_cm: float = 2.2
    thumb_gap_cm: float = 0.65
    thumb_extra_angle_deg: float = 28.0
    splay_relaxed_deg: float = 8.0
    splay_extended_deg: float = 16.0
    # rendering
    foreground: int = 230
    background: int = 25
    noise_sd: float = 0.0
    speckle_fraction: float = 0.0
    margin_cm: float = 1.0
    square_side_cm: float = 5.0
    square_clearance_cm: float = 1.0

    def __post_init__(self):
        if set(self.finger_lengths_cm) != set(FINGER_CODES):
            raise ValueError("finger_lengths_cm must provide exactly F1..F5")
        if set(self.finger_widths_cm) != set(FINGER_CODES):
            raise ValueError("finger_widths_cm must provide exactly F1..F5")
        if any(v <= 0 for v in self.finger_lengths_cm.values()):
            raise ValueError("finger lengths must be positive")
        if any(v <= 0 for v in self.finger_widths_cm.values()):
            raise ValueError("finger widths must be positive")
        if self.hand not in ("left", "right"):
            raise ValueError("hand must be 'left' or 'right'")
        if self.pose not in ("relaxed", "extended"):
            raise ValueError("pose must be 'relaxed' or 'extended'")
        if self.px_per_cm < 10:
            raise ValueError("px_per_cm must be >= 10")


@dataclass(frozen=True)
class RenderResult:
    image: ColorImage
    clean_mask: BinaryImage
    truth: HandMeasurements
    landmarks_px: dict
    landmarks_cm: dict


@dataclass(frozen=True)
class _Skeleton:
    """Hand geometry in cm, wrist center at the origin, fingers up (+y)."""

    base_centers: np.ndarray      # (5, 2) contour order
    base_extended: np.ndarray     # (5, 2) capsule segments start here
    segment_ends: np.ndarray      # (5, 2) capsule segments end here (tip arc center)
    directions: np.ndarray        # (5, 2) unit axis per finger
    radii: np.ndarray             # (5,)
    tips: np.ndarray              # (5, 2) capsule apexes
    valleys: np.ndarray           # (4, 2) web dips between adjacent fingers
    synthetic: np.ndarray         # (3, 2) mirrored baseline endpoints (first, index, last)
    baseline_midpoints: np.ndarray  # (5, 2)
    polygon: np.ndarray           # (m, 2) palm outline
    codes: tuple[str, ...]        # finger code per contour position


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.hypot(*v))
    if n == 0:
        raise LayoutError("zero-length direction")
    return v / n


def _seg_point_dist(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    t = float(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-12))
    t = min(1.0, max(0.0, t))
    return float(np.hypot(*(p - (a + t * ab))))


def _seg_seg_dist(a0, a1, b0, b1) -> float:
    samples = np.linspace(0.0, 1.0, 33)
    pts_a = a0[None, :] + samples[:, None] * (a1 - a0)[None, :]
    return min(_seg_point_dist(p, b0, b1) for p in pts_a)


def _build_skeleton(spec: HandSpec) -> _Skeleton:
    splay = spec.splay_relaxed_deg if spec.pose == "relaxed" else spec.splay_extended_deg
    lengths = spec.finger_lengths_cm
    widths = spec.finger_widths_cm

    # contour order for a right hand (palm down, wrist at the bottom):
    # thumb, index, middle, ring, pinky
    codes = FINGER_CODES
    radii = np.array([widths[c] / 2.0 for c in codes])
    angles = np.radians([
        -(1.5 * splay + spec.thumb_extra_angle_deg),
        -1.5 * splay,
        -0.5 * splay,
        0.5 * splay,
        1.5 * splay,
    ])
    directions = np.stack([np.sin(angles), np.cos(angles)], axis=1)
    normals = np.stack([np.cos(angles), -np.sin(angles)], axis=1)  # right of the axis

    # four finger bases left to right along the palm top
    xs = [0.0]
    for a, b in zip(radii[1:], radii[2:]):
        xs.append(xs[-1] + a + b + spec.finger_gap_cm)
    xs = np.array(xs)
    xs -= (xs[0] - radii[1] + xs[-1] + radii[-1]) / 2.0  # center the spread
    bases = np.zeros((5, 2))
    bases[1:, 0] = xs
    bases[1:, 1] = spec.palm_length_cm
    bases[0] = (
        bases[1, 0] - radii[1] - spec.thumb_gap_cm - radii[0],
        spec.palm_length_cm - spec.thumb_drop_cm,
    )

    # polyline anchor points at base level
    right_pts = bases + radii[:, None] * normals
    left_pts = bases - radii[:, None] * normals

    def flank_point(pos: int, side: str, target_radius: float) -> tuple[np.ndarray, float]:
        """Point on a finger flank line at the given distance from the wrist."""
        off = radii[pos] if side == "right" else -radii[pos]
        v = bases[pos] + off * normals[pos]
        vd = float(v @ directions[pos])
        disc = vd * vd + target_radius * target_radius - float(v @ v)
        if disc <= 0:
            raise LayoutError(f"finger {codes[pos]} flank never reaches radius {target_radius:.2f}")
        t = -vd + math.sqrt(disc)
        return v + t * directions[pos], t

    def web_radius(a_pos: int, b_pos: int, dip: float) -> float:
        return min(float(np.hypot(*right_pts[a_pos])), float(np.hypot(*left_pts[b_pos]))) - dip

    def center_web(a_pos: int, b_pos: int, radius: float, bottom: float):
        """Flat-bottomed notch centered between two finger flank lines.

        The dip point sits at a fixed distance from the wrist on the ray
        equidistant from the two flanks.  The bottom segment is
        perpendicular to the radial direction, so its midpoint is the exact
        radial minimum of the web; a flat bottom also keeps the median
        filter and the dilation passes from reshaping the notch beyond a
        uniform one-pixel offset.
        """
        pa = right_pts[a_pos]
        pb = left_pts[b_pos]

        def channel_balance(phi: float) -> float:
            p = radius * np.array([math.sin(phi), math.cos(phi)])
            da = abs(float(np.cross(p - pa, directions[a_pos])))
            db = abs(float(np.cross(p - pb, directions[b_pos])))
            return da - db

        lo = math.atan2(pa[0], pa[1])
        hi = math.atan2(pb[0], pb[1])
        if channel_balance(lo) * channel_balance(hi) > 0:
            raise LayoutError("no channel centerline between the flank anchors")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if channel_balance(lo) * channel_balance(mid) <= 0:
                hi = mid
            else:
                lo = mid
        w = radius * np.array([math.sin(0.5 * (lo + hi)), math.cos(0.5 * (lo + hi))])
        tangent = np.array([-w[1], w[0]])
        tangent = tangent / float(np.hypot(*tangent))
        ga = w + 0.5 * bottom * tangent
        gb = w - 0.5 * bottom * tangent
        if float(np.dot(ga - w, pa - w)) < 0:
            ga, gb = gb, ga
        return w, ga, gb

    valleys = np.zeros((4, 2))
    web_radii = np.zeros(4)
    web_radii[1] = web_radius(1, 2, spec.web_dip_cm)
    web_radii[2] = web_radius(2, 3, spec.web_dip_cm)
    web_radii[3] = web_radius(3, 4, spec.web_dip_cm)
    # the thumb web digs deep enough to leave an attachment window on the
    # index flank between it and the index-middle web
    web_radii[0] = min(web_radius(0, 1, spec.thumb_web_dip_cm), web_radii[1] - 0.55)
    web_params = (
        (0, 1, spec.thumb_web_bottom_cm),
        (1, 2, spec.web_bottom_cm),
        (2, 3, spec.web_bottom_cm),
        (3, 4, spec.web_bottom_cm),
    )
    webs = []
    for j, (a_pos, b_pos, bottom) in enumerate(web_params):
        valleys[j], ga, gb = center_web(a_pos, b_pos, float(web_radii[j]), bottom)
        webs.append((ga, gb))

    # baseline midpoints exactly as the pipeline will measure them: true
    # valleys for the middle/ring fingers, valley plus its equal-distance
    # flank match for the thumb, index and pinky.  The reported fingertip is
    # the silhouette point farthest from the wrist (the radial maximum the
    # profile detector finds), not the capsule's axial apex.
    midpoints = np.zeros((5, 2))
    synthetic = np.zeros((3, 2))
    tips = np.zeros((5, 2))
    seg_ends = np.zeros((5, 2))
    apex_axial = np.zeros(5)
    match_axial = np.zeros(5)

    def radial_tip(pos: int, alpha: float) -> np.ndarray:
        center = bases[pos] + (alpha - radii[pos]) * directions[pos]
        return center + radii[pos] * center / float(np.hypot(*center))

    def flank_match(pos: int, valley: np.ndarray, tip: np.ndarray) -> tuple[np.ndarray, float]:
        """Point on the opposite flank at the valley's distance from the tip."""
        d, n, base, r = directions[pos], normals[pos], bases[pos], radii[pos]
        s_w = math.copysign(1.0, float((valley - base) @ n))
        target = float(np.hypot(*(valley - tip)))
        p_loc = tip - base
        p_ax = float(p_loc @ d)
        p_off = float(p_loc @ n)
        inner = target * target - (s_w * r + p_off) ** 2
        if inner <= 0:
            raise LayoutError(f"{codes[pos]}: no flank point matches the valley distance")
        t = p_ax - math.sqrt(inner)
        return base + t * d - s_w * r * n, t

    def solve_alpha(pos: int, midpoint_of) -> float:
        want = lengths[codes[pos]]
        lo, hi = radii[pos] + 0.3, want + 20.0

        def excess(alpha: float) -> float:
            tip = radial_tip(pos, alpha)
            return float(np.hypot(*(tip - midpoint_of(tip)))) - want

        if excess(lo) >= 0:
            raise LayoutError(f"{codes[pos]}: requested length {want} cm is too short for the layout")
        if excess(hi) <= 0:
            raise LayoutError(f"{codes[pos]}: requested length {want} cm is too long for the layout")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if excess(mid) < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    mirror_webs = {0: valleys[0], 1: valleys[1], 4: valleys[3]}
    for pos, valley in mirror_webs.items():
        if abs(float((valley - bases[pos]) @ normals[pos])) <= radii[pos] + 0.02:
            raise LayoutError(f"{codes[pos]}: web too close to the finger axis to mirror")
        alpha = solve_alpha(pos, lambda tip, pos=pos, valley=valley: 0.5 * (valley + flank_match(pos, valley, tip)[0]))
        tip = radial_tip(pos, alpha)
        p_star, t_star = flank_match(pos, valley, tip)
        apex_axial[pos] = alpha
        match_axial[pos] = t_star
        midpoints[pos] = 0.5 * (valley + p_star)
        synthetic[{0: 0, 1: 1, 4: 2}[pos]] = p_star
        tips[pos] = tip

    midpoints[2] = 0.5 * (valleys[1] + valleys[2])
    midpoints[3] = 0.5 * (valleys[2] + valleys[3])
    for pos in (2, 3):
        alpha = solve_alpha(pos, lambda tip, pos=pos: midpoints[pos])
        apex_axial[pos] = alpha
        tips[pos] = radial_tip(pos, alpha)

    for pos, code in enumerate(codes):
        seg_len = apex_axial[pos] - radii[pos]
        if seg_len <= 0.2:
            raise LayoutError(f"{code}: requested length {lengths[code]} cm leaves no capsule body")
        seg_ends[pos] = bases[pos] + seg_len * directions[pos]

    # flank attachment points of the palm outline; the flanks carrying a
    # mirrored endpoint stay exposed below it
    attach_left, t_a0 = flank_point(0, "left", web_radii[0] - 0.25)
    window_lo, window_hi = web_radii[0] + 0.15, web_radii[1] - 0.2
    if window_lo >= window_hi:
        raise LayoutError("no room on the index flank between the thumb web and the index web")
    attach_index, t_a1 = flank_point(1, "left", 0.5 * (window_lo + window_hi))
    attach_right, t_a4 = flank_point(4, "right", web_radii[3] - 0.25)

    # capsule extension below the base: covers every exposed flank point
    ext = np.full(5, 0.2)
    ext[0] = max(0.2, -min(t_a0, match_axial[0]) + 0.12)
    ext[1] = max(0.2, -min(t_a1, match_axial[1]) + 0.12)
    ext[4] = max(0.2, -min(t_a4, match_axial[4]) + 0.12)
    base_ext = bases - ext[:, None] * directions

    for pos in range(5):
        if float(bases[pos] @ directions[pos]) <= ext[pos] + 0.5:
            raise LayoutError("wrist origin must sit behind every finger axis")

    # notches must clear the final capsule bodies
    for j, (a_pos, b_pos, bottom) in enumerate(web_params):
        for pos in (a_pos, b_pos):
            for point in (valleys[j], webs[j][0], webs[j][1]):
                if _seg_point_dist(point, base_ext[pos], seg_ends[pos]) <= radii[pos] + 0.05:
                    raise LayoutError("web bottom is too close to a finger capsule")

    # finger capsules must not touch each other
    for a in range(5):
        for b in range(a + 1, 5):
            gap = _seg_seg_dist(base_ext[a], seg_ends[a], base_ext[b], seg_ends[b])
            if gap <= radii[a] + radii[b] + 0.05:
                raise LayoutError(f"fingers {codes[a]} and {codes[b]} touch; increase splay or gaps")

    half_wrist = spec.wrist_width_cm / 2.0
    stem = spec.stem_length_cm
    # vertical stem sides keep the two wrist-cut crossings symmetric about
    # the origin for any scene rotation, so the detected wrist reference
    # lands on the origin the analytic tips are defined from
    stem_top = 0.4
    polygon = np.array(
        [
            (-half_wrist, -stem),
            (-half_wrist, stem_top),
            tuple(attach_left),
            tuple(right_pts[0]),
            tuple(webs[0][0]),
            tuple(webs[0][1]),
            tuple(attach_index),
            tuple(right_pts[1]),
            tuple(webs[1][0]),
            tuple(webs[1][1]),
            tuple(left_pts[2]),
            tuple(right_pts[2]),
            tuple(webs[2][0]),
            tuple(webs[2][1]),
            tuple(left_pts[3]),
            tuple(right_pts[3]),
            tuple(webs[3][0]),
            tuple(webs[3][1]),
            tuple(left_pts[4]),
            tuple(attach_right),
            (half_wrist, stem_top),
            (half_wrist, -stem),
        ]
    )

    # each notch must be the radial minimum of its stretch of the outline
    anchor_pairs = (
        (right_pts[0], attach_index),
        (right_pts[1], left_pts[2]),
        (right_pts[2], left_pts[3]),
        (right_pts[3], left_pts[4]),
    )
    for j, (pa, pb) in enumerate(anchor_pairs):
        ga, gb = webs[j]
        for anchor, g in ((pa, ga), (pb, gb)):
            if float(np.dot(anchor - g, valleys[j])) <= 0:
                raise LayoutError("web bottom is not a radial minimum of its polyline")
            if np.hypot(*anchor) <= web_radii[j] + 0.05:
                raise LayoutError("web anchor sits too close to the notch radius")

    # outer palm edges must not introduce radial extrema of their own
    for lo, hi in ((polygon[1], polygon[2]), (polygon[-2], polygon[-3])):
        edge = hi - lo
        if float(np.dot(lo, edge)) < 0:
            raise LayoutError("outer palm edge is not radially monotone")

    skeleton = _Skeleton(
        base_centers=bases,
        base_extended=base_ext,
        segment_ends=seg_ends,
        directions=directions,
        radii=radii,
        tips=tips,
        valleys=valleys,
        synthetic=synthetic,
        baseline_midpoints=midpoints,
        polygon=polygon,
        codes=codes,
    )
    if spec.hand == "left":
        skeleton = _mirror(skeleton)
    return skeleton


def _mirror(sk: _Skeleton) -> _Skeleton:
    flip = np.array([-1.0, 1.0])

    def m(arr: np.ndarray) -> np.ndarray:
        return (arr * flip)[::-1].copy()

    return _Skeleton(
        base_centers=m(sk.base_centers),
        base_extended=m(sk.base_extended),
        segment_ends=m(sk.segment_ends),
        directions=m(sk.directions),
        radii=sk.radii[::-1].copy(),
        tips=m(sk.tips),
        valleys=m(sk.valleys),
        synthetic=(sk.synthetic * flip)[::-1].copy(),
        baseline_midpoints=m(sk.baseline_midpoints),
        polygon=(sk.polygon * flip)[::-1].copy(),
        codes=tuple(reversed(sk.codes)),
    )


def _rotate(points: np.ndarray, deg: float) -> np.ndarray:
    phi = math.radians(deg)
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    return points @ rot.T


def _polygon_mask(vertices: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    inside = np.zeros(gx.shape, dtype=bool)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (gy < y1) != (gy < y2)
        x_at = x1 + (gy - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (gx < x_at)
    return inside


def _capsule_mask(a: np.ndarray, b: np.ndarray, r: float, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = max(float(np.dot(ab, ab)), 1e-12)
    t = ((gx - a[0]) * ab[0] + (gy - a[1]) * ab[1]) / denom
    t = np.clip(t, 0.0, 1.0)
    dx = gx - (a[0] + t * ab[0])
    dy = gy - (a[1] + t * ab[1])
    return dx * dx + dy * dy <= r * r


def render_hand(spec: HandSpec) -> RenderResult:
    """Draw the hand and reference square; return the image and exact truth."""
    sk = _build_skeleton(spec)
    rot = spec.rotation_deg

    tips = _rotate(sk.tips, rot)
    valleys = _rotate(sk.valleys, rot)
    synthetic = _rotate(sk.synthetic, rot)
    midpoints = _rotate(sk.baseline_midpoints, rot)
    polygon = _rotate(sk.polygon, rot)
    base_ext = _rotate(sk.base_extended, rot)
    seg_ends = _rotate(sk.segment_ends, rot)

    dirs = _rotate(sk.directions, rot)
    normals = np.stack([dirs[:, 1], -dirs[:, 0]], axis=1)
    lateral = sk.radii[:, None] * normals
    hand_pts = np.vstack(
        [polygon, tips, seg_ends + lateral, seg_ends - lateral, base_ext + lateral, base_ext - lateral]
    )
    hx_lo, hx_hi = hand_pts[:, 0].min() - spec.margin_cm, hand_pts[:, 0].max() + spec.margin_cm
    hy_hi = hand_pts[:, 1].max() + spec.margin_cm

    # reference square to the right of the hand, rotated with the scene
    half = spec.square_side_cm / 2.0
    sq_center = np.array([hx_hi + spec.square_clearance_cm + half * math.sqrt(2.0), half * math.sqrt(2.0) + spec.margin_cm])
    e1 = _rotate(np.array([[1.0, 0.0]]), rot)[0]
    e2 = _rotate(np.array([[0.0, 1.0]]), rot)[0]
    sq_corners = np.array(
        [sq_center + sx * half * e1 + sy * half * e2 for sx, sy in ((-1, 1), (1, 1), (1, -1), (-1, -1))]
    )
    if sq_corners[:, 1].min() <= spec.margin_cm * 0.25:
        raise LayoutError("reference square reaches the wrist edge")

    x_lo = hx_lo
    x_hi = sq_corners[:, 0].max() + spec.margin_cm
    y_hi = max(hy_hi, sq_corners[:, 1].max() + spec.margin_cm)

    ppc = spec.px_per_cm
    width = int(math.ceil((x_hi - x_lo) * ppc))
    height = int(math.ceil(y_hi * ppc))

    cols = x_lo + (np.arange(width) + 0.5) / ppc
    rows = y_hi - (np.arange(height) + 0.5) / ppc
    gx, gy = np.meshgrid(cols, rows)

    mask = _polygon_mask(polygon, gx, gy)
    for pos in range(5):
        mask |= _capsule_mask(base_ext[pos], seg_ends[pos], float(sk.radii[pos]), gx, gy)
    if mask[0].any() or mask[:, 0].any() or mask[:, -1].any():
        raise LayoutError("hand silhouette touches a non-wrist image edge; increase margins")
    if not mask[-1].any():
        raise LayoutError("hand silhouette does not reach the wrist edge")

    # half-open extents rasterize an axis-aligned square of side S to exactly
    # S pixels per axis, independent of sub-pixel placement
    u = gx - sq_center[0]
    v = gy - sq_center[1]
    p1 = u * e1[0] + v * e1[1]
    p2 = u * e2[0] + v * e2[1]
    square = (p1 >= -half) & (p1 < half) & (p2 >= -half) & (p2 < half)
    if (mask & square).any():
        raise LayoutError("hand and reference square overlap")
    full = mask | square

    rng = np.random.default_rng(spec.seed)
    intensity = np.where(full, float(spec.foreground), float(spec.background))
    if spec.noise_sd > 0:
        intensity = intensity + rng.normal(0.0, spec.noise_sd, size=intensity.shape)
    if spec.speckle_fraction > 0:
        n_spots = int(spec.speckle_fraction * intensity.size)
        idx = rng.choice(intensity.size, size=n_spots, replace=False)
        intensity.ravel()[idx] = rng.integers(0, 256, size=n_spots)
    gray = np.clip(np.rint(intensity), 0, 255).astype(np.uint8)
    image = ColorImage(np.repeat(gray[:, :, None], 3, axis=2))

    def to_px(pts: np.ndarray) -> np.ndarray:
        out = np.empty_like(pts, dtype=np.float64)
        out[:, 0] = (pts[:, 0] - x_lo) * ppc - 0.5
        out[:, 1] = (y_hi - pts[:, 1]) * ppc - 0.5
        return out

    # lengths by construction equal the requested ones; re-derive as a check
    lengths = {}
    for pos, code in enumerate(sk.codes):
        measured = float(np.hypot(*(tips[pos] - midpoints[pos])))
        assert abs(measured - spec.finger_lengths_cm[code]) < 1e-9
        lengths[code] = spec.finger_lengths_cm[code]

    pos_of = {code: i for i, code in enumerate(sk.codes)}
    span = float(np.hypot(*(tips[pos_of["F5"]] - tips[pos_of["F2"]])))
    alt_span = float(np.hypot(*(tips[pos_of["F5"]] - tips[pos_of["F1"]])))
    truth = HandMeasurements(
        hand=spec.hand,
        pose=spec.pose,
        lengths_cm=lengths,
        pir_cm=span if spec.pose == "relaxed" else None,
        pie_cm=span if spec.pose == "extended" else None,
        source="manual",
        alt_span_cm=alt_span,
    )

    landmarks_cm = {
        "tips": {code: tips[pos_of[code]].tolist() for code in FINGER_CODES},
        "valleys": valleys.tolist(),
        "synthetic": synthetic.tolist(),
        "midpoints": {code: midpoints[pos_of[code]].tolist() for code in FINGER_CODES},
        "pinky_thumb_span_cm": alt_span,
    }
    landmarks_px = {
        "tips": {code: to_px(tips)[pos_of[code]].tolist() for code in FINGER_CODES},
        "valleys": to_px(valleys).tolist(),
        "synthetic": to_px(synthetic).tolist(),
        "midpoints": {code: to_px(midpoints)[pos_of[code]].tolist() for code in FINGER_CODES},
        "square_corners": to_px(sq_corners).tolist(),
        "px_per_cm": ppc,
    }
    return RenderResult(
        image=image,
        clean_mask=BinaryImage(full),
        truth=truth,
        landmarks_px=landmarks_px,
        landmarks_cm=landmarks_cm,
    )


# --- observation simulator ----------------------------------------------------

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ObservationSpec:
    """Additive measurement model: overall mean plus centered effect vectors."""

    mu: float
    subject_effects: tuple[float, ...]
    surveyor_effects: tuple[float, ...]
    time_effects: tuple[float, ...]
    interaction_effects: tuple[tuple[float, ...], ...]  # surveyor x time
    noise_sd: float = 0.0
    seed: int = 0
    finger_code: str = "F1"
    hand: str = "right"
    time_step_min: int = 30

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        scale = max(1.0, abs(self.mu))
        for name in ("subject_effects", "surveyor_effects", "time_effects"):
            vec = getattr(self, name)
            if len(vec) < 2:
                raise ValueError(f"{name} needs at least two levels")
            if abs(math.fsum(vec)) > _SUM_TOL * scale:
                raise ValueError(f"{name} must sum to zero")
        inter = np.asarray(self.interaction_effects, dtype=np.float64)
        if inter.shape != (len(self.surveyor_effects), len(self.time_effects)):
            raise ValueError("interaction_effects must be surveyor x time shaped")
        if np.abs(inter.sum(axis=0)).max() > _SUM_TOL * scale or np.abs(inter.sum(axis=1)).max() > _SUM_TOL * scale:
            raise ValueError("interaction_effects must sum to zero along rows and columns")


def simulate_observations(spec: ObservationSpec) -> list[Observation]:
    """Draw one observation per (surveyor, time, subject) cell."""
    rng = np.random.default_rng(spec.seed)
    n_s = len(spec.surveyor_effects)
    n_t = len(spec.time_effects)
    n_p = len(spec.subject_effects)
    surveyors = [f"S{i + 1}" for i in range(n_s)]
    subjects = [f"P{j + 1}" for j in range(n_p)]
    times = [spec.time_step_min * t for t in range(n_t)]
    out: list[Observation] = []
    for i in range(n_s):
        for t in range(n_t):
            for j in range(n_p):
                value = (
                    spec.mu
                    + spec.subject_effects[j]
                    + spec.surveyor_effects[i]
                    + spec.time_effects[t]
                    + spec.interaction_effects[i][t]
                )
                if spec.noise_sd > 0:
                    value += rng.normal(0.0, spec.noise_sd)
                out.append(
                    Observation(
                        surveyor_id=surveyors[i],
                        subject_id=subjects[j],
                        time_min=times[t],
                        finger_code=spec.finger_code,
                        hand=spec.hand,
                        length_cm=float(value),
                    )
                )
    return out


def _centered(rng: np.random.Generator, n: int, scale: float) -> tuple[float, ...]:
    v = rng.normal(0.0, scale, size=n)
    return tuple(v - v.mean())


def random_observation_spec(
    seed: int,
    mu: float = 6.0,
    n_subjects: int = 5,
    n_surveyors: int = 5,
    n_times: int = 5,
    subject_scale: float = 0.3,
    surveyor_scale: float = 0.1,
    time_scale: float = 0.1,
    interaction_scale: float = 0.05,
    noise_sd: float = 0.05,
) -> ObservationSpec:
    """Random centered effects for simulation-based tests."""
    rng = np.random.default_rng(seed)
    inter = rng.normal(0.0, interaction_scale, size=(n_surveyors, n_times))
    inter -= inter.mean(axis=0, keepdims=True)
    inter -= inter.mean(axis=1, keepdims=True)
    return ObservationSpec(
        mu=mu,
        subject_effects=_centered(rng, n_subjects, subject_scale),
        surveyor_effects=_centered(rng, n_surveyors, surveyor_scale),
        time_effects=_centered(rng, n_times, time_scale),
        interaction_effects=tuple(tuple(row) for row in inter),
        noise_sd=noise_sd,
        seed=seed + 1,
    )


# --- JSON spec files ------------------------------------------------------------

def hand_spec_from_json(path: str | Path) -> HandSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return HandSpec(**json.load(fh))


def observation_spec_from_json(path: str | Path) -> ObservationSpec:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    data["subject_effects"] = tuple(data["subject_effects"])
    data["surveyor_effects"] = tuple(data["surveyor_effects"])
    data["time_effects"] = tuple(data["time_effects"])
    data["interaction_effects"] = tuple(tuple(row) for row in data["interaction_effects"])
    return ObservationSpec(**data)


def spec_to_json(spec: HandSpec | ObservationSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
