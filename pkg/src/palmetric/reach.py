"""Keyboard-fit analysis: key-combination catalog and percentile-based
reachability reports for cohorts filtered by gender, origin and age group.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CatalogError, CohortError
from .stats import DEFAULT_RANKS, PercentileTable, percentiles

EARLY_TEENS = (17, 18)
LATE_TEENS = (19, 21)

CATALOG_VERSION = 1
DEFAULT_KEYBOARD_WIDTH_CM = 45.0


@dataclass(frozen=True)
class KeyCombo:
    """A two-key combination and its center-to-center distance."""

    name: str
    hand: str  # which hand performs it
    fingers: str
    distance_cm: float

    def __post_init__(self):
        if self.distance_cm <= 0:
            raise ValueError("distance_cm must be positive")
        if self.hand not in ("left", "right"):
            raise ValueError("hand must be 'left' or 'right'")


def builtin_combos() -> list[KeyCombo]:
    """The longest-range key combinations of a standard desktop keyboard."""
    rows = (
        ("SHIFT+5", "left", "Pinky + Index", 13.0),
        ("SHIFT+T", "left", "Pinky + Index", 12.7),
        ("SHIFT+G", "left", "Pinky + Index", 12.5),
        ("SHIFT+B", "left", "Pinky + Index", 12.0),
        ("SHIFT+6", "right", "Pinky + Index", 18.0),
        ("SHIFT+Y", "right", "Pinky + Index", 16.5),
        ("SHIFT+H", "right", "Pinky + Index", 15.5),
        ("SHIFT+N", "right", "Pinky + Index", 14.5),
    )
    return [KeyCombo(*row) for row in rows]


def find_combo(combos: Iterable[KeyCombo], name: str) -> KeyCombo:
    for combo in combos:
        if combo.name == name:
            return combo
    raise CatalogError(f"unknown key combination: {name!r}")


def load_catalog(path: str | Path) -> tuple[list[KeyCombo], dict]:
    """Read a combo catalog file (INI-style key/value rows)."""
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise CatalogError(f"cannot read catalog file {path}")
    if "catalog" not in parser:
        raise CatalogError(f"{path}: missing [catalog] section")
    meta = {
        "version": parser.getint("catalog", "version", fallback=CATALOG_VERSION),
        "keyboard_width_cm": parser.getfloat("catalog", "keyboard_width_cm", fallback=DEFAULT_KEYBOARD_WIDTH_CM),
    }
    combos: list[KeyCombo] = []
    for section in parser.sections():
        if not section.startswith("combo:"):
            continue
        name = section.split(":", 1)[1]
        try:
            combos.append(
                KeyCombo(
                    name=name,
                    hand=parser.get(section, "hand"),
                    fingers=parser.get(section, "fingers"),
                    distance_cm=parser.getfloat(section, "distance_cm"),
                )
            )
        except (configparser.Error, ValueError) as exc:
            raise CatalogError(f"{path}: bad combo section [{section}]: {exc}") from exc
    if not combos:
        raise CatalogError(f"{path}: no [combo:*] sections")
    return combos, meta


def save_catalog(path: str | Path, combos: Sequence[KeyCombo], keyboard_width_cm: float = DEFAULT_KEYBOARD_WIDTH_CM) -> None:
    parser = configparser.ConfigParser()
    parser["catalog"] = {
        "version": str(CATALOG_VERSION),
        "keyboard_width_cm": repr(keyboard_width_cm),
    }
    for combo in combos:
        parser[f"combo:{combo.name}"] = {
            "hand": combo.hand,
            "fingers": combo.fingers,
            "distance_cm": repr(combo.distance_cm),
        }
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def reachable(span_cm: float, combo: KeyCombo, strict: bool = False) -> bool:
    """Whether a hand span covers the combo distance.

    The boundary is inclusive: a span equal to the key distance reaches it.
    ``strict`` switches to a strict inequality.
    """
    if span_cm <= 0:
        raise ValueError("span_cm must be positive")
    if strict:
        return span_cm > combo.distance_cm
    return span_cm >= combo.distance_cm


@dataclass(frozen=True)
class CohortFilter:
    """Optional demographic restrictions; None means no restriction."""

    gender: str | None = None  # M / F
    origin: str | None = None  # urban / rural
    age_group: str | None = None  # early_teens / late_teens

    def __post_init__(self):
        if self.gender is not None and self.gender not in ("M", "F"):
            raise ValueError("gender filter must be 'M' or 'F'")
        if self.origin is not None and self.origin not in ("urban", "rural"):
            raise ValueError("origin filter must be 'urban' or 'rural'")
        if self.age_group is not None and self.age_group not in ("early_teens", "late_teens"):
            raise ValueError("age_group filter must be 'early_teens' or 'late_teens'")

    def matches(self, gender: str, origin: str, age: int) -> bool:
        if self.gender is not None and gender != self.gender:
            return False
        if self.origin is not None and origin != self.origin:
            return False
        if self.age_group is not None and age_group_of(age) != self.age_group:
            return False
        return True

    def describe(self) -> str:
        parts = [
            f"{name}={value}"
            for name, value in (("gender", self.gender), ("origin", self.origin), ("age_group", self.age_group))
            if value is not None
        ]
        return ", ".join(parts) if parts else "no restriction"


def age_group_of(age: int) -> str | None:
    if EARLY_TEENS[0] <= age <= EARLY_TEENS[1]:
        return "early_teens"
    if LATE_TEENS[0] <= age <= LATE_TEENS[1]:
        return "late_teens"
    return None


@dataclass(frozen=True)
class SpanRecord:
    """One subject's span measurement joined with their demographics."""

    subject_id: str
    gender: str
    origin: str
    age: int
    hand: str
    pose: str
    span_cm: float


@dataclass(frozen=True)
class ReachReport:
    """Reachability of each combo at each tabulated percentile rank."""

    cohort: str
    count: int
    ranks: tuple[float, ...]
    percentiles: dict[tuple[str, str], PercentileTable]  # (hand, pose) -> table
    cells: dict[tuple[str, str, float], bool]  # (combo, pose, rank) -> reachable
    threshold_rank: dict[tuple[str, str], float | None]  # smallest reaching rank
    combos: tuple[KeyCombo, ...] = field(default_factory=tuple)


def reach_report(
    records: Iterable[SpanRecord],
    cohort: CohortFilter = CohortFilter(),
    ranks: Sequence[float] = DEFAULT_RANKS,
    combos: Sequence[KeyCombo] | None = None,
    strict: bool = False,
) -> ReachReport:
    """Percentile tables per hand/pose and per-combo reachability cells.

    For each (combo, pose) the threshold rank is the smallest tabulated rank
    whose span value reaches the combo distance; reachability is monotone in
    rank because percentile values are.
    """
    combos = list(builtin_combos() if combos is None else combos)
    selected = [r for r in records if cohort.matches(r.gender, r.origin, r.age)]
    if not selected:
        raise CohortError(f"no records match the cohort filter ({cohort.describe()})")

    tables: dict[tuple[str, str], PercentileTable] = {}
    for hand in ("left", "right"):
        for pose in ("relaxed", "extended"):
            spans = [r.span_cm for r in selected if r.hand == hand and r.pose == pose]
            if spans:
                tables[(hand, pose)] = percentiles(spans, ranks)

    cells: dict[tuple[str, str, float], bool] = {}
    thresholds: dict[tuple[str, str], float | None] = {}
    sorted_ranks = sorted(ranks)
    for combo in combos:
        for pose in ("relaxed", "extended"):
            table = tables.get((combo.hand, pose))
            if table is None:
                continue
            threshold = None
            for rank in sorted_ranks:
                ok = reachable(table.values[rank], combo, strict=strict)
                cells[(combo.name, pose, rank)] = ok
                if ok and threshold is None:
                    threshold = rank
            thresholds[(combo.name, pose)] = threshold

    return ReachReport(
        cohort=cohort.describe(),
        count=len({r.subject_id for r in selected}),
        ranks=tuple(ranks),
        percentiles=tables,
        cells=cells,
        threshold_rank=thresholds,
        combos=tuple(combos),
    )
