"""CSV schemas and readers/writers for subjects, observations and measurements.

All files are UTF-8 with a header row and '.' decimal separator.  Floats are
written with repr (shortest round-trip), so write-then-read is the identity
and outputs are byte-stable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import PalmetricError
from .landmarks import FINGER_CODES, HandMeasurements
from .stats import Observation

SUBJECTS_HEADER = ["subject_id", "age", "gender", "height_cm", "weight_kg", "origin"]
OBSERVATIONS_HEADER = ["surveyor_id", "subject_id", "time_min", "finger_code", "hand", "length_cm"]
MEASUREMENTS_HEADER = ["subject_id", "hand", "pose", "F1", "F2", "F3", "F4", "F5", "PIR", "PIE", "source"]


class CsvFormatError(PalmetricError):
    """A CSV file does not match its schema."""


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    age: int
    gender: str  # M / F
    height_cm: float
    weight_kg: float
    origin: str  # urban / rural

    def __post_init__(self):
        if self.age < 1:
            raise ValueError("age must be >= 1")
        if self.height_cm <= 0 or self.weight_kg <= 0:
            raise ValueError("height and weight must be positive")
        if self.gender not in ("M", "F"):
            raise ValueError("gender must be 'M' or 'F'")
        if self.origin not in ("urban", "rural"):
            raise ValueError("origin must be 'urban' or 'rural'")


@dataclass(frozen=True)
class MeasurementRow:
    """One measurements.csv row: a HandMeasurements plus its subject."""

    subject_id: str
    measurements: HandMeasurements

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject_id, self.measurements.hand, self.measurements.pose)


def _open_rows(path: str | Path, header: list[str]):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if first != header:
            raise CsvFormatError(f"{path}: expected header {header}, found {first}")
        yield from ((lineno, row) for lineno, row in enumerate(reader, start=2))


def read_subjects(path: str | Path) -> list[SubjectRecord]:
    out = []
    for lineno, row in _open_rows(path, SUBJECTS_HEADER):
        try:
            out.append(
                SubjectRecord(
                    subject_id=row[0],
                    age=int(row[1]),
                    gender=row[2],
                    height_cm=float(row[3]),
                    weight_kg=float(row[4]),
                    origin=row[5],
                )
            )
        except (IndexError, ValueError) as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_subjects(path: str | Path, records: Iterable[SubjectRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUBJECTS_HEADER)
        for r in records:
            writer.writerow([r.subject_id, r.age, r.gender, repr(float(r.height_cm)), repr(float(r.weight_kg)), r.origin])


def read_observations(path: str | Path) -> list[Observation]:
    out = []
    for lineno, row in _open_rows(path, OBSERVATIONS_HEADER):
        try:
            out.append(
                Observation(
                    surveyor_id=row[0],
                    subject_id=row[1],
                    time_min=int(row[2]),
                    finger_code=row[3],
                    hand=row[4],
                    length_cm=float(row[5]),
                )
            )
        except (IndexError, ValueError) as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_observations(path: str | Path, observations: Iterable[Observation]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBSERVATIONS_HEADER)
        for o in observations:
            writer.writerow([o.surveyor_id, o.subject_id, o.time_min, o.finger_code, o.hand, repr(float(o.length_cm))])


def read_measurements(path: str | Path) -> list[MeasurementRow]:
    out = []
    for lineno, row in _open_rows(path, MEASUREMENTS_HEADER):
        try:
            lengths = {code: float(row[3 + k]) for k, code in enumerate(FINGER_CODES)}
            pir = float(row[8]) if row[8] != "" else None
            pie = float(row[9]) if row[9] != "" else None
            m = HandMeasurements(
                hand=row[1],
                pose=row[2],
                lengths_cm=lengths,
                pir_cm=pir,
                pie_cm=pie,
                source=row[10],
            )
            out.append(MeasurementRow(subject_id=row[0], measurements=m))
        except (IndexError, ValueError) as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_measurements(path: str | Path, rows: Iterable[MeasurementRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEASUREMENTS_HEADER)
        for row in rows:
            writer.writerow(measurement_fields(row))


def measurement_fields(row: MeasurementRow) -> list[str]:
    """Field list for one measurements.csv line (spans empty when absent)."""
    m = row.measurements
    return [
        row.subject_id,
        m.hand,
        m.pose,
        *[repr(float(m.lengths_cm[code])) for code in FINGER_CODES],
        repr(float(m.pir_cm)) if m.pir_cm is not None else "",
        repr(float(m.pie_cm)) if m.pie_cm is not None else "",
        m.source,
    ]


def span_records(subjects: Sequence[SubjectRecord], rows: Sequence[MeasurementRow]):
    """Join measurements with demographics into reach.SpanRecord entries."""
    from .reach import SpanRecord

    by_id = {s.subject_id: s for s in subjects}
    missing = sorted({r.subject_id for r in rows} - set(by_id))
    if missing:
        raise CsvFormatError(f"measurements reference unknown subjects: {missing}")
    out = []
    for row in rows:
        subject = by_id[row.subject_id]
        m = row.measurements
        out.append(
            SpanRecord(
                subject_id=row.subject_id,
                gender=subject.gender,
                origin=subject.origin,
                age=subject.age,
                hand=m.hand,
                pose=m.pose,
                span_cm=m.span_cm,
            )
        )
    return out
