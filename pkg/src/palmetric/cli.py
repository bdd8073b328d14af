"""Command-line interface: measurement, batch runs, statistics, ANOVA,
Duncan groupings, reachability reports, height regression and the synthetic
generators.

Configuration precedence is flags > config file (``--config`` or the
``PALMETRIC_CONFIG`` environment variable) > built-in defaults.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import __version__, config as config_mod, csvio, imageio, reach as reach_mod, stats as stats_mod, synthgen
from .config import MeasureConfig, build_measure_config
from .errors import PalmetricError
from .landmarks import FINGER_CODES, measure_hand_detailed, measurement_comparison
from .raster import preprocess_stages

SCHEMA_VERSION = 1

_IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pbm", ".pnm")


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


def _load_measure_config(config_path: str | None, **flags) -> MeasureConfig:
    path = Path(config_path) if config_path else config_mod.default_config_path()
    file_values = config_mod.load_config_file(path) if path else None
    try:
        return build_measure_config(file_values, **flags)
    except (TypeError, ValueError) as exc:
        raise _fail(exc) from exc


def _emit_json(payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Hand anthropometry from silhouette images and its fit statistics."""


measure_options = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON config file (or set PALMETRIC_CONFIG)."),
    click.option("--sigma", type=float, default=None, help="Plateau threshold, fraction of the profile maximum (default 0.001)."),
    click.option("--smooth-window", type=int, default=None, help="Moving-average width for the radial profile (default 11)."),
    click.option("--median-radius", type=int, default=None, help="Median filter radius (default 1)."),
    click.option("--threshold", type=int, default=None, help="Fixed binarization threshold (default: Otsu)."),
    click.option("--invert", is_flag=True, default=None, help="Treat dark pixels as foreground."),
    click.option("--erode-radius", type=int, default=None),
    click.option("--erode-passes", type=int, default=None),
    click.option("--dilate-radius", type=int, default=None),
    click.option("--dilate-passes", type=int, default=None),
    click.option("--square-side-cm", type=float, default=None, help="Reference square side (default 5.0 cm)."),
    click.option("--span-fingers", type=click.Choice(config_mod.SPAN_CHOICES), default=None, help="Finger pair for the PIR/PIE span (default pinky-index)."),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


def _measure_one(path: Path, hand: str, pose: str, cfg: MeasureConfig):
    image = imageio.read_color_image(path)
    return measure_hand_detailed(image, hand, pose, cfg)


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--hand", type=click.Choice(["left", "right"]), required=True)
@click.option("--pose", type=click.Choice(["relaxed", "extended"]), required=True)
@click.option("--subject-id", default="", help="Subject id for the CSV row.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the CSV row here instead of stdout.")
@click.option("--json", "as_json", is_flag=True, help="Emit a JSON object instead of CSV.")
@click.option("--debug-landmarks", is_flag=True, help="Include landmark coordinates in the JSON output.")
@click.option("--dump-stages", type=click.Path(file_okay=False), default=None, help="Write the intermediate preprocessing images as PGM.")
@_with_options(measure_options)
def measure(image, hand, pose, subject_id, out, as_json, debug_landmarks, dump_stages, config_path, **flags):
    """Measure finger lengths and the pinky span from one image."""
    cfg = _load_measure_config(config_path, **flags)
    try:
        if dump_stages:
            stage_dir = Path(dump_stages)
            stage_dir.mkdir(parents=True, exist_ok=True)
            img = imageio.read_color_image(image)
            for index, (name, stage) in enumerate(preprocess_stages(img, cfg.preprocess), start=1):
                imageio.write_pgm(stage_dir / f"{index:02d}_{name}.pgm", stage)
        detail = _measure_one(Path(image), hand, pose, cfg)
    except PalmetricError as exc:
        raise _fail(exc) from exc
    row = csvio.MeasurementRow(subject_id=subject_id, measurements=detail.measurements)
    if as_json:
        m = detail.measurements
        payload = {
            "subject_id": subject_id,
            "hand": m.hand,
            "pose": m.pose,
            "lengths_cm": m.lengths_cm,
            "pir_cm": m.pir_cm,
            "pie_cm": m.pie_cm,
            "alt_span_cm": m.alt_span_cm,
            "source": m.source,
            "scale_cm_per_px": detail.square.scale,
        }
        if debug_landmarks:
            lm = detail.landmarks
            payload["landmarks"] = {
                "tips": lm.tips.tolist(),
                "valleys": lm.valleys.tolist(),
                "synthetic_points": lm.synthetic_points.tolist(),
                "baselines": lm.baselines.tolist(),
                "midpoints": lm.midpoints.tolist(),
                "square_corners": detail.square.corners.tolist(),
            }
        _emit_json(payload)
    else:
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(csvio.MEASUREMENTS_HEADER)
        writer.writerow(csvio.measurement_fields(row))
        text = buffer.getvalue()
        if out:
            Path(out).write_text(text, encoding="utf-8")
        else:
            click.echo(text, nl=False)


def _batch_worker(args):
    path_str, hand, pose, cfg = args
    path = Path(path_str)
    try:
        detail = _measure_one(path, hand, pose, cfg)
        row = csvio.MeasurementRow(subject_id=path.stem, measurements=detail.measurements)
        return path.name, csvio.measurement_fields(row), None
    except (PalmetricError, OSError) as exc:
        return path.name, None, str(exc)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--hand", type=click.Choice(["left", "right"]), required=True)
@click.option("--pose", type=click.Choice(["relaxed", "extended"]), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output measurements CSV.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel image workers.")
@_with_options(measure_options)
def batch(directory, hand, pose, out, jobs, config_path, **flags):
    """Measure every image in a directory (subject id = file stem)."""
    cfg = _load_measure_config(config_path, **flags)
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not paths:
        raise click.ClickException(f"no images found in {directory}")
    tasks = [(str(p), hand, pose, cfg) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_batch_worker, tasks))
    else:
        results = [_batch_worker(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    failures = [(name, err) for name, _, err in results if err is not None]
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csvio.MEASUREMENTS_HEADER)
        for _, fields, err in results:
            if err is None:
                writer.writerow(fields)
    click.echo(f"measured {len(results) - len(failures)}/{len(results)} images -> {out}")
    if failures:
        for name, err in failures:
            click.echo(f"FAILED {name}: {err}", err=True)
        raise click.ClickException(f"{len(failures)} image(s) failed")


def _parse_ranks(text: str | None) -> tuple[float, ...]:
    if not text:
        return stats_mod.DEFAULT_RANKS
    try:
        ranks = tuple(float(r) for r in text.split(","))
    except ValueError as exc:
        raise _fail(exc) from exc
    return ranks


cohort_options = [
    click.option("--gender", type=click.Choice(["M", "F"]), default=None),
    click.option("--origin", type=click.Choice(["urban", "rural"]), default=None),
    click.option("--age-group", type=click.Choice(["early_teens", "late_teens"]), default=None),
]


@main.command(name="stats")
@click.option("--subjects", "subjects_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--measurements", "measurements_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--ranks", default=None, help="Comma-separated percentile ranks (default 1,5,25,50,75,95,99).")
@click.option("--json", "as_json", is_flag=True)
@_with_options(cohort_options)
def stats_command(subjects_path, measurements_path, ranks, as_json, gender, origin, age_group):
    """Cohort counts, summary statistics and percentile tables."""
    try:
        subjects = csvio.read_subjects(subjects_path)
        rows = csvio.read_measurements(measurements_path)
        cohort = reach_mod.CohortFilter(gender=gender, origin=origin, age_group=age_group)
    except (PalmetricError, ValueError) as exc:
        raise _fail(exc) from exc
    selected = [s for s in subjects if cohort.matches(s.gender, s.origin, s.age)]
    if not selected:
        raise _fail(PalmetricError(f"no subjects match the cohort filter ({cohort.describe()})"))
    ids = {s.subject_id for s in selected}
    kept = [r for r in rows if r.subject_id in ids]

    counts = {
        "total": len(selected),
        "by_gender": {g: sum(1 for s in selected if s.gender == g) for g in ("M", "F")},
        "by_origin": {o: sum(1 for s in selected if s.origin == o) for o in ("urban", "rural")},
        "by_origin_gender": {
            f"{o}/{g}": sum(1 for s in selected if s.origin == o and s.gender == g)
            for o in ("urban", "rural")
            for g in ("M", "F")
        },
        "by_age_group": {
            grp: sum(1 for s in selected if reach_mod.age_group_of(s.age) == grp)
            for grp in ("early_teens", "late_teens")
        },
    }
    summaries = {
        "age": stats_mod.summarize([s.age for s in selected]),
        "height_cm": stats_mod.summarize([s.height_cm for s in selected]),
        "weight_kg": stats_mod.summarize([s.weight_kg for s in selected]),
    }
    rank_values = _parse_ranks(ranks)
    tables: dict[str, dict] = {}
    for hand in ("left", "right"):
        for dim in (*FINGER_CODES, "PIR", "PIE"):
            values = []
            for r in kept:
                m = r.measurements
                if m.hand != hand:
                    continue
                if dim == "PIR":
                    if m.pir_cm is not None:
                        values.append(m.pir_cm)
                elif dim == "PIE":
                    if m.pie_cm is not None:
                        values.append(m.pie_cm)
                else:
                    values.append(m.lengths_cm[dim])
            if values:
                table = stats_mod.percentiles(values, rank_values)
                tables[f"{hand}/{dim}"] = {str(k): v for k, v in sorted(table.values.items())}

    if as_json:
        _emit_json(
            {
                "cohort": cohort.describe(),
                "counts": counts,
                "summaries": {k: dataclasses.asdict(v) for k, v in summaries.items()},
                "percentiles_cm": tables,
            }
        )
        return
    click.echo(f"cohort: {cohort.describe()} ({counts['total']} subjects)")
    click.echo(f"  gender: M={counts['by_gender']['M']} F={counts['by_gender']['F']}")
    click.echo(f"  origin: urban={counts['by_origin']['urban']} rural={counts['by_origin']['rural']}")
    click.echo(f"  age group: early={counts['by_age_group']['early_teens']} late={counts['by_age_group']['late_teens']}")
    for name, s in summaries.items():
        click.echo(f"  {name}: mean {s.mean:.2f}  median {s.median:.2f}  sd {s.sd:.2f}  range {s.min:g}-{s.max:g}")
    if tables:
        header = "dimension".ljust(12) + "".join(f"{r:>9g}" for r in sorted(rank_values))
        click.echo(header)
        for key, values in sorted(tables.items()):
            cells = "".join(f"{values[str(r)]:>9.2f}" for r in sorted(rank_values))
            click.echo(key.ljust(12) + cells)


def _anova_text(table: stats_mod.AnovaTable) -> str:
    lines = [f"{'Source':<18}{'DF':>5}{'SS':>12}{'MS':>12}{'F':>10}  Pr > F"]
    for row in table.rows:
        ms = f"{row.ms:.4f}" if row.ms is not None else ""
        f = f"{row.f:.2f}" if row.f is not None else ""
        if row.p is None:
            p = ""
        elif row.p < 1e-4:
            p = "< 0.0001"
        else:
            p = f"{row.p:.4f}"
        lines.append(f"{row.source:<18}{row.df:>5}{row.ss:>12.4f}{ms:>12}{f:>10}  {p}")
    return "\n".join(lines)


def _anova_payload(table: stats_mod.AnovaTable, report: stats_mod.HypothesisReport) -> dict:
    return {
        "anova": [dataclasses.asdict(row) for row in table.rows],
        "alpha": report.alpha,
        "hypotheses": [dataclasses.asdict(v) for v in report.verdicts],
    }


@main.command()
@click.argument("observations", type=click.Path(exists=True, dir_okay=False))
@click.option("--finger", type=click.Choice(list(FINGER_CODES)), required=True)
@click.option("--hand", type=click.Choice(["left", "right"]), required=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def anova(observations, finger, hand, alpha, as_json):
    """Two-factor factorial ANOVA of repeated surveyor measurements."""
    try:
        obs = csvio.read_observations(observations)
        table = stats_mod.factorial_anova(obs, finger, hand)
        report = stats_mod.hypothesis_report(table, alpha)
    except (PalmetricError, ValueError) as exc:
        raise _fail(exc) from exc
    if as_json:
        _emit_json(_anova_payload(table, report))
        return
    click.echo(_anova_text(table))
    click.echo("")
    for verdict in report.verdicts:
        status = "rejected" if verdict.reject else "retained"
        note = "" if verdict.interpretable else "  (not interpretable: interaction present)"
        click.echo(f"{verdict.name} ({verdict.source}): {status} at alpha={report.alpha:g}, p={verdict.p:.6g}{note}")


@main.command()
@click.argument("observations", type=click.Path(exists=True, dir_okay=False))
@click.option("--finger", type=click.Choice(list(FINGER_CODES)), required=True)
@click.option("--hand", type=click.Choice(["left", "right"]), required=True)
@click.option("--by", "group_by", type=click.Choice(["surveyor", "time", "cell"]), default="cell", show_default=True, help="Group means by surveyor, time, or surveyor-time cell.")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def dmrt(observations, finger, hand, group_by, alpha, as_json):
    """Duncan's multiple range test over the group means."""
    try:
        obs = csvio.read_observations(observations)
        table = stats_mod.factorial_anova(obs, finger, hand)
        selected = [o for o in obs if o.finger_code == finger and o.hand == hand]
        groups: dict[str, list[float]] = {}
        for o in selected:
            if group_by == "surveyor":
                key = o.surveyor_id
            elif group_by == "time":
                key = f"t{o.time_min}"
            else:
                key = f"{o.surveyor_id}@t{o.time_min}"
            groups.setdefault(key, []).append(o.length_cm)
        sizes = {len(v) for v in groups.values()}
        if len(sizes) != 1:
            raise PalmetricError(f"unbalanced groups: sizes {sorted(sizes)}")
        means = {k: sum(v) / len(v) for k, v in groups.items()}
        error_row = table.row(stats_mod.SOURCE_ERROR)
        grouping = stats_mod.dmrt(means, sizes.pop(), error_row.ms, error_row.df, alpha)
    except (PalmetricError, ValueError) as exc:
        raise _fail(exc) from exc
    if as_json:
        _emit_json(
            {
                "alpha": grouping.alpha,
                "means": grouping.means,
                "letters": grouping.letters,
                "least_significant_ranges": {str(k): v for k, v in grouping.lsr.items()},
            }
        )
        return
    click.echo(f"DMRT at alpha={alpha:g} (grouped by {group_by})")
    for label in sorted(grouping.means, key=lambda l: -grouping.means[l]):
        click.echo(f"  {label:<12} {grouping.means[label]:8.4f} cm  {grouping.letters[label]}")


@main.command(name="reach")
@click.option("--measurements", "measurements_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--subjects", "subjects_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--combos", "combos_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Combo catalog file (default: built-in).")
@click.option("--ranks", default=None)
@click.option("--strict", is_flag=True, help="Require span strictly greater than the key distance.")
@click.option("--json", "as_json", is_flag=True)
@_with_options(cohort_options)
def reach_command(measurements_path, subjects_path, combos_path, ranks, strict, as_json, gender, origin, age_group):
    """Which percentile ranks of the cohort reach each key combination."""
    try:
        subjects = csvio.read_subjects(subjects_path)
        rows = csvio.read_measurements(measurements_path)
        records = csvio.span_records(subjects, rows)
        combos = reach_mod.load_catalog(combos_path)[0] if combos_path else None
        cohort = reach_mod.CohortFilter(gender=gender, origin=origin, age_group=age_group)
        report = reach_mod.reach_report(records, cohort, _parse_ranks(ranks), combos, strict=strict)
    except (PalmetricError, ValueError) as exc:
        raise _fail(exc) from exc
    if as_json:
        _emit_json(
            {
                "cohort": report.cohort,
                "subjects": report.count,
                "ranks": list(report.ranks),
                "percentiles_cm": {
                    f"{hand}/{pose}": {str(k): v for k, v in sorted(t.values.items())}
                    for (hand, pose), t in report.percentiles.items()
                },
                "cells": {f"{c}/{pose}/{rank:g}": ok for (c, pose, rank), ok in report.cells.items()},
                "threshold_rank": {f"{c}/{pose}": rank for (c, pose), rank in report.threshold_rank.items()},
            }
        )
        return
    click.echo(f"cohort: {report.cohort} ({report.count} subjects)")
    sorted_ranks = sorted(report.ranks)
    click.echo("combo         pose      dist " + "".join(f"{r:>6g}" for r in sorted_ranks) + "  first rank")
    for combo in report.combos:
        for pose in ("relaxed", "extended"):
            if (combo.name, pose, sorted_ranks[0]) not in report.cells:
                continue
            cells = "".join("     +" if report.cells[(combo.name, pose, r)] else "     -" for r in sorted_ranks)
            threshold = report.threshold_rank.get((combo.name, pose))
            shown = f"{threshold:g}" if threshold is not None else "none"
            click.echo(f"{combo.name:<13} {pose:<9} {combo.distance_cm:4.1f} {cells}  {shown}")


@main.command()
@click.option("--subjects", "subjects_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--measurements", "measurements_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dimension", type=click.Choice([*FINGER_CODES, "PIR", "PIE"]), default=None, help="Restrict to one dimension.")
@click.option("--hand", type=click.Choice(["left", "right"]), default=None)
@click.option("--json", "as_json", is_flag=True)
def regress(subjects_path, measurements_path, dimension, hand, as_json):
    """Least-squares fit of each hand dimension against body height."""
    try:
        subjects = {s.subject_id: s for s in csvio.read_subjects(subjects_path)}
        rows = csvio.read_measurements(measurements_path)
    except PalmetricError as exc:
        raise _fail(exc) from exc
    dims = [dimension] if dimension else [*FINGER_CODES, "PIR", "PIE"]
    hands = [hand] if hand else ["left", "right"]
    fits = {}
    for h in hands:
        for dim in dims:
            pairs = []
            for row in rows:
                m = row.measurements
                subject = subjects.get(row.subject_id)
                if subject is None or m.hand != h:
                    continue
                if dim == "PIR":
                    value = m.pir_cm
                elif dim == "PIE":
                    value = m.pie_cm
                else:
                    value = m.lengths_cm[dim]
                if value is not None:
                    pairs.append((subject.height_cm, value))
            if len(pairs) >= 2:
                try:
                    fits[f"{h}/{dim}"] = stats_mod.regress_on_height(pairs)
                except ValueError as exc:
                    raise _fail(exc) from exc
    if not fits:
        raise click.ClickException("no (height, dimension) pairs to fit")
    if as_json:
        _emit_json({"fits": {k: dataclasses.asdict(v) for k, v in sorted(fits.items())}})
        return
    for key, fit in sorted(fits.items()):
        click.echo(f"{key:<10} length = {fit.slope:+.5f} * height {fit.intercept:+.3f}   r^2 = {fit.r_squared:.4f}")


@main.group()
def synth() -> None:
    """Synthetic data generators with exact ground truth."""


@synth.command(name="hand")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), default=None, help="HandSpec JSON (default: built-in defaults).")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output PNG image.")
@click.option("--truth", "truth_path", type=click.Path(dir_okay=False), default=None, help="Write ground-truth JSON here.")
@click.option("--mask", "mask_path", type=click.Path(dir_okay=False), default=None, help="Write the clean foreground mask as PGM.")
def synth_hand(spec_path, out, truth_path, mask_path):
    """Render a synthetic hand image with analytic ground truth."""
    try:
        spec = synthgen.hand_spec_from_json(spec_path) if spec_path else synthgen.HandSpec()
        result = synthgen.render_hand(spec)
    except (PalmetricError, ValueError, TypeError) as exc:
        raise _fail(exc) from exc
    imageio.write_png(out, result.image)
    if mask_path:
        imageio.write_pgm(mask_path, result.clean_mask)
    if truth_path:
        truth = result.truth
        payload = {
            "schema_version": SCHEMA_VERSION,
            "hand": truth.hand,
            "pose": truth.pose,
            "lengths_cm": truth.lengths_cm,
            "pir_cm": truth.pir_cm,
            "pie_cm": truth.pie_cm,
            "pinky_thumb_span_cm": truth.alt_span_cm,
            "landmarks_px": result.landmarks_px,
        }
        Path(truth_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"rendered {out}")


@synth.command(name="obs")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), default=None, help="ObservationSpec JSON (default: a small random model).")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the default spec when --spec is omitted.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output observations CSV.")
def synth_obs(spec_path, seed, out):
    """Simulate repeated surveyor measurements from the additive model."""
    try:
        spec = synthgen.observation_spec_from_json(spec_path) if spec_path else synthgen.random_observation_spec(seed)
        observations = synthgen.simulate_observations(spec)
    except (PalmetricError, ValueError, TypeError) as exc:
        raise _fail(exc) from exc
    csvio.write_observations(out, observations)
    click.echo(f"wrote {len(observations)} observations -> {out}")


if __name__ == "__main__":
    main(prog_name="palmetric")
