"""Statistical machinery: summaries, percentiles, the balanced two-factor
factorial ANOVA of repeated surveyor measurements, Duncan's multiple range
test, mean absolute difference and height regression.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize, special

from .errors import DesignError

FINGER_CODES = ("F1", "F2", "F3", "F4", "F5")
DEFAULT_RANKS = (1, 5, 25, 50, 75, 95, 99)


@dataclass(frozen=True)
class Observation:
    """One repeated measurement: surveyor i measuring subject j at time t."""

    surveyor_id: str
    subject_id: str
    time_min: int
    finger_code: str
    hand: str
    length_cm: float

    def __post_init__(self):
        if self.length_cm <= 0:
            raise ValueError("length_cm must be positive")
        if self.time_min < 0:
            raise ValueError("time_min must be >= 0")
        if self.finger_code not in FINGER_CODES:
            raise ValueError(f"finger_code must be one of {FINGER_CODES}")
        if self.hand not in ("left", "right"):
            raise ValueError("hand must be 'left' or 'right'")


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    median: float
    sd: float  # sample SD (n-1); defined as 0 for n=1
    min: float
    max: float


def summarize(xs: Sequence[float]) -> SummaryStats:
    """Mean, median, sample SD and range of a non-empty sample."""
    arr = np.asarray(list(xs), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty sample")
    if arr.size == 1:
        warnings.warn("sample SD of a single value is defined as 0", stacklevel=2)
        sd = 0.0
    else:
        sd = float(np.std(arr, ddof=1))
    return SummaryStats(
        mean=float(np.mean(arr)),
        median=float(np.median(arr)),
        sd=sd,
        min=float(arr.min()),
        max=float(arr.max()),
    )


@dataclass(frozen=True)
class PercentileTable:
    ranks: tuple[float, ...]
    values: dict[float, float]

    def __post_init__(self):
        ordered = [self.values[r] for r in sorted(self.ranks)]
        if any(b < a for a, b in zip(ordered, ordered[1:])):
            raise ValueError("percentile values must be non-decreasing in rank")


def percentiles(xs: Sequence[float], ranks: Sequence[float] = DEFAULT_RANKS) -> PercentileTable:
    """Percentiles by linear interpolation of order statistics.

    Rank p maps to position (n-1) * p/100 + 1 (one-indexed) and interpolates
    between the bracketing order statistics.
    """
    arr = np.sort(np.asarray(list(xs), dtype=np.float64))
    if arr.size == 0:
        raise ValueError("cannot take percentiles of an empty sample")
    values: dict[float, float] = {}
    for rank in ranks:
        if not 0.0 < rank <= 100.0:
            raise ValueError(f"rank {rank} outside (0, 100]")
        pos = (arr.size - 1) * rank / 100.0
        lo = int(math.floor(pos))
        frac = pos - lo
        hi = min(lo + 1, arr.size - 1)
        values[rank] = float(arr[lo] + frac * (arr[hi] - arr[lo]))
    return PercentileTable(ranks=tuple(ranks), values=values)


# --- F distribution ---------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def f_pvalue(f: float, df1: int, df2: int) -> float:
    """Upper-tail probability of the F(df1, df2) distribution."""
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if f < 0:
        raise ValueError("F statistic must be >= 0")
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return _reg_inc_beta(df2 / 2.0, df1 / 2.0, x)


# --- balanced factorial ANOVA -----------------------------------------------

@dataclass(frozen=True)
class AnovaRow:
    source: str
    df: int
    ss: float
    ms: float | None = None
    f: float | None = None
    p: float | None = None


@dataclass(frozen=True)
class AnovaTable:
    rows: tuple[AnovaRow, ...]

    def row(self, source: str) -> AnovaRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)


SOURCE_SUBJECT = "Subject"
SOURCE_SURVEYOR = "Surveyor"
SOURCE_TIME = "Time"
SOURCE_INTERACTION = "Surveyor x Time"
SOURCE_ERROR = "Error"
SOURCE_TOTAL = "Total"


def factorial_anova(observations: Iterable[Observation], finger_code: str, hand: str) -> AnovaTable:
    """Decompose repeated measurements of one finger into subject, surveyor,
    time and surveyor-by-time components.

    Requires a complete balanced design with exactly one observation per
    (surveyor, time, subject) cell; everything outside the four model terms
    is pooled into the error row.
    """
    selected = [o for o in observations if o.finger_code == finger_code and o.hand == hand]
    if not selected:
        raise DesignError(f"no observations for finger {finger_code}, hand {hand}")

    surveyors = sorted({o.surveyor_id for o in selected})
    times = sorted({o.time_min for o in selected})
    subjects = sorted({o.subject_id for o in selected})
    ns, nt, np_ = len(surveyors), len(times), len(subjects)

    cells = np.full((ns, nt, np_), np.nan)
    s_idx = {s: i for i, s in enumerate(surveyors)}
    t_idx = {t: i for i, t in enumerate(times)}
    p_idx = {p: i for i, p in enumerate(subjects)}
    dupes = []
    for o in selected:
        i, t, j = s_idx[o.surveyor_id], t_idx[o.time_min], p_idx[o.subject_id]
        if not np.isnan(cells[i, t, j]):
            dupes.append((o.surveyor_id, o.time_min, o.subject_id))
        cells[i, t, j] = o.length_cm
    missing = [
        (surveyors[i], times[t], subjects[j])
        for i, t, j in zip(*np.nonzero(np.isnan(cells)))
    ]
    if missing or dupes:
        parts = []
        if missing:
            parts.append(f"missing cells: {missing[:10]}")
        if dupes:
            parts.append(f"duplicated cells: {dupes[:10]}")
        raise DesignError("unbalanced design; " + "; ".join(parts))

    df_subject = np_ - 1
    df_surveyor = ns - 1
    df_time = nt - 1
    df_inter = df_surveyor * df_time
    df_total = ns * nt * np_ - 1
    df_error = df_total - df_subject - df_surveyor - df_time - df_inter
    if df_error <= 0:
        raise DesignError(f"error degrees of freedom are {df_error}; need a larger design")

    grand = cells.mean()
    mean_surveyor = cells.mean(axis=(1, 2))
    mean_time = cells.mean(axis=(0, 2))
    mean_subject = cells.mean(axis=(0, 1))
    mean_st = cells.mean(axis=2)

    ss_subject = ns * nt * float(((mean_subject - grand) ** 2).sum())
    ss_surveyor = nt * np_ * float(((mean_surveyor - grand) ** 2).sum())
    ss_time = ns * np_ * float(((mean_time - grand) ** 2).sum())
    inter_dev = mean_st - mean_surveyor[:, None] - mean_time[None, :] + grand
    ss_inter = np_ * float((inter_dev ** 2).sum())
    ss_total = float(((cells - grand) ** 2).sum())
    ss_error = ss_total - ss_subject - ss_surveyor - ss_time - ss_inter
    if ss_error < 0:  # numerical noise on exact-fit data
        ss_error = max(ss_error, -1e-9 * max(ss_total, 1.0))
        ss_error = max(ss_error, 0.0)

    ms_error = ss_error / df_error

    def effect_row(source: str, ss: float, df: int) -> AnovaRow:
        ms = ss / df
        if ms_error > 0:
            f = ms / ms_error
            p = f_pvalue(f, df, df_error)
        else:
            f = math.inf if ms > 0 else 0.0
            p = 0.0 if ms > 0 else 1.0
        return AnovaRow(source, df, ss, ms, f, p)

    rows = (
        effect_row(SOURCE_SUBJECT, ss_subject, df_subject),
        effect_row(SOURCE_SURVEYOR, ss_surveyor, df_surveyor),
        effect_row(SOURCE_TIME, ss_time, df_time),
        effect_row(SOURCE_INTERACTION, ss_inter, df_inter),
        AnovaRow(SOURCE_ERROR, df_error, ss_error, ms_error),
        AnovaRow(SOURCE_TOTAL, df_total, ss_total),
    )
    return AnovaTable(rows)


@dataclass(frozen=True)
class HypothesisVerdict:
    name: str
    source: str
    p: float
    reject: bool
    interpretable: bool


@dataclass(frozen=True)
class HypothesisReport:
    alpha: float
    verdicts: tuple[HypothesisVerdict, ...]

    def verdict(self, name: str) -> HypothesisVerdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)


def hypothesis_report(table: AnovaTable, alpha: float = 0.05) -> HypothesisReport:
    """Test the accuracy/consistency hypotheses in their gated order.

    The surveyor-by-time interaction is tested first; only when it is
    retained does the model reduce to an additive one, making the surveyor
    (accuracy) and time (consistency) main effects interpretable.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    inter = table.row(SOURCE_INTERACTION)
    surveyor = table.row(SOURCE_SURVEYOR)
    time = table.row(SOURCE_TIME)
    h1_reject = inter.p < alpha
    additive = not h1_reject
    verdicts = (
        HypothesisVerdict("accuracy-consistency", SOURCE_INTERACTION, inter.p, h1_reject, True),
        HypothesisVerdict("accuracy", SOURCE_SURVEYOR, surveyor.p, surveyor.p < alpha, additive),
        HypothesisVerdict("consistency", SOURCE_TIME, time.p, time.p < alpha, additive),
    )
    return HypothesisReport(alpha=alpha, verdicts=verdicts)


# --- studentized range and Duncan's multiple range test ----------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    x, w = _GL_CACHE[n]
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def _range_cdf_unit(q: np.ndarray, k: int, z_nodes: np.ndarray, z_weights: np.ndarray) -> np.ndarray:
    """P(range of k standard normals <= q), vectorized over q."""
    phi = np.exp(-0.5 * z_nodes**2) / math.sqrt(2.0 * math.pi)
    cdf_z = special.ndtr(z_nodes)
    bracket = cdf_z[None, :] - special.ndtr(z_nodes[None, :] - q[:, None])
    bracket = np.clip(bracket, 0.0, 1.0)
    integrand = phi[None, :] * bracket ** (k - 1)
    return k * (integrand @ z_weights)


def studentized_range_cdf(q: float, k: int, df: int) -> float:
    """CDF of the studentized range by double numerical integration."""
    if q <= 0:
        return 0.0
    if k < 2 or df < 1:
        raise ValueError("need k >= 2 and df >= 1")
    z_nodes, z_weights = _gauss_legendre(240, -9.0, 9.0)
    # s = sqrt(chi2_df / df); integrate where its density has support
    from scipy.stats import chi2

    lo = math.sqrt(chi2.ppf(1e-13, df) / df)
    hi = math.sqrt(chi2.ppf(1.0 - 1e-13, df) / df)
    s_nodes, s_weights = _gauss_legendre(220, lo, hi)
    ln_dens = (
        (1.0 - df / 2.0) * math.log(2.0)
        + (df / 2.0) * math.log(df)
        - math.lgamma(df / 2.0)
        + (df - 1.0) * np.log(s_nodes)
        - df * s_nodes**2 / 2.0
    )
    density = np.exp(ln_dens)
    inner = _range_cdf_unit(q * s_nodes, k, z_nodes, z_weights)
    return float(np.dot(s_weights, density * inner))


@lru_cache(maxsize=4096)
def studentized_range_ppf(prob: float, k: int, df: int) -> float:
    """Quantile of the studentized range (inverse of the CDF)."""
    if not 0.0 < prob < 1.0:
        raise ValueError("probability must be in (0, 1)")
    return float(optimize.brentq(lambda q: studentized_range_cdf(q, k, df) - prob, 1e-6, 60.0, xtol=1e-9))


def q_duncan(alpha: float, span: int, df: int) -> float:
    """Duncan critical point for a comparison spanning ``span`` ranked means.

    Uses the studentized range quantile at the protection level
    (1 - alpha)^(span - 1).
    """
    if span < 2:
        raise ValueError("span must be >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    return studentized_range_ppf((1.0 - alpha) ** (span - 1), span, df)


@dataclass(frozen=True)
class DmrtGrouping:
    means: dict[str, float]
    letters: dict[str, str]  # sorted letter string per label, e.g. "ab"
    alpha: float
    lsr: dict[int, float]  # span -> least significant range


def dmrt(
    means: Mapping[str, float],
    n_per_mean: int,
    ms_error: float,
    df_error: int,
    alpha: float = 0.05,
) -> DmrtGrouping:
    """Duncan's multiple range test with letter display.

    Means are ranked; a stretch of ranked means shares a letter when every
    pair inside it differs by no more than the least significant range for
    the pair's own span.  Maximal such stretches get the letters.
    """
    if len(means) < 2:
        raise ValueError("need at least two means")
    if ms_error <= 0:
        raise ValueError("ms_error must be positive")
    if n_per_mean < 1:
        raise ValueError("n_per_mean must be >= 1")

    labels = sorted(means, key=lambda l: (-means[l], l))
    values = [means[l] for l in labels]
    k = len(labels)
    se = math.sqrt(ms_error / n_per_mean)
    lsr = {span: q_duncan(alpha, span, df_error) * se for span in range(2, k + 1)}

    def coherent(i: int, j: int) -> bool:
        # every inner pair must clear the LSR of its own span
        for a in range(i, j + 1):
            for b in range(a + 1, j + 1):
                if values[a] - values[b] > lsr[b - a + 1]:
                    return False
        return True

    # maximal coherent stretches, left to right; coherence of a stretch
    # implies coherence of its sub-stretches, so reach is monotone in i and
    # containment only needs a check against the last kept stretch
    stretches: list[tuple[int, int]] = []
    for i in range(k):
        j = i
        while j + 1 < k and coherent(i, j + 1):
            j += 1
        if stretches and stretches[-1][1] >= j:
            continue
        stretches.append((i, j))

    letters: dict[str, list[str]] = {label: [] for label in labels}
    for rank, (i, j) in enumerate(stretches):
        letter = _letter(rank)
        for idx in range(i, j + 1):
            letters[labels[idx]].append(letter)
    return DmrtGrouping(
        means=dict(means),
        letters={label: "".join(ls) for label, ls in letters.items()},
        alpha=alpha,
        lsr=lsr,
    )


def _letter(rank: int) -> str:
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    out = ""
    rank += 1
    while rank > 0:
        rank, rem = divmod(rank - 1, 26)
        out = alphabet[rem] + out
    return out


# --- simple comparisons -------------------------------------------------------

def mean_abs_diff(y1: Sequence[float], y2: Sequence[float]) -> float:
    """Mean absolute difference between paired samples."""
    a = list(y1)
    b = list(y2)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("need at least one pair")
    return math.fsum(abs(x - y) for x, y in zip(a, b)) / len(a)


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float


def regress_on_height(records: Sequence[tuple[float, float]]) -> RegressionFit:
    """Ordinary least squares of a hand dimension against body height."""
    if len(records) < 2:
        raise ValueError("need at least two records")
    x = np.asarray([r[0] for r in records], dtype=np.float64)
    y = np.asarray([r[1] for r in records], dtype=np.float64)
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("all heights are equal; regression is singular")
    sxy = float(((x - x.mean()) * (y - y.mean())).sum())
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    residuals = y - (slope * x + intercept)
    ss_res = float((residuals**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionFit(slope=slope, intercept=intercept, r_squared=r_squared)
