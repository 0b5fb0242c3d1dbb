"""Encounter-registry cohort construction.

Turns encounter records into a case-control matched multi-record cohort
plus single-record patients, builds ICD-9 indicator features and the
attempt/concurrent-disorder outcome matrices, and screens binary features
with Fisher's exact test. ``RegistryGenerator`` synthesizes registries with
planted structure for tests and demos.
"""

import csv
import datetime as dt
import logging
import re
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from faker import Faker
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from scipy.special import expit

from .config import CohortConfig
from .estimators.base import Dataset
from .expfam import Family
from .metrics import fisher_exact
from .utils.error_handler import ArgumentError, ConfigError, DegenerateInputError, UndefinedMetricError

logger = logging.getLogger(__name__)

ENCOUNTER_COLUMNS = ["patient_id", "date", "age", "sex", "race", "codes", "is_attempt"]
CODE_RE = re.compile(r"^[VE]?\d+(\.\d+)?$")
TRUTHY = ("1", "true", "yes", "y", "t")


class EncounterRecord(BaseModel):
    """One hospital encounter."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    patient_id: str = Field(min_length=1)
    date: dt.date
    age: int = Field(ge=0)
    sex: str
    race: str
    codes: List[str] = Field(default_factory=list)
    is_attempt: bool = False

    @field_validator("codes", mode="before")
    @classmethod
    def split_codes(cls, v):
        """Accept a semicolon-separated string."""
        if isinstance(v, str):
            v = v.split(";")
        return [c.strip() for c in v if c and c.strip()]

    @field_validator("is_attempt", mode="before")
    @classmethod
    def parse_flag(cls, v):
        if isinstance(v, str):
            return v.strip().lower() in TRUTHY
        return v


def load_encounters(path: Path) -> List[EncounterRecord]:
    """
    Read an encounter CSV with header
    ``patient_id,date,age,sex,race,codes,is_attempt``.

    Raises:
        ArgumentError: On a missing column or an invalid row
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(ENCOUNTER_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ArgumentError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                records.append(EncounterRecord.model_validate({k: row[k] for k in ENCOUNTER_COLUMNS}))
            except ValidationError as e:
                raise ArgumentError(f"{path}:{line}: invalid encounter: {e}") from e
    logger.info(f"Loaded {len(records)} encounters from {path}")
    return records


def write_encounters(records: Sequence[EncounterRecord], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ENCOUNTER_COLUMNS)
        for r in records:
            writer.writerow(
                [r.patient_id, r.date.isoformat(), r.age, r.sex, r.race, ";".join(r.codes), int(r.is_attempt)]
            )


@dataclass
class PatientHistory:
    """Feature encounters and the outcome encounter of one patient."""

    patient_id: str
    history: List[EncounterRecord]
    outcome: EncounterRecord
    is_case: bool

    @property
    def age(self) -> int:
        return self.outcome.age


def group_by_patient(records: Sequence[EncounterRecord]) -> Dict[str, List[EncounterRecord]]:
    """Encounters per patient in date order (stable for equal dates)."""
    groups: Dict[str, List[EncounterRecord]] = {}
    for r in records:
        groups.setdefault(r.patient_id, []).append(r)
    return {pid: sorted(encs, key=lambda e: e.date) for pid, encs in groups.items()}


def split_multi_single(
    records: Sequence[EncounterRecord],
) -> Tuple[List[PatientHistory], List[PatientHistory], List[str]]:
    """
    Classify patients as multi-record or single-record.

    Single-record patients have exactly one encounter. A multi-record case
    has a non-attempt first encounter and a later attempt; its outcome is the
    first attempt and its history the encounters before it. A multi-record
    control never attempts; its last encounter is the outcome. Patients whose
    first of several encounters is an attempt are excluded.

    Returns:
        (multi, single, excluded_patient_ids)
    """
    multi, single, excluded = [], [], []
    for pid, encs in group_by_patient(records).items():
        if len(encs) == 1:
            single.append(PatientHistory(pid, [], encs[0], encs[0].is_attempt))
            continue
        if encs[0].is_attempt:
            excluded.append(pid)
            continue
        attempt = next((i for i, e in enumerate(encs) if e.is_attempt), None)
        if attempt is None:
            multi.append(PatientHistory(pid, encs[:-1], encs[-1], False))
        else:
            multi.append(PatientHistory(pid, encs[:attempt], encs[attempt], True))
    logger.info(
        f"Split registry: {len(multi)} multi-record, {len(single)} single-record, "
        f"{len(excluded)} excluded"
    )
    return multi, single, excluded


@dataclass
class MatchResult:
    """Cases with their matched controls, in case order."""

    matches: Dict[str, List[str]]
    cohort: List[PatientHistory]
    flagged: List[str] = field(default_factory=list)


def match_case_control(
    cases: Sequence[PatientHistory],
    controls: Sequence[PatientHistory],
    cfg: CohortConfig,
) -> MatchResult:
    """
    Greedy 1:k matching on sex, race and outcome-encounter age.

    Cases are processed in input order; each draws up to ``control_ratio``
    eligible controls without replacement from the remaining pool. Cases
    with fewer eligible controls keep what they get and are flagged.
    """
    rng = np.random.default_rng(cfg.seed)
    available = list(controls)
    matches: Dict[str, List[str]] = {}
    cohort: List[PatientHistory] = []
    flagged: List[str] = []
    for case in cases:
        eligible = [
            i
            for i, c in enumerate(available)
            if c.outcome.sex == case.outcome.sex
            and c.outcome.race == case.outcome.race
            and abs(c.age - case.age) <= cfg.age_window
        ]
        take = min(cfg.control_ratio, len(eligible))
        chosen = [eligible[i] for i in rng.choice(len(eligible), size=take, replace=False)] if take else []
        picked = [available[i] for i in chosen]
        for i in sorted(chosen, reverse=True):
            available.pop(i)
        matches[case.patient_id] = [c.patient_id for c in picked]
        cohort.append(case)
        cohort.extend(picked)
        if take < cfg.control_ratio:
            flagged.append(case.patient_id)
    if flagged:
        logger.warning(f"{len(flagged)} cases matched fewer than {cfg.control_ratio} controls")
    return MatchResult(matches=matches, cohort=cohort, flagged=flagged)


def expand_pattern(pattern: str) -> List[str]:
    """
    Code prefixes for one surrogate-map pattern.

    ``"296.2"`` is a prefix; ``"303.0-303.9"`` and ``"291.0-5"`` are ranges
    expanded inclusively at the final digit.

    Raises:
        ConfigError: On a malformed pattern
    """
    pattern = pattern.strip()
    if "-" not in pattern:
        if not CODE_RE.match(pattern):
            raise ConfigError(f"malformed code pattern: {pattern!r}")
        return [pattern]
    start, _, end = pattern.partition("-")
    if not CODE_RE.match(start) or not end or not re.match(r"^[VE]?[\d.]+$", end):
        raise ConfigError(f"malformed code range: {pattern!r}")
    if "." not in end and len(end) < len(start):
        end = start[: len(start) - len(end)] + end
    if len(end) != len(start) or start[:-1] != end[:-1] or not (start[-1].isdigit() and end[-1].isdigit()):
        raise ConfigError(f"range {pattern!r} must differ only in its final digit")
    lo, hi = int(start[-1]), int(end[-1])
    if lo > hi:
        raise ConfigError(f"range {pattern!r} is descending")
    return [start[:-1] + str(d) for d in range(lo, hi + 1)]


def compile_surrogate_map(surrogate_map: Dict[str, List[str]]) -> Dict[str, List[str]]:
    """Disorder -> flat prefix list, in map order."""
    return {name: [p for pattern in patterns for p in expand_pattern(pattern)] for name, patterns in surrogate_map.items()}


def _matches_any(codes: Sequence[str], prefixes: Sequence[str]) -> bool:
    return any(code.startswith(prefix) for code in codes for prefix in prefixes)


def truncate_code(code: str, digits: int) -> str:
    """Characters before the decimal point, cut to ``digits``."""
    return code.split(".")[0][:digits]


def build_outcomes(
    patients: Sequence[PatientHistory], cfg: CohortConfig
) -> Tuple[np.ndarray, List[str]]:
    """
    Attempt indicator and concurrent-disorder indicators at the outcome encounter.

    Returns:
        (matrix with one row per patient, ["attempt", *disorders])
    """
    compiled = compile_surrogate_map(cfg.surrogate_map)
    names = ["attempt"] + list(compiled)
    Y = np.zeros((len(patients), len(names)))
    for i, patient in enumerate(patients):
        Y[i, 0] = float(patient.outcome.is_attempt)
        for k, prefixes in enumerate(compiled.values(), start=1):
            Y[i, k] = float(_matches_any(patient.outcome.codes, prefixes))
    return Y, names


def build_features(
    patients: Sequence[PatientHistory], cfg: CohortConfig
) -> Tuple[np.ndarray, List[str]]:
    """
    Demographics, truncated-code indicators and prior-disorder indicators.

    Age, sex and race come from the outcome encounter; codes come from the
    history encounters. Codes with prevalence at or below the floor are
    dropped.

    Raises:
        DegenerateInputError: If there are no patients
    """
    if not patients:
        raise DegenerateInputError("cannot build features for an empty cohort")
    m = len(patients)
    sexes = sorted({p.outcome.sex for p in patients})
    races = sorted({p.outcome.race for p in patients})

    code_sets = [
        {truncate_code(c, cfg.truncate_digits) for e in p.history for c in e.codes} for p in patients
    ]
    counts: Dict[str, int] = {}
    for codes in code_sets:
        for c in codes:
            counts[c] = counts.get(c, 0) + 1
    retained = sorted(c for c, n in counts.items() if n / m > cfg.code_prevalence_floor)
    compiled = compile_surrogate_map(cfg.surrogate_map)

    names = (
        ["age"]
        + [f"sex:{s}" for s in sexes]
        + [f"race:{r}" for r in races]
        + [f"icd9:{c}" for c in retained]
        + [f"prior:{d}" for d in compiled]
    )
    X = np.zeros((m, len(names)))
    column = {name: j for j, name in enumerate(names)}
    for i, p in enumerate(patients):
        X[i, 0] = p.age
        X[i, column[f"sex:{p.outcome.sex}"]] = 1.0
        X[i, column[f"race:{p.outcome.race}"]] = 1.0
        for c in code_sets[i]:
            j = column.get(f"icd9:{c}")
            if j is not None:
                X[i, j] = 1.0
        history_codes = [c for e in p.history for c in e.codes]
        for d, prefixes in compiled.items():
            X[i, column[f"prior:{d}"]] = float(_matches_any(history_codes, prefixes))
    logger.info(f"Built {len(names)} features ({len(retained)} codes retained of {len(counts)})")
    return X, names


def log_odds_ratio(table) -> float:
    """log(ad / bc) of a 2x2 table; ±inf when one side is zero, 0 when both are."""
    (a, b), (c, d) = np.asarray(table, dtype=float)
    num, den = a * d, b * c
    if num == 0 and den == 0:
        return 0.0
    if den == 0:
        return float("inf")
    if num == 0:
        return float("-inf")
    return float(np.log(num / den))


def exposure_table(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """[[x=1,y=1, x=1,y=0], [x=0,y=1, x=0,y=0]] counts."""
    x = np.asarray(x).astype(bool)
    y = np.asarray(y).astype(bool)
    return np.array(
        [[np.sum(x & y), np.sum(x & ~y)], [np.sum(~x & y), np.sum(~x & ~y)]], dtype=int
    )


def fisher_screen(X: np.ndarray, y: np.ndarray, top_k: int = 100) -> np.ndarray:
    """
    Indices of the ``top_k`` binary features most associated with y.

    Features are ordered by Fisher p ascending, then by larger |log OR|, then
    by index. A feature with a zero margin gets p = 1.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ArgumentError(f"X {X.shape} and y {y.shape} are not conformable")
    p_values = np.ones(X.shape[1])
    strength = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        table = exposure_table(X[:, j], y)
        try:
            p_values[j] = fisher_exact(table)
        except UndefinedMetricError:
            p_values[j] = 1.0
        strength[j] = abs(log_odds_ratio(table))
    order = np.lexsort((np.arange(X.shape[1]), -strength, p_values))
    return order[:top_k]


@dataclass
class Cohort:
    """Matched multi-record patients plus all single-record patients."""

    multi: List[PatientHistory]
    single: List[PatientHistory]
    flagged: List[str] = field(default_factory=list)
    excluded: List[str] = field(default_factory=list)


def build_cohort(records: Sequence[EncounterRecord], cfg: CohortConfig) -> Cohort:
    """Split, then match multi-record cases to multi-record controls."""
    multi, single, excluded = split_multi_single(records)
    cases = [p for p in multi if p.is_case]
    controls = [p for p in multi if not p.is_case]
    if not cases:
        raise DegenerateInputError("registry has no multi-record cases")
    matched = match_case_control(cases, controls, cfg)
    return Cohort(multi=matched.cohort, single=single, flagged=matched.flagged, excluded=excluded)


def build_dataset(cohort: Cohort, cfg: CohortConfig) -> Dataset:
    """Dataset with binary outcomes: attempt (primary) then the disorders."""
    X, feature_names = build_features(cohort.multi, cfg)
    Y, outcome_names = build_outcomes(cohort.multi, cfg)
    Yt, _ = build_outcomes(cohort.single, cfg)
    return Dataset(
        X=X,
        Y=Y,
        Ytilde=Yt.reshape(len(cohort.single), len(outcome_names)),
        q0=1,
        families=[Family.BERNOULLI] * len(outcome_names),
        feature_names=feature_names,
        outcome_names=outcome_names,
    )


# Synthetic registry

BACKGROUND_CODES = [
    "401.9", "250.00", "272.4", "486", "599.0", "780.6", "428.0", "715.90",
    "493.90", "530.81", "564.00", "789.00", "V58.61", "244.9", "285.9", "784.0",
]
REPRESENTATIVE_CODES = {
    "Depressive": "296.20",
    "Alcohol": "303.90",
    "Drug": "304.30",
    "Anxiety": "300.02",
    "Posttraumatic": "309.81",
    "Schizophrenia": "295.30",
    "Bipolar": "296.40",
}
ATTEMPT_CODE = "E950.0"
SEXES = ["F", "M"]
RACES = ["white", "black", "asian", "other"]
RACE_WEIGHTS = [0.6, 0.2, 0.1, 0.1]


class RegistryGenerator:
    """Synthesize an encounter registry with planted disorder-attempt structure.

    Each patient carries a set of mental disorders; disorder codes appear on
    their encounters and raise the per-encounter attempt probability.
    Single-record attempters share the same disorder profile.
    """

    def __init__(
        self,
        seed: int = 0,
        single_fraction: float = 0.5,
        disorder_rate: float = 0.15,
        base_logit: float = -3.0,
        disorder_effect: float = 0.9,
    ):
        self.rng = np.random.default_rng(seed)
        self.fake = Faker()
        self.fake.seed_instance(seed)
        self.single_fraction = single_fraction
        self.disorder_rate = disorder_rate
        self.base_logit = base_logit
        self.disorder_effect = disorder_effect

    def _encounter(self, pid, when, age, sex, race, disorders, attempt_logit) -> EncounterRecord:
        rng = self.rng
        codes = list(rng.choice(BACKGROUND_CODES, size=int(rng.integers(1, 4)), replace=False))
        for d in disorders:
            if rng.random() < 0.6:
                codes.append(REPRESENTATIVE_CODES[d])
        attempt = bool(rng.random() < expit(attempt_logit))
        if attempt:
            codes.append(ATTEMPT_CODE)
        return EncounterRecord(
            patient_id=pid, date=when, age=age, sex=sex, race=race, codes=codes, is_attempt=attempt
        )

    def patient(self) -> List[EncounterRecord]:
        rng = self.rng
        pid = self.fake.unique.bothify(text="PT-########")
        sex = SEXES[int(rng.integers(len(SEXES)))]
        race = RACES[int(rng.choice(len(RACES), p=RACE_WEIGHTS))]
        age = int(rng.integers(15, 80))
        disorders = [d for d in REPRESENTATIVE_CODES if rng.random() < self.disorder_rate]
        risk = self.base_logit + self.disorder_effect * len(disorders)
        when = self.fake.date_between(start_date=dt.date(2010, 1, 1), end_date=dt.date(2014, 12, 31))

        if rng.random() < self.single_fraction:
            return [self._encounter(pid, when, age, sex, race, disorders, risk + 1.0)]

        encounters = []
        for k in range(int(rng.integers(2, 6))):
            # first encounters rarely attempt, leaving a small excluded group
            logit = risk - 2.5 if k == 0 else risk
            enc = self._encounter(pid, when, age, sex, race, disorders, logit)
            encounters.append(enc)
            if enc.is_attempt and k > 0:
                break
            gap = int(rng.integers(10, 400))
            when = when + timedelta(days=gap)
            age = age + (1 if rng.random() < gap / 365.0 else 0)
        return encounters

    def generate(self, n_patients: int) -> List[EncounterRecord]:
        records: List[EncounterRecord] = []
        for _ in range(n_patients):
            records.extend(self.patient())
        logger.info(f"Generated {len(records)} encounters for {n_patients} patients")
        return records


def generate_registry(n_patients: int, seed: int = 0, **kwargs) -> List[EncounterRecord]:
    """Synthetic registry of ``n_patients`` patients; see ``RegistryGenerator``."""
    if n_patients < 1:
        raise ArgumentError(f"n_patients must be positive, got {n_patients}")
    return RegistryGenerator(seed=seed, **kwargs).generate(n_patients)
