"""Dataset schema, ingestion, preprocessing and synthetic generation.

Records arrive as JSONL, one object per line, with the fields of
:class:`RawRecord`.  Preprocessing turns them into classifier-ready
examples: ratings shift to 0-based target classes, coordinates collapse
to coarse geohash cells, birth years fall into equal-frequency age bins,
and gender strings map to dense indices.

Datasets are immutable after construction and safe to share across
concurrent readers.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field

import numpy as np

from .hashing import stable_seed

GEOHASH_BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"

PRIVATE_ATTRIBUTES = ("gender", "location", "age")

RATING_CLASSES = 5

_RECORD_FIELDS = ("text", "rating", "gender", "birth_year", "latitude", "longitude")


class RecordParseError(ValueError):
    """Malformed JSONL input (not valid JSON, or missing/ill-typed fields)."""


class RecordValidationError(ValueError):
    """A parsed record violates a field range."""


@dataclass(frozen=True)
class RawRecord:
    """One review as it appears on disk, before preprocessing."""

    text: str
    rating: int
    gender: str
    birth_year: int
    latitude: float
    longitude: float


@dataclass(frozen=True)
class Example:
    """One preprocessed instance: text, target class, private classes."""

    text: str
    target: int
    private: dict[str, int]


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/test split: fraction assigned to train, rng seed."""

    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of examples plus the class schema.

    ``attribute_schema`` maps each private attribute to its class count;
    subsets keep the parent's schema so class counts stay meaningful after
    a split even if a class is absent from one side.
    """

    examples: tuple[Example, ...]
    attribute_schema: dict[str, int]
    label_count: int = RATING_CLASSES
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for i, ex in enumerate(self.examples):
            if not 0 <= ex.target < self.label_count:
                raise RecordValidationError(f"example {i}: target {ex.target} outside [0, {self.label_count})")
            for attr, idx in ex.private.items():
                k = self.attribute_schema.get(attr)
                if k is None:
                    raise RecordValidationError(f"example {i}: attribute {attr!r} not in schema")
                if not 0 <= idx < k:
                    raise RecordValidationError(f"example {i}: {attr} class {idx} outside [0, {k})")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def texts(self) -> list[str]:
        return [ex.text for ex in self.examples]

    def targets(self) -> np.ndarray:
        return np.array([ex.target for ex in self.examples], dtype=np.int64)

    def private(self, attribute: str) -> np.ndarray:
        """Class indices of ``attribute`` for every example, in order."""
        if attribute not in self.attribute_schema:
            known = ", ".join(sorted(self.attribute_schema))
            raise KeyError(f"attribute {attribute!r} not in schema (have: {known})")
        return np.array([ex.private[attribute] for ex in self.examples], dtype=np.int64)

    def subset(self, indices) -> "Dataset":
        """New dataset holding the examples at ``indices``, same schema."""
        picked = tuple(self.examples[int(i)] for i in indices)
        return Dataset(picked, dict(self.attribute_schema), self.label_count, self.warnings)


def parse_record(line: str, line_number: int | None = None) -> RawRecord:
    """Parse and range-check one JSONL line into a :class:`RawRecord`."""
    where = f"line {line_number}: " if line_number is not None else ""
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as e:
        raise RecordParseError(f"{where}invalid JSON: {e.msg}") from e
    if not isinstance(raw, dict):
        raise RecordParseError(f"{where}expected a JSON object, got {type(raw).__name__}")
    missing = [k for k in _RECORD_FIELDS if k not in raw]
    if missing:
        raise RecordParseError(f"{where}missing fields: {', '.join(missing)}")
    try:
        rec = RawRecord(
            text=str(raw["text"]),
            rating=int(raw["rating"]),
            gender=str(raw["gender"]),
            birth_year=int(raw["birth_year"]),
            latitude=float(raw["latitude"]),
            longitude=float(raw["longitude"]),
        )
    except (TypeError, ValueError) as e:
        raise RecordParseError(f"{where}ill-typed field: {e}") from e
    if rec.rating not in (1, 2, 3, 4, 5):
        raise RecordValidationError(f"{where}rating must be in 1..5, got {rec.rating}")
    _check_coordinates(rec.latitude, rec.longitude, where)
    return rec


def _check_coordinates(latitude: float, longitude: float, where: str = "") -> None:
    if not np.isfinite(latitude) or not -90.0 <= latitude <= 90.0:
        raise RecordValidationError(f"{where}latitude must be in [-90, 90], got {latitude}")
    if not np.isfinite(longitude) or not -180.0 <= longitude <= 180.0:
        raise RecordValidationError(f"{where}longitude must be in [-180, 180], got {longitude}")


def load_records_jsonl(path) -> list[RawRecord]:
    """Read a JSONL dataset file; blank lines are skipped."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            records.append(parse_record(line, line_number=i))
    if not records:
        raise RecordParseError(f"no records found in {path}")
    return records


def save_records_jsonl(records, path) -> None:
    """Write records as JSONL with a fixed key order (byte-stable)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "text": rec.text,
                "rating": rec.rating,
                "gender": rec.gender,
                "birth_year": rec.birth_year,
                "latitude": rec.latitude,
                "longitude": rec.longitude,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def geohash_encode(latitude: float, longitude: float, precision: int = 2) -> str:
    """Encode coordinates as a base-32 geohash of exactly ``precision`` chars.

    Interleaves longitude/latitude interval halvings, longitude first, five
    bits per output character.  A coordinate exactly on a cell midpoint goes
    to the upper half, so (0, 0) encodes to "s".
    """
    if precision < 1:
        raise RecordValidationError(f"precision must be >= 1, got {precision}")
    _check_coordinates(latitude, longitude)
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    chars: list[str] = []
    bits = 0
    nbits = 0
    lon_turn = True
    while len(chars) < precision:
        if lon_turn:
            mid = (lon_lo + lon_hi) / 2.0
            bit = longitude >= mid
            if bit:
                lon_lo = mid
            else:
                lon_hi = mid
        else:
            mid = (lat_lo + lat_hi) / 2.0
            bit = latitude >= mid
            if bit:
                lat_lo = mid
            else:
                lat_hi = mid
        bits = (bits << 1) | int(bit)
        nbits += 1
        lon_turn = not lon_turn
        if nbits == 5:
            chars.append(GEOHASH_BASE32[bits])
            bits = 0
            nbits = 0
    return "".join(chars)


def bin_birth_years(years, k: int) -> tuple[list[int], list[int]]:
    """Split years into ``k`` equal-frequency bins.

    Returns ``(edges, indices)``: ``k - 1`` ascending year thresholds and the
    bin index of every input year (same order as given).  Edges act as
    inclusive upper bounds, so a year equal to an edge lands in the older bin
    below it.  Class 0 is the oldest cohort and indices grow with year.
    Bin populations differ by at most one unless duplicate years force a
    larger imbalance; every bin is guaranteed non-empty.
    """
    years = list(years)
    if not years:
        raise ValueError("years must be non-empty")
    if k < 2:
        raise ValueError(f"bin count must be >= 2, got {k}")
    ordered = sorted(years)
    distinct = sorted(set(ordered))
    if k > len(distinct):
        raise ValueError(f"cannot form {k} non-degenerate bins from {len(distinct)} distinct years")
    n = len(ordered)
    # cumulative population at each distinct year (count of years <= value)
    cums = [bisect.bisect_right(ordered, v) for v in distinct]
    edges: list[int] = []
    prev = -1
    for i in range(1, k):
        target = i * n / k
        lo = prev + 1
        hi = len(distinct) - 1 - (k - i)  # leave >= 1 distinct value per remaining bin
        best = lo
        for j in range(lo, hi + 1):
            if abs(cums[j] - target) < abs(cums[best] - target):
                best = j
        edges.append(distinct[best])
        prev = best
    indices = assign_bins(years, edges)
    return edges, indices


def assign_bins(years, edges) -> list[int]:
    """Bin index per year given ascending inclusive-upper-bound edges."""
    return [bisect.bisect_left(edges, y) for y in years]


def preprocess(records, location_precision: int = 2, age_bins: int = 6) -> Dataset:
    """Turn raw records into a :class:`Dataset`.

    Gender values map to indices by lexicographic order; geohash cells map to
    dense indices in order of first appearance; birth years fall into
    equal-frequency bins; ratings shift to 0-based targets.  Degenerate
    inputs (a single gender, geohash or birth year) downgrade to warnings in
    the dataset metadata rather than errors, with the age bin count clamped
    to the number of distinct years.
    """
    records = list(records)
    if not records:
        raise ValueError("records must be non-empty")
    warnings: list[str] = []

    genders = sorted({r.gender for r in records})
    gender_index = {g: i for i, g in enumerate(genders)}
    if len(genders) < 2:
        warnings.append(f"only {len(genders)} distinct gender value observed")

    geo_index: dict[str, int] = {}
    location_classes: list[int] = []
    for r in records:
        cell = geohash_encode(r.latitude, r.longitude, location_precision)
        if cell not in geo_index:
            geo_index[cell] = len(geo_index)
        location_classes.append(geo_index[cell])
    if len(geo_index) < 2:
        warnings.append(f"only {len(geo_index)} distinct geohash observed")

    years = [r.birth_year for r in records]
    distinct_years = len(set(years))
    k_eff = min(age_bins, distinct_years)
    if k_eff < age_bins:
        warnings.append(f"only {distinct_years} distinct birth years; using {max(k_eff, 1)} age bins")
    if k_eff >= 2:
        _, age_classes = bin_birth_years(years, k_eff)
    else:
        age_classes = [0] * len(records)
        k_eff = 1

    examples = tuple(
        Example(
            text=r.text,
            target=r.rating - 1,
            private={
                "gender": gender_index[r.gender],
                "location": loc,
                "age": age,
            },
        )
        for r, loc, age in zip(records, location_classes, age_classes)
    )
    schema = {
        "gender": len(genders),
        "location": len(geo_index),
        "age": k_eff,
    }
    return Dataset(examples, schema, RATING_CLASSES, tuple(warnings))


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic disjoint (train, test) index arrays covering ``range(n)``.

    Both sides preserve the dataset's original ordering; only membership is
    shuffled.  ``len(train) == round(train_fraction * n)``.
    """
    if n < 2:
        raise ValueError(f"need at least 2 examples to split, got {n}")
    rng = np.random.default_rng(stable_seed(spec.seed, "split"))
    perm = rng.permutation(n)
    n_train = int(round(spec.train_fraction * n))
    train = np.sort(perm[:n_train])
    test = np.sort(perm[n_train:])
    return train, test


def split_dataset(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Split into (train, test) datasets per :func:`split_indices`."""
    train_idx, test_idx = split_indices(len(dataset), spec)
    return dataset.subset(train_idx), dataset.subset(test_idx)


# --- synthetic data ---------------------------------------------------------

SENTIMENT_WORDS = ("awful", "poor", "okay", "good", "excellent")  # index rating-1

FILLER_WORDS = (
    "the", "order", "arrived", "service", "item", "with",
    "was", "this", "have", "they", "from", "store",
)

# Anchor coordinates inside the UK bounding box, one per coarse geohash cell;
# jitter of +-0.15 degrees stays inside each anchor's precision-2 cell.
UK_ANCHORS = (
    (50.30, -4.10),
    (51.50, -0.50),
    (52.60, 1.30),
    (57.50, -4.20),
    (50.10, 1.00),
)

_JITTER = 0.15

_GENDER_VALUES = ("F", "M")

_BIRTH_YEAR_MIN = 1940
_BIRTH_DECADES = 6


def _marker_token(attribute: str, class_index: int) -> str:
    return f"{attribute}tag{class_index}"


def generate_synthetic_records(n: int, leak_strength: float, seed: int) -> list[RawRecord]:
    """Generate ``n`` records whose texts leak the private attributes.

    Each text holds one sentiment word fixed by the rating, a few neutral
    filler words, and, independently per attribute with probability
    ``leak_strength``, a marker token naming the attribute class that
    preprocessing will assign.  Marker/class agreement is exact because the
    generator runs the same geohash and age-binning rules on its own draws.
    Deterministic: same (n, leak_strength, seed) gives byte-identical output.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= leak_strength <= 1.0:
        raise ValueError(f"leak_strength must be in [0, 1], got {leak_strength}")
    rng = np.random.default_rng(stable_seed(seed, "synthetic"))

    genders = [
        _GENDER_VALUES[int(g)] for g in rng.integers(0, len(_GENDER_VALUES), size=n)
    ]
    anchor_ids = rng.integers(0, len(UK_ANCHORS), size=n)
    decades = rng.integers(0, _BIRTH_DECADES, size=n)
    ratings = rng.integers(1, 6, size=n)
    year_offsets = rng.integers(0, 10, size=n)
    lat_jitter = rng.uniform(-_JITTER, _JITTER, size=n)
    lon_jitter = rng.uniform(-_JITTER, _JITTER, size=n)

    years = [_BIRTH_YEAR_MIN + int(d) * 10 + int(o) for d, o in zip(decades, year_offsets)]
    lats = [round(UK_ANCHORS[int(a)][0] + float(j), 4) for a, j in zip(anchor_ids, lat_jitter)]
    lons = [round(UK_ANCHORS[int(a)][1] + float(j), 4) for a, j in zip(anchor_ids, lon_jitter)]

    # Recompute the class indices preprocessing will assign, so marker tokens
    # and final labels agree exactly.
    gender_order = sorted(set(genders))
    gender_class = {g: i for i, g in enumerate(gender_order)}
    geo_index: dict[str, int] = {}
    location_class = []
    for lat, lon in zip(lats, lons):
        cell = geohash_encode(lat, lon, 2)
        if cell not in geo_index:
            geo_index[cell] = len(geo_index)
        location_class.append(geo_index[cell])
    k_eff = min(_BIRTH_DECADES, len(set(years)))
    if k_eff >= 2:
        _, age_class = bin_birth_years(years, k_eff)
    else:
        age_class = [0] * n

    records = []
    for i in range(n):
        tokens = [SENTIMENT_WORDS[int(ratings[i]) - 1]]
        filler_ids = rng.integers(0, len(FILLER_WORDS), size=3)
        tokens.extend(FILLER_WORDS[int(f)] for f in filler_ids)
        leak_draws = rng.random(3)
        if leak_draws[0] < leak_strength:
            tokens.append(_marker_token("gender", gender_class[genders[i]]))
        if leak_draws[1] < leak_strength:
            tokens.append(_marker_token("location", location_class[i]))
        if leak_draws[2] < leak_strength:
            tokens.append(_marker_token("age", age_class[i]))
        order = rng.permutation(len(tokens))
        text = " ".join(tokens[int(j)] for j in order)
        records.append(
            RawRecord(
                text=text,
                rating=int(ratings[i]),
                gender=genders[i],
                birth_year=years[i],
                latitude=lats[i],
                longitude=lons[i],
            )
        )
    return records


def generate_synthetic(n: int, leak_strength: float, seed: int) -> Dataset:
    """Synthetic dataset: :func:`generate_synthetic_records` + :func:`preprocess`."""
    return preprocess(generate_synthetic_records(n, leak_strength, seed))
