"""Load patient condition records into a validated binary association matrix.

Input formats (UTF-8 throughout):

* CSV with header ``patient_id,codes[,note]``; the codes column is a
  ``;``-separated list of condition-code identifiers.
* JSON array of objects ``{"patient_id": str, "codes": [str], "note": str?}``.
* Code table: JSON array of ``{"code": str, "description": str,
  "merged_from": [str]?}``.
* Lexicon: JSON object mapping phrases to condition codes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)


class IngestError(ValueError):
    """Raised when input records or code tables cannot be loaded or validated."""


@dataclass(frozen=True)
class ConditionCode:
    """A condition-code column: identifier, label, and optional merge group."""

    code: str
    description: str = ""
    merged_from: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.code:
            raise IngestError("condition code identifier must be non-empty")
        if len(set(self.merged_from)) != len(self.merged_from):
            raise IngestError(f"duplicate merged_from entries for {self.code!r}")
        if self.code in self.merged_from:
            raise IngestError(f"{self.code!r} cannot appear in its own merged_from")


@dataclass
class PatientRecord:
    patient_id: str
    codes: frozenset[str]
    raw_note: str | None = None


@dataclass(eq=False)
class AssociationMatrix:
    """Binary patients x condition-codes incidence with label metadata.

    ``incidence[i, j]`` is 1 iff patient ``patients[i]`` carries code
    ``codes[j]``. Matrices built by :func:`build_matrix` never contain
    all-zero rows (such patients are dropped and counted); direct
    construction leaves row content to the caller, since synthetic null
    models legitimately include empty rows. Immutable after construction.
    """

    patients: tuple[str, ...]
    codes: tuple[ConditionCode, ...]
    incidence: np.ndarray
    n_dropped_patients: int = 0
    _code_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.incidence, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape != (len(self.patients), len(self.codes)):
            raise IngestError("incidence shape does not match patient/code labels")
        if not np.isin(arr, (0, 1)).all():
            raise IngestError("incidence must be binary")
        arr.setflags(write=False)
        self.incidence = arr
        self._code_index = {c.code: j for j, c in enumerate(self.codes)}
        if len(self._code_index) != len(self.codes):
            raise IngestError("duplicate code identifiers in code table")

    @property
    def n_patients(self) -> int:
        return len(self.patients)

    @property
    def n_codes(self) -> int:
        return len(self.codes)

    def code_index(self, code: str) -> int:
        try:
            return self._code_index[code]
        except KeyError:
            raise KeyError(f"unknown condition code {code!r}") from None

    def support(self, column: int) -> int:
        return int(self.incidence[:, column].sum())

    def supports(self) -> np.ndarray:
        return self.incidence.sum(axis=0, dtype=np.int64)

    def column_mask(self, column: int) -> int:
        """The column as an integer bitmask over patient indices."""
        packed = np.packbits(self.incidence[:, column], bitorder="little")
        return int.from_bytes(packed.tobytes(), "little")

    def to_dict(self) -> dict:
        return {
            "patients": list(self.patients),
            "codes": [
                {
                    "code": c.code,
                    "description": c.description,
                    "merged_from": list(c.merged_from),
                }
                for c in self.codes
            ],
            "incidence": self.incidence.tolist(),
            "n_dropped_patients": self.n_dropped_patients,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "AssociationMatrix":
        try:
            patients = tuple(str(p) for p in payload["patients"])
            codes = tuple(
                ConditionCode(
                    code=entry["code"],
                    description=entry.get("description", ""),
                    merged_from=tuple(entry.get("merged_from") or ()),
                )
                for entry in payload["codes"]
            )
            incidence = np.asarray(payload["incidence"], dtype=np.uint8)
            dropped = int(payload.get("n_dropped_patients", 0))
        except (KeyError, TypeError) as exc:
            raise IngestError(f"malformed association-matrix payload: {exc}") from exc
        return cls(patients, codes, incidence, dropped)


def load_records(path: str | Path, format: str) -> list[PatientRecord]:
    """Parse patient records from ``path`` in the given format (csv or json).

    Duplicate patient ids and unparseable content raise :class:`IngestError`
    with the offending location. Unknown fields are ignored.
    """
    path = Path(path)
    if format == "csv":
        records = _load_csv(path)
    elif format == "json":
        records = _load_json(path)
    else:
        raise IngestError(f"unsupported record format {format!r}")

    if not records:
        raise IngestError(f"{path}: empty file, no patient records")
    seen: set[str] = set()
    for rec in records:
        if rec.patient_id in seen:
            raise IngestError(f"{path}: duplicate patient_id {rec.patient_id!r}")
        seen.add(rec.patient_id)
    if all(not rec.codes and not (rec.raw_note or "").strip() for rec in records):
        raise IngestError(f"{path}: no non-empty symptom records")
    return records


def _split_codes(raw: str) -> frozenset[str]:
    return frozenset(tok.strip() for tok in raw.split(";") if tok.strip())


def _load_csv(path: Path) -> list[PatientRecord]:
    records = []
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                return []
            if "patient_id" not in reader.fieldnames or "codes" not in reader.fieldnames:
                raise IngestError(
                    f"{path}: header must contain patient_id and codes columns"
                )
            for lineno, row in enumerate(reader, start=2):
                pid = (row.get("patient_id") or "").strip()
                if not pid:
                    raise IngestError(f"{path}:{lineno}: missing patient_id")
                note = row.get("note")
                records.append(
                    PatientRecord(
                        patient_id=pid,
                        codes=_split_codes(row.get("codes") or ""),
                        raw_note=note if note else None,
                    )
                )
    except OSError as exc:
        raise IngestError(f"{path}: {exc}") from exc
    except csv.Error as exc:
        raise IngestError(f"{path}: CSV parse failure: {exc}") from exc
    return records


def _load_json(path: Path) -> list[PatientRecord]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(
            f"{path}: JSON parse failure at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(payload, list):
        raise IngestError(f"{path}: expected a top-level JSON array of records")
    records = []
    for pos, entry in enumerate(payload):
        if not isinstance(entry, dict) or "patient_id" not in entry:
            raise IngestError(f"{path}: record {pos} lacks a patient_id")
        codes = entry.get("codes") or []
        if not isinstance(codes, list):
            raise IngestError(f"{path}: record {pos}: codes must be a list")
        note = entry.get("note")
        records.append(
            PatientRecord(
                patient_id=str(entry["patient_id"]),
                codes=frozenset(str(c) for c in codes if str(c).strip()),
                raw_note=str(note) if note else None,
            )
        )
    return records


def load_code_table(path: str | Path) -> list[ConditionCode]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(
            f"{path}: JSON parse failure at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(payload, list):
        raise IngestError(f"{path}: code table must be a JSON array")
    table = []
    for entry in payload:
        try:
            table.append(
                ConditionCode(
                    code=entry["code"],
                    description=entry.get("description", ""),
                    merged_from=tuple(entry.get("merged_from") or ()),
                )
            )
        except (KeyError, TypeError) as exc:
            raise IngestError(f"{path}: malformed code-table entry {entry!r}") from exc
    return table


def load_lexicon(path: str | Path, code_table: Sequence[ConditionCode]) -> dict[str, ConditionCode]:
    """Load a phrase -> code JSON object, resolving codes against the table."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"{path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise IngestError(f"{path}: lexicon must be a JSON object of phrase -> code")
    by_code = {c.code: c for c in code_table}
    lexicon = {}
    for phrase, code in payload.items():
        if not phrase.strip():
            raise IngestError(f"{path}: lexicon phrases must be non-empty")
        lexicon[phrase] = by_code.get(code, ConditionCode(code=code))
    return lexicon


def tag_lexicon(
    records: Iterable[PatientRecord], lexicon: Mapping[str, ConditionCode]
) -> list[PatientRecord]:
    """Augment record code sets with lexicon hits found in the free-text note.

    Matching is case-insensitive and whole-word: a phrase matches only when
    not embedded in a longer word ("cough" does not match "coughing").
    Records without a note pass through unchanged; existing codes are kept.
    """
    for phrase in lexicon:
        if not phrase.strip():
            raise IngestError("lexicon phrases must be non-empty")
    compiled = [
        (re.compile(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)", re.IGNORECASE), code)
        for phrase, code in sorted(lexicon.items())
    ]
    tagged = []
    for rec in records:
        if not rec.raw_note or not compiled:
            tagged.append(rec)
            continue
        hits = {code.code for pattern, code in compiled if pattern.search(rec.raw_note)}
        if hits:
            tagged.append(replace(rec, codes=rec.codes | hits))
        else:
            tagged.append(rec)
    return tagged


def build_matrix(
    records: Sequence[PatientRecord],
    code_table: Sequence[ConditionCode],
    min_support_fraction: float,
) -> AssociationMatrix:
    """Build the binary association matrix from records and a code table.

    Codes named in a ``merged_from`` group are collapsed into their parent
    column (logical OR). Columns supported by fewer than
    ``ceil(min_support_fraction * n_records)`` patients are dropped, then
    patients left with no surviving codes are dropped (and counted).
    """
    if not 0.0 <= min_support_fraction <= 1.0:
        raise IngestError("min_support_fraction must lie in [0, 1]")
    if not records:
        raise IngestError("no records to build a matrix from")

    parent_of: dict[str, str] = {}
    for entry in code_table:
        for member in entry.merged_from:
            if member in parent_of and parent_of[member] != entry.code:
                raise IngestError(f"code {member!r} merged into two different parents")
            parent_of[member] = entry.code

    members = set(parent_of)
    columns = [c for c in code_table if c.code not in members]
    col_index = {c.code: j for j, c in enumerate(columns)}

    n_records = len(records)
    incidence = np.zeros((n_records, len(columns)), dtype=np.uint8)
    unknown: set[str] = set()
    for i, rec in enumerate(records):
        for code in rec.codes:
            code = parent_of.get(code, code)
            j = col_index.get(code)
            if j is None:
                unknown.add(code)
            else:
                incidence[i, j] = 1
    if unknown:
        log.warning("ignored %d codes absent from the code table: %s",
                    len(unknown), ", ".join(sorted(unknown)[:8]))

    threshold = math.ceil(min_support_fraction * n_records)
    supports = incidence.sum(axis=0)
    keep = [j for j in range(len(columns)) if supports[j] >= max(threshold, 1)]
    if not keep:
        raise IngestError("no codes survive support filter")
    incidence = incidence[:, keep]
    kept_codes = tuple(columns[j] for j in keep)

    row_ok = incidence.any(axis=1)
    n_dropped = int((~row_ok).sum())
    if n_dropped:
        log.info("dropped %d patients with no surviving codes", n_dropped)
    incidence = incidence[row_ok]
    patients = tuple(rec.patient_id for rec, ok in zip(records, row_ok) if ok)

    return AssociationMatrix(
        patients=patients,
        codes=kept_codes,
        incidence=incidence,
        n_dropped_patients=n_dropped,
    )
