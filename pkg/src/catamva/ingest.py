"""Survey ingestion: long-format responses to bricks, recoding, and tables.

A *brick* is the participants x excerpts x levels array of check-all-that-apply
selections. Summing it over participants yields the pseudo-contingency table
analysed by correspondence analysis; the participant-by-participant inner
products yield the co-occurrence matrix analysed by MDS.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import yaml

from .errors import (
    AllColumnsRemoved,
    ConflictingRules,
    DuplicateCell,
    EmptyBrick,
    InconsistentGroup,
    MissingColumn,
    NonBinaryBrick,
    NonBinaryValue,
    UnknownGroupKey,
    UnknownLevel,
)

log = logging.getLogger(__name__)

Level = tuple[str, str]
PathOrText = Union[str, os.PathLike, io.TextIOBase]

DEFAULT_SCHEMA = {
    "participant": "participant",
    "group": "group",
    "excerpt": "excerpt",
    "variable": "variable",
    "level": "level",
    "value": "value",
}

LEVEL_SEP = ":"


def level_label(level: Level) -> str:
    return f"{level[0]}{LEVEL_SEP}{level[1]}"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ResponseBrick:
    """Participants x excerpts x levels selection weights.

    ``values[p, e, l]`` is the weight participant ``p`` gave level ``l`` for
    excerpt ``e``; ``presented[p, e]`` marks which excerpts each participant
    actually heard. Arrays are copied and made read-only on construction.
    """

    participants: tuple[str, ...]
    excerpts: tuple[str, ...]
    levels: tuple[Level, ...]
    values: np.ndarray
    presented: np.ndarray
    group: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(self.participants))
        object.__setattr__(self, "excerpts", tuple(self.excerpts))
        object.__setattr__(self, "levels", tuple((str(v), str(l)) for v, l in self.levels))
        object.__setattr__(self, "group", tuple(self.group))
        values = _frozen(self.values, float)
        presented = _frozen(self.presented, bool)
        shape = (len(self.participants), len(self.excerpts), len(self.levels))
        if values.shape != shape:
            raise ValueError(f"values has shape {values.shape}, expected {shape}")
        if presented.shape != shape[:2]:
            raise ValueError(f"presented has shape {presented.shape}, expected {shape[:2]}")
        if len(self.group) != shape[0]:
            raise ValueError("one group label per participant is required")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("level registry contains duplicate (variable, level) pairs")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("brick values must be finite and nonnegative")
        if np.any(values.any(axis=2) & ~presented):
            raise ValueError("nonzero values recorded for an unpresented excerpt")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "presented", presented)

    @property
    def shape(self):
        return self.values.shape

    @property
    def level_labels(self) -> tuple[str, ...]:
        return tuple(level_label(l) for l in self.levels)

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.values == 0) | (self.values == 1)))

    def variables(self) -> list[str]:
        return list(dict.fromkeys(v for v, _ in self.levels))

    def level_index(self, level: Level) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise UnknownLevel(f"unknown level {level_label(level)!r}") from None

    def replace(self, **changes) -> "ResponseBrick":
        kw = dict(
            participants=self.participants,
            excerpts=self.excerpts,
            levels=self.levels,
            values=self.values,
            presented=self.presented,
            group=self.group,
        )
        kw.update(changes)
        return ResponseBrick(**kw)

    def select_levels(self, labels: Iterable[str]) -> "ResponseBrick":
        """Keep only the levels whose ``variable:level`` labels are given, in that order."""
        lookup = {lab: i for i, lab in enumerate(self.level_labels)}
        idx = []
        for lab in labels:
            if lab not in lookup:
                raise UnknownLevel(f"unknown level {lab!r}")
            idx.append(lookup[lab])
        return self.replace(levels=[self.levels[i] for i in idx], values=self.values[:, :, idx])

    def select_excerpts(self, excerpts: Iterable[str]) -> "ResponseBrick":
        lookup = {e: i for i, e in enumerate(self.excerpts)}
        try:
            idx = [lookup[e] for e in excerpts]
        except KeyError as exc:
            raise LookupError(f"unknown excerpt {exc.args[0]!r}") from None
        return self.replace(
            excerpts=[self.excerpts[i] for i in idx],
            values=self.values[:, idx, :],
            presented=self.presented[:, idx],
        )

    def drop_excerpts(self, excerpts: Iterable[str]) -> "ResponseBrick":
        drop = set(excerpts)
        return self.select_excerpts([e for e in self.excerpts if e not in drop])

    def select_participants(self, index: Sequence[int]) -> "ResponseBrick":
        idx = np.asarray(index, dtype=int)
        return self.replace(
            participants=[self.participants[i] for i in idx],
            values=self.values[idx],
            presented=self.presented[idx],
            group=[self.group[i] for i in idx],
        )


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Labeled nonnegative rows x cols matrix; ``n`` is the grand total."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(str(r) for r in self.rows))
        object.__setattr__(self, "cols", tuple(str(c) for c in self.cols))
        cells = _frozen(self.cells, float)
        if cells.shape != (len(self.rows), len(self.cols)):
            raise ValueError(
                f"cells has shape {cells.shape}, expected {(len(self.rows), len(self.cols))}"
            )
        if not np.all(np.isfinite(cells)) or np.any(cells < 0):
            raise ValueError("contingency cells must be finite and nonnegative")
        if len(set(self.rows)) != len(self.rows) or len(set(self.cols)) != len(self.cols):
            raise ValueError("duplicate row or column labels")
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> float:
        return float(self.cells.sum())

    @property
    def shape(self):
        return self.cells.shape

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.cols, self.rows, self.cells.T)

    def select_rows(self, rows: Iterable[str]) -> "ContingencyTable":
        lookup = {r: i for i, r in enumerate(self.rows)}
        try:
            idx = [lookup[r] for r in rows]
        except KeyError as exc:
            raise LookupError(f"unknown row {exc.args[0]!r}") from None
        return ContingencyTable([self.rows[i] for i in idx], self.cols, self.cells[idx])

    def drop_rows(self, rows: Iterable[str]) -> "ContingencyTable":
        drop = set(rows)
        return self.select_rows([r for r in self.rows if r not in drop])

    def select_cols(self, cols: Iterable[str]) -> "ContingencyTable":
        return self.transpose().select_rows(cols).transpose()

    def row(self, label: str) -> np.ndarray:
        return self.cells[self.rows.index(label)]

    def drop_empty(self):
        """Remove all-zero rows and columns; returns ``(table, removed_rows, removed_cols)``."""
        rk = self.cells.sum(axis=1) > 0
        ck = self.cells.sum(axis=0) > 0
        removed_rows = [r for r, k in zip(self.rows, rk) if not k]
        removed_cols = [c for c, k in zip(self.cols, ck) if not k]
        if not removed_rows and not removed_cols:
            return self, [], []
        table = ContingencyTable(
            [r for r, k in zip(self.rows, rk) if k],
            [c for c, k in zip(self.cols, ck) if k],
            self.cells[np.ix_(rk, ck)],
        )
        return table, removed_rows, removed_cols


@dataclass(frozen=True, eq=False)
class CoOccurrenceMatrix:
    """Symmetric participant x participant count of common choices."""

    participants: tuple[str, ...]
    cells: np.ndarray
    diag: np.ndarray
    group: tuple[str, ...] = ()
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(self.participants))
        object.__setattr__(self, "group", tuple(self.group))
        object.__setattr__(self, "cells", _frozen(self.cells, float))
        object.__setattr__(self, "diag", _frozen(self.diag, float))
        n = len(self.participants)
        if self.cells.shape != (n, n) or self.diag.shape != (n,):
            raise ValueError("co-occurrence shape does not match participant registry")


# ---------------------------------------------------------------------------
# parsing


def load_translation(path) -> dict[str, str]:
    """Read a two-column ``source,target`` label mapping (header row required)."""
    path = Path(path)
    delimiter = "\t" if path.suffix.lower() in {".tsv", ".tab"} else ","
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        next(reader, None)
        mapping = {}
        for row in reader:
            if not row or not row[0].strip():
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: translation rows need two columns, got {row!r}")
            mapping[row[0].strip()] = row[1].strip()
    return mapping


def _open_text(source: PathOrText):
    if isinstance(source, io.TextIOBase):
        return source, False, None
    path = Path(source)
    return open(path, newline="", encoding="utf-8"), True, path


def _parse_binary(raw: str, lineno: int) -> int:
    try:
        x = float(raw)
    except ValueError:
        raise NonBinaryValue(f"line {lineno}: value {raw!r} is not 0 or 1") from None
    if x not in (0.0, 1.0):
        raise NonBinaryValue(f"line {lineno}: value {raw!r} is not 0 or 1")
    return int(x)


def parse_responses(
    source: PathOrText,
    schema: Mapping[str, str] | None = None,
    translation: Mapping[str, str] | None = None,
    delimiter: str | None = None,
) -> ResponseBrick:
    """Build a brick from long-format CATA responses.

    Each row is one (participant, group, excerpt, variable, level, value)
    record with ``value`` in {0, 1}. An excerpt counts as presented to a
    participant as soon as any row pairs them, so unselected levels can be
    written with value 0. Labels are ordered by first appearance.

    ``translation`` maps variable and level labels onto a common language
    before the brick is assembled.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    translation = translation or {}
    fh, owned, path = _open_text(source)
    try:
        if delimiter is None:
            delimiter = "\t" if path is not None and path.suffix.lower() in {".tsv", ".tab"} else ","
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        missing = [schema[k] for k in DEFAULT_SCHEMA if schema[k] not in header]
        if missing:
            raise MissingColumn(f"missing column(s): {', '.join(missing)}")

        participants: dict[str, int] = {}
        groups: list[str] = []
        excerpts: dict[str, int] = {}
        levels: dict[Level, int] = {}
        presented: set[tuple[int, int]] = set()
        ones: set[tuple[int, int, int]] = set()
        seen: set[tuple[int, int, int]] = set()

        for lineno, rec in enumerate(reader, start=2):
            pid = rec[schema["participant"]].strip()
            grp = rec[schema["group"]].strip()
            exc = rec[schema["excerpt"]].strip()
            var = rec[schema["variable"]].strip()
            lev = rec[schema["level"]].strip()
            var = translation.get(var, var)
            lev = translation.get(lev, lev)
            value = _parse_binary(rec[schema["value"]].strip(), lineno)

            if pid not in participants:
                participants[pid] = len(participants)
                groups.append(grp)
            elif groups[participants[pid]] != grp:
                raise InconsistentGroup(
                    f"line {lineno}: participant {pid!r} labelled both "
                    f"{groups[participants[pid]]!r} and {grp!r}"
                )
            p = participants[pid]
            e = excerpts.setdefault(exc, len(excerpts))
            l = levels.setdefault((var, lev), len(levels))
            key = (p, e, l)
            if key in seen:
                raise DuplicateCell(
                    f"line {lineno}: duplicate cell {pid}/{exc}/{level_label((var, lev))}"
                )
            seen.add(key)
            presented.add((p, e))
            if value:
                ones.add(key)
    finally:
        if owned:
            fh.close()

    values = np.zeros((len(participants), len(excerpts), len(levels)))
    if ones:
        values[tuple(np.array(sorted(ones)).T)] = 1.0
    mask = np.zeros((len(participants), len(excerpts)), dtype=bool)
    if presented:
        mask[tuple(np.array(sorted(presented)).T)] = True
    return ResponseBrick(list(participants), list(excerpts), list(levels), values, mask, groups)


def wide_to_long(
    source: PathOrText,
    out,
    participant_col: str = "participant",
    group_col: str = "group",
    sep: str = "|",
    delimiter: str = ",",
) -> int:
    """Convert a wide per-participant export into the long response format.

    Every column other than the participant and group columns must be named
    ``excerpt<sep>variable<sep>level``. A blank cell means the excerpt was not
    presented; ``0``/``1`` are written through. Returns the number of records
    written to ``out`` (a path or writable text stream).
    """
    fh, owned, _ = _open_text(source)
    try:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        for col in (participant_col, group_col):
            if col not in header:
                raise MissingColumn(f"missing column: {col}")
        item_cols = []
        for col in header:
            if col in (participant_col, group_col):
                continue
            parts = col.split(sep)
            if len(parts) != 3:
                raise ValueError(f"column {col!r} is not excerpt{sep}variable{sep}level")
            item_cols.append((col, parts))
        records = []
        for rec in reader:
            for col, (exc, var, lev) in item_cols:
                raw = (rec.get(col) or "").strip()
                if raw == "":
                    continue
                records.append(
                    [rec[participant_col].strip(), rec[group_col].strip(), exc, var, lev, raw]
                )
    finally:
        if owned:
            fh.close()

    close = False
    if not isinstance(out, io.TextIOBase):
        out = open(out, "w", newline="", encoding="utf-8")
        close = True
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(list(DEFAULT_SCHEMA))
        writer.writerows(records)
    finally:
        if close:
            out.close()
    return len(records)


# ---------------------------------------------------------------------------
# recoding


@dataclass(frozen=True)
class Collapse:
    """Merge several levels of one variable into new levels (logical OR)."""

    variable: str
    merge: Mapping[str, Sequence[str]]

    def outputs(self) -> set[Level]:
        return {(self.variable, new) for new in self.merge}


@dataclass(frozen=True)
class Barycentric:
    """Replace a shared 'no melody' style trigger by a yes/no variable.

    When ``trigger`` is selected for a target variable, the variable's other
    levels each receive 1/(number of other levels) and ``melody:no`` gets 1;
    otherwise ``melody:yes`` gets 1.
    """

    trigger: str
    variables: Sequence[str]
    melody: str = "Melody"
    yes: str = "Yes"
    no: str = "No"


@dataclass(frozen=True)
class RecodeSpec:
    rules: tuple = field(default_factory=tuple)

    @classmethod
    def from_dict(cls, data) -> "RecodeSpec":
        """Build from the ``{"rules": [...]}`` config structure.

        Each rule is a one-key mapping, either ``collapse: {variable, merge}``
        or ``barycentric: {trigger, variables, melody?, yes?, no?}``.
        """
        rules = []
        for i, item in enumerate((data or {}).get("rules", [])):
            if not isinstance(item, Mapping) or len(item) != 1:
                raise ValueError(f"rule {i}: expected a single-key mapping")
            (kind, body), = item.items()
            if kind == "collapse":
                merge = {str(k): [str(x) for x in v] for k, v in body["merge"].items()}
                rules.append(Collapse(str(body["variable"]), merge))
            elif kind == "barycentric":
                rules.append(
                    Barycentric(
                        trigger=str(body["trigger"]),
                        variables=tuple(str(v) for v in body["variables"]),
                        melody=str(body.get("melody", "Melody")),
                        yes=str(body.get("yes", "Yes")),
                        no=str(body.get("no", "No")),
                    )
                )
            else:
                raise ValueError(f"rule {i}: unknown rule kind {kind!r}")
        return cls(tuple(rules))


def load_recode_spec(path) -> RecodeSpec:
    with open(path, encoding="utf-8") as fh:
        return RecodeSpec.from_dict(yaml.safe_load(fh))


def collapse_reduction(brick: ResponseBrick, rule: Collapse) -> int:
    """Number of (participant, excerpt, new level) cells where OR-capping drops mass."""
    n = 0
    for olds in rule.merge.values():
        idx = [brick.level_index((rule.variable, o)) for o in olds]
        n += int(np.count_nonzero(brick.values[:, :, idx].sum(axis=2) > 1))
    return n


def _apply_collapse(brick: ResponseBrick, rule: Collapse, written: set) -> ResponseBrick:
    sources = {}
    for new, olds in rule.merge.items():
        if not olds:
            raise ValueError(f"collapse {rule.variable}:{new} lists no source levels")
        sources[new] = [brick.level_index((rule.variable, o)) for o in olds]
    consumed = {i for idx in sources.values() for i in idx}
    if len(consumed) != sum(len(v) for v in sources.values()):
        raise ConflictingRules(f"collapse on {rule.variable!r} uses a source level twice")
    outputs = rule.outputs()
    for out in outputs:
        if out in brick.levels and brick.levels.index(out) not in consumed:
            raise ConflictingRules(f"collapse output {level_label(out)} already exists")
    clash = outputs & written
    if clash:
        raise ConflictingRules(f"columns written twice: {sorted(map(level_label, clash))}")
    written |= outputs

    first_of = {min(idx): new for new, idx in sources.items()}
    levels, columns = [], []
    for i, lev in enumerate(brick.levels):
        if i in first_of:
            new = first_of[i]
            levels.append((rule.variable, new))
            columns.append(np.minimum(brick.values[:, :, sources[new]].sum(axis=2), 1.0))
        elif i not in consumed:
            levels.append(lev)
            columns.append(brick.values[:, :, i])
    reduced = collapse_reduction(brick, rule)
    if reduced:
        log.info("collapse %s: %d multi-checked cells capped at 1", rule.variable, reduced)
    return brick.replace(levels=levels, values=np.stack(columns, axis=2))


def _apply_barycentric(brick: ResponseBrick, rule: Barycentric, written: set) -> ResponseBrick:
    trig = [brick.level_index((v, rule.trigger)) for v in rule.variables]
    remaining = {}
    for v in rule.variables:
        rem = [i for i, (var, lev) in enumerate(brick.levels) if var == v and lev != rule.trigger]
        if not rem:
            raise UnknownLevel(f"variable {v!r} has no levels besides the trigger")
        remaining[v] = rem
    outputs = {(rule.melody, rule.yes), (rule.melody, rule.no)}
    for out in outputs:
        if out in brick.levels:
            raise ConflictingRules(f"barycentric output {level_label(out)} already exists")
    outputs |= {brick.levels[i] for rem in remaining.values() for i in rem}
    clash = outputs & written
    if clash:
        raise ConflictingRules(f"columns written twice: {sorted(map(level_label, clash))}")
    written |= outputs

    values = np.array(brick.values)
    fired = values[:, :, trig] > 0  # (P, E, V)
    for k, v in enumerate(rule.variables):
        rem = remaining[v]
        hit = fired[:, :, k]
        block = values[:, :, rem]
        block[hit] = 1.0 / len(rem)
        values[:, :, rem] = block
    any_fired = fired.any(axis=2)
    no_col = any_fired.astype(float)
    yes_col = (~any_fired & brick.presented).astype(float)

    keep = [i for i in range(len(brick.levels)) if i not in set(trig)]
    levels = [brick.levels[i] for i in keep] + [(rule.melody, rule.yes), (rule.melody, rule.no)]
    values = np.concatenate([values[:, :, keep], yes_col[:, :, None], no_col[:, :, None]], axis=2)
    return brick.replace(levels=levels, values=values)


def apply_recoding(brick: ResponseBrick, spec: RecodeSpec) -> ResponseBrick:
    """Apply the rules of ``spec`` in order and return a new brick."""
    written: set[Level] = set()
    for rule in spec.rules:
        if isinstance(rule, Collapse):
            brick = _apply_collapse(brick, rule, written)
        elif isinstance(rule, Barycentric):
            brick = _apply_barycentric(brick, rule, written)
        else:
            raise TypeError(f"unsupported rule {rule!r}")
    return brick


# ---------------------------------------------------------------------------
# tables


def sum_to_contingency(brick: ResponseBrick) -> ContingencyTable:
    """Sum the brick over participants into an excerpts x levels table."""
    cells = brick.values.sum(axis=0)
    if brick.values.size == 0 or not np.any(cells > 0):
        raise EmptyBrick("brick contains no selections")
    return ContingencyTable(brick.excerpts, brick.level_labels, cells)


def drop_sparse_levels(table: ContingencyTable, threshold: float = 1):
    """Remove columns whose total is at most ``threshold``.

    Returns ``(table, removed)`` where ``removed`` lists ``(label, column_sum)``.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    sums = table.cells.sum(axis=0)
    keep = sums > threshold
    if not keep.any():
        raise AllColumnsRemoved(f"every column sums to <= {threshold}")
    removed = [(c, float(s)) for c, s, k in zip(table.cols, sums, keep) if not k]
    if not removed:
        return table, []
    kept = ContingencyTable(
        table.rows, [c for c, k in zip(table.cols, keep) if k], table.cells[:, keep]
    )
    return kept, removed


def co_occurrence(brick: ResponseBrick, normalize: bool = False) -> CoOccurrenceMatrix:
    """Count, for each pair of participants, the choices they have in common.

    Only excerpts presented to both participants can contribute. With
    ``normalize`` the counts are divided by the number of shared excerpts.
    """
    if not brick.is_binary:
        raise NonBinaryBrick("co-occurrence needs a binary (un-recoded) brick")
    flat = brick.values.reshape(brick.values.shape[0], -1)
    cells = flat @ flat.T
    diag = flat.sum(axis=1)
    if normalize:
        shared = brick.presented.astype(float) @ brick.presented.T.astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            cells = np.where(shared > 0, cells / shared, 0.0)
    return CoOccurrenceMatrix(brick.participants, cells, diag, brick.group, normalize)


def split_by_group(brick: ResponseBrick, keys: Sequence[str] | None = None) -> list[ResponseBrick]:
    """One brick per group label (first-appearance order, or the order of ``keys``)."""
    if any(g == "" for g in brick.group):
        raise UnknownGroupKey("every participant needs a group label")
    labels = list(dict.fromkeys(brick.group))
    if keys is not None:
        for k in keys:
            if k not in labels:
                raise UnknownGroupKey(f"unknown group {k!r}")
        labels = list(keys)
    if len(labels) == 1 and keys is None:
        return [brick]
    out = []
    for lab in labels:
        idx = [i for i, g in enumerate(brick.group) if g == lab]
        out.append(brick.select_participants(idx))
    return out
