"""Static table programmes, microdata and exact tabulation.

A programme is a catalog of variable breakdowns plus a list of
cross-tabulations published over them.  Totals are never stored as
categories: the total margin of any variable arises only by summing the
variable out completely, i.e. by dropping it from the statistic key.

Everything here is immutable after construction; tabulation is a pure
function and safe to use from concurrent tasks.
"""

from __future__ import annotations

import csv
import itertools
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .errors import ProgrammeError

Cell = tuple[str, ...]


@dataclass(frozen=True)
class Breakdown:
    """A categorical variable with its ordered internal categories."""

    id: str
    categories: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise ProgrammeError("breakdown id must be non-empty")
        if len(self.categories) < 1:
            raise ProgrammeError(f"breakdown {self.id!r} has no categories")
        if len(set(self.categories)) != len(self.categories):
            raise ProgrammeError(f"duplicate category in breakdown {self.id!r}")

    @property
    def cardinality(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class TableSpec:
    """One published cross-tabulation, identified by its breakdown ids."""

    id: str
    breakdowns: tuple[str, ...]

    def __post_init__(self):
        if len(self.breakdowns) < 1:
            raise ProgrammeError(f"table {self.id!r} has no breakdowns")
        if len(set(self.breakdowns)) != len(self.breakdowns):
            raise ProgrammeError(f"duplicate breakdown in table {self.id!r}")

    @property
    def breakdown_set(self) -> frozenset[str]:
        return frozenset(self.breakdowns)


@dataclass(frozen=True)
class StatisticKey:
    """Identifies a marginal statistic, optionally narrowed to a single cell.

    ``breakdown_ids`` empty denotes the population total.  When ``cell`` is
    given, its values align with ``sorted(breakdown_ids)``.
    """

    breakdown_ids: frozenset[str]
    cell: Cell | None = None

    def __post_init__(self):
        if self.cell is not None and len(self.cell) != len(self.breakdown_ids):
            raise ProgrammeError(
                f"cell {self.cell!r} does not match breakdowns {sorted(self.breakdown_ids)}"
            )

    @property
    def sorted_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.breakdown_ids))

    def label(self) -> str:
        return "total" if not self.breakdown_ids else "*".join(self.sorted_ids)


class TableProgramme:
    """Catalog of breakdowns plus the list of published tables."""

    def __init__(self, breakdowns: Iterable[Breakdown], tables: Iterable[TableSpec]):
        self.breakdowns: dict[str, Breakdown] = {}
        for b in breakdowns:
            if b.id in self.breakdowns:
                raise ProgrammeError(f"duplicate breakdown id {b.id!r}")
            self.breakdowns[b.id] = b
        self.tables: tuple[TableSpec, ...] = tuple(tables)
        seen = set()
        for i, t in enumerate(self.tables):
            if t.id in seen:
                raise ProgrammeError(f"duplicate table id {t.id!r}", f"tables[{i}]")
            seen.add(t.id)
            for j, bid in enumerate(t.breakdowns):
                if bid not in self.breakdowns:
                    raise ProgrammeError(
                        f"unknown breakdown reference {bid!r}",
                        f"tables[{i}].breakdowns[{j}]",
                    )

    def breakdown(self, bid: str) -> Breakdown:
        try:
            return self.breakdowns[bid]
        except KeyError:
            raise ProgrammeError(f"unknown breakdown reference {bid!r}") from None

    def validate_key(self, key: StatisticKey) -> None:
        for bid in key.breakdown_ids:
            self.breakdown(bid)
        if key.cell is not None:
            for bid, value in zip(key.sorted_ids, key.cell):
                if value not in self.breakdown(bid).categories:
                    raise ProgrammeError(
                        f"value {value!r} is not a category of breakdown {bid!r}"
                    )

    def cells(self, key: StatisticKey) -> list[Cell]:
        """All cells of a statistic, lexicographic by breakdown id then category index."""
        axes = [self.breakdown(bid).categories for bid in key.sorted_ids]
        return list(itertools.product(*axes))


def parse_programme(document: str | Mapping) -> TableProgramme:
    """Parse and validate a table programme from JSON text or a parsed dict."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ProgrammeError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise ProgrammeError("programme document must be a JSON object")
    for required in ("breakdowns", "tables"):
        if required not in document:
            raise ProgrammeError(f"missing top-level key {required!r}")
    breakdowns = []
    for i, entry in enumerate(document["breakdowns"]):
        loc = f"breakdowns[{i}]"
        if not isinstance(entry, Mapping) or "id" not in entry or "categories" not in entry:
            raise ProgrammeError("breakdown needs 'id' and 'categories'", loc)
        cats = entry["categories"]
        if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
            raise ProgrammeError("'categories' must be a list of strings", loc)
        breakdowns.append(Breakdown(id=str(entry["id"]), categories=tuple(cats)))
    tables = []
    for i, entry in enumerate(document["tables"]):
        loc = f"tables[{i}]"
        if not isinstance(entry, Mapping) or "id" not in entry or "breakdowns" not in entry:
            raise ProgrammeError("table needs 'id' and 'breakdowns'", loc)
        refs = entry["breakdowns"]
        if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
            raise ProgrammeError("'breakdowns' must be a list of ids", loc)
        tables.append(TableSpec(id=str(entry["id"]), breakdowns=tuple(refs)))
    return TableProgramme(breakdowns, tables)


def load_programme(path) -> TableProgramme:
    with open(path, encoding="utf-8") as fh:
        return parse_programme(fh.read())


def enumerate_subtables(table: TableSpec) -> list[StatisticKey]:
    """All 2^m marginal keys of a table, from the total margin up to the table itself."""
    ids = sorted(table.breakdowns)
    keys = []
    for size in range(len(ids) + 1):
        for combo in itertools.combinations(ids, size):
            keys.append(StatisticKey(frozenset(combo)))
    return keys


@dataclass(frozen=True)
class Microdata:
    """Person records; one categorical value per breakdown of the catalog."""

    columns: tuple[str, ...]
    records: tuple[tuple[str, ...], ...]

    @property
    def n(self) -> int:
        return len(self.records)

    def column_index(self, bid: str) -> int:
        try:
            return self.columns.index(bid)
        except ValueError:
            raise ProgrammeError(f"microdata has no column {bid!r}") from None


def validate_microdata(programme: TableProgramme, data: Microdata) -> None:
    if set(data.columns) != set(programme.breakdowns):
        raise ProgrammeError(
            f"microdata columns {sorted(data.columns)} do not match catalog "
            f"{sorted(programme.breakdowns)}"
        )
    for i, record in enumerate(data.records):
        for bid, value in zip(data.columns, record):
            if value not in programme.breakdown(bid).categories:
                raise ProgrammeError(
                    f"value {value!r} is not a category of breakdown {bid!r}",
                    f"records[{i}]",
                )


def read_microdata(path, programme: TableProgramme | None = None) -> Microdata:
    """Read microdata from CSV (header row mandatory, one column per breakdown)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ProgrammeError("microdata CSV is empty") from None
        records = [tuple(row) for row in reader if row]
    data = Microdata(columns=tuple(header), records=tuple(records))
    if programme is not None:
        validate_microdata(programme, data)
    return data


def tabulate(
    programme: TableProgramme, data: Microdata, key: StatisticKey
) -> dict[Cell, int]:
    """Exact tabulation of the microdata by a statistic key.

    Every cell of the statistic appears in the result, zeros included.  The
    empty key returns ``{(): n}``.  A cell-restricted key returns only that
    cell's count.
    """
    programme.validate_key(key)
    ids = key.sorted_ids
    indices = [data.column_index(bid) for bid in ids]
    counts: dict[Cell, int] = {cell: 0 for cell in programme.cells(key)}
    for record in data.records:
        cell = tuple(record[i] for i in indices)
        counts[cell] += 1
    if key.cell is not None:
        return {key.cell: counts[key.cell]}
    return counts


def cell_records(
    programme: TableProgramme, data: Microdata, key: StatisticKey
) -> dict[Cell, tuple[int, ...]]:
    """Record indices contributing to each cell of a statistic (zeros included)."""
    programme.validate_key(key)
    ids = key.sorted_ids
    indices = [data.column_index(bid) for bid in ids]
    members: dict[Cell, list[int]] = {cell: [] for cell in programme.cells(key)}
    for ri, record in enumerate(data.records):
        members[tuple(record[i] for i in indices)].append(ri)
    return {cell: tuple(v) for cell, v in members.items()}


def neighbor(data: Microdata, op: str, record: tuple[str, ...]) -> Microdata:
    """A database differing from ``data`` by exactly one record."""
    if len(record) != len(data.columns):
        raise ProgrammeError(
            f"record length {len(record)} does not match columns {len(data.columns)}"
        )
    if op == "add":
        return Microdata(columns=data.columns, records=data.records + (tuple(record),))
    if op == "remove":
        records = list(data.records)
        try:
            records.remove(tuple(record))
        except ValueError:
            raise ProgrammeError(f"record {record!r} not present, cannot remove") from None
        return Microdata(columns=data.columns, records=tuple(records))
    raise ProgrammeError(f"unknown neighbor op {op!r}, expected 'add' or 'remove'")
