"""Immutable, type-tagged data products keyed by (label, cell).

The store never inspects payloads; values pass through verbatim. Cross-domain
reads use :meth:`ProductStore.resolve`, which climbs the cell path to the
declared level before looking up.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Any

from .errors import DatamillError
from .hierarchy import CellId, LevelName

ProductLabel = str
TypeTag = str

SOURCE = "source"


class StoreError(DatamillError):
    pass


class DuplicateProduct(StoreError):
    pass


class CellClosed(StoreError):
    pass


class CellUnknown(StoreError):
    pass


@dataclass(frozen=True)
class DataProduct:
    """One labeled, framework-opaque value bound to exactly one cell."""

    label: ProductLabel
    cell: CellId
    type_tag: TypeTag
    value: Any
    provenance: str = SOURCE
    temporary: bool = False


class ProductStore:
    """Thread-safe (label, cell) -> product map with per-cell retirement.

    A single lock covers all operations, which makes them linearizable and
    makes retirement mutually exclusive with puts. Inserting an existing key
    is always an error; products are immutable once stored.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._products: dict[tuple[ProductLabel, CellId], DataProduct] = {}
        self._cell_labels: dict[CellId, list[ProductLabel]] = defaultdict(list)
        self._open: set[CellId] = set()
        self._closed: set[CellId] = set()

    def open_cell(self, cell: CellId) -> None:
        with self._lock:
            self._open.add(cell)

    def close_cell(self, cell: CellId) -> None:
        with self._lock:
            if cell not in self._open:
                raise CellUnknown(f"cannot close unknown cell '{cell}'")
            self._open.discard(cell)
            self._closed.add(cell)

    def put(self, product: DataProduct) -> None:
        with self._lock:
            cell = product.cell
            if cell in self._closed:
                raise CellClosed(f"cell '{cell}' has ended; cannot add '{product.label}'")
            if cell not in self._open:
                raise CellUnknown(f"cell '{cell}' has not begun")
            key = (product.label, cell)
            if key in self._products:
                raise DuplicateProduct(f"product '{product.label}' already stored at '{cell}'")
            self._products[key] = product
            self._cell_labels[cell].append(product.label)

    def get(self, label: ProductLabel, cell: CellId) -> DataProduct | None:
        """Exact-cell lookup; never climbs to ancestors."""
        with self._lock:
            return self._products.get((label, cell))

    def resolve(self, label: ProductLabel, declared_level: LevelName, at: CellId) -> DataProduct | None:
        """Lookup at the ancestor of ``at`` at ``declared_level``.

        Equivalent to ``get(label, at.ancestor(declared_level))``; absent when
        no such ancestor exists (orthogonal branches).
        """
        target = at.ancestor(declared_level)
        if target is None:
            return None
        return self.get(label, target)

    def retire_cell(self, cell: CellId) -> list[DataProduct]:
        """Drop all of the cell's products; return the non-temporary ones.

        After retirement the cell is unknown to the store, so a second
        retirement (or a late put) fails deterministically.
        """
        with self._lock:
            if cell not in self._open and cell not in self._closed:
                raise CellUnknown(f"cannot retire unknown cell '{cell}'")
            kept: list[DataProduct] = []
            for label in self._cell_labels.pop(cell, []):
                product = self._products.pop((label, cell))
                if not product.temporary:
                    kept.append(product)
            self._open.discard(cell)
            self._closed.discard(cell)
            return kept
