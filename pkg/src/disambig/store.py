"""File-backed knowledge store: entities, product catalog, concept graph.

The store is loaded once from a JSON file, fully indexed in memory, and
immutable afterwards; reloading swaps the whole store atomically. Schema:

    {
      "entities": [{"ref_id", "name", "kind", "attributes": {...}}],
      "products": [{"product_id", "display_name", "keywords": [...]}],
      "concepts": [{"term", "definition", "keywords": [...]}]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Union

from .errors import DuplicateKey, ParseError, UnknownRef
from .model import ConceptDefinition


@dataclass(frozen=True)
class Entity:
    """A linkable record; kinds are open strings ("dataset", "segment", ...)."""

    ref_id: str
    name: str
    kind: str
    attributes: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "ref_id": self.ref_id,
            "name": self.name,
            "kind": self.kind,
            "attributes": dict(self.attributes),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Entity":
        return cls(
            ref_id=d["ref_id"],
            name=d["name"],
            kind=d["kind"],
            attributes=dict(d.get("attributes", {})),
        )


@dataclass(frozen=True)
class ProductEntry:
    """A catalog product matched against query tokens via its keyword set."""

    product_id: str
    display_name: str
    keywords: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "keywords", frozenset(k.lower() for k in self.keywords))
        if not self.keywords:
            raise ParseError(f"product {self.display_name!r} has an empty keyword set")

    def to_dict(self) -> dict[str, Any]:
        return {
            "product_id": self.product_id,
            "display_name": self.display_name,
            "keywords": sorted(self.keywords),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ProductEntry":
        return cls(
            product_id=d["product_id"],
            display_name=d["display_name"],
            keywords=frozenset(d["keywords"]),
        )


@dataclass(frozen=True)
class ConceptGraph:
    """Term -> definition map; terms are stored lowercase."""

    entries: Mapping[str, ConceptDefinition] = field(default_factory=dict)

    def terms(self) -> list[str]:
        return list(self.entries)

    def get(self, term: str) -> ConceptDefinition | None:
        return self.entries.get(term.lower())

    def __len__(self) -> int:
        return len(self.entries)


class Store:
    """Immutable in-memory view over one store file."""

    def __init__(
        self,
        entities: list[Entity],
        products: list[ProductEntry],
        concepts: ConceptGraph,
    ):
        self.entities: tuple[Entity, ...] = tuple(entities)
        self.products: tuple[ProductEntry, ...] = tuple(products)
        self.concepts = concepts

        by_name: dict[str, list[Entity]] = {}
        seen_name_kind: set[tuple[str, str]] = set()
        by_ref: dict[str, Union[Entity, ProductEntry]] = {}
        for entity in self.entities:
            key = (entity.name.casefold(), entity.kind)
            if key in seen_name_kind:
                raise DuplicateKey(f"duplicate entity (name, kind): {entity.name!r} / {entity.kind!r}")
            seen_name_kind.add(key)
            if entity.ref_id in by_ref:
                raise DuplicateKey(f"duplicate ref_id: {entity.ref_id!r}")
            by_ref[entity.ref_id] = entity
            by_name.setdefault(entity.name.casefold(), []).append(entity)

        seen_display: set[str] = set()
        for product in self.products:
            if product.display_name in seen_display:
                raise DuplicateKey(f"duplicate product display_name: {product.display_name!r}")
            seen_display.add(product.display_name)
            if product.product_id in by_ref:
                raise DuplicateKey(f"duplicate ref_id: {product.product_id!r}")
            by_ref[product.product_id] = product

        self._by_name = {
            name: tuple(sorted(group, key=lambda e: (e.kind, e.ref_id)))
            for name, group in by_name.items()
        }
        self._by_ref = by_ref

    def lookup_name(self, name: str) -> list[Entity]:
        """Case-insensitive exact name match, ordered by (kind, ref_id)."""
        return list(self._by_name.get(name.casefold(), ()))

    def resolve_ref(self, ref_id: str) -> Union[Entity, ProductEntry]:
        """Total lookup by id across entities and products."""
        try:
            return self._by_ref[ref_id]
        except KeyError:
            raise UnknownRef(f"unknown ref_id: {ref_id!r}") from None

    def entity_names(self) -> list[str]:
        """Distinct case-folded entity names (index keys)."""
        return list(self._by_name)

    def counts(self) -> dict[str, int]:
        return {
            "entities": len(self.entities),
            "products": len(self.products),
            "concepts": len(self.concepts),
        }


def _require(d: Mapping[str, Any], key: str, context: str) -> Any:
    if key not in d:
        raise ParseError(f"{context}: missing field {key!r}")
    return d[key]


def parse_store(payload: Mapping[str, Any], source: str = "<memory>") -> Store:
    """Build a Store from already-parsed JSON; validates the schema."""
    for section in ("entities", "products", "concepts"):
        if not isinstance(payload.get(section, []), list):
            raise ParseError(f"{source}: {section!r} must be a list")

    entities = []
    for i, raw in enumerate(payload.get("entities", [])):
        ctx = f"{source}: entities[{i}]"
        entities.append(
            Entity(
                ref_id=str(_require(raw, "ref_id", ctx)),
                name=str(_require(raw, "name", ctx)),
                kind=str(_require(raw, "kind", ctx)),
                attributes=dict(raw.get("attributes", {})),
            )
        )

    products = []
    for i, raw in enumerate(payload.get("products", [])):
        ctx = f"{source}: products[{i}]"
        keywords = _require(raw, "keywords", ctx)
        if not isinstance(keywords, list) or not keywords:
            raise ParseError(f"{ctx}: keywords must be a non-empty list")
        products.append(
            ProductEntry(
                product_id=str(_require(raw, "product_id", ctx)),
                display_name=str(_require(raw, "display_name", ctx)),
                keywords=frozenset(str(k) for k in keywords),
            )
        )

    concept_entries: dict[str, ConceptDefinition] = {}
    for i, raw in enumerate(payload.get("concepts", [])):
        ctx = f"{source}: concepts[{i}]"
        term = str(_require(raw, "term", ctx)).lower()
        if term in concept_entries:
            raise DuplicateKey(f"{ctx}: duplicate concept term {term!r}")
        concept_entries[term] = ConceptDefinition(
            term=term,
            definition=str(_require(raw, "definition", ctx)),
            keywords=tuple(str(k) for k in raw.get("keywords", ())),
        )

    return Store(entities, products, ConceptGraph(concept_entries))


def load_store(path: str | Path) -> Store:
    """Load and index a store file; a pure function of the file bytes."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read store file {path}: {exc}") from exc
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ParseError(f"{path}: top-level value must be an object")
    return parse_store(payload, source=str(path))
