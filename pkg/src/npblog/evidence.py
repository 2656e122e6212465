"""Evidence and query files, and evidence-derived vocabulary binding.

Evidence is a JSON document with the guaranteed object lists and the
observed function values::

    {
      "objects": {"Citation": ["c1", "c2"], "AuthorMention": ["m1", "m2"]},
      "assignments": [
        {"symbol": "CitedTitle", "args": ["c1"], "value": "managing giga bytes"},
        {"symbol": "CitedIn", "args": ["m1"], "value": "c1"}
      ]
    }

Queries are a JSON list; each record carries a ``kind``:

    [
      {"kind": "count", "type": "Pub"},
      {"kind": "new_object", "type": "Pub"},
      {"kind": "coreference", "symbol": "RefPub", "a": "c1", "b": "c2"},
      {"kind": "attribute", "term": "Title(RefPub(c1))"},
      {"kind": "collection_count", "symbol": "PubAuthorsDist", "index": "RefPub(c1)"}
    ]

String-noise distributions are defined over finite vocabularies derived
from the evidence: attribute families and distributions that exchange
string values form connected components, and each component's vocabulary
is the sorted union of observed strings plus any explicit ``values``
configured on its distributions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import parser as ast
from .model import AttributeFamily, GenerativeNetwork

__all__ = [
    "EvidenceTypeMismatch",
    "MissingObservedOnly",
    "UnresolvedQuery",
    "Evidence",
    "load_evidence",
    "evidence_from_dict",
    "save_evidence",
    "validate_evidence",
    "CountPosterior",
    "NewObjectProbability",
    "Coreference",
    "AttributePosterior",
    "CollectionCountPosterior",
    "load_queries",
    "parse_query",
    "query_label",
    "string_vocabularies",
    "bind_vocabularies",
]


class EvidenceTypeMismatch(Exception):
    pass


class MissingObservedOnly(Exception):
    def __init__(self, symbol: str, detail: str = ""):
        self.symbol = symbol
        super().__init__(
            f"observed-only symbol {symbol!r} must be fully assigned in evidence"
            + (f": {detail}" if detail else "")
        )


class UnresolvedQuery(Exception):
    pass


@dataclass
class Evidence:
    """Guaranteed extensions plus observed function values."""

    objects: dict[str, list] = field(default_factory=dict)
    assignments: list[tuple[str, tuple, object]] = field(default_factory=list)

    def by_symbol(self, symbol: str) -> dict[tuple, object]:
        return {tuple(args): value for sym, args, value in self.assignments if sym == symbol}

    def symbols(self) -> list[str]:
        seen: list[str] = []
        for sym, _, _ in self.assignments:
            if sym not in seen:
                seen.append(sym)
        return seen


def load_evidence(path) -> Evidence:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return evidence_from_dict(doc)


def evidence_from_dict(doc: dict) -> Evidence:
    objects = {t: list(names) for t, names in doc.get("objects", {}).items()}
    assignments = []
    for record in doc.get("assignments", []):
        try:
            assignments.append((record["symbol"], tuple(record["args"]), record["value"]))
        except KeyError as exc:
            raise EvidenceTypeMismatch(f"evidence record missing field {exc}") from None
    return Evidence(objects, assignments)


def save_evidence(evidence: Evidence, path) -> None:
    doc = {
        "objects": evidence.objects,
        "assignments": [
            {"symbol": sym, "args": list(args), "value": value}
            for sym, args, value in evidence.assignments
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def validate_evidence(network: GenerativeNetwork, evidence: Evidence) -> None:
    """Check types of every assignment and completeness of observed-only symbols."""
    symbols = network.symbols
    for t in evidence.objects:
        if t not in symbols.types:
            raise EvidenceTypeMismatch(f"evidence lists objects of undeclared type {t!r}")
        if not symbols.types[t].guaranteed:
            raise EvidenceTypeMismatch(f"type {t!r} is not guaranteed; its objects cannot be listed")
    for sym, args, value in evidence.assignments:
        info = symbols.functions.get(sym)
        if info is None or info.builtin:
            raise EvidenceTypeMismatch(f"evidence assigns unknown symbol {sym!r}")
        if len(args) != len(info.arg_types):
            raise EvidenceTypeMismatch(f"{sym!r} expects {len(info.arg_types)} args, got {len(args)}")
        for arg, t in zip(args, info.arg_types):
            if t == "Integer":
                if not isinstance(arg, int):
                    raise EvidenceTypeMismatch(f"{sym!r}: index {arg!r} should be an integer")
            elif t in symbols.types and symbols.types[t].guaranteed:
                if arg not in evidence.objects.get(t, []):
                    raise EvidenceTypeMismatch(f"{sym!r}: unknown {t} object {arg!r}")
            else:
                raise EvidenceTypeMismatch(
                    f"{sym!r} is indexed by non-guaranteed type {t!r}; it cannot be observed"
                )
        if info.return_kind == "object":
            t = info.return_type
            if symbols.types[t].guaranteed:
                if value not in evidence.objects.get(t, []):
                    raise EvidenceTypeMismatch(f"{sym!r}: value {value!r} is not a {t} object")
            else:
                raise EvidenceTypeMismatch(
                    f"{sym!r} returns unknown-type objects; such values cannot be observed"
                )
    for info in symbols.functions.values():
        if not info.observed_only:
            continue
        assigned = evidence.by_symbol(info.name)
        for index in _index_tuples(info.arg_types, evidence):
            if index not in assigned:
                raise MissingObservedOnly(info.name, f"missing value at {index!r}")


def _index_tuples(arg_types: tuple, evidence: Evidence):
    pools = []
    for t in arg_types:
        if t == "Integer":
            return []  # integer-indexed observed functions are checked lazily
        pools.append(evidence.objects.get(t, []))
    if not pools:
        return [()]
    out = [()]
    for pool in pools:
        out = [prefix + (obj,) for prefix in out for obj in pool]
    return out


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountPosterior:
    type_name: str


@dataclass(frozen=True)
class NewObjectProbability:
    type_name: str


@dataclass(frozen=True)
class Coreference:
    symbol: str
    a: object
    b: object


@dataclass(frozen=True)
class AttributePosterior:
    term: object  # parsed term AST

    @property
    def term_text(self) -> str:
        return ast._format_term(self.term)


@dataclass(frozen=True)
class CollectionCountPosterior:
    symbol: str
    index_term: object

    @property
    def term_text(self) -> str:
        return ast._format_term(self.index_term)


def parse_query(record: dict):
    kind = record.get("kind")
    try:
        if kind == "count":
            return CountPosterior(record["type"])
        if kind == "new_object":
            return NewObjectProbability(record["type"])
        if kind == "coreference":
            return Coreference(record["symbol"], record["a"], record["b"])
        if kind == "attribute":
            return AttributePosterior(ast.parse_term_text(record["term"]))
        if kind == "collection_count":
            return CollectionCountPosterior(record["symbol"], ast.parse_term_text(record["index"]))
    except KeyError as exc:
        raise UnresolvedQuery(f"query record missing field {exc}") from None
    except ast.ParseError as exc:
        raise UnresolvedQuery(f"bad query term: {exc}") from None
    raise UnresolvedQuery(f"unknown query kind {kind!r}")


def load_queries(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        records = json.load(fh)
    if not isinstance(records, list):
        raise UnresolvedQuery("query file must hold a JSON list")
    return [parse_query(r) for r in records]


def query_label(query) -> str:
    if isinstance(query, CountPosterior):
        return f"count({query.type_name})"
    if isinstance(query, NewObjectProbability):
        return f"new_object({query.type_name})"
    if isinstance(query, Coreference):
        return f"coreference({query.symbol}, {query.a}, {query.b})"
    if isinstance(query, AttributePosterior):
        return f"attribute({query.term_text})"
    if isinstance(query, CollectionCountPosterior):
        return f"collection_count({query.symbol}, {query.term_text})"
    raise UnresolvedQuery(f"unknown query {query!r}")


# ---------------------------------------------------------------------------
# Vocabulary flow
# ---------------------------------------------------------------------------


def _string_functions(network: GenerativeNetwork) -> list[str]:
    out = []
    for info in network.symbols.functions.values():
        if info.return_kind == "value" and info.return_type == "String":
            out.append(info.name)
    return out


def string_vocabularies(network: GenerativeNetwork, evidence: Evidence) -> dict[str, list[str]]:
    """Vocabulary per string-flow component, keyed by distribution name.

    Components connect attribute families to the distributions that
    generate them and to the distributions that consume their values as
    conditioning input, so titles and names (say) keep separate
    vocabularies.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str):
        parent[find(a)] = find(b)

    string_fns = set(_string_functions(network))

    def link_terms(dist_node: str, terms):
        for term in terms:
            if isinstance(term, ast.FnApp) and term.name in string_fns:
                union(dist_node, f"fn:{term.name}")

    for fam in network.families.values():
        if isinstance(fam, AttributeFamily) and fam.value_domain == "String":
            for clause in fam.clauses:
                if not isinstance(clause.body, ast.Draw):
                    continue
                draw = clause.body
                union(f"fn:{fam.fn_name}", f"dist:{draw.dist_name}")
                link_terms(f"dist:{draw.dist_name}", list(draw.paren_args) + list(draw.brace_args))
    # Observed-only string functions conditioning some draw are already linked
    # by the loop above; now pool observed values per component.
    values: dict[str, set] = {}
    for sym, _, value in evidence.assignments:
        info = network.symbols.functions.get(sym)
        if info is None or info.return_type != "String":
            continue
        root = find(f"fn:{sym}")
        values.setdefault(root, set()).add(value)
    out: dict[str, list[str]] = {}
    for name, dist in network.symbols.distributions.items():
        spec = dist.spec
        if spec is None or not getattr(spec, "needs_vocab", False):
            continue
        root = find(f"dist:{name}")
        vocab = set(values.get(root, set()))
        for other, other_dist in network.symbols.distributions.items():
            other_spec = other_dist.spec
            if other_spec is None or find(f"dist:{other}") != root:
                continue
            explicit = other_spec.params.get("values")
            if explicit:
                vocab.update(str(v) for v in explicit)
        out[name] = sorted(vocab)
    return out


def bind_vocabularies(network: GenerativeNetwork, evidence: Evidence) -> None:
    """Bind every vocabulary-based distribution used by the model."""
    vocabs = string_vocabularies(network, evidence)
    for name, vocab in vocabs.items():
        spec = network.symbols.distributions[name].spec
        if not vocab:
            raise MissingObservedOnly(
                name, "no vocabulary: provide evidence strings or explicit values"
            )
        spec.bind_vocab(vocab)
