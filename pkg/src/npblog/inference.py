"""Blocked Gibbs sampling over compiled generative networks.

The sampler keeps the truncated stick weights explicit, which makes every
indicator variable conditionally independent of its siblings given the
sticks, collection vectors and atom attributes.  Each sweep therefore
updates whole families at once:

* indicators: categorical full conditionals, prior mass (sticks or a
  collection row) times the densities of every downstream variable whose
  generative distribution reads the indicator;
* attributes: exact discrete conditionals over the value vocabulary for
  active atoms, prior draws for inactive ones;
* sticks and collections: conjugate updates with occupancy counts
  (collection-mediated indicator usage is aggregated into the target
  type's stick counts).

Worlds are stored as integer code arrays (strings are coded against the
evidence-derived vocabulary of their flow component), so full conditionals
reduce to table gathers.  Models containing number statements are
forward-sampled only; ``run_chain`` refuses them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dp
from . import parser as ast
from .distributions import StringNoiseSpec
from .evidence import (
    AttributePosterior,
    CollectionCountPosterior,
    Coreference,
    CountPosterior,
    Evidence,
    NewObjectProbability,
    UnresolvedQuery,
    bind_vocabularies,
    query_label,
    validate_evidence,
)
from .model import (
    AttributeFamily,
    CollectionFamily,
    GenerativeNetwork,
    IndicatorFamily,
    NumberFamily,
    StickFamily,
    UnsupportedForm,
)

__all__ = [
    "NumberStatementInference",
    "WorldState",
    "Trace",
    "init_world",
    "sweep_indicators",
    "sweep_attributes",
    "sweep_sticks",
    "run_chain",
    "eval_query",
    "forward_sample",
    "export_trace",
]

NULL = -1


class NumberStatementInference(Exception):
    def __init__(self, type_name: str):
        self.type_name = type_name
        super().__init__(
            f"type {type_name!r} is governed by a number statement; posterior inference over "
            "number-statement worlds is not supported (forward sampling only)"
        )


# ---------------------------------------------------------------------------
# Value codecs
# ---------------------------------------------------------------------------


class _StringCodec:
    kind = "string"

    def __init__(self, vocab: list[str]):
        self.vocab = list(vocab)
        self._index = {v: i for i, v in enumerate(self.vocab)}

    def encode(self, value) -> int:
        if value is None:
            return NULL
        return self._index[value]

    def decode(self, code: int):
        return None if code == NULL else self.vocab[code]

    @property
    def size(self) -> int:
        return len(self.vocab)


class _IntCodec:
    kind = "integer"
    vocab: list = []

    def encode(self, value) -> int:
        if value is None:
            return NULL
        value = int(value)
        if value < 0:
            raise UnsupportedForm("integer values in worlds must be nonnegative")
        return value

    def decode(self, code: int):
        return None if code == NULL else int(code)


class _ObjectCodec:
    kind = "object"

    def __init__(self, names: list):
        self.names = list(names)
        self._index = {n: i for i, n in enumerate(self.names)}

    def encode(self, value) -> int:
        if value is None:
            return NULL
        return self._index[value]

    def decode(self, code: int):
        return None if code == NULL else self.names[code]


# ---------------------------------------------------------------------------
# Engine metadata
# ---------------------------------------------------------------------------


@dataclass
class _IndexSpace:
    """Enumeration of a family's guaranteed index tuples."""

    arg_types: tuple
    pools: tuple  # tuple of object-name lists
    tuples: list  # list of index tuples (object names)
    flat: dict  # name tuple -> flat position
    strides: tuple  # row-major strides over the pools

    @classmethod
    def build(cls, arg_types, evidence: Evidence):
        pools = []
        for t in arg_types:
            pools.append(tuple(evidence.objects.get(t, ())))
        tuples = [()]
        for pool in pools:
            tuples = [prefix + (obj,) for prefix in tuples for obj in pool]
        strides = []
        acc = 1
        for pool in reversed(pools):
            strides.append(acc)
            acc *= max(len(pool), 1)
        strides.reverse()
        return cls(
            tuple(arg_types),
            tuple(pools),
            tuples,
            {tup: i for i, tup in enumerate(tuples)},
            tuple(strides),
        )

    def flat_pos(self, positions: tuple) -> int:
        """Flat index from 0-based per-argument positions."""
        if len(positions) == 1:
            return int(positions[0])
        return int(sum(p * s for p, s in zip(positions, self.strides)))

    @property
    def size(self) -> int:
        return len(self.tuples)


@dataclass
class _FamilyMeta:
    fam: object
    kind: str  # indicator | attribute
    index_kind: str  # guar | atom
    space: _IndexSpace | None
    atom_type: str | None
    codec: object | None  # value codec for attributes
    frozen: np.ndarray | None = None  # evidence mask for attributes


class _Engine:
    """Static model information shared by every world of one (network, evidence) pair."""

    def __init__(self, network: GenerativeNetwork, evidence: Evidence):
        self.network = network
        self.evidence = evidence
        self.symbols = network.symbols
        self._env_cache: dict[str, list[dict]] = {}
        validate_evidence(network, evidence)
        bind_vocabularies(network, evidence)
        self._build_codecs()
        self._build_meta()

    # -- setup ---------------------------------------------------------------

    def _build_codecs(self):
        from .evidence import string_vocabularies

        dist_vocab = string_vocabularies(self.network, self.evidence)
        # Per-function string codecs: the vocabulary of the component the
        # function exchanges values with.  Derive it from the generating or
        # consuming distribution.
        self.fn_codec: dict[str, object] = {}
        symbols = self.symbols
        for fam in self.network.families.values():
            if not isinstance(fam, AttributeFamily):
                continue
            if fam.value_domain == "Integer":
                self.fn_codec[fam.fn_name] = _IntCodec()
            elif fam.value_domain == "String":
                vocab = self._component_vocab(fam, dist_vocab)
                self.fn_codec[fam.fn_name] = _StringCodec(vocab)
            elif fam.value_domain == "Boolean":
                self.fn_codec[fam.fn_name] = _IntCodec()
            else:
                raise UnsupportedForm(
                    f"attribute {fam.fn_name!r}: unsupported value domain {fam.value_domain!r}"
                )
        for info in symbols.functions.values():
            if not info.observed_only:
                continue
            if info.return_kind == "object":
                self.fn_codec[info.name] = _ObjectCodec(self.evidence.objects.get(info.return_type, []))
            elif info.return_type == "String":
                vocab = None
                for name, component in dist_vocab.items():
                    if info.name in _referenced_fns(self.network, name):
                        vocab = component
                        break
                if vocab is None:
                    vocab = sorted({v for s, _, v in self.evidence.assignments if s == info.name})
                self.fn_codec[info.name] = _StringCodec(vocab)
            else:
                self.fn_codec[info.name] = _IntCodec()

    def _component_vocab(self, fam: AttributeFamily, dist_vocab: dict) -> list[str]:
        for clause in fam.clauses:
            if isinstance(clause.body, ast.Draw) and clause.body.dist_name in dist_vocab:
                return dist_vocab[clause.body.dist_name]
        # Fall back to any consuming distribution's vocabulary.
        for name, vocab in dist_vocab.items():
            spec = self.symbols.distributions[name].spec
            if spec is not None and fam.fn_name in _referenced_fns(self.network, name):
                return vocab
        observed = sorted({v for s, _, v in self.evidence.assignments if s == fam.fn_name})
        if observed:
            return observed
        raise UnsupportedForm(f"no vocabulary derivable for string attribute {fam.fn_name!r}")

    def _build_meta(self):
        self.meta: dict[str, _FamilyMeta] = {}
        self.kmax: dict[str, int] = {}
        self.dp_types: list[str] = []
        self.number_types: list[str] = []
        net = self.network
        for fam in net.families.values():
            if isinstance(fam, StickFamily):
                self.dp_types.append(fam.type_name)
            elif isinstance(fam, NumberFamily):
                self.number_types.append(fam.type_name)
        # Truncations need the count of referencing indicator variables.
        ref_counts = {t: 0 for t in self.dp_types}
        for fam in net.families.values():
            if isinstance(fam, IndicatorFamily):
                space = _IndexSpace.build(fam.arg_types, self.evidence)
                if fam.target_type in ref_counts:
                    ref_counts[fam.target_type] += space.size
        for t in self.dp_types:
            default = max(50, 2 * ref_counts[t])
            self.kmax[t] = net.config.truncation_for(t, default=default)
        for fam in net.families.values():
            if isinstance(fam, IndicatorFamily):
                for t in fam.arg_types:
                    self._require_guaranteed(t, fam.fn_name)
                space = _IndexSpace.build(fam.arg_types, self.evidence)
                self.meta[fam.fn_name] = _FamilyMeta(fam, "indicator", "guar", space, None, None)
            elif isinstance(fam, AttributeFamily):
                self.meta[fam.fn_name] = self._attribute_meta(fam)
            elif isinstance(fam, CollectionFamily):
                if len(fam.arg_types) != 1 or fam.arg_types[0] not in self.dp_types:
                    raise UnsupportedForm(
                        f"collection {fam.fn_name!r} must be indexed by a single DP-mode type"
                    )

    def _require_guaranteed(self, type_name, who):
        info = self.symbols.types.get(type_name)
        if type_name == "Integer" or info is None or not info.guaranteed:
            raise UnsupportedForm(
                f"{who!r}: Gibbs inference requires guaranteed object indices, got {type_name!r}"
            )

    def _attribute_meta(self, fam: AttributeFamily) -> _FamilyMeta:
        unknown = [t for t in fam.arg_types if t in self.symbols.types and not self.symbols.types[t].guaranteed]
        codec = self.fn_codec[fam.fn_name]
        if len(unknown) == 1 and len(fam.arg_types) == 1:
            t = unknown[0]
            if t in self.number_types:
                raise NumberStatementInference(t)
            return _FamilyMeta(fam, "attribute", "atom", None, t, codec)
        if unknown:
            raise UnsupportedForm(
                f"attribute {fam.fn_name!r}: mixed unknown/guaranteed indices are not supported "
                "by the Gibbs engine"
            )
        for t in fam.arg_types:
            self._require_guaranteed(t, fam.fn_name)
        space = _IndexSpace.build(fam.arg_types, self.evidence)
        return _FamilyMeta(fam, "attribute", "guar", space, None, codec)

    # -- lookups ---------------------------------------------------------------

    def envs(self, fn_name: str) -> list[dict]:
        """Per-variable head-var environments (0-based index positions); cached."""
        if fn_name in self._env_cache:
            return self._env_cache[fn_name]
        meta = self.meta[fn_name]
        head_vars = self._head_vars(fn_name, meta)
        if meta.index_kind == "atom":
            out = [dict(zip(head_vars, (k,))) for k in range(self.kmax[meta.atom_type])]
        else:
            position = [
                {obj: i for i, obj in enumerate(pool)} for pool in meta.space.pools
            ]
            out = [
                dict(zip(head_vars, tuple(position[i][obj] for i, obj in enumerate(tup))))
                for tup in meta.space.tuples
            ]
        self._env_cache[fn_name] = out
        return out

    def _head_vars(self, fn_name: str, meta) -> tuple:
        for stmt in self.network.program.statements:
            if isinstance(stmt, ast.DependencyStatement) and stmt.fn_name == fn_name:
                return stmt.variables
        return tuple(f"_arg{i}" for i in range(len(meta.fam.arg_types)))

    def indicator_families(self) -> list[str]:
        return [k for k, m in self.meta.items() if m.kind == "indicator"]

    def attribute_families(self) -> list[str]:
        return [k for k, m in self.meta.items() if m.kind == "attribute"]

    def collection_families(self) -> list[CollectionFamily]:
        return self.network.families_of(CollectionFamily)

    def spec_of(self, dist_name: str):
        info = self.symbols.distributions.get(dist_name)
        if info is None or info.spec is None:
            from .model import MissingConfig

            raise MissingConfig(f"dist.{dist_name}.family")
        return info.spec


def _referenced_fns(network: GenerativeNetwork, dist_name: str) -> set[str]:
    """Function symbols appearing in the conditioning terms of draws from dist_name."""
    out: set[str] = set()

    def walk(term):
        if isinstance(term, ast.FnApp):
            out.add(term.name)
            for a in term.args:
                walk(a)
        elif isinstance(term, ast.Minus):
            walk(term.left)
            walk(term.right)

    for fam in network.families.values():
        clauses = getattr(fam, "clauses", ())
        for clause in clauses:
            if isinstance(clause.body, ast.Draw) and clause.body.dist_name == dist_name:
                for term in list(clause.body.paren_args) + list(clause.body.brace_args):
                    walk(term)
    return out


# ---------------------------------------------------------------------------
# World state
# ---------------------------------------------------------------------------


@dataclass
class WorldState:
    """One possible world: assignments to every variable of the network."""

    sticks: dict = field(default_factory=dict)  # type -> StickWeights
    collections: dict = field(default_factory=dict)  # fn -> (K_idx, K_target) array
    indicators: dict = field(default_factory=dict)  # fn -> int array over guaranteed tuples
    attributes: dict = field(default_factory=dict)  # fn -> int code array (atoms or tuples)
    observed: dict = field(default_factory=dict)  # observed-only fn -> frozen int array
    counts: dict = field(default_factory=dict)  # type -> per-atom reference counts
    engine: object = None

    def active_atoms(self, type_name: str) -> np.ndarray:
        return np.flatnonzero(self.counts[type_name] > 0)

    def n(self, type_name: str) -> int:
        return int(np.count_nonzero(self.counts[type_name] > 0))

    def new_object_mass(self, type_name: str) -> float:
        weights = self.sticks[type_name].weights
        return float(weights[self.counts[type_name] == 0].sum())

    def recount(self) -> None:
        """Recompute per-atom reference counts from the indicators."""
        engine: _Engine = self.engine
        for t in engine.dp_types:
            counts = np.zeros(engine.kmax[t], dtype=np.int64)
            for key in engine.indicator_families():
                fam = engine.meta[key].fam
                if fam.target_type != t:
                    continue
                z = self.indicators[key]
                valid = z[z >= 0]
                if valid.size:
                    counts += np.bincount(valid, minlength=engine.kmax[t])
            self.counts[t] = counts


# ---------------------------------------------------------------------------
# Term evaluation
# ---------------------------------------------------------------------------


def _eval_term(engine: _Engine, world: WorldState, term, env: dict):
    """Scalar term evaluation; returns an int code/position or None for null."""
    if isinstance(term, ast.Var):
        return env[term.name]
    if isinstance(term, ast.IntLit):
        return term.value
    if isinstance(term, ast.Minus):
        left = _eval_term(engine, world, term.left, env)
        right = _eval_term(engine, world, term.right, env)
        if left is None or right is None:
            return None
        return left - right
    if isinstance(term, ast.FnApp):
        args = []
        for a in term.args:
            v = _eval_term(engine, world, a, env)
            if v is None:
                return None
            args.append(v)
        return _apply_fn(engine, world, term.name, tuple(args))
    raise UnsupportedForm(f"cannot evaluate term {term!r}")


def _apply_fn(engine: _Engine, world, name: str, args: tuple):
    if name == "Less":
        return int(args[0] < args[1])
    if name in world.indicators:
        idx = engine.meta[name].space.flat_pos(args)
        code = int(world.indicators[name][idx])
        return None if code == NULL else code
    if name in world.attributes:
        meta = engine.meta[name]
        idx = args[0] if meta.index_kind == "atom" else meta.space.flat_pos(args)
        code = int(world.attributes[name][idx])
        return None if code == NULL else code
    if name in world.observed:
        idx = engine.obs_space[name].flat_pos(args)
        code = int(world.observed[name][idx])
        return None if code == NULL else code
    raise UnresolvedQuery(f"symbol {name!r} has no value store")


def _eval_term_candidates(engine, world, term, env, pivot_fn, pivot_idx, kmax):
    """Evaluate a term as a vector over candidate values of indicator pivot_fn[pivot_idx].

    Returns either a scalar (term does not route through the pivot) or an
    int array of length kmax with NULL propagation.
    """
    if isinstance(term, ast.Var):
        return env[term.name]
    if isinstance(term, ast.IntLit):
        return term.value
    if isinstance(term, ast.Minus):
        left = _eval_term_candidates(engine, world, term.left, env, pivot_fn, pivot_idx, kmax)
        right = _eval_term_candidates(engine, world, term.right, env, pivot_fn, pivot_idx, kmax)
        if left is None or right is None:
            return None
        return left - right
    if isinstance(term, ast.FnApp):
        args = []
        vector = False
        for a in term.args:
            v = _eval_term_candidates(engine, world, a, env, pivot_fn, pivot_idx, kmax)
            if v is None:
                return None
            vector = vector or isinstance(v, np.ndarray)
            args.append(v)
        if term.name == pivot_fn and not vector:
            idx = engine.meta[term.name].space.flat_pos(tuple(args))
            if idx == pivot_idx:
                return np.arange(kmax)
        if not vector:
            return _apply_fn(engine, world, term.name, tuple(args))
        if len(args) != 1:
            raise UnsupportedForm("vectorized evaluation supports single-argument chains only")
        vec = args[0]
        store = world.attributes.get(term.name)
        if store is None:
            store = world.indicators.get(term.name)
        if store is None:
            store = world.observed.get(term.name)
        if store is None:
            raise UnresolvedQuery(f"symbol {term.name!r} has no value store")
        safe = np.where(vec >= 0, vec, 0)
        out = store[safe]
        return np.where(vec >= 0, out, NULL)
    raise UnsupportedForm(f"cannot evaluate term {term!r}")


# ---------------------------------------------------------------------------
# Clause machinery
# ---------------------------------------------------------------------------


def _applicable_clause(engine, world, clauses, env):
    """First clause whose condition holds; None means fall through to the default."""
    for clause in clauses:
        if clause.condition is None:
            return clause
        if _eval_formula(engine, world, clause.condition, env):
            return clause
    return None


def _eval_formula(engine, world, formula, env) -> bool:
    if isinstance(formula, ast.Equals):
        return _eval_term(engine, world, formula.left, env) == _eval_term(
            engine, world, formula.right, env
        )
    value = _eval_term(engine, world, formula, env)
    return bool(value)


def _formula_reads_family(formula, fn_name) -> bool:
    def walk(term) -> bool:
        if isinstance(term, ast.FnApp):
            if term.name == fn_name:
                return True
            return any(walk(a) for a in term.args)
        if isinstance(term, (ast.Minus, ast.Equals)):
            return walk(term.left) or walk(term.right)
        return False

    return walk(formula)


# ---------------------------------------------------------------------------
# Read graph (per-sweep dependency scan)
# ---------------------------------------------------------------------------


def _term_reads(engine, world, term, env, reads: list, in_condition: bool):
    """Record value-store reads a term performs in the current world.

    Each read is a (family, index, in_condition) triple.
    """
    if isinstance(term, ast.Var):
        return env[term.name]
    if isinstance(term, ast.IntLit):
        return term.value
    if isinstance(term, ast.Minus):
        left = _term_reads(engine, world, term.left, env, reads, in_condition)
        right = _term_reads(engine, world, term.right, env, reads, in_condition)
        if left is None or right is None:
            return None
        return left - right
    if isinstance(term, ast.FnApp):
        args = []
        for a in term.args:
            v = _term_reads(engine, world, a, env, reads, in_condition)
            if v is None:
                return None
            args.append(v)
        name = term.name
        if name in world.indicators or name in world.attributes:
            meta = engine.meta[name]
            if meta.index_kind == "atom":
                idx = args[0]
            else:
                idx = meta.space.flat_pos(tuple(args))
            reads.append((name, int(idx), in_condition))
        return _apply_fn(engine, world, name, tuple(args))
    raise UnsupportedForm(f"cannot evaluate term {term!r}")


def _formula_reads(engine, world, formula, env, reads: list):
    if isinstance(formula, ast.Equals):
        left = _term_reads(engine, world, formula.left, env, reads, True)
        right = _term_reads(engine, world, formula.right, env, reads, True)
        return left == right
    return bool(_term_reads(engine, world, formula, env, reads, True))


def _variable_reads(engine, world, fn_name, idx) -> list:
    """Reads performed by variable fn_name[idx] while evaluating its clauses."""
    meta = engine.meta[fn_name]
    env = engine.envs(fn_name)[idx]
    reads: list = []
    clauses = meta.fam.clauses
    chosen = None
    for clause in clauses:
        if clause.condition is None:
            chosen = clause
            break
        if _formula_reads(engine, world, clause.condition, env, reads):
            chosen = clause
            break
    if chosen is None and meta.kind == "indicator":
        # Default process: sticks or collection row.
        fam = meta.fam
        if fam.source_kind == "collection":
            for term in fam.source_index_terms:
                _term_reads(engine, world, term, env, reads, False)
        return reads
    if chosen is None or isinstance(chosen.body, ast.NullBody):
        return reads
    draw = chosen.body
    if meta.kind == "indicator" and meta.fam.source_kind == "collection":
        for term in draw.paren_args:
            _term_reads(engine, world, term, env, reads, False)
    else:
        for term in list(draw.paren_args) + list(draw.brace_args):
            if not isinstance(term, ast.TypedSet):
                _term_reads(engine, world, term, env, reads, False)
    return reads


def _children_of(engine, world) -> dict[str, dict[int, list]]:
    """children[fam][idx] = deduped list of (reader family, reader idx, via_condition).

    Scanned against the current world once per sweep.  Which variable reads
    which is static while one family is swept: indicator indices are
    guaranteed-typed, so changing indicator values reroutes reads of
    *attributes* only, and the attribute sweep rescans first.
    """
    children: dict[str, dict[int, list]] = {
        key: {} for key in list(engine.indicator_families()) + list(engine.attribute_families())
    }
    for reader in list(engine.indicator_families()) + list(engine.attribute_families()):
        meta = engine.meta[reader]
        size = engine.kmax[meta.atom_type] if meta.index_kind == "atom" else meta.space.size
        for j in range(size):
            seen = set()
            for family, index, in_cond in _variable_reads(engine, world, reader, j):
                key = (family, index)
                if key in seen and not in_cond:
                    continue
                seen.add(key)
                children[family].setdefault(index, []).append((reader, j, in_cond))
    return children


# ---------------------------------------------------------------------------
# Log density of a single variable (scalar)
# ---------------------------------------------------------------------------


def _indicator_prior_vec(engine, world, fn_name, env) -> np.ndarray:
    fam = engine.meta[fn_name].fam
    if fam.source_kind == "stick":
        weights = world.sticks[fam.target_type].weights
        with np.errstate(divide="ignore"):
            return np.log(weights)
    if fam.source_kind == "collection":
        row = _collection_row(engine, world, fn_name, env)
        with np.errstate(divide="ignore"):
            return np.log(world.collections[fam.source_fn][row])
    raise NumberStatementInference(fam.target_type)


def _collection_row(engine, world, fn_name, env) -> int:
    fam = engine.meta[fn_name].fam
    terms = fam.source_index_terms
    if len(terms) != 1:
        raise UnsupportedForm(f"{fn_name!r}: collection draws need exactly one index term")
    row = _eval_term(engine, world, terms[0], env)
    if row is None:
        raise UnsupportedForm(f"{fn_name!r}: collection index evaluated to null")
    return int(row)


def _attr_clause_dist(engine, clause):
    return engine.spec_of(clause.body.dist_name)


def _attr_prior_vec(engine, world, fn_name, env, clause) -> np.ndarray:
    """Log prior over the attribute's coded support for one clause draw."""
    meta = engine.meta[fn_name]
    spec = _attr_clause_dist(engine, clause)
    draw = clause.body
    cond = tuple(
        _decode_for(engine, world, t, env, spec)
        for t in list(draw.paren_args) + list(draw.brace_args)
    )
    vocab = meta.codec.vocab if meta.codec.kind == "string" else None
    if vocab is None:
        raise UnsupportedForm(f"attribute {fn_name!r}: only finite string supports are sweepable")
    return np.array([spec.log_density(cond, v) for v in vocab])


def _decode_for(engine, world, term, env, spec):
    value = _eval_term(engine, world, term, env)
    if value is None:
        return None
    # Conditioning values are passed raw; decode through the term's codec.
    name = _outer_fn(term)
    codec = engine.fn_codec.get(name)
    return codec.decode(value) if codec is not None else value


def _outer_fn(term):
    return term.name if isinstance(term, ast.FnApp) else None


def _indicator_forced_null(fam, clause) -> bool:
    """Whether the clause outcome forces the indicator to null.

    A satisfied null clause forces null.  With contingency clauses holding an
    explicit draw and none applicable, the free-logic default is null.  A
    null-only clause set with no clause applicable falls back to the default
    object process instead (the delta(null)/pi mixture).
    """
    if clause is not None:
        return isinstance(clause.body, ast.NullBody)
    if not fam.clauses:
        return False
    return any(isinstance(c.body, ast.Draw) for c in fam.clauses)


def _var_log_density(engine, world, fn_name, idx, envs) -> float:
    """Log density of the variable's current value given the rest of the world."""
    meta = engine.meta[fn_name]
    env = envs.envs(fn_name)[idx]
    if meta.kind == "indicator":
        value = int(world.indicators[fn_name][idx])
        clause = _applicable_clause(engine, world, meta.fam.clauses, env) if meta.fam.clauses else None
        if _indicator_forced_null(meta.fam, clause):
            return 0.0 if value == NULL else -np.inf
        if value == NULL:
            return -np.inf
        prior = _indicator_prior_vec(engine, world, fn_name, env)
        return float(prior[value])
    value = int(world.attributes[fn_name][idx])
    clause = _applicable_clause(engine, world, meta.fam.clauses, env)
    if clause is None or isinstance(clause.body, ast.NullBody):
        return 0.0 if value == NULL else -np.inf
    if value == NULL:
        return -np.inf
    spec = _attr_clause_dist(engine, clause)
    draw = clause.body
    cond = tuple(
        _decode_for(engine, world, t, env, spec)
        for t in list(draw.paren_args) + list(draw.brace_args)
    )
    return float(spec.log_density(cond, meta.codec.decode(value)))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _gumbel_argmax(rng: np.random.Generator, logits: np.ndarray, axis=-1) -> np.ndarray:
    noise = rng.gumbel(size=logits.shape)
    return np.argmax(logits + noise, axis=axis)


def _child_loglik_vec(engine, world, reader, j, via_cond, pivot_fn, pivot_idx, kmax, envs):
    """Log density of child variable (reader, j) as a vector over pivot candidates."""
    meta = engine.meta[reader]
    env = envs.envs(reader)[j]
    if via_cond or _any_condition_reads(meta.fam.clauses, pivot_fn):
        return _child_loglik_slow(engine, world, reader, j, pivot_fn, pivot_idx, kmax, envs)
    if meta.kind == "indicator":
        fam = meta.fam
        value = int(world.indicators[reader][j])
        if fam.source_kind == "collection":
            if value == NULL:
                return np.zeros(kmax)
            rows = _eval_term_candidates(
                engine, world, fam.source_index_terms[0], env, pivot_fn, pivot_idx, kmax
            )
            if rows is None:
                return np.zeros(kmax)  # row selection is null independent of the pivot
            if not isinstance(rows, np.ndarray):
                rows = np.full(kmax, rows)
            coll = world.collections[fam.source_fn]
            safe = np.where(rows >= 0, rows, 0)
            with np.errstate(divide="ignore"):
                out = np.log(coll[safe, value])
            return np.where(rows >= 0, out, -np.inf)
        return _child_loglik_slow(engine, world, reader, j, pivot_fn, pivot_idx, kmax, envs)
    # Attribute child: table lookup over the candidate-dependent conditioning code.
    clause = _applicable_clause(engine, world, meta.fam.clauses, env)
    if clause is None or isinstance(clause.body, ast.NullBody):
        return np.zeros(kmax)
    value = int(world.attributes[reader][j])
    spec = _attr_clause_dist(engine, clause)
    draw = clause.body
    terms = list(draw.paren_args) + list(draw.brace_args)
    if isinstance(spec, StringNoiseSpec) and len(terms) == 1 and value != NULL:
        codes = _eval_term_candidates(engine, world, terms[0], env, pivot_fn, pivot_idx, kmax)
        if codes is None:
            return np.zeros(kmax)  # conditioning is null independent of the pivot
        if not isinstance(codes, np.ndarray):
            codes = np.full(kmax, codes)
        table = spec.log_density_table()
        null_row = spec.null_log_density_row()
        safe = np.where(codes >= 0, codes, 0)
        out = table[safe, value]
        return np.where(codes >= 0, out, null_row[value])
    return _child_loglik_slow(engine, world, reader, j, pivot_fn, pivot_idx, kmax, envs)


def _any_condition_reads(clauses, fn_name) -> bool:
    return any(
        c.condition is not None and _formula_reads_family(c.condition, fn_name) for c in clauses
    )


def _child_loglik_slow(engine, world, reader, j, pivot_fn, pivot_idx, kmax, envs) -> np.ndarray:
    store = world.indicators[pivot_fn]
    saved = int(store[pivot_idx])
    out = np.empty(kmax)
    for k in range(kmax):
        store[pivot_idx] = k
        out[k] = _var_log_density(engine, world, reader, j, envs)
    store[pivot_idx] = saved
    return out


def sweep_indicators(state: WorldState, network: GenerativeNetwork, rng: np.random.Generator) -> WorldState:
    """Redraw every non-evidence indicator from its exact full conditional."""
    engine: _Engine = state.engine
    envs = _VarEnvCache(engine)
    children = _children_of(engine, state, envs)
    for fn_name in engine.indicator_families():
        meta = engine.meta[fn_name]
        fam = meta.fam
        kmax = engine.kmax[fam.target_type]
        fam_children = children.get(fn_name, {})
        for idx in range(meta.space.size):
            env = envs.envs(fn_name)[idx]
            if fam.clauses:
                clause = _applicable_clause(engine, state, fam.clauses, env)
                if _indicator_forced_null(fam, clause):
                    state.indicators[fn_name][idx] = NULL
                    continue
            logp = _indicator_prior_vec(engine, state, fn_name, env).copy()
            for reader, j, via_cond in fam_children.get(idx, ()):
                logp += _child_loglik_vec(
                    engine, state, reader, j, via_cond, fn_name, idx, kmax, envs
                )
            logp -= logp.max()
            state.indicators[fn_name][idx] = int(_gumbel_argmax(rng, logp))
        state.recount()
        # Re-scan dependencies: downstream read patterns may follow the new values.
        children = _children_of(engine, state, envs)
    return state


def sweep_attributes(state: WorldState, network: GenerativeNetwork, rng: np.random.Generator) -> WorldState:
    """Exact discrete conditionals for attributes; prior draws for inactive atoms."""
    engine: _Engine = state.engine
    envs = _VarEnvCache(engine)
    children = _children_of(engine, state, envs)
    for fn_name in engine.attribute_families():
        meta = engine.meta[fn_name]
        size = engine.kmax[meta.atom_type] if meta.index_kind == "atom" else meta.space.size
        frozen = meta.frozen
        fam_children = children.get(fn_name, {})
        for idx in range(size):
            if frozen is not None and frozen[idx]:
                continue
            env = envs.envs(fn_name)[idx]
            clause = _applicable_clause(engine, state, meta.fam.clauses, env)
            if clause is None or isinstance(clause.body, ast.NullBody):
                state.attributes[fn_name][idx] = NULL
                continue
            logp = _attr_prior_vec(engine, state, fn_name, env, clause)
            for reader, j, via_cond in fam_children.get(idx, ()):
                logp += _attr_child_loglik(engine, state, reader, j, via_cond, fn_name, idx, envs)
            logp -= logp.max()
            state.attributes[fn_name][idx] = int(_gumbel_argmax(rng, logp))
    return state


def _attr_child_loglik(engine, world, reader, j, via_cond, pivot_fn, pivot_idx, envs) -> np.ndarray:
    """Child log density as a vector over the pivot attribute's coded support."""
    meta = engine.meta[reader]
    pivot_meta = engine.meta[pivot_fn]
    support = pivot_meta.codec.size
    env = envs.envs(reader)[j]
    if not via_cond and meta.kind == "attribute":
        clause = _applicable_clause(engine, world, meta.fam.clauses, env)
        if clause is not None and isinstance(clause.body, ast.Draw):
            spec = _attr_clause_dist(engine, clause)
            draw = clause.body
            terms = list(draw.paren_args) + list(draw.brace_args)
            value = int(world.attributes[reader][j])
            # The conditioning chain returns the pivot's value unchanged, so the
            # child's density over candidate values is one table column.
            if isinstance(spec, StringNoiseSpec) and len(terms) == 1 and value != NULL:
                current = _eval_term(engine, world, terms[0], env)
                if current is not None:
                    return spec.log_density_table()[:, value]
    # Generic fallback: re-evaluate the child's density per candidate value.
    store = world.attributes[pivot_fn]
    saved = int(store[pivot_idx])
    out = np.empty(support)
    for v in range(support):
        store[pivot_idx] = v
        out[v] = _var_log_density(engine, world, reader, j, envs)
    store[pivot_idx] = saved
    return out


def sweep_sticks(state: WorldState, network: GenerativeNetwork, rng: np.random.Generator) -> WorldState:
    """Conjugate blocked updates for stick weights and collection vectors."""
    engine: _Engine = state.engine
    state.recount()
    for fam in network.families_of(StickFamily):
        counts = state.counts[fam.type_name]
        state.sticks[fam.type_name] = dp.stick_posterior_update(fam.concentration, counts, rng)
    for fam in engine.collection_families():
        pi = state.sticks[fam.target_type]
        k_idx = engine.kmax[fam.arg_types[0]]
        counts = np.zeros((k_idx, pi.kmax), dtype=np.int64)
        envs = _VarEnvCache(engine)
        for fn_name in engine.indicator_families():
            ind_fam = engine.meta[fn_name].fam
            if ind_fam.source_kind != "collection" or ind_fam.source_fn != fam.fn_name:
                continue
            z = state.indicators[fn_name]
            for idx in range(engine.meta[fn_name].space.size):
                if z[idx] == NULL:
                    continue
                row = _collection_row(engine, state, fn_name, envs.envs(fn_name)[idx])
                counts[row, z[idx]] += 1
        coll = state.collections[fam.fn_name]
        for row in range(k_idx):
            coll[row] = dp.dirichlet_collection_posterior(fam.concentration, pi, counts[row], rng)
    return state


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def init_world(
    network: GenerativeNetwork, evidence: Evidence, config=None, rng: np.random.Generator | None = None
) -> WorldState:
    """Ancestral world: every non-evidence variable sampled from the prior process."""
    if rng is None:
        rng = np.random.default_rng(0)
    for fam in network.families_of(NumberFamily):
        raise NumberStatementInference(fam.type_name)
    engine = _Engine(network, evidence)
    state = WorldState(engine=engine)
    for t in engine.dp_types:
        alpha = network.families[f"pi:{t}"].concentration
        state.sticks[t] = dp.stick_breaking_sample(alpha, engine.kmax[t], rng)
    for fam in engine.collection_families():
        pi = state.sticks[fam.target_type]
        k_idx = engine.kmax[fam.arg_types[0]]
        rows = [dp.dirichlet_collection_sample(fam.concentration, pi, rng) for _ in range(k_idx)]
        state.collections[fam.fn_name] = np.vstack(rows)
    # Observed-only symbols come straight from evidence.
    engine.obs_space = {}
    for info in engine.symbols.functions.values():
        if not info.observed_only:
            continue
        space = _IndexSpace.build(info.arg_types, evidence)
        engine.obs_space[info.name] = space
        codec = engine.fn_codec[info.name]
        arr = np.full(space.size, NULL, dtype=np.int64)
        for args, value in evidence.by_symbol(info.name).items():
            arr[space.flat[args]] = codec.encode(value)
        if np.any(arr == NULL):
            from .evidence import MissingObservedOnly

            raise MissingObservedOnly(info.name)
        state.observed[info.name] = arr
    engine.observed_store = dict(state.observed)
    # Allocate indicator/attribute stores in topological family order.
    envs = _VarEnvCache(engine)
    for key in _topo_order(network):
        fam = network.families[key]
        if isinstance(fam, IndicatorFamily):
            meta = engine.meta[key]
            state.indicators[key] = np.full(meta.space.size, NULL, dtype=np.int64)
            for idx in range(meta.space.size):
                env = envs.envs(key)[idx]
                clause = _applicable_clause(engine, state, fam.clauses, env) if fam.clauses else None
                if _indicator_forced_null(fam, clause):
                    continue
                prior = _indicator_prior_vec(engine, state, key, env)
                probs = np.exp(prior - prior.max())
                probs /= probs.sum()
                state.indicators[key][idx] = int(rng.choice(probs.size, p=probs))
        elif isinstance(fam, AttributeFamily):
            meta = engine.meta[key]
            size = engine.kmax[meta.atom_type] if meta.index_kind == "atom" else meta.space.size
            state.attributes[key] = np.full(size, NULL, dtype=np.int64)
            frozen = np.zeros(size, dtype=bool)
            observed = evidence.by_symbol(key) if meta.index_kind == "guar" else {}
            for idx in range(size):
                env = envs.envs(key)[idx]
                if meta.index_kind == "guar":
                    args = meta.space.tuples[idx]
                    if args in observed:
                        state.attributes[key][idx] = meta.codec.encode(observed[args])
                        frozen[idx] = True
                        continue
                clause = _applicable_clause(engine, state, fam.clauses, env)
                if clause is None or isinstance(clause.body, ast.NullBody):
                    continue
                spec = _attr_clause_dist(engine, clause)
                draw = clause.body
                cond = tuple(
                    _decode_for(engine, state, t, env, spec)
                    for t in list(draw.paren_args) + list(draw.brace_args)
                )
                state.attributes[key][idx] = meta.codec.encode(spec.sample(cond, rng))
            meta.frozen = frozen
    state.recount()
    return state


def _topo_order(network: GenerativeNetwork) -> list[str]:
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(key: str):
        state[key] = 1
        for p in network.parents.get(key, ()):
            if p != key and state.get(p, 0) == 0:
                visit(p)
        state[key] = 2
        order.append(key)

    for key in network.families:
        if state.get(key, 0) == 0:
            visit(key)
    return order


# ---------------------------------------------------------------------------
# Chains and traces
# ---------------------------------------------------------------------------


@dataclass
class Trace:
    """Kept post-burn-in samples plus the metadata needed to decode them."""

    samples: list
    seed: int
    iters: int
    burnin: int
    thin: int
    engine: object = None

    def __len__(self):
        return len(self.samples)


def _snapshot(state: WorldState, iteration: int) -> dict:
    engine = state.engine
    return {
        "iter": iteration,
        "n": {t: state.n(t) for t in engine.dp_types},
        "new_mass": {t: state.new_object_mass(t) for t in engine.dp_types},
        "indicators": {k: v.copy() for k, v in state.indicators.items()},
        "attributes": {k: v.copy() for k, v in state.attributes.items()},
    }


def run_chain(
    network: GenerativeNetwork,
    evidence: Evidence,
    config=None,
    iters: int = 1000,
    burnin: int = 100,
    thin: int = 1,
    seed: int = 0,
) -> Trace:
    """Run one Gibbs chain; deterministic given identical inputs and seed."""
    if burnin < 0 or iters <= burnin or thin < 1:
        raise ValueError("need iters > burnin >= 0 and thin >= 1")
    rng = np.random.default_rng(seed)
    state = init_world(network, evidence, config, rng)
    samples = []
    for it in range(iters):
        sweep_indicators(state, network, rng)
        sweep_attributes(state, network, rng)
        sweep_sticks(state, network, rng)
        if it >= burnin and (it - burnin) % thin == 0:
            samples.append(_snapshot(state, it))
    return Trace(samples, seed, iters, burnin, thin, engine=state.engine)


class _SampleView:
    """Duck-typed world over a stored snapshot, for query-time term evaluation."""

    def __init__(self, engine, sample, observed):
        self.engine = engine
        self.indicators = sample["indicators"]
        self.attributes = sample["attributes"]
        self.observed = observed
        self.sticks = {}
        self.collections = {}


def eval_query(trace: Trace, query, observed: dict | None = None):
    """Evaluate one posterior query against a trace.

    Histogram-valued queries return ``{value: probability}`` dictionaries;
    coreference and new-object queries return floats.
    """
    if not trace.samples:
        from .citations import EmptyTrace

        raise EmptyTrace("cannot evaluate queries on an empty trace")
    engine = trace.engine
    if observed is None:
        observed = getattr(engine, "observed_store", {})
    if isinstance(query, CountPosterior):
        if query.type_name not in engine.dp_types:
            raise UnresolvedQuery(f"no count posterior for type {query.type_name!r}")
        values = [s["n"][query.type_name] for s in trace.samples]
        return _histogram(values)
    if isinstance(query, NewObjectProbability):
        if query.type_name not in engine.dp_types:
            raise UnresolvedQuery(f"no stick weights for type {query.type_name!r}")
        return float(np.mean([s["new_mass"][query.type_name] for s in trace.samples]))
    if isinstance(query, Coreference):
        meta = engine.meta.get(query.symbol)
        if meta is None or meta.kind != "indicator":
            raise UnresolvedQuery(f"{query.symbol!r} is not an object-reference symbol")
        try:
            ia = meta.space.flat[(query.a,)]
            ib = meta.space.flat[(query.b,)]
        except KeyError:
            raise UnresolvedQuery(
                f"unknown objects in coreference query: {query.a!r}, {query.b!r}"
            ) from None
        hits = [int(s["indicators"][query.symbol][ia] == s["indicators"][query.symbol][ib]) for s in trace.samples]
        return float(np.mean(hits))
    if isinstance(query, AttributePosterior):
        values = []
        for sample in trace.samples:
            view = _SampleView(engine, sample, observed or {})
            code = _eval_term(engine, view, query.term, {})
            values.append(_decode_query_value(engine, query.term, code))
        return _histogram(values)
    if isinstance(query, CollectionCountPosterior):
        ind_fns = [
            k
            for k in engine.indicator_families()
            if engine.meta[k].fam.source_kind == "collection"
            and engine.meta[k].fam.source_fn == query.symbol
        ]
        if not ind_fns:
            raise UnresolvedQuery(f"no indicators draw from collection {query.symbol!r}")
        envs = _VarEnvCache(engine)
        counts = []
        for sample in trace.samples:
            view = _SampleView(engine, sample, observed or {})
            row = _eval_term(engine, view, query.index_term, {})
            used = set()
            for fn in ind_fns:
                fam = engine.meta[fn].fam
                z = sample["indicators"][fn]
                for idx in range(engine.meta[fn].space.size):
                    if z[idx] == NULL:
                        continue
                    r = _eval_term(engine, view, fam.source_index_terms[0], envs.envs(fn)[idx])
                    if r == row:
                        used.add(int(z[idx]))
            counts.append(len(used))
        return _histogram(counts)
    raise UnresolvedQuery(f"unknown query {query!r}")


def _decode_query_value(engine, term, code):
    name = _outer_fn(term)
    codec = engine.fn_codec.get(name)
    if codec is not None:
        return codec.decode(code)
    return code


def _histogram(values: list) -> dict:
    total = float(len(values))
    out: dict = {}
    for v in values:
        key = "null" if v is None else v
        out[key] = out.get(key, 0) + 1
    return {k: out[k] / total for k in sorted(out, key=lambda x: (str(type(x)), str(x)))}


def export_trace(trace: Trace, path) -> None:
    """Tab-separated trace export: one row per kept sample."""
    engine = trace.engine
    ind_cols = []
    for fn in engine.indicator_families():
        meta = engine.meta[fn]
        for tup in meta.space.tuples:
            ind_cols.append((fn, tup))
    header = ["iter"]
    header += [f"n_{t}" for t in engine.dp_types]
    header += [f"newmass_{t}" for t in engine.dp_types]
    header += [f"z_{fn}[{','.join(str(x) for x in tup)}]" for fn, tup in ind_cols]
    lines = ["\t".join(header)]
    for sample in trace.samples:
        row = [str(sample["iter"])]
        row += [str(sample["n"][t]) for t in engine.dp_types]
        row += [format(sample["new_mass"][t], ".10g") for t in engine.dp_types]
        for fn, tup in ind_cols:
            meta = engine.meta[fn]
            code = int(sample["indicators"][fn][meta.space.flat[tup]])
            row.append("null" if code == NULL else str(code + 1))
        lines.append("\t".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Forward sampling (number-statement models)
# ---------------------------------------------------------------------------


def forward_sample(
    network: GenerativeNetwork,
    config,
    rng: np.random.Generator,
    guaranteed_sizes: dict[str, int] | None = None,
    evidence: Evidence | None = None,
) -> dict:
    """Ancestral sample of a full world as plain dictionaries.

    Supports number statements and BLOG-style uniform indicator draws; used
    for prior simulation of models whose posteriors the Gibbs engine refuses.
    Unknown-type extensions are keyed 1..n; guaranteed extensions take sizes
    from ``guaranteed_sizes`` (default 1 each).  Vocabulary distributions
    bind against ``evidence`` when given, else their explicit values.
    """
    bind_vocabularies(network, evidence if evidence is not None else Evidence())
    symbols = network.symbols
    sizes: dict[str, int] = {}
    for t in symbols.types.values():
        if t.guaranteed:
            sizes[t.name] = int((guaranteed_sizes or {}).get(t.name, 1))
    world: dict = {"n": sizes, "fn": {}}
    registry_spec = lambda name: network.symbols.distributions[name].spec  # noqa: E731

    def ext(type_name: str) -> range:
        return range(1, sizes[type_name] + 1)

    def eval_term(term, env):
        if isinstance(term, ast.Var):
            return env[term.name]
        if isinstance(term, ast.IntLit):
            return term.value
        if isinstance(term, ast.Minus):
            a, b = eval_term(term.left, env), eval_term(term.right, env)
            return None if a is None or b is None else a - b
        if isinstance(term, ast.FnApp):
            args = tuple(eval_term(a, env) for a in term.args)
            if any(a is None for a in args):
                return None
            if term.name == "Less":
                return int(args[0] < args[1])
            return world["fn"].get(term.name, {}).get(args)
        raise UnsupportedForm(f"cannot evaluate {term!r}")

    def eval_formula(formula, env):
        if isinstance(formula, ast.Equals):
            return eval_term(formula.left, env) == eval_term(formula.right, env)
        return bool(eval_term(formula, env))

    def index_pools(arg_types):
        pools = []
        for t in arg_types:
            if t == "Integer":
                pools.append(range(1, network.config.integer_range + 1))
            else:
                pools.append(ext(t))
        out = [()]
        for pool in pools:
            out = [prefix + (i,) for prefix in out for i in pool]
        return out

    for key in _topo_order(network):
        fam = network.families[key]
        if isinstance(fam, NumberFamily):
            spec = registry_spec(fam.dist_name)
            n = max(int(spec.sample((), rng)), 1)
            sizes[fam.type_name] = n
        elif isinstance(fam, StickFamily):
            kmax = network.config.truncation_for(fam.type_name, default=50)
            world["fn"][f"pi:{fam.type_name}"] = dp.stick_breaking_sample(
                fam.concentration, kmax, rng
            )
            sizes[fam.type_name] = kmax
        elif isinstance(fam, CollectionFamily):
            pi = world["fn"][f"pi:{fam.target_type}"]
            rows = {}
            for idx in index_pools(fam.arg_types):
                rows[idx] = dp.dirichlet_collection_sample(fam.concentration, pi, rng)
            world["fn"][fam.fn_name] = rows
        elif isinstance(fam, (IndicatorFamily, AttributeFamily)):
            head_vars = _head_vars_of(network, fam.fn_name)
            values = {}
            for idx in index_pools(fam.arg_types):
                env = dict(zip(head_vars, idx))
                clause = None
                clauses = fam.clauses
                for c in clauses:
                    if c.condition is None or eval_formula(c.condition, env):
                        clause = c
                        break
                if isinstance(fam, IndicatorFamily):
                    values[idx] = _forward_indicator(
                        network, world, fam, clause, env, rng, sizes, eval_term
                    )
                else:
                    values[idx] = _forward_attribute(
                        network, world, fam, clause, env, rng, eval_term, registry_spec
                    )
            world["fn"][fam.fn_name] = values
    world["n"] = dict(sizes)
    return world


def _head_vars_of(network, fn_name):
    for stmt in network.program.statements:
        if isinstance(stmt, ast.DependencyStatement) and stmt.fn_name == fn_name:
            return stmt.variables
    info = network.symbols.functions[fn_name]
    return tuple(f"_arg{i}" for i in range(len(info.arg_types)))


def _forward_indicator(network, world, fam, clause, env, rng, sizes, eval_term):
    if _indicator_forced_null(fam, clause):
        return None
    if fam.source_kind == "uniform_number":
        return int(rng.integers(sizes[fam.target_type])) + 1
    if fam.source_kind == "collection":
        row_idx = tuple(eval_term(t, env) for t in fam.source_index_terms)
        if any(i is None for i in row_idx):
            return None
        row = world["fn"][fam.source_fn][row_idx]
        return int(rng.choice(row.size, p=row)) + 1
    pi = world["fn"][f"pi:{fam.target_type}"]
    return int(rng.choice(pi.weights.size, p=pi.weights)) + 1


def _forward_attribute(network, world, fam, clause, env, rng, eval_term, registry_spec):
    if clause is None or isinstance(clause.body, ast.NullBody):
        return None
    draw = clause.body
    spec = registry_spec(draw.dist_name)
    cond = []
    for term in list(draw.paren_args) + list(draw.brace_args):
        if isinstance(term, ast.TypedSet):
            continue
        cond.append(eval_term(term, env))
    return spec.sample(tuple(cond), rng)
