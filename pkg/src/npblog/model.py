"""Symbol resolution, static validation and network compilation.

``resolve_symbols`` turns a parsed program into a :class:`SymbolTable` by
unifying type constraints drawn from explicit ``random``/``nonrandom``
declarations, distribution signatures and term structure.
``validate_exchangeability`` flags statements that pin down a particular
unknown object and therefore break exchangeability.  ``build_network``
compiles the program into a :class:`GenerativeNetwork`: one family of
random variables per symbol the generative process introduces (stick
weights, attributes, object indicators, collection distributions, extension
counts), plus the family-level parent graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import parser as ast
from .distributions import Registry, builtin_registry

__all__ = [
    "UnresolvedSymbol",
    "SignatureConflict",
    "MultipleGenerators",
    "MissingConfig",
    "CycleDetected",
    "UnsupportedForm",
    "Violation",
    "TypeInfo",
    "FunctionInfo",
    "DistInfo",
    "SymbolTable",
    "ModelConfig",
    "parse_config",
    "load_config",
    "make_registry",
    "resolve_symbols",
    "validate_exchangeability",
    "StickFamily",
    "NumberFamily",
    "IndicatorFamily",
    "CollectionFamily",
    "AttributeFamily",
    "GenerativeNetwork",
    "build_network",
]

VALUE_TYPES = frozenset({"String", "Integer", "Boolean", "Real", "Simplex"})

_DOMAIN_TO_TYPE = {
    "string": "String",
    "integer": "Integer",
    "real": "Real",
    "simplex": "Simplex",
}


class UnresolvedSymbol(Exception):
    def __init__(self, name: str, detail: str = ""):
        self.name = name
        super().__init__(f"cannot resolve symbol {name!r}" + (f": {detail}" if detail else ""))


class SignatureConflict(Exception):
    def __init__(self, name: str, detail: str):
        self.name = name
        super().__init__(f"conflicting uses of {name!r}: {detail}")


class MultipleGenerators(Exception):
    def __init__(self, name: str, detail: str = ""):
        self.name = name
        super().__init__(
            f"{name!r} has more than one generating statement" + (f" ({detail})" if detail else "")
        )


class MissingConfig(Exception):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"model config is missing required entry {key!r}")


class CycleDetected(Exception):
    def __init__(self, path: list[str]):
        self.path = path
        super().__init__("dependency cycle between families: " + " -> ".join(path))


class UnsupportedForm(Exception):
    pass


@dataclass(frozen=True)
class Violation:
    """Exchangeability violation: a statement refers to a particular unknown object."""

    statement_index: int
    fn_name: str
    term: object
    message: str


# ---------------------------------------------------------------------------
# Symbol table
# ---------------------------------------------------------------------------


@dataclass
class TypeInfo:
    name: str
    guaranteed: bool = False
    generation_mode: str = "none"  # none | number | dp
    number_dist: str | None = None


@dataclass
class FunctionInfo:
    name: str
    arg_types: tuple = ()
    return_type: str = ""
    return_kind: str = "value"  # value | object | objectDistribution
    random: bool = True
    builtin: bool = False
    generated_by: int | None = None  # statement index
    observed_only: bool = False
    target_type: str | None = None  # objectDistribution: atom type of the measure

    def signature(self) -> str:
        args = ", ".join(self.arg_types)
        if self.return_kind == "objectDistribution":
            return f"({args}) -> M_Multinomial([{self.target_type}])"
        return f"({args}) -> {self.return_type}"


@dataclass
class DistInfo:
    name: str
    value_domain: str | None  # String | Integer | ... | None when unknown
    cond_arity: int
    spec: object | None  # DistributionSpec once the registry knows the name

    def signature(self) -> str:
        out = self.value_domain or "?"
        return f"M({out})" if self.cond_arity == 0 else f"M({out} | {self.cond_arity} args)"


@dataclass
class SymbolTable:
    types: dict[str, TypeInfo] = field(default_factory=dict)
    functions: dict[str, FunctionInfo] = field(default_factory=dict)
    distributions: dict[str, DistInfo] = field(default_factory=dict)

    def unknown_types(self) -> list[str]:
        return [t.name for t in self.types.values() if not t.guaranteed]

    def guaranteed_types(self) -> list[str]:
        return [t.name for t in self.types.values() if t.guaranteed]

    def dp_types(self) -> list[str]:
        return [t.name for t in self.types.values() if t.generation_mode == "dp"]


# ---------------------------------------------------------------------------
# Model configuration
# ---------------------------------------------------------------------------


@dataclass
class ModelConfig:
    """Flat key-value model configuration.

    Keys follow ``alpha.<TypeOrCollection>``, ``truncation.<Type>``,
    ``dist.<Name>.<param>`` and the scalar ``integer_range`` (extension
    bound used when forward-sampling bare Integer arguments).
    """

    alpha: dict[str, float] = field(default_factory=dict)
    truncation: dict[str, int] = field(default_factory=dict)
    dist_params: dict[str, dict] = field(default_factory=dict)
    integer_range: int = 8

    def alpha_for(self, symbol: str) -> float:
        if symbol not in self.alpha:
            raise MissingConfig(f"alpha.{symbol}")
        value = float(self.alpha[symbol])
        if value <= 0:
            raise MissingConfig(f"alpha.{symbol} (must be positive)")
        return value

    def truncation_for(self, type_name: str, default: int | None = None) -> int:
        if type_name in self.truncation:
            value = int(self.truncation[type_name])
        elif default is not None:
            value = int(default)
        else:
            raise MissingConfig(f"truncation.{type_name}")
        if value < 1:
            raise MissingConfig(f"truncation.{type_name} (must be >= 1)")
        return value


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config(text: str) -> ModelConfig:
    """Parse ``key = value`` lines; ``//`` comments; commas make lists."""
    config = ModelConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MissingConfig(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if "," in value_text:
            value = [_parse_scalar(v) for v in value_text.split(",")]
        else:
            value = _parse_scalar(value_text)
        parts = key.split(".")
        if parts[0] == "alpha" and len(parts) == 2:
            config.alpha[parts[1]] = float(value)
        elif parts[0] == "truncation" and len(parts) == 2:
            config.truncation[parts[1]] = int(value)
        elif parts[0] == "dist" and len(parts) == 3:
            config.dist_params.setdefault(parts[1], {})[parts[2]] = value
        elif key == "integer_range":
            config.integer_range = int(value)
        else:
            raise MissingConfig(f"line {lineno}: unknown config key {key!r}")
    return config


def load_config(path) -> ModelConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def make_registry(config: ModelConfig) -> Registry:
    """Builtin registry plus every ``dist.<Name>`` entry from the config."""
    from .distributions import make_spec

    registry = builtin_registry()
    for name, params in config.dist_params.items():
        if name in registry:
            continue  # builtins take explicit params at draw sites, not names
        params = dict(params)
        family = params.pop("family", None)
        if family is None:
            raise MissingConfig(f"dist.{name}.family")
        if "values" in params and not isinstance(params["values"], list):
            params["values"] = [params["values"]]
        registry.register(make_spec(name, str(family), params))
    return registry


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------


class _Unifier:
    """Union-find over type slots, with concrete-type bindings."""

    def __init__(self):
        self._parent: list[int] = []
        self._binding: list[str | None] = []

    def fresh(self) -> int:
        self._parent.append(len(self._parent))
        self._binding.append(None)
        return len(self._parent) - 1

    def of(self, type_name: str) -> int:
        slot = self.fresh()
        self._binding[slot] = type_name
        return slot

    def _find(self, slot: int) -> int:
        while self._parent[slot] != slot:
            self._parent[slot] = self._parent[self._parent[slot]]
            slot = self._parent[slot]
        return slot

    def unify(self, a: int | None, b: int | None, who: str):
        if a is None or b is None:
            return
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return
        ta, tb = self._binding[ra], self._binding[rb]
        if ta is not None and tb is not None and ta != tb:
            raise SignatureConflict(who, f"{ta} vs {tb}")
        self._parent[ra] = rb
        if tb is None:
            self._binding[rb] = ta

    def bind(self, slot: int, type_name: str, who: str):
        root = self._find(slot)
        current = self._binding[root]
        if current is not None and current != type_name:
            raise SignatureConflict(who, f"{current} vs {type_name}")
        self._binding[root] = type_name

    def resolve(self, slot: int) -> str | None:
        return self._binding[self._find(slot)]


class _Resolver:
    def __init__(self, program: ast.Program, registry: Registry):
        self.program = program
        self.registry = registry
        self.uf = _Unifier()
        self.table = SymbolTable()
        self.fn_slots: dict[str, tuple[list[int], int]] = {}  # name -> (arg slots, return slot)
        self.pending_draws: list[tuple[int, str, ast.Draw, dict]] = []
        self._predefine_builtins()

    # -- setup ---------------------------------------------------------------

    def _predefine_builtins(self):
        self.table.functions["Less"] = FunctionInfo(
            "Less",
            arg_types=("Integer", "Integer"),
            return_type="Boolean",
            return_kind="value",
            random=False,
            builtin=True,
            observed_only=False,
        )
        self.fn_slots["Less"] = ([self.uf.of("Integer"), self.uf.of("Integer")], self.uf.of("Boolean"))

    def _ensure_fn(self, name: str, arity: int, where: str) -> tuple[list[int], int]:
        if name in self.fn_slots:
            slots, ret = self.fn_slots[name]
            if len(slots) != arity:
                raise SignatureConflict(name, f"used with {arity} args, elsewhere {len(slots)} ({where})")
            return slots, ret
        if name in self.table.distributions:
            raise SignatureConflict(name, f"used both as distribution and function ({where})")
        slots = [self.uf.fresh() for _ in range(arity)]
        ret = self.uf.fresh()
        self.fn_slots[name] = (slots, ret)
        self.table.functions.setdefault(name, FunctionInfo(name))
        return slots, ret

    # -- statement passes ------------------------------------------------------

    def collect_declarations(self):
        for idx, stmt in enumerate(self.program.statements):
            if isinstance(stmt, ast.TypeDecl):
                if stmt.name in self.table.types or stmt.name in VALUE_TYPES:
                    raise SignatureConflict(stmt.name, "type declared twice")
                self.table.types[stmt.name] = TypeInfo(stmt.name)
            elif isinstance(stmt, ast.GuaranteedDecl):
                info = self.table.types.get(stmt.type_name)
                if info is None:
                    raise UnresolvedSymbol(stmt.type_name, "guaranteed before 'type' declaration")
                info.guaranteed = True
            elif isinstance(stmt, ast.NumberStatement):
                info = self.table.types.get(stmt.type_name)
                if info is None:
                    raise UnresolvedSymbol(stmt.type_name, "number statement for undeclared type")
                if info.generation_mode == "number":
                    raise MultipleGenerators(stmt.type_name, "two number statements")
                if info.guaranteed:
                    raise SignatureConflict(stmt.type_name, "guaranteed type cannot have a number statement")
                info.generation_mode = "number"
                info.number_dist = stmt.dist_name
                self._note_distribution(stmt.dist_name, value_domain="Integer", cond_arity=0)
        for stmt in self.program.statements:
            if not isinstance(stmt, ast.FunctionDecl):
                continue
            self._check_type_name(stmt.return_type, stmt.name)
            for t in stmt.arg_types:
                self._check_type_name(t, stmt.name)
            if stmt.name in self.fn_slots:
                raise SignatureConflict(stmt.name, "declared twice")
            slots = [self.uf.of(t) for t in stmt.arg_types]
            ret = self.uf.of(stmt.return_type)
            self.fn_slots[stmt.name] = (slots, ret)
            self.table.functions[stmt.name] = FunctionInfo(stmt.name, random=stmt.random)

    def _check_type_name(self, name: str, who: str):
        if name not in self.table.types and name not in VALUE_TYPES:
            raise UnresolvedSymbol(name, f"unknown type in declaration of {who!r}")

    def _note_distribution(self, name: str, value_domain: str | None, cond_arity: int):
        if name in self.fn_slots:
            return
        spec = self.registry.lookup(name)
        if spec is not None:
            value_domain = _DOMAIN_TO_TYPE.get(spec.value_domain, value_domain)
            cond_arity = spec.cond_arity or cond_arity
        existing = self.table.distributions.get(name)
        if existing is None:
            self.table.distributions[name] = DistInfo(name, value_domain, cond_arity, spec)
        elif existing.value_domain is None:
            existing.value_domain = value_domain

    def collect_heads(self):
        for idx, stmt in enumerate(self.program.statements):
            if not isinstance(stmt, ast.DependencyStatement):
                continue
            self._ensure_fn(stmt.fn_name, len(stmt.variables), f"statement {idx + 1}")
            info = self.table.functions[stmt.fn_name]
            if info.builtin:
                raise SignatureConflict(stmt.fn_name, "cannot generate a builtin")
            if info.generated_by is not None:
                raise MultipleGenerators(stmt.fn_name)
            info.generated_by = idx

    def constraint_pass(self, record_draws: bool):
        for idx, stmt in enumerate(self.program.statements):
            if isinstance(stmt, ast.NumberStatement):
                for arg in stmt.paren_args:
                    self._type_of(arg, {}, f"statement {idx + 1}")
                continue
            if not isinstance(stmt, ast.DependencyStatement):
                continue
            arg_slots, _ = self.fn_slots[stmt.fn_name]
            env = dict(zip(stmt.variables, arg_slots))
            where = f"statement {idx + 1} ({stmt.fn_name})"
            for clause in stmt.clauses:
                if clause.condition is not None:
                    self._formula_constraints(clause.condition, env, where)
                if isinstance(clause.body, ast.Draw):
                    self._draw_constraints(idx, stmt.fn_name, clause.body, env, where, record_draws)

    def _formula_constraints(self, formula, env, where):
        if isinstance(formula, ast.Equals):
            lt = self._type_of(formula.left, env, where)
            rt = self._type_of(formula.right, env, where)
            self.uf.unify(lt, rt, where)
            return
        # Predicate application; its value is Boolean.
        slot = self._type_of(formula, env, where)
        if slot is not None:
            self.uf.bind(slot, "Boolean", where)

    def _draw_constraints(self, idx, fn_name, draw, env, where, record):
        _, f_ret = self.fn_slots[fn_name]
        g = draw.dist_name
        if g in self.fn_slots and g != fn_name:
            g_args, g_ret = self.fn_slots[g]
            plain = [a for a in draw.paren_args if not isinstance(a, ast.TypedSet)]
            if len(plain) == len(g_args):
                for term, slot in zip(plain, g_args):
                    self.uf.unify(self._type_of(term, env, where), slot, where)
            for term in draw.brace_args:
                self._type_of(term, env, where)
            return
        spec = self.registry.lookup(g)
        if spec is not None:
            if spec.family == "uniform":
                if len(draw.paren_args) == 1 and isinstance(draw.paren_args[0], ast.TypedSet):
                    ts = draw.paren_args[0]
                    self._check_type_name(ts.type_name, g)
                    self.uf.bind(f_ret, ts.type_name, where)
                else:
                    for term in list(draw.paren_args) + list(draw.brace_args):
                        self._type_of(term, env, where)
            else:
                domain = _DOMAIN_TO_TYPE.get(spec.value_domain)
                if domain is not None:
                    self.uf.bind(f_ret, domain, where)
                cond_domain = "String" if spec.family in ("string_jaro", "string_tfidf", "confusion") else None
                for term in list(draw.paren_args) + list(draw.brace_args):
                    slot = self._type_of(term, env, where)
                    if cond_domain is not None and slot is not None:
                        self.uf.bind(slot, cond_domain, where)
            self._note_distribution(g, None, len(draw.paren_args) + len(draw.brace_args))
            return
        # Unknown head: a named distribution or a collection function; classify later.
        for term in list(draw.paren_args) + list(draw.brace_args):
            if not isinstance(term, ast.TypedSet):
                self._type_of(term, env, where)
        if record:
            self.pending_draws.append((idx, fn_name, draw, env))

    def _type_of(self, term, env, where) -> int | None:
        if isinstance(term, ast.Var):
            if term.name not in env:
                raise UnresolvedSymbol(term.name, f"free logical variable in {where}")
            return env[term.name]
        if isinstance(term, ast.IntLit):
            return None  # literals adopt the surrounding slot's type
        if isinstance(term, ast.Minus):
            self._type_of(term.right, env, where)
            return self._type_of(term.left, env, where)
        if isinstance(term, ast.FnApp):
            slots, ret = self._ensure_fn(term.name, len(term.args), where)
            for arg, slot in zip(term.args, slots):
                self.uf.unify(self._type_of(arg, env, where), slot, where)
            return ret
        if isinstance(term, ast.TypedSet):
            raise UnsupportedForm(f"typed set argument only allowed in Uniform draws ({where})")
        raise TypeError(f"unexpected term {term!r}")

    def classify_pending(self):
        remaining = []
        for idx, fn_name, draw, env in self.pending_draws:
            g = draw.dist_name
            if g in self.fn_slots or g in self.table.distributions:
                self._apply_known_draw(idx, fn_name, draw)
                continue
            _, f_ret = self.fn_slots[fn_name]
            ret_type = self.uf.resolve(f_ret)
            if ret_type is not None and ret_type in self.table.types:
                # f returns objects: g is a collection distribution over that type.
                where = f"statement {idx + 1} ({fn_name})"
                if draw.brace_args:
                    raise UnsupportedForm(
                        f"collection draw {g!r} cannot take density arguments (statement {idx + 1})"
                    )
                arg_slots = []
                for term in draw.paren_args:
                    slot = self._type_of(term, env, where)
                    arg_slots.append(slot if slot is not None else self.uf.fresh())
                ret = self.uf.fresh()
                self.fn_slots[g] = (arg_slots, ret)
                self.table.functions[g] = FunctionInfo(
                    g, return_kind="objectDistribution", target_type=ret_type, random=True
                )
            elif ret_type is not None:
                self._note_distribution(g, ret_type, len(draw.paren_args) + len(draw.brace_args))
            else:
                remaining.append((idx, fn_name, draw, env))
        self.pending_draws = remaining

    def _apply_known_draw(self, idx, fn_name, draw):
        where = f"statement {idx + 1} ({fn_name})"
        g = draw.dist_name
        _, f_ret = self.fn_slots[fn_name]
        if g in self.fn_slots:
            g_info = self.table.functions[g]
            if g_info.return_kind == "objectDistribution" and g_info.target_type:
                self.uf.bind(f_ret, g_info.target_type, where)
        else:
            dist = self.table.distributions[g]
            if dist.value_domain is not None:
                self.uf.bind(f_ret, dist.value_domain, where)

    # -- finalize --------------------------------------------------------------

    def finalize(self) -> SymbolTable:
        for name, info in self.table.functions.items():
            if info.builtin:
                continue
            slots, ret = self.fn_slots[name]
            if info.return_kind == "objectDistribution":
                arg_types = tuple(self.uf.resolve(s) or "?" for s in slots)
                if "?" in arg_types:
                    raise UnresolvedSymbol(name, "collection index type could not be inferred")
                info.arg_types = arg_types
                info.return_type = f"M({info.target_type})"
                continue
            arg_types = tuple(self.uf.resolve(s) for s in slots)
            ret_type = self.uf.resolve(ret)
            if ret_type is None or any(t is None for t in arg_types):
                raise UnresolvedSymbol(
                    name,
                    "signature could not be inferred; add a 'random'/'nonrandom' declaration",
                )
            info.arg_types = arg_types
            info.return_type = ret_type
            if ret_type in self.table.types:
                info.return_kind = "object"
            elif ret_type in VALUE_TYPES:
                info.return_kind = "value"
            else:
                raise UnresolvedSymbol(name, f"unknown return type {ret_type!r}")
        if self.pending_draws:
            idx, fn_name, draw, _ = self.pending_draws[0]
            raise UnresolvedSymbol(
                draw.dist_name, f"cannot classify draw head in statement {idx + 1} ({fn_name})"
            )
        self._mark_observed_only()
        self._mark_dp_types()
        return self.table

    def _mark_observed_only(self):
        for info in self.table.functions.values():
            if info.builtin or info.generated_by is not None:
                continue
            if info.return_kind == "objectDistribution":
                continue  # rule-11 default
            target = self.table.types.get(info.return_type)
            if info.random and info.return_kind == "object" and target is not None and not target.guaranteed:
                continue  # rule-10 default indicator
            info.observed_only = True

    def _mark_dp_types(self):
        generated_attr_types = set()
        for info in self.table.functions.values():
            if info.generated_by is None or info.return_kind != "value":
                continue
            if len(info.arg_types) == 1:
                t = self.table.types.get(info.arg_types[0])
                if t is not None and not t.guaranteed:
                    generated_attr_types.add(t.name)
        for t in self.table.types.values():
            if not t.guaranteed and t.generation_mode == "none" and t.name in generated_attr_types:
                t.generation_mode = "dp"


def resolve_symbols(program: ast.Program, registry: Registry | None = None) -> SymbolTable:
    """Infer every symbol's signature and classification.

    Raises :class:`UnresolvedSymbol`, :class:`SignatureConflict` or
    :class:`MultipleGenerators` on inconsistent programs.
    """
    resolver = _Resolver(program, registry or builtin_registry())
    resolver.collect_declarations()
    resolver.collect_heads()
    resolver.constraint_pass(record_draws=True)
    for _ in range(3):
        resolver.classify_pending()
        resolver.constraint_pass(record_draws=False)
    return resolver.finalize()


# ---------------------------------------------------------------------------
# Exchangeability validation
# ---------------------------------------------------------------------------


def validate_exchangeability(program: ast.Program, symbols: SymbolTable) -> list[Violation]:
    """Return violations of the no-particular-object rule.

    A dependency statement may not contain an integer literal standing for a
    specific member of a non-guaranteed type: those objects carry no rigid
    labels, so naming one breaks exchangeability of the generated sequence.
    """
    violations: list[Violation] = []

    def is_unknown(type_name: str | None) -> bool:
        info = symbols.types.get(type_name or "")
        return info is not None and not info.guaranteed

    def walk_term(idx, fn_name, term, expected_type):
        if isinstance(term, ast.IntLit):
            if is_unknown(expected_type):
                violations.append(
                    Violation(
                        idx,
                        fn_name,
                        term,
                        f"literal {term.value} names a particular object of unknown type {expected_type}",
                    )
                )
            return
        if isinstance(term, ast.Minus):
            walk_term(idx, fn_name, term.left, expected_type)
            walk_term(idx, fn_name, term.right, None)
            return
        if isinstance(term, ast.FnApp):
            info = symbols.functions.get(term.name)
            arg_types = info.arg_types if info else ()
            for i, arg in enumerate(term.args):
                walk_term(idx, fn_name, arg, arg_types[i] if i < len(arg_types) else None)
        # Vars and typed sets cannot name a particular object.

    def term_type(term, env):
        if isinstance(term, ast.Var):
            return env.get(term.name)
        if isinstance(term, ast.FnApp):
            info = symbols.functions.get(term.name)
            return info.return_type if info else None
        if isinstance(term, ast.Minus):
            return term_type(term.left, env)
        return None

    for idx, stmt in enumerate(program.statements):
        if not isinstance(stmt, ast.DependencyStatement):
            continue
        info = symbols.functions.get(stmt.fn_name)
        env = dict(zip(stmt.variables, info.arg_types if info else ()))
        for clause in stmt.clauses:
            if isinstance(clause.condition, ast.Equals):
                left, right = clause.condition.left, clause.condition.right
                walk_term(idx, stmt.fn_name, left, term_type(right, env))
                walk_term(idx, stmt.fn_name, right, term_type(left, env))
            elif clause.condition is not None:
                walk_term(idx, stmt.fn_name, clause.condition, None)
            if isinstance(clause.body, ast.Draw):
                g = symbols.functions.get(clause.body.dist_name)
                g_args = g.arg_types if g else ()
                for i, term in enumerate(clause.body.paren_args):
                    walk_term(idx, stmt.fn_name, term, g_args[i] if i < len(g_args) else None)
                for term in clause.body.brace_args:
                    walk_term(idx, stmt.fn_name, term, None)
    return violations


# ---------------------------------------------------------------------------
# Generative network
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StickFamily:
    """Houses the stick weights of one unknown-object type."""

    type_name: str
    concentration: float

    @property
    def key(self) -> str:
        return f"pi:{self.type_name}"

    def describe(self) -> str:
        return f"StickFamily({self.type_name}, alpha={self.concentration:g})"


@dataclass(frozen=True)
class NumberFamily:
    """Extension-size variable of a number-statement type (forward sampling only)."""

    type_name: str
    dist_name: str
    paren_args: tuple = ()

    @property
    def key(self) -> str:
        return f"n:{self.type_name}"

    def describe(self) -> str:
        return f"NumberFamily({self.type_name} ~ {self.dist_name})"


@dataclass(frozen=True)
class IndicatorFamily:
    """Object-reference variables: which atom each guaranteed index points to.

    ``source_kind`` is ``stick`` (drawn from the type's stick weights),
    ``collection`` (drawn from a collection distribution selected by
    ``source_index_terms``), or ``uniform_number`` (uniform over a
    number-governed extension).  ``clauses`` keeps contingency and null
    clauses; an empty tuple means the unconditional default process.
    """

    fn_name: str
    arg_types: tuple
    target_type: str
    source_kind: str
    source_fn: str | None = None
    source_index_terms: tuple = ()
    clauses: tuple = ()

    @property
    def key(self) -> str:
        return self.fn_name

    def describe(self) -> str:
        src = {
            "stick": f"pi_{self.target_type}",
            "collection": f"{self.source_fn}[...]",
            "uniform_number": f"Uniform(1..n({self.target_type}))",
        }[self.source_kind]
        return f"IndicatorFamily({self.fn_name} -> {self.target_type}, source={src})"


@dataclass(frozen=True)
class CollectionFamily:
    """Per-atom multinomials over another type's atoms, Dirichlet(alpha_f * pi)."""

    fn_name: str
    arg_types: tuple
    target_type: str
    concentration: float

    @property
    def key(self) -> str:
        return self.fn_name

    def describe(self) -> str:
        return (
            f"CollectionFamily({self.fn_name}: {', '.join(self.arg_types)} -> "
            f"Dirichlet({self.concentration:g} * pi_{self.target_type}))"
        )


@dataclass(frozen=True)
class AttributeFamily:
    """Value-bearing variables generated by a dependency statement."""

    fn_name: str
    arg_types: tuple
    value_domain: str
    clauses: tuple = ()

    @property
    def key(self) -> str:
        return self.fn_name

    def describe(self) -> str:
        draws = [c.body.dist_name for c in self.clauses if isinstance(c.body, ast.Draw)]
        src = draws[0] if draws else "null"
        return f"AttributeFamily({self.fn_name}: {', '.join(self.arg_types) or '()'} ~ {src})"


@dataclass
class GenerativeNetwork:
    """Compiled model: families keyed by the symbol they house, plus edges."""

    families: dict[str, object]
    parents: dict[str, tuple]
    symbols: SymbolTable
    program: ast.Program
    config: ModelConfig

    def families_of(self, cls) -> list:
        return [f for f in self.families.values() if isinstance(f, cls)]

    def describe(self) -> str:
        lines = []
        for key, fam in self.families.items():
            parents = self.parents.get(key, ())
            suffix = f"  <- {', '.join(parents)}" if parents else ""
            lines.append(fam.describe() + suffix)
        return "\n".join(lines)


def _term_families(term, symbols: SymbolTable, families: dict) -> list[str]:
    """Family keys referenced by a term (recursively)."""
    refs: list[str] = []
    if isinstance(term, ast.FnApp):
        if term.name in families:
            refs.append(term.name)
        for arg in term.args:
            refs.extend(_term_families(arg, symbols, families))
    elif isinstance(term, ast.Minus):
        refs.extend(_term_families(term.left, symbols, families))
        refs.extend(_term_families(term.right, symbols, families))
    elif isinstance(term, ast.Equals):
        refs.extend(_term_families(term.left, symbols, families))
        refs.extend(_term_families(term.right, symbols, families))
    elif isinstance(term, ast.TypedSet):
        info = symbols.types.get(term.type_name)
        if info is not None and info.generation_mode == "number":
            refs.append(f"n:{term.type_name}")
    return refs


def build_network(
    program: ast.Program, symbols: SymbolTable, config: ModelConfig
) -> GenerativeNetwork:
    """Compile a resolved program into its family-level generative network.

    Deterministic: equal inputs yield identical family order and edges.
    """
    families: dict[str, object] = {}

    def add(fam):
        families[fam.key] = fam

    # Extension-governing families first: number statements, then sticks.
    for t in symbols.types.values():
        if t.generation_mode == "number":
            stmt = next(
                s
                for s in program.statements
                if isinstance(s, ast.NumberStatement) and s.type_name == t.name
            )
            add(NumberFamily(t.name, t.number_dist, stmt.paren_args))
        elif t.generation_mode == "dp":
            add(StickFamily(t.name, config.alpha_for(t.name)))

    # Collection defaults (rule 11) need their stick; create before indicator wiring.
    for info in symbols.functions.values():
        if info.return_kind != "objectDistribution":
            continue
        if info.generated_by is not None:
            raise UnsupportedForm(
                f"{info.name!r}: explicit generators for measure-valued functions are not supported"
            )
        target = symbols.types.get(info.target_type)
        if target is None or target.generation_mode != "dp":
            raise MultipleGenerators(
                info.name,
                f"collection default needs a DP-mode target type, but {info.target_type!r} is "
                f"{target.generation_mode if target else 'undeclared'}",
            )
        add(CollectionFamily(info.name, info.arg_types, info.target_type, config.alpha_for(info.name)))

    # Statement-generated families, in statement order.
    for idx, stmt in enumerate(program.statements):
        if not isinstance(stmt, ast.DependencyStatement):
            continue
        info = symbols.functions[stmt.fn_name]
        if info.return_kind == "value":
            add(AttributeFamily(stmt.fn_name, info.arg_types, info.return_type, stmt.clauses))
            continue
        if info.return_kind != "object":
            raise UnsupportedForm(f"statement {idx + 1}: cannot generate {info.return_kind} symbol")
        add(_compile_indicator(stmt, info, symbols))

    # Default indicator processes (rule 10) for generator-less object functions.
    for info in symbols.functions.values():
        if (
            info.builtin
            or info.observed_only
            or info.generated_by is not None
            or info.return_kind != "object"
            or info.name in families
        ):
            continue
        target = symbols.types[info.return_type]
        if target.generation_mode == "number":
            raise MultipleGenerators(
                info.name,
                f"default object process requires a DP-mode type, but {target.name!r} has a number statement",
            )
        if target.generation_mode != "dp":
            raise UnsupportedForm(
                f"{info.name!r} targets type {target.name!r} which has no generative process"
            )
        add(IndicatorFamily(info.name, info.arg_types, info.return_type, "stick"))

    parents = _wire_parents(families, symbols)
    _check_acyclic(families, parents, symbols)
    return GenerativeNetwork(families, parents, symbols, program, config)


def _compile_indicator(stmt, info: FunctionInfo, symbols: SymbolTable) -> IndicatorFamily:
    source_kind = "stick"
    source_fn = None
    index_terms: tuple = ()
    target = symbols.types[info.return_type]
    draws = [c.body for c in stmt.clauses if isinstance(c.body, ast.Draw)]
    for draw in draws:
        g_info = symbols.functions.get(draw.dist_name)
        if g_info is not None and g_info.return_kind == "objectDistribution":
            source_kind = "collection"
            source_fn = draw.dist_name
            index_terms = draw.paren_args
        elif draw.paren_args and isinstance(draw.paren_args[0], ast.TypedSet):
            ts = draw.paren_args[0]
            ts_info = symbols.types[ts.type_name]
            if ts_info.generation_mode == "number":
                source_kind = "uniform_number"
            elif ts_info.generation_mode == "dp":
                raise UnsupportedForm(
                    f"statement generating {stmt.fn_name!r}: Uniform over a DP-mode type is not "
                    "a finite set; omit the statement to use the default stick process"
                )
            else:
                raise UnsupportedForm(
                    f"statement generating {stmt.fn_name!r}: Uniform over type with no extension process"
                )
        else:
            raise UnsupportedForm(
                f"statement generating {stmt.fn_name!r}: object draws must use Uniform(T x) "
                "or a collection distribution"
            )
    if not draws and target.generation_mode != "dp":
        raise UnsupportedForm(
            f"null-only statement for {stmt.fn_name!r} needs a DP-mode target type"
        )
    # Keep clauses only when they add contingency/null structure.
    clauses = stmt.clauses
    if len(clauses) == 1 and clauses[0].condition is None and isinstance(clauses[0].body, ast.Draw):
        plain_clauses: tuple = ()
    else:
        plain_clauses = clauses
    return IndicatorFamily(
        stmt.fn_name,
        info.arg_types,
        info.return_type,
        source_kind,
        source_fn,
        index_terms,
        plain_clauses,
    )


def _wire_parents(families: dict, symbols: SymbolTable) -> dict[str, tuple]:
    parents: dict[str, tuple] = {}
    for key, fam in families.items():
        refs: list[str] = []
        if isinstance(fam, StickFamily):
            pass
        elif isinstance(fam, NumberFamily):
            for term in fam.paren_args:
                refs.extend(_term_families(term, symbols, families))
        elif isinstance(fam, CollectionFamily):
            refs.append(f"pi:{fam.target_type}")
        elif isinstance(fam, IndicatorFamily):
            if fam.source_kind == "stick":
                refs.append(f"pi:{fam.target_type}")
            elif fam.source_kind == "collection":
                refs.append(fam.source_fn)
                for term in fam.source_index_terms:
                    refs.extend(_term_families(term, symbols, families))
            else:
                refs.append(f"n:{fam.target_type}")
            for clause in fam.clauses:
                if clause.condition is not None:
                    refs.extend(_term_families(clause.condition, symbols, families))
                if isinstance(clause.body, ast.Draw):
                    for term in list(clause.body.paren_args) + list(clause.body.brace_args):
                        refs.extend(_term_families(term, symbols, families))
        elif isinstance(fam, AttributeFamily):
            single_unknown = (
                len(fam.arg_types) == 1
                and fam.arg_types[0] in symbols.types
                and not symbols.types[fam.arg_types[0]].guaranteed
            )
            if single_unknown:
                t = symbols.types[fam.arg_types[0]]
                refs.append(f"pi:{t.name}" if t.generation_mode == "dp" else f"n:{t.name}")
            for clause in fam.clauses:
                if clause.condition is not None:
                    refs.extend(_term_families(clause.condition, symbols, families))
                if isinstance(clause.body, ast.Draw):
                    for term in list(clause.body.paren_args) + list(clause.body.brace_args):
                        refs.extend(_term_families(term, symbols, families))
        deduped = []
        for r in refs:
            if r in families and r not in deduped:
                deduped.append(r)
        parents[key] = tuple(deduped)
    return parents


def _self_recursion_ok(fam, symbols: SymbolTable) -> bool:
    """Allow f referencing f only through a decremented guaranteed index (State(a, t-1))."""
    if not isinstance(fam, (AttributeFamily, IndicatorFamily)):
        return False

    def self_apps(term):
        apps = []
        if isinstance(term, ast.FnApp):
            if term.name == fam.fn_name:
                apps.append(term)
            for a in term.args:
                apps.extend(self_apps(a))
        elif isinstance(term, (ast.Minus, ast.Equals)):
            apps.extend(self_apps(term.left))
            apps.extend(self_apps(term.right))
        return apps

    apps = []
    for clause in fam.clauses:
        if clause.condition is not None:
            apps.extend(self_apps(clause.condition))
        if isinstance(clause.body, ast.Draw):
            for term in list(clause.body.paren_args) + list(clause.body.brace_args):
                apps.extend(self_apps(term))
    if not apps:
        return False
    return all(any(isinstance(arg, ast.Minus) for arg in app.args) for app in apps)


def _check_acyclic(families: dict, parents: dict, symbols: SymbolTable):
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(key: str):
        state[key] = 1
        stack.append(key)
        for p in parents.get(key, ()):
            if p == key:
                continue
            if state.get(p, 0) == 1:
                raise CycleDetected(stack[stack.index(p) :] + [p])
            if state.get(p, 0) == 0:
                visit(p)
        stack.pop()
        state[key] = 2

    for key, fam in families.items():
        if key in parents and key in parents[key] and not _self_recursion_ok(fam, symbols):
            raise CycleDetected([key, key])
        if state.get(key, 0) == 0:
            visit(key)
