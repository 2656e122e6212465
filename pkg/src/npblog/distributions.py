"""Named distribution families and the model-level registry.

Every distribution name appearing in a model (``NameDist``, ``TitleStrDist``,
``NumPubsDist``, ...) resolves to a :class:`DistributionSpec` that knows how
to sample a value and score one in log space.  Specs are created from a
*family* plus parameters taken from the model config
(``dist.TitleStrDist.family = string_jaro``,
``dist.TitleStrDist.temperature = 12.0``), registered by name, and frozen
once the model is loaded.

String-noise families (``string_jaro``, ``string_tfidf``, ``confusion``)
are defined over a finite vocabulary that is bound after the evidence file
is read: the density of observing ``obs`` given true string ``s`` is a
softmax over the vocabulary, ``exp(lam * sim(s, obs)) / sum_v exp(lam *
sim(s, v))``, which is exactly normalizable and therefore usable inside
discrete Gibbs conditionals.
"""

from __future__ import annotations

import re

import numpy as np
from scipy.special import gammaln, logsumexp

from . import dp

__all__ = [
    "DuplicateName",
    "UnboundParameter",
    "OutOfVocabulary",
    "DistributionSpec",
    "Registry",
    "builtin_registry",
    "make_spec",
    "jaro_similarity",
    "tfidf_cosine_matrix",
    "StringModel",
]

BUILTIN_FAMILIES = (
    "uniform",
    "uniform_vocab",
    "categorical",
    "dirichlet",
    "poisson",
    "beta",
    "stick",
    "string_jaro",
    "string_tfidf",
    "confusion",
)


class DuplicateName(ValueError):
    """A distribution name was registered twice."""


class UnboundParameter(ValueError):
    """A required parameter slot (or vocabulary) is missing."""


class OutOfVocabulary(ValueError):
    """A string fell outside a string model's bound vocabulary."""


# ---------------------------------------------------------------------------
# String similarity
# ---------------------------------------------------------------------------


def jaro_similarity(s1: str, s2: str) -> float:
    """Jaro similarity in [0, 1]; 1 iff the strings are equal."""
    if s1 == s2:
        return 1.0
    len1, len2 = len(s1), len(s2)
    if len1 == 0 or len2 == 0:
        return 0.0
    window = max(max(len1, len2) // 2 - 1, 0)
    matched1 = [False] * len1
    matched2 = [False] * len2
    matches = 0
    for i, ch in enumerate(s1):
        lo = max(0, i - window)
        hi = min(i + window + 1, len2)
        for j in range(lo, hi):
            if matched2[j] or s2[j] != ch:
                continue
            matched1[i] = True
            matched2[j] = True
            matches += 1
            break
    if matches == 0:
        return 0.0
    transpositions = 0
    k = 0
    for i in range(len1):
        if not matched1[i]:
            continue
        while not matched2[k]:
            k += 1
        if s1[i] != s2[k]:
            transpositions += 1
        k += 1
    transpositions //= 2
    m = float(matches)
    return (m / len1 + m / len2 + (m - transpositions) / m) / 3.0


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tfidf_cosine_matrix(docs: list[str]) -> np.ndarray:
    """Pairwise TF-IDF cosine similarity over a document list.

    Weights are fitted once on ``docs`` (smoothed idf, L2-normalized rows);
    the diagonal is forced to exactly one so self-similarity holds even for
    degenerate documents.
    """
    tokenized = [_TOKEN_RE.findall(doc.lower()) for doc in docs]
    terms = sorted({t for toks in tokenized for t in toks})
    index = {t: i for i, t in enumerate(terms)}
    n_docs = len(docs)
    mat = np.zeros((n_docs, max(len(terms), 1)), dtype=float)
    for d, toks in enumerate(tokenized):
        for t in toks:
            mat[d, index[t]] += 1.0
    df = (mat > 0).sum(axis=0)
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    mat *= idf
    norms = np.linalg.norm(mat, axis=1)
    norms[norms == 0] = 1.0
    mat /= norms[:, None]
    sim = np.clip(mat @ mat.T, 0.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim


class StringModel:
    """Softmax-over-vocabulary noise model for strings.

    ``similarity`` is ``jaro`` or ``tfidf``; ``temperature`` scales how
    sharply the density concentrates on strings close to the true one.
    At temperature zero the model is uniform over the vocabulary.
    """

    def __init__(self, vocabulary: list[str], similarity: str, temperature: float):
        if temperature < 0:
            raise UnboundParameter("string model temperature must be >= 0")
        if len(vocabulary) != len(set(vocabulary)):
            raise ValueError("vocabulary entries must be distinct")
        self.vocabulary = list(vocabulary)
        self.similarity = similarity
        self.temperature = float(temperature)
        self._index = {s: i for i, s in enumerate(self.vocabulary)}
        if similarity == "jaro":
            n = len(self.vocabulary)
            sim = np.ones((n, n), dtype=float)
            for i in range(n):
                for j in range(i):
                    sim[i, j] = sim[j, i] = jaro_similarity(self.vocabulary[i], self.vocabulary[j])
        elif similarity == "tfidf":
            sim = tfidf_cosine_matrix(self.vocabulary)
        else:
            raise ValueError(f"unknown similarity kind {similarity!r}")
        self.sim = sim
        logits = self.temperature * sim
        self.log_table = logits - logsumexp(logits, axis=1, keepdims=True)

    def code(self, s: str) -> int:
        try:
            return self._index[s]
        except KeyError:
            raise OutOfVocabulary(f"string {s!r} is not in the model vocabulary") from None

    def log_density(self, true_string: str, observed_string: str) -> float:
        return float(self.log_table[self.code(true_string), self.code(observed_string)])


# ---------------------------------------------------------------------------
# Distribution specs
# ---------------------------------------------------------------------------


class DistributionSpec:
    """A named measure family with a conditional signature.

    ``value_domain`` names the output space (``string``, ``integer``,
    ``real``, ``simplex`` or ``object``); ``cond_arity`` is how many
    conditioning values the density expects.  Subclasses implement
    ``sample`` and ``log_density``; either may be unsupported, reported
    through ``can_sample`` / ``can_score``.
    """

    family = "abstract"
    value_domain = "real"
    cond_arity = 0
    can_sample = True
    can_score = True
    needs_vocab = False

    def __init__(self, name: str, params: dict | None = None):
        self.name = name
        self.params = dict(params or {})
        self.vocab: list[str] | None = None

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} ({self.family})>"

    def bind_vocab(self, vocab: list[str]) -> None:
        if self.needs_vocab:
            self.vocab = list(vocab)
            self._on_vocab_bound()

    def _on_vocab_bound(self) -> None:
        pass

    def _require(self, key: str):
        if key not in self.params:
            raise UnboundParameter(f"distribution {self.name!r} is missing parameter {key!r}")
        return self.params[key]

    def sample(self, cond: tuple, rng: np.random.Generator):
        raise NotImplementedError

    def log_density(self, cond: tuple, x) -> float:
        raise NotImplementedError

    def support(self) -> list | None:
        """Finite value support, or None when the domain is not enumerable."""
        return None


class UniformSpec(DistributionSpec):
    """Uniform over a finite set.

    In draws the set is usually a typed set argument (``Uniform(Pub p)``),
    which the engine resolves to the live extension and passes as the sole
    conditioning value: a list of candidate values.
    """

    family = "uniform"
    value_domain = "object"
    cond_arity = 1

    def sample(self, cond, rng):
        (candidates,) = cond
        candidates = list(candidates)
        if not candidates:
            raise UnboundParameter(f"{self.name}: cannot sample uniformly from an empty set")
        return candidates[int(rng.integers(len(candidates)))]

    def log_density(self, cond, x):
        (candidates,) = cond
        candidates = list(candidates)
        if x not in candidates:
            return -np.inf
        return -np.log(len(candidates))


class UniformVocabSpec(DistributionSpec):
    """Uniform base measure over the bound string vocabulary."""

    family = "uniform_vocab"
    value_domain = "string"
    needs_vocab = True

    def _values(self) -> list[str]:
        explicit = self.params.get("values")
        if explicit is not None:
            return list(explicit)
        if self.vocab:
            return self.vocab
        raise UnboundParameter(f"{self.name}: no vocabulary bound and no explicit values configured")

    def sample(self, cond, rng):
        values = self._values()
        return values[int(rng.integers(len(values)))]

    def log_density(self, cond, x):
        values = self._values()
        if x not in values:
            return -np.inf
        return -np.log(len(values))

    def support(self):
        return self._values()


class CategoricalSpec(DistributionSpec):
    family = "categorical"
    value_domain = "integer"

    def _probs_values(self):
        probs = np.asarray(self._require("probs"), dtype=float)
        if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > 1e-9:
            raise UnboundParameter(f"{self.name}: probs must form a distribution")
        values = self.params.get("values")
        if values is None:
            values = list(range(1, probs.size + 1))
        return probs, list(values)

    def sample(self, cond, rng):
        probs, values = self._probs_values()
        return values[int(rng.choice(probs.size, p=probs))]

    def log_density(self, cond, x):
        probs, values = self._probs_values()
        if x not in values:
            return -np.inf
        p = probs[values.index(x)]
        return float(np.log(p)) if p > 0 else -np.inf

    def support(self):
        _, values = self._probs_values()
        return values


class PoissonSpec(DistributionSpec):
    family = "poisson"
    value_domain = "integer"

    def sample(self, cond, rng):
        return int(rng.poisson(float(self._require("mean"))))

    def log_density(self, cond, x):
        mean = float(self._require("mean"))
        k = int(x)
        if k < 0:
            return -np.inf
        return float(k * np.log(mean) - mean - gammaln(k + 1))


class BetaSpec(DistributionSpec):
    family = "beta"
    value_domain = "real"

    def sample(self, cond, rng):
        return float(rng.beta(float(self._require("a")), float(self._require("b"))))

    def log_density(self, cond, x):
        a = float(self._require("a"))
        b = float(self._require("b"))
        x = float(x)
        if not 0.0 < x < 1.0:
            return -np.inf
        log_norm = gammaln(a + b) - gammaln(a) - gammaln(b)
        return float(log_norm + (a - 1) * np.log(x) + (b - 1) * np.log1p(-x))


class DirichletSpec(DistributionSpec):
    family = "dirichlet"
    value_domain = "simplex"

    def sample(self, cond, rng):
        return rng.dirichlet(np.asarray(self._require("alphas"), dtype=float))

    def log_density(self, cond, x):
        alphas = np.asarray(self._require("alphas"), dtype=float)
        x = np.asarray(x, dtype=float)
        if x.shape != alphas.shape or abs(float(x.sum()) - 1.0) > 1e-9:
            return -np.inf
        log_norm = gammaln(alphas.sum()) - gammaln(alphas).sum()
        return float(log_norm + np.sum((alphas - 1) * np.log(x)))


class StickSpec(DistributionSpec):
    """Stick-breaking weights draw; sampling only."""

    family = "stick"
    value_domain = "simplex"
    can_score = False

    def sample(self, cond, rng):
        return dp.stick_breaking_sample(
            float(self._require("alpha")), int(self._require("kmax")), rng
        ).weights


class StringNoiseSpec(DistributionSpec):
    """Similarity-softmax string observation model; cond = (true string,)."""

    family = "string_jaro"
    similarity = "jaro"
    value_domain = "string"
    cond_arity = 1
    needs_vocab = True

    def __init__(self, name, params=None):
        super().__init__(name, params)
        self.model: StringModel | None = None

    def _on_vocab_bound(self):
        self.model = StringModel(
            self.vocab, self.similarity, float(self.params.get("temperature", 1.0))
        )

    def _require_model(self) -> StringModel:
        if self.model is None:
            raise UnboundParameter(f"{self.name}: vocabulary not bound yet")
        return self.model

    def log_density_table(self) -> np.ndarray:
        """Log densities as a (true, observed) matrix over vocabulary codes."""
        return self._require_model().log_table

    def null_log_density_row(self) -> np.ndarray:
        """Density used when the conditioning value is null: uniform over vocab."""
        model = self._require_model()
        return np.full(len(model.vocabulary), -np.log(len(model.vocabulary)))

    def sample(self, cond, rng):
        model = self._require_model()
        (true_string,) = cond
        if true_string is None:
            return model.vocabulary[int(rng.integers(len(model.vocabulary)))]
        probs = np.exp(model.log_table[model.code(true_string)])
        return model.vocabulary[int(rng.choice(len(model.vocabulary), p=probs))]

    def log_density(self, cond, x):
        model = self._require_model()
        (true_string,) = cond
        if true_string is None:
            return float(self.null_log_density_row()[model.code(x)])
        return model.log_density(true_string, x)

    def support(self):
        return list(self._require_model().vocabulary)


class TfidfStringNoiseSpec(StringNoiseSpec):
    family = "string_tfidf"
    similarity = "tfidf"


class ConfusionSpec(StringNoiseSpec):
    """Symmetric confusion over the vocabulary: correct with prob 1 - error_rate."""

    family = "confusion"
    similarity = "confusion"

    def _on_vocab_bound(self):
        rate = float(self.params.get("error_rate", 0.0))
        size = len(self.vocab)
        if not 0.0 <= rate <= 1.0:
            raise UnboundParameter(f"{self.name}: error_rate must lie in [0, 1]")
        model = StringModel(self.vocab, "jaro", 0.0)  # reuse vocab/code plumbing
        if size == 1:
            table = np.zeros((1, 1))
        else:
            off = rate / (size - 1)
            table = np.full((size, size), np.log(off) if off > 0 else -np.inf)
            np.fill_diagonal(table, np.log(1.0 - rate) if rate < 1.0 else -np.inf)
        model.log_table = table
        self.model = model


_FAMILY_CLASSES = {
    "uniform": UniformSpec,
    "uniform_vocab": UniformVocabSpec,
    "categorical": CategoricalSpec,
    "dirichlet": DirichletSpec,
    "poisson": PoissonSpec,
    "beta": BetaSpec,
    "stick": StickSpec,
    "string_jaro": StringNoiseSpec,
    "string_tfidf": TfidfStringNoiseSpec,
    "confusion": ConfusionSpec,
}


def make_spec(name: str, family: str, params: dict | None = None) -> DistributionSpec:
    """Instantiate a spec for one of the built-in families."""
    try:
        cls = _FAMILY_CLASSES[family]
    except KeyError:
        raise UnboundParameter(
            f"distribution {name!r}: unknown family {family!r}; known: {', '.join(BUILTIN_FAMILIES)}"
        ) from None
    return cls(name, params)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


class Registry:
    """Name -> spec table; write-once per name, freezable after model load."""

    def __init__(self):
        self._specs: dict[str, DistributionSpec] = {}
        self._frozen = False

    def register(self, spec: DistributionSpec) -> DistributionSpec:
        if self._frozen:
            raise DuplicateName("registry is frozen")
        if spec.name in self._specs:
            raise DuplicateName(f"distribution {spec.name!r} already registered")
        self._specs[spec.name] = spec
        return spec

    def freeze(self) -> None:
        self._frozen = True

    def lookup(self, name: str) -> DistributionSpec | None:
        return self._specs.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def names(self) -> list[str]:
        return sorted(self._specs)


def builtin_registry() -> Registry:
    """Fresh registry pre-populated with the capitalized builtin names."""
    registry = Registry()
    registry.register(UniformSpec("Uniform"))
    registry.register(CategoricalSpec("Categorical"))
    registry.register(DirichletSpec("Dirichlet"))
    registry.register(PoissonSpec("Poisson"))
    registry.register(BetaSpec("Beta"))
    registry.register(StickSpec("Stick"))
    return registry
