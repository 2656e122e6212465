"""Synthetic citation corpora, Smarties boxes, and cluster-recovery scoring.

The real bibliographic corpus behind the bundled citation-matching model is
not redistributable, so reproducibility rests on a seeded generator: it
builds a ground-truth world (authors, publications, authors-per-publication
collections), then emits noisy citations of it as an evidence file the
bundled model can load directly.  Scoring counts how many ground-truth
clusters the inferred partition reproduces exactly, either averaged per
kept sample or on the consensus partition from pairwise coreference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .evidence import Evidence

__all__ = [
    "InvalidParams",
    "ItemSetMismatch",
    "EmptyTrace",
    "SyntheticCorpusParams",
    "GroundTruth",
    "generate_corpus",
    "generate_smarties_box",
    "cluster_recovery",
    "map_partition",
    "consensus_partition",
    "sample_partitions",
    "recovery_report",
    "load_truth",
    "save_truth",
    "read_trace_file",
]


class InvalidParams(ValueError):
    pass


class ItemSetMismatch(ValueError):
    pass


class EmptyTrace(ValueError):
    pass


_TITLE_WORDS = (
    "adaptive bayesian causal compact convex decision deep discrete dynamic efficient "
    "exact fast generative graphical greedy hidden hierarchical hybrid incremental "
    "kernel latent linear logical markov modular neural nonparametric online optimal "
    "parallel probabilistic random recursive relational robust scalable sequential "
    "sparse spectral stochastic structured symbolic temporal tractable universal "
    "variational learning inference search planning tracking matching clustering "
    "estimation sampling networks models processes agents games trees fields maps"
).split()

_FIRST_NAMES = (
    "alan beatrice carl dora edgar frida gustav helen igor janet karl laura martin "
    "nina oscar paula quentin rosa stefan tanya ulrich vera walter xenia yusuf zoe"
).split()

_SURNAMES = (
    "abbott bellman cardoso dempster erdos fisher gauss hastings ishikawa jordan "
    "kolmogorov laplace markov neumann ortega pearson quine rasmussen shannon turing "
    "ulam vapnik wald xu young zadeh brandt cover dijkstra eckert forsythe gentzen"
).split()


@dataclass
class SyntheticCorpusParams:
    """Knobs for the synthetic citation generator."""

    num_pubs: int = 50
    num_authors: int = 40
    citations_per_pub_mean: float = 2.4
    max_authors_per_pub: int = 3
    noise: float = 0.05
    title_words: tuple = tuple(_TITLE_WORDS)
    first_names: tuple = tuple(_FIRST_NAMES)
    surnames: tuple = tuple(_SURNAMES)

    def validate(self):
        if self.num_pubs < 1 or self.num_authors < 1:
            raise InvalidParams("need at least one publication and one author")
        if not 0.0 <= self.noise <= 1.0:
            raise InvalidParams("noise rate must lie in [0, 1]")
        if self.citations_per_pub_mean <= 0 or self.max_authors_per_pub < 1:
            raise InvalidParams("citation and author counts must be positive")
        if self.num_authors > len(self.first_names) * len(self.surnames):
            raise InvalidParams("name pool too small for the requested author count")


@dataclass
class GroundTruth:
    """True partitions and attribute values behind a generated corpus."""

    citation_partition: list = field(default_factory=list)  # list of lists of citation ids
    mention_partition: list = field(default_factory=list)  # list of lists of mention ids
    true_titles: dict = field(default_factory=dict)  # citation id -> true title
    true_names: dict = field(default_factory=dict)  # mention id -> true author name


def save_truth(truth: GroundTruth, path) -> None:
    doc = {
        "citation_partition": truth.citation_partition,
        "mention_partition": truth.mention_partition,
        "true_titles": truth.true_titles,
        "true_names": truth.true_names,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_truth(path) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return GroundTruth(
        doc.get("citation_partition", []),
        doc.get("mention_partition", []),
        doc.get("true_titles", {}),
        doc.get("true_names", {}),
    )


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _perturb_name(name: str, noise: float, rng: np.random.Generator) -> str:
    first, last = name.split(" ", 1)
    if rng.random() < noise * 4:  # abbreviation is the dominant name corruption
        first = first[0] + "."
    if rng.random() < noise:
        last = _typo(last, rng)
    return f"{first} {last}"


def _perturb_title(title: str, noise: float, rng: np.random.Generator) -> str:
    words = title.split()
    kept = [w for w in words if len(words) <= 2 or rng.random() > noise * 0.5]
    if not kept:
        kept = words[:1]
    out = []
    for w in kept:
        out.append(_typo(w, rng) if rng.random() < noise else w)
    return " ".join(out)


def _typo(word: str, rng: np.random.Generator) -> str:
    if len(word) < 3:
        return word
    i = int(rng.integers(1, len(word) - 1))
    kind = int(rng.integers(3))
    if kind == 0:  # transpose
        return word[: i - 1] + word[i] + word[i - 1] + word[i + 1 :]
    if kind == 1:  # delete
        return word[:i] + word[i + 1 :]
    return word[:i] + word[i] + word[i:]  # double a letter


def generate_corpus(params: SyntheticCorpusParams, rng: np.random.Generator):
    """Build (Evidence, GroundTruth) for the bundled citation-matching model."""
    params.validate()
    # Distinct author names.
    name_pool = [f"{f} {s}" for f in params.first_names for s in params.surnames]
    order = rng.permutation(len(name_pool))
    names = [name_pool[i] for i in order[: params.num_authors]]
    # Distinct publication titles.
    titles: list[str] = []
    seen = set()
    words = list(params.title_words)
    while len(titles) < params.num_pubs:
        size = int(rng.integers(3, 6))
        picks = rng.choice(len(words), size=size, replace=False)
        title = " ".join(words[i] for i in picks)
        if title not in seen:
            seen.add(title)
            titles.append(title)
    # Publications: title plus a small author collection.
    pub_authors = []
    for _ in range(params.num_pubs):
        k = int(rng.integers(1, params.max_authors_per_pub + 1))
        picks = rng.choice(params.num_authors, size=min(k, params.num_authors), replace=False)
        pub_authors.append([int(a) for a in picks])
    # Citations and author mentions.
    citations = []
    mentions = []
    truth = GroundTruth()
    cit_blocks: dict[int, list] = {}
    mention_blocks: dict[int, list] = {}
    cit_no = 0
    men_no = 0
    for p in range(params.num_pubs):
        n_cits = 1 + int(rng.poisson(max(params.citations_per_pub_mean - 1.0, 0.0)))
        for _ in range(n_cits):
            cid = f"c{cit_no:04d}"
            cit_no += 1
            cit_blocks.setdefault(p, []).append(cid)
            title_obs = _perturb_title(titles[p], params.noise, rng)
            citations.append((cid, title_obs))
            truth.true_titles[cid] = titles[p]
            for a in pub_authors[p]:
                mid = f"m{men_no:04d}"
                men_no += 1
                mention_blocks.setdefault(a, []).append(mid)
                name_obs = _perturb_name(names[a], params.noise, rng)
                mentions.append((mid, cid, name_obs))
                truth.true_names[mid] = names[a]
    truth.citation_partition = [cit_blocks[p] for p in sorted(cit_blocks)]
    truth.mention_partition = [mention_blocks[a] for a in sorted(mention_blocks)]
    evidence = Evidence(
        objects={
            "Citation": [c for c, _ in citations],
            "AuthorMention": [m for m, _, _ in mentions],
        },
        assignments=(
            [("CitedTitle", (c,), t) for c, t in citations]
            + [("CitedIn", (m,), c) for m, c, _ in mentions]
            + [("CitedName", (m,), n) for m, _, n in mentions]
        ),
    )
    return evidence, truth


def generate_smarties_box(
    n_colours: int, n_draws: int, noise: float, rng: np.random.Generator, colour_pool=None
):
    """Evidence for the Smarties model: noisy colour observations of random draws."""
    if n_colours < 1 or n_draws < 1:
        raise InvalidParams("need at least one colour and one draw")
    if not 0.0 <= noise <= 1.0:
        raise InvalidParams("noise rate must lie in [0, 1]")
    pool = list(
        colour_pool
        or ("red", "green", "blue", "yellow", "orange", "purple", "brown", "pink", "cyan", "white")
    )
    if n_colours > len(pool):
        raise InvalidParams("colour pool too small")
    colours = pool[:n_colours]
    assignments = []
    draws = [f"d{i:04d}" for i in range(n_draws)]
    true_colours = []
    for d in draws:
        c = colours[int(rng.integers(n_colours))]
        true_colours.append(c)
        if n_colours > 1 and rng.random() < noise:
            others = [x for x in colours if x != c]
            obs = others[int(rng.integers(len(others)))]
        else:
            obs = c
        assignments.append(("ObsColour", (d,), obs))
    evidence = Evidence(objects={"Draw": draws}, assignments=assignments)
    return evidence, true_colours


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def _as_blocks(partition) -> list[frozenset]:
    blocks = [frozenset(b) for b in partition]
    if any(not b for b in blocks):
        raise InvalidParams("partitions cannot contain empty blocks")
    return blocks


def cluster_recovery(predicted, truth) -> float:
    """Fraction of ground-truth blocks appearing exactly in the predicted partition."""
    pred_blocks = set(_as_blocks(predicted))
    truth_blocks = _as_blocks(truth)
    pred_items = set().union(*pred_blocks) if pred_blocks else set()
    truth_items = set().union(*truth_blocks) if truth_blocks else set()
    if pred_items != truth_items:
        raise ItemSetMismatch(
            f"predicted partition covers {len(pred_items)} items, truth covers {len(truth_items)}"
        )
    hits = sum(1 for b in truth_blocks if b in pred_blocks)
    return hits / len(truth_blocks)


def _partition_from_assignment(items: list, labels: list) -> list[frozenset]:
    groups: dict = {}
    for item, label in zip(items, labels):
        groups.setdefault(label, []).append(item)
    return [frozenset(v) for _, v in sorted(groups.items(), key=lambda kv: str(kv[0]))]


def sample_partitions(trace, symbol: str):
    """Per-sample partitions of the symbol's index objects by referenced atom."""
    if not len(trace.samples):
        raise EmptyTrace("trace holds no samples")
    engine = trace.engine
    meta = engine.meta.get(symbol)
    if meta is None or meta.kind != "indicator":
        raise ItemSetMismatch(f"{symbol!r} is not an object-reference symbol")
    items = [tup[0] if len(tup) == 1 else tup for tup in meta.space.tuples]
    for sample in trace.samples:
        yield _partition_from_assignment(items, list(sample["indicators"][symbol]))


def consensus_partition(trace, symbol: str) -> list[frozenset]:
    """Connected components of the pairwise-coreference graph at threshold 0.5."""
    if not len(trace.samples):
        raise EmptyTrace("trace holds no samples")
    engine = trace.engine
    meta = engine.meta[symbol]
    items = [tup[0] if len(tup) == 1 else tup for tup in meta.space.tuples]
    n = len(items)
    z = np.stack([sample["indicators"][symbol] for sample in trace.samples])
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            coref = float(np.mean(z[:, i] == z[:, j]))
            if coref > 0.5:
                parent[find(i)] = find(j)
    groups: dict = {}
    for i, item in enumerate(items):
        groups.setdefault(find(i), []).append(item)
    return [frozenset(v) for v in groups.values()]


def map_partition(trace, symbol: str = "RefPub") -> list[frozenset]:
    """Point-estimate partition from a trace (consensus mode)."""
    return consensus_partition(trace, symbol)


def recovery_report(trace, truth_partition, symbol: str = "RefPub") -> dict:
    """Both documented scoring modes for one trace against ground truth."""
    scores = [cluster_recovery(p, truth_partition) for p in sample_partitions(trace, symbol)]
    consensus = cluster_recovery(consensus_partition(trace, symbol), truth_partition)
    return {
        "samples": len(scores),
        "per_sample_average": float(np.mean(scores)),
        "consensus": consensus,
    }


# ---------------------------------------------------------------------------
# Trace files (for cmd_eval)
# ---------------------------------------------------------------------------


def read_trace_file(path, symbol: str = "RefPub"):
    """Per-sample {object: atom label} dicts from an exported trace file."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if len(lines) < 2:
        raise EmptyTrace(f"trace file {path} holds no samples")
    header = lines[0].split("\t")
    prefix = f"z_{symbol}["
    cols = [(i, h[len(prefix) : -1]) for i, h in enumerate(header) if h.startswith(prefix)]
    if not cols:
        raise ItemSetMismatch(f"trace file has no columns for symbol {symbol!r}")
    out = []
    for line in lines[1:]:
        cells = line.split("\t")
        out.append({obj: cells[i] for i, obj in cols})
    return out


def file_recovery_report(trace_path, truth: GroundTruth, symbol: str = "RefPub") -> dict:
    """Recovery scores computed from an exported trace file."""
    rows = read_trace_file(trace_path, symbol)
    items = sorted(rows[0])
    scores = []
    for row in rows:
        partition = _partition_from_assignment(items, [row[i] for i in items])
        scores.append(cluster_recovery(partition, truth.citation_partition))
    n = len(items)
    index = {obj: i for i, obj in enumerate(items)}
    z = np.array([[row[obj] for obj in items] for row in rows], dtype=object)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            coref = float(np.mean(z[:, i] == z[:, j]))
            if coref > 0.5:
                parent[find(i)] = find(j)
    groups: dict = {}
    for obj in items:
        groups.setdefault(find(index[obj]), []).append(obj)
    consensus = cluster_recovery([frozenset(v) for v in groups.values()], truth.citation_partition)
    return {
        "samples": len(rows),
        "per_sample_average": float(np.mean(scores)),
        "consensus": consensus,
    }
