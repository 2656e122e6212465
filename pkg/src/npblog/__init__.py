"""NP-BLOG: a probabilistic first-order language with unknown objects.

Parse ``.npblog`` models, compile them into Dirichlet-process generative
networks, run blocked Gibbs sampling against evidence, and answer posterior
queries about object counts, coreference and attributes.
"""

from .parser import parse_source, pretty_print
from .model import (
    ModelConfig,
    build_network,
    load_config,
    make_registry,
    parse_config,
    resolve_symbols,
    validate_exchangeability,
)
from .evidence import Evidence, load_evidence, load_queries
from .inference import eval_query, forward_sample, init_world, run_chain

__version__ = "0.1.0"

__all__ = [
    "parse_source",
    "pretty_print",
    "ModelConfig",
    "parse_config",
    "load_config",
    "make_registry",
    "resolve_symbols",
    "validate_exchangeability",
    "build_network",
    "Evidence",
    "load_evidence",
    "load_queries",
    "init_world",
    "run_chain",
    "eval_query",
    "forward_sample",
    "__version__",
]
