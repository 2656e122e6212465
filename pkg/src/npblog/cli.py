"""Command-line interface: check models, run inference, evaluate recovery.

Exit codes: 0 on success, 1 on user/model errors (syntax, unresolved
symbols, bad config, evidence mismatches), 2 on internal errors.  Set
``NPBLOG_LOG`` to a logging level name for diagnostics.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import citations as capp
from . import parser as npparser
from .distributions import DuplicateName, OutOfVocabulary, UnboundParameter
from .dp import InvalidParam
from .evidence import (
    CountPosterior,
    EvidenceTypeMismatch,
    MissingObservedOnly,
    UnresolvedQuery,
    load_evidence,
    load_queries,
    query_label,
    save_evidence,
)
from .inference import (
    NumberStatementInference,
    Trace,
    eval_query,
    export_trace,
    run_chain,
)
from .model import (
    CycleDetected,
    MissingConfig,
    MultipleGenerators,
    SignatureConflict,
    UnresolvedSymbol,
    UnsupportedForm,
    build_network,
    load_config,
    make_registry,
    resolve_symbols,
    validate_exchangeability,
)

log = logging.getLogger("npblog")

USER_ERRORS = (
    npparser.LexError,
    npparser.ParseError,
    UnresolvedSymbol,
    SignatureConflict,
    MultipleGenerators,
    MissingConfig,
    CycleDetected,
    UnsupportedForm,
    EvidenceTypeMismatch,
    MissingObservedOnly,
    UnresolvedQuery,
    NumberStatementInference,
    DuplicateName,
    UnboundParameter,
    OutOfVocabulary,
    InvalidParam,
    capp.InvalidParams,
    capp.ItemSetMismatch,
    capp.EmptyTrace,
    FileNotFoundError,
    json.JSONDecodeError,
)


def _load_model(model_path, config_path):
    config = load_config(config_path)
    registry = make_registry(config)
    with open(model_path, "r", encoding="utf-8") as fh:
        source = fh.read()
    program = npparser.parse_source(source, source_name=str(model_path))
    symbols = resolve_symbols(program, registry)
    return program, symbols, config


def cmd_check(args) -> int:
    program, symbols, config = _load_model(args.model, args.config)
    violations = validate_exchangeability(program, symbols)
    if violations:
        for v in violations:
            print(f"exchangeability violation in statement {v.statement_index + 1} "
                  f"({v.fn_name}): {v.message}")
        return 1
    network = build_network(program, symbols, config)
    print(f"model {args.model}: {len(program.statements)} statements, "
          f"{len(network.families)} families")
    print(network.describe())
    print("functions:")
    for info in symbols.functions.values():
        if info.builtin:
            continue
        tag = " observed-only" if info.observed_only else ""
        print(f"  {info.name}: {info.signature()}{tag}")
    return 0


def _run_one_chain(network, evidence, iters, burnin, thin, seed):
    return run_chain(network, evidence, None, iters=iters, burnin=burnin, thin=thin, seed=seed)


def cmd_run(args) -> int:
    program, symbols, config = _load_model(args.model, args.config)
    violations = validate_exchangeability(program, symbols)
    if violations:
        raise UnsupportedForm(f"model has {len(violations)} exchangeability violations")
    network = build_network(program, symbols, config)
    evidence = load_evidence(args.evidence)
    queries = load_queries(args.queries) if args.queries else []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [args.seed + i for i in range(args.chains)]
    if args.chains == 1:
        traces = [_run_one_chain(network, evidence, args.iters, args.burnin, args.thin, seeds[0])]
    else:
        with ThreadPoolExecutor(max_workers=args.chains) as pool:
            futures = [
                pool.submit(_run_one_chain, network, evidence, args.iters, args.burnin, args.thin, s)
                for s in seeds
            ]
            traces = [f.result() for f in futures]
    for i, trace in enumerate(traces):
        export_trace(trace, out / f"trace_chain{i}.tsv")
    pooled = Trace(
        samples=[s for t in traces for s in t.samples],
        seed=args.seed,
        iters=args.iters,
        burnin=args.burnin,
        thin=args.thin,
        engine=traces[0].engine,
    )
    answers = {query_label(q): eval_query(pooled, q) for q in queries}
    with open(out / "answers.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(answers, fh, indent=1, sort_keys=True)
        fh.write("\n")
    engine = pooled.engine
    for t in engine.dp_types:
        hist = eval_query(pooled, CountPosterior(t))
        with open(out / f"hist_{t}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("n\tprobability\n")
            for k in sorted(hist):
                fh.write(f"{k}\t{format(hist[k], '.10g')}\n")
    print(f"wrote {len(traces)} chain trace(s), {len(answers)} query answer(s) to {out}")
    return 0


def cmd_eval(args) -> int:
    truth = capp.load_truth(args.truth)
    report = capp.file_recovery_report(args.trace, truth, symbol=args.symbol)
    print(f"trace samples: {report['samples']}")
    print(f"per-sample average recovery: {report['per_sample_average']:.4f}")
    print(f"consensus-partition recovery: {report['consensus']:.4f}")
    return 0


def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "citations":
        params = capp.SyntheticCorpusParams(
            num_pubs=args.pubs,
            num_authors=args.authors,
            citations_per_pub_mean=args.cites_mean,
            max_authors_per_pub=args.max_authors,
            noise=args.noise,
        )
        evidence, truth = capp.generate_corpus(params, rng)
        save_evidence(evidence, args.evidence_out)
        if args.truth_out:
            capp.save_truth(truth, args.truth_out)
        print(
            f"generated {len(evidence.objects['Citation'])} citations, "
            f"{len(evidence.objects['AuthorMention'])} mentions "
            f"({args.pubs} pubs, {args.authors} authors)"
        )
    else:
        evidence, true_colours = capp.generate_smarties_box(
            args.colours, args.draws, args.noise, rng
        )
        save_evidence(evidence, args.evidence_out)
        if args.truth_out:
            with open(args.truth_out, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(
                    {"n_colours": args.colours, "true_colours": true_colours},
                    fh,
                    indent=1,
                    sort_keys=True,
                )
                fh.write("\n")
        print(f"generated {args.draws} draws over {args.colours} colours")
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="npblog", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="parse, resolve, validate and compile a model")
    check.add_argument("--model", required=True)
    check.add_argument("--config", required=True)
    check.set_defaults(func=cmd_check)

    run = sub.add_parser("run", help="run Gibbs inference and write traces/answers")
    run.add_argument("--model", required=True)
    run.add_argument("--config", required=True)
    run.add_argument("--evidence", required=True)
    run.add_argument("--queries")
    run.add_argument("--iters", type=int, default=1000)
    run.add_argument("--burnin", type=int, default=100)
    run.add_argument("--thin", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--chains", type=int, default=1)
    run.add_argument("--out", required=True)
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="score an exported trace against ground truth")
    ev.add_argument("--trace", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--symbol", default="RefPub")
    ev.set_defaults(func=cmd_eval)

    gen = sub.add_parser("generate", help="generate a synthetic corpus with ground truth")
    gen.add_argument("--kind", choices=("citations", "smarties"), default="citations")
    gen.add_argument("--evidence-out", required=True)
    gen.add_argument("--truth-out")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise", type=float, default=0.05)
    gen.add_argument("--pubs", type=int, default=50)
    gen.add_argument("--authors", type=int, default=40)
    gen.add_argument("--cites-mean", type=float, default=2.4)
    gen.add_argument("--max-authors", type=int, default=3)
    gen.add_argument("--colours", type=int, default=6)
    gen.add_argument("--draws", type=int, default=200)
    gen.set_defaults(func=cmd_generate)
    return top


def main(argv=None) -> int:
    level = os.environ.get("NPBLOG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    args = build_arg_parser().parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal errors
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
