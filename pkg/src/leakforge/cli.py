"""``leakforge`` command line.

Exit codes: 0 success, 1 configuration or data error (including bad
usage), 2 partial experiment.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import LeakforgeError
from .fileio import atomic_write, read_json, read_ndjson, write_json, write_ndjson

log = logging.getLogger("leakforge")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

_GENERATOR_ALIASES = {
    "openai": "openai_compatible",
    "mock": "mock_resample",
    "echo": "mock_echo",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _figure_path(out: Path, enabled: bool) -> Path | None:
    return out.with_suffix(".png") if enabled else None


def _load_records(path) -> list[dict]:
    p = Path(path)
    if not p.is_file():
        raise LeakforgeError(f"file {str(p)!r} not found")
    return list(read_ndjson(p))


def _keyword_docs(path, trim_punctuation: bool = False):
    """Read a keyword file, or stem a corpus file on the fly."""
    from .corpus import Document
    from .keywords import KeywordDoc, to_keyword_doc

    out = []
    for rec in _load_records(path):
        if "stems" in rec:
            out.append(KeywordDoc.from_record(rec))
        elif "body" in rec:
            out.append(to_keyword_doc(Document.from_record(rec), trim_punctuation=trim_punctuation))
        else:
            raise LeakforgeError(f"{path}: records need either 'stems' or 'body'")
    return out


def _restrict(docs, ids):
    if ids is None:
        return docs
    ids = set(ids)
    return [d for d in docs if d.doc_id in ids]


# -- subcommands --------------------------------------------------------------

def cmd_ingest(args) -> int:
    from .corpus import ingest, save_corpus

    corpus = ingest(args.root, args.filter, strip_signature=args.strip_signature)
    save_corpus(corpus, args.out)
    log.info("ingested %d documents", len(corpus))
    return EXIT_OK


def cmd_stem(args) -> int:
    from .corpus import load_corpus
    from .keywords import to_keyword_docs

    corpus = load_corpus(args.corpus)
    kds = to_keyword_docs(corpus.documents, trim_punctuation=args.trim_punctuation)
    write_ndjson(args.out, (kd.to_record() for kd in kds))
    return EXIT_OK


def cmd_split(args) -> int:
    from .partition import select_seed, split_corpus, subsample_client

    ids = [rec["doc_id"] for rec in _load_records(args.keywords)]
    seed = args.rng_seed
    part = split_corpus(ids, seed)
    part = subsample_client(part, args.client_size, seed)
    part = select_seed(part, args.seed_fraction, seed)
    out = part.to_json()
    out["client_size"] = args.client_size
    write_json(args.out, out)
    return EXIT_OK


def _generator_config(args):
    from .llm import GeneratorConfig

    backend = _GENERATOR_ALIASES.get(args.generator, args.generator)
    kwargs = dict(backend=backend, max_parallel=args.max_parallel, temperature=args.temperature,
                  mock_seed=args.rng_seed)
    if args.model:
        kwargs["model_name"] = args.model
    elif backend == "openai_compatible":
        kwargs["model_name"] = "gpt-4o-mini"
    if args.endpoint:
        kwargs["endpoint_url"] = args.endpoint
    return GeneratorConfig(**kwargs)


def cmd_augment(args) -> int:
    from .augment import AugmentationError, AugmentationPlan, augment
    from .corpus import Document
    from .llm import ResponseCache, TextGenerator

    docs = []
    for rec in _load_records(args.seed):
        body = rec["body"] if "body" in rec else " ".join(rec.get("stems", []))
        docs.append(Document(rec["doc_id"], body, rec.get("origin", "real")))
    if args.partition:
        docs = _restrict(docs, read_json(args.partition)["seed_ids"])
    plan = AugmentationPlan(
        strategy=args.strategy,
        target_synthetic_count=0 if args.strategy == "none" else args.target_synthetic,
        examples_per_prompt=args.examples_per_prompt,
        generations_per_prompt=args.gens_per_prompt,
        rng_seed=args.rng_seed,
    )
    cache = ResponseCache(args.cache_dir) if args.cache_dir else None
    manifest_path = args.out.with_name(args.out.name + ".manifest.json")
    with TextGenerator(_generator_config(args), cache=cache) as gen:
        try:
            result = augment(docs, plan, gen)
        except AugmentationError as exc:
            if exc.manifest is not None:
                write_json(manifest_path, exc.manifest)
            raise
    write_ndjson(args.out, (d.to_record() for d in result.documents))
    write_json(manifest_path, result.manifest)
    return EXIT_OK


def cmd_attack(args) -> int:
    from .leakage import rank_match_attack, volume_profile

    client = _keyword_docs(args.client)
    if args.partition:
        client = _restrict(client, read_json(args.partition)["client_ids"])
    attacker = _keyword_docs(args.attacker)
    result = rank_match_attack(volume_profile(client), volume_profile(attacker), args.k)
    out = result.to_json()
    out.update(n_client_docs=len(client), n_attacker_docs=len(attacker))
    write_json(args.out, out)
    print(f"jaccard@{args.k} = {float(result.jaccard_at_k):.4f}")
    return EXIT_OK


def cmd_zipf(args) -> int:
    from .leakage import ZIPF_COLUMNS, export_zipf_overlay, rank_vocabulary, volume_profile

    client = _keyword_docs(args.client)
    if args.partition:
        client = _restrict(client, read_json(args.partition)["client_ids"])
    attacker = volume_profile(_keyword_docs(args.attacker))
    rows = export_zipf_overlay(rank_vocabulary(volume_profile(client)), attacker, args.top)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ZIPF_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    atomic_write(args.out, buf.getvalue())
    fig = _figure_path(args.out, args.figure)
    if fig and rows:
        from .plotting import plot_zipf_overlay

        plot_zipf_overlay(rows, fig)
    return EXIT_OK


def _apply_overrides(cfg, args):
    from dataclasses import replace

    changes = {}
    if args.rng_seed is not None:
        changes["rng_seed"] = args.rng_seed
    if args.cache_dir and not cfg.cache_dir:
        changes["cache_dir"] = str(Path(args.cache_dir).resolve())
    return replace(cfg, **changes) if changes else cfg


def cmd_run(args) -> int:
    from .experiment import load_config, report_csv, run_experiment
    from .fileio import dumps

    cfg = _apply_overrides(load_config(args.config), args)
    report = run_experiment(cfg)
    atomic_write(args.out, dumps(report) + "\n")
    atomic_write(args.out.with_suffix(".csv"), report_csv(report))
    fig = _figure_path(args.out, args.figure)
    if fig and report["repeats"]:
        from .plotting import plot_arm_scores

        plot_arm_scores(report, fig)
    for arm, res in report["arms"].items():
        if res["mean"] is not None:
            print(f"{arm:>10}: mean Jaccard@{cfg.k} = {res['mean']:.4f} (sd {res['sd']:.4f}, n={len(res['scores'])})")
    return EXIT_OK if report["status"] == "complete" else EXIT_PARTIAL


def cmd_sweep(args) -> int:
    from .experiment import load_config, sweep, sweep_csv, sweep_rows

    if not args.configs.is_dir():
        raise LeakforgeError(f"config directory {str(args.configs)!r} not found")
    paths = sorted(args.configs.glob("*.toml"))
    configs = [_apply_overrides(load_config(p), args) for p in paths]
    reports = sweep(configs)
    if args.reports_dir:
        from .fileio import dumps

        for p, rep in zip(paths, reports):
            atomic_write(args.reports_dir / f"{p.stem}.json", dumps(rep) + "\n")
    rows = sweep_rows(reports)
    atomic_write(args.out, sweep_csv(rows))
    fig = _figure_path(args.out, args.figure)
    if fig and rows:
        from .plotting import plot_sweep

        plot_sweep(rows, fig)
    return EXIT_OK if all(r["status"] == "complete" for r in reports) else EXIT_PARTIAL


def cmd_stats(args) -> int:
    from .stats import compare_arms

    report = read_json(args.report)
    scores = {arm: res["scores"] for arm, res in report["arms"].items()}
    write_json(args.out, compare_arms(scores, args.alpha))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_figure_flag(p):
    p.add_argument("--no-figure", dest="figure", action="store_false",
                   help="skip the PNG written next to the output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leakforge", description=__doc__.splitlines()[0].strip("`"))
    parser.add_argument("--version", action="version", version=f"leakforge {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    parser.add_argument("--rng-seed", type=int, default=None, help="override every rng seed")
    parser.add_argument("--cache-dir", type=Path, default=os.environ.get("LEAKFORGE_CACHE_DIR") or None)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("ingest", help="sanitize a maildir tree into a corpus file")
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--filter", default="*/_sent_items/*")
    p.add_argument("--strip-signature", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stem", help="reduce a corpus to keyword stem sets")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--trim-punctuation", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_stem)

    p = sub.add_parser("split", help="client/attacker/seed partition")
    p.add_argument("--keywords", type=Path, required=True)
    p.add_argument("--seed-fraction", type=float, default=0.2)
    p.add_argument("--client-size", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_split, local_seed=True)

    p = sub.add_parser("augment", help="add generated documents to a seed set")
    p.add_argument("--seed", type=Path, required=True, help="corpus or keyword file")
    p.add_argument("--partition", type=Path, help="keep only the partition's seed_ids")
    p.add_argument("--strategy", choices=("none", "random", "clustered"), default="clustered")
    p.add_argument("--target-synthetic", type=int, default=0)
    p.add_argument("--examples-per-prompt", type=int, default=3)
    p.add_argument("--gens-per-prompt", type=int, default=8)
    p.add_argument("--generator", default="mock",
                   choices=sorted(set(_GENERATOR_ALIASES) | set(_GENERATOR_ALIASES.values())))
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-parallel", type=int, default=4)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_augment, local_seed=True)

    p = sub.add_parser("attack", help="volume-rank attack scored by Jaccard@k")
    p.add_argument("--client", type=Path, required=True)
    p.add_argument("--attacker", type=Path, required=True)
    p.add_argument("--partition", type=Path, help="restrict the client file to the partition's client_ids")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("zipf", help="client rank-frequency table with attacker overlay")
    p.add_argument("--client", type=Path, required=True)
    p.add_argument("--attacker", type=Path, required=True)
    p.add_argument("--partition", type=Path)
    p.add_argument("--top", type=int, default=200)
    p.add_argument("--out", type=Path, required=True)
    _add_figure_flag(p)
    p.set_defaults(func=cmd_zipf)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_figure_flag(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every *.toml in a directory into one table")
    p.add_argument("--configs", type=Path, required=True)
    p.add_argument("--reports-dir", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_figure_flag(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="significance tests over a report's per-repeat scores")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_stats)

    for name in ("split", "augment"):
        sub.choices[name].add_argument("--rng-seed", type=int, default=None, dest="local_rng_seed")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_FATAL
    level = logging.ERROR if args.quiet else (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "local_rng_seed", None) is not None:
        args.rng_seed = args.local_rng_seed
    elif getattr(args, "local_seed", False) and args.rng_seed is None:
        args.rng_seed = 0
    try:
        return args.func(args)
    except LeakforgeError as exc:
        print(f"leakforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (OSError, ValueError, KeyError) as exc:
        print(f"leakforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
