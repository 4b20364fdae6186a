"""Command-line front end: ingest -> generate -> mix -> stats -> verify.

Exit codes: 0 success, 1 usage error, 2 data error (bad input file),
3 invariant violation found by ``verify``. Progress goes to stderr,
machine-readable output to stdout. Flag precedence: command line >
config file (``--config``, JSON) > built-in defaults; the effective
configuration is embedded in every corpus header.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

from . import corpus as corpus_mod
from .corpus import (
    EmptyCorpusError,
    GenerationConfig,
    TaskRecord,
    TASKS,
    generate_task_records,
    mix_multitask,
    read_corpus,
    write_corpus,
)
from .graph import Fact, GraphError, KnowledgeGraph, build_index
from .neighborhood import NeighborhoodIndex
from .ingest import (
    ParseError,
    SPECIAL_TOKENS,
    TASK_TOKENS,
    VocabBuilder,
    Vocabulary,
    compute_stats,
    parse_hypergraph,
    parse_triples,
)

log = logging.getLogger("kgsignals")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 instead of argparse's 2
        raise UsageError(message)


class VerifyError(Exception):
    pass


def _build_parser() -> _Parser:
    p = _Parser(prog="kgsignals", description="Graph-structural pretraining corpus generator")
    sub = p.add_subparsers(dest="command", required=True)

    def add_dataset_flags(sp):
        sp.add_argument("--train", required=True, help="train split file")
        sp.add_argument("--valid", help="validation split file")
        sp.add_argument("--test", help="test split file")
        sp.add_argument("--kind", choices=["triples", "hypergraph"], default="triples")

    sp_ingest = sub.add_parser("ingest", help="parse datasets into vocabulary + normalized tuples")
    add_dataset_flags(sp_ingest)
    sp_ingest.add_argument("--out", help="output directory (default $KGSIGNALS_OUTDIR)")

    sp_stats = sub.add_parser("stats", help="print dataset statistics as JSON")
    add_dataset_flags(sp_stats)

    sp_gen = sub.add_parser("generate", help="generate per-task corpora from an ingested dataset")
    sp_gen.add_argument("task", choices=list(TASKS) + ["all"])
    sp_gen.add_argument("--data", required=True, help="directory written by ingest")
    sp_gen.add_argument("--out", help="output directory (default $KGSIGNALS_OUTDIR)")
    sp_gen.add_argument("--config", help="JSON config file; flags override it")
    sp_gen.add_argument("--seed", type=int, help="generation seed (required)")
    sp_gen.add_argument("--hops", type=int, help="neighborhood radius (default 3)")
    sp_gen.add_argument("--max-hops", type=int, help="path length bound (default 4)")
    sp_gen.add_argument("--beam-k", type=int, help="beam width for entropy paths (default 4)")
    sp_gen.add_argument("--sp-cap", type=int, help="max shortest-path sequences per query (default 16)")
    sp_gen.add_argument("--iva-cap", type=int, help="matrix size cap (default 30)")
    sp_gen.add_argument("--corruption-rate", type=float, help="negative value-resample rate (default 0.10)")
    sp_gen.add_argument("--workers", type=int, default=0, help="worker processes (0 = cpu count)")

    sp_mix = sub.add_parser("mix", help="combine per-task corpora into the multitask stream")
    sp_mix.add_argument("corpora", nargs="+", help="per-task corpus files")
    sp_mix.add_argument("--seed", type=int, required=True)
    sp_mix.add_argument("--out", required=True, help="output corpus file")

    sp_ver = sub.add_parser("verify", help="re-run the invariant suite over existing corpora")
    sp_ver.add_argument("corpora", nargs="+")
    return p


# -- ingest ------------------------------------------------------------


def _parse_splits(args) -> tuple[Vocabulary, dict[str, list[Fact]]]:
    builder = VocabBuilder()
    parse = parse_triples if args.kind == "triples" else parse_hypergraph
    splits: dict[str, list[Fact]] = {}
    for name in ("train", "valid", "test"):
        path = getattr(args, name)
        if path:
            splits[name] = parse(path, builder)
    return builder.freeze(), splits


def _outdir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get("KGSIGNALS_OUTDIR")
    if not out:
        raise UsageError("no output directory: pass --out or set KGSIGNALS_OUTDIR")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_tuples(facts: list[Fact], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in facts:
            fh.write("\t".join([str(f.relation)] + [str(e) for e in f.entities]) + "\n")


def _read_tuples(path: Path) -> list[Fact]:
    facts: list[Fact] = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise ParseError(f"{path}:{ln}: expected relation + >=2 entity ids")
            facts.append(Fact(relation=int(parts[0]), entities=tuple(int(x) for x in parts[1:])))
    return facts


def cmd_ingest(args) -> int:
    vocab, splits = _parse_splits(args)
    out = _outdir(args)
    vocab.save(out / "vocab.tsv")
    for name, facts in splits.items():
        _write_tuples(facts, out / f"{name}.tuples")
    stats = compute_stats(vocab, splits)
    (out / "stats.json").write_text(json.dumps(stats.as_dict(), indent=2, sort_keys=True) + "\n")
    log.info("ingested %d splits into %s", len(splits), out)
    print(json.dumps(stats.as_dict(), sort_keys=True))
    return EXIT_OK


def cmd_stats(args) -> int:
    vocab, splits = _parse_splits(args)
    stats = compute_stats(vocab, splits)
    print(json.dumps(stats.as_dict(), sort_keys=True))
    return EXIT_OK


# -- generate ----------------------------------------------------------


def _load_config(args) -> GenerationConfig:
    file_cfg: dict = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{args.config}: {exc}") from exc
    values: dict = {}
    for f in fields(GenerationConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
        elif f.name in file_cfg:
            values[f.name] = file_cfg[f.name]
    if "seed" not in values:
        raise UsageError("generation requires --seed (or seed in the config file)")
    return GenerationConfig(**values)


def _corpus_header(cfg: GenerationConfig, vocab: Vocabulary, alpha: dict | None) -> dict:
    return {
        "seed": cfg.seed,
        "config": cfg.as_dict(),
        "config_hash": cfg.hash(),
        "vocab_hash": vocab.hash(),
        "vocab_sizes": {
            "specials": len(SPECIAL_TOKENS),
            "entities": vocab.num_entities,
            "relations": vocab.num_relations,
        },
        "alpha": alpha,
        "uniform_weights": alpha is None,
    }


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    data = Path(args.data)
    vocab = Vocabulary.load(data / "vocab.tsv")
    train_path = data / "train.tuples"
    if not train_path.exists():
        raise ParseError(f"{train_path}: missing (run ingest first)")
    facts = _read_tuples(train_path)
    g = build_index(facts, vocab.num_entities, vocab.num_relations)
    out = _outdir(args)
    workers = args.workers if args.workers and args.workers > 0 else (os.cpu_count() or 1)
    tasks = list(TASKS) if args.task == "all" else [args.task]
    per_task: dict[str, list[TaskRecord]] = {}
    index = None
    for task in tasks:
        t0 = time.monotonic()
        if task in ("khn", "iva", "lcc") and index is None:
            index = NeighborhoodIndex(g, cfg.hops)
        result = generate_task_records(g, vocab, task, cfg, workers=workers, index=index)
        log.info(
            "%s: %d records (%d skipped) in %.1fs",
            task, len(result.records), result.skipped, time.monotonic() - t0,
        )
        if not result.records:
            log.warning("%s: empty corpus", task)
        result.records.sort(key=lambda r: r.provenance)
        for r in result.records:
            r.weight = 1.0
        per_task[task] = result.records
        write_corpus(result.records, out / f"{task}.jsonl", _corpus_header(cfg, vocab, None))
    if args.task == "all":
        try:
            stream, plan = mix_multitask(per_task, cfg.seed)
        except EmptyCorpusError:
            log.warning("all tasks empty; skipping mixture")
            return EXIT_OK
        write_corpus(stream, out / "all.jsonl", _corpus_header(cfg, vocab, plan.alpha))
        (out / "mixplan.json").write_text(
            json.dumps({"sizes": plan.sizes, "alpha": plan.alpha, "seed": plan.seed}, sort_keys=True, indent=2)
            + "\n"
        )
    return EXIT_OK


def cmd_mix(args) -> int:
    per_task: dict[str, list[TaskRecord]] = {}
    header = None
    for path in args.corpora:
        h, records = read_corpus(path)
        header = header or h
        for r in records:
            r.weight = None
            per_task.setdefault(r.task, []).append(r)
    try:
        stream, plan = mix_multitask(per_task, args.seed)
    except EmptyCorpusError as exc:
        raise ParseError(str(exc)) from exc
    meta = dict(header or {})
    meta.pop("counts", None)
    meta["seed"] = args.seed
    meta["alpha"] = plan.alpha
    meta["uniform_weights"] = False
    write_corpus(stream, args.out, meta)
    print(json.dumps({"sizes": plan.sizes, "alpha": plan.alpha}, sort_keys=True))
    return EXIT_OK


# -- verify ------------------------------------------------------------


def _verify_corpus(path: str) -> None:
    header, records = read_corpus(path)
    sizes = header.get("vocab_sizes") or {}
    n_special = sizes.get("specials", len(SPECIAL_TOKENS))
    n_ent = sizes.get("entities", 0)
    n_rel = sizes.get("relations", 0)
    cfg = header.get("config") or {}
    max_len = cfg.get("max_len", 1024)
    max_hops = cfg.get("max_hops", 4)
    ent_lo, ent_hi = n_special, n_special + n_ent
    rel_lo, rel_hi = ent_hi, ent_hi + n_rel
    no_path = SPECIAL_TOKENS.index("[NO_PATH]")
    eos = SPECIAL_TOKENS.index("[EOS]")
    counts: dict[str, int] = {}

    def fail(i: int, msg: str):
        raise VerifyError(f"{path}: record {i}: {msg}")

    for i, r in enumerate(records):
        counts[r.task] = counts.get(r.task, 0) + 1
        if r.task not in TASKS:
            fail(i, f"unknown task {r.task!r}")
        if not r.input_tokens:
            fail(i, "empty input")
        if r.input_tokens[0] != SPECIAL_TOKENS.index(TASK_TOKENS[r.task]):
            fail(i, "input does not start with its task token")
        if len(r.input_tokens) > max_len:
            fail(i, f"input length {len(r.input_tokens)} exceeds {max_len}")
        if r.target_kind == "tokens":
            t = r.target
            if t == [no_path]:
                pass
            else:
                if not t or t[-1] != eos:
                    fail(i, "token target does not end with the end sentinel")
                body = t[:-1]
                if len(body) > max_hops:
                    fail(i, f"path length {len(body)} exceeds {max_hops}")
                if len(set(body)) != len(body):
                    fail(i, "repeated relation on path")
                for tok in body:
                    if not rel_lo <= tok < rel_hi:
                        fail(i, f"token {tok} is not a relation token")
        elif r.target_kind == "dist":
            total = sum(p for _, p in r.target)
            if abs(total - 1.0) > 1e-9:
                fail(i, f"distribution sums to {total}")
            for tok, p in r.target:
                if p < 0:
                    fail(i, "negative probability")
                if not ent_lo <= tok < ent_hi:
                    fail(i, f"token {tok} is not an entity token")
        elif r.target_kind == "scalar":
            if not 0.0 <= float(r.target) <= 1.0:
                fail(i, f"scalar target {r.target} outside [0, 1]")
        elif r.target_kind == "label":
            if r.target not in (0, 1):
                fail(i, f"label target {r.target} not binary")
        else:
            fail(i, f"unknown target kind {r.target_kind!r}")
    if header.get("counts") != counts:
        raise VerifyError(f"{path}: header counts {header.get('counts')} != actual {counts}")
    alpha = header.get("alpha")
    if alpha is not None:
        if abs(sum(alpha.values()) - 1.0) > 1e-12:
            raise VerifyError(f"{path}: task weights sum to {sum(alpha.values())}")
        for i, r in enumerate(records):
            if r.weight != alpha.get(r.task):
                raise VerifyError(f"{path}: record {i}: weight {r.weight} != alpha[{r.task}]")


def cmd_verify(args) -> int:
    for path in args.corpora:
        _verify_corpus(path)
        log.info("%s: ok", path)
    print("ok")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "ingest": cmd_ingest,
            "stats": cmd_stats,
            "generate": cmd_generate,
            "mix": cmd_mix,
            "verify": cmd_verify,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, corpus_mod.CorpusFormatError, GraphError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except VerifyError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
