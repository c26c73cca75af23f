"""Command-line front end binding every stage to config files and flags.

Subcommands map 1:1 to module operations; `pipeline` chains the offline
data path (normalize, rule filtering, LM training, perplexity filtering,
dedup, mix) and writes a run manifest with the config hash, seed, and
per-stage document/token counts. Instruction generation and evaluation take
a chat endpoint and therefore stay outside `pipeline`.

Exit codes: 0 success, 1 validation failure (bad config, flags, or input
files), 2 runtime failure mid-run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import cleaning, dedup, evaluation, instruct, lm, mix
from .corpus import (
    CorpusError,
    Document,
    WhitespaceTokenizer,
    read_documents,
    write_documents,
)

TOKENIZER = WhitespaceTokenizer()


class ConfigError(Exception):
    """Pipeline config missing, malformed, or referencing absent paths."""


class PipelineStageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


_VALIDATION_ERRORS = (
    ConfigError,
    CorpusError,
    cleaning.RuleConfigError,
    lm.TrainingError,
    lm.ScoreError,
    mix.MixError,
    instruct.TemplateError,
    evaluation.TaskFormatError,
    evaluation.CurationError,
    FileNotFoundError,
    NotADirectoryError,
    ValueError,
    json.JSONDecodeError,
)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (validation) instead of 2 on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


# -- config -------------------------------------------------------------------


class PipelineConfig:
    """Validated view of the JSON config file; relative paths resolve
    against the config file's directory."""

    def __init__(self, payload: dict, base_dir: Path, path: Optional[Path] = None):
        self.payload = payload
        self.base_dir = base_dir
        self.path = path
        try:
            self.seed = int(payload["seed"])
            self.workers = int(payload.get("workers", 4))
            paths = payload["paths"]
            self.corpus = self._resolve(paths["corpus"])
            self.seed_corpus = self._resolve(paths["seed_corpus"])
            self.out_dir = self._resolve(paths.get("out_dir", "out"))
            cleaning_cfg = payload.get("cleaning", {})
            ruleset = cleaning_cfg.get("ruleset")
            self.ruleset_path = self._resolve(ruleset) if ruleset else None
            lm_cfg = payload.get("lm", {})
            self.lm_order = int(lm_cfg.get("order", 5))
            self.lm_percentile = float(lm_cfg.get("percentile", 99.0))
            self.lm_granularity = lm_cfg.get("granularity", "paragraph")
            dd = payload.get("dedup", {})
            self.dedup_shingle_n = int(dd.get("shingle_n", dedup.DEFAULT_SHINGLE_N))
            self.dedup_permutations = int(dd.get("permutations", dedup.DEFAULT_PERMUTATIONS))
            self.dedup_threshold = float(dd.get("threshold", dedup.DEFAULT_THRESHOLD))
            mix_cfg = payload.get("mix", {})
            entries = [(e["source"], float(e["fraction"])) for e in mix_cfg.get("entries", [])]
            self.mix_entries = entries
            self.mix_budget = int(mix_cfg.get("token_budget", 0))
            inst = payload.get("instruct", {})
            self.instruct_endpoint = inst.get("endpoint")
            self.instruct_model = inst.get("model", "stub")
            self.instruct_turn_pairs = int(inst.get("extra_turn_pairs", 2))
            examples = inst.get("examples")
            self.examples_path = self._resolve(examples) if examples else None
            eval_cfg = payload.get("eval", {})
            task_dir = eval_cfg.get("task_dir")
            self.task_dir = self._resolve(task_dir) if task_dir else None
            self.eval_endpoint = eval_cfg.get("endpoint")
            self.eval_model = eval_cfg.get("model", "stub")
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    def _resolve(self, p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else self.base_dir / candidate

    def validate(self) -> None:
        for label, p in (("corpus", self.corpus), ("seed_corpus", self.seed_corpus)):
            if not p.exists():
                raise ConfigError(f"config path {label} does not resolve: {p}")
        if self.ruleset_path and not self.ruleset_path.exists():
            raise ConfigError(f"ruleset file missing: {self.ruleset_path}")
        if self.mix_entries:
            # constructing the spec runs the fraction/source checks
            self.mix_spec()

    def mix_spec(self) -> mix.MixSpec:
        if not self.mix_entries or self.mix_budget <= 0:
            raise ConfigError("config lacks a usable mix section (entries + token_budget)")
        return mix.MixSpec(entries=self.mix_entries, token_budget=self.mix_budget, seed=self.seed)

    def config_digest(self) -> str:
        if self.path is not None:
            return hashlib.sha256(self.path.read_bytes()).hexdigest()
        canonical = json.dumps(self.payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(canonical).hexdigest()


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return PipelineConfig(payload, base_dir=path.parent.resolve(), path=path)


def _maybe_config(args) -> Optional[PipelineConfig]:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "workers", None) is not None:
            cfg.workers = args.workers
        return cfg
    return None


# -- shared helpers -------------------------------------------------------------


def _read_corpus(path: str | Path, strict: bool) -> List[Document]:
    return list(read_documents(path, strict=strict))


def _token_total(docs: Sequence[Document]) -> int:
    return sum(len(doc.text.split()) for doc in docs)


def _rewrite(doc: Document, text: str) -> Document:
    return Document(id=doc.id, source=doc.source, text=text, meta=dict(doc.meta))


def _apply_cleaning(docs: Sequence[Document], rules: cleaning.RuleSet, normalize_only: bool = False):
    out: List[Document] = []
    emptied = 0
    for doc in docs:
        if normalize_only:
            text = cleaning.normalize_text(doc.text)
        else:
            text = cleaning.clean_text(doc.text, rules)
        if text:
            out.append(_rewrite(doc, text))
        else:
            emptied += 1
    return out, emptied


def _load_ruleset(path: Optional[str | Path]) -> cleaning.RuleSet:
    if path:
        return cleaning.load_ruleset(path)
    return cleaning.build_default_ruleset()


def _chat_backend(endpoint: Optional[str], model: str) -> instruct.ChatBackend:
    if endpoint:
        return instruct.HttpChatBackend(endpoint=endpoint, model=model)
    return instruct.StubChatBackend()


# -- subcommand implementations ---------------------------------------------------


def cmd_normalize(args) -> int:
    docs = _read_corpus(args.input, args.strict)
    out, emptied = _apply_cleaning(docs, cleaning.build_default_ruleset(), normalize_only=True)
    count = write_documents(out, args.output)
    print(f"normalized {count} documents ({emptied} emptied) -> {args.output}")
    return 0


def cmd_mine_ngrams(args) -> int:
    docs = _read_corpus(args.input, args.strict)
    table = cleaning.mine_ngrams(docs, TOKENIZER, n=args.n, top_k=args.top_k)
    cleaning.write_ngram_report(table, args.output)
    print(f"mined top {len(table.entries)} {args.n}-grams -> {args.output}")
    return 0


def cmd_filter_rules(args) -> int:
    rules = _load_ruleset(args.ruleset)
    docs = _read_corpus(args.input, args.strict)
    out, emptied = _apply_cleaning(docs, rules)
    count = write_documents(out, args.output)
    print(f"rule-filtered {count} documents kept, {emptied} emptied -> {args.output}")
    return 0


def cmd_train_lm(args) -> int:
    docs = _read_corpus(args.input, args.strict)
    model = lm.train_lm(docs, TOKENIZER, order=args.order, discount=args.discount)
    lm.save_lm(model, args.output)
    print(f"trained order-{model.order} model on {len(docs)} documents -> {args.output}")
    return 0


def cmd_filter_ppl(args) -> int:
    model = lm.load_lm(args.model)
    docs = _read_corpus(args.input, args.strict)
    if args.threshold is not None:
        threshold = args.threshold
    else:
        if not args.calibration_corpus:
            raise ValueError("need --threshold or --calibration-corpus with --percentile")
        calib = _read_corpus(args.calibration_corpus, args.strict)
        threshold = lm.calibrate_threshold(model, calib, TOKENIZER, percentile=args.percentile)
    kept, dropped, report = lm.filter_by_perplexity(
        docs, model, TOKENIZER, threshold=threshold, granularity=args.granularity
    )
    write_documents(kept, args.output)
    if args.dropped:
        write_documents(dropped, args.dropped)
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    print(
        f"perplexity filter at {threshold:.4f}: kept {report.kept_docs} docs, "
        f"dropped {report.dropped_docs} entirely -> {args.output}"
    )
    return 0


def cmd_dedup(args) -> int:
    docs = _read_corpus(args.input, args.strict)
    unique, exact_report = dedup.exact_dedup(docs, TOKENIZER)
    if args.exact_only:
        final, near_report = unique, None
    else:
        final, near_report = dedup.near_dedup(
            unique,
            shingle_n=args.shingle_n,
            permutations=args.permutations,
            threshold=args.threshold,
            seed=args.seed if args.seed is not None else 0,
            tok=TOKENIZER,
        )
    write_documents(final, args.output)
    if args.report:
        combined = dedup.DedupReport(
            clusters=exact_report.clusters + (near_report.clusters if near_report else []),
            exact_removed=exact_report.exact_removed,
            near_removed=near_report.near_removed if near_report else 0,
            tokens_before=exact_report.tokens_before,
            tokens_after=(near_report or exact_report).tokens_after,
        )
        Path(args.report).write_text(combined.to_json() + "\n", encoding="utf-8")
        if args.clusters:
            dedup.write_cluster_dump(combined, args.clusters)
    elif args.clusters:
        combined = dedup.DedupReport(
            clusters=exact_report.clusters + (near_report.clusters if near_report else [])
        )
        dedup.write_cluster_dump(combined, args.clusters)
    near_removed = near_report.near_removed if near_report else 0
    print(
        f"dedup removed {exact_report.exact_removed} exact + {near_removed} near "
        f"duplicates, {len(final)} documents remain -> {args.output}"
    )
    return 0


def cmd_mix(args) -> int:
    spec = mix.load_mix_spec(args.spec)
    if args.seed is not None:
        spec = mix.MixSpec(entries=spec.entries, token_budget=spec.token_budget, seed=args.seed)
    sources: Dict[str, List[Document]] = {}
    for pair in args.input:
        if "=" not in pair:
            raise ValueError(f"--input expects name=path, got {pair!r}")
        name, path = pair.split("=", 1)
        sources[name] = _read_corpus(path, args.strict)
    mixed, manifest = mix.assemble_mix(sources, spec, TOKENIZER)
    write_documents(mixed, args.output)
    Path(args.manifest).write_text(manifest.to_json() + "\n", encoding="utf-8")
    print(f"mixed {len(mixed)} documents, {manifest.total_tokens} tokens -> {args.output}")
    if args.tolerance is not None:
        validation = mix.validate_mix(manifest, spec, tolerance=args.tolerance)
        print(validation.to_json())
        if not validation.passed:
            return 1
    return 0


def cmd_gen_instructions(args) -> int:
    examples = instruct.load_examples(args.examples)
    backend = _chat_backend(args.endpoint, args.model)
    conversations, failures = instruct.generate_conversations(
        examples,
        user_backend=backend,
        assistant_backend=backend,
        extra_turn_pairs=args.extra_turn_pairs,
        concurrency=args.concurrency,
    )
    count = instruct.write_conversations(conversations, args.output)
    if args.corpus_out:
        write_documents(instruct.conversations_to_documents(conversations), args.corpus_out)
    print(f"generated {count} conversations ({len(failures)} failed) -> {args.output}")
    for failure in failures:
        sys.stderr.write(f"failed {failure.origin}: {failure.reason}\n")
    if failures and not conversations:
        sys.stderr.write("lexcorpus gen-instructions: every conversation failed\n")
        return 2
    return 0


def _benchmark_texts(args) -> List[str]:
    texts: List[str] = []
    if args.benchmark_file:
        with open(args.benchmark_file, "r", encoding="utf-8") as fh:
            texts.extend(line.rstrip("\n") for line in fh if line.strip())
    if args.task_dir:
        for task in evaluation.load_tasks(args.task_dir):
            texts.extend(text for text, _ in task.instances)
    if not texts:
        raise ValueError("no benchmark inputs: pass --benchmark-file and/or --task-dir")
    return [cleaning.normalize_text(t) for t in texts]


def cmd_decontaminate(args) -> int:
    conversations = instruct.read_conversations(args.input)
    texts = _benchmark_texts(args)
    kept, removed = instruct.decontaminate(conversations, texts, shingle_n=args.shingle_n)
    instruct.write_conversations(kept, args.output)
    print(f"decontamination kept {len(kept)}, removed {removed} -> {args.output}")
    return 0


def cmd_curate_prompts(args) -> int:
    original = Path(args.input).read_text(encoding="utf-8")
    curated = evaluation.curate_prompt(original, args.labels)
    Path(args.output).write_text(curated + "\n", encoding="utf-8")
    print(f"curated prompt -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    tasks = evaluation.load_tasks(args.task_dir)
    if args.mmlu_dir:
        tasks.extend(evaluation.load_mmlu_legal(args.mmlu_dir))
    backend = _chat_backend(args.endpoint, args.model)
    report, records = evaluation.run_benchmark(
        tasks, backend, concurrency=args.concurrency, seed=args.seed if args.seed is not None else 0
    )
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.dump:
        evaluation.write_prediction_dump(records, args.dump)
    print(report.render_table())
    return 0


def cmd_ppl_report(args) -> int:
    scorer = evaluation.NgramScorer(lm.load_lm(args.model), TOKENIZER, name=Path(args.model).stem)
    baseline = None
    if args.baseline_model:
        baseline = evaluation.NgramScorer(
            lm.load_lm(args.baseline_model), TOKENIZER, name=Path(args.baseline_model).stem
        )
    docs_by_category: Dict[str, List[Document]] = {}
    for pair in args.category:
        if "=" not in pair:
            raise ValueError(f"--category expects name=path, got {pair!r}")
        name, path = pair.split("=", 1)
        docs_by_category[name] = _read_corpus(path, args.strict)
    report = evaluation.perplexity_report(docs_by_category, scorer, baseline)
    if args.output:
        Path(args.output).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.render_table())
    return 0


# -- pipeline -----------------------------------------------------------------


def run_pipeline(cfg: PipelineConfig, strict: bool = False) -> dict:
    """normalize -> filter-rules -> train-lm -> filter-ppl -> dedup -> mix.

    Every stage writes its corpus into out_dir before the next begins, so a
    mid-run failure leaves completed stage outputs on disk. The returned
    manifest is deterministic: same config bytes + seed give identical JSON.
    """
    cfg.validate()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rules = _load_ruleset(cfg.ruleset_path)
    manifest: dict = {
        "config_sha256": cfg.config_digest(),
        "seed": cfg.seed,
        "stages": [],
    }

    def record(stage: str, docs: Sequence[Document], **extra) -> None:
        entry = {"stage": stage, "documents": len(docs), "tokens": _token_total(docs)}
        entry.update(extra)
        manifest["stages"].append(entry)

    stage = "normalize"
    try:
        docs = _read_corpus(cfg.corpus, strict)
        docs, _ = _apply_cleaning(docs, rules, normalize_only=True)
        write_documents(docs, cfg.out_dir / "01_normalized.jsonl")
        record(stage, docs)

        stage = "filter-rules"
        docs, emptied = _apply_cleaning(docs, rules)
        write_documents(docs, cfg.out_dir / "02_rulefiltered.jsonl")
        record(stage, docs, emptied=emptied)

        stage = "train-lm"
        seed_docs = _read_corpus(cfg.seed_corpus, strict)
        seed_docs, _ = _apply_cleaning(seed_docs, rules)
        model = lm.train_lm(seed_docs, TOKENIZER, order=cfg.lm_order)
        lm.save_lm(model, cfg.out_dir / "lm.json")
        manifest["stages"].append(
            {
                "stage": stage,
                "documents": len(seed_docs),
                "tokens": _token_total(seed_docs),
                "order": cfg.lm_order,
            }
        )

        stage = "filter-ppl"
        threshold = lm.calibrate_threshold(model, seed_docs, TOKENIZER, percentile=cfg.lm_percentile)
        docs, dropped, report = lm.filter_by_perplexity(
            docs, model, TOKENIZER, threshold=threshold, granularity=cfg.lm_granularity
        )
        write_documents(docs, cfg.out_dir / "03_pplfiltered.jsonl")
        write_documents(dropped, cfg.out_dir / "03_dropped.jsonl")
        (cfg.out_dir / "filter_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
        record(stage, docs, threshold=threshold)

        stage = "dedup"
        docs, exact_report = dedup.exact_dedup(docs, TOKENIZER)
        docs, near_report = dedup.near_dedup(
            docs,
            shingle_n=cfg.dedup_shingle_n,
            permutations=cfg.dedup_permutations,
            threshold=cfg.dedup_threshold,
            seed=cfg.seed,
            tok=TOKENIZER,
        )
        combined = dedup.DedupReport(
            clusters=exact_report.clusters + near_report.clusters,
            exact_removed=exact_report.exact_removed,
            near_removed=near_report.near_removed,
            tokens_before=exact_report.tokens_before,
            tokens_after=near_report.tokens_after,
        )
        write_documents(docs, cfg.out_dir / "04_deduped.jsonl")
        (cfg.out_dir / "dedup_report.json").write_text(combined.to_json() + "\n", encoding="utf-8")
        record(
            stage,
            docs,
            exact_removed=exact_report.exact_removed,
            near_removed=near_report.near_removed,
        )

        stage = "mix"
        spec = cfg.mix_spec()
        sources: Dict[str, List[Document]] = {}
        for doc in docs:
            sources.setdefault(doc.source.name, []).append(doc)
        for name, _ in spec.entries:
            sources.setdefault(name, [])
        mixed, mix_manifest = mix.assemble_mix(sources, spec, TOKENIZER)
        write_documents(mixed, cfg.out_dir / "05_mix.jsonl")
        (cfg.out_dir / "mix_manifest.json").write_text(mix_manifest.to_json() + "\n", encoding="utf-8")
        record(stage, mixed, total_tokens=mix_manifest.total_tokens)
    except Exception as exc:
        raise PipelineStageError(stage, exc) from exc

    (cfg.out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def cmd_pipeline(args) -> int:
    cfg = _maybe_config(args)
    if cfg is None:
        raise ConfigError("pipeline requires --config")
    manifest = run_pipeline(cfg, strict=args.strict)
    print(f"pipeline complete: {len(manifest['stages'])} stages -> {cfg.out_dir}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="lexcorpus", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--workers", type=int, default=None, help="worker/concurrency cap")
    common.add_argument("--strict", action="store_true", help="fail on malformed corpus records")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("normalize", parents=[common], help="NFKC-normalize corpus text")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("mine-ngrams", parents=[common], help="exact top-k n-gram counts")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True, help="TSV report path")
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--top-k", type=int, default=20)
    p.set_defaults(func=cmd_mine_ngrams)

    p = sub.add_parser("filter-rules", parents=[common], help="apply the regex ruleset")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--ruleset", help="ruleset JSON (default: shipped rules)")
    p.set_defaults(func=cmd_filter_rules)

    p = sub.add_parser("train-lm", parents=[common], help="train the Kneser-Ney model")
    p.add_argument("-i", "--input", required=True, help="seed corpus")
    p.add_argument("-o", "--output", required=True, help="model JSON path")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--discount", type=float, default=None, help="fixed discount (testing aid)")
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("filter-ppl", parents=[common], help="drop high-perplexity paragraphs")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--percentile", type=float, default=99.0)
    p.add_argument("--calibration-corpus", help="corpus whose percentile sets the threshold")
    p.add_argument("--granularity", choices=("paragraph", "document"), default="paragraph")
    p.add_argument("--dropped", help="write dropped text here")
    p.add_argument("--report", help="write the filter report JSON here")
    p.set_defaults(func=cmd_filter_ppl)

    p = sub.add_parser("dedup", parents=[common], help="exact then near deduplication")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--shingle-n", type=int, default=dedup.DEFAULT_SHINGLE_N)
    p.add_argument("--permutations", type=int, default=dedup.DEFAULT_PERMUTATIONS)
    p.add_argument("--threshold", type=float, default=dedup.DEFAULT_THRESHOLD)
    p.add_argument("--exact-only", action="store_true")
    p.add_argument("--report", help="write the dedup report JSON here")
    p.add_argument("--clusters", help="write kept_id<TAB>removed_id dump here")
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("mix", parents=[common], help="assemble the training mix")
    p.add_argument("--spec", required=True, help="mix spec JSON")
    p.add_argument(
        "-i", "--input", action="append", required=True, metavar="NAME=PATH",
        help="source corpus, repeatable",
    )
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--tolerance", type=float, default=None, help="also validate realized fractions")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("gen-instructions", parents=[common], help="synthesize conversations")
    p.add_argument("--examples", required=True, help="labeled examples JSONL")
    p.add_argument("-o", "--output", required=True, help="conversations JSONL")
    p.add_argument("--corpus-out", help="also write conversations as corpus documents")
    p.add_argument("--endpoint", default=None, help="chat endpoint URL (default: offline stub)")
    p.add_argument("--model", default="stub")
    p.add_argument("--extra-turn-pairs", type=int, default=2)
    p.add_argument("--concurrency", type=int, default=4)
    p.set_defaults(func=cmd_gen_instructions)

    p = sub.add_parser("decontaminate", parents=[common], help="drop benchmark-overlapping conversations")
    p.add_argument("-i", "--input", required=True, help="conversations JSONL")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--benchmark-file", help="one benchmark input text per line")
    p.add_argument("--task-dir", help="pull benchmark inputs from task files")
    p.add_argument("--shingle-n", type=int, default=instruct.DECONTAMINATION_SHINGLE_N)
    p.set_defaults(func=cmd_decontaminate)

    p = sub.add_parser("curate-prompts", parents=[common], help="rewrite a few-shot prompt")
    p.add_argument("-i", "--input", required=True, help="original prompt text file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--labels", nargs="+", required=True)
    p.set_defaults(func=cmd_curate_prompts)

    p = sub.add_parser("eval", parents=[common], help="run the benchmark harness")
    p.add_argument("--task-dir", required=True)
    p.add_argument("--mmlu-dir", help="directory of <subject>_test.csv files")
    p.add_argument("--endpoint", default=None, help="chat endpoint URL (default: offline stub)")
    p.add_argument("--model", default="stub")
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--report", help="write the report JSON here")
    p.add_argument("--dump", help="write the prediction dump here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ppl-report", parents=[common], help="perplexity by document category")
    p.add_argument("--model", required=True, help="scorer model JSON")
    p.add_argument("--baseline-model", help="baseline model JSON for the reduction column")
    p.add_argument(
        "--category", action="append", required=True, metavar="NAME=PATH",
        help="category corpus, repeatable",
    )
    p.add_argument("-o", "--output", help="write the report JSON here")
    p.set_defaults(func=cmd_ppl_report)

    p = sub.add_parser("pipeline", parents=[common], help="run the offline data path end to end")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except PipelineStageError as exc:
        sys.stderr.write(f"lexcorpus: {exc}\n")
        return 2
    except _VALIDATION_ERRORS as exc:
        sys.stderr.write(f"lexcorpus: {exc}\n")
        return 1
    except Exception as exc:  # runtime failure
        sys.stderr.write(f"lexcorpus: unexpected failure: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
