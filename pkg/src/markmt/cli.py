"""Command-line pipeline driver.

One subcommand per pipeline stage: synthetic data preparation, baseline
training, feedback simulation, fine-tuning on annotations, evaluation with
significance testing, annotator agreement, mixed-model effort analysis,
study planning, the annotation service, and the data-size sweep.

Every artifact-producing run takes an ``--out`` directory and writes its
resolved configuration there as ``config.json`` before doing any work, so
a finished (or failed) run can always be reproduced from its artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

from . import agreement as agreement_lib
from . import feedback
from . import metrics
from . import model as model_lib
from . import planner
from . import service as service_lib
from . import synth
from . import training
from .corpus import Vocabulary
from .mixedfx import (
    MixedModelSpec,
    apply_length_bins,
    fit_reml,
    read_table,
    significance,
)

SPLITS = ("pretrain", "train", "dev", "test")


# ---------------------------------------------------------------------------
# Small shared helpers


def _ensure_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def _write_run_config(out: Path, args: argparse.Namespace) -> None:
    resolved = {
        key: (list(value) if isinstance(value, tuple) else value)
        for key, value in vars(args).items()
        if key != "func"
    }
    _write_json(out / "config.json", resolved)


def _load_vocabs(data_dir: str) -> tuple[Vocabulary, Vocabulary]:
    base = Path(data_dir)
    return (
        Vocabulary.load(base / "src_vocab.txt"),
        Vocabulary.load(base / "trg_vocab.txt"),
    )


def _load_pairs(data_dir: str, split: str) -> list[tuple[list[str], list[str]]]:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
    path = Path(data_dir) / f"{split}.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"missing split file {path}")
    return [
        (list(record["source"]), list(record["target"]))
        for record in _read_jsonl(path)
    ]


def _encode_pairs(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    src_vocab: Vocabulary,
    trg_vocab: Vocabulary,
) -> list[tuple[list[int], list[int]]]:
    return [(src_vocab.encode(src), trg_vocab.encode(trg)) for src, trg in pairs]


def _train_config(args: argparse.Namespace) -> training.TrainConfig:
    return training.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        optimizer=args.optimizer,
        seed=args.seed,
        patience=args.patience,
    )


def _add_train_flags(
    parser: argparse.ArgumentParser,
    *,
    lr: float = 0.01,
    batch_size: int = 8,
    epochs: int = 10,
    optimizer: str = "sgd",
    patience: int | None = None,
) -> None:
    parser.add_argument("--lr", type=float, default=lr, help="learning rate")
    parser.add_argument("--batch-size", type=int, default=batch_size)
    parser.add_argument("--epochs", type=int, default=epochs)
    parser.add_argument("--optimizer", choices=training.OPTIMIZERS, default=optimizer)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--patience", type=int, default=patience,
        help="early-stopping patience in epochs (default: run all epochs)",
    )


def _resolve_scheme(args: argparse.Namespace) -> training.WeightScheme:
    deltas_given = args.delta_plus is not None or args.delta_minus is not None
    if args.scheme == "zero_one":
        if deltas_given:
            raise ValueError("the zero_one scheme fixes its deltas at (1, 0)")
        return training.WeightScheme.zero_one()
    if args.scheme == "signed":
        return training.WeightScheme.signed(
            0.5 if args.delta_plus is None else args.delta_plus,
            -0.5 if args.delta_minus is None else args.delta_minus,
        )
    if args.delta_plus is None or args.delta_minus is None:
        raise ValueError("the custom scheme needs both --delta-plus and --delta-minus")
    return training.WeightScheme.custom(args.delta_plus, args.delta_minus)


def _annotation_dataset(
    records: Sequence[dict],
    objective: str,
    src_vocab: Vocabulary,
    trg_vocab: Vocabulary,
    scheme: training.WeightScheme,
    polarity: str,
) -> list[tuple]:
    """Map annotation records to fine-tuning examples for one objective.

    Corrections train on (source, reference); marking objectives train on
    (source, hypothesis) with per-token or per-sentence weights derived
    from the flags.
    """
    dataset: list[tuple] = []
    for index, record in enumerate(records):
        x = src_vocab.encode(record["source"])
        if objective == "corrections":
            target = record.get("reference", record.get("target"))
            if target is None:
                raise ValueError(
                    f"record {index} has no reference for the corrections objective"
                )
            dataset.append((x, trg_vocab.encode(target)))
            continue
        hypothesis = record["hypothesis"]
        flags = [bool(f) for f in record["flags"]]
        if len(flags) != len(hypothesis):
            raise ValueError(f"record {index}: flag/hypothesis length mismatch")
        y = trg_vocab.encode(hypothesis)
        sentence_id = str(record.get("sentence_id", index))
        if objective == "markings":
            weights = training.token_weights(flags, scheme, sentence_id)
        else:
            weights = training.sentence_weight_reduction(flags, polarity)
        dataset.append((x, y, weights))
    if not dataset:
        raise ValueError("no usable annotation records")
    return dataset


def _decode_corpus(
    params: model_lib.ModelParams, sources: Sequence[Sequence[int]]
) -> list[list[int]]:
    return [model_lib.greedy_decode(params, x) for x in sources]


def _segment_scores(
    hyps: Sequence[Sequence[int]], refs: Sequence[Sequence[int]]
) -> list[dict]:
    return [
        {"cost": metrics.ter_cost(hyp, ref), "ref_len": len(ref)}
        for hyp, ref in zip(hyps, refs)
    ]


def _pooled_ter(entries: Sequence[tuple[int, int]]) -> float:
    total = sum(length for _, length in entries)
    return sum(cost for cost, _ in entries) / total


def _fit_and_report(
    result: training.FineTuneResult,
    dev_set: Sequence[tuple[Sequence[int], Sequence[int]]],
    out: Path,
    src_vocab: Vocabulary,
    trg_vocab: Vocabulary,
    extra_metrics: dict | None = None,
) -> dict:
    """Write the standard artifact set for one fine-tuning run."""
    checkpoint_dir = out / "checkpoints"
    checkpoint_dir.mkdir(exist_ok=True)
    model_lib.save_checkpoint(
        checkpoint_dir / "best.npz",
        result.params,
        src_vocab=src_vocab,
        trg_vocab=trg_vocab,
        extra={"best_epoch": result.best_epoch},
    )
    training.write_training_log(result.log, out / "log.jsonl")
    dev_ter, dev_bleu = training.evaluate_dev(result.params, dev_set)
    report = {
        "dev_ter": dev_ter,
        "dev_bleu": dev_bleu,
        "best_epoch": result.best_epoch,
        "n_segments": len(dev_set),
    }
    if extra_metrics:
        report.update(extra_metrics)
    _write_json(out / "metrics.json", report)
    return report


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_prepare(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    task = synth.make_two_domain_task(
        seed=args.seed,
        n_words=args.n_words,
        n_ambiguous=args.n_ambiguous,
        n_pretrain=args.n_pretrain,
        n_train=args.n_train,
        n_dev=args.n_dev,
        n_test=args.n_test,
        dominant_share=args.dominant_share,
    )
    for split in SPLITS:
        pairs = getattr(task, split)
        _write_jsonl(
            out / f"{split}.jsonl",
            [{"source": list(src), "target": list(trg)} for src, trg in pairs],
        )
    task.src_vocab.save(out / "src_vocab.txt")
    task.trg_vocab.save(out / "trg_vocab.txt")
    sizes = {split: len(getattr(task, split)) for split in SPLITS}
    print(f"wrote task to {out} ({json.dumps(sizes)})")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    src_vocab, trg_vocab = _load_vocabs(args.data)
    pairs = _encode_pairs(_load_pairs(args.data, args.split), src_vocab, trg_vocab)
    dev = _encode_pairs(_load_pairs(args.data, "dev"), src_vocab, trg_vocab)
    params = model_lib.init_params(
        model_lib.ModelConfig(
            src_vocab_size=len(src_vocab),
            trg_vocab_size=len(trg_vocab),
            embed_dim=args.embed_dim,
            hidden_dim=args.hidden_dim,
            seed=args.seed,
        )
    )
    result = training.fine_tune(params, pairs, "corrections", _train_config(args), dev)
    report = _fit_and_report(
        result, dev, out, src_vocab, trg_vocab,
        {"n_examples": len(pairs), "split": args.split},
    )
    print(
        f"trained on {len(pairs)} pairs: dev TER {report['dev_ter']:.4f}, "
        f"dev BLEU {report['dev_bleu']:.4f} (best epoch {result.best_epoch})"
    )
    return 0


def _cmd_simulate_markings(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    src_vocab, trg_vocab = _load_vocabs(args.data)
    pairs = _load_pairs(args.data, args.split)
    if args.limit is not None:
        pairs = pairs[: args.limit]
    params, _ = model_lib.load_checkpoint(args.checkpoint)
    records = []
    skipped = 0
    for index, (src, ref) in enumerate(pairs):
        hyp_ids = model_lib.greedy_decode(params, src_vocab.encode(src))
        hyp = trg_vocab.decode(hyp_ids)
        if not hyp:
            skipped += 1
            continue
        sentence_id = f"{args.split}_{index}"
        if args.origin == "simulated":
            marking = feedback.simulate_markings(hyp, ref, sentence_id)
        else:
            marking = feedback.random_markings(
                hyp, args.p_mark, seed=args.seed * 1_000_003 + index,
                hypothesis_id=sentence_id,
            )
        records.append(
            {
                "sentence_id": sentence_id,
                "source": list(src),
                "hypothesis": list(hyp),
                "reference": list(ref),
                "flags": list(marking.flags),
                "origin": marking.origin,
            }
        )
    if not records:
        raise ValueError("every hypothesis decoded empty; nothing to annotate")
    _write_jsonl(out / "annotations.jsonl", records)
    flagged = sum(sum(r["flags"]) for r in records)
    total = sum(len(r["flags"]) for r in records)
    _write_json(
        out / "metrics.json",
        {
            "n_annotations": len(records),
            "n_skipped_empty": skipped,
            "flagged_fraction": flagged / total,
        },
    )
    print(
        f"wrote {len(records)} {args.origin} markings to {out / 'annotations.jsonl'} "
        f"({flagged}/{total} tokens flagged, {skipped} empty decodes skipped)"
    )
    return 0


def _cmd_finetune(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    scheme = _resolve_scheme(args)
    src_vocab, trg_vocab = _load_vocabs(args.data)
    records = _read_jsonl(args.annotations)
    dataset = _annotation_dataset(
        records, args.objective, src_vocab, trg_vocab, scheme, args.polarity
    )
    if args.limit is not None:
        dataset = dataset[: args.limit]
    dev = _encode_pairs(_load_pairs(args.data, "dev"), src_vocab, trg_vocab)
    params, _ = model_lib.load_checkpoint(args.checkpoint)
    result = training.fine_tune(
        params, dataset, args.objective, _train_config(args), dev
    )
    report = _fit_and_report(
        result, dev, out, src_vocab, trg_vocab,
        {
            "n_examples": len(dataset),
            "objective": args.objective,
            "scheme": scheme.kind,
            "delta_plus": scheme.delta_plus,
            "delta_minus": scheme.delta_minus,
        },
    )
    print(
        f"fine-tuned ({args.objective}, {scheme.kind}) on {len(dataset)} examples: "
        f"dev TER {report['dev_ter']:.4f}, dev BLEU {report['dev_bleu']:.4f}"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    src_vocab, trg_vocab = _load_vocabs(args.data)
    pairs = _encode_pairs(_load_pairs(args.data, args.split), src_vocab, trg_vocab)
    sources = [x for x, _ in pairs]
    refs = [y for _, y in pairs]
    params, _ = model_lib.load_checkpoint(args.checkpoint)
    hyps = _decode_corpus(params, sources)
    scores = _segment_scores(hyps, refs)
    report = {
        "ter": metrics.corpus_ter(hyps, refs),
        "bleu": metrics.bleu(hyps, refs),
        "n_segments": len(pairs),
    }
    if args.baseline is not None:
        base_params, _ = model_lib.load_checkpoint(args.baseline)
        base_hyps = _decode_corpus(base_params, sources)
        base_scores = _segment_scores(base_hyps, refs)
        report["baseline_ter"] = metrics.corpus_ter(base_hyps, refs)
        report["p_vs_baseline"] = metrics.approx_randomization(
            [(s["cost"], s["ref_len"]) for s in scores],
            [(s["cost"], s["ref_len"]) for s in base_scores],
            metric=_pooled_ter,
            n_shuffles=args.n_shuffles,
            seed=args.seed,
        )
    _write_jsonl(out / "scores.jsonl", scores)
    _write_json(out / "metrics.json", report)
    line = f"{args.split} TER {report['ter']:.4f}, BLEU {report['bleu']:.4f}"
    if "p_vs_baseline" in report:
        line += (
            f" (baseline TER {report['baseline_ter']:.4f}, "
            f"p={report['p_vs_baseline']:.4f})"
        )
    print(line)
    return 0


def _load_scores(path: str) -> list:
    rows = _read_jsonl(path)
    if not rows:
        raise ValueError(f"no score rows in {path}")
    if all("cost" in row and "ref_len" in row for row in rows):
        return [(row["cost"], row["ref_len"]) for row in rows]
    if all("value" in row for row in rows):
        return [float(row["value"]) for row in rows]
    raise ValueError(
        f"{path}: score rows need either cost/ref_len or value fields throughout"
    )


def _cmd_significance(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    scores_a = _load_scores(args.scores_a)
    scores_b = _load_scores(args.scores_b)
    if isinstance(scores_a[0], tuple) != isinstance(scores_b[0], tuple):
        raise ValueError("the two score files use different formats")
    if isinstance(scores_a[0], tuple):
        metric = _pooled_ter
        metric_name = "pooled_ter"
    else:
        metric = None
        metric_name = "mean"
    p_value = metrics.approx_randomization(
        scores_a, scores_b, metric=metric, n_shuffles=args.n_shuffles, seed=args.seed
    )
    reduce = metric if metric is not None else (lambda xs: sum(xs) / len(xs))
    report = {
        "p_value": p_value,
        "metric": metric_name,
        "metric_a": reduce(scores_a),
        "metric_b": reduce(scores_b),
        "n_segments": len(scores_a),
        "n_shuffles": args.n_shuffles,
        "seed": args.seed,
    }
    report["delta"] = report["metric_a"] - report["metric_b"]
    _write_json(out / "report.json", report)
    print(
        f"{metric_name}: A {report['metric_a']:.4f} vs B {report['metric_b']:.4f} "
        f"-> p={p_value:.4f} ({args.n_shuffles} shuffles)"
    )
    return 0


def _judgment_value(record: dict) -> float:
    """Sentence-level quality judgment for one exported annotation."""
    hyp = record["hypothesis_text"].split()
    mode = record.get("chosen_mode") or record["mode"]
    if mode == "marking":
        return agreement_lib.to_quality_judgment([bool(f) for f in record["flags"]])
    if mode == "postedit":
        edit = feedback.PostEdit.from_tokens(
            record["sentence_id"], hyp, record["edited_text"].split()
        )
        return agreement_lib.to_quality_judgment(edit)
    raise ValueError(f"record for {record['sentence_id']!r} has no usable mode")


def _cmd_agreement(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    records = _read_jsonl(args.annotations)
    mode_records = [r for r in records if r["mode"] == args.mode]
    if not mode_records:
        raise ValueError(f"no annotations with mode {args.mode!r}")

    if args.value == "chosen_mode":
        if args.mode != "choice":
            raise ValueError("chosen_mode agreement only applies to the choice mode")
        inter_matrix = agreement_lib.RatingMatrix.from_records(
            [
                (
                    f"{r['sentence_id']}@{r['pass']}",
                    r["annotator_id"],
                    float(r["chosen_mode"] == "postedit"),
                )
                for r in mode_records
            ],
            level="nominal",
        )
        report = {
            "mode": args.mode,
            "value": "chosen_mode",
            "inter": agreement_lib.krippendorff_alpha(inter_matrix),
        }
        _write_json(out / "report.json", report)
        print(f"choice-of-mode inter-annotator alpha {report['inter']:.4f}")
        return 0

    # Self-consistency spans all passes: each repeated sentence is seen once
    # per mode, and the sentence-level judgment makes those passes comparable.
    intra = [
        (
            record["annotator_id"],
            record["sentence_id"],
            record["pass"],
            _judgment_value(record),
        )
        for record in records
    ]
    inter_matrix = agreement_lib.RatingMatrix.from_records(
        [
            (
                f"{record['sentence_id']}@{record['pass']}",
                record["annotator_id"],
                _judgment_value(record),
            )
            for record in mode_records
        ],
        level=args.level,
    )
    report = agreement_lib.agreement_report(args.mode, intra, inter_matrix, args.level)
    report["value"] = "judgment"
    _write_json(out / "report.json", report)
    print(
        f"{args.mode}: intra-annotator alpha {report['intra_mean']:.4f} "
        f"(sd {report['intra_std']:.4f}), inter-annotator alpha {report['inter']:.4f}"
    )
    return 0


def _cmd_lmem(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    rows = read_table(args.table)
    groups = tuple(g.strip() for g in args.groups.split(",") if g.strip())
    if not groups:
        raise ValueError("at least one grouping factor is required")
    if args.bin_column is not None:
        rows = apply_length_bins(rows, args.bin_column, width=args.bin_width)
    spec = MixedModelSpec(
        response=args.response, fixed=args.fixed, random_groups=groups
    )
    fit = fit_reml(spec, rows)
    report = fit.to_report()
    report["tests"] = []
    for name in fit.fixed_effects:
        if name == "(Intercept)":
            continue
        decision = significance(fit, name, alpha_level=args.alpha)
        report["tests"].append(
            {
                "contrast": name,
                "estimate": decision.estimate,
                "standard_error": decision.se,
                "statistic": decision.statistic,
                "df": decision.df,
                "p_value": decision.p,
                "significant": decision.significant,
                "alpha": args.alpha,
            }
        )
    _write_json(out / "report.json", report)
    print(
        f"fit {args.response} on {fit.n_obs} rows "
        f"(REML loglik {fit.reml_loglik:.3f}, df {fit.df})"
    )
    for test in report["tests"]:
        verdict = "significant" if test["significant"] else "not significant"
        print(
            f"  {test['contrast']}: {test['estimate']:+.4f} "
            f"(SE {test['standard_error']:.4f}, p={test['p_value']:.3g}, {verdict})"
        )
    return 0


def _numbered_ids(prefix: str, count: int) -> list[str]:
    if count < 1:
        raise ValueError("count must be positive")
    width = len(str(count - 1))
    return [f"{prefix}{i:0{width}d}" for i in range(count)]


def _cmd_assign(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    if args.talk_ids is not None:
        talk_ids = [t.strip() for t in args.talk_ids.split(",") if t.strip()]
    else:
        talk_ids = _numbered_ids("t", args.talks)
    if args.annotator_ids is not None:
        annotator_ids = [a.strip() for a in args.annotator_ids.split(",") if a.strip()]
    else:
        annotator_ids = _numbered_ids("a", args.annotators)
    plan = planner.assign(talk_ids, annotator_ids, seed=args.seed)
    violations = planner.verify_assignment(plan)
    planner.write_plan(plan, out / "plan.jsonl")
    _write_json(
        out / "report.json",
        {
            "n_entries": len(plan.entries),
            "n_talks": len(talk_ids),
            "n_annotators": len(annotator_ids),
            "violations": violations,
        },
    )
    if violations:
        for violation in violations:
            print(f"violation: {violation}", file=sys.stderr)
        return 1
    print(
        f"assigned {len(talk_ids)} talks to {len(annotator_ids)} annotators "
        f"({len(plan.entries)} entries, verified clean)"
    )
    return 0


def build_service(
    plan_path: str,
    documents_path: str,
    agreement_ids: Sequence[str],
    log_path: str,
) -> service_lib.AnnotationService:
    """Assemble the annotation backend from its three artifact files."""
    plan = planner.read_plan(plan_path)
    sentences = service_lib.load_documents(documents_path)
    return service_lib.AnnotationService(
        plan=plan,
        sentences=sentences,
        agreement_ids=tuple(agreement_ids),
        log_path=log_path,
    )


def _cmd_serve(args: argparse.Namespace) -> int:
    if args.agreement_file is not None:
        agreement_ids = [
            line.strip()
            for line in Path(args.agreement_file).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    else:
        agreement_ids = [s.strip() for s in args.agreement_ids.split(",") if s.strip()]
    service = build_service(args.plan, args.documents, agreement_ids, args.log)
    from .http_api import create_app

    app = create_app(service)
    if args.static is not None:
        from starlette.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=args.static, html=True), name="ui")
    import uvicorn

    print(f"serving on {args.host}:{args.port} (log: {args.log})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    out = _ensure_dir(args.out)
    _write_run_config(out, args)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    scheme = _resolve_scheme(args)
    src_vocab, trg_vocab = _load_vocabs(args.data)
    records = _read_jsonl(args.annotations)
    dataset = _annotation_dataset(
        records, args.objective, src_vocab, trg_vocab, scheme, args.polarity
    )
    subsets = training.sweep_subsets(dataset, sizes, seed=args.seed)
    dev = _encode_pairs(_load_pairs(args.data, "dev"), src_vocab, trg_vocab)
    test = _encode_pairs(_load_pairs(args.data, args.eval_split), src_vocab, trg_vocab)
    test_sources = [x for x, _ in test]
    test_refs = [y for _, y in test]
    params, _ = model_lib.load_checkpoint(args.checkpoint)
    results = {}
    for size in sorted(subsets):
        result = training.fine_tune(
            params, subsets[size], args.objective, _train_config(args), dev
        )
        hyps = _decode_corpus(result.params, test_sources)
        results[size] = {
            "ter": metrics.corpus_ter(hyps, test_refs),
            "bleu": metrics.bleu(hyps, test_refs),
            "best_epoch": result.best_epoch,
        }
        print(f"size {size}: TER {results[size]['ter']:.4f}")
    _write_json(
        out / "metrics.json",
        {
            "objective": args.objective,
            "scheme": scheme.kind,
            "eval_split": args.eval_split,
            "results": {str(size): results[size] for size in sorted(results)},
        },
    )
    with open(out / "ter_vs_size.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["size", "ter", "bleu", "best_epoch"])
        for size in sorted(results):
            row = results[size]
            writer.writerow([size, row["ter"], row["bleu"], row["best_epoch"]])
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def _add_scheme_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--objective", choices=training.OBJECTIVES, default="markings"
    )
    parser.add_argument(
        "--scheme", choices=training.SCHEME_KINDS, default="signed",
        help="token-weight scheme for the markings objective",
    )
    parser.add_argument("--delta-plus", type=float, default=None)
    parser.add_argument("--delta-minus", type=float, default=None)
    parser.add_argument(
        "--polarity", choices=training.POLARITIES, default="fraction_correct",
        help="sentence-weight polarity for the sentence_level objective",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markmt",
        description="Pipeline driver: synthetic MT data, feedback-based "
        "fine-tuning, evaluation, and annotation-study tooling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="generate the two-domain synthetic task")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-words", type=int, default=12)
    p.add_argument("--n-ambiguous", type=int, default=4)
    p.add_argument("--n-pretrain", type=int, default=2000)
    p.add_argument("--n-train", type=int, default=500)
    p.add_argument("--n-dev", type=int, default=100)
    p.add_argument("--n-test", type=int, default=150)
    p.add_argument("--dominant-share", type=float, default=0.85)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="train a baseline model on one split")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="pretrain")
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--hidden-dim", type=int, default=64)
    _add_train_flags(p, lr=0.005, batch_size=16, epochs=30, optimizer="adam", patience=3)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "simulate-markings",
        help="decode a split and mark hypothesis tokens against references",
    )
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--origin", choices=("simulated", "random"), default="simulated")
    p.add_argument("--p-mark", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=_cmd_simulate_markings)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint on annotations")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--limit", type=int, default=None)
    _add_scheme_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("evaluate", help="score a checkpoint on a held-out split")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--baseline", default=None, help="checkpoint to test against")
    p.add_argument("--n-shuffles", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser(
        "significance", help="paired randomization test between two score files"
    )
    p.add_argument("--scores-a", required=True)
    p.add_argument("--scores-b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-shuffles", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_significance)

    p = sub.add_parser(
        "agreement", help="intra/inter-annotator agreement from exported annotations"
    )
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=planner.MODES, default="marking")
    p.add_argument("--level", choices=("interval", "nominal"), default="interval")
    p.add_argument(
        "--value", choices=("judgment", "chosen_mode"), default="judgment",
        help="rate sentences by quality judgment, or (choice mode only) by "
        "which sub-mode the annotator picked",
    )
    p.set_defaults(func=_cmd_agreement)

    p = sub.add_parser("lmem", help="mixed-model analysis of an effort table")
    p.add_argument("--table", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fixed", default=None, help="fixed-effect column (e.g. mode)")
    p.add_argument(
        "--groups", default="user_id,talk_id",
        help="comma-separated random-intercept factors; a/b nests b inside a",
    )
    p.add_argument("--bin-column", default=None, help="numeric column to bin first")
    p.add_argument("--bin-width", type=int, default=176)
    p.add_argument("--alpha", type=float, default=0.01)
    p.set_defaults(func=_cmd_lmem)

    p = sub.add_parser("assign", help="plan talk parts across annotators")
    p.add_argument("--out", required=True)
    p.add_argument("--talks", type=int, default=30)
    p.add_argument("--annotators", type=int, default=10)
    p.add_argument("--talk-ids", default=None, help="explicit comma-separated ids")
    p.add_argument("--annotator-ids", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("serve", help="run the annotation session backend")
    p.add_argument("--plan", required=True)
    p.add_argument("--documents", required=True)
    p.add_argument("--log", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--agreement-ids", help="comma-separated sentence ids")
    group.add_argument("--agreement-file", help="file with one sentence id per line")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument(
        "--static", default=None,
        help="directory of static UI files to mount at /ui",
    )
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("sweep", help="data-size ablation over annotation subsets")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--sizes", default=",".join(str(s) for s in training.SWEEP_SIZES),
        help="comma-separated fine-tuning set sizes",
    )
    p.add_argument("--eval-split", default="test")
    _add_scheme_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # surface module errors as a message + exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
