"""Command-line entry point: ``esimrank <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys

from ..corpus import build_vocabulary, dump_dataset, load_candidate_pool, load_dataset
from ..knowledge import (
    attach_knowledge,
    advising_snippet,
    build_index,
    extract_snippet,
    load_course_kb,
    parse_man_pages,
    read_snippets,
    write_snippets,
)
from ..tesim import (
    PoolIndex,
    SubDialogIndex,
    augment_dataset,
    build_subdialog_index,
    reduce_candidates,
    removed_ids,
    sample_negatives,
    seen_correct_responses,
    write_cr_report,
)
from .config import build_configs, read_config_file
from .evaluate import EvalOptions, evaluate_subtask
from .modelio import build_model, load_model, save_model
from .synth import generate_synthetic
from .train import train


def _global_parser() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", help="flat key=value config file")
    g.add_argument("--profile", choices=["desk", "paper"], default="desk")
    g.add_argument("--seed", type=int)
    g.add_argument("--variant", choices=["esim", "kesim"])
    g.add_argument("--tesim", choices=["off", "on"], default="off")
    g.add_argument("--subtask", type=int, choices=[1, 2, 3, 4, 5], default=1)
    return g


def _overrides(args) -> dict:
    out = read_config_file(args.config) if args.config else {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.variant:
        out["variant"] = args.variant
    for key in ("steps", "hidden", "batch_size"):
        v = getattr(args, key, None)
        if v is not None:
            out["max_steps" if key == "steps" else key] = v
    return out


def _training_examples(args, mc, tc):
    data = load_dataset(args.train, args.subtask)
    if args.negatives:
        data = [sample_negatives(ex, args.negatives, tc.seed) for ex in data]
    if mc.variant == "kesim":
        data = _with_knowledge(data, args)
    if args.tesim == "on":
        data = augment_dataset(data, build_subdialog_index(ex.dialog() for ex in data), "train")
    return data


def _with_knowledge(data, args):
    if getattr(args, "knowledge", None):
        return attach_knowledge(data, read_snippets(args.knowledge))
    if getattr(args, "manpages", None):
        idx = build_index(parse_man_pages(args.manpages))
        return attach_knowledge(data, {ex.example_id: extract_snippet(ex, idx) for ex in data})
    if getattr(args, "courses", None):
        kb = load_course_kb(args.courses)
        return attach_knowledge(data, {ex.example_id: advising_snippet(ex, kb) for ex in data})
    return data


def cmd_train(args) -> int:
    mc, tc = build_configs(_overrides(args), args.profile)
    data = _training_examples(args, mc, tc)
    vocab = build_vocabulary(data)
    model = build_model(mc, vocab, args.vectors_a, args.vectors_b)
    result = train(tc, data, model, log=lambda s: print(s, file=sys.stderr))
    save_model(model, args.out, {"train": vars(tc), "tesim": args.tesim == "on", "loss_log": result.loss_log})
    with open(str(args.out) + ".loss.tsv", "w", encoding="utf-8") as fh:
        for step, loss in result.loss_log:
            fh.write(f"{step}\t{loss:.8f}\n")
    print(json.dumps({"steps": result.steps, "final_loss": result.loss_log[-1][1], "checkpoint": str(args.out)}))
    return 0


def build_eval_options(args, model) -> EvalOptions:
    opts = EvalOptions(tesim=args.tesim == "on")
    train_data = load_dataset(args.train, args.subtask) if args.train else None
    if opts.tesim:
        if args.index:
            opts.subdialog_index = SubDialogIndex.load(args.index)
        elif train_data is not None:
            opts.subdialog_index = build_subdialog_index(ex.dialog() for ex in train_data)
    if args.cr:
        if train_data is None:
            raise SystemExit("--cr needs --train")
        opts.seen_correct = seen_correct_responses(train_data)
    if args.pool:
        opts.pool = PoolIndex(load_candidate_pool(args.pool))
        opts.shortlist_size = args.shortlist
    if args.manpages:
        opts.knowledge_index = build_index(parse_man_pages(args.manpages))
    if args.courses:
        opts.course_kb = load_course_kb(args.courses)
    return opts


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = load_dataset(args.data, args.subtask)
    if args.knowledge:
        data = attach_knowledge(data, read_snippets(args.knowledge))
    opts = build_eval_options(args, model)
    metrics = evaluate_subtask(args.subtask, model, data, opts)
    line = metrics.as_dict()
    line["options"] = {"subtask": args.subtask, "variant": model.cfg.variant, "seed": model.cfg.seed,
                       "data": str(args.data), **opts.describe()}
    print(json.dumps(line, sort_keys=True))
    return 0


def cmd_extract_knowledge(args) -> int:
    data = load_dataset(args.data, args.subtask)
    if args.manpages:
        idx = build_index(parse_man_pages(args.manpages))
        snippets = {ex.example_id: extract_snippet(ex, idx) for ex in data}
    else:
        kb = load_course_kb(args.courses)
        snippets = {ex.example_id: advising_snippet(ex, kb) for ex in data}
    write_snippets(snippets, args.out)
    print(json.dumps({"examples": len(snippets), "nonempty": sum(1 for s in snippets.values() if s)}))
    return 0


def cmd_build_index(args) -> int:
    data = load_dataset(args.data, args.subtask)
    index = build_subdialog_index(ex.dialog() for ex in data)
    index.save(args.out)
    print(json.dumps({"subdialogs": len(index)}))
    return 0


def cmd_augment(args) -> int:
    data = load_dataset(args.data, args.subtask)
    out = augment_dataset(data, SubDialogIndex.load(args.index), args.mode)
    dump_dataset(out, args.out)
    print(json.dumps({"input": len(data), "output": len(out)}))
    return 0


def cmd_reduce(args) -> int:
    seen: set[str] = set()
    for path in args.seen:
        seen |= seen_correct_responses(load_dataset(path, args.subtask))
    data = load_dataset(args.data, args.subtask)
    out, report = [], []
    for ex in data:
        red = reduce_candidates(ex, seen, not args.unprotected)
        out.append(red)
        report.append((ex.example_id, removed_ids(ex, red)))
    dump_dataset(out, args.out)
    if args.report:
        write_cr_report(report, args.report)
    print(json.dumps({"examples": len(out), "removed": sum(len(r) for _, r in report)}))
    return 0


def cmd_shortlist(args) -> int:
    data = load_dataset(args.data, args.subtask)
    index = PoolIndex(load_candidate_pool(args.pool))
    out = []
    for ex in data:
        short = index.shortlist(ex.context_tokens, args.size)
        ids = {c.id for c in short}
        short += [c for c in ex.candidates if c.id in ex.correct_ids and c.id not in ids]
        out.append(ex.with_candidates(short))
    dump_dataset(out, args.out)
    print(json.dumps({"examples": len(out), "size": args.size}))
    return 0


def cmd_synth(args) -> int:
    paths = generate_synthetic(args.out, args.seed or 0, args.n_dialogs, args.n_templates, args.vocab_size,
                               args.n_candidates, args.mention_rate, args.varied_filler,
                               not args.no_solution_echo)
    print(json.dumps({k: str(v) for k, v in sorted(paths.items())}))
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import tiny_gradcheck

    err, n = tiny_gradcheck(args.variant or "esim", args.seed or 0)
    print(json.dumps({"variant": args.variant or "esim", "parameters": n, "max_rel_error": err}))
    return 0 if err < 1e-6 else 1


def make_parser() -> argparse.ArgumentParser:
    g = _global_parser()
    p = argparse.ArgumentParser(prog="esimrank", description=__doc__, parents=[g])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[g], help="train a model and write a checkpoint")
    t.add_argument("--train", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--steps", type=int)
    t.add_argument("--hidden", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--negatives", type=int, default=0, help="keep 1 correct + N sampled negatives")
    t.add_argument("--vectors-a")
    t.add_argument("--vectors-b")
    t.add_argument("--knowledge", help="precomputed snippets (JSONL)")
    t.add_argument("--manpages")
    t.add_argument("--courses")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[g], help="score a dataset and print one metrics line")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--train", help="training split (T-ESIM index, CR)")
    e.add_argument("--index", help="saved sub-dialog index")
    e.add_argument("--cr", action="store_true", help="candidate reduction against --train")
    e.add_argument("--pool", help="global candidate pool (subtask 2)")
    e.add_argument("--shortlist", type=int, default=100)
    e.add_argument("--knowledge")
    e.add_argument("--manpages")
    e.add_argument("--courses")
    e.set_defaults(func=cmd_evaluate)

    k = sub.add_parser("extract-knowledge", parents=[g], help="write per-example knowledge snippets")
    k.add_argument("--data", required=True)
    src = k.add_mutually_exclusive_group(required=True)
    src.add_argument("--manpages")
    src.add_argument("--courses")
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_extract_knowledge)

    b = sub.add_parser("build-subdialog-index", parents=[g], help="index training sub-dialogs")
    b.add_argument("--data", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_index)

    a = sub.add_parser("augment", parents=[g], help="append retrieved responses to contexts")
    a.add_argument("--data", required=True)
    a.add_argument("--index", required=True)
    a.add_argument("--mode", choices=["train", "eval"], default="train")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_augment)

    r = sub.add_parser("reduce-candidates", parents=[g], help="drop candidates already seen as correct")
    r.add_argument("--data", required=True)
    r.add_argument("--seen", nargs="+", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--report")
    r.add_argument("--unprotected", action="store_true", help="allow removing the ground truth")
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("shortlist", parents=[g], help="IR shortlist from a global pool")
    s.add_argument("--data", required=True)
    s.add_argument("--pool", required=True)
    s.add_argument("--size", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_shortlist)

    y = sub.add_parser("synth", parents=[g], help="write a synthetic corpus")
    y.add_argument("--out", required=True)
    y.add_argument("--n-dialogs", type=int, default=60)
    y.add_argument("--n-templates", type=int, default=10)
    y.add_argument("--vocab-size", type=int, default=200)
    y.add_argument("--n-candidates", type=int, default=10)
    y.add_argument("--mention-rate", type=float, default=1.0)
    y.add_argument("--varied-filler", action="store_true", help="sample greeting/filler/closing phrases")
    y.add_argument("--no-solution-echo", action="store_true", help="solutions do not repeat problem words")
    y.set_defaults(func=cmd_synth)

    c = sub.add_parser("gradcheck", parents=[g], help="finite-difference check of a tiny model")
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
