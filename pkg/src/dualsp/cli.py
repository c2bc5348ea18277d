"""Command-line entry point wiring all modules into reproducible runs.

Commands: validate, synthesize, pretrain, dual-train, evaluate, pseudo,
toy-gen.  A key=value config file can seed any flag; explicit command-line
flags win, and the effective configuration is echoed into the output
directory for provenance.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import torch

from .checkpoint import load_model, save_model
from .data import (
    ParallelExample,
    load_dataset,
    save_dataset,
    semi_split,
    toy_domain,
)
from .duallearn import (
    DualConfig,
    dual_train,
    evaluate_q2lf,
    pseudo_label,
)
from .lexicon import EntityLexicon
from .ontology import (
    grammar_error_indicator,
    load_spec,
    synthesize_by_replacement,
)
from .sexpr import serialize, to_lisp_tree
from .training import pretrain_all, train_lf_language_model


def _read_config_file(path: str) -> dict[str, str]:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse once to find --config, use its values as defaults, re-parse so
    explicit flags override the file."""
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        file_values = _read_config_file(pre.config)
        for action in _all_actions(parser):
            key = action.dest.replace("_", "-")
            if key in file_values:
                value = file_values[key]
                if action.type is not None:
                    value = action.type(value)
                elif isinstance(action.default, bool) or action.const is True:
                    value = value.lower() in ("1", "true", "yes")
                action.default = value
    return parser.parse_args(argv)


def _all_actions(parser: argparse.ArgumentParser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                yield from _all_actions(sub)
        else:
            yield action


def _echo_config(args: argparse.Namespace, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in ("func",)
    ]
    (out_dir / "config.txt").write_text("\n".join(lines) + "\n")


def _load_lexicon(path) -> EntityLexicon:
    return EntityLexicon.from_text(Path(path).read_text())


# --- commands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    spec = load_spec(Path(args.spec).read_text())
    all_valid = True
    for raw in Path(args.lfs).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        verdict = grammar_error_indicator(line, spec)
        if verdict.valid:
            print(f"1\t{line}")
        else:
            all_valid = False
            print(f"0\t{verdict.failure}\t{line}")
    return 0 if all_valid else 1


def cmd_synthesize(args) -> int:
    spec = load_spec(Path(args.spec).read_text())
    examples = load_dataset(args.train)
    pool = [to_lisp_tree(ex.lf) for ex in examples]
    trees = synthesize_by_replacement(pool, spec, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(serialize(t) for t in trees) + "\n")
    print(f"wrote {len(trees)} synthesized logical forms to {out}")
    return 0


def cmd_pretrain(args) -> int:
    torch.set_num_threads(1)
    train = load_dataset(args.train)
    valid = load_dataset(args.valid) if args.valid else []
    lexicon = _load_lexicon(args.lexicon) if args.lexicon else None
    queries = []
    if args.queries:
        queries = [tuple(l.split()) for l in Path(args.queries).read_text().splitlines() if l.strip()]
    q2lf, lf2q, lm_q = pretrain_all(
        train, valid,
        unlabeled_queries=queries,
        lexicon=lexicon,
        d_w=args.d_w, n_hidden=args.n_hidden,
        use_copy=args.use_copy, seed=args.seed,
        epochs=args.epochs, lr=args.lr1, batch_size=args.batch_size,
        max_decode_len=args.max_decode_len,
    )
    out = Path(args.out)
    _echo_config(args, out)
    save_model(q2lf, out / "q2lf.ckpt")
    save_model(lf2q, out / "lf2q.ckpt")
    save_model(lm_q, out / "lm_q.ckpt")
    acc = evaluate_q2lf(q2lf, valid, args.max_decode_len) if valid else 0.0
    print(f"pretrained; validation accuracy {acc:.4f}; checkpoints in {out}")
    return 0


def cmd_dual_train(args) -> int:
    torch.set_num_threads(1)
    train = load_dataset(args.train)
    valid = load_dataset(args.valid) if args.valid else []
    spec = load_spec(Path(args.spec).read_text())
    lexicon = _load_lexicon(args.lexicon) if args.lexicon else None
    queries = []
    if args.queries:
        queries = [tuple(l.split()) for l in Path(args.queries).read_text().splitlines() if l.strip()]
    lfs = []
    if args.lfs:
        lfs = [l.strip() for l in Path(args.lfs).read_text().splitlines() if l.strip()]

    q2lf = load_model(args.q2lf)
    lf2q = load_model(args.lf2q)
    lm_q = load_model(args.lm)
    lm_lf = None
    if args.validity_mode == "lflm":
        lm_lf = train_lf_language_model(
            [ex.lf for ex in train] + lfs,
            d_w=args.d_w, n_hidden=args.n_hidden, seed=args.seed,
        )

    cfg = DualConfig(
        alpha=args.alpha, beta=args.beta, beam_k=args.beam_k,
        eta1=args.lr1, eta2=args.lr2, batch_size=args.batch_size,
        max_iters=args.max_iters, validity_mode=args.validity_mode,
        rng_seed=args.seed, max_decode_len=args.max_decode_len,
        eval_every=args.eval_every, patience=args.patience,
    )
    out = Path(args.out)
    _echo_config(args, out)
    metrics_path = out / "metrics.log"
    with metrics_path.open("w") as fh:
        fh.write("iteration\tmean_reward_q\tmean_reward_lf\tvalidity_rate\tvalid_accuracy\n")

        def sink(row):
            fh.write(row.format() + "\n")
            fh.flush()

        dual_train(
            train, queries, lfs, q2lf, lf2q, lm_q, spec, cfg,
            valid_set=valid, lex=lexicon, lm_lf=lm_lf, log_sink=sink,
        )
    save_model(q2lf, out / "q2lf_best.ckpt")
    save_model(lf2q, out / "lf2q_last.ckpt")
    acc = evaluate_q2lf(q2lf, valid, args.max_decode_len) if valid else 0.0
    print(f"dual training done; validation accuracy {acc:.4f}; outputs in {out}")
    return 0


def cmd_evaluate(args) -> int:
    torch.set_num_threads(1)
    model = load_model(args.checkpoint)
    data = load_dataset(args.data)
    acc = evaluate_q2lf(model, data, args.max_decode_len, strict=args.strict)
    print(f"{acc:.4f}")
    return 0


def cmd_pseudo(args) -> int:
    torch.set_num_threads(1)
    train = load_dataset(args.train)
    rows = [(" ".join(ex.query), ex.lf, 1.0) for ex in train]
    if args.lfs:
        if not args.lf2q:
            print("--lfs requires --lf2q", file=sys.stderr)
            return 2
        lf2q = load_model(args.lf2q)
        lexicon = lf2q.lexicon or (_load_lexicon(args.lexicon) if args.lexicon else None)
        from .duallearn import lf_to_dual_input

        lfs = [l.strip() for l in Path(args.lfs).read_text().splitlines() if l.strip()]
        sources = [lf_to_dual_input(lf.split(), lexicon, rng_seed=args.seed) for lf in lfs]
        for lf, (_, decoded, w) in zip(
            lfs, pseudo_label(lf2q, sources, args.max_decode_len)
        ):
            rows.append((" ".join(decoded), lf, w))
    if args.queries:
        if not args.q2lf:
            print("--queries requires --q2lf", file=sys.stderr)
            return 2
        q2lf = load_model(args.q2lf)
        queries = [l.split() for l in Path(args.queries).read_text().splitlines() if l.strip()]
        for src, decoded, w in pseudo_label(q2lf, queries, args.max_decode_len):
            rows.append((" ".join(src), " ".join(decoded), w))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(f"{q}\t{lf}\t{w}\n" for q, lf, w in rows))
    print(f"wrote {len(rows)} weighted pairs to {out}")
    return 0


def cmd_toy_gen(args) -> int:
    domain = toy_domain(seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(domain.train, out / "train.tsv")
    save_dataset(domain.valid, out / "valid.tsv")
    save_dataset(domain.test, out / "test.tsv")
    (out / "domain.spec").write_text(domain.spec_text)
    (out / "lexicon.tsv").write_text(domain.lexicon.to_text())
    print(
        f"toy domain written to {out}: {len(domain.train)} train, "
        f"{len(domain.valid)} valid, {len(domain.test)} test"
    )
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualsp",
        description="Dual learning for semantic parsing (desk scale).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-decode-len", type=int, default=60)

    p = sub.add_parser("validate", help="check logical forms against a domain spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--lfs", required=True, help="file with one logical form per line")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synthesize", help="synthesize new valid logical forms")
    p.add_argument("--config")
    p.add_argument("--spec", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("pretrain", help="MLE pre-training of Q2LF, LF2Q and the query LM")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--valid")
    p.add_argument("--queries", help="unlabeled queries for the LM, one per line")
    p.add_argument("--lexicon")
    p.add_argument("--d-w", type=int, default=100)
    p.add_argument("--n-hidden", type=int, default=200)
    p.add_argument("--use-copy", action="store_true")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--lr1", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("dual-train", help="run the dual-learning game")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--valid")
    p.add_argument("--spec", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--queries", help="unpaired queries, one per line")
    p.add_argument("--lfs", help="unpaired logical forms, one per line")
    p.add_argument("--q2lf", required=True)
    p.add_argument("--lf2q", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--beam-k", type=int, default=3)
    p.add_argument("--lr1", type=float, default=1e-3)
    p.add_argument("--lr2", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--eval-every", type=int, default=50)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--validity-mode", choices=("grammar", "lflm"), default="grammar")
    p.add_argument("--d-w", type=int, default=100)
    p.add_argument("--n-hidden", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dual_train)

    p = sub.add_parser("evaluate", help="exact-match accuracy of a parser checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--strict", action="store_true", help="strict string match")
    p.add_argument("--max-decode-len", type=int, default=60)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pseudo", help="emit pseudo-labeled pairs with 0.5 weight")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--q2lf")
    p.add_argument("--lf2q")
    p.add_argument("--lexicon")
    p.add_argument("--queries")
    p.add_argument("--lfs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudo)

    p = sub.add_parser("toy-gen", help="write the built-in toy domain to disk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_toy_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = _apply_config_defaults(parser, list(sys.argv[1:] if argv is None else argv))
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
