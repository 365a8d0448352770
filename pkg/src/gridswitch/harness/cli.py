"""``gridswitch`` command line. Exit codes: 0 success, 1 runtime failure, 2 usage or config error."""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from gridswitch.backends import registry
from gridswitch.errors import BudgetError, PipelineError
from gridswitch.harness.config import ConfigError, RunConfig, load_config
from gridswitch.harness.corpus import load_prompt_corpus

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _set_pair(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _add_config_flags(p: argparse.ArgumentParser, *, backends=registry.KINDS) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--set", dest="sets", action="append", type=_set_pair, default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    for kind in backends:
        p.add_argument(f"--backend.{kind}", dest=f"backend_{kind}", metavar="NAME")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--prompt", help="user text")
    src.add_argument("--corpus-id", type=int, help="1-based id into the prompt corpus")
    p.add_argument("--corpus", type=Path, help="corpus file (default: bundled)")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fps", type=float)


def _config(args, kinds=registry.KINDS) -> RunConfig:
    overrides = dict(args.sets)
    for flag, key in (("frames", "num_frames"), ("seed", "seed"), ("fps", "fps")):
        if getattr(args, flag, None) is not None:
            overrides[key] = getattr(args, flag)
    for kind in kinds:
        name = getattr(args, f"backend_{kind}", None)
        if name is not None:
            overrides[f"backend.{kind}"] = name
    cfg = load_config(args.config, overrides)
    for kind, name in cfg.backend_names().items():
        if kind in kinds and not registry.exists(kind, name):
            raise registry.UnknownBackend(kind, name)
    return cfg


def _user_text(args) -> str:
    if args.prompt is not None:
        if not args.prompt.strip():
            raise UsageError("--prompt is empty")
        return args.prompt
    if args.corpus_id is not None:
        corpus = load_prompt_corpus(args.corpus)
        try:
            return corpus[args.corpus_id]
        except KeyError as exc:
            raise UsageError(exc.args[0]) from exc
    raise UsageError("one of --prompt or --corpus-id is required")


def cmd_generate(args) -> int:
    from gridswitch.harness.rundir import run_generate

    cfg = _config(args)
    text = _user_text(args)
    seq = run_generate(text, cfg, args.out)
    print(f"wrote {len(seq)} frames to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from gridswitch.harness.evaluate import evaluate_dirs

    kinds = ("perceptual", "embedding")
    cfg = _config(args, kinds)
    perceptual = registry.create("perceptual", cfg["backend.perceptual"])
    embedding = registry.create("embedding", cfg["backend.embedding"])
    report = evaluate_dirs(args.dirs, perceptual=perceptual, embedding=embedding)
    csv_path = report.write(args.out)
    for vid, why in report.skipped.items():
        print(f"skipped {vid}: {why}", file=sys.stderr)
    print(f"scored {len(report.videos)} videos; summary at {csv_path}")
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    from gridswitch.harness.gridsearch import GridSearchSpace, run_gridsearch

    cfg = _config(args)
    space = GridSearchSpace.load(args.space)
    corpus = load_prompt_corpus(args.corpus)
    try:
        prompts = [(i, corpus[i]) for i in args.corpus_ids]
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    result = run_gridsearch(space, prompts, args.out, base_values=cfg.values, limit=args.limit)
    print(
        f"{len(result.computed)} points computed, {len(result.rows)} ranked, "
        f"{len(result.skipped)} claimed elsewhere; wrote {result.csv_path}"
    )
    return EXIT_OK


def cmd_ablate(args) -> int:
    from gridswitch.harness.ablate import run_ablation

    cfg = _config(args)
    text = _user_text(args)
    if args.external_prompts is None:
        raise UsageError("--external-prompts is required for the CG arms")
    result = run_ablation(text, cfg, args.external_prompts, args.out)
    print(f"wrote arms {', '.join(result.arm_dirs)}; table at {result.csv_path}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    corpus = load_prompt_corpus(args.corpus)
    if args.id is not None:
        try:
            print(corpus[args.id])
        except KeyError as exc:
            raise UsageError(exc.args[0]) from exc
        return EXIT_OK
    for i, p in corpus.items():
        print(f"{i:3d}  {p}")
    return EXIT_OK


def _ids(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad id list {text!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridswitch", description="Zero-shot text-to-video by grid prompt switching.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate one video into a run directory")
    _add_config_flags(p)
    _add_run_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score frame directories")
    p.add_argument("dirs", nargs="+", type=Path)
    _add_config_flags(p, backends=("perceptual", "embedding"))
    p.add_argument("--out", type=Path, required=True, help="report directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gridsearch", help="resumable hyperparameter sweep")
    _add_config_flags(p)
    p.add_argument("--space", type=Path, required=True, help="JSON space file")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--corpus-ids", type=_ids, default=[1], help="e.g. 1,4,10-12")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--limit", type=int, help="stop after this many new points")
    p.add_argument("--out", type=Path, required=True, help="ranked CSV path")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("ablate", help="external vs LLM prompts, with and without grid switching")
    _add_config_flags(p)
    _add_run_flags(p)
    p.add_argument("--external-prompts", type=Path, help='JSON {"fixed": ..., "dynamics": [...]}')
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("corpus", help="list the prompt corpus")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--id", type=int)
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except registry.UnknownBackend as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (BudgetError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
