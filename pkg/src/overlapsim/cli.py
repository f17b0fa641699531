"""Command-line pipeline: discretize, train-slm, build-pool, simulate, serialize, stats, compare.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .discretize import DEFAULT_D, DEFAULT_SILENCE_THRESHOLD, discretize, dump_token_jsonl, parse_token_jsonl
from .exceptions import OverlapSimError
from .pool import DEFAULT_PADDING, DEFAULT_POOL_SIZE, build_pool, load_pool, parse_manifest, save_pool
from .simulate import SimulationConfig, generate_batch, write_batch
from .slm import DEFAULT_ORDER, NGramModel
from .stats import OverlapStats, compare_stats, compute_stats
from .transcript import parse_transcript
from .tsot import serialize

log = logging.getLogger("overlapsim")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def parse_ratios(text: str | dict | None) -> dict[str, float] | None:
    """``random=0.3,word=0.3,time=0.4`` or a JSON object."""
    if text is None or isinstance(text, dict):
        return text
    text = text.strip()
    if text.startswith("{"):
        return {k: float(v) for k, v in json.loads(text).items()}
    out = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"bad ratio {part!r}; expected name=value")
        out[name.strip()] = float(value)
    return out


# -- subcommands -------------------------------------------------------------


def cmd_discretize(args):
    transcripts = parse_transcript(_read(args.input), args.format)
    seqs = discretize(transcripts, args.mode, args.d, args.silence_threshold)
    _write(dump_token_jsonl(seqs), args.output)
    log.info("wrote %d token sequences from %d recordings", len(seqs), len(transcripts))


def cmd_train_slm(args):
    seqs = parse_token_jsonl(_read(args.input))
    model = NGramModel(order=args.order).fit(seqs)
    data = model.save()
    if args.output in (None, "-"):
        sys.stdout.write(data.decode() + "\n")
    else:
        Path(args.output).write_bytes(data)
    log.info("trained order-%d %s model on %d sequences", args.order, model.kind_, len(seqs))


def cmd_build_pool(args):
    manifest = Path(args.input)
    source = parse_manifest(manifest.read_text(), manifest.parent)
    pool = build_pool(source, args.size, args.silence_threshold, args.seed, args.padding)
    path = save_pool(pool, args.out_dir)
    log.info("pool of %d segments written to %s", len(pool), path)


def _load_models(paths):
    models = {}
    for p in paths or []:
        m = NGramModel.load(Path(p).read_bytes())
        if m.kind_ in models:
            raise UsageError(f"two {m.kind_}-based models given")
        models[m.kind_] = m
    return models


def cmd_simulate(args):
    models = _load_models(args.model)
    ratios = parse_ratios(args.ratios)
    algorithm = args.algorithm
    if ratios and algorithm != "mix":
        raise UsageError("--ratios needs --algorithm mix")
    config = SimulationConfig(
        algorithm=algorithm,
        pool=load_pool(args.pool),
        time_model=models.get("time"),
        word_model=models.get("word"),
        ratios=ratios,
        max_speakers=args.max_speakers,
        max_tokens=args.max_tokens,
        gain_jitter=args.gain_jitter,
    )
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    manifest = write_batch(generate_batch(config, args.count, args.seed), args.out_dir)
    log.info("wrote %d samples; manifest %s", args.count, manifest)


def cmd_serialize(args):
    lines = []
    for t in parse_transcript(_read(args.input), "jsonl"):
        lines.append(serialize(t.words, t.recording_id).to_line())
    _write("".join(line + "\n" for line in lines), args.output)


def _summary(stats: OverlapStats) -> str:
    dist = ", ".join(f"{x}:{p:.3f}" for x, p in enumerate(stats.token_distribution()))
    return (
        f"recordings       {stats.n_recordings}\n"
        f"speech (union)   {stats.speech_union:.2f} s\n"
        f"overlapped       {stats.overlapped_speech:.2f} s\n"
        f"overlap ratio    {stats.overlap_ratio:.4f}\n"
        f"tokens (d={stats.d:g})  {dist}\n"
    )


def cmd_stats(args):
    stats = compute_stats(parse_transcript(_read(args.input), "jsonl"), args.d)
    report = json.dumps(stats.to_dict(), indent=1) + "\n"
    if args.output in (None, "-"):
        sys.stdout.write(report)
    else:
        Path(args.output).write_text(report)
        sys.stdout.write(_summary(stats))


def cmd_compare(args):
    real = OverlapStats.from_dict(json.loads(_read(args.real)))
    sim = OverlapStats.from_dict(json.loads(_read(args.sim)))
    report = compare_stats(real, sim)
    _write(json.dumps(report, indent=1) + "\n", args.output)
    if args.output not in (None, "-"):
        ratio = report["fields"]["overlap_ratio"]
        sys.stdout.write(
            f"overlap ratio  real {ratio['real']:.4f}  sim {ratio['sim']:.4f}  "
            f"rel diff {ratio['rel_diff']:+.2%}\n"
            f"token TV distance {report['token_tv_distance']:.4f}\n"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="overlapsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file whose keys mirror the subcommand's flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("discretize", help="transcripts -> overlap token sequences")
    p.add_argument("input", help="transcript file (or - for stdin)")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=["jsonl", "ctm"], default="jsonl")
    p.add_argument("--mode", choices=["time", "word"], default="time")
    p.add_argument("--d", type=float, default=DEFAULT_D, help="window length in seconds (time mode)")
    p.add_argument("--silence-threshold", type=float, default=DEFAULT_SILENCE_THRESHOLD)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("train-slm", help="token sequences -> n-gram model")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.set_defaults(func=cmd_train_slm)

    p = sub.add_parser("build-pool", help="single-talker manifest -> segmented utterance pool")
    p.add_argument("input", help="corpus manifest JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, default=DEFAULT_POOL_SIZE)
    p.add_argument("--silence-threshold", type=float, default=0.5)
    p.add_argument("--padding", type=float, default=DEFAULT_PADDING)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_build_pool)

    p = sub.add_parser("simulate", help="generate mixtures with annotations")
    p.add_argument("--model", action="append", help="model file; repeat for time and word models")
    p.add_argument("--pool", required=True, help="pool manifest JSONL")
    p.add_argument("--algorithm", choices=["random", "time", "word", "mix"], default="time")
    p.add_argument("--ratios", help="per-algorithm shares for mix, e.g. random=0.3,word=0.3,time=0.4")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-speakers", type=int, default=2, help="K for the random baseline")
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--gain-jitter", type=float, default=0.0, help="uniform gain jitter in dB (0 = off)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serialize", help="annotations -> t-SOT text")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("stats", help="annotations -> overlap statistics report")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--d", type=float, default=DEFAULT_D)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", help="compare a real and a simulated stats report")
    p.add_argument("real")
    p.add_argument("sim")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((x for x in rest if x in subparsers.choices), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    sub = subparsers.choices[command]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    # config values become defaults, so flags given on the command line win
    for a in sub._actions:
        if a.dest in cfg:
            a.required = False
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"overlapsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OverlapSimError, OSError, ValueError, KeyError) as exc:
        print(f"overlapsim: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
