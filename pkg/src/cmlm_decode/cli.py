"""Command-line surface: corpus generation, training, decoding, sweeps,
analyses, and trace rendering.

Every command accepts ``--config FILE`` (a flat JSON object whose keys are
the command's own option names; unknown keys are rejected) and
``--dump-config FILE`` to write back the effective settings, which
round-trips losslessly. Exit codes: 0 success, 1 usage error, 2 runtime
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import io as corpus_io
from . import metrics as metrics_mod
from . import render
from .scorers import CountScorer, ExternalScorer, PlantedMarkovScorer, Scorer, TrainingConfig, train_count_cmlm
from .types import DecodeConfig, HEURISTICS, THRESHOLD_HEURISTICS, UPDATE_STRATEGIES


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 for usage problems, not argparse's 2
        raise UsageError(message)


# -- scorer construction ----------------------------------------------------


def add_scorer_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scorer", default="planted",
                   help="planted | count:<model.json> | extern:<command line>")
    p.add_argument("--planted-seed", type=int, default=0, help="seed of the planted model family")
    p.add_argument("--src-vocab-size", type=int, default=10)
    p.add_argument("--tgt-vocab-size", type=int, default=6)
    p.add_argument("--topk", type=int, default=8, help="top-k truncation for external scorers")


def make_scorer(args: argparse.Namespace) -> Scorer:
    spec = args.scorer
    if spec == "planted":
        return PlantedMarkovScorer(
            source_vocab_size=args.src_vocab_size,
            target_vocab_size=args.tgt_vocab_size,
            seed=args.planted_seed,
        )
    if spec.startswith("count:"):
        return CountScorer.from_json(Path(spec[len("count:"):]).read_text(encoding="utf-8"))
    if spec.startswith("extern:"):
        return ExternalScorer(spec[len("extern:"):], topk=args.topk)
    raise UsageError(f"unknown scorer spec {spec!r}")


def add_decode_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--heuristic", choices=HEURISTICS, default="comb-thresh")
    p.add_argument("--param", type=float, default=0.5, help="T, K, or tau depending on the heuristic")
    p.add_argument("--length-beam", type=int, default=1)
    p.add_argument("--update", choices=UPDATE_STRATEGIES, default="update-masked-sub")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--fixed-t-decay", action="store_true",
                   help="use the decaying fixed-T re-mask schedule instead of ceil(N/T) per iteration")
    p.add_argument("--oracle-lengths", action="store_true",
                   help="pin hypothesis lengths to the reference lengths")
    p.add_argument("--smooth-bleu", action="store_true", help="add-one BLEU smoothing for tiny corpora")


def decode_config(args: argparse.Namespace, heuristic: str | None = None, param: float | None = None) -> DecodeConfig:
    h = heuristic if heuristic is not None else args.heuristic
    value = param if param is not None else args.param
    return DecodeConfig(
        update_strategy=args.update,
        heuristic=h,
        param=value,
        length_beam=args.length_beam,
        max_iterations=args.max_iterations,
        fixed_t_decay=args.fixed_t_decay,
    )


def parse_grid(text: str) -> list[float]:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        values.append(float(part))
    if not values:
        raise UsageError("empty hyperparameter grid")
    return values


def metrics_row(config: DecodeConfig, metrics: metrics_mod.CorpusMetrics) -> dict:
    return {
        "heuristic": config.heuristic,
        "param": config.param,
        "length_beam": config.length_beam,
        "update_strategy": config.update_strategy,
        "speedup": metrics.speedup,
        "bleu": "" if metrics.bleu is None else metrics.bleu,
        "total_tokens": metrics.total_tokens,
        "total_iterations": metrics.total_iterations,
    }


def out_dir(args: argparse.Namespace) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- commands ----------------------------------------------------------------


def _pool(model: PlantedMarkovScorer, args) -> tuple[tuple[int, ...], ...] | None:
    if not args.source_pool:
        return None
    return model.sample_source_pool(args.source_pool, (args.min_len, args.max_len))


def cmd_gen_corpus(args) -> int:
    model = PlantedMarkovScorer(
        source_vocab_size=args.src_vocab_size,
        target_vocab_size=args.tgt_vocab_size,
        seed=args.planted_seed,
    )
    examples = corpus_io.sample_corpus(
        model, args.seed, args.size, (args.min_len, args.max_len), sources=_pool(model, args)
    )
    corpus_io.write_corpus(args.out, examples)
    print(f"wrote {len(examples)} sentences to {args.out}")
    return 0


def cmd_train_scorer(args) -> int:
    model = PlantedMarkovScorer(
        source_vocab_size=args.src_vocab_size,
        target_vocab_size=args.tgt_vocab_size,
        seed=args.planted_seed,
    )
    config = TrainingConfig(
        num_examples=args.examples,
        seed=args.seed,
        source_length_range=(args.min_len, args.max_len),
        sources=_pool(model, args),
        alpha=args.alpha,
    )
    scorer = train_count_cmlm(config, model)
    Path(args.out).write_text(scorer.to_json(), encoding="utf-8")
    print(f"trained on {args.examples} examples, wrote {args.out}")
    return 0


def cmd_decode(args) -> int:
    scorer = make_scorer(args)
    try:
        corpus = corpus_io.read_corpus(args.corpus, require_refs=args.oracle_lengths)
        config = decode_config(args)
        decodes = metrics_mod.decode_corpus(
            scorer, corpus, config, oracle_lengths=args.oracle_lengths, jobs=args.jobs
        )
    finally:
        scorer.close()
    out = out_dir(args)
    with open(out / "hypotheses.txt", "w", encoding="utf-8") as fh:
        for d in decodes:
            fh.write(" ".join(map(str, d.sequence)) + "\n")
    corpus_io.write_traces(
        out / "traces.jsonl", (corpus_io.trace_record(d.example.src, d.beam) for d in decodes)
    )
    metrics = metrics_mod.corpus_metrics(decodes, smooth=args.smooth_bleu)
    corpus_io.write_metrics(out / "metrics.csv", [metrics_row(config, metrics)])
    bleu = "n/a" if metrics.bleu is None else f"{metrics.bleu:.2f}"
    print(f"decoded {len(decodes)} sentences: speedup {metrics.speedup:.2f}, BLEU {bleu}")
    return 0


def cmd_sweep(args) -> int:
    scorer = make_scorer(args)
    grid = parse_grid(args.grid)
    rows = []
    failures = []
    try:
        corpus = corpus_io.read_corpus(args.corpus, require_refs=args.oracle_lengths)
        for value in grid:
            try:
                config = decode_config(args, param=value)
                decodes = metrics_mod.decode_corpus(
                    scorer, corpus, config, oracle_lengths=args.oracle_lengths, jobs=args.jobs
                )
                metrics = metrics_mod.corpus_metrics(decodes, smooth=args.smooth_bleu)
            except Exception as exc:
                failures.append((value, exc))
                print(f"grid point {value} failed: {exc}", file=sys.stderr)
                continue
            rows.append(metrics_row(config, metrics))
    finally:
        scorer.close()
    rows.sort(key=lambda r: r["speedup"])
    out = out_dir(args)
    corpus_io.write_metrics(out / "metrics.csv", rows)
    points = [(r["speedup"], r["bleu"], r["heuristic"]) for r in rows if r["bleu"] != ""]
    if points:
        (out / "curve.svg").write_text(
            render.render_svg_scatter(points, title=f"{args.heuristic} speed-quality"), encoding="utf-8"
        )
    print(f"swept {len(rows)} grid points -> {out / 'metrics.csv'}")
    if failures and not rows:
        raise RuntimeError(f"all {len(failures)} grid points failed")
    return 0


def cmd_compare_updates(args) -> int:
    scorer = make_scorer(args)
    beams = [int(b) for b in parse_grid(args.beams)]
    rows = []
    try:
        corpus = corpus_io.read_corpus(args.corpus, require_refs=True)
        for strategy in UPDATE_STRATEGIES:
            for beam in beams:
                config = DecodeConfig(
                    update_strategy=strategy,
                    heuristic="fixed-T",
                    param=args.iterations,
                    length_beam=beam,
                    fixed_t_decay=args.fixed_t_decay,
                )
                decodes = metrics_mod.decode_corpus(scorer, corpus, config, jobs=args.jobs)
                metrics = metrics_mod.corpus_metrics(decodes, smooth=args.smooth_bleu)
                rows.append({"strategy": strategy, "length_beam": beam, "bleu": metrics.bleu})
    finally:
        scorer.close()
    out = out_dir(args)
    with open(out / "compare_updates.csv", "w", encoding="utf-8") as fh:
        fh.write("strategy,length_beam,bleu\n")
        for row in rows:
            fh.write(f"{row['strategy']},{row['length_beam']},{row['bleu']}\n")
    print(f"wrote {len(rows)} rows to {out / 'compare_updates.csv'}")
    return 0


def cmd_analyze_iters(args) -> int:
    scorer = make_scorer(args)
    try:
        corpus = corpus_io.read_corpus(args.corpus, require_refs=args.oracle_lengths)
        stats = metrics_mod.iterations_vs_length(
            scorer,
            corpus,
            decode_config(args),
            oracle_lengths=args.oracle_lengths,
            bucket_width=args.bucket_width,
            jobs=args.jobs,
        )
    finally:
        scorer.close()
    out = out_dir(args)
    with open(out / "iterations_by_length.csv", "w", encoding="utf-8") as fh:
        fh.write("bucket_lo,bucket_hi,count,mean_iterations,std_iterations\n")
        for s in stats:
            fh.write(f"{s.lo},{s.hi},{s.count},{s.mean_iterations},{s.std_iterations}\n")
    print(f"wrote {len(stats)} buckets to {out / 'iterations_by_length.csv'}")
    return 0


def cmd_bleu_curve(args) -> int:
    scorer = make_scorer(args)
    try:
        corpus = corpus_io.read_corpus(args.corpus, require_refs=True)
        curve = metrics_mod.bleu_over_iterations(
            scorer,
            corpus,
            decode_config(args),
            oracle_lengths=args.oracle_lengths,
            jobs=args.jobs,
            smooth=args.smooth_bleu,
        )
    finally:
        scorer.close()
    payload = {
        "heuristic": curve.heuristic,
        "param": curve.param,
        "tokens_per_iteration": curve.tokens_per_iteration,
        "bleu": list(curve.bleu),
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"curve of {len(curve.bleu)} iterations -> {args.out}")
    return 0


def cmd_tune_tau(args) -> int:
    if args.heuristic not in THRESHOLD_HEURISTICS:
        raise UsageError("tune-tau applies to the thresholding heuristics only")
    scorer = make_scorer(args)
    try:
        dev = corpus_io.read_corpus(args.dev, require_refs=False)
        base = decode_config(args, param=0.5)
        tuning = metrics_mod.tune_tau(
            scorer, dev, args.heuristic, args.target, args.tolerance, config=base, jobs=args.jobs
        )
        result = {
            "tau": tuning.tau,
            "dev_speedup": tuning.dev_speedup,
            "target": tuning.target,
            "achieved": tuning.achieved,
            "rounds": tuning.rounds,
        }
        if args.test:
            test = corpus_io.read_corpus(args.test, require_refs=False)
            cfg = replace(base, param=tuning.tau)
            test_speedup = metrics_mod.corpus_metrics(
                metrics_mod.decode_corpus(scorer, test, cfg, jobs=args.jobs)
            ).speedup
            result["test_speedup"] = test_speedup
            result["dev_test_gap"] = abs(test_speedup - tuning.dev_speedup)
    finally:
        scorer.close()
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    if not tuning.achieved:
        print("warning: target speedup not attainable; reporting closest achievable", file=sys.stderr)
    print(json.dumps(result))
    return 0


def cmd_render_trace(args) -> int:
    records = corpus_io.read_traces(args.traces)
    if not 0 <= args.index < len(records):
        raise RuntimeError(f"trace index {args.index} out of range (file has {len(records)} traces)")
    record = records[args.index]
    text = render.render_html(record) if args.format == "html" else render.render_text(record)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"rendered trace {args.index} -> {args.out}")
    else:
        print(text)
    return 0


# -- parser / config plumbing --------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="cmlm-decode", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    commands: dict[str, argparse.ArgumentParser] = {}

    def command(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.error = parser.error  # type: ignore[method-assign]
        p.add_argument("--config", default=None, help="JSON config file with option defaults")
        p.add_argument("--dump-config", default=None, help="write the effective settings to this file")
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        commands[name] = p
        return p

    p = command("gen-corpus", cmd_gen_corpus, "sample a TSV corpus from the planted model")
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--src-vocab-size", type=int, default=10)
    p.add_argument("--tgt-vocab-size", type=int, default=6)
    p.add_argument("--planted-seed", type=int, default=0)
    p.add_argument("--source-pool", type=int, default=0,
                   help="draw sources from a fixed pool of this size (0 = fresh sources)")
    p.add_argument("--out", required=False, default=None)

    p = command("train-scorer", cmd_train_scorer, "fit the count model on planted samples")
    p.add_argument("--examples", type=int, default=10000)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--src-vocab-size", type=int, default=10)
    p.add_argument("--tgt-vocab-size", type=int, default=6)
    p.add_argument("--planted-seed", type=int, default=0)
    p.add_argument("--source-pool", type=int, default=0,
                   help="draw training sources from the same fixed pool gen-corpus uses")
    p.add_argument("--out", required=False, default=None)

    def decoding_command(name, func, help_text):
        p = command(name, func, help_text)
        add_scorer_options(p)
        add_decode_options(p)
        p.add_argument("--corpus", default=None)
        p.add_argument("--jobs", type=int, default=1)
        return p

    p = decoding_command("decode", cmd_decode, "decode a corpus and write hypotheses/traces/metrics")
    p.add_argument("--out-dir", default=None)

    p = decoding_command("sweep", cmd_sweep, "speed-quality curve over a hyperparameter grid")
    p.add_argument("--grid", default=None, help="comma-separated hyperparameter values")
    p.add_argument("--out-dir", default=None)

    p = decoding_command("compare-updates", cmd_compare_updates, "BLEU vs length beam per update strategy")
    p.add_argument("--iterations", type=int, default=10, help="fixed-T iteration limit")
    p.add_argument("--beams", default="1,2,3,5", help="comma-separated length-beam sizes")
    p.add_argument("--out-dir", default=None)

    p = decoding_command("analyze-iters", cmd_analyze_iters, "iteration counts by sentence length")
    p.add_argument("--bucket-width", type=int, default=5)
    p.add_argument("--out-dir", default=None)

    p = decoding_command("bleu-curve", cmd_bleu_curve, "BLEU of greedy completions after each iteration")
    p.add_argument("--out", default=None)

    p = decoding_command("tune-tau", cmd_tune_tau, "bisect tau for a target dev speedup")
    p.add_argument("--dev", default=None, help="development corpus (TSV)")
    p.add_argument("--test", default=None, help="optional test corpus for the dev/test gap")
    p.add_argument("--target", type=float, default=2.0)
    p.add_argument("--tolerance", type=float, default=0.25)
    p.add_argument("--out", default=None)

    p = command("render-trace", cmd_render_trace, "render one decode trace as text or HTML")
    p.add_argument("--traces", default=None, help="traces.jsonl produced by decode")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--format", choices=("text", "html"), default="text")
    p.add_argument("--out", default=None)

    return parser, commands


#: options every command owns but which never belong in a config file
_CONFIG_EXCLUDED = {"config", "dump_config", "func", "command"}

#: per-command options that must end up set (by flag or config file)
_REQUIRED = {
    "gen-corpus": ("out",),
    "train-scorer": ("out",),
    "decode": ("corpus", "out_dir"),
    "sweep": ("corpus", "grid", "out_dir"),
    "compare-updates": ("corpus", "out_dir"),
    "analyze-iters": ("corpus", "out_dir"),
    "bleu-curve": ("corpus", "out"),
    "tune-tau": ("dev",),
    "render-trace": ("traces",),
}


def _command_dests(sub: argparse.ArgumentParser) -> list[str]:
    return [
        a.dest for a in sub._actions
        if a.dest not in _CONFIG_EXCLUDED and not isinstance(a, argparse._HelpAction)
    ]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (see --help)")
        if args.config:
            sub = commands[args.command]
            dests = _command_dests(sub)
            try:
                loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise UsageError(f"config file not found: {args.config}")
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {args.config} is not valid JSON: {exc}")
            if not isinstance(loaded, dict):
                raise UsageError("config file must hold a JSON object")
            unknown = sorted(set(loaded) - set(dests))
            if unknown:
                raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
            sub.set_defaults(**loaded)
            args = parser.parse_args(argv)
        for dest in _REQUIRED.get(args.command, ()):
            if getattr(args, dest) is None:
                raise UsageError(f"--{dest.replace('_', '-')} is required for {args.command}")
        if args.dump_config:
            dump = {d: getattr(args, d) for d in _command_dests(commands[args.command])}
            Path(args.dump_config).write_text(json.dumps(dump, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
