"""Command-line entry point.

Subcommands: align, annotate, coref-annotate, evaluate, dropout. Flags win
over config-file values, which win over built-in defaults; the worker count
additionally honours the GENDERFACTORS_THREADS environment variable. Every
failure exits nonzero after printing a single "error: ..." line to stderr.
"""

import argparse
import configparser
import contextlib
import os
import sys
from typing import Iterator, Optional

from genderfactors.align import (
    AlignmentLinkSet,
    DiagonalAligner,
    HEURISTICS,
    format_pharaoh_line,
    parse_pharaoh_line,
    save_model_bundle,
    symmetrize,
)
from genderfactors.coref import default_lexicon, infer_annotations, load_lexicon, parse_clusters
from genderfactors.corpus import GenderTag, ParallelReader, parse_conllu, zip_tagged
from genderfactors.errors import GenderFactorsError, ValidationError
from genderfactors.project import (
    DEFAULT_BPE_MARKER,
    DROPOUT_MODES,
    FactoredSentence,
    dropout_factors,
    format_factors_line,
    format_inline_line,
    project_gender,
    read_inline,
    replicate_subword_factors,
)
from genderfactors.util import derive_seed, ordered_map, sentence_rng
from genderfactors.winomt import (
    REPORT_FORMATS,
    aggregate,
    judge,
    load_winomt_tsv,
    render_report,
    write_judgments_tsv,
)

THREADS_ENV_VAR = "GENDERFACTORS_THREADS"

_UNSET = object()

_CONFIG_SCHEMA = {
    "global": {"seed": int, "threads": int, "verbosity": int},
    "aligner": {
        "iterations": int,
        "diagonal_tension": float,
        "null_prob": float,
        "optimize_tension": bool,
        "heuristic": str,
    },
    "projection": {"bpe_marker": str, "inline": bool, "two_copy": bool},
    "dropout": {"mode": str, "rate": float},
    "coref": {"lexicon": str, "inline": bool},
    "eval": {"format": str},
}

_BOOL_VALUES = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}


def _parse_config_value(section, key, text, kind):
    try:
        if kind is bool:
            return _BOOL_VALUES[text.strip().lower()]
        return kind(text)
    except (KeyError, ValueError):
        raise ValidationError(
            f"config [{section}] {key}: cannot read {text!r} as {kind.__name__}"
        ) from None


def load_config(path) -> dict:
    """Read the INI-style pipeline config, rejecting unknown sections/keys."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as stream:
            parser.read_file(stream)
    except configparser.Error as error:
        raise ValidationError(f"config {path}: {error}") from None
    config: dict = {}
    for section in parser.sections():
        schema = _CONFIG_SCHEMA.get(section)
        if schema is None:
            raise ValidationError(f"config {path}: unknown section [{section}]")
        for key, text in parser.items(section):
            if key not in schema:
                raise ValidationError(
                    f"config {path}: unknown key {key!r} in section [{section}]"
                )
            config.setdefault(section, {})[key] = _parse_config_value(
                section, key, text, schema[key]
            )
    return config


class Settings:
    """Flag > config > default resolution for one command invocation."""

    def __init__(self, args):
        self.args = args
        self.config = load_config(args.config) if args.config else {}

    def get(self, flag: str, section: str, key: str, default):
        value = getattr(self.args, flag, None)
        if value is not None:
            return value
        return self.config.get(section, {}).get(key, default)

    @property
    def threads(self) -> int:
        if self.args.threads is not None:
            return self.args.threads
        env = os.environ.get(THREADS_ENV_VAR)
        if env is not None:
            try:
                return int(env)
            except ValueError:
                raise ValidationError(
                    f"{THREADS_ENV_VAR} must be an integer, got {env!r}"
                ) from None
        return self.config.get("global", {}).get("threads", 1)

    @property
    def seed(self) -> int:
        if self.args.seed is not None:
            return self.args.seed
        return self.config.get("global", {}).get("seed", 0)

    @property
    def verbosity(self) -> int:
        if self.args.verbose:
            return self.args.verbose
        return self.config.get("global", {}).get("verbosity", 0)

    def progress(self, message: str) -> None:
        if self.verbosity > 0:
            print(message, file=sys.stderr)


def _require_files(*paths) -> None:
    for path in paths:
        if path is not None and not os.path.exists(path):
            raise ValidationError(f"input file not found: {path}")


def _report_skips(reader: ParallelReader) -> None:
    if reader.skipped:
        print(
            f"skipped {reader.skipped} pair(s) with an empty side",
            file=sys.stderr,
        )


def _zip_columns(columns: list[tuple[str, Iterator]]) -> Iterator[tuple]:
    """zip() that fails with the offending input's name on length mismatch."""
    sentinel = object()
    iterators = [(name, iter(item)) for name, item in columns]
    row_number = 0
    while True:
        row = [(name, next(it, sentinel)) for name, it in iterators]
        ended = [name for name, value in row if value is sentinel]
        if len(ended) == len(row):
            return
        if ended:
            raise ValidationError(
                f"{', '.join(ended)} ended after {row_number} line(s) "
                f"but other inputs continue"
            )
        row_number += 1
        yield tuple(value for _, value in row)


# -- align --------------------------------------------------------------------

def cmd_align(args) -> int:
    settings = Settings(args)
    _require_files(args.source, args.target, args.config)
    aligner_params = dict(
        iterations=settings.get("iterations", "aligner", "iterations", 5),
        diagonal_tension=settings.get(
            "diagonal_tension", "aligner", "diagonal_tension", 4.0
        ),
        null_prob=settings.get("null_prob", "aligner", "null_prob", 0.08),
        optimize_tension=settings.get(
            "optimize_tension", "aligner", "optimize_tension", True
        ),
        threads=settings.threads,
    )
    heuristic = settings.get("heuristic", "aligner", "heuristic", "grow-diag-final-and")
    if heuristic not in HEURISTICS:
        raise ValidationError(f"unknown symmetrization heuristic {heuristic!r}")

    def pairs(swap=False, report_skips=False):
        with open(args.source, encoding="utf-8") as src, \
                open(args.target, encoding="utf-8") as tgt:
            reader = ParallelReader(src, tgt)
            for source, target in reader:
                yield (target, source) if swap else (source, target)
            if report_skips:
                _report_skips(reader)

    forward = DiagonalAligner(**aligner_params).fit(pairs(report_skips=True))
    backward = DiagonalAligner(**aligner_params).fit(pairs(swap=True))
    if settings.verbosity > 1:
        for name, model in (("forward", forward), ("backward", backward)):
            for it, ll in enumerate(model.log_likelihoods_, start=1):
                settings.progress(f"{name} iteration {it}: log-likelihood {ll:.4f}")

    aligned = 0
    with open(args.output, "w", encoding="utf-8") as sink:
        for fwd, bwd in zip(
            forward.iter_predict(pairs()), backward.iter_predict(pairs(swap=True))
        ):
            combined = symmetrize(fwd, bwd, heuristic)
            sink.write(format_pharaoh_line(combined.links) + "\n")
            aligned += 1
    settings.progress(f"aligned {aligned} pair(s) with {heuristic}")

    if args.model_out:
        save_model_bundle(args.model_out, forward, backward)
        settings.progress(f"wrote model dump to {args.model_out}")
    return 0


# -- annotate -----------------------------------------------------------------

def _read_alignment_lines(path) -> Iterator[frozenset]:
    with open(path, encoding="utf-8") as stream:
        for line_number, line in enumerate(stream, start=1):
            yield parse_pharaoh_line(line.rstrip("\n"), line_number)


def _open_optional(stack, path):
    if path is None:
        return None
    return stack.enter_context(open(path, encoding="utf-8"))


def cmd_annotate(args) -> int:
    settings = Settings(args)
    inline = settings.get("inline", "projection", "inline", False)
    two_copy = settings.get("two_copy", "projection", "two_copy", False)
    marker = settings.get("bpe_marker", "projection", "bpe_marker", DEFAULT_BPE_MARKER)
    dropout_mode = settings.get("dropout_mode", "dropout", "mode", "none")
    dropout_rate = settings.get("dropout_rate", "dropout", "rate", 1.0)
    if dropout_mode != "none" and dropout_mode not in DROPOUT_MODES:
        raise ValidationError(f"unknown dropout mode {dropout_mode!r}")
    dropout_seed = derive_seed(settings.seed, "dropout")

    _require_files(
        args.source, args.target, args.target_conllu, args.alignments,
        args.segmented_source, args.config,
    )
    if inline:
        if not args.output or args.out_tokens or args.out_factors:
            raise ValidationError("--inline writes one file; use --output alone")
    else:
        if not (args.out_tokens and args.out_factors) or args.output:
            raise ValidationError(
                "two-file output needs --out-tokens and --out-factors"
            )

    def annotated(force_unavailable: bool, report_skips: bool) -> Iterator[FactoredSentence]:
        with contextlib.ExitStack() as stack:
            src = stack.enter_context(open(args.source, encoding="utf-8"))
            tgt = stack.enter_context(open(args.target, encoding="utf-8"))
            conllu = stack.enter_context(open(args.target_conllu, encoding="utf-8"))
            segmented = _open_optional(stack, args.segmented_source)
            reader = ParallelReader(src, tgt)
            pairs = zip_tagged(reader, parse_conllu(conllu))
            columns = [("parallel corpus", pairs),
                       ("alignment file", _read_alignment_lines(args.alignments))]
            if segmented is not None:
                columns.append(("segmented source", segmented))

            def factorize(item):
                pair, raw_links, *rest = item
                try:
                    links = AlignmentLinkSet(
                        raw_links, src_len=len(pair.source), tgt_len=len(pair.target)
                    )
                except ValidationError as error:
                    raise ValidationError(f"pair {pair.pair_id}: {error}") from None
                factored = project_gender(pair, links)
                if rest:
                    factored = replicate_subword_factors(
                        factored, rest[0].split(), marker=marker
                    )
                if force_unavailable:
                    return FactoredSentence(
                        factored.tokens, (GenderTag.U,) * len(factored)
                    )
                if dropout_mode != "none":
                    factored = dropout_factors(
                        factored, dropout_mode, dropout_rate,
                        sentence_rng(dropout_seed, pair.pair_id),
                    )
                return factored

            yield from ordered_map(
                factorize, _zip_columns(columns), threads=settings.threads
            )
            if report_skips:
                _report_skips(reader)

    passes = [True, False] if two_copy else [False]
    written = 0
    with contextlib.ExitStack() as stack:
        if inline:
            sink = stack.enter_context(open(args.output, "w", encoding="utf-8"))
            for force in passes:
                for factored in annotated(force, report_skips=not force):
                    sink.write(format_inline_line(factored) + "\n")
                    written += 1
        else:
            tokens_sink = stack.enter_context(open(args.out_tokens, "w", encoding="utf-8"))
            factors_sink = stack.enter_context(open(args.out_factors, "w", encoding="utf-8"))
            for force in passes:
                for factored in annotated(force, report_skips=not force):
                    tokens_sink.write(" ".join(factored.tokens) + "\n")
                    factors_sink.write(format_factors_line(factored) + "\n")
                    written += 1
    settings.progress(f"wrote {written} annotated sentence(s)")
    return 0


# -- coref-annotate -----------------------------------------------------------

def cmd_coref_annotate(args) -> int:
    settings = Settings(args)
    inline = settings.get("inline", "coref", "inline", False)
    lexicon_path = settings.get("lexicon", "coref", "lexicon", None)
    _require_files(args.input, args.clusters, lexicon_path, args.config)

    lexicon = default_lexicon()
    if lexicon_path:
        with open(lexicon_path, encoding="utf-8") as stream:
            lexicon.update(load_lexicon(stream))

    def annotate(item):
        line_number, sentence_line, cluster_line = item
        tokens = sentence_line.split()
        try:
            clusters = parse_clusters(cluster_line)
            return infer_annotations(tokens, clusters, lexicon)
        except GenderFactorsError as error:
            raise type(error)(f"line {line_number}: {error}") from None

    with open(args.input, encoding="utf-8") as sentences, \
            open(args.clusters, encoding="utf-8") as clusters, \
            open(args.output, "w", encoding="utf-8") as sink:
        numbered = (
            (idx, sent, clus)
            for idx, (sent, clus) in enumerate(
                _zip_columns([("sentence file", sentences),
                              ("cluster file", clusters)]),
                start=1,
            )
        )
        written = 0
        for factored in ordered_map(annotate, numbered, threads=settings.threads):
            if inline:
                sink.write(format_inline_line(factored) + "\n")
            else:
                sink.write(format_factors_line(factored) + "\n")
            written += 1
    settings.progress(f"annotated {written} sentence(s)")
    return 0


# -- evaluate -------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    settings = Settings(args)
    fmt = settings.get("format", "eval", "format", "text")
    if fmt not in REPORT_FORMATS:
        raise ValidationError(f"unknown report format {fmt!r}")
    _require_files(
        args.instances, args.translations, args.translations_conllu,
        args.alignments, args.config,
    )

    with open(args.instances, encoding="utf-8") as stream:
        instances = list(load_winomt_tsv(stream))

    def judge_item(item):
        instance, trans_line, tagged, raw_links = item
        tokens = trans_line.split()
        if tuple(tokens) != tagged.tokens:
            raise ValidationError(
                f"instance {instance.id}: translation does not match its "
                f"morphological analysis"
            )
        try:
            links = AlignmentLinkSet(
                raw_links, src_len=len(instance.tokens), tgt_len=len(tagged)
            )
        except ValidationError as error:
            raise ValidationError(f"instance {instance.id}: {error}") from None
        return judge(instance, tagged, links)

    with open(args.translations, encoding="utf-8") as translations, \
            open(args.translations_conllu, encoding="utf-8") as conllu:
        rows = _zip_columns([
            ("instance file", iter(instances)),
            ("translations", translations),
            ("translation analyses", parse_conllu(conllu)),
            ("alignment file", _read_alignment_lines(args.alignments)),
        ])
        judgments = list(ordered_map(judge_item, rows, threads=settings.threads))

    settings.progress(f"judged {len(judgments)} instance(s)")
    report = aggregate(instances, judgments)
    rendered = render_report(report, fmt)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as sink:
            sink.write(rendered + "\n")
    else:
        print(rendered)
    if args.details:
        with open(args.details, "w", encoding="utf-8") as sink:
            write_judgments_tsv(instances, judgments, sink)
    return 0


# -- dropout --------------------------------------------------------------------

def cmd_dropout(args) -> int:
    settings = Settings(args)
    mode = settings.get("dropout_mode", "dropout", "mode", "span_count")
    rate = settings.get("dropout_rate", "dropout", "rate", 1.0)
    seed = derive_seed(settings.seed, "dropout")
    written = 0
    if args.inline:
        if not args.input:
            raise ValidationError("--inline needs --input FILE")
        _require_files(args.input, args.config)
        with open(args.input, encoding="utf-8") as stream, \
                open(args.output, "w", encoding="utf-8") as sink:
            for idx, fs in enumerate(read_inline(stream)):
                dropped = dropout_factors(fs, mode, rate, sentence_rng(seed, idx))
                sink.write(format_inline_line(dropped) + "\n")
                written += 1
    else:
        if not args.factors:
            raise ValidationError("factor-file mode needs --factors FILE")
        _require_files(args.factors, args.config)
        with open(args.factors, encoding="utf-8") as stream, \
                open(args.output, "w", encoding="utf-8") as sink:
            for idx, line in enumerate(stream):
                tags = tuple(
                    GenderTag(t) if t in GenderTag.__members__ else _bad_tag(idx + 1, t)
                    for t in line.split()
                )
                factored = FactoredSentence(tokens=("_",) * len(tags), factors=tags)
                dropped = dropout_factors(factored, mode, rate, sentence_rng(seed, idx))
                sink.write(format_factors_line(dropped) + "\n")
                written += 1
    settings.progress(f"processed {written} sentence(s)")
    return 0


def _bad_tag(line_number, text):
    raise ValidationError(f"line {line_number}: bad gender tag {text!r}")


# -- parser ---------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument("--config", help="INI-style pipeline config file")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (or ${THREADS_ENV_VAR})")
    parser.add_argument("--seed", type=int, default=None,
                        help="root seed for all randomness")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="print progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genderfactors",
        description="Gender annotation tooling for machine translation corpora",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    align = commands.add_parser(
        "align", help="train a word aligner and write symmetrized alignments"
    )
    align.add_argument("--source", required=True)
    align.add_argument("--target", required=True)
    align.add_argument("--output", required=True, help="Pharaoh alignment file")
    align.add_argument("--model-out", help="JSON dump of both directional models")
    align.add_argument("--iterations", type=int, default=None)
    align.add_argument("--diagonal-tension", type=float, default=None)
    align.add_argument("--null-prob", type=float, default=None)
    align.add_argument("--optimize-tension", action=argparse.BooleanOptionalAction,
                       default=None)
    align.add_argument("--heuristic", choices=HEURISTICS, default=None)
    _add_common(align)
    align.set_defaults(handler=cmd_align)

    annotate = commands.add_parser(
        "annotate", help="project target genders onto source factor files"
    )
    annotate.add_argument("--source", required=True)
    annotate.add_argument("--target", required=True)
    annotate.add_argument("--target-conllu", required=True)
    annotate.add_argument("--alignments", required=True)
    annotate.add_argument("--segmented-source",
                          help="subword-segmented source to replicate factors over")
    annotate.add_argument("--bpe-marker", default=None)
    annotate.add_argument("--out-tokens")
    annotate.add_argument("--out-factors")
    annotate.add_argument("--output", help="single output file for --inline")
    annotate.add_argument("--inline", action=argparse.BooleanOptionalAction,
                          default=None, help="write token|TAG instead of two files")
    annotate.add_argument("--two-copy", action=argparse.BooleanOptionalAction,
                          default=None, help="prepend an all-U copy of the corpus")
    annotate.add_argument("--dropout-mode", choices=("none",) + DROPOUT_MODES,
                          default=None)
    annotate.add_argument("--dropout-rate", type=float, default=None)
    _add_common(annotate)
    annotate.set_defaults(handler=cmd_annotate)

    coref = commands.add_parser(
        "coref-annotate", help="annotate sentences from coreference clusters"
    )
    coref.add_argument("--input", required=True, help="tokenized sentences, one per line")
    coref.add_argument("--clusters", required=True, help="JSONL cluster documents")
    coref.add_argument("--lexicon", default=None, help="extra pronoun lexicon (TSV)")
    coref.add_argument("--output", required=True)
    coref.add_argument("--inline", action=argparse.BooleanOptionalAction, default=None)
    _add_common(coref)
    coref.set_defaults(handler=cmd_coref_annotate)

    evaluate = commands.add_parser(
        "evaluate", help="score translations against a challenge set"
    )
    evaluate.add_argument("--instances", required=True)
    evaluate.add_argument("--translations", required=True)
    evaluate.add_argument("--translations-conllu", required=True)
    evaluate.add_argument("--alignments", required=True)
    evaluate.add_argument("--format", choices=REPORT_FORMATS, default=None)
    evaluate.add_argument("--output", help="write the report here instead of stdout")
    evaluate.add_argument("--details", help="per-instance judgment TSV")
    _add_common(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    dropout = commands.add_parser(
        "dropout", help="apply annotation dropout to an existing factor file"
    )
    dropout.add_argument("--factors", help="factor file (one tag line per sentence)")
    dropout.add_argument("--input", help="inline token|TAG file (with --inline)")
    dropout.add_argument("--output", required=True)
    dropout.add_argument("--inline", action=argparse.BooleanOptionalAction, default=None)
    dropout.add_argument("--dropout-mode", choices=DROPOUT_MODES, default=None)
    dropout.add_argument("--dropout-rate", type=float, default=None)
    _add_common(dropout)
    dropout.set_defaults(handler=cmd_dropout)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        return args.handler(args)
    except (GenderFactorsError, OSError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
