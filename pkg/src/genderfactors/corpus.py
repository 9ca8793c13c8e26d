"""Corpus ingestion: CoNLL-U morphology, parallel text, and their validation.

Tokens are plain strings; a token is valid if it is non-empty and contains
no whitespace, which the parsers guarantee by construction. Sentence-level
types are immutable so they can be shared freely between workers.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, TextIO

from genderfactors.errors import ParseError, ValidationError


class GenderTag(str, Enum):
    """Grammatical gender carried by a token: feminine, masculine, neuter,
    or U when no gender information is available."""

    F = "F"
    M = "M"
    N = "N"
    U = "U"

    def __str__(self) -> str:
        return self.value


#: FEATS values understood by the CoNLL-U reader. Anything else (including
#: multi-valued analyses like "Fem,Masc") carries no usable signal -> U.
_GENDER_VALUES = {"Fem": GenderTag.F, "Masc": GenderTag.M, "Neut": GenderTag.N}

CONLLU_COLUMNS = 10


def check_tokens(tokens: Sequence[str], where: str = "sentence") -> None:
    for idx, token in enumerate(tokens):
        if not token or any(ch.isspace() for ch in token):
            raise ValidationError(
                f"{where}: token {idx} is empty or contains whitespace: {token!r}"
            )


@dataclass(frozen=True)
class TaggedSentence:
    """Target-language tokens with one gender tag per token and optional UPOS."""

    tokens: tuple[str, ...]
    tags: tuple[GenderTag, ...]
    pos: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValidationError(
                f"tagged sentence has {len(self.tokens)} tokens "
                f"but {len(self.tags)} tags"
            )
        if self.pos is not None and len(self.pos) != len(self.tokens):
            raise ValidationError(
                f"tagged sentence has {len(self.tokens)} tokens "
                f"but {len(self.pos)} POS labels"
            )

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class SentencePair:
    """One aligned corpus position: source tokens plus the tagged target."""

    source: tuple[str, ...]
    target: TaggedSentence
    pair_id: int

    def __post_init__(self):
        if not self.source or not len(self.target):
            raise ValidationError(f"pair {self.pair_id}: empty side")


def _gender_from_feats(feats: str) -> GenderTag:
    if feats == "_":
        return GenderTag.U
    for item in feats.split("|"):
        key, sep, value = item.partition("=")
        if sep and key == "Gender":  # layered keys like Gender[psor] do not match
            return _GENDER_VALUES.get(value, GenderTag.U)
    return GenderTag.U


def parse_conllu(lines: Iterable[str]) -> Iterator[TaggedSentence]:
    """Stream sentences out of a CoNLL-U document.

    Keeps FORM, UPOS, and the gender read from FEATS. Multiword-token range
    lines and empty-node lines are skipped; their component word lines are
    kept. Word IDs must count 1, 2, ... within each sentence.
    """
    tokens: list[str] = []
    tags: list[GenderTag] = []
    pos: list[str] = []
    expected_id = 1

    def flush() -> Optional[TaggedSentence]:
        nonlocal expected_id
        expected_id = 1
        if not tokens:
            return None
        sentence = TaggedSentence(tuple(tokens), tuple(tags), tuple(pos))
        tokens.clear()
        tags.clear()
        pos.clear()
        return sentence

    line_number = 0
    for raw in lines:
        line_number += 1
        line = raw.rstrip("\r\n")
        if not line:
            sentence = flush()
            if sentence is not None:
                yield sentence
            continue
        if line.startswith("#"):
            continue
        columns = line.split("\t")
        if len(columns) != CONLLU_COLUMNS:
            raise ParseError(
                f"line {line_number}: expected {CONLLU_COLUMNS} tab-separated "
                f"columns, got {len(columns)}"
            )
        token_id = columns[0]
        if "-" in token_id or "." in token_id:
            continue  # multiword range / empty node: not a surface token
        try:
            numeric_id = int(token_id)
        except ValueError:
            raise ParseError(f"line {line_number}: bad token ID {token_id!r}") from None
        if numeric_id != expected_id:
            raise ParseError(
                f"line {line_number}: non-contiguous token ID {numeric_id} "
                f"(expected {expected_id})"
            )
        expected_id += 1
        form = columns[1]
        if not form or any(ch.isspace() for ch in form):
            raise ParseError(f"line {line_number}: bad FORM {form!r}")
        tokens.append(form)
        tags.append(_gender_from_feats(columns[5]))
        pos.append(columns[3])
    sentence = flush()
    if sentence is not None:
        yield sentence


_FEATS_FOR_TAG = {tag: feats for feats, tag in _GENDER_VALUES.items()}


def write_conllu(sentences: Iterable[TaggedSentence], stream: TextIO) -> None:
    """Minimal inverse of parse_conllu: only FORM, UPOS, and Gender survive."""
    first = True
    for sentence in sentences:
        if not first:
            stream.write("\n")
        first = False
        upos = sentence.pos or ("_",) * len(sentence)
        for idx, (form, tag, pos) in enumerate(
            zip(sentence.tokens, sentence.tags, upos), start=1
        ):
            feats = f"Gender={_FEATS_FOR_TAG[tag]}" if tag != GenderTag.U else "_"
            stream.write(f"{idx}\t{form}\t_\t{pos}\t_\t{feats}\t_\t_\t_\t_\n")


class ParallelReader:
    """Single-pass reader over two line-parallel text files.

    Yields (source_tokens, target_tokens) per line pair, whitespace-split.
    Lines that are empty on either side are dropped and counted in
    `skipped`. A line-count mismatch raises once both inputs are drained,
    so the error can report both totals.
    """

    _SENTINEL = object()

    def __init__(self, source: Iterable[str], target: Iterable[str]):
        self._source = source
        self._target = target
        self.skipped = 0

    def __iter__(self) -> Iterator[tuple[list[str], list[str]]]:
        source_count = target_count = 0
        source_iter = iter(self._source)
        target_iter = iter(self._target)
        while True:
            src_line = next(source_iter, self._SENTINEL)
            tgt_line = next(target_iter, self._SENTINEL)
            if src_line is self._SENTINEL or tgt_line is self._SENTINEL:
                source_count += sum(1 for _ in source_iter) + (src_line is not self._SENTINEL)
                target_count += sum(1 for _ in target_iter) + (tgt_line is not self._SENTINEL)
                if source_count != target_count:
                    raise ValidationError(
                        f"parallel corpus line counts differ: "
                        f"source={source_count} target={target_count}"
                    )
                return
            source_count += 1
            target_count += 1
            src_tokens = src_line.split()
            tgt_tokens = tgt_line.split()
            if not src_tokens or not tgt_tokens:
                self.skipped += 1
                continue
            yield src_tokens, tgt_tokens


def zip_tagged(
    pairs: Iterable[tuple[Sequence[str], Sequence[str]]],
    tagged: Iterable[TaggedSentence],
) -> Iterator[SentencePair]:
    """Join parallel pairs with tagger output, insisting on identical targets.

    Comparison is case-sensitive and exact: tokenization drift between the
    tagger and the corpus must fail loudly, not silently misproject.
    """
    sentinel = object()
    pair_iter = iter(pairs)
    tagged_iter = iter(tagged)
    pair_id = 0
    while True:
        pair = next(pair_iter, sentinel)
        analysis = next(tagged_iter, sentinel)
        if pair is sentinel and analysis is sentinel:
            return
        if pair is sentinel or analysis is sentinel:
            short = "parallel corpus" if pair is sentinel else "tagged corpus"
            raise ValidationError(
                f"pair/tagged sentence counts differ: {short} ended at {pair_id}"
            )
        source, target = pair
        for idx in range(max(len(target), len(analysis))):
            corpus_token = target[idx] if idx < len(target) else None
            tagged_token = analysis.tokens[idx] if idx < len(analysis) else None
            if corpus_token != tagged_token:
                raise ValidationError(
                    f"pair {pair_id}, token {idx}: corpus {corpus_token!r} "
                    f"!= tagged {tagged_token!r}"
                )
        yield SentencePair(source=tuple(source), target=analysis, pair_id=pair_id)
        pair_id += 1
