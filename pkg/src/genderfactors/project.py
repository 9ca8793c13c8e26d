"""Training-data factor production: gender projection, subword replication,
annotation dropout, two-copy assembly, and the factor file formats.

A factor stream is always exactly as long as its token stream; every
operation here preserves that invariant.
"""

from dataclasses import dataclass
from random import Random
from typing import Iterable, Iterator, Sequence, TextIO

from sklearn.base import BaseEstimator, TransformerMixin

from genderfactors.align import AlignmentLinkSet
from genderfactors.corpus import GenderTag, SentencePair
from genderfactors.errors import ParseError, ValidationError
from genderfactors.util import sentence_rng

DEFAULT_BPE_MARKER = "@@"

DROPOUT_MODES = ("per_token", "span_count")


@dataclass(frozen=True)
class FactoredSentence:
    """Tokens plus one gender factor per token."""

    tokens: tuple[str, ...]
    factors: tuple[GenderTag, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.factors):
            raise ValidationError(
                f"factored sentence has {len(self.tokens)} tokens "
                f"but {len(self.factors)} factors"
            )

    def __len__(self) -> int:
        return len(self.tokens)


def project_gender(pair: SentencePair, links: AlignmentLinkSet) -> FactoredSentence:
    """Carry target genders over to the source tokens they align with.

    A source token keeps the gender its aligned targets agree on; it gets U
    when unaligned, aligned only to U targets, or aligned to conflicting
    genders.
    """
    if links.src_len != len(pair.source) or links.tgt_len != len(pair.target):
        raise ValidationError(
            f"pair {pair.pair_id}: links are {links.src_len}x{links.tgt_len} "
            f"but the pair is {len(pair.source)}x{len(pair.target)}"
        )
    aligned: list[set[GenderTag]] = [set() for _ in pair.source]
    for i, j in links.links:
        tag = pair.target.tags[j]
        if tag != GenderTag.U:
            aligned[i].add(tag)
    factors = tuple(
        next(iter(tags)) if len(tags) == 1 else GenderTag.U
        for tags in aligned
    )
    return FactoredSentence(tokens=pair.source, factors=factors)


def replicate_subword_factors(
    factored: FactoredSentence,
    segmented: Sequence[str],
    marker: str = DEFAULT_BPE_MARKER,
) -> FactoredSentence:
    """Spread each word's factor over its subword pieces.

    A piece ending in `marker` continues the current word. Joining the
    pieces (markers stripped) must reproduce the original tokens exactly.
    """
    factors: list[GenderTag] = []
    word_index = 0
    piece_buffer: list[str] = []
    for piece in segmented:
        piece_buffer.append(piece)
        if piece.endswith(marker):
            continue
        if word_index >= len(factored.tokens):
            raise ValidationError(
                f"segmentation yields more than {len(factored.tokens)} words"
            )
        rebuilt = "".join(
            p[: -len(marker)] if p.endswith(marker) else p for p in piece_buffer
        )
        expected = factored.tokens[word_index]
        if rebuilt != expected:
            raise ValidationError(
                f"segmentation mismatch at word {word_index}: "
                f"{rebuilt!r} != {expected!r}"
            )
        factors.extend([factored.factors[word_index]] * len(piece_buffer))
        piece_buffer.clear()
        word_index += 1
    if piece_buffer:
        raise ValidationError(
            f"segmentation ends with a dangling continuation at word {word_index}"
        )
    if word_index != len(factored.tokens):
        raise ValidationError(
            f"segmentation reconstructs {word_index} words, "
            f"expected {len(factored.tokens)}"
        )
    return FactoredSentence(tokens=tuple(segmented), factors=tuple(factors))


def dropout_factors(
    factored: FactoredSentence, mode: str, rate: float, rng: Random
) -> FactoredSentence:
    """Blank factors to U at random; never introduces a gendered tag."""
    if mode not in DROPOUT_MODES:
        raise ValidationError(f"unknown dropout mode {mode!r}")
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"dropout rate {rate} outside [0, 1]")
    n = len(factored)
    if mode == "per_token":
        factors = tuple(
            GenderTag.U if rng.random() < rate else tag
            for tag in factored.factors
        )
    else:
        limit = int(rate * n)
        k = rng.randint(0, limit)
        chosen = set(rng.sample(range(n), k))
        factors = tuple(
            GenderTag.U if idx in chosen else tag
            for idx, tag in enumerate(factored.factors)
        )
    return FactoredSentence(tokens=factored.tokens, factors=factors)


def build_training_set(corpus: Iterable[FactoredSentence]) -> Iterator[FactoredSentence]:
    """Two-copy assembly: the corpus with every factor forced to U, followed
    by the corpus as given. Token streams are untouched."""
    if not isinstance(corpus, (list, tuple)):
        corpus = list(corpus)
    for sentence in corpus:
        yield FactoredSentence(
            tokens=sentence.tokens, factors=(GenderTag.U,) * len(sentence)
        )
    yield from corpus


# -- estimator-style wrappers -------------------------------------------------

class GenderProjector(BaseEstimator, TransformerMixin):
    """Stateless transformer over (SentencePair, AlignmentLinkSet) items."""

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> list[FactoredSentence]:
        return [project_gender(pair, links) for pair, links in X]


class SubwordFactorReplicator(BaseEstimator, TransformerMixin):
    """Transformer over (FactoredSentence, segmented tokens) items."""

    def __init__(self, marker: str = DEFAULT_BPE_MARKER):
        self.marker = marker

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> list[FactoredSentence]:
        return [
            replicate_subword_factors(factored, segmented, marker=self.marker)
            for factored, segmented in X
        ]


class FactorDropout(BaseEstimator, TransformerMixin):
    """Seeded annotation dropout.

    In per_token mode each factor is blanked with probability `rate`; in
    span_count mode a uniform draw of k in 0..floor(rate * n) positions is
    blanked. Every sentence gets an RNG derived from (seed, position), so
    output does not depend on batching or thread count.
    """

    def __init__(self, mode: str = "span_count", rate: float = 1.0, seed: int = 0):
        self.mode = mode
        self.rate = rate
        self.seed = seed

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> list[FactoredSentence]:
        return [
            dropout_factors(sentence, self.mode, self.rate, sentence_rng(self.seed, idx))
            for idx, sentence in enumerate(X)
        ]


class TwoCopyExpander(BaseEstimator, TransformerMixin):
    """Transformer form of build_training_set."""

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> list[FactoredSentence]:
        return list(build_training_set(X))


# -- factor file formats ------------------------------------------------------

def format_factors_line(factored: FactoredSentence) -> str:
    return " ".join(tag.value for tag in factored.factors)


def format_inline_line(factored: FactoredSentence) -> str:
    return " ".join(
        f"{token}|{tag.value}"
        for token, tag in zip(factored.tokens, factored.factors)
    )


def write_factor_files(
    corpus: Iterable[FactoredSentence], tokens_stream: TextIO, factors_stream: TextIO
) -> None:
    """Two line-parallel files; factor line i matches token line i token-for-token."""
    for factored in corpus:
        tokens_stream.write(" ".join(factored.tokens) + "\n")
        factors_stream.write(format_factors_line(factored) + "\n")


def write_inline(corpus: Iterable[FactoredSentence], stream: TextIO) -> None:
    for factored in corpus:
        stream.write(format_inline_line(factored) + "\n")


def _parse_tag(text: str, line_number: int) -> GenderTag:
    try:
        return GenderTag(text)
    except ValueError:
        raise ParseError(
            f"line {line_number}: bad gender tag {text!r} (expected F, M, N or U)"
        ) from None


def read_factor_files(
    tokens_lines: Iterable[str], factors_lines: Iterable[str]
) -> Iterator[FactoredSentence]:
    sentinel = object()
    tokens_iter = iter(tokens_lines)
    factors_iter = iter(factors_lines)
    line_number = 0
    while True:
        line_number += 1
        token_line = next(tokens_iter, sentinel)
        factor_line = next(factors_iter, sentinel)
        if token_line is sentinel and factor_line is sentinel:
            return
        if token_line is sentinel or factor_line is sentinel:
            raise ParseError("token and factor files have different line counts")
        tokens = token_line.split()
        tags = factor_line.split()
        if len(tokens) != len(tags):
            raise ParseError(
                f"line {line_number}: {len(tokens)} tokens but {len(tags)} factors"
            )
        yield FactoredSentence(
            tokens=tuple(tokens),
            factors=tuple(_parse_tag(t, line_number) for t in tags),
        )


def read_inline(lines: Iterable[str]) -> Iterator[FactoredSentence]:
    for line_number, line in enumerate(lines, start=1):
        tokens: list[str] = []
        tags: list[GenderTag] = []
        for item in line.split():
            token, sep, tag = item.rpartition("|")
            if not sep:
                raise ParseError(
                    f"line {line_number}: {item!r} is not of the form token|TAG"
                )
            tokens.append(token)
            tags.append(_parse_tag(tag, line_number))
        yield FactoredSentence(tokens=tuple(tokens), factors=tuple(tags))
