"""Inference-time annotation from coreference clusters.

Gender is read off single-token pronoun mentions and propagated to every
token of every mention in the same cluster. Clusters without a gendered
pronoun, clusters whose pronouns disagree, and tokens claimed by clusters
of different genders all fall back to U.
"""

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from genderfactors.corpus import GenderTag
from genderfactors.errors import ParseError, ValidationError
from genderfactors.project import FactoredSentence

_DEFAULT_PRONOUNS = {
    "he": GenderTag.M,
    "him": GenderTag.M,
    "his": GenderTag.M,
    "himself": GenderTag.M,
    "she": GenderTag.F,
    "her": GenderTag.F,
    "hers": GenderTag.F,
    "herself": GenderTag.F,
}


@dataclass(frozen=True)
class CorefClusters:
    """Resolver output for one sentence: its tokens plus mention clusters.

    Spans are (start, end) token indices with end exclusive.
    """

    tokens: tuple[str, ...]
    clusters: tuple[tuple[tuple[int, int], ...], ...]


def parse_clusters(document: str) -> CorefClusters:
    """Parse one {"tokens": [...], "clusters": [[[start, end], ...], ...]}
    JSON document and validate every span against the token list."""
    try:
        payload = json.loads(document)
    except json.JSONDecodeError as error:
        raise ParseError(f"cluster document is not valid JSON: {error}") from None
    if not isinstance(payload, dict) or "tokens" not in payload or "clusters" not in payload:
        raise ParseError('cluster document needs "tokens" and "clusters" keys')
    tokens = payload["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ParseError('cluster document: "tokens" must be a list of strings')
    clusters = []
    for c_idx, cluster in enumerate(payload["clusters"]):
        spans = []
        for s_idx, span in enumerate(cluster):
            if (
                not isinstance(span, list)
                or len(span) != 2
                or not all(isinstance(x, int) for x in span)
            ):
                raise ParseError(
                    f"cluster {c_idx}, span {s_idx}: expected [start, end]"
                )
            start, end = span
            if not 0 <= start < end <= len(tokens):
                raise ParseError(
                    f"cluster {c_idx}, span {s_idx}: [{start}, {end}) invalid "
                    f"for a {len(tokens)}-token sentence"
                )
            spans.append((start, end))
        clusters.append(tuple(spans))
    return CorefClusters(tokens=tuple(tokens), clusters=tuple(clusters))


def default_lexicon() -> dict[str, GenderTag]:
    """English third-person gendered pronouns, case-folded. The mapping is
    binary by design; it cannot carry N or U values."""
    return dict(_DEFAULT_PRONOUNS)


def load_lexicon(lines: Iterable[str]) -> dict[str, GenderTag]:
    """Read "surface<TAB>tag" lines; tags must be F or M. Keys are
    case-folded. Merge over default_lexicon() to override defaults."""
    lexicon: dict[str, GenderTag] = {}
    for line_number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        surface, sep, tag_text = line.partition("\t")
        if not sep or not surface or not tag_text:
            raise ParseError(
                f"lexicon line {line_number}: expected 'surface<TAB>tag', got {line!r}"
            )
        if tag_text not in ("F", "M"):
            raise ParseError(
                f"lexicon line {line_number}: tag must be F or M, got {tag_text!r}"
            )
        lexicon[surface.casefold()] = GenderTag(tag_text)
    return lexicon


def _cluster_gender(
    tokens: Sequence[str],
    cluster: Sequence[tuple[int, int]],
    lexicon: Mapping[str, GenderTag],
) -> GenderTag | None:
    """The gender all single-token pronoun mentions agree on, else None."""
    found: set[GenderTag] = set()
    for start, end in cluster:
        if end - start == 1:
            tag = lexicon.get(tokens[start].casefold())
            if tag is not None:
                found.add(tag)
    if len(found) == 1:
        return next(iter(found))
    return None


def infer_annotations(
    tokens: Sequence[str],
    clusters: CorefClusters,
    lexicon: Mapping[str, GenderTag],
) -> FactoredSentence:
    """Annotate a sentence from its coreference clusters.

    The cluster document's tokens must equal the sentence exactly; a
    mismatch means the resolver saw different text and its spans cannot be
    trusted.
    """
    for idx in range(max(len(tokens), len(clusters.tokens))):
        ours = tokens[idx] if idx < len(tokens) else None
        theirs = clusters.tokens[idx] if idx < len(clusters.tokens) else None
        if ours != theirs:
            raise ValidationError(
                f"cluster document token {idx}: {theirs!r} does not match "
                f"sentence token {ours!r}"
            )
    claimed: list[set[GenderTag]] = [set() for _ in tokens]
    for cluster in clusters.clusters:
        gender = _cluster_gender(tokens, cluster, lexicon)
        if gender is None:
            continue
        for start, end in cluster:
            for position in range(start, end):
                claimed[position].add(gender)
    factors = tuple(
        next(iter(genders)) if len(genders) == 1 else GenderTag.U
        for genders in claimed
    )
    return FactoredSentence(tokens=tuple(tokens), factors=factors)


class CorefGenderAnnotator(BaseEstimator, TransformerMixin):
    """Transformer over (tokens, CorefClusters) items.

    lexicon=None uses the built-in English pronouns; pass a mapping to
    extend or override them.
    """

    def __init__(self, lexicon: Mapping[str, GenderTag] | None = None):
        self.lexicon = lexicon

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> list[FactoredSentence]:
        lexicon = self.lexicon if self.lexicon is not None else default_lexicon()
        return [
            infer_annotations(tokens, clusters, lexicon)
            for tokens, clusters in X
        ]
