"""Reparameterized IBM Model 2 word alignment with a diagonal prior.

The generative story for a pair with source length n and target length m:
each target position j (1-based) aligns to null with probability p0, or to
source position i with probability (1 - p0) * exp(lambda * h(i,j)) / Z,
where h(i, j) = -|i/n - j/m| and Z normalizes over i = 1..n. Translation
probabilities t(f|e) are re-estimated by EM; the tension lambda can be
tuned by gradient steps on the expected diagonal feature.

Training is deterministic: the corpus is split into fixed-size shards whose
partial counts are merged in shard order, so results are bitwise identical
for any worker count.
"""

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, TextIO

from sklearn.base import BaseEstimator

from genderfactors.errors import ParseError, ValidationError
from genderfactors.util import ordered_map

#: Source-side surface reserved for the null word (id 0 in every model).
NULL_WORD = "<null>"

#: Translation probability used for words unseen in training.
OOV_FLOOR = 1e-9

#: Fixed E-step shard size; independent of the worker count on purpose.
_SHARD_SIZE = 512

_TENSION_MIN = 0.5
_TENSION_MAX = 14.0
_TENSION_STEPS = 8
_TENSION_RATE = 20.0

MODEL_FORMAT = "genderfactors-aligner"
MODEL_VERSION = 1

HEURISTICS = ("intersection", "union", "grow-diag-final-and")


@dataclass(frozen=True)
class AlignmentLinkSet:
    """Set of (source index, target index) links for one sentence pair."""

    links: frozenset[tuple[int, int]]
    src_len: int
    tgt_len: int

    def __post_init__(self):
        for i, j in self.links:
            if not (0 <= i < self.src_len and 0 <= j < self.tgt_len):
                raise ValidationError(
                    f"link ({i}, {j}) out of range for "
                    f"{self.src_len}x{self.tgt_len} pair"
                )

    def sorted_links(self) -> list[tuple[int, int]]:
        return sorted(self.links)


def _diagonal_weights(j: int, m: int, n: int, tension: float) -> list[float]:
    """Unnormalized prior over source positions 1..n, max-shifted before exp."""
    feats = [-abs(i / n - j / m) for i in range(1, n + 1)]
    top = max(feats)
    return [math.exp(tension * (h - top)) for h in feats]


def _dlogz(j: int, m: int, n: int, tension: float) -> float:
    """d/dlambda log Z(j, m, n): the prior's expected diagonal feature."""
    feats = [-abs(i / n - j / m) for i in range(1, n + 1)]
    top = max(feats)
    weights = [math.exp(tension * (h - top)) for h in feats]
    total = sum(weights)
    return sum(h * w for h, w in zip(feats, weights)) / total


class DiagonalAligner(BaseEstimator):
    """Word aligner in the estimator idiom: fit on pairs, predict link sets.

    Parameters
    ----------
    iterations : number of EM sweeps (>= 1).
    diagonal_tension : initial sharpness lambda of the diagonal prior.
    null_prob : probability p0 of aligning a target token to null.
    optimize_tension : tune lambda by 8 gradient steps after every sweep
        from the second one on, clamped to [0.5, 14].
    threads : worker threads for the E-step; never changes the result.

    Fitted attributes: ``table_`` (t(f|e) rows keyed by source id),
    ``src_vocab_``/``tgt_vocab_`` (surface -> id), ``diagonal_tension_``,
    ``log_likelihoods_`` (one value per sweep, evaluated before its M-step)
    and ``row_sum_errors_`` (max |row sum - 1| per sweep).
    """

    def __init__(
        self,
        iterations: int = 5,
        diagonal_tension: float = 4.0,
        null_prob: float = 0.08,
        optimize_tension: bool = True,
        threads: int = 1,
    ):
        self.iterations = iterations
        self.diagonal_tension = diagonal_tension
        self.null_prob = null_prob
        self.optimize_tension = optimize_tension
        self.threads = threads

    # -- training ---------------------------------------------------------

    def _check_params(self):
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.diagonal_tension <= 0:
            raise ValidationError("diagonal_tension must be > 0")
        if not 0.0 < self.null_prob < 1.0:
            raise ValidationError("null_prob must be in (0, 1)")

    def _encode_corpus(self, pairs) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        src_vocab: dict[str, int] = {NULL_WORD: 0}
        tgt_vocab: dict[str, int] = {}
        corpus = []
        for src, tgt in pairs:
            if not src or not tgt:
                raise ValidationError("sentence pair with an empty side")
            corpus.append((
                tuple(src_vocab.setdefault(w, len(src_vocab)) for w in src),
                tuple(tgt_vocab.setdefault(w, len(tgt_vocab)) for w in tgt),
            ))
        if not corpus:
            raise ValidationError("cannot train on an empty corpus")
        self.src_vocab_ = src_vocab
        self.tgt_vocab_ = tgt_vocab
        return corpus

    def _e_step_shard(self, shard, table, tension, uniform):
        """Expected counts for one shard. Returns (counts, emp_feat, ll)."""
        p0 = self.null_prob
        counts: dict[int, dict[int, float]] = {}
        emp_feat = 0.0
        log_likelihood = 0.0
        for src_ids, tgt_ids in shard:
            n = len(src_ids)
            m = len(tgt_ids)
            for j0, f in enumerate(tgt_ids):
                j = j0 + 1
                weights = _diagonal_weights(j, m, n, tension)
                z = sum(weights)
                if table is None:
                    t_null = uniform
                    t_src = [uniform] * n
                else:
                    t_null = table.get(0, {}).get(f, 0.0)
                    t_src = [table.get(e, {}).get(f, 0.0) for e in src_ids]
                posterior_null = p0 * t_null
                posteriors = [
                    (1.0 - p0) * (w / z) * t
                    for w, t in zip(weights, t_src)
                ]
                total = posterior_null + sum(posteriors)
                log_likelihood += math.log(total)
                scale = 1.0 / total
                row = counts.setdefault(0, {})
                row[f] = row.get(f, 0.0) + posterior_null * scale
                for idx, (e, p) in enumerate(zip(src_ids, posteriors)):
                    weight = p * scale
                    row = counts.setdefault(e, {})
                    row[f] = row.get(f, 0.0) + weight
                    emp_feat += weight * -abs((idx + 1) / n - j / m)
        return counts, emp_feat, log_likelihood

    def fit(self, pairs: Iterable[tuple[Sequence[str], Sequence[str]]]):
        self._check_params()
        corpus = self._encode_corpus(pairs)
        shards = [corpus[k:k + _SHARD_SIZE] for k in range(0, len(corpus), _SHARD_SIZE)]
        uniform = 1.0 / len(self.tgt_vocab_)
        total_target_tokens = sum(len(tgt) for _, tgt in corpus)
        size_counts: dict[tuple[int, int], int] = {}
        for src_ids, tgt_ids in corpus:
            key = (len(tgt_ids), len(src_ids))
            size_counts[key] = size_counts.get(key, 0) + 1

        tension = float(self.diagonal_tension)
        table: dict[int, dict[int, float]] | None = None
        self.log_likelihoods_ = []
        self.row_sum_errors_ = []

        for iteration in range(1, self.iterations + 1):
            results = list(ordered_map(
                lambda shard: self._e_step_shard(shard, table, tension, uniform),
                shards,
                threads=self.threads,
            ))
            counts: dict[int, dict[int, float]] = {}
            emp_feat = 0.0
            log_likelihood = 0.0
            for shard_counts, shard_feat, shard_ll in results:
                emp_feat += shard_feat
                log_likelihood += shard_ll
                for e, row in shard_counts.items():
                    target_row = counts.setdefault(e, {})
                    for f, c in row.items():
                        target_row[f] = target_row.get(f, 0.0) + c
            self.log_likelihoods_.append(log_likelihood)

            if self.optimize_tension and iteration >= 2:
                emp = emp_feat / total_target_tokens
                for _ in range(_TENSION_STEPS):
                    mod_feat = 0.0
                    for (m, n), count in size_counts.items():
                        for j in range(1, m + 1):
                            mod_feat += count * _dlogz(j, m, n, tension)
                    mod_feat /= total_target_tokens
                    tension += (emp - mod_feat) * _TENSION_RATE
                    tension = min(max(tension, _TENSION_MIN), _TENSION_MAX)

            table = {}
            row_sum_error = 0.0
            for e, row in counts.items():
                total = sum(row.values())
                table[e] = {f: c / total for f, c in row.items()}
                row_sum_error = max(row_sum_error, abs(sum(table[e].values()) - 1.0))
            self.row_sum_errors_.append(row_sum_error)

        self.table_ = table
        self.diagonal_tension_ = tension
        return self

    # -- decoding ---------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "table_"):
            raise ValidationError("aligner is not fitted; call fit() first")

    def translation_prob(self, src_word: str, tgt_word: str) -> float:
        """t(tgt_word | src_word); src_word may be the null word. Zero for
        in-vocabulary pairs never seen together, OOV floor otherwise."""
        self._check_fitted()
        e = self.src_vocab_.get(src_word)
        f = self.tgt_vocab_.get(tgt_word)
        if e is None or f is None:
            return OOV_FLOOR
        return self.table_.get(e, {}).get(f, 0.0)

    def _viterbi_pair(self, pair) -> AlignmentLinkSet:
        src, tgt = pair
        if not src or not tgt:
            raise ValidationError("sentence pair with an empty side")
        p0 = self.null_prob
        tension = self.diagonal_tension_
        n = len(src)
        src_ids = [self.src_vocab_.get(w) for w in src]
        links = set()
        for j0, word in enumerate(tgt):
            j = j0 + 1
            f = self.tgt_vocab_.get(word)
            weights = _diagonal_weights(j, len(tgt), n, tension)
            z = sum(weights)
            if f is None:
                t_null = OOV_FLOOR
                t_src = [OOV_FLOOR] * n
            else:
                t_null = self.table_.get(0, {}).get(f, 0.0)
                t_src = [
                    self.table_.get(e, {}).get(f, 0.0) if e is not None else OOV_FLOOR
                    for e in src_ids
                ]
            # Ties break toward null, then toward the smaller source index.
            best_score = p0 * t_null
            best_i = None
            for idx in range(n):
                score = (1.0 - p0) * (weights[idx] / z) * t_src[idx]
                if score > best_score:
                    best_score = score
                    best_i = idx
            if best_i is not None:
                links.add((best_i, j0))
        return AlignmentLinkSet(frozenset(links), src_len=n, tgt_len=len(tgt))

    def predict(
        self, pairs: Iterable[tuple[Sequence[str], Sequence[str]]]
    ) -> list[AlignmentLinkSet]:
        return list(self.iter_predict(pairs))

    def iter_predict(
        self, pairs: Iterable[tuple[Sequence[str], Sequence[str]]]
    ) -> Iterator[AlignmentLinkSet]:
        """Streaming predict: yields link sets in input order."""
        self._check_fitted()
        yield from ordered_map(self._viterbi_pair, pairs, threads=self.threads)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "iterations": self.iterations,
            "diagonal_tension": self.diagonal_tension,
            "null_prob": self.null_prob,
            "optimize_tension": self.optimize_tension,
            "diagonal_tension_final": self.diagonal_tension_,
            "log_likelihoods": self.log_likelihoods_,
            "src_vocab": _vocab_list(self.src_vocab_),
            "tgt_vocab": _vocab_list(self.tgt_vocab_),
            "table": [
                [e, f, p]
                for e in sorted(self.table_)
                for f, p in sorted(self.table_[e].items())
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DiagonalAligner":
        aligner = cls(
            iterations=payload["iterations"],
            diagonal_tension=payload["diagonal_tension"],
            null_prob=payload["null_prob"],
            optimize_tension=payload["optimize_tension"],
        )
        src_vocab = {w: i for i, w in enumerate(payload["src_vocab"])}
        if src_vocab.get(NULL_WORD) != 0:
            raise ParseError("model dump: source vocabulary must start with the null word")
        aligner.src_vocab_ = src_vocab
        aligner.tgt_vocab_ = {w: i for i, w in enumerate(payload["tgt_vocab"])}
        table: dict[int, dict[int, float]] = {}
        for e, f, p in payload["table"]:
            table.setdefault(e, {})[f] = p
        aligner.table_ = table
        aligner.diagonal_tension_ = payload["diagonal_tension_final"]
        aligner.log_likelihoods_ = list(payload["log_likelihoods"])
        aligner.row_sum_errors_ = []
        return aligner


def _vocab_list(vocab: dict[str, int]) -> list[str]:
    ordered = [None] * len(vocab)
    for word, idx in vocab.items():
        ordered[idx] = word
    return ordered


def save_model_bundle(path, forward: DiagonalAligner, backward: DiagonalAligner | None = None) -> None:
    """Write one or both alignment directions as a versioned JSON dump."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "forward": forward.to_dict(),
        "backward": backward.to_dict() if backward is not None else None,
    }
    with open(path, "w", encoding="utf-8") as stream:
        json.dump(payload, stream)
        stream.write("\n")


def load_model_bundle(path) -> tuple[DiagonalAligner, DiagonalAligner | None]:
    with open(path, encoding="utf-8") as stream:
        try:
            payload = json.load(stream)
        except json.JSONDecodeError as error:
            raise ParseError(f"model dump {path}: {error}") from None
    if payload.get("format") != MODEL_FORMAT:
        raise ParseError(f"model dump {path}: not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise ParseError(
            f"model dump {path}: unsupported version {payload.get('version')}"
        )
    forward = DiagonalAligner.from_dict(payload["forward"])
    backward = (
        DiagonalAligner.from_dict(payload["backward"])
        if payload.get("backward") is not None
        else None
    )
    return forward, backward


# -- symmetrization ---------------------------------------------------------

_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _grow_diag_final_and(intersection, union, src_len, tgt_len):
    aligned = set(intersection)
    src_covered = {i for i, _ in aligned}
    tgt_covered = {j for _, j in aligned}

    def take(i, j):
        aligned.add((i, j))
        src_covered.add(i)
        tgt_covered.add(j)

    changed = True
    while changed:
        changed = False
        for i, j in sorted(aligned):  # row-major ascending over current points
            for di, dj in _NEIGHBOURS:
                candidate = (i + di, j + dj)
                if candidate in union and candidate not in aligned:
                    if candidate[0] not in src_covered or candidate[1] not in tgt_covered:
                        take(*candidate)
                        changed = True
    for i, j in sorted(union):
        if (i, j) not in aligned and i not in src_covered and j not in tgt_covered:
            take(i, j)
    return aligned


def symmetrize(
    forward: AlignmentLinkSet,
    backward: AlignmentLinkSet,
    heuristic: str = "grow-diag-final-and",
) -> AlignmentLinkSet:
    """Combine a source->target and a target->source alignment of one pair.

    The backward link set lives in swapped index space and is transposed
    here before the sets are combined.
    """
    if heuristic not in HEURISTICS:
        raise ValidationError(f"unknown symmetrization heuristic {heuristic!r}")
    transposed = {(i, j) for j, i in backward.links}
    if (backward.tgt_len, backward.src_len) != (forward.src_len, forward.tgt_len):
        raise ValidationError(
            f"cannot symmetrize {forward.src_len}x{forward.tgt_len} forward links "
            f"with {backward.src_len}x{backward.tgt_len} backward links"
        )
    if heuristic == "intersection":
        combined = forward.links & transposed
    elif heuristic == "union":
        combined = forward.links | transposed
    else:
        combined = _grow_diag_final_and(
            forward.links & transposed,
            forward.links | transposed,
            forward.src_len,
            forward.tgt_len,
        )
    return AlignmentLinkSet(
        frozenset(combined), src_len=forward.src_len, tgt_len=forward.tgt_len
    )


# -- pharaoh format ----------------------------------------------------------

def format_pharaoh_line(links: Iterable[tuple[int, int]]) -> str:
    return " ".join(f"{i}-{j}" for i, j in sorted(links))


def parse_pharaoh_line(line: str, line_number: int = 1) -> frozenset[tuple[int, int]]:
    links = set()
    stripped = line.strip()
    if not stripped:
        return frozenset()
    for token in stripped.split():
        i, sep, j = token.partition("-")
        if not sep or not i.isdigit() or not j.isdigit():
            raise ParseError(
                f"line {line_number}: bad alignment token {token!r} "
                f"(expected 'i-j' with integer indices)"
            )
        links.add((int(i), int(j)))
    return frozenset(links)


def write_pharaoh(link_sets: Iterable, stream: TextIO) -> None:
    """One line per pair; accepts AlignmentLinkSet or bare link collections."""
    for item in link_sets:
        links = item.links if isinstance(item, AlignmentLinkSet) else item
        stream.write(format_pharaoh_line(links))
        stream.write("\n")


def read_pharaoh(lines: Iterable[str]) -> Iterator[frozenset[tuple[int, int]]]:
    for line_number, line in enumerate(lines, start=1):
        yield parse_pharaoh_line(line.rstrip("\n"), line_number)
