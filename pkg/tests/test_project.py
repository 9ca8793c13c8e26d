import io
import itertools
import random

import pytest

from genderfactors.align import AlignmentLinkSet
from genderfactors.corpus import GenderTag, SentencePair, TaggedSentence
from genderfactors.errors import ParseError, ValidationError
from genderfactors.project import (
    FactoredSentence,
    FactorDropout,
    GenderProjector,
    SubwordFactorReplicator,
    TwoCopyExpander,
    build_training_set,
    format_inline_line,
    project_gender,
    read_factor_files,
    read_inline,
    replicate_subword_factors,
    write_factor_files,
    write_inline,
)

F, M, N, U = GenderTag.F, GenderTag.M, GenderTag.N, GenderTag.U


def make_pair(source, target_tokens, target_tags):
    target = TaggedSentence(tuple(target_tokens), tuple(target_tags))
    return SentencePair(source=tuple(source), target=target, pair_id=0)


def make_links(links, src_len, tgt_len):
    return AlignmentLinkSet(frozenset(links), src_len=src_len, tgt_len=tgt_len)


def agreed_tag(tags):
    """The projection rule applied directly to a multiset of aligned tags."""
    gendered = {t for t in tags if t != U}
    if len(gendered) == 1:
        return next(iter(gendered))
    return U


class TestProjectGender:
    def test_feminine_projection(self):
        pair = make_pair(["injury"], ["trauma"], [F])
        out = project_gender(pair, make_links({(0, 0)}, 1, 1))
        assert out.tokens == ("injury",)
        assert out.factors == (F,)

    def test_masculine_projection(self):
        pair = make_pair(["injury"], ["ievainojums"], [M])
        out = project_gender(pair, make_links({(0, 0)}, 1, 1))
        assert out.factors == (M,)

    def test_unaligned_token_is_unavailable(self):
        pair = make_pair(["the", "injury"], ["trauma"], [F])
        out = project_gender(pair, make_links({(1, 0)}, 2, 1))
        assert out.factors == (U, F)

    def test_conflict_yields_unavailable(self):
        pair = make_pair(["w"], ["a", "b"], [F, M])
        out = project_gender(pair, make_links({(0, 0), (0, 1)}, 1, 2))
        assert out.factors == (U,)

    def test_unavailable_does_not_block_agreement(self):
        pair = make_pair(["w"], ["a", "b"], [F, U])
        out = project_gender(pair, make_links({(0, 0), (0, 1)}, 1, 2))
        assert out.factors == (F,)

    def test_conflict_rule_exhaustive(self):
        # Realize every aligned-tag multiset of size 0..3 through actual links
        # and compare against the rule applied straight to the multiset.
        for size in range(4):
            for tags in itertools.product([F, M, N, U], repeat=size):
                pair = make_pair(["w"], [f"t{j}" for j in range(max(size, 1))],
                                 list(tags) or [U])
                links = make_links({(0, j) for j in range(size)}, 1, max(size, 1))
                out = project_gender(pair, links)
                assert out.factors[0] == agreed_tag(tags), tags

    def test_length_and_alphabet_properties(self):
        rng = random.Random(17)
        for _ in range(300):
            n, m = rng.randint(1, 6), rng.randint(1, 6)
            pair = make_pair(
                [f"s{i}" for i in range(n)],
                [f"t{j}" for j in range(m)],
                [rng.choice([F, M, N, U]) for _ in range(m)],
            )
            links = make_links(
                {(rng.randrange(n), rng.randrange(m)) for _ in range(rng.randint(0, 8))},
                n, m,
            )
            out = project_gender(pair, links)
            assert len(out.factors) == n
            assert set(out.factors) <= {F, M, N, U}

    def test_link_removal_monotonicity(self):
        # Removing links can only degrade information: a gendered factor stays
        # or becomes U, and a token with no gendered alignment stays U.
        rng = random.Random(23)
        for _ in range(300):
            n, m = rng.randint(1, 6), rng.randint(1, 6)
            tags = [rng.choice([F, M, N, U]) for _ in range(m)]
            pair = make_pair([f"s{i}" for i in range(n)], [f"t{j}" for j in range(m)], tags)
            full = {(rng.randrange(n), rng.randrange(m)) for _ in range(rng.randint(0, 8))}
            subset = {l for l in full if rng.random() < 0.6}
            before = project_gender(pair, make_links(full, n, m)).factors
            after = project_gender(pair, make_links(subset, n, m)).factors
            for i in range(n):
                if before[i] != U:
                    assert after[i] in (before[i], U)
                gendered_before = {tags[j] for (s, j) in full if s == i} - {U}
                if not gendered_before:
                    assert after[i] == U

    def test_mismatched_lengths_rejected(self):
        pair = make_pair(["a"], ["x"], [F])
        with pytest.raises(ValidationError):
            project_gender(pair, make_links({(0, 0)}, 2, 1))

    def test_projector_transform(self):
        pair = make_pair(["injury"], ["trauma"], [F])
        links = make_links({(0, 0)}, 1, 1)
        out = GenderProjector().fit([]).transform([(pair, links)])
        assert out == [FactoredSentence(("injury",), (F,))]


class TestSubwordReplication:
    def test_basic_replication(self):
        fs = FactoredSentence(("secretary",), (F,))
        out = replicate_subword_factors(fs, ["secre@@", "tary"])
        assert out.tokens == ("secre@@", "tary")
        assert out.factors == (F, F)

    def test_unsegmented_identity(self):
        fs = FactoredSentence(("the", "secretary"), (U, F))
        out = replicate_subword_factors(fs, ["the", "secretary"])
        assert out == fs

    def test_grouped_counts(self):
        fs = FactoredSentence(("abcdef", "gh", "ijk"), (F, M, N))
        pieces = ["ab@@", "cd@@", "ef", "g@@", "h", "ij@@", "k"]
        out = replicate_subword_factors(fs, pieces)
        assert out.factors == (F, F, F, M, M, N, N)

    def test_reconstruction_mismatch_names_word(self):
        fs = FactoredSentence(("secretary",), (F,))
        with pytest.raises(ValidationError, match="word 0"):
            replicate_subword_factors(fs, ["secre@@", "taryX"])

    def test_piece_count_mismatch(self):
        fs = FactoredSentence(("a", "b"), (F, M))
        with pytest.raises(ValidationError):
            replicate_subword_factors(fs, ["a"])

    def test_custom_marker(self):
        fs = FactoredSentence(("xyz",), (M,))
        out = replicate_subword_factors(fs, ["xy+", "z"], marker="+")
        assert out.factors == (M, M)

    def test_transformer(self):
        fs = FactoredSentence(("secretary",), (F,))
        out = SubwordFactorReplicator().fit([]).transform([(fs, ["secre@@", "tary"])])
        assert out[0].factors == (F, F)


class TestDropout:
    def sentence(self, n, tag=F):
        return FactoredSentence(tuple(f"w{i}" for i in range(n)), (tag,) * n)

    def test_rate_zero_is_identity(self):
        fs = self.sentence(50)
        out = FactorDropout(mode="per_token", rate=0.0, seed=1).transform([fs])
        assert out == [fs]
        out = FactorDropout(mode="span_count", rate=0.0, seed=1).transform([fs])
        assert out == [fs]

    def test_rate_one_per_token_blanks_everything(self):
        fs = self.sentence(50)
        out = FactorDropout(mode="per_token", rate=1.0, seed=1).transform([fs])
        assert set(out[0].factors) == {U}

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_law_of_large_numbers(self, seed):
        fs = self.sentence(100_000)
        out = FactorDropout(mode="per_token", rate=0.5, seed=seed).transform([fs])
        replaced = sum(1 for f in out[0].factors if f == U)
        assert 0.49 <= replaced / 100_000 <= 0.51

    def test_span_count_bound(self):
        fs = self.sentence(40)
        for seed in range(30):
            out = FactorDropout(mode="span_count", rate=0.25, seed=seed).transform([fs])
            replaced = sum(1 for f in out[0].factors if f == U)
            assert replaced <= 10

    def test_never_introduces_gender(self):
        rng = random.Random(4)
        sentences = []
        for _ in range(100):
            n = rng.randint(1, 12)
            sentences.append(FactoredSentence(
                tuple(f"w{i}" for i in range(n)),
                tuple(rng.choice([F, M, N, U]) for _ in range(n)),
            ))
        for mode in ("per_token", "span_count"):
            out = FactorDropout(mode=mode, rate=0.7, seed=9).transform(sentences)
            for before, after in zip(sentences, out):
                assert before.tokens == after.tokens
                for b, a in zip(before.factors, after.factors):
                    assert a in (b, U)

    def test_deterministic_given_seed(self):
        sentences = [self.sentence(30), self.sentence(7), self.sentence(15)]
        first = FactorDropout(mode="span_count", rate=1.0, seed=42).transform(sentences)
        second = FactorDropout(mode="span_count", rate=1.0, seed=42).transform(sentences)
        assert first == second
        third = FactorDropout(mode="span_count", rate=1.0, seed=43).transform(sentences)
        assert first != third

    def test_sentence_results_independent_of_batching(self):
        sentences = [self.sentence(20), self.sentence(21), self.sentence(22)]
        together = FactorDropout(mode="per_token", rate=0.5, seed=5).transform(sentences)
        # Identical indices must yield identical draws regardless of batch.
        again = FactorDropout(mode="per_token", rate=0.5, seed=5).transform(sentences[:1])
        assert together[0] == again[0]

    def test_invalid_rate_rejected(self):
        with pytest.raises(ValidationError):
            FactorDropout(mode="per_token", rate=1.5, seed=0).transform([self.sentence(3)])

    def test_invalid_mode_rejected(self):
        with pytest.raises(ValidationError):
            FactorDropout(mode="sometimes", rate=0.5, seed=0).transform([self.sentence(3)])


class TestTwoCopy:
    def test_single_sentence(self):
        fs = FactoredSentence(("The", "secretary", "asked"), (U, F, U))
        out = list(build_training_set([fs]))
        assert len(out) == 2
        assert out[0].tokens == fs.tokens
        assert set(out[0].factors) == {U}
        assert out[1] == fs

    def test_empty_corpus(self):
        assert list(build_training_set([])) == []

    def test_all_unavailable_input(self):
        fs = FactoredSentence(("a", "b"), (U, U))
        out = list(build_training_set([fs]))
        assert out[0] == out[1] == fs

    def test_doubles_and_preserves_tokens(self):
        rng = random.Random(8)
        corpus = []
        for _ in range(25):
            n = rng.randint(1, 9)
            corpus.append(FactoredSentence(
                tuple(f"w{rng.randrange(30)}" for _ in range(n)),
                tuple(rng.choice([F, M, N, U]) for _ in range(n)),
            ))
        out = list(build_training_set(corpus))
        assert len(out) == 2 * len(corpus)
        assert [fs.tokens for fs in out] == [fs.tokens for fs in corpus] * 2
        assert all(set(fs.factors) <= {U} for fs in out[:len(corpus)])
        assert out[len(corpus):] == corpus

    def test_transformer(self):
        fs = FactoredSentence(("a",), (M,))
        out = TwoCopyExpander().fit([]).transform([fs])
        assert [s.factors for s in out] == [(U,), (M,)]


class TestFactorFiles:
    def test_two_file_format(self):
        fs = FactoredSentence(("The", "secretary", "asked"), (U, F, U))
        tokens, factors = io.StringIO(), io.StringIO()
        write_factor_files([fs], tokens, factors)
        assert tokens.getvalue() == "The secretary asked\n"
        assert factors.getvalue() == "U F U\n"

    def test_inline_format(self):
        fs = FactoredSentence(("The", "secretary", "asked"), (U, F, U))
        assert format_inline_line(fs) == "The|U secretary|F asked|U"
        buf = io.StringIO()
        write_inline([fs], buf)
        assert buf.getvalue() == "The|U secretary|F asked|U\n"

    def random_corpus(self, seed):
        rng = random.Random(seed)
        corpus = []
        for _ in range(200):
            n = rng.randint(0, 10)
            corpus.append(FactoredSentence(
                tuple(rng.choice(["a", "b|c", "x@@", "Übel", "."]) for _ in range(n)),
                tuple(rng.choice([F, M, N, U]) for _ in range(n)),
            ))
        return corpus

    def test_two_file_round_trip(self):
        corpus = self.random_corpus(31)
        tokens, factors = io.StringIO(), io.StringIO()
        write_factor_files(corpus, tokens, factors)
        parsed = list(read_factor_files(
            io.StringIO(tokens.getvalue()), io.StringIO(factors.getvalue())
        ))
        assert parsed == corpus

    def test_inline_round_trip(self):
        corpus = self.random_corpus(32)
        buf = io.StringIO()
        write_inline(corpus, buf)
        parsed = list(read_inline(io.StringIO(buf.getvalue())))
        assert parsed == corpus

    def test_factor_file_length_mismatch(self):
        with pytest.raises(ParseError, match="line 1"):
            list(read_factor_files(io.StringIO("a b\n"), io.StringIO("F\n")))

    def test_bad_tag_rejected(self):
        with pytest.raises(ParseError, match="line 1"):
            list(read_factor_files(io.StringIO("a\n"), io.StringIO("Q\n")))

    def test_inline_missing_separator(self):
        with pytest.raises(ParseError, match="line 2"):
            list(read_inline(io.StringIO("a|F\nbroken\n")))

    def test_file_count_mismatch(self):
        with pytest.raises(ParseError):
            list(read_factor_files(io.StringIO("a\nb\n"), io.StringIO("F\n")))
