"""Challenge-set scoring: recover each antecedent's translated gender via
alignment plus target-side morphology, then aggregate Accuracy, dG, dS,
M:F, and per-gender precision/recall/F1.

All percentages are kept at full precision internally; rounding happens
only in the renderers.
"""

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, TextIO

from genderfactors.align import AlignmentLinkSet
from genderfactors.corpus import GenderTag, TaggedSentence
from genderfactors.errors import ParseError, ValidationError

_GOLD_VALUES = {
    "m": GenderTag.M,
    "male": GenderTag.M,
    "f": GenderTag.F,
    "female": GenderTag.F,
}

STEREOTYPES = ("pro", "anti")

REPORT_FORMATS = ("text", "tsv", "json")


@dataclass(frozen=True)
class WinoMTInstance:
    """One challenge item: the sentence, the antecedent span, the gender the
    pronoun implies, and whether that aligns with the profession stereotype."""

    id: int
    tokens: tuple[str, ...]
    entity_span: tuple[int, int]
    gold_gender: GenderTag
    stereotype: str

    def __post_init__(self):
        start, end = self.entity_span
        if not 0 <= start < end <= len(self.tokens):
            raise ValidationError(
                f"instance {self.id}: span [{start}, {end}) invalid for "
                f"{len(self.tokens)} tokens"
            )
        if self.gold_gender not in (GenderTag.M, GenderTag.F):
            raise ValidationError(f"instance {self.id}: gold gender must be M or F")
        if self.stereotype not in STEREOTYPES:
            raise ValidationError(f"instance {self.id}: bad stereotype {self.stereotype!r}")


@dataclass(frozen=True)
class AntecedentJudgment:
    """Predicted grammatical gender of one translated antecedent; predicted
    is None when no gendered evidence was found."""

    instance_id: int
    predicted: Optional[GenderTag]
    correct: bool

    def __post_init__(self):
        if self.predicted == GenderTag.U:
            raise ValidationError(
                f"judgment {self.instance_id}: use None for unknown predictions"
            )


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    delta_g: float
    delta_s: float
    mf_ratio: float
    masc_precision: float
    masc_recall: float
    masc_f1: float
    fem_precision: float
    fem_recall: float
    fem_f1: float
    total: int
    gold_masc: int
    gold_fem: int
    pro: int
    anti: int
    unknown: int


def judge(
    instance: WinoMTInstance,
    translation: TaggedSentence,
    links: AlignmentLinkSet,
) -> AntecedentJudgment:
    """Judge one instance from its translation's tags and the alignment.

    Among target tokens aligned to the antecedent span, the leftmost NOUN
    decides; with no aligned noun, the leftmost gendered token; with
    neither, the prediction is unknown. Out-of-range links are ignored
    rather than crashing: a degenerate alignment is the judged system's
    failure, not ours.
    """
    start, end = instance.entity_span
    aligned = sorted(
        j for i, j in links.links
        if start <= i < end and j < len(translation)
    )
    predicted: Optional[GenderTag] = None
    if translation.pos is not None:
        for j in aligned:
            if translation.pos[j] == "NOUN":
                predicted = translation.tags[j]
                break
    if predicted is None:
        for j in aligned:
            if translation.tags[j] != GenderTag.U:
                predicted = translation.tags[j]
                break
    if predicted == GenderTag.U:
        predicted = None
    return AntecedentJudgment(
        instance_id=instance.id,
        predicted=predicted,
        correct=predicted == instance.gold_gender,
    )


def aggregate(
    instances: Iterable[WinoMTInstance],
    judgments: Iterable[AntecedentJudgment],
) -> MetricsReport:
    """Fold judgments into the score sheet. Predictions other than M or F
    count against the gold class's recall but are never false positives,
    and stay out of the M:F ratio."""
    instances = list(instances)
    judgments = list(judgments)
    if len(instances) != len(judgments):
        raise ValidationError(
            f"{len(instances)} instances but {len(judgments)} judgments"
        )
    by_id = {inst.id: inst for inst in instances}
    if len(by_id) != len(instances):
        raise ValidationError("duplicate instance ids")

    total = len(instances)
    if total == 0:
        raise ValidationError("nothing to aggregate")
    correct = 0
    tp = {GenderTag.M: 0, GenderTag.F: 0}
    fp = {GenderTag.M: 0, GenderTag.F: 0}
    fn = {GenderTag.M: 0, GenderTag.F: 0}
    predicted_counts = {GenderTag.M: 0, GenderTag.F: 0}
    stereo_total = {"pro": 0, "anti": 0}
    stereo_correct = {"pro": 0, "anti": 0}
    gold_counts = {GenderTag.M: 0, GenderTag.F: 0}
    unknown = 0

    for judgment in judgments:
        instance = by_id.get(judgment.instance_id)
        if instance is None:
            raise ValidationError(
                f"judgment for unknown instance id {judgment.instance_id}"
            )
        gold = instance.gold_gender
        predicted = judgment.predicted
        if judgment.correct != (predicted == gold):
            raise ValidationError(
                f"judgment {judgment.instance_id}: correct flag disagrees "
                f"with predicted/gold genders"
            )
        gold_counts[gold] += 1
        stereo_total[instance.stereotype] += 1
        if predicted == gold:
            correct += 1
            stereo_correct[instance.stereotype] += 1
            tp[gold] += 1
        else:
            fn[gold] += 1
            if predicted in fp:
                fp[predicted] += 1
        if predicted in predicted_counts:
            predicted_counts[predicted] += 1
        else:
            unknown += predicted is None

    def prf(gender):
        hits = tp[gender]
        precision = 100.0 * hits / (hits + fp[gender]) if hits + fp[gender] else 0.0
        recall = 100.0 * hits / (hits + fn[gender]) if hits + fn[gender] else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        return precision, recall, f1

    masc_p, masc_r, masc_f1 = prf(GenderTag.M)
    fem_p, fem_r, fem_f1 = prf(GenderTag.F)

    def subset_accuracy(label):
        if not stereo_total[label]:
            return 0.0
        return 100.0 * stereo_correct[label] / stereo_total[label]

    if predicted_counts[GenderTag.F]:
        mf_ratio = predicted_counts[GenderTag.M] / predicted_counts[GenderTag.F]
    elif predicted_counts[GenderTag.M]:
        mf_ratio = math.inf
    else:
        mf_ratio = 0.0

    return MetricsReport(
        accuracy=100.0 * correct / total,
        delta_g=masc_f1 - fem_f1,
        delta_s=subset_accuracy("pro") - subset_accuracy("anti"),
        mf_ratio=mf_ratio,
        masc_precision=masc_p,
        masc_recall=masc_r,
        masc_f1=masc_f1,
        fem_precision=fem_p,
        fem_recall=fem_r,
        fem_f1=fem_f1,
        total=total,
        gold_masc=gold_counts[GenderTag.M],
        gold_fem=gold_counts[GenderTag.F],
        pro=stereo_total["pro"],
        anti=stereo_total["anti"],
        unknown=unknown,
    )


def load_winomt_tsv(lines: Iterable[str]) -> Iterator[WinoMTInstance]:
    """Read challenge rows: gold gender, antecedent index or start-end span,
    sentence, stereotype class ("pro"/"anti"); tab-separated."""
    for row_number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        columns = line.split("\t")
        if len(columns) != 4:
            raise ParseError(
                f"row {row_number}: expected 4 tab-separated columns, "
                f"got {len(columns)}"
            )
        gender_text, span_text, sentence, stereotype = columns
        gold = _GOLD_VALUES.get(gender_text.strip().lower())
        if gold is None:
            raise ParseError(
                f"row {row_number}: gold gender must be male or female, "
                f"got {gender_text!r}"
            )
        tokens = tuple(sentence.split())
        head, sep, tail = span_text.partition("-")
        try:
            if sep:
                span = (int(head), int(tail))
            else:
                span = (int(head), int(head) + 1)
        except ValueError:
            raise ParseError(
                f"row {row_number}: bad antecedent span {span_text!r}"
            ) from None
        if not 0 <= span[0] < span[1] <= len(tokens):
            raise ParseError(
                f"row {row_number}: span {span_text!r} outside the "
                f"{len(tokens)}-token sentence"
            )
        stereo = stereotype.strip().lower()
        if stereo not in STEREOTYPES:
            raise ParseError(
                f"row {row_number}: stereotype must be pro or anti, "
                f"got {stereotype!r}"
            )
        yield WinoMTInstance(
            id=row_number - 1,
            tokens=tokens,
            entity_span=span,
            gold_gender=gold,
            stereotype=stereo,
        )


_PERCENT_FIELDS = (
    "accuracy", "delta_g", "delta_s",
    "masc_precision", "masc_recall", "masc_f1",
    "fem_precision", "fem_recall", "fem_f1",
)
_COUNT_FIELDS = ("total", "gold_masc", "gold_fem", "pro", "anti", "unknown")


def _rounded_fields(report: MetricsReport) -> dict:
    values: dict = {name: round(getattr(report, name), 1) for name in _PERCENT_FIELDS}
    values["mf_ratio"] = (
        "inf" if math.isinf(report.mf_ratio) else round(report.mf_ratio, 3)
    )
    for name in _COUNT_FIELDS:
        values[name] = getattr(report, name)
    return values


def render_report(report: MetricsReport, fmt: str = "text") -> str:
    """Render the score sheet with 1-decimal percentages and stable field order."""
    if fmt not in REPORT_FORMATS:
        raise ValidationError(f"unknown report format {fmt!r}")
    if fmt == "json":
        return json.dumps(_rounded_fields(report), indent=2)
    if fmt == "tsv":
        fields = _rounded_fields(report)
        header = "\t".join(fields)
        row = "\t".join(str(v) for v in fields.values())
        return f"{header}\n{row}"
    mf = "inf" if math.isinf(report.mf_ratio) else f"{report.mf_ratio:.1f}"
    return "\n".join([
        f"Acc. {report.accuracy:.1f}",
        f"dG {report.delta_g:.1f}",
        f"dS {report.delta_s:.1f}",
        f"M:F {mf}",
        (f"masc P {report.masc_precision:.1f} R {report.masc_recall:.1f} "
         f"F1 {report.masc_f1:.1f}"),
        (f"fem P {report.fem_precision:.1f} R {report.fem_recall:.1f} "
         f"F1 {report.fem_f1:.1f}"),
        (f"total {report.total} gold-masc {report.gold_masc} "
         f"gold-fem {report.gold_fem} pro {report.pro} anti {report.anti} "
         f"unknown {report.unknown}"),
    ])


def write_judgments_tsv(
    instances: Iterable[WinoMTInstance],
    judgments: Iterable[AntecedentJudgment],
    stream: TextIO,
) -> None:
    """One detail row per instance: id, gold, predicted, correct, stereotype."""
    stream.write("id\tgold\tpredicted\tcorrect\tstereotype\n")
    by_id = {inst.id: inst for inst in instances}
    for judgment in judgments:
        instance = by_id[judgment.instance_id]
        predicted = judgment.predicted.value if judgment.predicted else "unknown"
        correct = "true" if judgment.correct else "false"
        stream.write(
            f"{instance.id}\t{instance.gold_gender.value}\t{predicted}\t"
            f"{correct}\t{instance.stereotype}\n"
        )
