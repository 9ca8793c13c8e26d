"""Gender annotation tooling for machine translation corpora.

The pipeline: train a word aligner on a parallel corpus, project target-side
grammatical gender onto source tokens as a factor stream, optionally blank
annotations for robustness and assemble the two-copy training set; at
inference time derive annotations from coreference clusters; and score
translations on WinoMT-style challenge sets.
"""

from genderfactors.align import (
    AlignmentLinkSet,
    DiagonalAligner,
    load_model_bundle,
    read_pharaoh,
    save_model_bundle,
    symmetrize,
    write_pharaoh,
)
from genderfactors.coref import (
    CorefClusters,
    CorefGenderAnnotator,
    default_lexicon,
    infer_annotations,
    load_lexicon,
    parse_clusters,
)
from genderfactors.corpus import (
    GenderTag,
    ParallelReader,
    SentencePair,
    TaggedSentence,
    parse_conllu,
    write_conllu,
    zip_tagged,
)
from genderfactors.errors import GenderFactorsError, ParseError, ValidationError
from genderfactors.project import (
    FactoredSentence,
    FactorDropout,
    GenderProjector,
    SubwordFactorReplicator,
    TwoCopyExpander,
    build_training_set,
    dropout_factors,
    project_gender,
    read_factor_files,
    read_inline,
    replicate_subword_factors,
    write_factor_files,
    write_inline,
)
from genderfactors.winomt import (
    AntecedentJudgment,
    MetricsReport,
    WinoMTInstance,
    aggregate,
    judge,
    load_winomt_tsv,
    render_report,
    write_judgments_tsv,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentLinkSet",
    "AntecedentJudgment",
    "CorefClusters",
    "CorefGenderAnnotator",
    "DiagonalAligner",
    "FactorDropout",
    "FactoredSentence",
    "GenderFactorsError",
    "GenderProjector",
    "GenderTag",
    "MetricsReport",
    "ParallelReader",
    "ParseError",
    "SentencePair",
    "SubwordFactorReplicator",
    "TaggedSentence",
    "TwoCopyExpander",
    "ValidationError",
    "WinoMTInstance",
    "aggregate",
    "build_training_set",
    "default_lexicon",
    "dropout_factors",
    "infer_annotations",
    "judge",
    "load_lexicon",
    "load_model_bundle",
    "load_winomt_tsv",
    "parse_clusters",
    "parse_conllu",
    "project_gender",
    "read_factor_files",
    "read_inline",
    "read_pharaoh",
    "render_report",
    "replicate_subword_factors",
    "save_model_bundle",
    "symmetrize",
    "write_conllu",
    "write_factor_files",
    "write_inline",
    "write_judgments_tsv",
    "write_pharaoh",
    "zip_tagged",
]
