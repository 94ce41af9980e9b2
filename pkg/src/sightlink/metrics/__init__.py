"""NLG metric suite: BLEU-1/2, ROUGE-L, CIDEr and METEOR with corpus scoring."""

from .report import MetricReport, score_corpus
from .scores import (
    EmptyCandidateError,
    EmptyReferenceError,
    MetricError,
    NoReferencesError,
    SingleItemCorpusWarning,
    bleu_n,
    cider,
    lcs_length,
    meteor,
    meteor_best,
    ngram_counts,
    rouge_l,
    rouge_l_best,
)
from .stem import porter_stem
from .text import TOKENIZER_VERSION, tokenize

__all__ = [
    "MetricReport",
    "score_corpus",
    "EmptyCandidateError",
    "EmptyReferenceError",
    "MetricError",
    "NoReferencesError",
    "SingleItemCorpusWarning",
    "bleu_n",
    "cider",
    "lcs_length",
    "meteor",
    "meteor_best",
    "ngram_counts",
    "rouge_l",
    "rouge_l_best",
    "porter_stem",
    "TOKENIZER_VERSION",
    "tokenize",
]
