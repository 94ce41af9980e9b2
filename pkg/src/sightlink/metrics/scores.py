"""Sentence-level NLG metrics over tokenized candidate/reference pairs.

All functions take pre-tokenized sequences (see text.tokenize). BLEU, ROUGE-L
and METEOR return values in [0, 1]; CIDEr returns scale * [0, 1].
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from collections.abc import Callable, Mapping, Sequence

from .stem import porter_stem

TokenSeq = Sequence[str]


class MetricError(Exception):
    pass


class EmptyCandidateError(MetricError):
    pass


class EmptyReferenceError(MetricError):
    pass


class NoReferencesError(MetricError):
    pass


class SingleItemCorpusWarning(UserWarning):
    """IDF degenerates on a one-item corpus; CIDEr scores may be 0."""


def ngram_counts(tokens: TokenSeq, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(candidate: TokenSeq, references: Sequence[TokenSeq], n: int) -> float:
    """Geometric mean of clipped k-gram precisions (k=1..n) times the brevity
    penalty; 0 as soon as any precision is 0."""
    if not candidate:
        raise EmptyCandidateError("BLEU candidate is empty")
    refs = [list(r) for r in references if r]
    if not refs:
        raise NoReferencesError("BLEU needs at least one non-empty reference")
    log_sum = 0.0
    for k in range(1, n + 1):
        cand_counts = ngram_counts(candidate, k)
        total = sum(cand_counts.values())
        if total == 0:
            return 0.0
        clipped = 0
        for gram, count in cand_counts.items():
            clipped += min(count, max(ngram_counts(ref, k)[gram] for ref in refs))
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    geo_mean = math.exp(log_sum / n)
    c = len(candidate)
    r = min((len(ref) for ref in refs), key=lambda length: (abs(length - c), length))
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * geo_mean


def lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        row = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = max(prev[j], row[j - 1])
        prev = row
    return prev[len(b)]


def rouge_l(candidate: TokenSeq, reference: TokenSeq) -> float:
    """LCS-based F1: P = LCS/|candidate|, R = LCS/|reference|."""
    if not candidate:
        raise EmptyCandidateError("ROUGE-L candidate is empty")
    if not reference:
        raise EmptyReferenceError("ROUGE-L reference is empty")
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2 * precision * recall / (precision + recall)


def rouge_l_best(candidate: TokenSeq, references: Sequence[TokenSeq]) -> float:
    if not references:
        raise NoReferencesError("ROUGE-L needs at least one reference")
    return max(rouge_l(candidate, ref) for ref in references)


def _greedy_align(
    candidate: TokenSeq, reference: TokenSeq, key: Callable[[str], str]
) -> list[tuple[int, int]]:
    pairs = []
    taken_c: set[int] = set()
    taken_r: set[int] = set()
    # stage keys applied in order: exact match first, then stemmed
    for stage_key in (lambda t: t, key):
        for ci, ctok in enumerate(candidate):
            if ci in taken_c:
                continue
            want = stage_key(ctok)
            for ri, rtok in enumerate(reference):
                if ri in taken_r:
                    continue
                if stage_key(rtok) == want:
                    pairs.append((ci, ri))
                    taken_c.add(ci)
                    taken_r.add(ri)
                    break
    return pairs


def meteor(
    candidate: TokenSeq,
    reference: TokenSeq,
    stem: Callable[[str], str] = porter_stem,
) -> float:
    """Recall-weighted harmonic mean of unigram precision/recall with a
    fragmentation penalty of 0.5 * (chunks/matches)^3.

    Alignment is greedy one-to-one in two stages (exact, then stem). The
    synonymy stage is a no-op hook: pass a ``stem`` that folds synonyms to
    enable it.
    """
    if not candidate:
        raise EmptyCandidateError("METEOR candidate is empty")
    if not reference:
        raise EmptyReferenceError("METEOR reference is empty")
    pairs = _greedy_align(candidate, reference, stem)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(candidate)
    recall = m / len(reference)
    f_mean = 10 * precision * recall / (recall + 9 * precision)
    pairs.sort()
    chunks = 1
    for (c_prev, r_prev), (c_next, r_next) in zip(pairs, pairs[1:]):
        if c_next != c_prev + 1 or r_next != r_prev + 1:
            chunks += 1
    penalty = 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)


def meteor_best(
    candidate: TokenSeq,
    references: Sequence[TokenSeq],
    stem: Callable[[str], str] = porter_stem,
) -> float:
    if not references:
        raise NoReferencesError("METEOR needs at least one reference")
    return max(meteor(candidate, ref, stem) for ref in references)


def _tfidf_vector(
    tokens: TokenSeq, n: int, df: Mapping[tuple, int], total_items: int
) -> dict[tuple, float]:
    # grams in no reference anywhere keep df=0 and hence a positive IDF:
    # they cannot match, but they do dilute the candidate's norm
    return {
        gram: count * max(0.0, math.log(total_items / (1 + df.get(gram, 0))))
        for gram, count in ngram_counts(tokens, n).items()
    }


def _cosine(u: Mapping[tuple, float], v: Mapping[tuple, float]) -> float:
    norm_u = math.sqrt(sum(w * w for w in u.values()))
    norm_v = math.sqrt(sum(w * w for w in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    dot = sum(w * v[gram] for gram, w in u.items() if gram in v)
    return dot / (norm_u * norm_v)


def cider(
    candidates: Mapping[str, TokenSeq],
    references: Mapping[str, Sequence[TokenSeq]],
    scale: float = 1.0,
    max_n: int = 4,
) -> tuple[dict[str, float], float]:
    """Consensus scoring via TF-IDF n-gram cosine, n = 1..max_n.

    IDF uses the whole item set as base with an add-one denominator,
    log(|I| / (1 + df)), clamped at 0 so tiny corpora never produce negative
    weights. An empty candidate scores 0 (zero vector). Returns per-item
    scores and their mean.
    """
    items = list(candidates)
    if not items:
        return {}, 0.0
    for item in items:
        refs = references.get(item)
        if not refs or not any(refs):
            raise NoReferencesError(f"item {item!r} has no non-empty reference")
    if len(items) == 1:
        warnings.warn(
            "CIDEr over a single-item corpus: IDF degenerates and scores may be 0",
            SingleItemCorpusWarning,
            stacklevel=2,
        )
    total = len(items)
    scores = {item: 0.0 for item in items}
    for n in range(1, max_n + 1):
        df = Counter()
        for item in items:
            seen = set()
            for ref in references[item]:
                seen.update(ngram_counts(ref, n))
            df.update(seen)
        for item in items:
            cand_vec = _tfidf_vector(candidates[item], n, df, total)
            sims = [
                _cosine(cand_vec, _tfidf_vector(ref, n, df, total))
                for ref in references[item]
            ]
            scores[item] += sum(sims) / len(sims)
    for item in items:
        scores[item] = scale * scores[item] / max_n
    mean = sum(scores.values()) / total
    return scores, mean
