"""Word error rate scoring.

Normalization is deliberately minimal: lowercase, keep letters, digits,
apostrophes and whitespace, split on whitespace runs.
"""

import logging
from typing import Iterable, List, Sequence

from .errors import EmptyReferenceError
from .schemas import WerSummary

logger = logging.getLogger(__name__)

OP_OK, OP_SUB, OP_INS, OP_DEL = 0, 1, 2, 3


def normalize_text(s: str) -> List[str]:
    kept = ''.join(c for c in s.lower() if c.isalnum() or c == "'" or c.isspace())
    return kept.split()


def wer(ref_tokens: Sequence[str], hyp_tokens: Sequence[str]) -> WerSummary:
    """Minimum-edit alignment with unit costs; wer = (S + D + I) / len(ref)."""
    r, h = list(ref_tokens), list(hyp_tokens)
    if not r:
        raise EmptyReferenceError('WER needs a nonempty reference')

    costs = [[0] * (len(h) + 1) for _ in range(len(r) + 1)]
    backtrace = [[OP_OK] * (len(h) + 1) for _ in range(len(r) + 1)]
    for i in range(1, len(r) + 1):
        costs[i][0] = i
        backtrace[i][0] = OP_DEL
    for j in range(1, len(h) + 1):
        costs[0][j] = j
        backtrace[0][j] = OP_INS

    for i in range(1, len(r) + 1):
        for j in range(1, len(h) + 1):
            if r[i - 1] == h[j - 1]:
                costs[i][j] = costs[i - 1][j - 1]
                backtrace[i][j] = OP_OK
                continue
            substitution = costs[i - 1][j - 1] + 1
            insertion = costs[i][j - 1] + 1
            deletion = costs[i - 1][j] + 1
            costs[i][j] = min(substitution, insertion, deletion)
            if costs[i][j] == substitution:
                backtrace[i][j] = OP_SUB
            elif costs[i][j] == insertion:
                backtrace[i][j] = OP_INS
            else:
                backtrace[i][j] = OP_DEL

    i, j = len(r), len(h)
    n_sub = n_del = n_ins = 0
    while i > 0 or j > 0:
        op = backtrace[i][j]
        if op == OP_OK:
            i, j = i - 1, j - 1
        elif op == OP_SUB:
            n_sub += 1
            i, j = i - 1, j - 1
        elif op == OP_INS:
            n_ins += 1
            j -= 1
        else:
            n_del += 1
            i -= 1

    return WerSummary(
        wer=(n_sub + n_del + n_ins) / len(r),
        substitutions=n_sub,
        deletions=n_del,
        insertions=n_ins,
        ref_words=len(r),
    )


def corpus_wer(results: Iterable[WerSummary]) -> WerSummary:
    """Pools utterance counts: sum of errors over sum of reference words."""
    results = list(results)
    n_sub = sum(r.substitutions for r in results)
    n_del = sum(r.deletions for r in results)
    n_ins = sum(r.insertions for r in results)
    n_ref = sum(r.ref_words for r in results)
    if n_ref == 0:
        raise EmptyReferenceError('corpus WER needs at least one reference word')
    return WerSummary(
        wer=(n_sub + n_del + n_ins) / n_ref,
        substitutions=n_sub,
        deletions=n_del,
        insertions=n_ins,
        ref_words=n_ref,
    )


def score_text(reference: str, hypothesis: str) -> WerSummary:
    return wer(normalize_text(reference), normalize_text(hypothesis))
