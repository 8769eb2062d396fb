"""Worst-case attack search against classification pipelines.

A pipeline is any callable ``(sentence, gold_label) -> Prediction``; the
search is black-box and only reads the predicted label and the probability
assigned to the gold label. Perturbations are enumerated in a fixed order
(token index, then edit family, then generator order), so attack runs and
robustness reports are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .perturb import (
    AttackType,
    Edit,
    KeyboardAdjacency,
    PerturbationSet,
    perturbation_set,
)
from .text import DEFAULT_CHARSET, CharSet, DataError, Sentence, load_stopwords


@dataclass(frozen=True)
class AttackBudget:
    """Number of distinct words the adversary may edit, and how to search."""

    order: int = 1
    strategy: str = "greedy"  # greedy | exhaustive

    def __post_init__(self):
        if self.order < 1:
            raise DataError("attack order must be >= 1")
        if self.strategy not in ("greedy", "exhaustive"):
            raise DataError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "exhaustive" and self.order > 2:
            raise DataError("exhaustive search supports order <= 2 only")


@dataclass(frozen=True)
class AttackResult:
    success: bool
    adversarial: Sentence | None
    edits: tuple[Edit, ...]
    queries: int  # perturbed-sentence evaluations (the clean pre-check is not counted)
    min_prob_true: float | None
    clean_correct: bool
    best_edit: Edit | None = None  # lowest gold-probability edit, for greedy chaining

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "adversarial": self.adversarial.text() if self.adversarial else None,
            "edits": [
                {"token_index": e.token_index, "kind": e.kind.value, "result": e.result}
                for e in self.edits
            ],
            "queries": self.queries,
            "min_prob_true": self.min_prob_true,
            "clean_correct": self.clean_correct,
        }


def _require_gold(s: Sentence) -> int:
    if s.label is None:
        raise DataError("attack target sentence has no gold label")
    return s.label


def _restricted(pset: PerturbationSet, exclude: frozenset[int]) -> list[Edit]:
    return [e for e in pset.edits if e.token_index not in exclude]


@dataclass
class _StageOutcome:
    flip: Edit | None
    best: Edit | None
    min_p: float | None
    queries: int


def _search_stage(pipeline, s: Sentence, gold: int, edits: list[Edit]) -> _StageOutcome:
    """Try every edit in order; stop at the first label flip. Tracks the
    strictly-lowest gold probability seen (earliest edit wins ties)."""
    best: Edit | None = None
    min_p: float | None = None
    queries = 0
    for edit in edits:
        pred = pipeline(edit.apply(s), gold)
        queries += 1
        p = pred.prob_true if pred.prob_true is not None else pred.confidence
        if min_p is None or p < min_p:
            min_p = p
            best = edit
        if pred.label != gold:
            return _StageOutcome(edit, best, min_p, queries)
    return _StageOutcome(None, best, min_p, queries)


def first_order_attack(
    pipeline,
    s: Sentence,
    attack: AttackType,
    stopwords: frozenset[str] | None = None,
    charset: CharSet = DEFAULT_CHARSET,
    adjacency: KeyboardAdjacency | None = None,
) -> AttackResult:
    """Try all single-word perturbations until one flips the prediction.

    A sentence the pipeline already misclassifies is a trivial success with
    zero edits. On failure the result carries the minimum gold probability
    observed and the edit achieving it.
    """
    stopwords = stopwords if stopwords is not None else load_stopwords()
    gold = _require_gold(s)
    clean = pipeline(s, gold)
    if clean.label != gold:
        return AttackResult(True, s, (), 0, clean.prob_true, clean_correct=False)
    edits = list(perturbation_set(s, attack, stopwords, charset, adjacency).edits)
    out = _search_stage(pipeline, s, gold, edits)
    if out.flip is not None:
        return AttackResult(True, out.flip.apply(s), (out.flip,), out.queries,
                            out.min_p, clean_correct=True, best_edit=out.best)
    return AttackResult(False, None, (), out.queries, out.min_p,
                        clean_correct=True, best_edit=out.best)


def greedy_attack(
    pipeline,
    s: Sentence,
    attack: AttackType,
    order: int,
    stopwords: frozenset[str] | None = None,
    charset: CharSet = DEFAULT_CHARSET,
    adjacency: KeyboardAdjacency | None = None,
) -> AttackResult:
    """Stagewise search: each stage fixes the lowest-gold-probability edit
    from the previous stage and searches the remaining (unedited) words."""
    stopwords = stopwords if stopwords is not None else load_stopwords()
    gold = _require_gold(s)
    clean = pipeline(s, gold)
    queries = 0
    if clean.label != gold:
        return AttackResult(True, s, (), queries, clean.prob_true, clean_correct=False)
    current = s
    applied: list[Edit] = []
    edited: set[int] = set()
    min_p: float | None = None
    overall_best: Edit | None = None
    for stage in range(order):
        pset = perturbation_set(current, attack, stopwords, charset, adjacency)
        edits = _restricted(pset, frozenset(edited))
        out = _search_stage(pipeline, current, gold, edits)
        queries += out.queries
        if out.min_p is not None and (min_p is None or out.min_p < min_p):
            min_p = out.min_p
            overall_best = out.best
        if out.flip is not None:
            applied.append(out.flip)
            return AttackResult(True, out.flip.apply(current), tuple(applied), queries,
                                min_p, clean_correct=True, best_edit=overall_best)
        if out.best is None:
            break  # nothing left to edit
        applied.append(out.best)
        edited.add(out.best.token_index)
        current = out.best.apply(current)
    return AttackResult(False, None, (), queries, min_p,
                        clean_correct=True, best_edit=overall_best)


def exhaustive_attack(
    pipeline,
    s: Sentence,
    attack: AttackType,
    order: int,
    stopwords: frozenset[str] | None = None,
    charset: CharSet = DEFAULT_CHARSET,
    adjacency: KeyboardAdjacency | None = None,
) -> AttackResult:
    """Try all edit subsets of size <= order (order <= 2). A single-edit
    flip short-circuits the pair search."""
    if order > 2:
        raise DataError("exhaustive search supports order <= 2 only")
    stopwords = stopwords if stopwords is not None else load_stopwords()
    gold = _require_gold(s)
    clean = pipeline(s, gold)
    queries = 0
    if clean.label != gold:
        return AttackResult(True, s, (), queries, clean.prob_true, clean_correct=False)
    edits = list(perturbation_set(s, attack, stopwords, charset, adjacency).edits)
    out = _search_stage(pipeline, s, gold, edits)
    queries += out.queries
    min_p = out.min_p
    if out.flip is not None:
        return AttackResult(True, out.flip.apply(s), (out.flip,), queries,
                            min_p, clean_correct=True, best_edit=out.best)
    if order >= 2:
        for i, first in enumerate(edits):
            base = first.apply(s)
            for second in edits[i + 1:]:
                if second.token_index == first.token_index:
                    continue
                pred = pipeline(second.apply(base), gold)
                queries += 1
                p = pred.prob_true if pred.prob_true is not None else pred.confidence
                if min_p is None or p < min_p:
                    min_p = p
                if pred.label != gold:
                    return AttackResult(True, second.apply(base), (first, second),
                                        queries, min_p, clean_correct=True,
                                        best_edit=out.best)
    return AttackResult(False, None, (), queries, min_p,
                        clean_correct=True, best_edit=out.best)


def run_attack(pipeline, s: Sentence, attack: AttackType, budget: AttackBudget,
               stopwords: frozenset[str] | None = None,
               charset: CharSet = DEFAULT_CHARSET,
               adjacency: KeyboardAdjacency | None = None) -> AttackResult:
    if budget.strategy == "exhaustive":
        return exhaustive_attack(pipeline, s, attack, budget.order, stopwords, charset, adjacency)
    if budget.order == 1:
        return first_order_attack(pipeline, s, attack, stopwords, charset, adjacency)
    return greedy_attack(pipeline, s, attack, budget.order, stopwords, charset, adjacency)


def successful_flips(
    pipeline,
    s: Sentence,
    attack: AttackType,
    stopwords: frozenset[str] | None = None,
    charset: CharSet = DEFAULT_CHARSET,
    adjacency: KeyboardAdjacency | None = None,
) -> list[Sentence]:
    """All single-edit perturbations that flip a correctly classified
    sentence (full enumeration, no early stop). Used by adversarial
    fine-tuning."""
    stopwords = stopwords if stopwords is not None else load_stopwords()
    gold = _require_gold(s)
    if pipeline(s, gold).label != gold:
        return []
    flips = []
    for edit in perturbation_set(s, attack, stopwords, charset, adjacency).edits:
        variant = edit.apply(s)
        if pipeline(variant, gold).label != gold:
            flips.append(variant)
    return flips


@dataclass
class RobustnessReport:
    """Fraction of examples on which every searched perturbation (and the
    clean input) is classified correctly."""

    value: float
    clean_accuracy: float
    attack: AttackType
    budget: AttackBudget
    n_examples: int
    total_queries: int
    breakdown: dict[str, int] = field(default_factory=dict)
    results: list[AttackResult] = field(default_factory=list)
    corpus_hash: str | None = None

    def to_dict(self, include_results: bool = True) -> dict:
        d = {
            "value": self.value,
            "clean_accuracy": self.clean_accuracy,
            "attack": self.attack.value,
            "order": self.budget.order,
            "strategy": self.budget.strategy,
            "n_examples": self.n_examples,
            "total_queries": self.total_queries,
            "breakdown": dict(self.breakdown),
            "corpus_hash": self.corpus_hash,
        }
        if include_results:
            d["results"] = [r.to_dict() for r in self.results]
        return d


def robustness(
    pipeline,
    dataset: list[Sentence],
    attack: AttackType,
    budget: AttackBudget,
    stopwords: frozenset[str] | None = None,
    charset: CharSet = DEFAULT_CHARSET,
    adjacency: KeyboardAdjacency | None = None,
    corpus_hash: str | None = None,
) -> RobustnessReport:
    """Worst-case accuracy over the searched perturbation space.

    Already-misclassified examples count as zero without any search. Greedy
    budgets explore a subset of the exhaustive space, so greedy robustness
    upper-bounds exhaustive robustness at equal order.
    """
    if not dataset:
        raise DataError("empty evaluation dataset")
    stopwords = stopwords if stopwords is not None else load_stopwords()
    results = []
    breakdown: dict[str, int] = {}
    robust = clean = queries = 0
    for s in dataset:
        res = run_attack(pipeline, s, attack, budget, stopwords, charset, adjacency)
        results.append(res)
        queries += res.queries
        clean += res.clean_correct
        if not res.success:
            robust += 1
        else:
            key = res.edits[-1].kind.value if res.edits else "clean_error"
            breakdown[key] = breakdown.get(key, 0) + 1
    return RobustnessReport(
        value=robust / len(dataset),
        clean_accuracy=clean / len(dataset),
        attack=attack,
        budget=budget,
        n_examples=len(dataset),
        total_queries=queries,
        breakdown=breakdown,
        results=results,
        corpus_hash=corpus_hash,
    )
