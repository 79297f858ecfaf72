# problems/line_search.py
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

from config.errors import InvalidInputError
from metrics.evaluation import argmax_labels, avg_f1
from problems.labeling import LabelingInstance, build_labeling_problem
from solvers.pfdr import SolveConfig, solve

logger = logging.getLogger(__name__)


def _score(instance: LabelingInstance, lam: float, config: SolveConfig, mode: str) -> float:
    result = solve(build_labeling_problem(instance.with_lambda(lam), mode), config)
    labels = argmax_labels(result.x)
    score = avg_f1(labels, instance.labels_true, instance.train, instance.num_labels)
    logger.info("λ=%g: avg F1 %.6f on %d training points (%s)", lam, score,
                instance.train.size, result.log.stop_reason)
    return score


def line_search_lambda(candidates: Sequence[float], instance: LabelingInstance,
                       config: Optional[SolveConfig] = None, mode: str = "pfdr",
                       threads: int = 1) -> Tuple[float, List[Tuple[float, float]]]:
    """Constant edge weight maximizing avg F1 on the training subset; ties -> smaller λ.

    Returns (best λ, [(λ, score) in candidate order]).
    """
    lams = [float(c) for c in candidates]
    if not lams:
        raise InvalidInputError("line search needs at least one candidate")
    if instance.labels_true is None or instance.train is None or instance.train.size == 0:
        raise InvalidInputError("line search needs ground-truth labels and a nonempty training subset")
    config = config or SolveConfig()

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(lambda lam: _score(instance, lam, config, mode), lams))
    else:
        scores = [_score(instance, lam, config, mode) for lam in lams]

    best = max(range(len(lams)), key=lambda i: (scores[i], -lams[i]))
    return lams[best], list(zip(lams, scores))
