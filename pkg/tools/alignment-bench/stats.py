"""
Nonparametric test battery.

Friedman with Kendall's W and the Nemenyi critical difference compare models
across topics (blocks); Kruskal-Wallis with Dunn's pairwise z tests and a
Bonferroni adjustment compare independent learner groups. Average ranks
resolve ties everywhere; tie correction is on by default.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from scipy.stats import rankdata

from special import chi_square_sf, normal_sf

# Two-tailed Nemenyi critical values q_alpha for k = 2..20 (studentized range / sqrt(2)).
NEMENYI_Q = {
    0.05: (
        1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219,
        3.268, 3.313, 3.352, 3.389, 3.423, 3.455, 3.485, 3.513, 3.539,
    ),
    0.10: (
        1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
        3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
    ),
}
NEMENYI_MIN_K = 2
NEMENYI_MAX_K = NEMENYI_MIN_K + len(NEMENYI_Q[0.05]) - 1


class StatsError(ValueError):
    """Raised when a test's preconditions do not hold."""


class NemenyiCoverageError(StatsError):
    """Raised when k or alpha fall outside the embedded critical-value table."""


class Direction(StrEnum):
    HIGHER_IS_BETTER = 'higher_is_better'
    LOWER_IS_BETTER = 'lower_is_better'


@dataclass(frozen=True)
class RankMatrix:
    ranks: np.ndarray
    labels: tuple[str, ...]
    direction: Direction = Direction.HIGHER_IS_BETTER

    @property
    def n(self) -> int:
        return int(self.ranks.shape[0])

    @property
    def k(self) -> int:
        return int(self.ranks.shape[1])

    def column_rank_sums(self) -> np.ndarray:
        return self.ranks.sum(axis=0)

    def mean_ranks(self) -> dict[str, float]:
        return {label: float(value) for label, value in zip(self.labels, self.ranks.mean(axis=0))}


@dataclass(frozen=True)
class FriedmanResult:
    chi_square: float
    df: int
    p_value: float
    kendalls_w: float
    n: int
    k: int
    tie_corrected: bool
    mean_ranks: dict[str, float] = field(default_factory=dict)
    direction: Direction = Direction.HIGHER_IS_BETTER
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            'chi_square': self.chi_square,
            'df': self.df,
            'p_value': self.p_value,
            'kendalls_w': self.kendalls_w,
            'n': self.n,
            'k': self.k,
            'tie_corrected': self.tie_corrected,
            'degenerate': self.degenerate,
            'direction': str(self.direction),
            'mean_ranks': self.mean_ranks,
        }


@dataclass(frozen=True)
class NemenyiResult:
    critical_difference: float
    alpha: float
    mean_ranks: dict[str, float]
    significant: dict[tuple[str, str], bool]
    q_alpha: float
    n: int
    k: int

    def difference(self, first: str, second: str) -> float:
        return abs(self.mean_ranks[first] - self.mean_ranks[second])

    def to_dict(self) -> dict:
        return {
            'critical_difference': self.critical_difference,
            'alpha': self.alpha,
            'q_alpha': self.q_alpha,
            'n': self.n,
            'k': self.k,
            'mean_ranks': self.mean_ranks,
            'pairs': [
                {
                    'a': first,
                    'b': second,
                    'mean_rank_difference': self.difference(first, second),
                    'significant': verdict,
                }
                for (first, second), verdict in self.significant.items()
            ],
        }


@dataclass(frozen=True)
class KruskalWallisResult:
    h_statistic: float
    df: int
    p_value: float
    group_mean_ranks: dict[str, float]
    tie_corrected: bool
    group_sizes: dict[str, int] = field(default_factory=dict)
    n_total: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            'h_statistic': self.h_statistic,
            'df': self.df,
            'p_value': self.p_value,
            'tie_corrected': self.tie_corrected,
            'degenerate': self.degenerate,
            'n_total': self.n_total,
            'group_sizes': self.group_sizes,
            'group_mean_ranks': self.group_mean_ranks,
        }


@dataclass(frozen=True)
class DunnComparison:
    group_a: str
    group_b: str
    z: float
    p_unadjusted: float
    p_bonferroni: float
    significant_at_adjusted_alpha: bool


@dataclass(frozen=True)
class DunnResult:
    comparisons: tuple[DunnComparison, ...]
    alpha: float
    adjusted_alpha: float
    tie_corrected: bool

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha,
            'adjusted_alpha': self.adjusted_alpha,
            'tie_corrected': self.tie_corrected,
            'comparisons': [
                {
                    'group_a': comparison.group_a,
                    'group_b': comparison.group_b,
                    'z': comparison.z,
                    'p_unadjusted': comparison.p_unadjusted,
                    'p_bonferroni': comparison.p_bonferroni,
                    'significant_at_adjusted_alpha': comparison.significant_at_adjusted_alpha,
                }
                for comparison in self.comparisons
            ],
        }


def as_matrix(values: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise StatsError(f'expected an n x k matrix, got shape {matrix.shape}.')
    n, k = matrix.shape
    if n < 2 or k < 2:
        raise StatsError(f'need at least 2 rows and 2 columns, got {n} x {k}.')
    if not np.all(np.isfinite(matrix)):
        raise StatsError('matrix contains non-finite cells.')
    return matrix


def default_labels(count: int, prefix: str) -> tuple[str, ...]:
    return tuple(f'{prefix}{index + 1}' for index in range(count))


def rank_within_rows(
    values: Sequence[Sequence[float]] | np.ndarray,
    direction: Direction = Direction.HIGHER_IS_BETTER,
    labels: Sequence[str] | None = None,
) -> RankMatrix:
    """Rank each row; the best cell gets rank k, ties share the average rank."""
    matrix = as_matrix(values)
    if Direction(direction) is Direction.LOWER_IS_BETTER:
        matrix = -matrix
    labels = tuple(labels) if labels is not None else default_labels(matrix.shape[1], 'M')
    if len(labels) != matrix.shape[1]:
        raise StatsError(f'{len(labels)} labels for {matrix.shape[1]} columns.')
    return RankMatrix(ranks=rankdata(matrix, axis=1), labels=labels, direction=Direction(direction))


def tie_sum(values: np.ndarray) -> int:
    """Sum of t^3 - t over groups of equal values."""
    _, counts = np.unique(values, return_counts=True)
    return int(sum(int(t) ** 3 - int(t) for t in counts))


def kendalls_w_from_chi_square(chi_square: float, n: int, k: int) -> float:
    return chi_square / (n * (k - 1))


def friedman_test(
    values: Sequence[Sequence[float]] | np.ndarray,
    *,
    tie_correction: bool = True,
    labels: Sequence[str] | None = None,
    direction: Direction = Direction.HIGHER_IS_BETTER,
) -> FriedmanResult:
    matrix = as_matrix(values)
    ranked = rank_within_rows(matrix, direction, labels)
    n, k = ranked.n, ranked.k
    df = k - 1

    row_ties = sum(tie_sum(row) for row in matrix)
    max_ties = n * k * (k * k - 1)
    if row_ties == max_ties:
        return FriedmanResult(
            chi_square=0.0,
            df=df,
            p_value=1.0,
            kendalls_w=0.0,
            n=n,
            k=k,
            tie_corrected=tie_correction,
            mean_ranks=ranked.mean_ranks(),
            direction=ranked.direction,
            degenerate=True,
        )

    rank_sums = ranked.column_rank_sums()
    numerator = 12.0 * float(np.sum(rank_sums ** 2)) - 3.0 * n * n * k * (k + 1) ** 2
    chi_square = max(0.0, numerator / (n * k * (k + 1)))
    corrected = tie_correction and row_ties > 0
    if corrected:
        chi_square /= 1.0 - row_ties / max_ties

    return FriedmanResult(
        chi_square=chi_square,
        df=df,
        p_value=chi_square_sf(chi_square, df),
        kendalls_w=min(1.0, kendalls_w_from_chi_square(chi_square, n, k)),
        n=n,
        k=k,
        tie_corrected=corrected,
        mean_ranks=ranked.mean_ranks(),
        direction=ranked.direction,
    )


def nemenyi_q(k: int, alpha: float) -> float:
    table = next((row for level, row in NEMENYI_Q.items() if math.isclose(level, alpha)), None)
    if table is None:
        raise NemenyiCoverageError(f'alpha must be 0.05 or 0.10, got {alpha}.')
    if not NEMENYI_MIN_K <= k <= NEMENYI_MAX_K:
        raise NemenyiCoverageError(f'k must be between {NEMENYI_MIN_K} and {NEMENYI_MAX_K}, got {k}.')
    return table[k - NEMENYI_MIN_K]


def critical_difference(k: int, n: int, alpha: float = 0.05) -> float:
    return nemenyi_q(k, alpha) * math.sqrt(k * (k + 1) / (6.0 * n))


def nemenyi(
    values: Sequence[Sequence[float]] | np.ndarray,
    alpha: float = 0.05,
    labels: Sequence[str] | None = None,
    *,
    direction: Direction = Direction.HIGHER_IS_BETTER,
) -> NemenyiResult:
    ranked = rank_within_rows(values, direction, labels)
    q_alpha = nemenyi_q(ranked.k, alpha)
    cd = q_alpha * math.sqrt(ranked.k * (ranked.k + 1) / (6.0 * ranked.n))
    mean_ranks = ranked.mean_ranks()
    significant = {
        (first, second): abs(mean_ranks[first] - mean_ranks[second]) > cd
        for first, second in itertools.combinations(ranked.labels, 2)
    }
    return NemenyiResult(
        critical_difference=cd,
        alpha=alpha,
        mean_ranks=mean_ranks,
        significant=significant,
        q_alpha=q_alpha,
        n=ranked.n,
        k=ranked.k,
    )


@dataclass(frozen=True)
class JointRanks:
    """Observations of all groups ranked together."""

    ranks_by_group: tuple[np.ndarray, ...]
    labels: tuple[str, ...]
    n_total: int
    ties: int

    def mean_ranks(self) -> dict[str, float]:
        return {label: float(ranks.mean()) for label, ranks in zip(self.labels, self.ranks_by_group)}

    def sizes(self) -> dict[str, int]:
        return {label: int(ranks.size) for label, ranks in zip(self.labels, self.ranks_by_group)}


def joint_ranks(groups: Sequence[Sequence[float]], labels: Sequence[str] | None = None) -> JointRanks:
    if len(groups) < 2:
        raise StatsError(f'need at least 2 groups, got {len(groups)}.')
    arrays = [np.asarray(group, dtype=np.float64).ravel() for group in groups]
    for index, array in enumerate(arrays):
        if array.size == 0:
            raise StatsError(f'group {index + 1} is empty.')
        if not np.all(np.isfinite(array)):
            raise StatsError(f'group {index + 1} contains non-finite values.')
    labels = tuple(labels) if labels is not None else default_labels(len(arrays), 'G')
    if len(labels) != len(arrays):
        raise StatsError(f'{len(labels)} labels for {len(arrays)} groups.')

    pooled = np.concatenate(arrays)
    ranks = rankdata(pooled)
    bounds = np.cumsum([0, *(array.size for array in arrays)])
    return JointRanks(
        ranks_by_group=tuple(ranks[bounds[i]:bounds[i + 1]] for i in range(len(arrays))),
        labels=labels,
        n_total=int(pooled.size),
        ties=tie_sum(pooled),
    )


def kruskal_wallis(
    groups: Sequence[Sequence[float]],
    *,
    tie_correction: bool = True,
    labels: Sequence[str] | None = None,
) -> KruskalWallisResult:
    joint = joint_ranks(groups, labels)
    total = joint.n_total
    if total < 3:
        raise StatsError(f'need at least 3 observations, got {total}.')
    df = len(joint.labels) - 1
    max_ties = total ** 3 - total

    if joint.ties == max_ties:
        return KruskalWallisResult(
            h_statistic=0.0,
            df=df,
            p_value=1.0,
            group_mean_ranks=joint.mean_ranks(),
            tie_corrected=tie_correction,
            group_sizes=joint.sizes(),
            n_total=total,
            degenerate=True,
        )

    weighted = sum(float(ranks.sum()) ** 2 / ranks.size for ranks in joint.ranks_by_group)
    numerator = 12.0 * weighted - 3.0 * total * (total + 1) ** 2
    h_statistic = max(0.0, numerator / (total * (total + 1)))
    corrected = tie_correction and joint.ties > 0
    if corrected:
        h_statistic /= 1.0 - joint.ties / max_ties

    return KruskalWallisResult(
        h_statistic=h_statistic,
        df=df,
        p_value=chi_square_sf(h_statistic, df),
        group_mean_ranks=joint.mean_ranks(),
        tie_corrected=corrected,
        group_sizes=joint.sizes(),
        n_total=total,
    )


def dunn_z(
    mean_rank_a: float,
    mean_rank_b: float,
    size_a: int,
    size_b: int,
    n_total: int,
    tie_term: float = 0.0,
) -> float:
    """z for one pair; tie_term is sum(t^3 - t) / (12 (N - 1)), zero without tie correction."""
    variance = (n_total * (n_total + 1) / 12.0 - tie_term) * (1.0 / size_a + 1.0 / size_b)
    if variance <= 0.0:
        return 0.0
    return (mean_rank_a - mean_rank_b) / math.sqrt(variance)


def bonferroni(p_value: float, comparisons: int) -> float:
    return min(1.0, comparisons * p_value)


def dunn_from_mean_ranks(
    mean_ranks: Sequence[float],
    sizes: Sequence[int],
    labels: Sequence[str],
    *,
    alpha: float = 0.05,
    tie_term: float = 0.0,
) -> DunnResult:
    """Pairwise Dunn comparisons from summary mean ranks (pairs in i < j order)."""
    for label, size in zip(labels, sizes):
        if size < 1:
            raise StatsError(f'group {label} is empty.')
    n_total = int(sum(sizes))
    pairs = list(itertools.combinations(range(len(labels)), 2))
    m = len(pairs)
    if m == 0:
        raise StatsError('need at least 2 groups.')
    adjusted_alpha = alpha / m
    comparisons = []
    for i, j in pairs:
        z = dunn_z(mean_ranks[i], mean_ranks[j], sizes[i], sizes[j], n_total, tie_term)
        p_value = min(1.0, 2.0 * normal_sf(abs(z)))
        comparisons.append(
            DunnComparison(
                group_a=labels[i],
                group_b=labels[j],
                z=z,
                p_unadjusted=p_value,
                p_bonferroni=bonferroni(p_value, m),
                significant_at_adjusted_alpha=p_value < adjusted_alpha,
            )
        )
    return DunnResult(
        comparisons=tuple(comparisons),
        alpha=alpha,
        adjusted_alpha=adjusted_alpha,
        tie_corrected=tie_term > 0.0,
    )


def dunn_test(
    groups: Sequence[Sequence[float]],
    alpha: float = 0.05,
    tie_correction: bool = True,
    *,
    labels: Sequence[str] | None = None,
) -> DunnResult:
    joint = joint_ranks(groups, labels)
    tie_term = joint.ties / (12.0 * (joint.n_total - 1)) if tie_correction and joint.n_total > 1 else 0.0
    mean_ranks = joint.mean_ranks()
    sizes = joint.sizes()
    return dunn_from_mean_ranks(
        [mean_ranks[label] for label in joint.labels],
        [sizes[label] for label in joint.labels],
        joint.labels,
        alpha=alpha,
        tie_term=tie_term,
    )


def format_p(p_value: float) -> str:
    if p_value < 0.001:
        return '< .001'
    return f'= {p_value:.3f}'.replace('0.', '.', 1)


def friedman_verdict(result: FriedmanResult, alpha: float = 0.05) -> str:
    if result.degenerate:
        return f'Friedman test over {result.k} models and {result.n} topics: every topic ties all models; no difference.'
    outcome = (
        'significant difference between models'
        if result.p_value < alpha
        else 'no significant difference between models'
    )
    return (
        f"Friedman test: chi2({result.df}) = {result.chi_square:.2f}, p {format_p(result.p_value)}, "
        f"Kendall's W = {result.kendalls_w:.2f}; {outcome} at alpha = {alpha:g}."
    )


def nemenyi_verdicts(result: NemenyiResult) -> list[str]:
    lines = []
    for (first, second), verdict in result.significant.items():
        left, right = result.mean_ranks[first], result.mean_ranks[second]
        detail = f'mean ranks {left:.3f} vs {right:.3f}, CD = {result.critical_difference:.3f}'
        if verdict:
            better, worse = (first, second) if left > right else (second, first)
            lines.append(f'{better} significantly outperforms {worse} ({detail}).')
        else:
            lines.append(f'{first} vs {second}: not significant ({detail}).')
    return lines


def kruskal_verdict(result: KruskalWallisResult, alpha: float = 0.05) -> str:
    if result.degenerate:
        return f'Kruskal-Wallis test over {result.n_total} scores: all values identical; no difference.'
    outcome = 'significant' if result.p_value < alpha else 'not significant'
    return (
        f'Kruskal-Wallis test: chi2({result.df}) = {result.h_statistic:.2f}, '
        f'p {format_p(result.p_value)}; {outcome} at alpha = {alpha:g}.'
    )


def dunn_verdicts(result: DunnResult) -> list[str]:
    return [
        f"{comparison.group_a} vs {comparison.group_b}: z = {comparison.z:.3f}, "
        f"p {format_p(comparison.p_unadjusted)} "
        f"({'Significant' if comparison.significant_at_adjusted_alpha else 'Not Significant'} "
        f"at alpha = {result.adjusted_alpha:.3f})"
        for comparison in result.comparisons
    ]
