"""Repeated-measures and mixed-design ANOVA with sphericity diagnostics.

Balanced designs only: every subject contributes one value per
(load x distribution) cell; the mixed design additionally requires equal
group sizes.  Within-subject effects carry Mauchly's W and the
Greenhouse-Geisser epsilon computed from orthonormal-contrast covariance
(pooled within groups for the mixed design), with the corrected p-value
obtained by shrinking both F degrees of freedom by epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import f as _f_dist

from .errors import DegenerateDataError, DesignError

_REL_TOL = 1e-12


@dataclass(frozen=True)
class CellData:
    """One subject-level cell value of one metric."""

    subject: str
    group: str
    load: int
    distribution: str
    value: float


@dataclass(frozen=True)
class EffectRow:
    effect: str
    F: float
    df_num: float
    df_den: float
    p: float
    mauchly_W: float | None = None
    mauchly_p: float | None = None
    gg_epsilon: float | None = None
    p_gg: float | None = None


@dataclass(frozen=True)
class AnovaResult:
    design: str                   # "rm" | "mixed"
    effects: tuple[EffectRow, ...]

    def effect(self, name: str) -> EffectRow:
        for row in self.effects:
            if row.effect == name:
                return row
        raise KeyError(name)


# --------------------------------------------------------------------------
# pivoting
# --------------------------------------------------------------------------

def _pivot(cells: list[CellData]):
    """cells -> (Y[n, a, b], subjects, groups_of_subject, loads, dists)."""
    subjects = sorted({c.subject for c in cells})
    loads = sorted({c.load for c in cells})
    dists = sorted({c.distribution for c in cells})
    group_of: dict[str, str] = {}
    for c in cells:
        prev = group_of.setdefault(c.subject, c.group)
        if prev != c.group:
            raise DesignError(f"subject {c.subject} appears in two groups")
    idx = {(c.subject, c.load, c.distribution): c.value for c in cells}
    if len(idx) != len(cells):
        raise DesignError("duplicate (subject, load, distribution) cells")
    Y = np.empty((len(subjects), len(loads), len(dists)))
    missing = []
    for i, s in enumerate(subjects):
        for j, l in enumerate(loads):
            for k, d in enumerate(dists):
                v = idx.get((s, l, d))
                if v is None:
                    missing.append((s, l, d))
                else:
                    Y[i, j, k] = v
    if missing:
        raise DesignError(f"missing cells for a balanced design: {missing[:10]}")
    if not np.isfinite(Y).all():
        raise DesignError("non-finite cell values")
    groups = [group_of[s] for s in subjects]
    return Y, subjects, groups, loads, dists


# --------------------------------------------------------------------------
# F ratio conventions for degenerate sums of squares
# --------------------------------------------------------------------------

def _f_and_p(ss_eff: float, df1: float, ss_err: float, df2: float,
             scale: float) -> tuple[float, float]:
    tol = scale * _REL_TOL
    if ss_eff <= tol and ss_err <= tol:
        return 0.0, 1.0
    if ss_err <= tol:
        return math.inf, 0.0
    F = (ss_eff / df1) / (ss_err / df2)
    return F, float(_f_dist.sf(F, df1, df2))


def _p_gg(F: float, df1: float, df2: float, eps: float, p_raw: float) -> float:
    """Greenhouse-Geisser corrected p: F evaluated at epsilon-shrunk df.

    Reported as max(corrected, uncorrected): shrinking both df can nudge p
    slightly below the uncorrected value when F < ~1.2 (far from
    significance); the correction exists to be conservative, so it is never
    allowed to strengthen a result.
    """
    if not math.isfinite(F):
        return 0.0
    if F == 0.0:
        return 1.0
    return max(float(_f_dist.sf(F, eps * df1, eps * df2)), p_raw)


# --------------------------------------------------------------------------
# sphericity diagnostics
# --------------------------------------------------------------------------

def _helmert_contrasts(k: int) -> np.ndarray:
    """Orthonormal (k-1) x k contrast matrix (rows orthogonal to constant)."""
    C = np.zeros((k - 1, k))
    for i in range(1, k):
        C[i - 1, :i] = 1.0
        C[i - 1, i] = -i
        C[i - 1] /= math.sqrt(i * (i + 1))
    return C


def _contrast_cov(scores: np.ndarray, groups: list[str] | None) -> tuple[np.ndarray, int]:
    """Covariance of contrast scores; pooled within groups when given."""
    n = scores.shape[0]
    if groups is None:
        resid = scores - scores.mean(axis=0)
        df = n - 1
    else:
        resid = scores.astype(float).copy()
        uniq = sorted(set(groups))
        for g in uniq:
            mask = np.array([x == g for x in groups])
            resid[mask] -= scores[mask].mean(axis=0)
        df = n - len(uniq)
    if df < 1:
        raise DegenerateDataError("not enough subjects to estimate covariance")
    return (resid.T @ resid) / df, df


def _mauchly_from_cov(S: np.ndarray, df: int) -> tuple[float, float]:
    d = S.shape[0]
    if d == 1:
        return 1.0, 1.0
    tr = float(np.trace(S))
    if tr <= 0.0:
        return 1.0, 1.0  # no contrast variance at all: trivially spherical
    if df < d:
        # rank(S) <= df < d: W is identically zero and the chi-square
        # approximation breaks down
        raise DegenerateDataError(
            f"need more subjects than factor levels for Mauchly's test "
            f"(covariance df {df} < contrast dimension {d})"
        )
    det = float(np.linalg.det(S))
    if det <= 0.0:
        raise DegenerateDataError(
            "singular contrast covariance (need more subjects than factor levels)"
        )
    W = det / (tr / d) ** d
    # chi-square approximation with the standard second-order correction
    rho = 1.0 - (2.0 * d * d + d + 2.0) / (6.0 * d * df)
    z = -df * rho * math.log(W)
    q = d * (d + 1) / 2.0 - 1.0
    w2 = ((d + 2.0) * (d - 1.0) * (d - 2.0)
          * (2.0 * d ** 3 + 6.0 * d ** 2 + 3.0 * d + 2.0)
          / (288.0 * (df * d * rho) ** 2))
    p1 = float(_chi2.sf(z, q))
    p2 = float(_chi2.sf(z, q + 4))
    p = p1 + w2 * (p2 - p1)
    return W, min(max(p, 0.0), 1.0)


def _epsilon_from_cov(S: np.ndarray) -> float:
    d = S.shape[0]
    if d == 1:
        return 1.0
    lam = np.linalg.eigvalsh(S)
    lam = np.clip(lam, 0.0, None)
    s2 = float((lam ** 2).sum())
    if s2 == 0.0:
        return 1.0  # no contrast variance: no correction to apply
    eps = float(lam.sum() ** 2 / (d * s2))
    return min(max(eps, 1.0 / d), 1.0)


def mauchly_test(values: np.ndarray) -> tuple[float, float]:
    """Mauchly's sphericity test on an (n_subjects, k_levels) score matrix.

    k = 2 returns (1, 1) by convention (sphericity cannot be violated).
    """
    Y = np.asarray(values, dtype=float)
    if Y.ndim != 2:
        raise DesignError("expected an (n_subjects, k_levels) matrix")
    k = Y.shape[1]
    if k == 2:
        return 1.0, 1.0
    if k < 2:
        raise DesignError("need at least 2 factor levels")
    C = _helmert_contrasts(k)
    S, df = _contrast_cov(Y @ C.T, None)
    return _mauchly_from_cov(S, df)


def gg_epsilon(values: np.ndarray) -> float:
    """Greenhouse-Geisser epsilon from an (n_subjects, k_levels) matrix."""
    Y = np.asarray(values, dtype=float)
    if Y.ndim != 2:
        raise DesignError("expected an (n_subjects, k_levels) matrix")
    k = Y.shape[1]
    if k < 2:
        raise DesignError("need at least 2 factor levels")
    if k == 2:
        return 1.0
    C = _helmert_contrasts(k)
    S, _ = _contrast_cov(Y @ C.T, None)
    return _epsilon_from_cov(S)


def _within_scores(Y: np.ndarray, effect: str) -> np.ndarray:
    """Per-subject orthonormal contrast scores for a within effect."""
    n, a, b = Y.shape
    if effect == "A":
        C = _helmert_contrasts(a)
        return Y.mean(axis=2) @ C.T
    if effect == "B":
        C = _helmert_contrasts(b)
        return Y.mean(axis=1) @ C.T
    if effect == "AB":
        Ca = _helmert_contrasts(a)
        Cb = _helmert_contrasts(b)
        return np.stack([(Ca @ Y[i] @ Cb.T).ravel() for i in range(n)])
    raise ValueError(effect)


def _sphericity(Y: np.ndarray, effect: str, groups: list[str] | None):
    """Returns (W, mauchly_p, epsilon); W and p are None when the contrast
    covariance is rank-deficient (fewer subjects than contrast dimensions),
    where Mauchly's test is undefined but the eigenvalue-based epsilon is not.
    """
    scores = _within_scores(Y, effect)
    if scores.shape[1] == 1:
        return 1.0, 1.0, 1.0
    S, df = _contrast_cov(scores, groups)
    eps = _epsilon_from_cov(S)
    try:
        W, p = _mauchly_from_cov(S, df)
    except DegenerateDataError:
        W, p = None, None
    return W, p, eps


# --------------------------------------------------------------------------
# the two designs
# --------------------------------------------------------------------------

def rm_anova_2way(cells: list[CellData], factors: tuple[str, str] = ("load", "task"),
                  ) -> AnovaResult:
    """Two-way fully repeated-measures ANOVA (all factors within-subject)."""
    Y, subjects, _, loads, dists = _pivot(cells)
    n, a, b = Y.shape
    if n < 2:
        raise DesignError("repeated-measures ANOVA needs at least 2 subjects")
    if a < 2 or b < 2:
        raise DesignError("both within factors need at least 2 levels")

    grand = Y.mean()
    if np.allclose(Y, Y.flat[0], rtol=0.0, atol=0.0):
        raise DegenerateDataError("all cell values identical; nothing to test")

    S = Y.mean(axis=(1, 2))
    A = Y.mean(axis=(0, 2))
    B = Y.mean(axis=(0, 1))
    AS = Y.mean(axis=2)
    BS = Y.mean(axis=1)
    AB = Y.mean(axis=0)

    ss_total = float(((Y - grand) ** 2).sum())
    ss_S = a * b * float(((S - grand) ** 2).sum())
    ss_A = n * b * float(((A - grand) ** 2).sum())
    ss_B = n * a * float(((B - grand) ** 2).sum())
    ss_AS = b * float(((AS - S[:, None] - A[None, :] + grand) ** 2).sum())
    ss_BS = a * float(((BS - S[:, None] - B[None, :] + grand) ** 2).sum())
    ss_AB = n * float(((AB - A[:, None] - B[None, :] + grand) ** 2).sum())
    ss_ABS = max(ss_total - ss_S - ss_A - ss_B - ss_AS - ss_BS - ss_AB, 0.0)

    fa, fb = factors
    rows = []
    for name, ss_eff, df1, ss_err, df2, eff_code in (
        (fa, ss_A, a - 1, ss_AS, (a - 1) * (n - 1), "A"),
        (fb, ss_B, b - 1, ss_BS, (b - 1) * (n - 1), "B"),
        (f"{fa}*{fb}", ss_AB, (a - 1) * (b - 1), ss_ABS,
         (a - 1) * (b - 1) * (n - 1), "AB"),
    ):
        F, p = _f_and_p(ss_eff, df1, ss_err, df2, ss_total)
        W, pw, eps = _sphericity(Y, eff_code, None)
        rows.append(EffectRow(name, F, float(df1), float(df2), p,
                              W, pw, eps, _p_gg(F, df1, df2, eps, p)))
    return AnovaResult("rm", tuple(rows))


def mixed_anova(cells: list[CellData], factors: tuple[str, str] = ("load", "task"),
                ) -> AnovaResult:
    """Split-plot ANOVA: one between-subject group factor, two within factors."""
    Y, subjects, groups, loads, dists = _pivot(cells)
    uniq = sorted(set(groups))
    if len(uniq) < 2:
        raise DesignError("mixed ANOVA needs at least two groups")
    sizes = [groups.count(g) for g in uniq]
    if len(set(sizes)) != 1:
        raise DesignError(f"groups must be the same size, got {dict(zip(uniq, sizes))}")
    n = sizes[0]
    if n < 2:
        raise DesignError("need at least 2 subjects per group")
    G = len(uniq)
    _, a, b = Y.shape

    # reshape to (G, n, a, b) in sorted group order
    order = np.argsort([uniq.index(g) * len(groups) + i for i, g in enumerate(groups)])
    Yg = Y[order].reshape(G, n, a, b)
    groups_sorted = [groups[i] for i in order]

    if np.allclose(Y, Y.flat[0], rtol=0.0, atol=0.0):
        raise DegenerateDataError("all cell values identical; nothing to test")

    grand = Yg.mean()
    mu_g = Yg.mean(axis=(1, 2, 3))
    mu_gi = Yg.mean(axis=(2, 3))
    mu_j = Yg.mean(axis=(0, 1, 3))
    mu_k = Yg.mean(axis=(0, 1, 2))
    mu_gj = Yg.mean(axis=(1, 3))
    mu_gk = Yg.mean(axis=(1, 2))
    mu_jk = Yg.mean(axis=(0, 1))
    mu_gjk = Yg.mean(axis=1)
    mu_gij = Yg.mean(axis=3)
    mu_gik = Yg.mean(axis=2)

    ss_total = float(((Yg - grand) ** 2).sum())
    ss_G = n * a * b * float(((mu_g - grand) ** 2).sum())
    ss_SG = a * b * float(((mu_gi - mu_g[:, None]) ** 2).sum())
    ss_A = G * n * b * float(((mu_j - grand) ** 2).sum())
    ss_GA = n * b * float(
        ((mu_gj - mu_g[:, None] - mu_j[None, :] + grand) ** 2).sum())
    ss_A_err = b * float(
        ((mu_gij - mu_gi[:, :, None] - mu_gj[:, None, :] + mu_g[:, None, None]) ** 2).sum())
    ss_B = G * n * a * float(((mu_k - grand) ** 2).sum())
    ss_GB = n * a * float(
        ((mu_gk - mu_g[:, None] - mu_k[None, :] + grand) ** 2).sum())
    ss_B_err = a * float(
        ((mu_gik - mu_gi[:, :, None] - mu_gk[:, None, :] + mu_g[:, None, None]) ** 2).sum())
    ss_AB = G * n * float(
        ((mu_jk - mu_j[:, None] - mu_k[None, :] + grand) ** 2).sum())
    ss_GAB = n * float(
        ((mu_gjk - mu_gj[:, :, None] - mu_gk[:, None, :] + mu_g[:, None, None]
          - mu_jk[None, :, :] + mu_j[None, :, None] + mu_k[None, None, :] - grand) ** 2).sum())
    ss_AB_err = max(ss_total - ss_G - ss_SG - ss_A - ss_GA - ss_A_err
                    - ss_B - ss_GB - ss_B_err - ss_AB - ss_GAB, 0.0)

    fa, fb = factors
    df_sg = G * (n - 1)
    rows = []

    F, p = _f_and_p(ss_G, G - 1, ss_SG, df_sg, ss_total)
    rows.append(EffectRow("group", F, float(G - 1), float(df_sg), p))

    within_specs = [
        (fa, ss_A, a - 1, "A"),
        (f"group*{fa}", ss_GA, (G - 1) * (a - 1), "A"),
        (fb, ss_B, b - 1, "B"),
        (f"group*{fb}", ss_GB, (G - 1) * (b - 1), "B"),
        (f"{fa}*{fb}", ss_AB, (a - 1) * (b - 1), "AB"),
        (f"group*{fa}*{fb}", ss_GAB, (G - 1) * (a - 1) * (b - 1), "AB"),
    ]
    err_for = {"A": (ss_A_err, df_sg * (a - 1)),
               "B": (ss_B_err, df_sg * (b - 1)),
               "AB": (ss_AB_err, df_sg * (a - 1) * (b - 1))}
    for name, ss_eff, df1, code in within_specs:
        ss_err, df2 = err_for[code]
        F, p = _f_and_p(ss_eff, df1, ss_err, df2, ss_total)
        W, pw, eps = _sphericity(Y, code, groups)
        rows.append(EffectRow(name, F, float(df1), float(df2), p,
                              W, pw, eps, _p_gg(F, df1, df2, eps, p)))
    return AnovaResult("mixed", tuple(rows))
