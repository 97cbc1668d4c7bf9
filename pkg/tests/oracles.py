"""Independent reference computations used as test oracles.

Nothing here imports the package's numerical code: each oracle recomputes
its answer by a different route (enumeration, quadrature, plain lstsq).
"""
import itertools
import math

import numpy as np
from scipy import integrate


def lda_exact_posterior(docs, V, K, alpha, beta):
    """Enumerate every assignment of topics to tokens and return
    ``{z_tuple: probability}`` under the collapsed LDA joint p(z | w).

    ``docs`` is a list of lists of word ids; tokens are ordered documents-first.
    """
    tokens = [(d, w) for d, doc in enumerate(docs) for w in doc]
    weights = {}
    for z in itertools.product(range(K), repeat=len(tokens)):
        n_dk = np.zeros((len(docs), K))
        n_kw = np.zeros((K, V))
        for (d, w), k in zip(tokens, z):
            n_dk[d, k] += 1
            n_kw[k, w] += 1
        logp = 0.0
        for d in range(len(docs)):
            logp += sum(math.lgamma(n_dk[d, k] + alpha) for k in range(K))
            logp -= math.lgamma(n_dk[d].sum() + K * alpha)
        for k in range(K):
            logp += sum(math.lgamma(n_kw[k, w] + beta) for w in range(V))
            logp -= math.lgamma(n_kw[k].sum() + V * beta)
        weights[z] = math.exp(logp)
    total = sum(weights.values())
    return {z: p / total for z, p in weights.items()}


def t_pdf(t, df):
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    return c * (1 + t * t / df) ** (-(df + 1) / 2)


def two_tailed_t_pvalue(t, df):
    """2 * P(T > |t|) by adaptive quadrature of the Student t density."""
    tail, _ = integrate.quad(t_pdf, abs(t), math.inf, args=(df,), epsabs=1e-13, epsrel=1e-12)
    return 2 * tail


def brute_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def lstsq_rss(X, y, cols):
    D = np.column_stack([np.ones(len(y))] + [X[:, c] for c in cols])
    beta, *_ = np.linalg.lstsq(D, y, rcond=None)
    r = y - D @ beta
    return float(r @ r)


def oracle_aic(rss, n, p):
    return n * math.log(rss / n) + 2 * (p + 2)


def greedy_stepwise_replay(X, y, names):
    """Backward-start bidirectional AIC search with every candidate model refitted
    from scratch. Returns (selected names, final AIC, move list)."""
    n, p = X.shape
    selected = set(range(p))
    current = oracle_aic(lstsq_rss(X, y, sorted(selected)), n, p)
    moves = []
    while True:
        candidates = []
        for j in sorted(selected):
            cols = sorted(selected - {j})
            candidates.append((oracle_aic(lstsq_rss(X, y, cols), n, len(cols)), 0, names[j], j))
        for j in sorted(set(range(p)) - selected):
            cols = sorted(selected | {j})
            candidates.append((oracle_aic(lstsq_rss(X, y, cols), n, len(cols)), 1, names[j], j))
        if not candidates:
            break
        best = min(candidates)
        if not best[0] < current:
            break
        if best[1] == 0:
            selected.remove(best[3])
        else:
            selected.add(best[3])
        moves.append(("drop" if best[1] == 0 else "add", best[2]))
        current = best[0]
    return [names[j] for j in sorted(selected)], current, moves
