"""Seeded randomized stress test of every inequality in ``inequalities``.

Each check draws its own substream from ``SeedSequence(seed).spawn``, so
results do not depend on which checks run or in what order.  Magnitudes are
log-uniform over [1e-6, 1e6]; vector checks cycle through dimensions 1-8.
A fraction of the vector samples is placed near the anti-aligned
configuration y = -c x, where several of the bounds are nearly tight.
"""

import numpy as np

from . import inequalities as ineq

MAGNITUDE_RANGE = (-6.0, 6.0)
MAX_DIM = 8


def _log_uniform(rng, size, lo=MAGNITUDE_RANGE[0], hi=MAGNITUDE_RANGE[1]):
    return 10.0 ** rng.uniform(lo, hi, size)


def _signed(rng, size):
    return rng.choice([-1.0, 1.0], size) * _log_uniform(rng, size)


def _vector_pairs(rng, n, dim):
    """Random (x, y) in R^dim; a third of the y's are noisy multiples of -x."""
    dx = rng.normal(size=(n, dim))
    dx /= np.linalg.norm(dx, axis=1, keepdims=True)
    dy = rng.normal(size=(n, dim))
    dy /= np.linalg.norm(dy, axis=1, keepdims=True)
    x = dx * _log_uniform(rng, (n, 1))
    y = dy * _log_uniform(rng, (n, 1))
    k = n // 3
    c = 10.0 ** rng.uniform(-1, 1, (k, 1))
    noise = 10.0 ** rng.uniform(-8, -1, (k, 1)) * dy[:k]
    y[:k] = -c * x[:k] + noise * np.linalg.norm(x[:k], axis=1, keepdims=True)
    return x, y


def _by_dimension(rng, samples, build):
    """Split samples over dimensions 1..8; returns build(rng, n, dim) per dimension."""
    counts = np.full(MAX_DIM, samples // MAX_DIM)
    counts[: samples % MAX_DIM] += 1
    return [build(rng, int(n), d + 1) for d, n in enumerate(counts) if n]


class _Check:
    def __init__(self, name, gap, scale, witness, extra=None):
        self.name = name
        self.gap = np.asarray(gap, dtype=float)
        self.scale = np.asarray(scale, dtype=float)
        self.witness = witness
        self.extra = extra or {}

    def report(self, slack):
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(self.scale > 0, self.gap / self.scale, self.gap)
        bad = ~(self.gap >= -slack * self.scale)
        # An overflowing right side carries no ratio information.
        rel = np.where(np.isinf(self.scale) & (self.gap >= 0), np.inf, rel)
        rel = np.where(np.isnan(rel), -np.inf, rel)
        i = int(np.argmin(rel))
        out = {
            "samples": int(self.gap.size),
            "violations": int(bad.sum()),
            "worst_gap": float(rel[i]),
            "witness": self.witness(i),
        }
        out.update(self.extra)
        return out


def _as_list(v):
    return np.asarray(v, dtype=float).tolist()


def _karamata(rng, n):
    length = rng.integers(2, MAX_DIM + 1, n)
    p = rng.uniform(0.05, 4.0, n)
    gaps = np.empty(n)
    scales = np.empty(n)
    seqs = {}
    for m in range(2, MAX_DIM + 1):
        sel = np.flatnonzero(length == m)
        if not sel.size:
            continue
        b = -np.sort(-_log_uniform(rng, (sel.size, m)), axis=1)
        # Moving mass from a smaller entry to a larger one preserves majorization.
        i = rng.integers(0, m - 1, sel.size)
        j = rng.integers(i + 1, m)
        rows = np.arange(sel.size)
        t = rng.uniform(0, 1, sel.size) * b[rows, j]
        a = b.copy()
        a[rows, i] += t
        a[rows, j] -= t
        a = -np.sort(-a, axis=1)
        # Also the two-point instance (V + W, 0) versus (max, min).
        k = sel.size // 4
        a[:k] = 0.0
        a[:k, 0] = b[:k, 0] + b[:k, 1]
        b[:k, 2:] = 0.0
        a[:k, 1:] = 0.0
        gaps[sel], scales[sel] = ineq._karamata_terms(p[sel], a, b)
        for r, idx in enumerate(sel):
            seqs[idx] = (r, a, b)

    def witness(i):
        r, a, b = seqs[i]
        return {"exponent": float(p[i]), "a": _as_list(a[r]), "b": _as_list(b[r])}

    return _Check("karamata", gaps, scales, witness)


def _middle_power(rng, n):
    exps = np.sort(rng.uniform(-3, 3, (n, 3)), axis=1)
    x = _log_uniform(rng, n)
    g, s = ineq._middle_power_terms(x, exps[:, 1], exps[:, 0], exps[:, 2])
    return _Check("middle_power", g, s, lambda i: {
        "x": float(x[i]), "a_low": float(exps[i, 0]), "a": float(exps[i, 1]), "a_high": float(exps[i, 2])})


def _amgm(rng, n):
    length = rng.integers(1, MAX_DIM + 1, n)
    w = 10.0 ** rng.uniform(-3, 3, (n, MAX_DIM))
    x = _log_uniform(rng, (n, MAX_DIM))
    x[rng.uniform(size=(n, MAX_DIM)) < 0.02] = 0.0
    mask = np.arange(MAX_DIM)[None, :] < length[:, None]
    # Padding entries get weight 0 and value 1, leaving both means unchanged.
    wm = np.where(mask, w, 0.0)
    xm = np.where(mask, x, 1.0)
    g, s = ineq._amgm_terms(wm, xm)
    return _Check("weighted_amgm", g, s, lambda i: {
        "w": _as_list(w[i, : length[i]]), "x": _as_list(x[i, : length[i]])})


def _vector_check(rng, n, name, xi_sampler, terms):
    parts = _by_dimension(rng, n, _vector_pairs)
    xi = xi_sampler(rng, n)
    gaps, scales, bounds = [], [], []
    start = 0
    for px, py in parts:
        m = px.shape[0]
        g, s, b = terms(xi[start:start + m], px, py)
        gaps.append(g)
        scales.append(s)
        bounds.append(b)
        start += m
    gap, scale, bound = map(np.concatenate, (gaps, scales, bounds))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(bound > 0, gap / bound, np.inf)
    tight = float(np.min(ratio))
    offsets = np.cumsum([0] + [p[0].shape[0] for p in parts])

    def witness(i):
        k = int(np.searchsorted(offsets, i, side="right") - 1)
        r = i - offsets[k]
        return {"xi": float(xi[i]), "x": _as_list(parts[k][0][r]), "y": _as_list(parts[k][1][r])}

    return _Check(name, gap, scale, witness, {"min_gap_over_bound": tight})


def _product_split(rng, n, two_term):
    p1 = rng.uniform(0.05, 3, n)
    p2 = np.where(rng.uniform(size=n) < 0.2, p1, rng.uniform(0.05, 3, n))
    q = 10.0 ** rng.uniform(-3, 3, n)
    x, y = _signed(rng, n), _signed(rng, n)
    hi, lo = np.maximum(p1, p2), np.minimum(p1, p2)
    p = hi + lo
    equal = hi == lo
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        l2 = np.where(equal, np.inf, p / (hi - lo) * ineq._pow(q, np.where(equal, 1.0, p / (hi - lo))))
        u2 = np.where(equal, 0.0, 2 * lo / p * ineq._pow(q, p / (2 * lo)))
    lower = np.minimum(2 * q, l2)
    upper = np.maximum(q / 4, u2)
    g, s = ineq._product_split_terms(p1, p2, lower, upper, x, y, two_term)
    name = "product_split_double" if two_term else "product_split_single"
    return _Check(name, g, s, lambda i: {
        "p1": float(p1[i]), "p2": float(p2[i]), "q": float(q[i]), "x": float(x[i]), "y": float(y[i])})


def _tilde(rng, n):
    xi1_all, xi2_all, lam_all, Q_all, x_all, y_all, g_all, s_all = [], [], [], [], [], [], [[], [], []], [[], [], []]
    counts = np.full(MAX_DIM, n // MAX_DIM)
    counts[: n % MAX_DIM] += 1
    for d, m in enumerate(counts, start=1):
        m = int(m)
        xi1 = rng.uniform(0.01, 0.99, m)
        xi2 = -rng.uniform(0.01, 3.0, m)
        basis, _ = np.linalg.qr(rng.normal(size=(m, d, d)))
        lam = 10.0 ** rng.uniform(-2, 2, (m, d))
        Q = np.einsum("nij,nj,nkj->nik", basis, lam, basis)
        Q = 0.5 * (Q + np.swapaxes(Q, 1, 2))
        lam_min = np.linalg.eigvalsh(Q)[:, 0]
        x, y = _vector_pairs(rng, m, d)
        terms = ineq._tilde_terms(lam_min, xi1, xi2, x, y, Q)
        for k in range(3):
            g_all[k].append(terms[k][0])
            s_all[k].append(terms[k][1])
        xi1_all.append(xi1)
        xi2_all.append(xi2)
        lam_all.append(lam_min)
        Q_all.extend(list(Q))
        x_all.extend(list(x))
        y_all.extend(list(y))
    xi1, xi2, lam_min = map(np.concatenate, (xi1_all, xi2_all, lam_all))

    def witness(i):
        return {"xi1": float(xi1[i]), "xi2": float(xi2[i]), "lambda_min": float(lam_min[i]),
                "Q": _as_list(Q_all[i]), "x": _as_list(x_all[i]), "y": _as_list(y_all[i])}

    names = ("tilde_v_squared", "tilde_w_squared", "tilde_product")
    return [_Check(names[k], np.concatenate(g_all[k]), np.concatenate(s_all[k]), witness) for k in range(3)]


def _lemma8(rng, n):
    xi = rng.uniform(0.01, 0.99, n)
    x = _signed(rng, n)
    y = _signed(rng, n)
    k = n // 3
    # Sign-flip region y = -c x with c > 1, plus near-cancellation.
    y[:k] = -x[:k] * (1 + 10.0 ** rng.uniform(-8, 1, k))
    g, s = ineq._lemma8_terms(xi, x, y)
    return _Check("signed_power_difference", g, s, lambda i: {
        "xi": float(xi[i]), "x": float(x[i]), "y": float(y[i])})


CHECK_NAMES = (
    "karamata", "middle_power", "weighted_amgm", "upsilon1_bound", "upsilon2_bound",
    "product_split_single", "product_split_double",
    "tilde_v_squared", "tilde_w_squared", "tilde_product", "signed_power_difference",
)


def run_suite(samples=100_000, seed=ineq.DEFAULT_SEED, slack=ineq.DEFAULT_SLACK):
    """Run every check on ``samples`` draws; returns the JSON-ready report."""
    if samples < 1:
        raise ValueError("samples must be positive")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(8)]
    checks = [
        _karamata(streams[0], samples),
        _middle_power(streams[1], samples),
        _amgm(streams[2], samples),
        _vector_check(streams[3], samples, "upsilon1_bound",
                      lambda r, m: r.uniform(0.01, 0.99, m), ineq._upsilon1_terms),
        _vector_check(streams[4], samples, "upsilon2_bound",
                      lambda r, m: -r.uniform(0.01, 3.0, m), ineq._upsilon2_terms),
        _product_split(streams[5], samples, False),
        _product_split(streams[5], samples, True),
        *_tilde(streams[6], samples),
        _lemma8(streams[7], samples),
    ]
    lemmas = {c.name: c.report(slack) for c in checks}
    total = sum(v["violations"] for v in lemmas.values())
    return {
        "seed": int(seed),
        "samples_per_check": int(samples),
        "slack": slack,
        "total_violations": total,
        "lemmas": lemmas,
    }
