"""
Hot loops: factor scoring, argmax decoding, sparse feature differences and
the fused weighted-violations update.

Every kernel exists twice. The ``*_nb`` variants are numba-compiled; the
``*_np`` variants are plain numpy and are what runs when numba is missing
or ``SWVP_DISABLE_NUMBA=1`` is set. For the fused update the numpy path is
the modular one in ``swvp.trainers`` (built from ``swvp.core`` and
``swvp.gamma``), so the two sides check each other.

Both decode variants produce bit-identical scores: every factor score is the
left-to-right sum of its six template weights and sequence scores are
accumulated right to left, which is also the order the enumeration oracle in
``swvp.inference`` uses.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def decorator(func):
            return func

        return decorator


ENV_FLAG = "SWVP_DISABLE_NUMBA"

POLICY_FULL = 0
POLICY_SINGLE = 1
FAMILY_CSP = 0
FAMILY_WM = 1
FAMILY_WMR = 2
MODE_AGGRESSIVE = 0
MODE_BALANCED = 1

_use_numba = NUMBA_AVAILABLE and os.environ.get(ENV_FLAG, "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def using_numba():
    return _use_numba


def set_backend(name):
    """Switch between ``"numba"`` and ``"numpy"`` at runtime; returns the previous name."""
    global _use_numba
    previous = backend_name()
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def backend_name():
    return "numba" if _use_numba else "numpy"


# ---------------------------------------------------------------------------
# factor scores and decoding
# ---------------------------------------------------------------------------


@njit(cache=True)
def factor_scores_nb(w, x, off, cy):
    L = x.shape[0]
    cp = cy + 1
    out = np.empty((L, cp, cy))
    for i in range(L):
        xo = x[i] - 1
        for p in range(cp):
            for c in range(cy):
                s = w[off[0] + xo]
                s = s + w[off[1] + c]
                s = s + w[off[2] + p]
                s = s + w[off[3] + xo * cy + c]
                s = s + w[off[4] + c * cp + p]
                s = s + w[off[5] + (xo * cy + c) * cp + p]
                out[i, p, c] = s
    return out


def factor_scores_np(w, x, off, cy):
    x = np.asarray(x, dtype=np.int64)
    cp = cy + 1
    xo = (x - 1)[:, None, None]
    p = np.arange(cp)[None, :, None]
    c = np.arange(cy)[None, None, :]
    s = w[off[0] + xo] + np.zeros((1, cp, cy))
    s = s + w[off[1] + c]
    s = s + w[off[2] + p]
    s = s + w[off[3] + xo * cy + c]
    s = s + w[off[4] + c * cp + p]
    s = s + w[off[5] + (xo * cy + c) * cp + p]
    return s


@njit(cache=True)
def _viterbi_table_nb(table, out):
    L, cp, cy = table.shape
    best = np.zeros((L + 1, cp))
    for i in range(L - 1, -1, -1):
        for p in range(cp):
            b = -np.inf
            for c in range(cy):
                v = table[i, p, c] + best[i + 1, c + 1]
                if v > b:
                    b = v
            best[i, p] = b
    p = 0
    for i in range(L):
        target = best[i, p]
        chosen = cy - 1
        for c in range(cy):
            if table[i, p, c] + best[i + 1, c + 1] == target:
                chosen = c
                break
        out[i] = chosen + 1
        p = chosen + 1
    return best[0, 0]


@njit(cache=True)
def decode_nb(w, x, off, cy):
    table = factor_scores_nb(w, x, off, cy)
    out = np.empty(x.shape[0], dtype=np.int64)
    _viterbi_table_nb(table, out)
    return out


@njit(cache=True)
def decode_batch_nb(w, X, off, cy):
    n = X.shape[0]
    out = np.empty(X.shape, dtype=np.int64)
    for k in range(n):
        table = factor_scores_nb(w, X[k], off, cy)
        _viterbi_table_nb(table, out[k])
    return out


def _viterbi_table_np(table):
    L, cp, cy = table.shape
    best = np.zeros((L + 1, cp))
    for i in range(L - 1, -1, -1):
        best[i] = np.max(table[i] + best[i + 1, 1:][None, :], axis=1)
    out = np.empty(L, dtype=np.int64)
    p = 0
    for i in range(L):
        vals = table[i, p] + best[i + 1, 1:]
        c = int(np.argmax(vals == best[i, p]))
        out[i] = c + 1
        p = c + 1
    return out, best[0, 0]


def decode_np(w, x, off, cy):
    return _viterbi_table_np(factor_scores_np(w, x, off, cy))[0]


def decode_batch_np(w, X, off, cy):
    X = np.asarray(X, dtype=np.int64)
    n, L = X.shape
    cp = cy + 1
    xo = (X - 1)[:, :, None, None]
    p = np.arange(cp)[None, None, :, None]
    c = np.arange(cy)[None, None, None, :]
    s = w[off[0] + xo] + np.zeros((1, 1, cp, cy))
    s = s + w[off[1] + c]
    s = s + w[off[2] + p]
    s = s + w[off[3] + xo * cy + c]
    s = s + w[off[4] + c * cp + p]
    s = s + w[off[5] + (xo * cy + c) * cp + p]
    best = np.zeros((n, L + 1, cp))
    for i in range(L - 1, -1, -1):
        best[:, i] = np.max(s[:, i] + best[:, i + 1, None, 1:], axis=2)
    out = np.empty((n, L), dtype=np.int64)
    prev = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for i in range(L):
        vals = s[rows, i, prev] + best[:, i + 1, 1:]
        chosen = np.argmax(vals == best[rows, i, prev][:, None], axis=1)
        out[:, i] = chosen + 1
        prev = chosen + 1
    return out


def decode(w, x, off, cy):
    if _use_numba:
        return decode_nb(w, x, off, cy)
    return decode_np(w, x, off, cy)


def decode_batch(w, X, off, cy):
    if _use_numba:
        return decode_batch_nb(w, X, off, cy)
    return decode_batch_np(w, X, off, cy)


# ---------------------------------------------------------------------------
# sparse feature differences
# ---------------------------------------------------------------------------


@njit(cache=True)
def _fill_position_ids(x, lab, i, off, cy, buf, at):
    cp = cy + 1
    xo = x[i] - 1
    c = lab[i] - 1
    p = lab[i - 1] if i > 0 else 0
    buf[at] = off[0] + xo
    buf[at + 1] = off[1] + c
    buf[at + 2] = off[2] + p
    buf[at + 3] = off[3] + xo * cy + c
    buf[at + 4] = off[4] + c * cp + p
    buf[at + 5] = off[5] + (xo * cy + c) * cp + p


@njit(cache=True)
def _merge_sorted(ids, vals):
    """Sum values of equal ids (stable order), drop zeros; returns canonical arrays."""
    order = np.argsort(ids, kind="mergesort")
    out_i = np.empty(ids.shape[0], dtype=np.int64)
    out_v = np.empty(ids.shape[0])
    n = 0
    k = 0
    m = ids.shape[0]
    while k < m:
        cur = ids[order[k]]
        acc = 0.0
        while k < m and ids[order[k]] == cur:
            acc += vals[order[k]]
            k += 1
        if acc != 0.0:
            out_i[n] = cur
            out_v[n] = acc
            n += 1
    return out_i[:n].copy(), out_v[:n].copy()


@njit(cache=True)
def delta_phi_nb(x, y, z, off, cy):
    """phi(x, y) - phi(x, z) restricted to the positions whose factor differs."""
    L = x.shape[0]
    count = 0
    for i in range(L):
        if y[i] != z[i] or (i > 0 and y[i - 1] != z[i - 1]):
            count += 1
    ids = np.empty(12 * count, dtype=np.int64)
    vals = np.empty(12 * count)
    at = 0
    for i in range(L):
        if y[i] != z[i] or (i > 0 and y[i - 1] != z[i - 1]):
            _fill_position_ids(x, y, i, off, cy, ids, at)
            _fill_position_ids(x, z, i, off, cy, ids, at + 6)
            for k in range(6):
                vals[at + k] = 1.0
                vals[at + 6 + k] = -1.0
            at += 12
    return _merge_sorted(ids, vals)


def delta_phi_np(x, y, z, off, cy):
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    diff = y != z
    touched = diff.copy()
    touched[1:] |= diff[:-1]
    pos = np.flatnonzero(touched)
    if pos.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    cp = cy + 1

    def ids_for(lab):
        xo = x[pos] - 1
        c = lab[pos] - 1
        p = np.where(pos > 0, lab[np.maximum(pos - 1, 0)], 0)
        return np.stack(
            [
                off[0] + xo,
                off[1] + c,
                off[2] + p,
                off[3] + xo * cy + c,
                off[4] + c * cp + p,
                off[5] + (xo * cy + c) * cp + p,
            ],
            axis=1,
        )

    ids = np.concatenate([ids_for(y), ids_for(z)], axis=1).ravel()
    vals = np.tile(np.repeat([1.0, -1.0], 6), pos.size)
    uniq, inverse = np.unique(ids, return_inverse=True)
    summed = np.bincount(inverse, weights=vals, minlength=uniq.size)
    keep = summed != 0.0
    return uniq[keep], summed[keep]


def delta_phi_sparse(x, y, z, off, cy):
    if _use_numba:
        return delta_phi_nb(x, y, z, off, cy)
    return delta_phi_np(x, y, z, off, cy)


# ---------------------------------------------------------------------------
# fused weighted-violations update
# ---------------------------------------------------------------------------


@njit(cache=True)
def swvp_step_nb(w, x, y, ystar, off, cy, policy, family, mode, beta, enforce_c2):
    """One update for a mistaken example.

    Returns ``(ids, vals, n_violating, n_nonviolating, gamma_entropy, backed_off)``
    where ``(ids, vals)`` is the canonical sparse vector to add to ``w``.
    """
    L = y.shape[0]
    # mixed assignments in substructure order, dropping those equal to gold
    if policy == POLICY_FULL:
        n_ma = 1
    else:
        n_ma = 0
        for j in range(L):
            if ystar[j] != y[j]:
                n_ma += 1
    mas = np.empty((n_ma, L), dtype=np.int64)
    if policy == POLICY_FULL:
        mas[0, :] = ystar
    else:
        k = 0
        for j in range(L):
            if ystar[j] != y[j]:
                mas[k, :] = y
                mas[k, j] = ystar[j]
                k += 1

    starts = np.zeros(n_ma + 1, dtype=np.int64)
    id_parts = []
    val_parts = []
    margins = np.empty(n_ma)
    for k in range(n_ma):
        di, dv = delta_phi_nb(x, y, mas[k], off, cy)
        id_parts.append(di)
        val_parts.append(dv)
        starts[k + 1] = starts[k] + di.shape[0]
        if di.shape[0] > 0:
            margins[k] = np.dot(w[di], dv)
        else:
            margins[k] = 0.0

    n_v = 0
    for k in range(n_ma):
        if margins[k] <= 0.0:
            n_v += 1
    n_nv = n_ma - n_v

    in_support = np.zeros(n_ma, dtype=np.bool_)
    n_s = 0
    for k in range(n_ma):
        if mode == MODE_BALANCED or family == FAMILY_CSP or margins[k] <= 0.0:
            in_support[k] = True
            n_s += 1

    gamma = np.zeros(n_ma)
    backed_off = n_s == 0
    if not backed_off:
        raw = np.zeros(n_ma)
        for k in range(n_ma):
            if not in_support[k]:
                continue
            if family == FAMILY_CSP:
                raw[k] = 1.0
            elif family == FAMILY_WM:
                raw[k] = abs(margins[k]) ** beta
            else:
                a = abs(margins[k])
                r = 0
                for q in range(n_ma):
                    if not in_support[q] or q == k:
                        continue
                    b = abs(margins[q])
                    if b > a or (b == a and q < k):
                        r += 1
                raw[k] = ((n_s - r) / n_s) ** beta
        _normalize_nb(raw, in_support, gamma)

        if enforce_c2 and mode == MODE_BALANCED:
            while True:
                wm = 0.0
                for k in range(n_ma):
                    wm += gamma[k] * margins[k]
                if wm <= 0.0:
                    break
                drop = -1
                for k in range(n_ma):
                    if in_support[k] and margins[k] > 0.0:
                        if drop < 0 or margins[k] > margins[drop]:
                            drop = k
                if drop < 0:
                    break
                in_support[drop] = False
                n_s -= 1
                if n_s == 0:
                    backed_off = True
                    break
                _normalize_nb(raw, in_support, gamma)

    if backed_off:
        di, dv = delta_phi_nb(x, y, ystar, off, cy)
        return di, dv, n_v, n_nv, 0.0, True

    total = 0
    for k in range(n_ma):
        if gamma[k] > 0.0:
            total += starts[k + 1] - starts[k]
    ids = np.empty(total, dtype=np.int64)
    vals = np.empty(total)
    at = 0
    entropy = 0.0
    for k in range(n_ma):
        g = gamma[k]
        if g > 0.0:
            di = id_parts[k]
            dv = val_parts[k]
            for q in range(di.shape[0]):
                ids[at] = di[q]
                vals[at] = g * dv[q]
                at += 1
            entropy -= g * np.log(g)
    mi, mv = _merge_sorted(ids, vals)
    return mi, mv, n_v, n_nv, entropy, False


@njit(cache=True)
def _normalize_nb(raw, in_support, gamma):
    total = 0.0
    n_s = 0
    for k in range(raw.shape[0]):
        if in_support[k]:
            total += raw[k]
            n_s += 1
    for k in range(raw.shape[0]):
        if not in_support[k]:
            gamma[k] = 0.0
        elif total > 0.0:
            gamma[k] = raw[k] / total
        else:
            gamma[k] = 1.0 / n_s
