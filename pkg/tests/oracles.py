"""Independent scalar reference implementations used as test oracles.

Everything here is written with plain Python floats, lists, and ``math``,
with no shared code paths into the package under test. Shapes follow the
package conventions: matrices are lists of row lists, vectors are flat
lists.
"""

import math


def to_lists(a):
    import numpy as np

    return np.asarray(a, dtype=float).tolist()


def matmul_oracle(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            s = 0.0
            for t in range(inner):
                s += a[i][t] * b[t][j]
            out[i][j] = s
    return out


def matvec(m, v):
    return [sum(m[i][j] * v[j] for j in range(len(v))) for i in range(len(m))]


def softmax_oracle(scores, tau):
    m = max(scores)
    exps = [math.exp((s - m) / tau) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def skeleton_attention_oracle(f_cols, h_prev, u_eh, u_ef, w_e, b_e, tau):
    """f_cols: list of T column vectors (each length d). Returns
    (alphas, weighted columns, context vector)."""
    uh = matvec(u_eh, h_prev)
    scores = []
    for col in f_cols:
        uf = matvec(u_ef, col)
        pre = [math.tanh(uh[i] + uf[i] + b_e[i]) for i in range(len(uh))]
        scores.append(sum(w_e[i] * pre[i] for i in range(len(w_e))))
    alphas = softmax_oracle(scores, tau)
    weighted = [[a * x for x in col] for a, col in zip(alphas, f_cols)]
    d = len(f_cols[0])
    t_len = len(f_cols)
    context = [sum(w[i] for w in weighted) / t_len for i in range(d)]
    return alphas, weighted, context


def joint_attention_oracle(f_tp, k, u_cb, u_cm, w_c, b_c, tau):
    """f_tp: d x (T+1) matrix as row lists; returns {l: alpha} for l != k."""
    d = len(f_tp)
    joints = d // 3
    def row_sums(j):
        rows = f_tp[3 * (j - 1): 3 * j]
        return [sum(r) for r in rows]

    anchor = matvec(u_cb, row_sums(k))
    others = [l for l in range(1, joints + 1) if l != k]
    scores = []
    for l in others:
        ml = matvec(u_cm, row_sums(l))
        pre = [math.tanh(anchor[i] + ml[i] + b_c[i]) for i in range(len(anchor))]
        scores.append(sum(w_c[i] * pre[i] for i in range(len(w_c))))
    alphas = softmax_oracle(scores, tau)
    return dict(zip(others, alphas))


def coattention_map_oracle(f_a, f_tp, k, alphas):
    """f_a: d x T rows, f_tp: d x (T+1) rows; joint k rows pass unscaled."""
    d = len(f_a)
    t_len = len(f_a[0])
    out = []
    for r in range(d):
        joint = r // 3 + 1
        base = f_a[r] + [f_tp[r][t_len]]
        factor = 1.0 if joint == k else alphas[joint]
        out.append([factor * x for x in base])
    return out


def coattention_context_oracle(f_co, k):
    d = len(f_co)
    joints = d // 3
    cols = len(f_co[0])
    out = []
    for star in range(3):
        row = []
        for j in range(cols):
            s = 0.0
            for l in range(1, joints + 1):
                if l == k:
                    continue
                s += f_co[3 * (l - 1) + star][j]
            row.append(s / (joints - 1))
        out.append(row)
    return out


def skeleton_gru_oracle(x, h_prev, h_a, p):
    """p holds W_zx..W_ch row-list matrices and b_z/b_r/b_c flat vectors.
    Returns dict with gates and the new state."""
    n = len(h_prev)
    zx, zh, za = matvec(p["W_zx"], x), matvec(p["W_zh"], h_prev), matvec(p["W_za"], h_a)
    z = [sigmoid(zx[i] + zh[i] + za[i] + p["b_z"][i]) for i in range(n)]
    rx, rh, ra = matvec(p["W_rx"], x), matvec(p["W_rh"], h_prev), matvec(p["W_ra"], h_a)
    r = [sigmoid(rx[i] + rh[i] + ra[i] + p["b_r"][i]) for i in range(n)]
    cx = matvec(p["W_cx"], x)
    ch = matvec(p["W_ch"], [r[i] * h_prev[i] for i in range(n)])
    c = [math.tanh(cx[i] + ch[i] + p["b_c"][i]) for i in range(n)]
    h = [(1.0 - z[i]) * h_prev[i] + z[i] * c[i] for i in range(n)]
    return {"z": z, "r": r, "c": c, "h": h}


def spatial_gru_oracle(m, q_prev, o, p):
    """All operands 3 x (T+1) row lists; 3x3 weights left-multiply."""
    rows, cols = len(m), len(m[0])

    def lmul(w, a):
        return matmul_oracle(w, a)

    zm, zq, zo = lmul(p["W_zm"], m), lmul(p["W_zq"], q_prev), lmul(p["W_zo"], o)
    z = [[sigmoid(zm[i][j] + zq[i][j] + zo[i][j] + p["B_z"][i][j])
          for j in range(cols)] for i in range(rows)]
    rm, rq, ro = lmul(p["W_rm"], m), lmul(p["W_rq"], q_prev), lmul(p["W_ro"], o)
    r = [[sigmoid(rm[i][j] + rq[i][j] + ro[i][j] + p["B_r"][i][j])
          for j in range(cols)] for i in range(rows)]
    rq_prod = [[r[i][j] * q_prev[i][j] for j in range(cols)] for i in range(rows)]
    cm, cq = lmul(p["W_cm"], m), lmul(p["W_cq"], rq_prod)
    c = [[math.tanh(cm[i][j] + cq[i][j] + p["B_c"][i][j])
          for j in range(cols)] for i in range(rows)]
    q = [[(1.0 - z[i][j]) * q_prev[i][j] + z[i][j] * c[i][j]
          for j in range(cols)] for i in range(rows)]
    return {"z": z, "r": r, "c": c, "q": q}


def confidence_gate_oracle(h_joint, m_joint, w_fh, w_fm, b_h, b_m, rho):
    d = len(h_joint)
    fh = [math.tanh(v + b_h[i]) for i, v in enumerate(matvec(w_fh, h_joint))]
    fm = [math.tanh(v + b_m[i]) for i, v in enumerate(matvec(w_fm, m_joint))]
    return [math.exp(-rho * (fh[i] - fm[i]) ** 2) for i in range(d)]


def coefficient_matrix_oracle(truth_rows, tau):
    n = len(truth_rows)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            sq = sum((truth_rows[i][c] - truth_rows[j][c]) ** 2
                     for c in range(len(truth_rows[i])))
            out[i][j] = math.exp(-sq / (tau * tau))
    return out


def weighted_gram_oracle(prefix_rows, coeff, t_index):
    """prefix_rows: first t' vectors; coeff: full coefficient matrix;
    t_index: 1-based current step t'."""
    t = len(prefix_rows)
    v = []
    for i, row in enumerate(prefix_rows):
        w = coeff[i][t_index - 1] if i < t - 1 else 1.0
        v.append([w * x for x in row])
    out = [[0.0] * t for _ in range(t)]
    for i in range(t):
        for j in range(t):
            out[i][j] = sum(v[i][c] * v[j][c] for c in range(len(v[i])))
    return out


def gram_loss_oracle(pred_rows, truth_rows, tau, norm=None):
    horizon = len(pred_rows)
    coeff = coefficient_matrix_oracle(truth_rows, tau)
    total = 0.0
    for t in range(1, horizon + 1):
        gp = weighted_gram_oracle(pred_rows[:t], coeff, t)
        gt = weighted_gram_oracle(truth_rows[:t], coeff, t)
        for i in range(t):
            for j in range(t):
                total += (gp[i][j] - gt[i][j]) ** 2
    return total / (norm if norm is not None else horizon)


def mse_oracle(pred_rows, truth_rows):
    total = 0.0
    count = 0
    for p, g in zip(pred_rows, truth_rows):
        for a, b in zip(p, g):
            total += (a - b) ** 2
            count += 1
    return total / count


def pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    return cov / math.sqrt(vx * vy)
