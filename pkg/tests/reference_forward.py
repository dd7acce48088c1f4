"""Straight-line reference transformer forward pass.

Independent oracle for the optimized engine: pure Python lists and ``math``,
no numpy, float64 throughout, O(L^2 * n_embd) with explicit loops. Implements
the same equations as ``trajgen.model`` (pre-norm blocks, causal multi-head
attention, erf GELU, linear age embedding, LayerNorm eps 1e-5) but shares no
code with it.
"""

import math

LN_EPS = 1e-5


def _matvec_t(w, x):
    """y = W x with W given row-major as [out][in] (i.e. x @ W^T for one row)."""
    return [sum(wr[j] * x[j] for j in range(len(x))) for wr in w]


def _layer_norm(x, gain, bias):
    n = len(x)
    mean = sum(x) / n
    var = sum((v - mean) ** 2 for v in x) / n
    inv = 1.0 / math.sqrt(var + LN_EPS)
    return [(v - mean) * inv * gain[j] + bias[j] for j, v in enumerate(x)]


def _gelu(v):
    return 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0)))


def _softmax(row):
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


def reference_forward(token_ids, ages, tensors, config):
    """Per-position logits as nested Python lists.

    ``tensors`` maps the archive's tensor names to nested lists (row-major);
    ``config`` needs vocab_size / n_layer / n_head / n_embd / age_scale.
    """
    n_embd = config["n_embd"]
    n_head = config["n_head"]
    hs = n_embd // n_head
    L = len(token_ids)

    tok = tensors["tok_emb.weight"]
    age_vec = tensors["age_emb.weight"]
    xs = []
    for pos in range(L):
        a = ages[pos] / config["age_scale"]
        xs.append([tok[token_ids[pos]][j] + a * age_vec[j] for j in range(n_embd)])

    for layer in range(config["n_layer"]):
        p = f"blk.{layer}."
        g1, b1 = tensors[p + "ln1.gain"], tensors[p + "ln1.bias"]
        wq, wk = tensors[p + "attn.wq"], tensors[p + "attn.wk"]
        wv, wo = tensors[p + "attn.wv"], tensors[p + "attn.wo"]
        g2, b2 = tensors[p + "ln2.gain"], tensors[p + "ln2.bias"]
        w1, bb1 = tensors[p + "mlp.w1"], tensors[p + "mlp.b1"]
        w2, bb2 = tensors[p + "mlp.w2"], tensors[p + "mlp.b2"]

        normed = [_layer_norm(x, g1, b1) for x in xs]
        qs = [_matvec_t(wq, x) for x in normed]
        ks = [_matvec_t(wk, x) for x in normed]
        vs = [_matvec_t(wv, x) for x in normed]

        attended = []
        scale = 1.0 / math.sqrt(hs)
        for i in range(L):
            merged = [0.0] * n_embd
            for h in range(n_head):
                lo = h * hs
                scores = []
                for j in range(i + 1):  # strict causality: j <= i only
                    dot = sum(qs[i][lo + d] * ks[j][lo + d] for d in range(hs))
                    scores.append(dot * scale)
                probs = _softmax(scores)
                for j in range(i + 1):
                    for d in range(hs):
                        merged[lo + d] += probs[j] * vs[j][lo + d]
            attended.append(_matvec_t(wo, merged))
        xs = [[xs[i][j] + attended[i][j] for j in range(n_embd)] for i in range(L)]

        for i in range(L):
            hidden = _matvec_t(w1, _layer_norm(xs[i], g2, b2))
            hidden = [_gelu(hidden[j] + bb1[j]) for j in range(len(hidden))]
            out = _matvec_t(w2, hidden)
            xs[i] = [xs[i][j] + out[j] + bb2[j] for j in range(n_embd)]

    gf, bf = tensors["ln_f.gain"], tensors["ln_f.bias"]
    head = tensors["head.weight"]
    return [_matvec_t(head, _layer_norm(x, gf, bf)) for x in xs]


def tensors_to_lists(archive):
    """Pull an archive's tensors into plain nested lists for the reference."""
    return {name: arr.tolist() for name, arr in archive.tensors.items()}
