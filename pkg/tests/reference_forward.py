"""Independent straight-line float64 reference of conv/LSTM/dense/softmax.

Deliberately loop-based and tape-free so it shares no code with the
package's forward pass; used as the oracle in forward-equivalence tests.
"""

import numpy as np


def ref_sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def ref_conv1d_relu(x, w, b):
    """x [C x T], w [F x C x K], b [F] -> ReLU(same-padded cross-correlation)."""
    C, T = x.shape
    F, _, K = w.shape
    pad_left = (K - 1) // 2
    out = np.zeros((F, T))
    for f in range(F):
        for t in range(T):
            acc = float(b[f])
            for c in range(C):
                for k in range(K):
                    src = t + k - pad_left
                    if 0 <= src < T:
                        acc += x[c, src] * w[f, c, k]
            out[f, t] = acc if acc > 0.0 else 0.0
    return out


def ref_lstm_sequence(xs, kernel, recurrent, bias):
    """xs [T x in] -> all hidden states [T x u]; gates ordered i,f,g,o."""
    u = recurrent.shape[0]
    h = np.zeros(u)
    c = np.zeros(u)
    hs = []
    for t in range(xs.shape[0]):
        z = xs[t] @ kernel + h @ recurrent + bias
        i = ref_sigmoid(z[0:u])
        f = ref_sigmoid(z[u : 2 * u])
        g = np.tanh(z[2 * u : 3 * u])
        o = ref_sigmoid(z[3 * u : 4 * u])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs.append(h.copy())
    return np.array(hs)


def ref_lstm_step(x_t, h_prev, c_prev, kernel, recurrent, bias):
    u = recurrent.shape[0]
    z = x_t @ kernel + h_prev @ recurrent + bias
    i = ref_sigmoid(z[0:u])
    f = ref_sigmoid(z[u : 2 * u])
    g = np.tanh(z[2 * u : 3 * u])
    o = ref_sigmoid(z[3 * u : 4 * u])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def ref_softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def ref_crdnn_2lstm_probs(params, window):
    """Class probabilities for one [5 x ws] window, float64 throughout.

    params maps tensor names to arrays (any float dtype; upcast here).
    """
    p = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    conv = ref_conv1d_relu(np.asarray(window, dtype=np.float64), p["conv.w"], p["conv.b"])
    h1 = ref_lstm_sequence(conv.T, p["lstm1.kernel"], p["lstm1.recurrent"], p["lstm1.bias"])
    h2 = ref_lstm_sequence(h1, p["lstm2.kernel"], p["lstm2.recurrent"], p["lstm2.bias"])
    d = np.maximum(h2[-1] @ p["dense1.w"] + p["dense1.b"], 0.0)
    d = np.maximum(d @ p["dense2.w"] + p["dense2.b"], 0.0)
    return ref_softmax(d @ p["out.w"] + p["out.b"])
