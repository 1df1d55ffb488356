"""Generate frozen expected values for the hand-traced training step test.

Symbolic differentiation (sympy) recomputes one full step of the student
update from first principles, independent of the package: two fixed
anchor rows, a one-affine-layer encoder, a one-affine-layer "predictor",
identity views, the distillation cross entropy, one SGD step without
weight decay, and one EMA step. Run this script to regenerate the
literals pasted into tests/test_train.py.
"""

import sympy as sp

tau = sp.Rational(1, 2)
lr = sp.Rational(1, 10)
m_ema = sp.Rational(9, 10)

# encoder: x [1x1] -> [1x2]: e = x @ We + be ; predictor: p = e @ Wp + bp
x = sp.Rational(1, 2)
We = [sp.Rational(3, 10), sp.Rational(-2, 10)]
be = [sp.Rational(0), sp.Rational(0)]
Wp = [[sp.Rational(1), sp.Rational(1, 10)],
      [sp.Rational(-1, 10), sp.Rational(1)]]
bp = [sp.Rational(0), sp.Rational(0)]
# teacher encoder weights (differ from student so p_t is informative)
Wt = [sp.Rational(4, 10), sp.Rational(1, 10)]

anchors = [[sp.Integer(1), sp.Integer(0)], [sp.Integer(0), sp.Integer(1)]]

params = (We[0], We[1], be[0], be[1],
          Wp[0][0], Wp[0][1], Wp[1][0], Wp[1][1], bp[0], bp[1])
syms = sp.symbols("we0 we1 b0 b1 wp00 wp01 wp10 wp11 c0 c1")
we0, we1, b0, b1, wp00, wp01, wp10, wp11, c0, c1 = syms

def unit(v):
    n = sp.sqrt(v[0] ** 2 + v[1] ** 2)
    return [v[0] / n, v[1] / n]


# encoder ends in L2 normalization; the predictor output is normalized
# only inside the loss
e = unit([x * we0 + b0, x * we1 + b1])
p = [e[0] * wp00 + e[1] * wp10 + c0, e[0] * wp01 + e[1] * wp11 + c1]


def anchor_probs(q):
    qu = unit(q)
    logits = [(qu[0] * a[0] + qu[1] * a[1]) / tau for a in anchors]
    exps = [sp.exp(z) for z in logits]
    s = exps[0] + exps[1]
    return [exps[0] / s, exps[1] / s]


t_emb = unit([x * Wt[0], x * Wt[1]])
p_t = [sp.nsimplify(v) for v in anchor_probs(t_emb)]
p_s = anchor_probs(p)
loss = -(p_t[0] * sp.log(p_s[0]) + p_t[1] * sp.log(p_s[1]))

subs = dict(zip(syms, params))
print("loss =", sp.nsimplify(loss.subs(subs)).evalf(20))

updated = []
for sym, val in zip(syms, params):
    g = sp.diff(loss, sym).subs(subs)
    updated.append(sp.nsimplify(val - lr * g).evalf(20))   # v0 = 0, wd = 0
print("student params after sgd:", updated)

teacher_after = [m_ema * Wt[i] + (1 - m_ema) * updated[i] for i in range(2)]
print("teacher We after ema:", [t.evalf(20) for t in teacher_after])
print("p_t =", [v.evalf(20) for v in p_t])
print("t_emb =", [sp.nsimplify(t).evalf(20) for t in t_emb])
