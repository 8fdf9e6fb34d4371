"""
Reverse-mode gradients on a tape
================================

Every layer of the trajectory network is built from a dozen primitives in
``vecgraph.diffcore``. This walk-through records a small computation, runs
backward, and checks the result against central finite differences.
"""

import numpy as np

from vecgraph import diffcore as dc

rng = np.random.default_rng(0)

# a two-layer perceptron on four rows, ending in a scalar
x = dc.Tensor(rng.normal(size=(4, 3)))
w1 = dc.Tensor(rng.normal(size=(3, 5)), requires_grad=True)
w2 = dc.Tensor(rng.normal(size=(5, 2)), requires_grad=True)

h = dc.relu(dc.matmul(x, w1))
y = dc.matmul(h, w2)
target = rng.normal(size=(4, 2))
L = dc.huber(y, target)
print("loss", float(L.data))

# the tape lists operations in the order they were recorded
print("ops:", [t.op for t in dc.trace(L)])

dc.backward(L)
print("dL/dw2 from backward:\n", w2.grad)


# central differences on the same loss, one entry at a time
def loss_for(w):
    out = dc.matmul(dc.relu(dc.matmul(x, w1.data)), w)
    return float(dc.huber(out, target).data)


eps = 1e-6
fd = np.zeros_like(w2.data)
for i in np.ndindex(*w2.data.shape):
    up, down = w2.data.copy(), w2.data.copy()
    up[i] += eps
    down[i] -= eps
    fd[i] = (loss_for(up) - loss_for(down)) / (2 * eps)
print("max |backward - finite difference|:", np.max(np.abs(fd - w2.grad)))

# attention weights come from a masked softmax: masked entries get exactly zero
scores = dc.Tensor(rng.normal(size=(3, 3)))
mask = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=bool)
print("masked softmax rows:\n", dc.softmax_rows(scores, mask).data.round(3))
