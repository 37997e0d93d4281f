# %% [markdown]
# # Outer and tail sets for a quadratic constraint
#
# phi(x, L) = x'Qx + x'AL. The sign of the top eigenvalue of Q decides
# whether a useful pair of sets exists.

# %%
import numpy as np

from tailscenario.events import build_sets_quadratic
from tailscenario.problems import quadratic_phi
from tailscenario.tailmodel import ProductParetoModel, SignSymmetricModel

model = SignSymmetricModel(ProductParetoModel.iid(2))
A = np.eye(2)

for Q in (-np.eye(2), np.eye(2), np.diag([1.0, -1.0])):
    s = build_sets_quadratic(Q, A, model, 0.01)
    print(np.diag(Q), s.classification, s.alpha_delta)

# %% [markdown]
# Covering check for Q = -I: every violating draw at a decision in O lands in C.

# %%
s = build_sets_quadratic(-np.eye(2), A, model, 0.01)
rng = np.random.default_rng(0)
x = rng.normal(size=2)
x *= 2 * s.alpha_delta / np.linalg.norm(x)
L = model.sample(200_000, 1) * 4
bad = L[quadratic_phi(-np.eye(2), A, x, L) > 0]
print(len(bad), "violating draws,", int(np.sum(~s.event.contains(bad))), "outside C")
