# %% [markdown]
# # Auditing the sandwich hypotheses
#
# A nonlinearity with F = lam |t|^p + c t, lam strictly between the first
# two eigenvalues, satisfies the non-resonance bracket with a constant V and
# has Theta = (1 - p) lam |t|^p, which is negative.  The linear f = t has a
# negative Theta too, so it must fail the positive-Theta condition.

# %%
from __future__ import annotations

import numpy as np

from psiplap import FractionalOrder, SpaceParams, build_grid, find_critical_point
from psiplap import nonlinearity as nlc
from psiplap.eigen import lambda_1, lambda_2_estimate
from psiplap.hypotheses import HypothesisConfig, audit_theorem, check_theta_positive
from psiplap.solver import default_init

grid = build_grid(1.0, 128)
sp = SpaceParams(2.0, FractionalOrder(0.8, 0.5), grid.psi)
first = lambda_1(sp, grid)
second = lambda_2_estimate(sp, grid, first=first)
print(f"lambda1 {first.lam:.4f}, lambda2 <= {second.lam:.4f}")

# %%
eps, c = 1.0, 1.0
lo, hi = first.lam + eps, second.lam
lam = 0.5 * (lo + hi)
v = nlc.bracket_offset_bound(lam, lo, hi, sp.p, c) * (1 + 1e-9)
cfg = HypothesisConfig(epsilon=eps, V=lambda xi: np.full(np.shape(xi), v))
nl = nlc.bracket(lam, sp.p, c)
audit = audit_theorem(nl, sp, "1.2", (first, second), cfg)
for r in audit.reports:
    print(r.condition_id, r.holds_on_samples, f"worst {r.worst_violation:.3g}", r.side)
print(audit.recommendation)

# %%
rep = find_critical_point(sp, nl, grid, default_init(grid))
print(f"converged {rep.converged}, |grad| {rep.final_grad_norm:.1e}, max|phi| {np.abs(rep.solution.values).max():.4f}")

# %%
bad = check_theta_positive(nlc.linear(1.0), cfg)
print(bad.condition_id, bad.holds_on_samples, bad.side, "witness", bad.witness)
