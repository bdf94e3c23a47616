# %% [markdown]
# # First and second eigenvalues
#
# On the classical branch the spectrum is known in closed form,
# (p - 1)(k pi_p / T)^p, which makes a good check of both estimators.

# %%
from __future__ import annotations

import math

from psiplap import FractionalOrder, SpaceParams, build_grid
from psiplap.eigen import lambda_1, lambda_2_estimate, p_laplacian_eigenvalue, sign_changes

for p, T in ((2.0, math.pi), (3.0, 1.0)):
    grid = build_grid(T, 256)
    sp = SpaceParams(p, FractionalOrder.classical(), grid.psi)
    first = lambda_1(sp, grid)
    second = lambda_2_estimate(sp, grid, first=first)
    print(f"p={p}, T={T:.4f}")
    print(f"  lambda1 {first.lam:.6f}  closed form {p_laplacian_eigenvalue(p, T, 1):.6f}")
    print(f"  lambda2 {second.lam:.6f}  closed form {p_laplacian_eigenvalue(p, T, 2):.6f}  ({second.family})")
    print(f"  sign changes {sign_changes(first.eigenfunction)} and {sign_changes(second.eigenfunction)}")

# %% [markdown]
# The first eigenvalue as a function of the fractional order.

# %%
grid = build_grid(1.0, 128)
for alpha in (0.6, 0.7, 0.8, 0.9, 1.0):
    order = FractionalOrder.classical() if alpha == 1.0 else FractionalOrder(alpha, 1.0)
    est = lambda_1(SpaceParams(2.0, order, grid.psi), grid)
    print(f"alpha {alpha:.1f}: lambda1 {est.lam:.5f}  residual {est.residual:.1e}")
