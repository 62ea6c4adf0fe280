# %% [markdown]
# # Generator convergence on a bump test function
#
# The prelimit generator of the renormalised CBI splits into drift (I1),
# immigration jumps (I2), diffusion (I3) and branching jumps (I4). Against a
# C^2 bump that is constant near 0 it converges to the ESN generator
# int_x^inf f'(z)/z dz - (b/c) f'(x). In the Sub-log case c = 0 and the
# drift term blows up instead.

# %%
import numpy as np

from cbilab.limitlab import (TestFunction, generator_convergence_table, generator_limit,
                             generator_terms, mc_generator_subordinator)
from cbilab.mechanisms import linear, log_immigration, sublog, zero_branching

f = TestFunction()
for t in (10, 100, 1000):
    terms = generator_terms(linear(1.0), log_immigration(1.0), f, t, 0.8)
    print(t, {k: round(v, 6) for k, v in terms.items()}, "limit", round(generator_limit(1.0, 1.0, f, 0.8), 6))

# %%
tab = generator_convergence_table(linear(1.0), log_immigration(1.0), f)
print([f"{d:.2e}" for d in tab.discrepancies], tab.verdict)

neg = generator_convergence_table(linear(1.0), sublog(), TestFunction(0.5, 1.5, 2.0, 3.0), [1.0])
print("sub-log |I1|:", [f"{r['max_abs_I1']:.3g}" for r in neg.rows])

# %% [markdown]
# Independent check for the pure-immigration case: a Monte Carlo
# difference quotient of the semigroup at small h.

# %%
exact = generator_terms(zero_branching(), log_immigration(1.0), f, 20.0, 1.6)["total"]
est, se = mc_generator_subordinator(log_immigration(1.0), f, 20.0, 1.6, h=1e-4, n=100000)
print(f"quadrature {exact:.5f}  MC {est:.5f} +- {se:.5f}")
