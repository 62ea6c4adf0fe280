# %% [markdown]
# # Immigration mechanisms and their regimes
#
# An immigration mechanism Phi(q) = beta q + int (1 - e^{-qu}) nu(du) is
# classified by how x Phi(e^{-x}) behaves as x grows: a finite positive
# limit (Log), an infinite one (Super-log) or zero (Sub-log).

# %%
import numpy as np

from cbilab.mechanisms import (IMMIGRATION_PRESETS, classify_regime, make_preset, nu_tail,
                               phi_eval, phi_inverse)

# %% [markdown]
# The presets carry a closed form F equivalent to Phi at 0 alongside the
# exact exponent of the measure that the samplers draw from.

# %%
for name in ("log_immigration", "superlog_iterlog", "superlog_delta", "sublog"):
    m = make_preset(name)
    cls, probe = classify_regime(m)
    print(f"{name:18s} declared={m.regime:26s} probe={cls:9s} level={probe.level:.3g}")

# %% [markdown]
# Tauberian check: the tail at u and Phi at 1/u agree to first order.

# %%
m = make_preset("log_immigration", c=1.0)
for u in (1e4, 1e8, 1e12):
    print(f"u={u:.0e}  tail/Phi = {float(nu_tail(m, u)) / phi_eval(m, 1 / u):.4f}")

# %%
# exact exponent vs closed equivalent: the gap closes like 1/ln(1/q)
q = np.logspace(-12, -2, 6)
exact = np.array([phi_eval(m, x) for x in q])
closed = m.equivalent(q)
print(np.column_stack([q, exact, closed, exact / closed]))

# %%
print("Phi^-1(0.5) for the closed form:", phi_inverse(m, 0.5, use_equivalent=True))
print("presets:", ", ".join(IMMIGRATION_PRESETS))
