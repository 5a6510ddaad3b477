"""
A jump in a double-well energy
==============================

With F(z) = beta (z^2 - 1)^2 / 4 and beta = 10 the energy has two wells.
Loading from the left well, the left equilibrium branch folds near
l = 4.29 and the state has to jump to the right well.  In the limit of
vanishing viscosity the jump takes no time.  In arc length it becomes a
plateau of t_hat, traversed by the viscous heteroclinic orbit at frozen
load.

Run with ``python3 tutorials/02_double_well_jump.py`` (about 15 s).
"""

# %%
from ratebv import certify, component_transient, extract_bv
from ratebv.model import R_value, energy_E
from ratebv.problems import double_well

P = double_well()
ptraj, report = extract_bv(P.spec, P.load, P.z0, P.eps_list, P.tau, P.s_samples)
print("S per member:", ["%.4f" % S for S in report.S_values])
print("affine distances:   ", ["%.2e" % d for d in report.distances_affine])
print("constant distances: ", ["%.2e" % d for d in report.distances_constant])

# %%
# The jump set G
# --------------
# G collects the arc-length nodes where the stability gap is positive.  On
# it t_hat is frozen and the viscous multiplier lambda = gap / |z_hat'| is
# positive.
rep = certify(P.spec, P.load, P.z0, ptraj)
(comp,) = rep.g_components
print(f"G = [{comp['s_start']:.3f}, {comp['s_end']:.3f}] at t_hat = {comp['t_hat']:.4f}")
print(f"t_hat spread on G: {comp['t_hat_spread']:.1e}")
a, b = comp["i_start"], comp["i_end"]
print(f"z_hat jumps from {ptraj.z_hat[a, 0]:.4f} to {ptraj.z_hat[b, 0]:.4f}")
print(f"lambda on G: min {ptraj.lam[a + 1:b].min():.3f}, max {ptraj.lam[a + 1:b].max():.3f}")
print("certificate passed:", rep.passed, rep.failures)

# %%
# The jump as a heteroclinic orbit
# --------------------------------
# Freezing the load at the plateau and running the autonomous viscous flow
# from the start of the plateau lands on the state after the jump.
orbit, z_b, dist = component_transient(P.spec, P.load, ptraj, (a, b))
print(f"orbit lands at z = {z_b[0]:.4f} after time {orbit.times[-1]:.2f}; "
      f"distance to z_hat after G: {dist:.1e}")

# %%
# 1/lambda is not integrable over a component, which is why the jump
# takes no time.  Its discrete sum grows as the grid resolves the ends.
print(f"sum h_s / lambda over G: {comp['inv_lambda_sum']:.3f}")

# %%
# At frozen load the jump releases energy.  Part of it goes into the
# friction R(z_after - z_before), the rest into viscous dissipation along
# the orbit, which survives the limit.
ell = P.load(comp["t_hat"])
drop = energy_E(P.spec, ell, ptraj.z_hat[a]) - energy_E(P.spec, ell, ptraj.z_hat[b])
friction = R_value(P.spec, ptraj.z_hat[b] - ptraj.z_hat[a])
print(f"energy drop {drop:.3f} = friction {friction:.3f} + viscous {drop - friction:.3f}")
