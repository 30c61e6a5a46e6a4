"""Inspect the shipped model: target level, rotational constant, Franck-Condon factors."""

from photoalign.model import ModelSpec, build_radial_model
from photoalign.radial import franck_condon, outer_turning_point, rotational_constant

spec = ModelSpec()
rm = build_radial_model(spec)
tgt, lvl = rm.target, rm.target_level
bv = rotational_constant(tgt, lvl)
print(f"target level {lvl} of {tgt.n_bound}: binding {-tgt.energies_mhz[lvl]:.3f} MHz")
print(f"B_v = {bv:.4f} MHz, revival period 1/(2B) = {1e3 / (2 * bv):.2f} ns")

inter, ilvl = rm.intermediate, rm.intermediate_level
print(f"intermediate v' = {ilvl}: {inter.energies_mhz[ilvl]:.1f} MHz relative to its asymptote")
print(f"bound-bound FC overlap: {franck_condon(tgt, lvl, inter, ilvl):.4f}")

# the dump step is strong because both levels turn around at similar R
r_t = outer_turning_point(spec.ground, tgt.energies_mhz[lvl])
r_i = outer_turning_point(spec.excited, inter.energies_mhz[ilvl])
print(f"outer turning points: target {r_t:.1f} bohr, intermediate {r_i:.1f} bohr")
