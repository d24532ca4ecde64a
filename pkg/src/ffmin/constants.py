"""Physical constants and unit conventions.

Internal units everywhere: angstrom, kJ/mol, elementary charge, radian.
Angles are stored in degrees only inside system files (theta0_deg) and
converted on load.
"""

# Coulomb prefactor in kJ*angstrom/(mol*e^2).
COULOMB_KJ_ANGSTROM = 1389.38757

# Below this separation two interacting sites count as coincident.
MIN_PAIR_DISTANCE = 1e-12

# Smallest usable bond/angle arm length and dihedral plane normal.
DEGENERATE_EPS = 1e-12
