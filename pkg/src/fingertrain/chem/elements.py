"""Element symbols, valence tables, and classification sets."""

_SYMBOLS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La "
    "Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po "
    "At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg "
    "Cn Nh Fl Mc Lv Ts Og"
).split()

ATOMIC_NUMBER = {sym: i + 1 for i, sym in enumerate(_SYMBOLS)}
SYMBOL = {i + 1: sym for i, sym in enumerate(_SYMBOLS)}

# SMILES organic subset: atoms writable without brackets.
ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_ORGANIC = {"b", "c", "n", "o", "p", "s"}
# Two-letter aromatic symbols require brackets.
AROMATIC_BRACKET = {"se", "as", "te"}

# Elements that may carry the aromatic flag at all.
AROMATIC_ELEMENTS = {
    ATOMIC_NUMBER[s] for s in ("B", "C", "N", "O", "P", "S", "Se", "As", "Te")
}

HALOGENS = {ATOMIC_NUMBER[s] for s in ("F", "Cl", "Br", "I")}

# Default valences used to fill implicit hydrogens on organic-subset atoms,
# smallest first.
DEFAULT_VALENCES = {
    ATOMIC_NUMBER["B"]: (3,),
    ATOMIC_NUMBER["C"]: (4,),
    ATOMIC_NUMBER["N"]: (3, 5),
    ATOMIC_NUMBER["O"]: (2,),
    ATOMIC_NUMBER["P"]: (3, 5),
    ATOMIC_NUMBER["S"]: (2, 4, 6),
    ATOMIC_NUMBER["F"]: (1,),
    ATOMIC_NUMBER["Cl"]: (1,),
    ATOMIC_NUMBER["Br"]: (1,),
    ATOMIC_NUMBER["I"]: (1,),
}

# Allowed total valence (sigma bond sum + attached hydrogens) keyed by
# (element, formal charge). Elements or charge states outside this table are
# not valence-checked; the table covers the organics the pipeline handles.
ALLOWED_VALENCES = {
    (ATOMIC_NUMBER["H"], 0): (1,),
    (ATOMIC_NUMBER["H"], 1): (0,),
    (ATOMIC_NUMBER["B"], 0): (3,),
    (ATOMIC_NUMBER["B"], -1): (4,),
    (ATOMIC_NUMBER["C"], 0): (4,),
    (ATOMIC_NUMBER["C"], 1): (3,),
    (ATOMIC_NUMBER["C"], -1): (3,),
    (ATOMIC_NUMBER["N"], 0): (3,),
    (ATOMIC_NUMBER["N"], 1): (4,),
    (ATOMIC_NUMBER["N"], -1): (2,),
    (ATOMIC_NUMBER["O"], 0): (2,),
    (ATOMIC_NUMBER["O"], 1): (3,),
    (ATOMIC_NUMBER["O"], -1): (1,),
    (ATOMIC_NUMBER["P"], 0): (3, 5),
    (ATOMIC_NUMBER["P"], 1): (4,),
    (ATOMIC_NUMBER["S"], 0): (2, 4, 6),
    (ATOMIC_NUMBER["S"], 1): (3,),
    (ATOMIC_NUMBER["S"], -1): (1,),
    (ATOMIC_NUMBER["F"], 0): (1,),
    (ATOMIC_NUMBER["F"], -1): (0,),
    (ATOMIC_NUMBER["Cl"], 0): (1,),
    (ATOMIC_NUMBER["Cl"], -1): (0,),
    (ATOMIC_NUMBER["Br"], 0): (1,),
    (ATOMIC_NUMBER["Br"], -1): (0,),
    (ATOMIC_NUMBER["I"], 0): (1,),
    (ATOMIC_NUMBER["I"], -1): (0,),
}

# Metals removable as disconnected single-atom fragments during
# standardisation (alkali, alkaline earth, transition rows, post-transition).
METALS = {
    ATOMIC_NUMBER[s]
    for s in (
        "Li Na K Rb Cs Fr Be Mg Ca Sr Ba Ra "
        "Sc Ti V Cr Mn Fe Co Ni Cu Zn Y Zr Nb Mo Tc Ru Rh Pd Ag Cd "
        "Hf Ta W Re Os Ir Pt Au Hg Al Ga In Tl Sn Pb Bi"
    ).split()
}
