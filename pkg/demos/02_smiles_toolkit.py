"""Tour of the SMILES toolkit: parsing, validity, weights, fingerprints.

Everything here backs the evaluation metrics; no external cheminformatics
package is involved.
"""

from repurgen import chem

print("parsing ethanol 'CCO':")
mol = chem.parse_smiles("CCO")
for i, atom in enumerate(mol.atoms):
    print(f"  atom {i}: {atom.element} (+{chem.implicit_hydrogens(mol, i)} implicit H)")
print(f"  bonds: {mol.bonds}")

print("\nvalidity checks:")
for s in ("CCO", "c1ccccc1", "C(C)(C)(C)(C)C", "C1CC", "[NH4+]"):
    ok, reason = chem.check_validity(s)
    print(f"  {s!r:24} -> {'valid' if ok else 'invalid: ' + reason}")

print("\nmolecular weights (Da):")
for s in ("C", "O", "CCO", "c1ccccc1", "CC(=O)Nc1ccccc1"):
    print(f"  {s!r:24} -> {chem.molecular_weight(chem.parse_smiles(s)):8.3f}")

print("\npath fingerprints and Tanimoto distance:")
pairs = [("CCO", "OCC"), ("CCO", "CCN"), ("c1ccccc1", "CCCCCC")]
for a, b in pairs:
    fa = chem.fingerprint(chem.parse_smiles(a))
    fb = chem.fingerprint(chem.parse_smiles(b))
    d = chem.tanimoto_distance(fa, fb)
    print(f"  d({a!r}, {b!r}) = {d:.3f}  "
          f"({len(fa.bits)} vs {len(fb.bits)} bits set)")

print("\nedit distances:")
for a, b in (("kitten", "sitting"), ("CCO", "CCCO"), ("CCO", "CCO")):
    print(f"  levenshtein({a!r}, {b!r}) = {chem.levenshtein(a, b)}")
