"""Minimal SMILES toolkit: parsing, validity, molecular weight, fingerprints.

Covers the organic subset (B, C, N, O, P, S, F, Cl, Br, I), aromatic
lowercase atoms, bracket atoms with charge and explicit hydrogens, branches,
ring closures (single digit and %nn), and explicit bonds. Stereo markers
(/, \\, @) are accepted and ignored. No canonicalization, no aromaticity
perception beyond the lowercase notation.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

# Error kinds raised by the parser.
ERR_EMPTY = "empty"
ERR_PAREN = "unmatched-paren"
ERR_RING = "unpaired-ring"
ERR_SYMBOL = "unknown-symbol"
ERR_BRACKET = "bad-bracket"

# Bond order used for aromatic bonds; ceil() is applied per atom when
# summing orders for valence checks and implicit hydrogen counts.
AROMATIC_ORDER = 1.5

ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_SUBSET = {"b", "c", "n", "o", "p", "s"}

# Upper bound on total bond order for the validity check.
MAX_VALENCE = {
    "B": 3, "C": 4, "N": 3, "O": 2, "P": 5, "S": 6,
    "F": 1, "Cl": 1, "Br": 1, "I": 1, "H": 1,
}

# Normal-valence ladders used to fill implicit hydrogens on organic-subset
# atoms; the smallest entry >= the explicit bond sum wins.
NORMAL_VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

ATOMIC_WEIGHTS = {
    "H": 1.008, "B": 10.81, "C": 12.011, "N": 14.007, "O": 15.999,
    "F": 18.998, "P": 30.974, "S": 32.06, "Cl": 35.45, "Br": 79.904,
    "I": 126.904,
}


class SmilesError(ValueError):
    """Parse or validity failure with a machine-checkable kind."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0
    aromatic: bool = False
    explicit_h: int | None = None  # None = implicit (non-bracket atom)


@dataclass
class Molecule:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[tuple[int, int, float]] = field(default_factory=list)
    source: str = ""

    def bond_order_sum(self, idx: int) -> float:
        total = sum(o for a, b, o in self.bonds if idx in (a, b))
        if self.atoms[idx].explicit_h:
            total += self.atoms[idx].explicit_h
        return total

    def neighbors(self, idx: int) -> list[tuple[int, float]]:
        out = []
        for a, b, order in self.bonds:
            if a == idx:
                out.append((b, order))
            elif b == idx:
                out.append((a, order))
        return out


_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?"
    r"(?P<symbol>[A-Z][a-z]?|[bcnops])"
    r"(?P<chiral>@{1,2})?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+{1,2}|-{1,2}|[+-]\d+)?"
    r"(?P<cls>:\d+)?$"
)

_BOND_ORDERS = {"-": 1.0, "=": 2.0, "#": 3.0, ":": AROMATIC_ORDER,
                "/": 1.0, "\\": 1.0}


def _parse_bracket(body: str, pos: int) -> Atom:
    m = _BRACKET_RE.match(body)
    if m is None:
        raise SmilesError(ERR_BRACKET, f"malformed bracket atom [{body}] at {pos}")
    symbol = m.group("symbol")
    aromatic = symbol in AROMATIC_SUBSET
    element = symbol.capitalize() if aromatic else symbol
    if element not in ATOMIC_WEIGHTS:
        raise SmilesError(ERR_SYMBOL, f"unknown element [{symbol}] at {pos}")
    h = m.group("hcount")
    explicit_h = 0
    if h:
        explicit_h = int(h[1:]) if len(h) > 1 else 1
    charge = 0
    c = m.group("charge")
    if c:
        if c in ("+", "++", "-", "--"):
            charge = c.count("+") - c.count("-")
        else:
            charge = int(c[1:]) * (1 if c[0] == "+" else -1)
    return Atom(element, charge, aromatic, explicit_h)


def parse_smiles(s: str) -> Molecule:
    """Parse a SMILES string into an atom/bond list.

    Raises SmilesError with kind ``empty``, ``unmatched-paren``,
    ``unpaired-ring``, ``unknown-symbol``, or ``bad-bracket``.
    """
    if not s:
        raise SmilesError(ERR_EMPTY, "empty SMILES string")
    mol = Molecule(source=s)
    prev: int | None = None          # atom index awaiting the next bond
    pending: float | None = None     # explicit bond symbol seen before atom
    branch_stack: list[int] = []
    open_rings: dict[str, tuple[int, float | None]] = {}
    i = 0
    n = len(s)

    def add_atom(atom: Atom) -> None:
        nonlocal prev, pending
        mol.atoms.append(atom)
        idx = len(mol.atoms) - 1
        if prev is not None:
            order = pending
            if order is None:
                both_aromatic = mol.atoms[prev].aromatic and atom.aromatic
                order = AROMATIC_ORDER if both_aromatic else 1.0
            mol.bonds.append((prev, idx, order))
        prev = idx
        pending = None

    def close_ring(digit: str) -> None:
        nonlocal pending
        if prev is None:
            raise SmilesError(ERR_RING, f"ring digit {digit} before any atom")
        if digit in open_rings:
            other, other_bond = open_rings.pop(digit)
            if other == prev:
                raise SmilesError(ERR_RING, f"ring digit {digit} closed on itself")
            order = pending if pending is not None else other_bond
            if order is None:
                both = mol.atoms[other].aromatic and mol.atoms[prev].aromatic
                order = AROMATIC_ORDER if both else 1.0
            if any({a, b} == {other, prev} for a, b, _ in mol.bonds):
                raise SmilesError(ERR_RING, f"duplicate ring bond {digit}")
            mol.bonds.append((other, prev, order))
        else:
            open_rings[digit] = (prev, pending)
        pending = None

    while i < n:
        ch = s[i]
        if ch == "[":
            end = s.find("]", i)
            if end < 0:
                raise SmilesError(ERR_BRACKET, f"unclosed bracket at {i}")
            add_atom(_parse_bracket(s[i + 1:end], i))
            i = end + 1
        elif ch == "(":
            if prev is None:
                raise SmilesError(ERR_PAREN, "branch before any atom")
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesError(ERR_PAREN, f"unmatched ')' at {i}")
            prev = branch_stack.pop()
            i += 1
        elif ch in _BOND_ORDERS:
            pending = _BOND_ORDERS[ch]
            i += 1
        elif ch == "%":
            if i + 2 >= n or not s[i + 1:i + 3].isdigit():
                raise SmilesError(ERR_RING, f"malformed %nn ring closure at {i}")
            close_ring(s[i + 1:i + 3])
            i += 3
        elif ch.isdigit():
            close_ring(ch)
            i += 1
        elif ch.isupper():
            two = s[i:i + 2]
            if two in ("Cl", "Br"):
                add_atom(Atom(two))
                i += 2
            elif ch in ORGANIC_SUBSET:
                add_atom(Atom(ch))
                i += 1
            else:
                raise SmilesError(ERR_SYMBOL, f"unknown symbol {ch!r} at {i}")
        elif ch in AROMATIC_SUBSET:
            add_atom(Atom(ch.capitalize(), aromatic=True))
            i += 1
        else:
            raise SmilesError(ERR_SYMBOL, f"unknown symbol {ch!r} at {i}")

    if branch_stack:
        raise SmilesError(ERR_PAREN, f"{len(branch_stack)} unclosed '('")
    if open_rings:
        raise SmilesError(ERR_RING, f"unpaired ring digits {sorted(open_rings)}")
    return mol


def check_validity(s: str) -> tuple[bool, str]:
    """Return (valid, reason); valid means the string parses and every atom
    stays within its maximum valence (charge widens N/O by |charge|)."""
    try:
        mol = parse_smiles(s)
    except SmilesError as exc:
        return False, f"{exc.kind}: {exc}"
    for idx, atom in enumerate(mol.atoms):
        allowed = MAX_VALENCE[atom.element]
        if atom.element in ("N", "O"):
            allowed += abs(atom.charge)
        total = math.ceil(mol.bond_order_sum(idx) - 1e-9)
        if total > allowed:
            return False, (f"valence {total} exceeds {allowed} "
                           f"for {atom.element} at atom {idx}")
    return True, "ok"


def implicit_hydrogens(mol: Molecule, idx: int) -> int:
    """Implicit H count from the valence deficit; bracket atoms carry their
    explicit count and get none."""
    atom = mol.atoms[idx]
    if atom.explicit_h is not None:
        return 0
    bonds = math.ceil(mol.bond_order_sum(idx) - 1e-9)
    for valence in NORMAL_VALENCES[atom.element]:
        if bonds <= valence:
            return valence - bonds
    return 0


def molecular_weight(mol: Molecule) -> float:
    """Sum of heavy-atom weights plus implicit and explicit hydrogens, in Da."""
    total = 0.0
    for idx, atom in enumerate(mol.atoms):
        if atom.element not in ATOMIC_WEIGHTS:
            raise SmilesError(ERR_SYMBOL, f"no tabulated weight for {atom.element}")
        total += ATOMIC_WEIGHTS[atom.element]
        n_h = atom.explicit_h if atom.explicit_h is not None else implicit_hydrogens(mol, idx)
        total += n_h * ATOMIC_WEIGHTS["H"]
    return total


@dataclass(frozen=True)
class Fingerprint:
    bits: frozenset[int]
    size: int = 1024
    radius: int = 5


def _bond_token(order: float) -> str:
    return "a" if order == AROMATIC_ORDER else str(int(order))


def _atom_token(atom: Atom) -> str:
    return atom.element.lower() if atom.aromatic else atom.element


def _hash_path(path: str, size: int) -> int:
    digest = hashlib.blake2b(path.encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % size


def fingerprint(mol: Molecule, size: int = 1024, radius: int = 5) -> Fingerprint:
    """Hash every simple linear bond path of length 0..radius into a bit set.

    Paths are canonicalized as the lexicographic min of the forward and
    reversed element/bond-order string, so the result is independent of the
    atom ordering induced by the SMILES writing direction.
    """
    paths: set[str] = set()

    def extend(last: int, visited: list[int], tokens: list[str]) -> None:
        forward = "".join(tokens)
        backward = "".join(reversed(tokens))
        paths.add(min(forward, backward))
        if (len(tokens) - 1) // 2 >= radius:
            return
        for nxt, order in mol.neighbors(last):
            if nxt in visited:
                continue
            visited.append(nxt)
            tokens.append(_bond_token(order))
            tokens.append(_atom_token(mol.atoms[nxt]))
            extend(nxt, visited, tokens)
            tokens.pop()
            tokens.pop()
            visited.pop()

    for start in range(len(mol.atoms)):
        extend(start, [start], [_atom_token(mol.atoms[start])])
    bits = frozenset(_hash_path(p, size) for p in paths)
    return Fingerprint(bits=bits, size=size, radius=radius)


def tanimoto_distance(a: Fingerprint, b: Fingerprint) -> float:
    """1 - |A∩B| / |A∪B| over fingerprint bits; two empty sets give 0."""
    if a.size != b.size:
        raise ValueError(f"fingerprint size mismatch: {a.size} vs {b.size}")
    union = a.bits | b.bits
    if not union:
        return 0.0
    return 1.0 - len(a.bits & b.bits) / len(union)


def levenshtein(s1: str, s2: str) -> int:
    """Edit distance with unit insert/delete/replace costs."""
    if len(s1) < len(s2):
        s1, s2 = s2, s1
    previous = list(range(len(s2) + 1))
    for i, c1 in enumerate(s1, start=1):
        current = [i]
        for j, c2 in enumerate(s2, start=1):
            cost = 0 if c1 == c2 else 1
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + cost))
        previous = current
    return previous[-1]
