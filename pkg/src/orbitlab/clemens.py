"""Clemens complexes and pole-order prediction for height zeta functions.

A boundary divisor with strict normal crossings decomposes the boundary into
components Delta_alpha, each carrying the multiplicity lambda_alpha of the
height section and the coefficient kappa_alpha of minus the log-canonical
divisor.  The abscissa of convergence of the height zeta integral is

    a = max_alpha (kappa_alpha - 1) / lambda_alpha,

and its pole order at s = a is 1 + dim of the analytic subcomplex supported
on the critical components (faces that are Galois fixed and carry local
points at the chosen place).  For the boundary geometry of the orbit closure
of a degree-n form, the preset below encodes the component data

    hyperplane pullback  L = (n-2)/2 * sum F_i + (n/2) E
    canonical divisor    K = -sum F_i - 2 E

so that a = 2/n with the single critical component E, which carries a dense
set of rational points at every place; each place contributes a simple pole.
Combined over the places of S and fed through the Tauberian dictionary
(pole order b at abscissa a gives growth T^a (log T)^{b-1}), the predicted
counting growth is T^{2/n} (log T)^{#S - 1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .forms import rational_from_string, rational_to_string
from .heights import PlaceSet

__all__ = [
    "DivisorDatum",
    "Face",
    "ClemensComplex",
    "PolePrediction",
    "dimension",
    "abscissa",
    "pole_order",
    "preset_orbit_geometry",
    "predict_counting_asymptotics",
    "complex_from_json",
]


@dataclass(frozen=True)
class DivisorDatum:
    id: str
    lam: Fraction  # multiplicity of the height section's divisor, > 0
    kappa: Fraction  # coefficient of -div(omega)
    local_points: dict = field(default_factory=dict)  # place label -> bool

    def __post_init__(self):
        object.__setattr__(self, "lam", Fraction(self.lam))
        object.__setattr__(self, "kappa", Fraction(self.kappa))
        if self.lam <= 0:
            raise ValueError(f"divisor {self.id}: multiplicity must be positive")

    def has_local_points(self, place) -> bool:
        return bool(self.local_points.get(str(place), True))


@dataclass(frozen=True)
class Face:
    id: str
    divisors: frozenset  # subset A of divisor ids
    component: str  # tag Z for the irreducible component of the stratum
    local_points: dict | None = None  # place -> bool; None derives from divisors

    def __post_init__(self):
        object.__setattr__(self, "divisors", frozenset(self.divisors))


class ClemensComplex:
    """Finite poset of faces (A, Z) with (A, Z) < (A', Z') read from supplied
    covering relations; verifies the partial-order axioms on construction."""

    def __init__(self, faces, relations, galois=None):
        self.faces = {f.id: f for f in faces}
        if len(self.faces) != len(faces):
            raise ValueError("face ids must be distinct")
        self.galois = dict(galois or {})
        for src, dst in self.galois.items():
            if src not in self.faces or dst not in self.faces:
                raise ValueError("galois permutation references unknown faces")
        if self.galois and sorted(self.galois) != sorted(set(self.galois.values())):
            raise ValueError("galois action must be a permutation of faces")
        # transitive closure of the supplied relations
        less: dict = {fid: set() for fid in self.faces}
        for a, b in relations:
            if a not in self.faces or b not in self.faces:
                raise ValueError(f"relation ({a}, {b}) references unknown faces")
            less[a].add(b)
        changed = True
        while changed:
            changed = False
            for a in less:
                new = set()
                for b in less[a]:
                    new |= less[b]
                if not new <= less[a]:
                    less[a] |= new
                    changed = True
        self._less = less
        for a in less:
            if a in less[a]:
                raise ValueError("order relation has a cycle (antisymmetry fails)")
            for b in less[a]:
                if not self.faces[a].divisors <= self.faces[b].divisors:
                    raise ValueError(
                        f"face {a} < {b} but divisor sets are not nested"
                    )

    def __len__(self):
        return len(self.faces)

    def is_empty(self) -> bool:
        return not self.faces

    def covers(self, a: str, b: str) -> bool:
        return b in self._less[a]

    def galois_fixed(self, fid: str) -> bool:
        return self.galois.get(fid, fid) == fid

    def face_has_local_points(self, fid: str, place, data_by_id: dict) -> bool:
        face = self.faces[fid]
        if face.local_points is not None:
            return bool(face.local_points.get(str(place), True))
        return all(data_by_id[d].has_local_points(place) for d in face.divisors)

    def restrict(self, face_ids) -> "ClemensComplex":
        keep = set(face_ids)
        faces = [f for f in self.faces.values() if f.id in keep]
        rels = [(a, b) for a in keep for b in self._less[a] if b in keep]
        galois = {a: b for a, b in self.galois.items() if a in keep and b in keep}
        return ClemensComplex(faces, rels, galois)


def dimension(complex_: ClemensComplex) -> int:
    """Longest chain length in the face poset (vertices have dimension 0);
    -1 for the empty complex."""
    if complex_.is_empty():
        return -1
    depth: dict = {}

    def longest(fid: str) -> int:
        if fid not in depth:
            depth[fid] = 0
            for other in complex_._less[fid]:
                depth[fid] = max(depth[fid], 1 + longest(other))
        return depth[fid]

    return max(longest(fid) for fid in complex_.faces)


def abscissa(data) -> tuple[Fraction, tuple]:
    """max (kappa - 1)/lambda over the divisor data, with the argmax ids."""
    data = list(data)
    if not data:
        raise ValueError("abscissa requires at least one divisor")
    values = [(d.kappa - 1) / d.lam for d in data]
    best = max(values)
    crit = tuple(sorted(d.id for d, v in zip(data, values) if v == best))
    return best, crit


@dataclass(frozen=True)
class PolePrediction:
    abscissa: Fraction
    critical_set: tuple
    place: object
    per_place_order: int  # 0 signals "no pole at the abscissa from this place"
    analytic_faces: tuple

    @property
    def has_pole(self) -> bool:
        return self.per_place_order >= 1


def pole_order(complex_: ClemensComplex, data, place) -> PolePrediction:
    """Pole order of the local height zeta function at the abscissa:
    1 + dimension of the analytic subcomplex supported on critical divisors
    (Galois-fixed faces with local points at the place)."""
    data = list(data)
    by_id = {d.id: d for d in data}
    for f in complex_.faces.values():
        if not f.divisors <= set(by_id):
            raise ValueError(f"face {f.id} references divisors outside the datum list")
    a, crit = abscissa(data)
    crit_set = set(crit)
    keep = [
        fid
        for fid, f in complex_.faces.items()
        if f.divisors <= crit_set
        and complex_.galois_fixed(fid)
        and complex_.face_has_local_points(fid, place, by_id)
    ]
    sub = complex_.restrict(keep)
    dim = dimension(sub)
    order = 0 if dim < 0 else 1 + dim
    return PolePrediction(a, crit, place, order, tuple(sorted(keep)))


def preset_orbit_geometry(n: int) -> tuple[ClemensComplex, list]:
    """Boundary data of the orbit closure of a degree-n form with distinct
    roots: components E (critical) and F_1..F_n, with the incidence complex
    whose critical part is the single vertex at E."""
    if n < 3:
        raise ValueError("degree must be at least 3")
    data = [DivisorDatum("E", Fraction(n, 2), Fraction(2))]
    data += [DivisorDatum(f"F{i}", Fraction(n - 2, 2), Fraction(1)) for i in range(1, n + 1)]
    faces = [Face("vE", {"E"}, "E")]
    faces += [Face(f"vF{i}", {f"F{i}"}, f"F{i}") for i in range(1, n + 1)]
    faces += [Face(f"eEF{i}", {"E", f"F{i}"}, f"E^F{i}") for i in range(1, n + 1)]
    rels = []
    for i in range(1, n + 1):
        rels.append(("vE", f"eEF{i}"))
        rels.append((f"vF{i}", f"eEF{i}"))
    return ClemensComplex(faces, rels), data


def predict_counting_asymptotics(n: int, S: PlaceSet) -> tuple[Fraction, int]:
    """(growth exponent, log power): the zeta pole order is summed over the
    places of S and fed through the Tauberian dictionary, giving
    T^{2/n} (log T)^{#S - 1} for the preset geometry."""
    complex_, data = preset_orbit_geometry(n)
    orders = []
    a = None
    for place in S.places():
        pred = pole_order(complex_, data, place)
        a = pred.abscissa
        orders.append(pred.per_place_order)
    b = sum(orders)
    return a, b - 1


def complex_from_json(doc: dict) -> tuple[ClemensComplex, list]:
    """Load a custom complex: divisors with (lambda, kappa, point flags),
    faces, order relations, and an optional Galois permutation."""
    data = [
        DivisorDatum(
            d["id"],
            rational_from_string(str(d["lambda"])),
            rational_from_string(str(d["kappa"])),
            {str(k): bool(v) for k, v in d.get("local_points", {}).items()},
        )
        for d in doc["divisors"]
    ]
    faces = [
        Face(
            f["id"],
            frozenset(f["divisors"]),
            f.get("component", f["id"]),
            (
                {str(k): bool(v) for k, v in f["local_points"].items()}
                if "local_points" in f
                else None
            ),
        )
        for f in doc["faces"]
    ]
    rels = [(a, b) for a, b in doc.get("order", [])]
    galois = doc.get("galois", {})
    return ClemensComplex(faces, rels, galois), data


def divisor_to_json(d: DivisorDatum) -> dict:
    return {
        "id": d.id,
        "lambda": rational_to_string(d.lam),
        "kappa": rational_to_string(d.kappa),
        "local_points": dict(d.local_points),
    }
