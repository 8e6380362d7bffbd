"""Nearest-neighbour models: the bond interaction ``h_{x,x+1}`` and site charge ``n_x``.

Everything else (currents, energy currents, region Hamiltonians and charges)
is derived from this pair.  Every model is checked on construction: both
matrices Hermitian and the bond commuting with ``n ⊗ 1 + 1 ⊗ n``.

Fermions enter through the Jordan-Wigner map with ``n = (1 + σ^3)/2``; the
nearest-neighbour hopping ``c_x^* c_{x+1} + h.c.`` is string free and equals
``(σ^x σ^x + σ^y σ^y)/2`` on the bond.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .algebra import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    LatticeGeometry,
    LocalOperator,
    commutator,
    identity,
    max_abs,
    spin_matrices,
)

__all__ = [
    "ModelError",
    "ModelParseError",
    "ModelSpec",
    "builtin",
    "parse_model",
    "serialize_model",
    "random_model",
    "bond",
    "charge",
    "current",
    "energy_current",
    "region_hamiltonian",
    "region_charge",
    "BUILTIN_PARAMS",
]

HERMITIAN_TOL = 1e-12
COMMUTANT_TOL = 1e-12

BUILTIN_PARAMS = {"xxz": ("lambda",), "fermion": ("t", "mu", "v")}
_OPTIONAL_PARAMS = {"xxz": ("local_dim",), "fermion": ()}


class ModelError(ValueError):
    """A model violates one of the required invariants."""


class ModelParseError(ModelError):
    """Model text could not be parsed; carries a 1-based position."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Bond interaction and site charge of a translation-invariant model.

    Attributes
    ----------
    name : str
        ``"xxz"``, ``"fermion"`` or a free label for user models.
    local_dim : int
        ``d = N + 1``.
    bond : ndarray, shape (d**2, d**2)
        ``h_{0,1}`` with site 0 the most significant tensor index.
    charge : ndarray, shape (d, d)
        ``n_0``.
    params : dict
        Named coupling constants (dimensionless).
    """

    name: str
    local_dim: int
    bond: np.ndarray
    charge: np.ndarray
    params: dict = field(default_factory=dict)
    builtin: bool = False

    def __post_init__(self):
        d = int(self.local_dim)
        h = np.array(self.bond, dtype=complex)
        n = np.array(self.charge, dtype=complex)
        if h.shape != (d * d, d * d):
            raise ModelError(f"bond must be {d * d}x{d * d}, got {h.shape}")
        if n.shape != (d, d):
            raise ModelError(f"charge must be {d}x{d}, got {n.shape}")
        if max_abs(h - h.conj().T) > HERMITIAN_TOL:
            raise ModelError(f"bond is not Hermitian (max |h - h^*| = {max_abs(h - h.conj().T):.3e})")
        if max_abs(n - n.conj().T) > HERMITIAN_TOL:
            raise ModelError(f"charge is not Hermitian (max |n - n^*| = {max_abs(n - n.conj().T):.3e})")
        viol = bond_charge_violation(h, n)
        if viol > COMMUTANT_TOL * max(1.0, np.linalg.norm(h, 2) * np.linalg.norm(n, 2)):
            raise ModelError(f"bond does not conserve the charge: ||[h, n⊗1 + 1⊗n]|| = {viol:.3e}")
        h.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "local_dim", d)
        object.__setattr__(self, "bond", h)
        object.__setattr__(self, "charge", n)
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (
            self.name == other.name
            and self.local_dim == other.local_dim
            and self.params == other.params
            and np.array_equal(self.bond, other.bond)
            and np.array_equal(self.charge, other.charge)
        )

    __hash__ = None

    @property
    def is_free_fermion(self) -> bool:
        return self.name == "fermion" and self.params.get("v", 0.0) == 0.0


def bond_charge_violation(h: np.ndarray, n: np.ndarray) -> float:
    d = n.shape[0]
    q = np.kron(n, np.eye(d)) + np.kron(np.eye(d), n)
    return float(np.linalg.norm(h @ q - q @ h, 2))


# ---------------------------------------------------------------------------
# construction


def _require(name: str, params: dict) -> dict:
    missing = [p for p in BUILTIN_PARAMS[name] if p not in params]
    if missing:
        raise ModelError(f"model {name!r} is missing parameter(s): {', '.join(missing)}")
    extra = set(params) - set(BUILTIN_PARAMS[name]) - set(_OPTIONAL_PARAMS[name])
    if extra:
        raise ModelError(f"model {name!r} got unknown parameter(s): {', '.join(sorted(extra))}")
    return dict(params)


def builtin(name: str, params: dict | None = None, **kwargs) -> ModelSpec:
    """Built-in models.

    ``fermion(t, mu, v)``:
        ``h = -t (σ^xσ^x + σ^yσ^y)/2 - mu n⊗1 + v n⊗n``, ``n = (1 + σ^3)/2``.
    ``xxz(lambda)``:
        ``h = S^1S^1 + S^2S^2 + lambda S^3S^3``, ``n = S^3``.  An optional
        ``local_dim`` selects spin ``(local_dim - 1)/2`` (default 1/2).
    """
    params = dict(params or {}, **kwargs)
    if name not in BUILTIN_PARAMS:
        raise ModelError(f"unknown built-in model {name!r} (choose from {sorted(BUILTIN_PARAMS)})")
    params = _require(name, params)
    if name == "fermion":
        t, mu, v = params["t"], params["mu"], params["v"]
        n = (np.eye(2) + PAULI_Z) / 2
        hop = (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y)) / 2
        h = -t * hop - mu * np.kron(n, np.eye(2)) + v * np.kron(n, n)
        return ModelSpec("fermion", 2, h, n, params, builtin=True)
    d = int(params.get("local_dim", 2))
    if d != params.get("local_dim", 2) or d < 2:
        raise ModelError("xxz local_dim must be an integer >= 2")
    sx, sy, sz = spin_matrices(d)
    h = np.kron(sx, sx) + np.kron(sy, sy) + params["lambda"] * np.kron(sz, sz)
    return ModelSpec("xxz", d, h, sz, params, builtin=True)


def random_model(rng: np.random.Generator, local_dim: int = 2, scale: float = 1.0) -> ModelSpec:
    """Random model satisfying the bond-charge commutation by construction.

    Draws a random Hermitian charge and bond, then projects the bond onto the
    commutant of ``n ⊗ 1 + 1 ⊗ n``.
    """
    d = local_dim

    def herm(k):
        a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        return (a + a.conj().T) / 2

    n = herm(d)
    h0 = scale * herm(d * d)
    q = np.kron(n, np.eye(d)) + np.kron(np.eye(d), n)
    w, u = np.linalg.eigh(q)
    labels = np.round(w / 1e-8).astype(np.int64)
    h_eig = u.conj().T @ h0 @ u
    h_eig[labels[:, None] != labels[None, :]] = 0
    h = u @ h_eig @ u.conj().T
    return ModelSpec("random", d, (h + h.conj().T) / 2, n)


# ---------------------------------------------------------------------------
# derived operators


def bond(model: ModelSpec, x: int, geometry: LatticeGeometry | None = None) -> LocalOperator:
    """``h_{x,x+1}``."""
    return LocalOperator((x, x + 1), model.bond, model.local_dim, geometry)


def charge(model: ModelSpec, x: int, geometry: LatticeGeometry | None = None) -> LocalOperator:
    """``n_x``."""
    return LocalOperator((x, x), model.charge, model.local_dim, geometry)


def current(model: ModelSpec, x: int, geometry: LatticeGeometry | None = None) -> LocalOperator:
    """``j_{x,x+1} = -i[n_{x+1}, h_{x,x+1}]``, cross-checked against ``i[n_x, h_{x,x+1}]``."""
    h = bond(model, x, geometry)
    j = commutator(charge(model, x + 1, geometry), h).scale(-1j)
    other = commutator(charge(model, x, geometry), h).scale(1j)
    if max_abs(j.matrix - other.matrix) > 1e-12 * max(1.0, np.linalg.norm(model.bond, 2) * np.linalg.norm(model.charge, 2)):
        raise ModelError("the two expressions for the current disagree")
    return j


def energy_current(model: ModelSpec, x: int, geometry: LatticeGeometry | None = None) -> LocalOperator:
    """``J_x = i[h_{x-1,x}, h_{x,x+1}]`` on ``[x-1, x+1]``."""
    return commutator(bond(model, x - 1, geometry), bond(model, x, geometry)).scale(1j)


def region_hamiltonian(model: ModelSpec, region: tuple[int, int], geometry: LatticeGeometry | None = None) -> LocalOperator:
    """``H_Λ``: sum of the bonds contained in ``Λ = [a, b]`` (zero for a single site)."""
    a, b = region
    total = identity((a, b), model.local_dim, geometry).scale(0)
    for x in range(a, b):
        total = total + bond(model, x, geometry)
    return total


def region_charge(model: ModelSpec, region: tuple[int, int], geometry: LatticeGeometry | None = None) -> LocalOperator:
    """``N_Λ = Σ_{x ∈ Λ} n_x``."""
    a, b = region
    total = identity((a, b), model.local_dim, geometry).scale(0)
    for x in range(a, b + 1):
        total = total + charge(model, x, geometry)
    return total


# ---------------------------------------------------------------------------
# text format

_SHORTHAND = re.compile(r"^\s*model\s*=")


def _position(text: str, key: str) -> tuple[int, int]:
    pat = re.compile(rf"^(\s*)({re.escape(key)})\s*=", re.M)
    m = pat.search(text)
    if m is None:
        return 1, 1
    line = text.count("\n", 0, m.start()) + 1
    return line, len(m.group(1)) + 1


def _decode_error_position(exc: Exception) -> tuple[int, int]:
    line = getattr(exc, "lineno", None)
    col = getattr(exc, "colno", None)
    if line is None:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        if m:
            line, col = int(m.group(1)), int(m.group(2))
    return line or 1, col or 1


def _parse_shorthand(text: str) -> ModelSpec:
    """``model=xxz, lambda=1.0`` style one-liners."""
    name = None
    params: dict[str, float] = {}
    offset = 0
    for chunk in text.split(","):
        col = offset + len(chunk) - len(chunk.lstrip()) + 1
        offset += len(chunk) + 1
        if not chunk.strip():
            continue
        if "=" not in chunk:
            raise ModelParseError(f"expected key=value, got {chunk.strip()!r}", 1, col)
        key, value = (s.strip() for s in chunk.split("=", 1))
        if key == "model":
            name = value.strip("'\"")
            continue
        try:
            params[key] = float(value)
        except ValueError:
            raise ModelParseError(f"parameter {key!r} is not a number: {value!r}", 1, col) from None
    if name is None:
        raise ModelParseError("missing 'model=' entry", 1, 1)
    try:
        return builtin(name, params)
    except ModelError as exc:
        raise ModelParseError(str(exc), 1, 1) from None


def _complex_matrix(value, key: str, text: str, dim: int) -> np.ndarray:
    line, col = _position(text, key)
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelParseError(f"{key} must be a nested array of [re, im] pairs", line, col) from None
    if arr.ndim == 2 and arr.shape[-1] == 2 and arr.shape[0] == dim * dim:
        arr = arr.reshape(dim, dim, 2)
    if arr.shape != (dim, dim, 2):
        raise ModelParseError(f"{key} must hold {dim}x{dim} [re, im] pairs, got shape {arr.shape}", line, col)
    return arr[..., 0] + 1j * arr[..., 1]


def parse_model(text: str) -> ModelSpec:
    """Parse a model definition.

    Two forms are accepted: a TOML document with a ``[model]`` table (see
    ``docs/formats.md``) or a one-line ``model=<name>, key=value, ...`` stanza
    for the built-ins.  Errors carry a 1-based line and column.
    """
    if _SHORTHAND.match(text) and "[" not in text:
        return _parse_shorthand(text.strip())
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line, col = _decode_error_position(exc)
        raise ModelParseError(f"syntax error: {str(exc).split(' (at')[0]}", line, col) from None
    if "model" not in doc or not isinstance(doc["model"], dict):
        raise ModelParseError("missing [model] table", 1, 1)
    return model_from_table(doc["model"], text)


def model_from_table(table: dict, text: str = "") -> ModelSpec:
    params = table.get("params", {})
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise ModelParseError("params.<name> entries must be numbers", *_position(text, "params"))
    if "builtin" in table:
        unknown = set(table) - {"builtin", "params"}
        if unknown:
            raise ModelParseError(f"unexpected key(s) {sorted(unknown)} next to 'builtin'", *_position(text, sorted(unknown)[0]))
        try:
            return builtin(str(table["builtin"]), params)
        except ModelError as exc:
            raise ModelParseError(str(exc), *_position(text, "builtin")) from None
    for key in ("local_dim", "bond", "charge"):
        if key not in table:
            raise ModelParseError(f"missing key {key!r} (or give 'builtin')", 1, 1)
    d = table["local_dim"]
    if not isinstance(d, int) or d < 2:
        raise ModelParseError("local_dim must be an integer >= 2", *_position(text, "local_dim"))
    h = _complex_matrix(table["bond"], "bond", text, d * d)
    n = _complex_matrix(table["charge"], "charge", text, d)
    name = str(table.get("name", "custom"))
    try:
        return ModelSpec(name, d, h, n, params)
    except ModelError as exc:
        key = "charge" if "charge" in str(exc) and "bond is" not in str(exc) else "bond"
        raise ModelParseError(str(exc), *_position(text, key)) from None


def _fmt(x: float) -> str:
    r = repr(float(x))
    return r if ("." in r or "e" in r or "n" in r) else r + ".0"


def _matrix_toml(m: np.ndarray) -> str:
    rows = []
    for row in m:
        pairs = ", ".join(f"[{_fmt(z.real)}, {_fmt(z.imag)}]" for z in row)
        rows.append(f"  [{pairs}],")
    return "[\n" + "\n".join(rows) + "\n]"


def serialize_model(model: ModelSpec) -> str:
    """TOML text that :func:`parse_model` maps back to an equal :class:`ModelSpec`."""
    lines = ["[model]"]
    if model.builtin:
        lines.append(f'builtin = "{model.name}"')
    else:
        lines.append(f'name = "{model.name}"')
        lines.append(f"local_dim = {model.local_dim}")
        lines.append(f"bond = {_matrix_toml(model.bond)}")
        lines.append(f"charge = {_matrix_toml(model.charge)}")
    for k, v in model.params.items():
        if not math.isfinite(v):
            raise ModelError(f"parameter {k!r} is not finite")
        lines.append(f"params.{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"
