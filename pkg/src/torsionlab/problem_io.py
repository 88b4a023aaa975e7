"""Problem files (``"schema": "torsionlab/1"``) and result records.

Complex scalars are written as ``[re, im]``; plain JSON numbers are accepted
on input. Matrices are row-major nested lists. Fourier coefficients are
objects keyed by the integer mode.
"""
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circle_analytic import CircleBundle
from .combinatorial import MappingTorusInput
from .complex_torsion import (CohomologyBasis, GradedBilinearForm, GradedComplex,
                              validate_cohomology_basis)
from .errors import NotAComplexError, ParseError, SingularFormError, ValidationError
from .trigpoly import TrigPoly

SCHEMA = "torsionlab/1"
KINDS = ("complex", "circle", "mapping_torus")


@dataclass(frozen=True)
class ComplexPayload:
    complex: GradedComplex
    form: GradedBilinearForm
    basis: CohomologyBasis = None


@dataclass(frozen=True)
class ProblemFile:
    kind: str
    payload: object
    metadata: dict = field(default_factory=dict)

    @property
    def digest(self):
        return document_digest(dump_problem(self))


def _scalar(x, where):
    if isinstance(x, bool):
        raise ParseError("expected a number or [re, im]", where)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ParseError("expected a number or [re, im]", where)


def _matrix(x, where):
    if not isinstance(x, list) or not all(isinstance(r, list) for r in x):
        raise ParseError("expected a matrix as a list of rows", where)
    rows = [[_scalar(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(x)]
    if rows and len({len(r) for r in rows}) != 1:
        raise ParseError("rows have different lengths", where)
    return np.array(rows, dtype=np.complex128).reshape(len(rows), len(rows[0]) if rows else 0)


def _vector(x, where):
    if not isinstance(x, list):
        raise ParseError("expected a vector", where)
    return np.array([_scalar(v, f"{where}[{i}]") for i, v in enumerate(x)], dtype=np.complex128)


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing field '{key}'", where)
    return obj[key]


def _int(x, where):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError("expected an integer", where)
    return x


def _modes(obj, where, k):
    if not isinstance(obj, dict):
        raise ParseError("expected an object keyed by Fourier mode", where)
    out = {}
    for key, value in obj.items():
        try:
            m = int(key)
        except ValueError:
            raise ParseError(f"mode key '{key}' is not an integer", where) from None
        M = _matrix(value, f"{where}.{key}") if isinstance(value, list) and value and isinstance(value[0], list) \
            else np.atleast_2d(_scalar(value, f"{where}.{key}"))
        if M.shape != (k, k):
            raise ParseError(f"mode {m} has shape {M.shape}, expected ({k}, {k})", f"{where}.{key}")
        out[m] = M
    return out


def _parse_complex(p):
    where = "payload"
    degree_min = _int(p.get("degree_min", 0), f"{where}.degree_min")
    dims = [_int(n, f"{where}.dims[{i}]") for i, n in enumerate(_require(p, "dims", where))]
    diffs = [_matrix(D, f"{where}.differentials[{i}]")
             for i, D in enumerate(_require(p, "differentials", where))]
    if len(diffs) != max(len(dims) - 1, 0):
        raise ParseError(f"{len(dims)} degrees need {len(dims) - 1} differentials", f"{where}.differentials")
    for i, D in enumerate(diffs):
        if D.size == 0:
            diffs[i] = np.zeros((dims[i + 1], dims[i]), dtype=np.complex128)
        elif D.shape != (dims[i + 1], dims[i]):
            raise ParseError(f"shape {D.shape} does not match dims ({dims[i + 1]}, {dims[i]})",
                             f"{where}.differentials[{i}]")
    try:
        C = GradedComplex(degree_min, tuple(dims), tuple(diffs))
    except NotAComplexError as exc:
        raise ValidationError(f"d_squared_nonzero at degree {exc.degree}",
                              f"relative residual {exc.residual:.3e}") from None
    if "bilinear_form" in p:
        grams = [_matrix(B, f"{where}.bilinear_form[{i}]") if n else np.zeros((0, 0))
                 for i, (B, n) in enumerate(zip(p["bilinear_form"], dims))]
        if len(grams) != len(dims) or any(B.shape != (n, n) for B, n in zip(grams, dims)):
            raise ParseError("bilinear form must give one n_q x n_q Gram matrix per degree", f"{where}.bilinear_form")
        try:
            b = GradedBilinearForm(tuple(grams))
        except SingularFormError as exc:
            raise ValidationError("b_singular", str(exc)) from None
    else:
        b = GradedBilinearForm.standard(C.dims)
    basis = None
    if p.get("cohomology_basis") is not None:
        basis = parse_cohomology_basis(p["cohomology_basis"], C, f"{where}.cohomology_basis")
    return ComplexPayload(C, b, basis)


def parse_cohomology_basis(raw, C, where="cohomology_basis"):
    if not isinstance(raw, list) or len(raw) != len(C.dims):
        raise ParseError("expected one list of vectors per degree", where)
    vectors = []
    for i, (vecs, n) in enumerate(zip(raw, C.dims)):
        cols = [_vector(v, f"{where}[{i}][{j}]") for j, v in enumerate(vecs)]
        if any(len(c) != n for c in cols):
            raise ParseError(f"vectors in degree {C.degree_min + i} must have length {n}", f"{where}[{i}]")
        vectors.append(np.array(cols, dtype=np.complex128).T.reshape(n, len(cols)))
    h = CohomologyBasis(C.degree_min, tuple(vectors))
    validate_cohomology_basis(C, h)
    return h


def _parse_circle(p):
    where = "payload"
    k = _int(_require(p, "rank", where), f"{where}.rank")
    a = TrigPoly.from_modes(_modes(_require(p, "a", where), f"{where}.a", k), k)
    b_modes = _modes(p["b"], f"{where}.b", k) if "b" in p else {0: np.eye(k)}
    b = TrigPoly.from_modes(b_modes, k)
    samples = _int(p.get("sample_count", 256), f"{where}.sample_count")
    try:
        return CircleBundle(a, b, samples)
    except SingularFormError as exc:
        raise ValidationError("b_singular", str(exc)) from None


def _parse_mapping_torus(p):
    where = "payload"
    mats = [_matrix(P, f"{where}.phi_star[{i}]") for i, P in enumerate(_require(p, "phi_star", where))]
    z = _scalar(_require(p, "z", where), f"{where}.z")
    return MappingTorusInput(tuple(mats), z)


_PARSERS = {"complex": _parse_complex, "circle": _parse_circle, "mapping_torus": _parse_mapping_torus}


def parse_problem(doc):
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    schema = doc.get("schema")
    if schema != SCHEMA:
        raise ParseError(f"unsupported schema {schema!r}, expected {SCHEMA!r}", "schema")
    kind = _require(doc, "kind", "document")
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}", "kind")
    payload = _require(doc, "payload", "document")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ParseError("metadata must be an object", "metadata")
    return ProblemFile(kind, _PARSERS[kind](payload), metadata)


def load_problem(path):
    """Read and fully validate a problem file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    return parse_problem(doc)


def encode_scalar(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def encode_matrix(M):
    return [[encode_scalar(v) for v in row] for row in np.asarray(M)]


def _encode_modes(tp):
    d = tp.degree
    return {str(m): encode_matrix(tp.coeffs[m + d]) for m in range(-d, d + 1) if np.any(tp.coeffs[m + d])}


def dump_problem(problem):
    """Normalized JSON document for a :class:`ProblemFile`."""
    p = problem.payload
    if problem.kind == "complex":
        C = p.complex
        payload = {
            "degree_min": C.degree_min,
            "dims": list(C.dims),
            "differentials": [encode_matrix(D) for D in C.differentials],
            "bilinear_form": [encode_matrix(B) for B in p.form.grams],
        }
        if p.basis is not None:
            payload["cohomology_basis"] = [[[encode_scalar(x) for x in col] for col in v.T] for v in p.basis.vectors]
    elif problem.kind == "circle":
        payload = {"rank": p.rank, "a": _encode_modes(p.a), "b": _encode_modes(p.b),
                   "sample_count": p.sample_count}
    else:
        payload = {"phi_star": [encode_matrix(P) for P in p.phi_star], "z": encode_scalar(p.z)}
    return {"schema": SCHEMA, "kind": problem.kind, "metadata": dict(problem.metadata), "payload": payload}


def canonical_json(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True)


def document_digest(doc):
    return "sha256:" + hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def save_problem(problem, path):
    Path(path).write_text(json.dumps(dump_problem(problem), indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class ResultRecord:
    input_digest: str
    operation: str
    params: dict
    value: object
    tolerances: dict
    status: str = "ok"
    error: dict = None
    timestamp: float = field(default_factory=time.time)

    def to_dict(self, include_timestamp=True):
        out = {
            "schema": SCHEMA,
            "input_digest": self.input_digest,
            "operation": {"name": self.operation, "params": self.params},
            "status": self.status,
            "value": self.value,
            "tolerances": self.tolerances,
        }
        if self.error is not None:
            out["error"] = self.error
        if include_timestamp:
            out["timestamp"] = self.timestamp
        return out

    def to_json(self, include_timestamp=True):
        return json.dumps(self.to_dict(include_timestamp), sort_keys=True)
