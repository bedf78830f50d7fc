"""JSON model files: reading, validation and emission.

Tensor entries are sparse, keyed like ``"C[0][1][2]"``; omitted entries are
zero and indices are 0-based.  See docs/schema.md for the full layout.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import expr as E
from .algebroid import LieAlgebroid, Section
from .expr import Chart, SampleSpec
from .parser import ParseError
from .geometry import VectorField, OneForm
from .imfoliation import IMFoliation, MorphicFoliation
from .algebroid import total_chart

SCHEMA_VERSION = 1
_KEY = re.compile(r"^([A-Za-z_]+)((?:\[\d+\])+)$")


class ModelError(ValueError):
    """Input problem; the message names the source, block and entry."""

    def __init__(self, source: str, block: str, entry: str, message: str):
        super().__init__(f"{source}: {block}: {entry}: {message}")
        self.source = source
        self.block = block
        self.entry = entry


@dataclass
class Model:
    source: str
    name: str
    chart: Chart
    spec: SampleSpec
    algebroid: LieAlgebroid | None = None
    im: IMFoliation | None = None
    dirac: object = None
    characteristic: list | None = None
    fa: MorphicFoliation | None = None
    fiber_box: list | None = None
    command: str | None = None
    raw: dict = field(default_factory=dict)


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, block, entry, message):
        raise ModelError(self.source, block, entry, message)

    def expr(self, text, chart, block, entry):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return E.as_expr(text)
        if not isinstance(text, str):
            self.fail(block, entry, f"expected an expression string, got {type(text).__name__}")
        try:
            return chart.parse(text)
        except ParseError as err:
            self.fail(block, entry, str(err))

    def rows(self, data, chart, width, block, entry):
        if not isinstance(data, list):
            self.fail(block, entry, "expected a list of rows")
        out = []
        for r, row in enumerate(data):
            if not isinstance(row, list) or len(row) != width:
                self.fail(block, f"{entry}[{r}]", f"expected {width} entries")
            out.append([self.expr(x, chart, block, f"{entry}[{r}][{c}]") for c, x in enumerate(row)])
        return out

    def sparse(self, data, name, shape, chart, block):
        out = _zeros(shape)
        if data is None:
            return out
        if not isinstance(data, dict):
            self.fail(block, name, "expected an object of sparse entries")
        for key, text in data.items():
            m = _KEY.match(key.replace(" ", ""))
            if not m or m.group(1) != name:
                self.fail(block, key, f"expected keys of the form {name}" + "[i]" * len(shape))
            idx = [int(i) for i in re.findall(r"\d+", m.group(2))]
            if len(idx) != len(shape) or any(i >= s for i, s in zip(idx, shape)):
                self.fail(block, key, f"index out of range for shape {tuple(shape)}")
            target = out
            for i in idx[:-1]:
                target = target[i]
            target[idx[-1]] = self.expr(text, chart, block, key)
        return out


def _zeros(shape):
    if len(shape) == 1:
        return [E.ZERO] * shape[0]
    return [_zeros(shape[1:]) for _ in range(shape[0])]


def _sampling(data: dict, r: _Reader) -> SampleSpec:
    s = data.get("sampling", {}) or {}
    try:
        return SampleSpec(int(s.get("samples", 100)), int(s.get("seed", 0)), float(s.get("tol", 1e-8)),
                          float(s.get("h", 1e-5)))
    except (TypeError, ValueError) as err:
        r.fail("sampling", "-", str(err))


def load_dict(data: dict, source: str = "<model>") -> Model:
    r = _Reader(source)
    if not isinstance(data, dict):
        r.fail("model", "-", "top level must be a JSON object")
    if data.get("schema") != SCHEMA_VERSION:
        r.fail("model", "schema", f"unsupported schema version {data.get('schema')!r} (expected {SCHEMA_VERSION})")
    ch = data.get("chart")
    if not isinstance(ch, dict) or "coordinates" not in ch:
        r.fail("chart", "coordinates", "missing")
    names = ch["coordinates"]
    box = ch.get("box")
    try:
        chart = Chart.make(names, box)
    except (TypeError, ValueError) as err:
        r.fail("chart", "coordinates", str(err))
    n = chart.dim
    model = Model(source, data.get("name", Path(source).stem), chart, _sampling(data, r),
                  fiber_box=ch.get("fiber_box"), command=data.get("command"), raw=data)

    alg = data.get("algebroid")
    if alg is not None:
        k = alg.get("rank")
        if not isinstance(k, int) or k < 0:
            r.fail("algebroid", "rank", "must be a non-negative integer")
        anchor = r.sparse(alg.get("anchor"), "rho", (n, k), chart, "algebroid")
        C = r.sparse(alg.get("structure"), "C", (k, k, k), chart, "algebroid")
        _fill_antisymmetric(C, k, r)
        try:
            model.algebroid = LieAlgebroid(chart, k, anchor, C, name=model.name)
        except ValueError as err:
            r.fail("algebroid", "structure", str(err))

    dirac = data.get("dirac")
    if dirac is not None:
        from .dirac import DiracError, DiracFrame

        frame = dirac.get("frame")
        if not isinstance(frame, list):
            r.fail("dirac", "frame", "expected a list of {X, xi} pairs")
        pairs = []
        for i, item in enumerate(frame):
            if not isinstance(item, dict):
                r.fail("dirac", f"frame[{i}]", "expected an object with X and xi")
            X = r.rows([item.get("X")], chart, n, "dirac", f"frame[{i}].X")[0]
            xi = r.rows([item.get("xi")], chart, n, "dirac", f"frame[{i}].xi")[0]
            pairs.append((VectorField(chart, X), OneForm(chart, xi)))
        try:
            model.dirac = DiracFrame(chart, pairs)
        except DiracError as err:
            r.fail("dirac", "frame", str(err))
        model.characteristic = list(dirac.get("characteristic", []))

    im = data.get("im")
    if im is not None:
        A = model.algebroid
        if A is None:
            r.fail("im", "-", "an im block needs an algebroid block")
        k = A.rank
        if "leaf" in im:
            leaf = im["leaf"]
            if not isinstance(leaf, list) or not all(isinstance(i, int) and 0 <= i < n for i in leaf):
                r.fail("im", "leaf", f"expected a list of coordinate indices below {n}")
        else:
            l = im.get("l", 0)
            if not isinstance(l, int) or not 0 <= l <= n:
                r.fail("im", "l", f"expected an integer between 0 and {n}")
            leaf = list(range(l))
        core = [Section(A, row) for row in r.rows(im.get("core", []), chart, k, "im", "core")]
        comp = [Section(A, row) for row in r.rows(im.get("complement", []), chart, k, "im", "complement")]
        if len(core) + len(comp) != k:
            r.fail("im", "complement", f"core and complement must have {k} rows together")
        gamma = r.sparse(im.get("gamma"), "gamma", (len(leaf), len(comp), len(comp)), chart, "im")
        cand = None
        if im.get("parallel_frame") is not None:
            cand = [Section(A, row) for row in r.rows(im["parallel_frame"], chart, k, "im", "parallel_frame")]
        try:
            model.im = IMFoliation(A, leaf, core, comp, gamma, cand, name=model.name)
        except ValueError as err:
            r.fail("im", "-", str(err))

    fa = data.get("fa")
    if fa is not None:
        A = model.algebroid
        if A is None:
            r.fail("fa", "-", "an fa block needs an algebroid block")
        fnames = fa.get("fiber_coordinates")
        try:
            tc = total_chart(A, fnames, model.fiber_box)
        except (TypeError, ValueError) as err:
            r.fail("fa", "fiber_coordinates", str(err))
        fields = [VectorField(tc, row) for row in r.rows(fa.get("fields", []), tc, n + A.rank, "fa", "fields")]
        leaf = fa.get("leaf", im.get("leaf", list(range(im.get("l", 0)))) if im else [])
        model.fa = MorphicFoliation(A, fields, leaf, chart=tc)
    return model


def _fill_antisymmetric(C, k, r):
    for a in range(k):
        for b in range(k):
            for g in range(k):
                x, y = C[a][b][g], C[b][a][g]
                if x == E.ZERO and y != E.ZERO:
                    C[a][b][g] = E.simplify(-y)
    for a in range(k):
        for g in range(k):
            if C[a][a][g] != E.ZERO:
                r.fail("algebroid", f"C[{a}][{a}][{g}]", "diagonal structure functions must vanish")


def load(path) -> Model:
    path = str(path)
    if path.startswith("gallery:"):
        return load_gallery(path.split(":", 1)[1])
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ModelError(path, "file", "-", err.strerror or str(err)) from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelError(path, "file", f"line {err.lineno}", err.msg) from err
    return load_dict(data, path)


def gallery_names() -> list:
    root = resources.files("morphic") / "gallery"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def gallery_dict(name: str) -> dict:
    root = resources.files("morphic") / "gallery"
    f = root / f"{name}.json"
    if not f.is_file():
        raise ModelError(f"gallery:{name}", "gallery", name, f"unknown example; available: {', '.join(gallery_names())}")
    return json.loads(f.read_text())


def load_gallery(name: str) -> Model:
    return load_dict(gallery_dict(name), f"gallery:{name}")


# ---------------------------------------------------------------------------
# emission


def _str(e) -> str:
    if E.has_opaque(e):
        raise ValueError("numerically defined expressions cannot be written to a model file")
    return str(E.simplify(e))


def _sparse_out(name, tensor, prefix=()):
    out = {}
    for i, x in enumerate(tensor):
        if isinstance(x, (list, tuple)):
            out.update(_sparse_out(name, x, prefix + (i,)))
        elif not (isinstance(x, E.Const) and x.value == 0):
            out[name + "".join(f"[{j}]" for j in prefix + (i,))] = _str(x)
    return out


def chart_block(chart: Chart, fiber_box=None) -> dict:
    out = {"coordinates": list(chart.names), "box": [list(b) for b in chart.box]}
    if fiber_box:
        out["fiber_box"] = [list(b) for b in fiber_box]
    return out


def algebroid_block(A: LieAlgebroid) -> dict:
    k = A.rank
    C = [[[A.C[a][b][g] if a < b else E.ZERO for g in range(k)] for b in range(k)] for a in range(k)]
    return {"rank": k, "anchor": _sparse_out("rho", A.anchor), "structure": _sparse_out("C", C)}


def im_block(im: IMFoliation) -> dict:
    out = {
        "leaf": list(im.leaf),
        "core": [[_str(c) for c in s.components] for s in im.core],
        "complement": [[_str(c) for c in s.components] for s in im.complement],
        "gamma": _sparse_out("gamma", im.gamma),
    }
    if im.connection.candidate:
        out["parallel_frame"] = [[_str(c) for c in s.components] for s in im.connection.candidate]
    return out


def gamma_block(gamma) -> dict:
    return _sparse_out("gamma", gamma)


def fa_block(fa: MorphicFoliation) -> dict:
    n = fa.algebroid.chart.dim
    return {
        "fiber_coordinates": list(fa.chart.names[n:]),
        "leaf": list(fa.leaf),
        "fields": [[_str(c) for c in X.components] for X in fa.fields],
    }


def sampling_block(spec: SampleSpec) -> dict:
    return {"samples": spec.samples, "seed": spec.seed, "tol": spec.tol, "h": spec.h}


def model_dict(name: str, chart: Chart, spec: SampleSpec, algebroid=None, im=None, fa=None, fiber_box=None) -> dict:
    out = {"schema": SCHEMA_VERSION, "name": name, "chart": chart_block(chart, fiber_box)}
    if algebroid is not None:
        out["algebroid"] = algebroid_block(algebroid)
    if im is not None:
        out["im"] = im_block(im)
    if fa is not None:
        out["fa"] = fa_block(fa)
    out["sampling"] = sampling_block(spec)
    return out


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
