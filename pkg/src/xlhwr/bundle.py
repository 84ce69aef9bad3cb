"""Versioned, checksummed text bundles for trained models.

Layout::

    XLHWR 1
    sha256 <hex digest of the payload bytes>
    <JSON payload>

Floats are written with ``repr`` precision by the JSON encoder, so a round
trip reproduces every parameter bit for bit.
"""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ghmm import CharHmm, HmmSet
from .rbfsvm import BinaryMachine, SvmModel
from .xmap import Lut

MAGIC = "XLHWR"
VERSION = 1


class BundleError(ValueError):
    pass


class BundleVersionError(BundleError):
    pass


class ChecksumError(BundleError):
    pass


@dataclass
class ModelBundle:
    hmmset: HmmSet | None = None
    svm: SvmModel | None = None
    luts: dict[str, Lut] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)      # geometry, hyperparameters, provenance


# ------------------------------------------------------------ to/from JSON

def _hmm_doc(m: CharHmm) -> dict:
    return {"weights": m.weights.tolist(), "means": m.means.tolist(), "variances": m.variances.tolist(),
            "log_self": m.log_self.tolist(), "log_next": m.log_next.tolist()}


def _hmm_from(cid: str, d: dict) -> CharHmm:
    arr = lambda k: np.asarray(d[k], dtype=np.float64)  # noqa: E731
    return CharHmm(cid, arr("weights"), arr("means"), arr("variances"), arr("log_self"), arr("log_next"))


def hmmset_doc(h: HmmSet) -> dict:
    return {"script_id": h.script_id, "width": h.width, "shift": h.shift,
            "models": {c: _hmm_doc(m) for c, m in h.models.items()}}


def hmmset_from(d: dict) -> HmmSet:
    models = {c: _hmm_from(c, m) for c, m in d["models"].items()}
    return HmmSet(d["script_id"], models, int(d["width"]), int(d["shift"]))


def svm_doc(s: SvmModel) -> dict:
    return {"labels": list(s.labels), "gamma": s.gamma, "c": s.c,
            "machines": [{"positive": m.positive, "negative": m.negative, "support": m.support.tolist(),
                          "coef": m.coef.tolist(), "alpha": m.alpha.tolist(), "bias": m.bias, "gap": m.gap}
                         for m in s.machines]}


def svm_from(d: dict) -> SvmModel:
    machines = [BinaryMachine(m["positive"], m["negative"], np.asarray(m["support"], dtype=np.float64),
                              np.asarray(m["coef"], dtype=np.float64), np.asarray(m["alpha"], dtype=np.float64),
                              float(m["bias"]), float(m["gap"]))
                for m in d["machines"]]
    return SvmModel(list(d["labels"]), machines, float(d["gamma"]), float(d["c"]))


def lut_doc(lut: Lut) -> dict:
    return {"mapping": dict(lut.mapping), "hist": {t: dict(h) for t, h in lut.hist.items()}}


def lut_from(zone: str, d: dict) -> Lut:
    return Lut(zone, {t: Counter(h) for t, h in d["hist"].items()}, dict(d["mapping"]))


# ------------------------------------------------------------------- files

def dumps(bundle: ModelBundle) -> str:
    doc = {"meta": bundle.meta}
    if bundle.hmmset is not None:
        doc["hmmset"] = hmmset_doc(bundle.hmmset)
    if bundle.svm is not None:
        doc["svm"] = svm_doc(bundle.svm)
    if bundle.luts:
        doc["luts"] = {z: lut_doc(l) for z, l in bundle.luts.items()}
    payload = json.dumps(doc, ensure_ascii=False, sort_keys=True, allow_nan=False)
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return f"{MAGIC} {VERSION}\nsha256 {digest}\n{payload}\n"


def loads(text: str) -> ModelBundle:
    lines = text.split("\n", 2)
    if len(lines) < 3:
        raise BundleError("truncated bundle")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise BundleError(f"not a model bundle (header {lines[0][:40]!r})")
    if head[1] != str(VERSION):
        raise BundleVersionError(f"bundle version {head[1]} is not supported (expected {VERSION})")
    check = lines[1].split()
    if len(check) != 2 or check[0] != "sha256":
        raise BundleError("missing checksum line")
    payload = lines[2].rstrip("\n")
    if hashlib.sha256(payload.encode("utf-8")).hexdigest() != check[1]:
        raise ChecksumError("payload checksum mismatch: bundle is corrupted")
    doc = json.loads(payload)
    return ModelBundle(hmmset_from(doc["hmmset"]) if "hmmset" in doc else None,
                       svm_from(doc["svm"]) if "svm" in doc else None,
                       {z: lut_from(z, d) for z, d in doc.get("luts", {}).items()},
                       doc.get("meta", {}))


def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    Path(path).write_text(dumps(bundle), encoding="utf-8")


def load_bundle(path: str | Path) -> ModelBundle:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ChecksumError(f"bundle is not valid UTF-8: {exc}") from exc
    return loads(text)
