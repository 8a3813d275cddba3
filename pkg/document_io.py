"""
Document I/O
Reads instance files, assembles diagnosis documents and writes them as JSON.
Floats are written in their shortest round-trip form, so every value is
recovered exactly on re-reading.
"""

import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

import geometry as geo
import product_form as pf
import projection as pj
import tandem as td
from config_manager import DEFAULT_TOLERANCES, Tolerances
from exceptions import InstanceError, InvalidSigma, SrbmError
from srbm_model import SrbmData, ValidationReport, validate

VERDICT_PRODUCT_FORM = "product form"
VERDICT_NOT_PRODUCT_FORM = "not product form"
VERDICT_INVALID = "invalid instance"

PathLike = Union[str, Path]


def make_json_safe(obj: Any) -> Any:
    """Convert reports, numpy values and enums to plain JSON types.

    Non-finite floats become null.
    """
    if hasattr(obj, "to_dict"):
        return make_json_safe(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): make_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [make_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return make_json_safe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(payload: Any) -> str:
    return json.dumps(make_json_safe(payload), indent=2, allow_nan=False) + "\n"


def write_json(payload: Any, path: Optional[PathLike] = None):
    """Write to path, or to standard output when path is None or '-'"""
    text = dumps(payload)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    if target.parent != Path(""):
        target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as f:
        f.write(text)
    logging.info(f"Wrote {target}")


def read_json(path: PathLike) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise InstanceError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InstanceError(f"{path} is not valid JSON: {e}") from e


@dataclass(frozen=True, eq=False)
class Instance:
    """SRBM data plus the tandem description it was expanded from, if any"""
    data: SrbmData
    tandem: Optional[td.TandemSpec] = None


def parse_instance(doc: Any) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceError("an instance must be a JSON object")
    raw_keys = {"sigma", "mu", "r"} & set(doc)
    if "tandem" in doc:
        if raw_keys:
            raise InstanceError("give either sigma/mu/r or tandem, not both")
        spec = td.TandemSpec.from_dict(doc["tandem"])
        return Instance(td.build_srbm(spec), spec)
    if not raw_keys:
        raise InstanceError("instance needs sigma, mu and r, or a tandem section")
    return Instance(SrbmData.from_dict(doc))


def read_instance(path: PathLike) -> Instance:
    instance = parse_instance(read_json(path))
    logging.info(f"Loaded {instance.data.d}-dimensional instance from {path}")
    return instance


@dataclass(frozen=True, eq=False)
class DiagnosisDocument:
    instance: SrbmData
    tolerances: Tolerances
    validation: Optional[ValidationReport] = None
    tandem: Optional[td.TandemSpec] = None
    geometry: Optional[geo.GeometryBundle] = None
    product_form: Optional[pf.ProductFormReport] = None
    pairs: Optional[pj.PairTable] = None
    vp: Optional[td.VpReport] = None
    notes: List[str] = field(default_factory=list)
    generated_at: Optional[str] = None

    @property
    def verdict(self) -> str:
        if self.validation is None or not self.validation.is_valid or self.product_form is None:
            return VERDICT_INVALID
        return VERDICT_PRODUCT_FORM if self.product_form.product_form else VERDICT_NOT_PRODUCT_FORM

    def to_dict(self) -> Dict[str, Any]:
        doc = {"verdict": self.verdict, "instance": self.instance.to_dict()}
        if self.tandem is not None:
            doc["tandem"] = self.tandem.to_dict()
        doc.update({
            "tolerances": self.tolerances.to_dict(),
            "validation": None if self.validation is None else self.validation.to_dict(),
            "geometry": None if self.geometry is None else self.geometry.to_dict(),
            "product_form": None if self.product_form is None else self.product_form.to_dict(),
            "pairs": None if self.pairs is None else self.pairs.to_dict(),
            "vp": None if self.vp is None else self.vp.to_dict(),
            "notes": list(self.notes),
        })
        if self.generated_at is not None:
            doc["generated_at"] = self.generated_at
        return doc


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def diagnose_instance(instance: Instance, tol: Tolerances = DEFAULT_TOLERANCES,
                      vp_target=None, skip_lp: bool = False,
                      timestamp: bool = False) -> DiagnosisDocument:
    """Validation, rays, both product-form decisions, the pair table and,
    for tandem instances in product form, the entrance velocities.

    Sections that cannot be computed stay None and the reason is added to
    notes; the document is always returned.
    """
    data = instance.data
    notes = []
    stamp = _timestamp() if timestamp else None
    base = dict(instance=data, tolerances=tol, tandem=instance.tandem, generated_at=stamp)

    try:
        validation = validate(data, tol, skip_lp=skip_lp)
    except InvalidSigma as e:
        logging.error(f"Invalid instance: {e}")
        return DiagnosisDocument(notes=[str(e)], **base)

    if not validation.is_valid:
        notes.append("R is not completely-S" if not validation.exists
                     else "the stability condition R^-1 mu < 0 fails")
        logging.error(f"Invalid instance: {notes[-1]}")
    if not validation.nonsingular:
        return DiagnosisDocument(validation=validation, notes=notes, **base)

    bundle = geo.compute_rays(data, tol)
    if not validation.is_valid:
        return DiagnosisDocument(validation=validation, geometry=bundle, notes=notes, **base)

    is_p = validation.classification.is_p_matrix
    report = pf.diagnose_product_form(data, bundle, tol, is_p=is_p)
    logging.info(f"Verdict: {'product form' if report.product_form else 'not product form'}")

    pairs = None
    if data.d < 2:
        notes.append("no coordinate pairs in dimension 1")
    elif not is_p:
        notes.append("pair table skipped: R is not a P-matrix")
    else:
        pairs = pj.pairwise_independence_report(data, bundle, tol)

    vp = None
    if instance.tandem is not None:
        try:
            if vp_target is not None:
                vp = td.conjectured_path(instance.tandem, vp_target, tol)
            elif td.product_form_condition(instance.tandem, tol):
                vp = td.entrance_velocities(instance.tandem, tol)
        except SrbmError as e:
            logging.warning(f"No variational-problem report: {e}")
            notes.append(f"vp: {e}")
    elif vp_target is not None:
        notes.append("vp: a path target needs a tandem instance")

    return DiagnosisDocument(validation=validation, geometry=bundle, product_form=report,
                             pairs=pairs, vp=vp, notes=notes, **base)


def write_diagnosis(doc: DiagnosisDocument, path: Optional[PathLike] = None):
    write_json(doc, path)


@dataclass(frozen=True, eq=False)
class DiagnosisCheck:
    stored: Dict[str, Any]
    rebuilt: DiagnosisDocument
    mismatches: List[str]

    @property
    def consistent(self) -> bool:
        return not self.mismatches


def _stored_tolerances(doc: Dict[str, Any]) -> Tolerances:
    section = doc.get("tolerances") or {}
    known = {f.name for f in fields(Tolerances)}
    try:
        return Tolerances(**{k: float(v) for k, v in section.items() if k in known})
    except (TypeError, ValueError) as e:
        raise InstanceError(f"bad tolerances section: {e}") from e


def _close(stored, fresh) -> bool:
    if stored is None or fresh is None:
        return stored is None and fresh is None
    a = np.asarray(stored, dtype=float)
    b = np.asarray(fresh, dtype=float)
    return a.shape == b.shape and bool(np.allclose(a, b, rtol=1e-12, atol=1e-14))


def read_diagnosis(path: PathLike) -> DiagnosisCheck:
    """Re-read a diagnosis document and recompute it from the recorded
    instance and tolerances.

    Mismatches list the sections whose stored values disagree with the
    recomputation or with each other.
    """
    stored = read_json(path)
    if not isinstance(stored, dict) or "instance" not in stored:
        raise InstanceError(f"{path} is not a diagnosis document")

    if "tandem" in stored:
        instance = parse_instance({"tandem": stored["tandem"]})
    else:
        instance = parse_instance(stored["instance"])
    tol = _stored_tolerances(stored)

    vp_target = None
    vp = stored.get("vp") or {}
    if vp.get("path"):
        vp_target = vp["path"][-1]["end"]
    rebuilt = diagnose_instance(instance, tol, vp_target=vp_target)

    mismatches = []
    if stored.get("verdict") != rebuilt.verdict:
        mismatches.append(f"verdict: stored {stored.get('verdict')!r}, recomputed {rebuilt.verdict!r}")

    report = stored.get("product_form")
    if report is not None:
        if (report.get("alpha") is not None) != bool(report.get("skew_ok")):
            mismatches.append("product_form: alpha must be present exactly when skew symmetry holds")
        if bool(report.get("product_form")) != (stored.get("verdict") == VERDICT_PRODUCT_FORM):
            mismatches.append("product_form: flag disagrees with the verdict")
        fresh = rebuilt.product_form
        if fresh is None or not _close(report.get("alpha"), fresh.to_dict()["alpha"]):
            mismatches.append("product_form: alpha differs from the recomputed value")

    fresh_geometry = None if rebuilt.geometry is None else rebuilt.geometry.to_dict()
    stored_geometry = stored.get("geometry")
    if (stored_geometry is None) != (fresh_geometry is None) or (
            stored_geometry is not None and not _close(stored_geometry.get("tau"), fresh_geometry["tau"])):
        mismatches.append("geometry: tau differs from the recomputed value")

    for m in mismatches:
        logging.warning(f"{path}: {m}")
    return DiagnosisCheck(stored=stored, rebuilt=rebuilt, mismatches=mismatches)

