"""JSON camera manifest.

Layout::

    {
      "train_width": 256, "train_height": 256,
      "training": [ {camera}, ... ],
      "render":   [ {camera}, ... ]
    }

with each camera ``{"id", "width", "height", "fx", "fy", "cx", "cy",
"rotation_w2c": [9 numbers, row-major], "translation_w2c": [3 numbers]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import CameraModel, TrainingCameraSet
from ..errors import IoFailure, ManifestError


@dataclass
class CameraManifest:
    training: TrainingCameraSet | None
    training_ids: list[str] = field(default_factory=list)
    render: dict[str, CameraModel] = field(default_factory=dict)

    def view(self, view_id: str | None) -> CameraModel:
        """Look up a camera by id among render cameras, then training cameras."""
        if view_id is None:
            if self.render:
                return next(iter(self.render.values()))
            if self.training is not None:
                return self.training.cameras[0]
            raise ManifestError("manifest has no cameras")
        if view_id in self.render:
            return self.render[view_id]
        if view_id in self.training_ids:
            return self.training.cameras[self.training_ids.index(view_id)]
        raise ManifestError(f"no camera with id {view_id!r}")


def camera_to_dict(cam: CameraModel, cam_id: str) -> dict:
    return {
        "id": cam_id, "width": cam.width, "height": cam.height,
        "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
        "rotation_w2c": [float(v) for v in cam.rotation_w2c.ravel()],
        "translation_w2c": [float(v) for v in cam.translation_w2c],
    }


def camera_from_dict(d: dict) -> CameraModel:
    try:
        R = np.asarray(d["rotation_w2c"], dtype=np.float64)
        t = np.asarray(d["translation_w2c"], dtype=np.float64)
        if R.size != 9 or t.size != 3:
            raise ManifestError(f"camera {d.get('id')!r}: rotation needs 9 values, translation 3")
        return CameraModel(int(d["width"]), int(d["height"]), float(d["fx"]), float(d["fy"]),
                           float(d["cx"]), float(d["cy"]), R.reshape(3, 3), t)
    except KeyError as exc:
        raise ManifestError(f"camera entry missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"invalid camera entry {d.get('id')!r}: {exc}") from exc


def manifest_from_dict(doc: dict) -> CameraManifest:
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")
    train_entries = doc.get("training", [])
    render_entries = doc.get("render", [])
    training = None
    ids: list[str] = []
    if train_entries:
        try:
            tw, th = int(doc["train_width"]), int(doc["train_height"])
        except KeyError as exc:
            raise ManifestError("training cameras need train_width/train_height") from exc
        cams = [camera_from_dict(e) for e in train_entries]
        ids = [str(e.get("id", f"train-{i}")) for i, e in enumerate(train_entries)]
        try:
            training = TrainingCameraSet(tuple(cams), tw, th)
        except ValueError as exc:
            raise ManifestError(str(exc)) from exc
    render = {str(e.get("id", f"view-{i}")): camera_from_dict(e) for i, e in enumerate(render_entries)}
    return CameraManifest(training, ids, render)


def manifest_to_dict(manifest: CameraManifest) -> dict:
    doc: dict = {}
    if manifest.training is not None:
        ids = manifest.training_ids or [f"train-{i}" for i in range(len(manifest.training))]
        doc["train_width"] = manifest.training.train_width
        doc["train_height"] = manifest.training.train_height
        doc["training"] = [camera_to_dict(c, i) for c, i in zip(manifest.training.cameras, ids)]
    doc["render"] = [camera_to_dict(c, i) for i, c in manifest.render.items()]
    return doc


def load_manifest(path) -> CameraManifest:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    return manifest_from_dict(doc)


def save_manifest(manifest: CameraManifest, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest_to_dict(manifest), indent=2))
    return path
