"""Run configuration (`key = value` text file) and the dataset manifest (JSON).

Every key has a registered type and default; unknown keys are hard errors so
typos never silently fall back to defaults. A resolved copy of the config is
written next to run outputs for provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from speechconf.errors import ConfigError
from speechconf.hybrid import HybridConfig
from speechconf.pseudo import LabellerConfig, PseudoLabelConfig


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes", "on"):
        return True
    if s.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in s.split(",") if p.strip())


# key -> (parser, default)
CONFIG_SCHEMA: dict[str, tuple] = {
    "seed": (int, 0),
    "folds.k": (int, 5),
    "folds.seed": (int, 7),
    "audio.denoise": (_parse_bool, False),
    "labeller.hidden": (_parse_int_list, (128, 64)),
    "labeller.dropout": (float, 0.3),
    "labeller.lr": (float, 0.001),
    "labeller.epochs": (int, 80),
    "labeller.batch_size": (int, 32),
    "labeller.patience": (int, 10),
    "labeller.internal_folds": (int, 5),
    "labeller.val_fraction": (float, 0.2),
    "pseudo.tau": (float, 0.8),
    "pseudo.calibrate": (_parse_bool, True),
    "hybrid.lambda_fv": (float, 0.3),
    "hybrid.gt_boost": (float, 18.0),
    "hybrid.class_weight_low": (float, 1.0),
    "hybrid.class_weight_medium": (float, 1.2),
    "hybrid.class_weight_high": (float, 1.0),
    "hybrid.lr_embedding": (float, 2.5e-5),
    "hybrid.lr_features": (float, 1e-3),
    "hybrid.weight_decay": (float, 1e-5),
    "hybrid.dropout": (float, 0.3),
    "hybrid.hidden": (_parse_int_list, (128, 64)),
    "hybrid.epochs": (int, 40),
    "hybrid.batch_size": (int, 32),
    "hybrid.val_fraction": (float, 0.2),
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def labeller_config(self) -> LabellerConfig:
        v = self.values
        return LabellerConfig(
            hidden_dims=v["labeller.hidden"],
            dropout=v["labeller.dropout"],
            lr=v["labeller.lr"],
            epochs=v["labeller.epochs"],
            batch_size=v["labeller.batch_size"],
            patience=v["labeller.patience"],
            internal_folds=v["labeller.internal_folds"],
            val_fraction=v["labeller.val_fraction"],
            seed=v["seed"],
        )

    def pseudo_config(self) -> PseudoLabelConfig:
        return PseudoLabelConfig(
            tau=self.values["pseudo.tau"],
            calibrate_before_filter=self.values["pseudo.calibrate"],
        )

    def hybrid_config(self) -> HybridConfig:
        v = self.values
        return HybridConfig(
            lambda_fv=v["hybrid.lambda_fv"],
            gt_boost=v["hybrid.gt_boost"],
            class_weights=(
                v["hybrid.class_weight_low"],
                v["hybrid.class_weight_medium"],
                v["hybrid.class_weight_high"],
            ),
            lr_embedding_stream=v["hybrid.lr_embedding"],
            lr_feature_stream=v["hybrid.lr_features"],
            weight_decay=v["hybrid.weight_decay"],
            dropout=v["hybrid.dropout"],
            feature_hidden=tuple(v["hybrid.hidden"]),
            epochs=v["hybrid.epochs"],
            batch_size=v["hybrid.batch_size"],
            val_fraction=v["hybrid.val_fraction"],
            seed=v["seed"],
        )

    def write_resolved(self, path: str | Path) -> None:
        lines = ["# resolved run configuration"]
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, tuple):
                val = ",".join(str(x) for x in val)
            lines.append(f"{key} = {val}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_run_config(path: str | Path | None) -> RunConfig:
    values = {k: default for k, (_, default) in CONFIG_SCHEMA.items()}
    if path is None:
        return RunConfig(values)
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        parser, _ = CONFIG_SCHEMA[key]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return RunConfig(values)


# --- dataset manifest ---------------------------------------------------------

@dataclass
class ManifestClip:
    id: str
    path: Path
    split_role: str  # labelled | pool


@dataclass
class DatasetManifest:
    clips: list[ManifestClip]
    feature_store: Path | None
    embedding_store: Path | None
    annotations: Path | None
    fold_plan: Path | None
    base_dir: Path

    def labelled_ids(self) -> list[str]:
        return [c.id for c in self.clips if c.split_role == "labelled"]

    def pool_ids(self) -> list[str]:
        return [c.id for c in self.clips if c.split_role == "pool"]

    def clip_by_id(self) -> dict[str, ManifestClip]:
        return {c.id: c for c in self.clips}


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent

    def resolve(key: str) -> Path | None:
        val = doc.get(key)
        return (base / val) if val else None

    clips = []
    seen = set()
    for entry in doc.get("clips", []):
        cid = entry["id"]
        if cid in seen:
            raise ConfigError(f"manifest {path}: duplicate clip id {cid!r}")
        seen.add(cid)
        role = entry.get("split_role", "labelled")
        if role not in ("labelled", "pool"):
            raise ConfigError(f"manifest {path}: clip {cid}: bad split_role {role!r}")
        clips.append(ManifestClip(id=cid, path=base / entry["path"], split_role=role))
    return DatasetManifest(
        clips=clips,
        feature_store=resolve("feature_store"),
        embedding_store=resolve("embedding_store"),
        annotations=resolve("annotations"),
        fold_plan=resolve("fold_plan"),
        base_dir=base,
    )
