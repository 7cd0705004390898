"""
Dataset index validator for spiketex

Validates a dataset index (the JSON written next to the event files) for data
quality and consistency with the manifest it was built from. Reports follow
the {"is_valid", "warnings", "errors"} shape; callers decide whether to raise.
"""

from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from ..utils.logging import get_logger

logger = get_logger(__name__)

REQUIRED_TRIAL_FIELDS = ("id", "file", "texture_id", "label", "split", "motion", "seed")
VALID_SPLITS = {"train", "test"}


def _report() -> Dict[str, Any]:
    return {"is_valid": True, "warnings": [], "errors": []}


class DatasetIndexValidator:
    """Validates dataset index records"""

    def validate_structure(self, index: Mapping[str, Any]) -> Dict[str, Any]:
        """Required fields, unique ids, known splits and class labels"""
        validation = _report()

        for key in ("name", "created", "trials"):
            if key not in index:
                validation["errors"].append(f"Index missing top-level field: {key}")
        trials = index.get("trials", [])
        if not isinstance(trials, list):
            validation["errors"].append("Index 'trials' must be a list")
            trials = []

        seen_ids = set()
        for i, trial in enumerate(trials):
            missing = [f for f in REQUIRED_TRIAL_FIELDS if f not in trial]
            if missing:
                validation["errors"].append(f"Trial {i} missing fields: {', '.join(missing)}")
                continue
            if trial["id"] in seen_ids:
                validation["errors"].append(f"Duplicate trial id {trial['id']}")
            seen_ids.add(trial["id"])
            if not 1 <= int(trial["texture_id"]) <= 10:
                validation["errors"].append(f"Trial {trial['id']} has texture id {trial['texture_id']}")
            if trial["split"] not in VALID_SPLITS:
                validation["errors"].append(f"Trial {trial['id']} has unknown split '{trial['split']}'")

        validation["is_valid"] = not validation["errors"]
        return validation

    def validate_ranges(
        self,
        trials: Sequence[Mapping[str, Any]],
        ranges: Mapping[str, Tuple[float, float]],
    ) -> Dict[str, Any]:
        """Every sampled motion value must lie inside its declared range"""
        validation = _report()
        for trial in trials:
            motion = trial.get("motion", {})
            for name, (lo, hi) in ranges.items():
                if name not in motion:
                    continue
                value = float(motion[name])
                if not lo <= value <= hi:
                    validation["errors"].append(
                        f"Trial {trial.get('id')} {name}={value} outside [{lo}, {hi}]"
                    )
        validation["is_valid"] = not validation["errors"]
        return validation

    def validate_balance(
        self,
        trials: Sequence[Mapping[str, Any]],
        expected_per_class: Optional[Mapping[int, int]] = None,
    ) -> Dict[str, Any]:
        """Per-class counts match the declared counts; uneven classes are a warning"""
        validation = _report()
        counts = Counter(int(t["texture_id"]) for t in trials)
        validation["per_class"] = dict(sorted(counts.items()))
        if expected_per_class is not None:
            for texture_id, expected in expected_per_class.items():
                found = counts.get(int(texture_id), 0)
                if found != expected:
                    validation["errors"].append(
                        f"Texture {texture_id}: expected {expected} trials, found {found}"
                    )
        elif counts and len(set(counts.values())) > 1:
            validation["warnings"].append(f"Unbalanced classes: {dict(counts)}")
        validation["is_valid"] = not validation["errors"]
        return validation

    def validate_split(self, trials: Sequence[Mapping[str, Any]]) -> Dict[str, Any]:
        """Train and test must not share trials (same file or same seed)"""
        validation = _report()
        by_split: Dict[str, List[Mapping[str, Any]]] = {s: [] for s in VALID_SPLITS}
        for trial in trials:
            by_split.setdefault(trial.get("split", ""), []).append(trial)
        for key in ("file", "seed"):
            shared = {t[key] for t in by_split["train"]} & {t[key] for t in by_split["test"]}
            if shared:
                validation["errors"].append(
                    f"{len(shared)} trials share '{key}' between train and test"
                )
        if not by_split["test"]:
            validation["warnings"].append("Index has no test trials")
        validation["is_valid"] = not validation["errors"]
        return validation

    def validate_files(self, root: Path, trials: Sequence[Mapping[str, Any]]) -> Dict[str, Any]:
        validation = _report()
        for trial in trials:
            path = root / trial["file"]
            if not path.exists():
                validation["errors"].append(f"Missing event file for trial {trial['id']}: {path}")
        validation["is_valid"] = not validation["errors"]
        return validation

    def validate_index(
        self,
        index: Mapping[str, Any],
        root: Optional[Path] = None,
        ranges: Optional[Mapping[str, Tuple[float, float]]] = None,
        expected_per_class: Optional[Mapping[int, int]] = None,
    ) -> Dict[str, Any]:
        """Run every applicable check and merge the reports"""
        reports = [self.validate_structure(index)]
        trials = index.get("trials", []) if reports[0]["is_valid"] else []
        if trials:
            reports.append(self.validate_balance(trials, expected_per_class))
            reports.append(self.validate_split(trials))
            if ranges:
                reports.append(self.validate_ranges(trials, ranges))
            if root is not None:
                reports.append(self.validate_files(root, trials))

        merged = _report()
        for report in reports:
            merged["warnings"].extend(report["warnings"])
            merged["errors"].extend(report["errors"])
        merged["is_valid"] = not merged["errors"]
        for message in merged["warnings"]:
            logger.warning(message)
        return merged
