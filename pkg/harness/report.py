"""
Report assembly from a directory of finished runs

Outputs (all in one directory):
    table_far.csv            FAR per SNR at the calibrated operating point, one row per run
    table_pruning.csv        pruned runs next to their unpruned counterparts
    table_layer_sparsity.csv pruned % per layer type
    curve_<run>.csv/.html    dev FAR vs pruning step
    skipped.csv              artifacts that could not be produced, with the reason
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import pandas as pd

from harness.plots import curve_frame, far_columns, far_curve_figure, write_curve_html

SKIP_COLUMNS = ["artifact", "reason"]
FAR_TABLE_COLUMNS = ["run", "kind", "modality", "threshold", "one_minus_frr", "far"]
PRUNED_KINDS = ("lth-if", "oneshot")


@dataclass
class RunInfo:
    name: str
    path: Path
    meta: dict

    @property
    def kind(self) -> str:
        return self.meta.get("kind", "")

    @property
    def modality(self) -> str:
        return self.meta.get("modality", "")

    def table(self, file_name: str, dtype: Optional[dict] = None) -> Optional[pd.DataFrame]:
        path = self.path / file_name
        if not path.exists():
            return None
        return pd.read_csv(path, dtype=dtype)


@dataclass
class ReportBuilder:
    """Collects tables and skip reasons while walking the runs"""

    root: Path
    out: Path
    skipped: List[dict] = field(default_factory=list)

    def skip(self, artifact: str, reason: str):
        print(f"   ⚠️  Skipping {artifact}: {reason}")
        self.skipped.append({"artifact": artifact, "reason": reason})

    def discover(self) -> List[RunInfo]:
        runs = []
        for meta_path in sorted(self.root.rglob("run.json")):
            if self.out in meta_path.parents:
                continue
            try:
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                self.skip(str(meta_path.relative_to(self.root)), f"unreadable run.json ({e})")
                continue
            runs.append(RunInfo(name=meta_path.parent.name, path=meta_path.parent, meta=meta))
        return runs

    def far_table(self, runs: List[RunInfo]) -> pd.DataFrame:
        rows = []
        for run in runs:
            table = run.table("eval.csv", dtype={"stratum": str})
            if table is None:
                self.skip(f"table_far:{run.name}", "no eval.csv in run directory")
                continue
            row = {"run": run.name, "kind": run.kind, "modality": run.modality}
            for _, stratum in table.iterrows():
                if stratum["stratum"] == "all":
                    row["threshold"] = stratum["threshold"]
                    row["one_minus_frr"] = 1.0 - stratum["frr"]
                    row["far"] = stratum["far"]
                else:
                    row[f"far_{stratum['stratum']}"] = stratum["far"]
            rows.append(row)
        df = pd.DataFrame(rows)
        if df.empty:
            return pd.DataFrame(columns=FAR_TABLE_COLUMNS)
        extra = [c for c in df.columns if c not in FAR_TABLE_COLUMNS]
        return df[FAR_TABLE_COLUMNS + extra]

    def pruning_table(self, runs: List[RunInfo], far: pd.DataFrame) -> pd.DataFrame:
        """Pruned fraction and FAR of every pruned run beside the unpruned run of its modality"""
        rows = []
        far_by_run = far.set_index("run") if not far.empty else None
        for run in runs:
            if run.kind not in PRUNED_KINDS and run.kind != "train":
                continue
            sparsity = run.table("sparsity.csv")
            if sparsity is None:
                self.skip(f"table_pruning:{run.name}", "no sparsity.csv in run directory")
                continue
            row = {
                "run": run.name,
                "modality": run.modality,
                "method": "unpruned" if run.kind == "train" else run.meta.get("regime", run.kind),
                "pruned_pct": float(sparsity["total"].iloc[0]),
            }
            if far_by_run is not None and run.name in far_by_run.index:
                for column in far_by_run.columns:
                    if column == "one_minus_frr" or column.startswith("far"):
                        row[column] = far_by_run.loc[run.name, column]
            rows.append(row)
        return pd.DataFrame(rows, columns=None if rows else ["run", "modality", "method", "pruned_pct"])

    def layer_table(self, runs: List[RunInfo]) -> pd.DataFrame:
        frames = []
        for run in runs:
            if run.kind not in PRUNED_KINDS:
                continue
            sparsity = run.table("sparsity.csv")
            if sparsity is None:
                self.skip(f"table_layer_sparsity:{run.name}", "no sparsity.csv in run directory")
                continue
            sparsity.insert(0, "run", run.name)
            frames.append(sparsity)
        if not frames:
            return pd.DataFrame(columns=["run", "model", "conv", "lstm", "fc", "total"])
        return pd.concat(frames, ignore_index=True)

    def curves(self, runs: List[RunInfo]) -> List[str]:
        written = []
        for run in runs:
            if run.kind != "lth-if":
                continue
            history = run.table("history.csv")
            if history is None:
                self.skip(f"curve_{run.name}", "no history.csv in run directory")
                continue
            if history.empty or not far_columns(history):
                self.skip(f"curve_{run.name}", "history has no dev FAR columns")
                continue
            curve = curve_frame(history)
            curve.to_csv(self.out / f"curve_{run.name}.csv", index=False, lineterminator="\n")
            fig = far_curve_figure(curve, f"{run.name}: dev FAR vs pruning iteration")
            write_curve_html(fig, self.out / f"curve_{run.name}.html")
            written.append(run.name)
            print(f"   ✅ curve_{run.name}: {len(curve)} points")
        return written


def build_report(root: Path, out: Path) -> pd.DataFrame:
    """
    Assemble every table and curve that the runs under root allow

    Args:
        root: Directory searched recursively for run.json files
        out: Report directory (created)

    Returns:
        The skip list as a DataFrame (empty when nothing was skipped)
    """
    root = Path(root)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    print("=" * 60)
    print("📑 BUILDING REPORT")
    print("=" * 60)

    builder = ReportBuilder(root=root, out=out)
    runs = builder.discover() if root.exists() else []
    print(f"📂 Found {len(runs)} run(s) under {root}")

    far = builder.far_table(runs)
    far.to_csv(out / "table_far.csv", index=False, lineterminator="\n")
    builder.pruning_table(runs, far).to_csv(out / "table_pruning.csv", index=False, lineterminator="\n")
    builder.layer_table(runs).to_csv(out / "table_layer_sparsity.csv", index=False, lineterminator="\n")
    builder.curves(runs)

    skipped = pd.DataFrame(builder.skipped, columns=SKIP_COLUMNS)
    skipped.to_csv(out / "skipped.csv", index=False, lineterminator="\n")
    print(f"✅ Report written to {out} ({len(skipped)} skipped artifact(s))")
    return skipped
