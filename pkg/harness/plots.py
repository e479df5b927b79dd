"""
FAR vs pruning step curves
"""

from pathlib import Path
from typing import List

import pandas as pd
import plotly.graph_objects as go

CURVE_DIV_ID = "far-curve"
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def far_columns(history: pd.DataFrame) -> List[str]:
    """Per-SNR dev FAR columns of a history table, in file order"""
    return [c for c in history.columns if c.startswith("dev_FAR_")]


def curve_frame(history: pd.DataFrame) -> pd.DataFrame:
    columns = ["step", "phase", "t", "global_sparsity"] + far_columns(history)
    return history[[c for c in columns if c in history.columns]].reset_index(drop=True)


def far_curve_figure(curve: pd.DataFrame, title: str) -> go.Figure:
    """
    One line per SNR plus a dashed reference at the unpruned (first step) FAR

    Args:
        curve: Output of curve_frame
        title: Figure title

    Returns:
        plotly Figure
    """
    fig = go.Figure()
    steps = curve["step"].tolist()
    for i, column in enumerate(far_columns(curve)):
        color = PALETTE[i % len(PALETTE)]
        label = column.removeprefix("dev_FAR_")
        values = (100.0 * curve[column]).tolist()
        fig.add_trace(go.Scatter(x=steps, y=values, mode="lines+markers", name=f"FAR {label}",
                                 line=dict(color=color)))
        fig.add_trace(go.Scatter(x=[steps[0], steps[-1]], y=[values[0], values[0]], mode="lines",
                                 name=f"unpruned {label}", line=dict(color=color, dash="dash")))

    fig.update_layout(
        title=title,
        xaxis_title="Pruning iteration",
        yaxis_title="FAR (%)",
        template="plotly_white",
        hovermode="x unified",
        height=450,
    )
    return fig


def write_curve_html(fig: go.Figure, path: Path):
    html = fig.to_html(include_plotlyjs=True, full_html=True, div_id=CURVE_DIV_ID)
    Path(path).write_text(html, encoding="utf-8")
