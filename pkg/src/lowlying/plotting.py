"""Figures rendered next to CSV reports (matplotlib is optional)."""
from __future__ import annotations

import sys
from pathlib import Path


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    return plt


def figure_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_suffix(".png")


def render(kind: str, rows: list[dict], out: str | Path) -> Path | None:
    """Draw the figure for one report kind; returns the PNG path or None."""
    plt = _pyplot()
    if plt is None:
        print("matplotlib not installed; figure skipped", file=sys.stderr)
        return None
    drawer = _DRAWERS.get(kind)
    if drawer is None or not rows:
        return None
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    drawer(ax, rows)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = figure_path(out)
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _numeric(rows, key):
    return [float(r[key]) for r in rows if r.get(key) not in (None, "")]


def _draw_petersson(ax, rows):
    rows = [r for r in rows if r.get("status") != "empty space"]
    ks = [int(r["k"]) for r in rows]
    ax.semilogy(ks, [max(float(r["max_identity_residual"]), 1e-300) for r in rows], "o-", label="identity residual")
    ax.semilogy(ks, [max(abs(float(r["omega_minus_1"])), 1e-300) for r in rows], "s-", label="|Omega_k - 1|")
    ax.semilogy(ks, [10 * 2.0 ** (-k) for k in ks], "--", label="10 2^-k")
    ax.set_xlabel("weight k")
    ax.legend()


def _draw_density(ax, rows):
    ks = [int(r["k"]) for r in rows]
    ax.plot(ks, _numeric(rows, "total"), "o-", label="density")
    ax.plot(ks, _numeric(rows, "displayed_terms"), "x--", label="gamma + pi + prime squares")
    ax.plot(ks, _numeric(rows, "ks_prediction"), ":", label="Katz-Sarnak")
    ax.set_xlabel("weight k")
    ax.legend()


def _draw_averaged(ax, rows):
    for sign in ("+", "-", "mixed"):
        sel = [r for r in rows if r["sign"] == sign]
        if sel:
            ax.plot(_numeric(sel, "K"), _numeric(sel, "value"), "o-", label=f"sign {sign}")
    ax.set_xscale("log")
    ax.set_xlabel("K")
    ax.legend()


def _draw_expansion(ax, rows):
    for sign in ("+", "-", "mixed"):
        sel = [r for r in rows if r["sign"] == sign]
        if sel:
            ax.plot(_numeric(sel, "K"), [abs(v) for v in _numeric(sel, "difference")], "o-", label=f"sign {sign}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("K")
    ax.set_ylabel("|direct - expansion|")
    ax.legend()


def _draw_bessel(ax, rows):
    sel = [r for r in rows if r["check"] == "averaged_even"]
    ax.loglog(_numeric(sel, "parameter"), _numeric(sel, "value"), "o-", label="max |2 sum - h(x/K)| K^3 / x")
    ax.set_xlabel("K")
    ax.legend()


_DRAWERS = {
    "verify-petersson": _draw_petersson,
    "density": _draw_density,
    "averaged-density": _draw_averaged,
    "expansion": _draw_expansion,
    "bessel-check": _draw_bessel,
}
