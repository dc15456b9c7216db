"""Rendering of sweep results to PNG files alongside the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .sweep import SweepResult  # noqa: E402

__all__ = ["render_figures"]


def _label(prefix: str, m: int, n: int) -> str:
    return f"|{prefix}{m + 1}{n + 1}|"


def render_figures(result: SweepResult, out_dir, stem: str = "sweep") -> list[Path]:
    """Write impedance, scattering and convergence plots; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    f = result.frequencies
    f_ghz = f / 1e9
    marker = "o" if f.size <= 40 else None

    have_z = any(r.z is not None for r in result.results)
    have_s = any(r.s is not None for r in result.results)
    have_u = any(r.voltages is not None for r in result.results)

    if have_z:
        z = result.z
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for m in range(z.shape[1]):
            for n in range(z.shape[2]):
                ax.semilogy(f_ghz, np.abs(z[:, m, n]), marker=marker,
                            markersize=3, label=_label("Z", m, n))
        ax.set_xlabel("frequency / GHz")
        ax.set_ylabel("|Z| / Ohm")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        path = out_dir / f"{stem}_impedance.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    if have_s:
        s = result.s
        fig, ax = plt.subplots(figsize=(7, 4.5))
        with np.errstate(divide="ignore", invalid="ignore"):
            db = 20.0 * np.log10(np.abs(s))
        for m in range(s.shape[1]):
            for n in range(s.shape[2]):
                ax.plot(f_ghz, db[:, m, n], marker=marker, markersize=3,
                        label=_label("S", m, n)[1:-1])
        ax.set_xlabel("frequency / GHz")
        ax.set_ylabel("|S| / dB")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        path = out_dir / f"{stem}_sparams.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    if have_u and not have_z:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        u = np.asarray([
            r.voltages if r.voltages is not None
            else np.full(len(result.probe_names), np.nan)
            for r in result.results
        ])
        for m in range(u.shape[1]):
            ax.semilogy(f_ghz, np.abs(u[:, m]), marker=marker, markersize=3,
                        label=f"|U {result.probe_names[m]}|")
        ax.set_xlabel("frequency / GHz")
        ax.set_ylabel("|U| / V")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        path = out_dir / f"{stem}_voltages.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    iters = [r.iterations for r in result.results]
    resid = [max(r.residual, 1e-300) for r in result.results]
    ax.plot(f_ghz, iters, marker=marker, markersize=3, color="tab:blue",
            label="iterations")
    ax.set_xlabel("frequency / GHz")
    ax.set_ylabel("iterations", color="tab:blue")
    ax2 = ax.twinx()
    ax2.semilogy(f_ghz, resid, marker=marker, markersize=3, color="tab:red",
                 label="residual")
    ax2.set_ylabel("final relative residual", color="tab:red")
    ax.grid(True, alpha=0.3)
    path = out_dir / f"{stem}_convergence.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    return written
