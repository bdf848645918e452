"""PNG figures rendered next to the CSV/JSON artifacts (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {"t": dict(ls="--", marker="o", ms=3), "closed_loop": dict(ls="-", marker="s", ms=3)}
_LABEL = {"t": "T_k", "closed_loop": "T_k - B_k B_k^T Y_k"}


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_convergence(records, path, title="", xaxis="dim"):
    """Residual history of several runs; ``records`` maps a label to a ``ConvergenceRecord``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rec in records.items():
        mode = "closed_loop" if label.endswith("closed_loop") else "t"
        x = [r.dim if xaxis == "dim" else r.k for r in rec.rows]
        ax.semilogy(x, rec.residuals(), label=label, **_STYLE[mode])
    ax.set_xlabel("space dimension" if xaxis == "dim" else "iteration")
    ax.set_ylabel("||R_k||_F")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_hull(record, path, title=""):
    """Mirrored closed-loop projected eigenvalues and their hull at the last iteration."""
    fig, ax = plt.subplots(figsize=(5, 4))
    row = record.rows[-1]
    for eigs, mk, lab in ((row.eig_t, "x", "eig T_k"), (row.eig_cl, "o", "eig closed loop")):
        ax.plot(eigs.real, eigs.imag, mk, ms=4, mfc="none", label=lab)
    regions = [r.region for r in record.rows if r.region]
    if regions:
        v = np.array(regions[-1]["vertices"])
        if len(v) > 2:
            v = np.vstack([v, v[:1]])
        ax.plot(-v[:, 0], v[:, 1], "k-", lw=0.8, label="last selection region (mirrored back)")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_grcar(result, path):
    """Spectrum, field of values and enclosing disk next to the error history versus ``gamma^k``."""
    ex = result.extra
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    eA = ex["eig_A"]
    a1.plot(eA.real, eA.imag, ".", ms=3, label="eig(A)")
    ecl = ex["eig_closed"]
    a1.plot(ecl.real, ecl.imag, "x", ms=3, label="eig(A - BB^T X)")
    fov = -np.asarray(ex["fov"])
    a1.plot(fov.real, fov.imag, "-", lw=0.8, label="field of values")
    th = np.linspace(0, 2 * np.pi, 200)
    c, r = ex["disk_center"], ex["disk_radius"]
    a1.plot(-c + r * np.cos(th), r * np.sin(th), "k--", lw=0.8, label="enclosing disk")
    a1.set_aspect("equal")
    a1.legend(fontsize=7)

    err = np.asarray(ex["errors"])
    k = np.arange(1, err.size + 1)
    a2.semilogy(k, err, "o-", label="||X - X_k||_2")
    for g, lab in ((ex["gamma_measured_disk"], "measured disk"), (ex["gamma_paper_disk"], "c = 1.25")):
        if np.isfinite(g):
            a2.semilogy(k, err[0] * g ** (k - 1), "--", label=f"gamma^k, {lab} ({g:.3f})")
    a2.set_xlabel("iteration")
    a2.grid(True, which="both", alpha=0.3)
    a2.legend(fontsize=7)
    return _save(fig, path)
