"""Figure rendering for CLI reports.

Each plotting helper takes the rows written to the delimited output and
saves a PNG next to it.  matplotlib is imported lazily with the Agg
backend so headless library use never touches a display.
"""

from __future__ import annotations


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_psi_table(rows: list[dict], path: str) -> None:
    """Expansion factor against dimension."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    finite = [r for r in rows if isinstance(r["L"], int)]
    ax.plot([r["L"] for r in finite], [r["psi"] for r in finite], "o-", ms=4)
    limits = [r for r in rows if not isinstance(r["L"], int)]
    for r in limits:
        ax.axhline(r["psi"], color="gray", ls="--", lw=1, label="limit")
    ax.set_xlabel("dimension L")
    ax.set_ylabel(r"expansion factor $\psi_L$")
    ax.grid(alpha=0.3)
    if limits:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(rows: list[dict], path: str) -> None:
    """Numerical and theoretical lower hulls against packet-loss probability."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    klist = sorted({r["K"] for r in rows})
    colors = {}
    for K in klist:
        sub = sorted((r for r in rows if r["K"] == K), key=lambda r: r["p"])
        p = [r["p"] for r in sub]
        (line,) = ax.plot(p, [r["d_numeric_dB"] for r in sub], lw=2, label=f"K={K} measured")
        colors[K] = line.get_color()
        ax.plot(p, [r["d_theory_dB"] for r in sub], lw=1, ls="--", color=colors[K],
                label=f"K={K} theory")
    ax.set_xlabel("packet-loss probability p")
    ax.set_ylabel("expected distortion [dB]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_design_sweep(rows: list[dict], path: str) -> None:
    """Optimal admissible index against packet-loss probability, one curve per K."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    klist = sorted({r["K"] for r in rows})
    for K in klist:
        sub = sorted((r for r in rows if r["K"] == K), key=lambda r: r["p"])
        p = [r["p"] for r in sub]
        ax.step(p, [r["N_admissible"] for r in sub], where="post", label=f"K={K} admissible")
        finite = [r for r in sub if r["N_unrestricted"] != float("inf")]
        ax.plot([r["p"] for r in finite], [r["N_unrestricted"] for r in finite],
                lw=1, ls=":", color=ax.lines[-1].get_color())
    ax.set_xlabel("packet-loss probability p")
    ax.set_ylabel("index N")
    ax.set_yscale("log")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
