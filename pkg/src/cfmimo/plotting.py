"""Sum-rate versus SNR figures rendered next to the CSV output."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "none": "all users",
    "zfs": "ZFS",
    "enhanced_rate": "enhanced (sum-rate)",
    "enhanced_corr": "enhanced (correlation)",
    "exhaustive": "exhaustive",
}
NET_LABELS = {"cellfree": "CF", "multicell": "CoMP"}
MARKERS = {"none": "o", "zfs": "s", "enhanced_rate": "^", "enhanced_corr": "v", "exhaustive": "D"}


def _series(rows, network, method, precoder):
    pts = sorted((r[3], r[4]) for r in rows if r[:3] == (network, method, precoder))
    return [p[0] for p in pts], [p[1] for p in pts]


def _finish(ax, title):
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("sum-rate (bits/s/Hz)")
    ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)


def plot_report(rows, out_dir: str) -> list[str]:
    """Write one figure per network plus a network comparison; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    networks = sorted({r[0] for r in rows})
    methods = [m for m in LABELS if any(r[1] == m for r in rows)]
    precoders = sorted({r[2] for r in rows})
    paths = []

    for net in networks:
        fig, ax = plt.subplots(figsize=(6, 4.2))
        for prec in precoders:
            for m in methods:
                x, y = _series(rows, net, m, prec)
                if x:
                    ls = "-" if prec == "zf" else "--"
                    ax.plot(x, y, ls, marker=MARKERS[m], ms=4, label=f"{LABELS[m]}, {prec.upper()}")
        _finish(ax, f"{NET_LABELS.get(net, net)}: scheduling methods")
        path = os.path.join(out_dir, f"sumrate_{net}.png")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)

    if len(networks) > 1:
        fig, ax = plt.subplots(figsize=(6, 4.2))
        for m in [m for m in ("none", "enhanced_rate") if m in methods]:
            for net in networks:
                for prec in precoders:
                    x, y = _series(rows, net, m, prec)
                    ls = "-" if net == "cellfree" else "--"
                    ax.plot(x, y, ls, marker=MARKERS[m], ms=4,
                            label=f"{NET_LABELS.get(net, net)} {prec.upper()}, {LABELS[m]}")
        _finish(ax, "cell-free vs multicell")
        path = os.path.join(out_dir, "network_comparison.png")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
